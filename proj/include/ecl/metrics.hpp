#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "ecl/tensor.hpp"

namespace ecl {

/// Per-member class probabilities for one evaluation batch: n tensors of
/// shape (b, K), each row a probability vector.
struct PredictionBatch {
    std::vector<Tensor> member_probs;

    std::size_t n() const { return member_probs.size(); }
    std::size_t batch() const;
    std::size_t classes() const;
    void validate() const;
};

/// Row t (1-based) holds the accuracies on tasks 1..t measured after training
/// stage t. The multitask record is a single row over all tasks.
struct AccuracyMatrix {
    std::vector<std::vector<double>> rows;

    std::size_t T() const { return rows.size(); }
    double at(std::size_t t, std::size_t tau) const;  // 1-based
    void validate() const;
};

struct MetricsSummary {
    double final_accuracy = 0.0;
    double forgetting = 0.0;
    double learning_accuracy = 0.0;
    std::optional<double> forgetting_improvement;
};

/// Argmax of the mean probability vector; ties go to the lowest class index.
std::vector<int> combine_average(const PredictionBatch& preds);

/// The most confident member (highest max probability; ties to the lowest
/// member index) decides with its own argmax.
std::vector<int> combine_hard_vote(const PredictionBatch& preds);

/// Modal argmax across members; vote ties fall back to combine_average
/// restricted to the tied classes.
std::vector<int> combine_majority_vote(const PredictionBatch& preds);

/// Mean of the last row: A_T = (1/T) sum_tau a[T][tau].
double final_accuracy(const AccuracyMatrix& a);

/// F_T = (1/(T-1)) sum_{tau<T} max_{t<T} (a[t][tau] - a[T][tau]); F_1 = 0.
double forgetting(const AccuracyMatrix& a);

/// LA_T = (1/T) sum_tau a[tau][tau].
double learning_accuracy(const AccuracyMatrix& a);

/// FI = F(single) - F(method); positive means the method forgets less.
double forgetting_improvement(double f_single, double f_method);

MetricsSummary summarize(const AccuracyMatrix& a,
                         std::optional<double> baseline_forgetting = std::nullopt);

}  // namespace ecl
