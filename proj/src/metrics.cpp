#include "ecl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ecl/errors.hpp"

namespace ecl {

namespace {

std::size_t argmax_row(const double* p, std::size_t k) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c)
        if (p[c] > p[best]) best = c;
    return best;
}

}  // namespace

std::size_t PredictionBatch::batch() const {
    if (member_probs.empty()) throw InputError("PredictionBatch: no members");
    return member_probs[0].rows();
}

std::size_t PredictionBatch::classes() const {
    if (member_probs.empty()) throw InputError("PredictionBatch: no members");
    return member_probs[0].cols();
}

void PredictionBatch::validate() const {
    if (member_probs.empty()) throw InputError("PredictionBatch: no members");
    const std::size_t b = member_probs[0].rows(), k = member_probs[0].cols();
    for (const Tensor& t : member_probs) {
        if (t.shape.size() != 2 || t.rows() != b || t.cols() != k)
            throw DimensionError("PredictionBatch: inconsistent member shapes");
        for (std::size_t r = 0; r < b; ++r) {
            double sum = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                const double p = t.at(r, c);
                if (!(p >= 0.0 && p <= 1.0))
                    throw InputError("PredictionBatch: probability outside [0,1]");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-9)
                throw InputError("PredictionBatch: row does not sum to 1");
        }
    }
}

std::vector<int> combine_average(const PredictionBatch& preds) {
    const std::size_t n = preds.n(), b = preds.batch(), k = preds.classes();
    std::vector<int> out(b);
    std::vector<double> mean(k);
    for (std::size_t r = 0; r < b; ++r) {
        std::fill(mean.begin(), mean.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* p = preds.member_probs[i].row_ptr(r);
            for (std::size_t c = 0; c < k; ++c) mean[c] += p[c];
        }
        out[r] = static_cast<int>(argmax_row(mean.data(), k));
    }
    return out;
}

std::vector<int> combine_hard_vote(const PredictionBatch& preds) {
    const std::size_t n = preds.n(), b = preds.batch(), k = preds.classes();
    std::vector<int> out(b);
    for (std::size_t r = 0; r < b; ++r) {
        std::size_t best_member = 0;
        double best_conf = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* p = preds.member_probs[i].row_ptr(r);
            const double conf = p[argmax_row(p, k)];
            if (conf > best_conf) {
                best_conf = conf;
                best_member = i;
            }
        }
        const double* p = preds.member_probs[best_member].row_ptr(r);
        out[r] = static_cast<int>(argmax_row(p, k));
    }
    return out;
}

std::vector<int> combine_majority_vote(const PredictionBatch& preds) {
    const std::size_t n = preds.n(), b = preds.batch(), k = preds.classes();
    std::vector<int> out(b);
    std::vector<std::size_t> votes(k);
    std::vector<double> mean(k);
    for (std::size_t r = 0; r < b; ++r) {
        std::fill(votes.begin(), votes.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* p = preds.member_probs[i].row_ptr(r);
            votes[argmax_row(p, k)] += 1;
        }
        const std::size_t top = *std::max_element(votes.begin(), votes.end());
        std::size_t winner = k;  // sentinel: unset
        bool tie = false;
        for (std::size_t c = 0; c < k; ++c) {
            if (votes[c] != top) continue;
            if (winner == k)
                winner = c;
            else
                tie = true;
        }
        if (tie) {
            // averaging fallback restricted to the tied classes
            std::fill(mean.begin(), mean.end(), -1.0);
            for (std::size_t c = 0; c < k; ++c) {
                if (votes[c] != top) continue;
                mean[c] = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    mean[c] += preds.member_probs[i].at(r, c);
            }
            winner = argmax_row(mean.data(), k);
        }
        out[r] = static_cast<int>(winner);
    }
    return out;
}

double AccuracyMatrix::at(std::size_t t, std::size_t tau) const {
    if (t < 1 || t > rows.size() || tau < 1 || tau > rows[t - 1].size())
        throw InputError("AccuracyMatrix: index (" + std::to_string(t) + ", " +
                         std::to_string(tau) + ") out of range");
    return rows[t - 1][tau - 1];
}

void AccuracyMatrix::validate() const {
    if (rows.empty()) throw InputError("AccuracyMatrix: empty");
    for (const auto& row : rows) {
        if (row.empty()) throw InputError("AccuracyMatrix: empty row");
        for (double a : row)
            if (!(a >= 0.0 && a <= 1.0))
                throw InputError("AccuracyMatrix: accuracy outside [0,1]");
    }
}

double final_accuracy(const AccuracyMatrix& a) {
    a.validate();
    const auto& last = a.rows.back();
    double sum = 0.0;
    for (double v : last) sum += v;
    return sum / static_cast<double>(last.size());
}

double forgetting(const AccuracyMatrix& a) {
    a.validate();
    const std::size_t big_t = a.T();
    if (big_t == 1) return 0.0;
    const auto& last = a.rows.back();
    double sum = 0.0;
    std::size_t terms = 0;
    for (std::size_t tau = 1; tau < last.size() && tau < big_t; ++tau) {
        double best = -2.0;
        for (std::size_t t = tau; t <= big_t - 1; ++t) {
            if (a.rows[t - 1].size() < tau) continue;
            best = std::max(best, a.rows[t - 1][tau - 1]);
        }
        if (best < -1.0) continue;  // no earlier measurement of this task
        sum += best - last[tau - 1];
        terms += 1;
    }
    if (terms == 0) return 0.0;
    return sum / static_cast<double>(big_t - 1);
}

double learning_accuracy(const AccuracyMatrix& a) {
    a.validate();
    double sum = 0.0;
    std::size_t terms = 0;
    for (std::size_t t = 1; t <= a.T(); ++t) {
        if (a.rows[t - 1].size() >= t) {
            sum += a.rows[t - 1][t - 1];
            terms += 1;
        }
    }
    if (terms == 0) throw InputError("AccuracyMatrix: no diagonal entries");
    return sum / static_cast<double>(terms);
}

double forgetting_improvement(double f_single, double f_method) {
    return f_single - f_method;
}

MetricsSummary summarize(const AccuracyMatrix& a, std::optional<double> baseline_forgetting) {
    MetricsSummary s;
    s.final_accuracy = final_accuracy(a);
    s.forgetting = forgetting(a);
    s.learning_accuracy = learning_accuracy(a);
    if (baseline_forgetting)
        s.forgetting_improvement = forgetting_improvement(*baseline_forgetting, s.forgetting);
    return s;
}

}  // namespace ecl
