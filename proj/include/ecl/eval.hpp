#pragma once

#include <cstddef>
#include <vector>

#include "ecl/metrics.hpp"
#include "ecl/mlp.hpp"
#include "ecl/tasks.hpp"
#include "ecl/weightspace.hpp"

namespace ecl {

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

/// Mean cross-entropy loss and top-1 accuracy of one model over a test set.
/// Eval mode, deterministic.
EvalResult evaluate(const MlpSpec& spec, const ParamVector& params,
                    const std::vector<Example>& examples, std::size_t batch_size = 256);

/// Softmax probabilities (N, K) of one model over a set of examples.
Tensor predict_probs(const MlpSpec& spec, const ParamVector& params,
                     const std::vector<Example>& examples, std::size_t batch_size = 256);

/// Per-member probabilities for combiner-based ensemble evaluation.
PredictionBatch ensemble_probs(const MlpSpec& spec, const std::vector<ParamVector>& members,
                               const std::vector<Example>& examples,
                               std::size_t batch_size = 256);

enum class Combiner { kAveraging, kHardVote, kMajorityVote };

std::vector<int> combine(const PredictionBatch& preds, Combiner strategy);

double accuracy_of(const std::vector<int>& predicted, const std::vector<Example>& examples);

/// BE evaluation: averages the n materialized members' predictions.
EvalResult evaluate_batch_ensemble(const MlpSpec& spec, const BatchEnsembleWeights& w,
                                   const std::vector<Example>& examples,
                                   std::size_t batch_size = 256);

}  // namespace ecl
