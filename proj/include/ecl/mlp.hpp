#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "ecl/params.hpp"
#include "ecl/rng.hpp"
#include "ecl/tensor.hpp"

namespace ecl {

enum class RunMode { kTrain, kEval };

/// Activation record produced by mlp_forward and consumed by mlp_backward.
/// Holds the parameters it was built with so the backward pass cannot be fed
/// a stale weight set.
struct ForwardCache {
    ParamVector params;
    std::vector<Tensor> layer_inputs;                    // input to each dense layer
    std::vector<std::vector<unsigned char>> relu_mask;   // per hidden layer, b x width
    std::vector<std::vector<double>> dropout_scale;      // per hidden layer; empty in eval
    std::size_t batch = 0;
};

LayoutPtr mlp_layout(const MlpSpec& spec);

/// Fan-in-scaled random init: weights ~ N(0, 2/fan_in), biases zero.
ParamVector init_mlp_params(const MlpSpec& spec, SeededRng& rng);

/// Forward pass over a (b, input_dim) batch. In train mode, inverted dropout
/// is applied to hidden activations and rng must be non-null when
/// dropout_rate > 0; eval mode is deterministic. Pass a cache to enable
/// mlp_backward.
Tensor mlp_forward(const MlpSpec& spec, const ParamVector& params, const Tensor& batch,
                   RunMode mode, SeededRng* rng, ForwardCache* cache = nullptr);

struct LossGrad {
    double loss = 0.0;
    Tensor grad_logits;
};

/// Softmax cross-entropy with mean-over-batch reduction. grad_logits rows are
/// (softmax(logits_row) - onehot(label)) / batch, the exact gradient of the
/// returned loss.
LossGrad cross_entropy(const Tensor& logits, const std::vector<int>& labels);

/// Row-wise stable softmax.
Tensor softmax(const Tensor& logits);

/// Backpropagate grad_logits through the cached forward pass; the result has
/// the layout of the cached parameters.
ParamVector mlp_backward(const MlpSpec& spec, const ForwardCache& cache, const Tensor& grad_logits);

/// Central finite differences of an arbitrary scalar loss, one coordinate at a
/// time: (L(p + eps e_j) - L(p - eps e_j)) / (2 eps).
ParamVector finite_diff_grad(const std::function<double(const ParamVector&)>& loss_fn,
                             const ParamVector& params, double eps);

}  // namespace ecl
