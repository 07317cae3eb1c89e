#pragma once

#include <cstddef>
#include <vector>

#include "ecl/mlp.hpp"
#include "ecl/params.hpp"
#include "ecl/rng.hpp"
#include "ecl/tensor.hpp"

namespace ecl {

/// n weight vectors sharing one layout; the members span a simplex region of
/// weight space (or act as independent ensemble members).
struct EnsembleWeights {
    std::vector<ParamVector> members;

    std::size_t n() const { return members.size(); }
    void validate() const;
};

/// Convex coefficients on the n-simplex.
struct SimplexPoint {
    std::vector<double> alpha;

    std::size_t n() const { return alpha.size(); }
    void validate() const;

    static SimplexPoint uniform(std::size_t n);
    static SimplexPoint unit(std::size_t n, std::size_t i);
};

/// Shared slow weights plus per-layer, per-member rank-1 fast weights
/// (r_i s_i^T). The fast ParamVector's layout has entries layerL.rM / layerL.sM.
struct BatchEnsembleWeights {
    ParamVector shared;
    ParamVector fast;
    std::size_t n = 0;
};

/// Member 1 is a standard fan-in init; members 2..n are member 1 times
/// independent elementwise N(1, sigma_init) draws. Each member uses its own
/// child stream, so member i's init never depends on n.
EnsembleWeights init_ensemble(const MlpSpec& spec, std::size_t n, double sigma_init,
                              SeededRng& rng);

/// Uniform draw from the n-simplex (i.i.d. exponentials normalized by sum).
SimplexPoint sample_simplex(std::size_t n, SeededRng& rng);

/// Elementwise sum_i alpha_i * member_i. alpha = e_i returns member i bitwise.
ParamVector convex_combine(const EnsembleWeights& w, const SimplexPoint& alpha);

/// Uniform convex combination (1/n) sum_i member_i; bitwise equal to
/// convex_combine with uniform alpha.
ParamVector midpoint(const EnsembleWeights& w);

/// Chain rule through the mixing map: member i's gradient is
/// alpha_i * grad_mixed.
std::vector<ParamVector> subspace_grad_distribute(const ParamVector& grad_mixed,
                                                  const SimplexPoint& alpha);

/// Elementwise product with independent N(1, sigma) draws. sigma = 0 is the
/// identity.
ParamVector multiplicative_perturb(const ParamVector& params, double sigma, SeededRng& rng);

LayoutPtr batch_ensemble_fast_layout(const MlpSpec& spec, std::size_t n);

/// Shared weights get a standard fan-in init; fast weights are N(1, sigma_init)
/// so sigma_init = 0 makes every member equal the shared model.
BatchEnsembleWeights init_batch_ensemble(const MlpSpec& spec, std::size_t n, double sigma_init,
                                         SeededRng& rng);

/// Materialize member i's effective weights: each layer's weight matrix becomes
/// W o (r_i s_i^T); biases are the shared ones.
ParamVector batch_ensemble_member(const MlpSpec& spec, const BatchEnsembleWeights& w,
                                  std::size_t i);

/// Activation record for batch_ensemble_backward.
struct BatchEnsembleCache {
    ParamVector shared;
    ParamVector fast;
    std::vector<std::size_t> assignment;
    std::vector<Tensor> layer_inputs;   // x fed to each layer
    std::vector<Tensor> scaled_inputs;  // x o r_a
    std::vector<Tensor> matmul_out;     // (x o r_a) W, before the s scaling and bias
    std::vector<std::vector<unsigned char>> relu_mask;
    std::vector<std::vector<double>> dropout_scale;
    std::size_t batch = 0;
};

/// Forward where example j flows through effective weights
/// omega o (r_{a_j} s_{a_j}^T), vectorized as ((x o R) W) o S + b.
Tensor batch_ensemble_forward(const MlpSpec& spec, const BatchEnsembleWeights& w,
                              const Tensor& batch, const std::vector<std::size_t>& assignment,
                              RunMode mode, SeededRng* rng, BatchEnsembleCache* cache = nullptr);

struct BatchEnsembleGrads {
    ParamVector shared;
    ParamVector fast;
};

BatchEnsembleGrads batch_ensemble_backward(const MlpSpec& spec, const BatchEnsembleCache& cache,
                                           const Tensor& grad_logits);

}  // namespace ecl
