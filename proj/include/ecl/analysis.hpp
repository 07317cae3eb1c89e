#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ecl/eval.hpp"
#include "ecl/mlp.hpp"
#include "ecl/tasks.hpp"
#include "ecl/weightspace.hpp"

namespace ecl {

/// Loss/accuracy along the segment alpha*w_a + (1-alpha)*w_b. alpha multiplies
/// w_a, which callers should pass as the later checkpoint.
struct PathEval {
    std::vector<double> alphas;
    std::vector<double> losses;
    std::vector<double> accuracies;
    std::string endpoint_a = "a";
    std::string endpoint_b = "b";

    double max_loss() const;
};

struct SimplexGridPoint {
    SimplexPoint alpha;
    double loss = 0.0;
    double accuracy = 0.0;
};

/// All barycentric points (i/R, j/R, k/R), i+j+k = R, on a 3-member subspace.
struct SimplexGrid {
    std::size_t resolution = 0;
    std::vector<SimplexGridPoint> points;
};

struct NoisePoint {
    double sigma = 0.0;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
};

struct HessianSpectrum {
    std::vector<double> eigenvalues;  // descending
    std::vector<std::size_t> iterations;
    std::vector<double> residuals;
    bool converged = true;
};

enum class FlopsMethod { kSingle, kVanillaEnsemble, kSubspace, kBatchEnsemble };

/// Operation counts under the documented cost model: dense layer forward =
/// 2*b*k*l + b*l FLOPs; backward = 2x forward; VE runs n forwards; SE adds a
/// (2n-1)*p mixing pass; BE adds 2 Hadamard products (2*b*(k+l)) per layer.
struct FlopsReport {
    FlopsMethod method = FlopsMethod::kSingle;
    std::size_t n = 1;
    std::size_t batch_size = 0;
    std::vector<std::size_t> layer_dims;
    double single_forward_flops = 0.0;
    double method_forward_flops = 0.0;
    double overhead_flops = 0.0;  // method_forward - single_forward
    double backward_flops = 0.0;
    double train_step_flops = 0.0;
    double relative_ratio = 0.0;  // method_forward / single_forward
};

PathEval eval_linear_path(const MlpSpec& spec, const ParamVector& w_a, const ParamVector& w_b,
                          std::size_t k_points, const std::vector<Example>& dataset);

/// Same path sweep over an arbitrary scalar loss; accuracies are zero-filled.
PathEval eval_linear_path(const std::function<double(const ParamVector&)>& loss_fn,
                          const ParamVector& w_a, const ParamVector& w_b, std::size_t k_points);

SimplexGrid eval_simplex_grid(const MlpSpec& spec, const EnsembleWeights& w,
                              std::size_t resolution, const std::vector<Example>& dataset);

std::vector<NoisePoint> eval_noise_robustness(const MlpSpec& spec, const ParamVector& params,
                                              const std::vector<double>& sigmas,
                                              std::size_t trials,
                                              const std::vector<Example>& dataset,
                                              SeededRng& rng);

using GradFn = std::function<ParamVector(const ParamVector&)>;

/// Top-k eigenvalues by power iteration with deflation; Hessian-vector
/// products are central finite differences of the gradient with step
/// delta/||v||.
HessianSpectrum hessian_top_eigs(const GradFn& grad, const ParamVector& at, std::size_t k,
                                 std::size_t max_iter, double tol, double delta = 1e-4);

/// Spectrum of the mean cross-entropy loss of an MLP over a dataset.
HessianSpectrum hessian_top_eigs(const MlpSpec& spec, const ParamVector& params,
                                 const std::vector<Example>& dataset, std::size_t k,
                                 std::size_t max_iter, double tol, double delta = 1e-4);

FlopsReport flops_report(const MlpSpec& spec, std::size_t batch_size, FlopsMethod method,
                         std::size_t n);

}  // namespace ecl
