#include "ecl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ecl/errors.hpp"

namespace ecl {

namespace {

double dot(const ParamVector& a, const ParamVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

double norm(const ParamVector& v) { return std::sqrt(dot(v, v)); }

}  // namespace

double PathEval::max_loss() const {
    if (losses.empty()) throw InputError("PathEval: empty");
    return *std::max_element(losses.begin(), losses.end());
}

PathEval eval_linear_path(const MlpSpec& spec, const ParamVector& w_a, const ParamVector& w_b,
                          std::size_t k_points, const std::vector<Example>& dataset) {
    require_same_layout(w_a, w_b, "eval_linear_path");
    if (k_points < 2) throw InputError("eval_linear_path: need at least 2 points");
    EnsembleWeights pair;
    pair.members = {w_a, w_b};
    PathEval out;
    for (std::size_t i = 0; i < k_points; ++i) {
        const double alpha =
            static_cast<double>(i) / static_cast<double>(k_points - 1);
        // endpoints use exact coefficients {0,1}, so they bit-match w_b / w_a
        SimplexPoint p{{alpha, 1.0 - alpha}};
        ParamVector point = convex_combine(pair, p);
        EvalResult r = evaluate(spec, point, dataset);
        out.alphas.push_back(alpha);
        out.losses.push_back(r.loss);
        out.accuracies.push_back(r.accuracy);
    }
    return out;
}

PathEval eval_linear_path(const std::function<double(const ParamVector&)>& loss_fn,
                          const ParamVector& w_a, const ParamVector& w_b, std::size_t k_points) {
    require_same_layout(w_a, w_b, "eval_linear_path");
    if (k_points < 2) throw InputError("eval_linear_path: need at least 2 points");
    EnsembleWeights pair;
    pair.members = {w_a, w_b};
    PathEval out;
    for (std::size_t i = 0; i < k_points; ++i) {
        const double alpha =
            static_cast<double>(i) / static_cast<double>(k_points - 1);
        SimplexPoint p{{alpha, 1.0 - alpha}};
        ParamVector point = convex_combine(pair, p);
        out.alphas.push_back(alpha);
        out.losses.push_back(loss_fn(point));
        out.accuracies.push_back(0.0);
    }
    return out;
}

SimplexGrid eval_simplex_grid(const MlpSpec& spec, const EnsembleWeights& w,
                              std::size_t resolution, const std::vector<Example>& dataset) {
    w.validate();
    if (w.n() != 3) throw InputError("eval_simplex_grid: only n = 3 subspaces are supported");
    if (resolution < 2) throw InputError("eval_simplex_grid: resolution must be >= 2");
    const double r = static_cast<double>(resolution);
    SimplexGrid grid;
    grid.resolution = resolution;
    for (std::size_t i = 0; i <= resolution; ++i) {
        for (std::size_t j = 0; j + i <= resolution; ++j) {
            const std::size_t k = resolution - i - j;
            SimplexPoint alpha{{static_cast<double>(i) / r, static_cast<double>(j) / r,
                                static_cast<double>(k) / r}};
            ParamVector point = convex_combine(w, alpha);
            EvalResult res = evaluate(spec, point, dataset);
            grid.points.push_back(SimplexGridPoint{std::move(alpha), res.loss, res.accuracy});
        }
    }
    return grid;
}

std::vector<NoisePoint> eval_noise_robustness(const MlpSpec& spec, const ParamVector& params,
                                              const std::vector<double>& sigmas,
                                              std::size_t trials,
                                              const std::vector<Example>& dataset,
                                              SeededRng& rng) {
    if (trials < 1) throw InputError("eval_noise_robustness: trials must be >= 1");
    std::vector<NoisePoint> out;
    out.reserve(sigmas.size());
    for (double sigma : sigmas) {
        std::vector<double> accs(trials);
        for (std::size_t t = 0; t < trials; ++t) {
            ParamVector noisy = multiplicative_perturb(params, sigma, rng);
            accs[t] = evaluate(spec, noisy, dataset).accuracy;
        }
        const double mean = std::accumulate(accs.begin(), accs.end(), 0.0) /
                            static_cast<double>(trials);
        double var = 0.0;
        for (double a : accs) var += (a - mean) * (a - mean);
        const double stddev =
            trials > 1 ? std::sqrt(var / static_cast<double>(trials - 1)) : 0.0;
        out.push_back(NoisePoint{sigma, mean, stddev});
    }
    return out;
}

HessianSpectrum hessian_top_eigs(const GradFn& grad, const ParamVector& at, std::size_t k,
                                 std::size_t max_iter, double tol, double delta) {
    if (k < 1) throw InputError("hessian_top_eigs: k must be >= 1");
    if (max_iter < 1) throw InputError("hessian_top_eigs: max_iter must be >= 1");
    if (!(tol > 0.0) || !(delta > 0.0))
        throw InputError("hessian_top_eigs: tol and delta must be positive");

    auto hvp = [&](const ParamVector& v) -> ParamVector {
        const double vn = norm(v);
        if (!(vn > 0.0)) throw NumericError("hessian_top_eigs: zero direction");
        const double eps = delta / vn;
        ParamVector plus = at;
        add_scaled(plus, v, eps);
        ParamVector minus = at;
        add_scaled(minus, v, -eps);
        ParamVector g = grad(plus);
        ParamVector gm = grad(minus);
        add_scaled(g, gm, -1.0);
        scale(g, 1.0 / (2.0 * eps));
        if (!all_finite(g)) throw NumericError("hessian_top_eigs: non-finite HVP");
        return g;
    };

    struct Eig {
        double value;
        std::size_t iters;
        double residual;
        ParamVector vec;
    };
    std::vector<Eig> found;

    SeededRng start_rng(0x48455353ULL, 0);  // deterministic start vectors
    for (std::size_t e = 0; e < k; ++e) {
        ParamVector v(at.layout);
        for (double& x : v.data) x = start_rng.normal();
        // orthogonalize against found eigenvectors
        for (const Eig& prev : found) add_scaled(v, prev.vec, -dot(v, prev.vec));
        scale(v, 1.0 / norm(v));

        double lambda = 0.0;
        double residual = 0.0;
        std::size_t iters = 0;
        for (std::size_t it = 1; it <= max_iter; ++it) {
            iters = it;
            ParamVector w = hvp(v);
            // deflate: subtract lambda_j (v_j . v) v_j
            for (const Eig& prev : found) add_scaled(w, prev.vec, -prev.value * dot(prev.vec, v));
            const double new_lambda = dot(v, w);  // Rayleigh quotient, ||v|| = 1
            ParamVector r = w;
            add_scaled(r, v, -new_lambda);
            residual = norm(r);
            const double wn = norm(w);
            if (!(wn > 0.0)) {
                // v is (numerically) in the kernel of the deflated operator
                lambda = 0.0;
                residual = 0.0;
                break;
            }
            scale(w, 1.0 / wn);
            const bool settled = std::abs(new_lambda - lambda) <=
                                 tol * std::max(1.0, std::abs(new_lambda));
            lambda = new_lambda;
            v = std::move(w);
            if (settled && residual <= tol * std::max(1.0, std::abs(lambda))) break;
        }
        found.push_back(Eig{lambda, iters, residual, std::move(v)});
    }

    HessianSpectrum spectrum;
    std::sort(found.begin(), found.end(), [](const Eig& a, const Eig& b) {
        return a.value > b.value;
    });
    for (const Eig& e : found) {
        spectrum.eigenvalues.push_back(e.value);
        spectrum.iterations.push_back(e.iters);
        spectrum.residuals.push_back(e.residual);
        if (e.residual > tol * std::max(1.0, std::abs(e.value)) * 10.0)
            spectrum.converged = false;
    }
    return spectrum;
}

HessianSpectrum hessian_top_eigs(const MlpSpec& spec, const ParamVector& params,
                                 const std::vector<Example>& dataset, std::size_t k,
                                 std::size_t max_iter, double tol, double delta) {
    if (dataset.empty()) throw InputError("hessian_top_eigs: empty dataset");
    Tensor batch = stack_features(dataset);
    std::vector<int> labels = stack_labels(dataset);
    GradFn grad = [&spec, batch, labels](const ParamVector& p) -> ParamVector {
        ForwardCache cache;
        Tensor logits = mlp_forward(spec, p, batch, RunMode::kEval, nullptr, &cache);
        LossGrad lg = cross_entropy(logits, labels);
        return mlp_backward(spec, cache, lg.grad_logits);
    };
    return hessian_top_eigs(grad, params, k, max_iter, tol, delta);
}

FlopsReport flops_report(const MlpSpec& spec, std::size_t batch_size, FlopsMethod method,
                         std::size_t n) {
    spec.validate();
    if (batch_size < 1) throw InputError("flops_report: batch_size must be >= 1");
    if (n < 1) throw InputError("flops_report: n must be >= 1");
    const auto dims = spec.layer_dims();
    const double b = static_cast<double>(batch_size);

    double single = 0.0;
    double hadamard = 0.0;
    double p_total = 0.0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const double k = static_cast<double>(dims[l]);
        const double o = static_cast<double>(dims[l + 1]);
        single += 2.0 * b * k * o + b * o;
        hadamard += 2.0 * b * (k + o);
        p_total += k * o + o;
    }

    FlopsReport report;
    report.method = method;
    report.n = n;
    report.batch_size = batch_size;
    report.layer_dims = dims;
    report.single_forward_flops = single;
    switch (method) {
        case FlopsMethod::kSingle:
            report.method_forward_flops = single;
            break;
        case FlopsMethod::kVanillaEnsemble:
            report.method_forward_flops = single * static_cast<double>(n);
            break;
        case FlopsMethod::kSubspace:
            report.method_forward_flops =
                single + (2.0 * static_cast<double>(n) - 1.0) * p_total;
            break;
        case FlopsMethod::kBatchEnsemble:
            report.method_forward_flops = single + hadamard;
            break;
    }
    report.overhead_flops = report.method_forward_flops - single;
    report.backward_flops = 2.0 * report.method_forward_flops;
    report.train_step_flops = report.method_forward_flops + report.backward_flops;
    report.relative_ratio = report.method_forward_flops / single;
    return report;
}

}  // namespace ecl
