#include "ecl/weightspace.hpp"

#include <cmath>
#include <string>

#include "ecl/errors.hpp"

namespace ecl {

namespace {

std::string fast_r_name(std::size_t layer, std::size_t member) {
    return "layer" + std::to_string(layer) + ".r" + std::to_string(member);
}
std::string fast_s_name(std::size_t layer, std::size_t member) {
    return "layer" + std::to_string(layer) + ".s" + std::to_string(member);
}
std::string weight_name(std::size_t layer) {
    return "layer" + std::to_string(layer) + ".weight";
}
std::string bias_name(std::size_t layer) { return "layer" + std::to_string(layer) + ".bias"; }

}  // namespace

void EnsembleWeights::validate() const {
    if (members.empty()) throw InputError("EnsembleWeights: need at least one member");
    for (std::size_t i = 1; i < members.size(); ++i)
        require_same_layout(members[0], members[i], "EnsembleWeights");
}

void SimplexPoint::validate() const {
    if (alpha.empty()) throw InputError("SimplexPoint: empty");
    double sum = 0.0;
    for (double a : alpha) {
        if (!(a >= 0.0)) throw InputError("SimplexPoint: negative coefficient");
        sum += a;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw InputError("SimplexPoint: coefficients must sum to 1");
}

SimplexPoint SimplexPoint::uniform(std::size_t n) {
    if (n < 1) throw InputError("SimplexPoint::uniform: n must be >= 1");
    return SimplexPoint{std::vector<double>(n, 1.0 / static_cast<double>(n))};
}

SimplexPoint SimplexPoint::unit(std::size_t n, std::size_t i) {
    if (i >= n) throw InputError("SimplexPoint::unit: index out of range");
    SimplexPoint p{std::vector<double>(n, 0.0)};
    p.alpha[i] = 1.0;
    return p;
}

EnsembleWeights init_ensemble(const MlpSpec& spec, std::size_t n, double sigma_init,
                              SeededRng& rng) {
    if (n < 1) throw InputError("init_ensemble: n must be >= 1");
    if (sigma_init < 0.0) throw InputError("init_ensemble: sigma_init must be >= 0");
    EnsembleWeights w;
    w.members.reserve(n);
    SeededRng base_rng = rng.fork(0);
    w.members.push_back(init_mlp_params(spec, base_rng));
    for (std::size_t i = 1; i < n; ++i) {
        SeededRng member_rng = rng.fork(i);
        w.members.push_back(multiplicative_perturb(w.members[0], sigma_init, member_rng));
    }
    return w;
}

SimplexPoint sample_simplex(std::size_t n, SeededRng& rng) {
    if (n < 1) throw InputError("sample_simplex: n must be >= 1");
    if (n == 1) return SimplexPoint{{1.0}};
    std::vector<double> e(n);
    double sum = 0.0;
    for (double& x : e) {
        x = rng.exponential();
        sum += x;
    }
    SimplexPoint p{std::move(e)};
    for (double& a : p.alpha) a /= sum;
    return p;
}

ParamVector convex_combine(const EnsembleWeights& w, const SimplexPoint& alpha) {
    w.validate();
    alpha.validate();
    if (alpha.n() != w.n())
        throw InputError("convex_combine: alpha length does not match member count");
    // Zero coefficients are skipped and the accumulator starts from the first
    // active term, so alpha = e_i reproduces member i bitwise.
    ParamVector out;
    bool started = false;
    for (std::size_t i = 0; i < w.n(); ++i) {
        const double a = alpha.alpha[i];
        if (a == 0.0) continue;
        if (!started) {
            out = w.members[i];
            scale(out, a);
            started = true;
        } else {
            add_scaled(out, w.members[i], a);
        }
    }
    if (!started) throw InputError("convex_combine: all coefficients are zero");
    return out;
}

ParamVector midpoint(const EnsembleWeights& w) {
    w.validate();
    return convex_combine(w, SimplexPoint::uniform(w.n()));
}

std::vector<ParamVector> subspace_grad_distribute(const ParamVector& grad_mixed,
                                                  const SimplexPoint& alpha) {
    alpha.validate();
    std::vector<ParamVector> grads;
    grads.reserve(alpha.n());
    for (double a : alpha.alpha) {
        ParamVector g = grad_mixed;
        scale(g, a);
        grads.push_back(std::move(g));
    }
    return grads;
}

ParamVector multiplicative_perturb(const ParamVector& params, double sigma, SeededRng& rng) {
    if (sigma < 0.0) throw InputError("multiplicative_perturb: sigma must be >= 0");
    ParamVector out = params;
    for (double& x : out.data) x *= rng.normal(1.0, sigma);
    return out;
}

LayoutPtr batch_ensemble_fast_layout(const MlpSpec& spec, std::size_t n) {
    spec.validate();
    if (n < 1) throw InputError("batch_ensemble_fast_layout: n must be >= 1");
    auto layout = std::make_shared<ParamLayout>();
    const auto dims = spec.layer_dims();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        for (std::size_t m = 0; m < n; ++m) {
            layout->add(fast_r_name(l, m), {dims[l]});
            layout->add(fast_s_name(l, m), {dims[l + 1]});
        }
    }
    return layout;
}

BatchEnsembleWeights init_batch_ensemble(const MlpSpec& spec, std::size_t n, double sigma_init,
                                         SeededRng& rng) {
    if (sigma_init < 0.0) throw InputError("init_batch_ensemble: sigma_init must be >= 0");
    BatchEnsembleWeights w;
    w.n = n;
    SeededRng shared_rng = rng.fork(0);
    w.shared = init_mlp_params(spec, shared_rng);
    w.fast = ParamVector(batch_ensemble_fast_layout(spec, n));
    SeededRng fast_rng = rng.fork(1);
    for (double& x : w.fast.data) x = fast_rng.normal(1.0, sigma_init);
    return w;
}

ParamVector batch_ensemble_member(const MlpSpec& spec, const BatchEnsembleWeights& w,
                                  std::size_t i) {
    if (i >= w.n) throw InputError("batch_ensemble_member: member index out of range");
    ParamVector out = w.shared;
    const auto dims = spec.layer_dims();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        auto wm = out.span_of(weight_name(l));
        auto r = w.fast.span_of(fast_r_name(l, i));
        auto s = w.fast.span_of(fast_s_name(l, i));
        const std::size_t k = dims[l], lo = dims[l + 1];
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < lo; ++b) wm[a * lo + b] *= r[a] * s[b];
    }
    return out;
}

Tensor batch_ensemble_forward(const MlpSpec& spec, const BatchEnsembleWeights& w,
                              const Tensor& batch, const std::vector<std::size_t>& assignment,
                              RunMode mode, SeededRng* rng, BatchEnsembleCache* cache) {
    spec.validate();
    if (batch.shape.size() != 2 || batch.cols() != spec.input_dim)
        throw DimensionError("batch_ensemble_forward: batch must be (b, input_dim)");
    const std::size_t b = batch.rows();
    if (assignment.size() != b)
        throw InputError("batch_ensemble_forward: assignment length must equal batch size");
    for (std::size_t a : assignment)
        if (a >= w.n) throw InputError("batch_ensemble_forward: member index out of range");
    const bool use_dropout = mode == RunMode::kTrain && spec.dropout_rate > 0.0;
    if (use_dropout && rng == nullptr)
        throw InputError("batch_ensemble_forward: train mode with dropout requires an rng");

    const auto dims = spec.layer_dims();
    const std::size_t num_layers = dims.size() - 1;

    if (cache) {
        cache->shared = w.shared;
        cache->fast = w.fast;
        cache->assignment = assignment;
        cache->layer_inputs.clear();
        cache->scaled_inputs.clear();
        cache->matmul_out.clear();
        cache->relu_mask.clear();
        cache->dropout_scale.clear();
        cache->batch = b;
    }

    Tensor x = batch;
    for (std::size_t l = 0; l < num_layers; ++l) {
        const std::size_t k = dims[l], lo = dims[l + 1];
        Tensor u = Tensor::zeros({b, k});
        for (std::size_t j = 0; j < b; ++j) {
            auto r = w.fast.span_of(fast_r_name(l, assignment[j]));
            const double* xr = x.row_ptr(j);
            double* ur = u.row_ptr(j);
            for (std::size_t c = 0; c < k; ++c) ur[c] = xr[c] * r[c];
        }
        const auto wm = w.shared.span_of(weight_name(l));
        Tensor v = Tensor::zeros({b, lo});
        for (std::size_t j = 0; j < b; ++j) {
            const double* ur = u.row_ptr(j);
            double* vr = v.row_ptr(j);
            for (std::size_t c = 0; c < k; ++c) {
                const double uv = ur[c];
                if (uv == 0.0) continue;
                const double* wr = wm.data() + c * lo;
                for (std::size_t o = 0; o < lo; ++o) vr[o] += uv * wr[o];
            }
        }
        const auto bias = w.shared.span_of(bias_name(l));
        Tensor y = Tensor::zeros({b, lo});
        for (std::size_t j = 0; j < b; ++j) {
            auto s = w.fast.span_of(fast_s_name(l, assignment[j]));
            const double* vr = v.row_ptr(j);
            double* yr = y.row_ptr(j);
            for (std::size_t o = 0; o < lo; ++o) yr[o] = vr[o] * s[o] + bias[o];
        }
        if (cache) {
            cache->layer_inputs.push_back(std::move(x));
            cache->scaled_inputs.push_back(std::move(u));
            cache->matmul_out.push_back(std::move(v));
        }
        const bool hidden = l + 1 < num_layers;
        if (hidden) {
            std::vector<unsigned char> mask(y.data.size());
            for (std::size_t j = 0; j < y.data.size(); ++j) {
                const bool on = y.data[j] > 0.0;
                mask[j] = on ? 1 : 0;
                if (!on) y.data[j] = 0.0;
            }
            std::vector<double> dscale;
            if (use_dropout) {
                dscale.resize(y.data.size());
                const double keep_scale = 1.0 / (1.0 - spec.dropout_rate);
                for (std::size_t j = 0; j < y.data.size(); ++j) {
                    const bool keep = rng->uniform() >= spec.dropout_rate;
                    dscale[j] = keep ? keep_scale : 0.0;
                    y.data[j] *= dscale[j];
                }
            }
            if (cache) {
                cache->relu_mask.push_back(std::move(mask));
                cache->dropout_scale.push_back(std::move(dscale));
            }
        }
        x = std::move(y);
    }
    return x;
}

BatchEnsembleGrads batch_ensemble_backward(const MlpSpec& spec, const BatchEnsembleCache& cache,
                                           const Tensor& grad_logits) {
    spec.validate();
    const auto dims = spec.layer_dims();
    const std::size_t num_layers = dims.size() - 1;
    if (cache.layer_inputs.size() != num_layers)
        throw InternalError("batch_ensemble_backward: cache does not match spec");
    if (grad_logits.shape.size() != 2 || grad_logits.rows() != cache.batch ||
        grad_logits.cols() != spec.output_dim)
        throw DimensionError("batch_ensemble_backward: grad_logits must be (b, output_dim)");

    BatchEnsembleGrads grads{ParamVector(cache.shared.layout), ParamVector(cache.fast.layout)};
    const std::size_t b = cache.batch;

    Tensor g = grad_logits;  // dL/dy of the layer being processed
    for (std::size_t l = num_layers; l-- > 0;) {
        const std::size_t k = dims[l], lo = dims[l + 1];
        const Tensor& u = cache.scaled_inputs[l];
        const Tensor& v = cache.matmul_out[l];
        auto gw = grads.shared.span_of(weight_name(l));
        auto gb = grads.shared.span_of(bias_name(l));
        const auto wm = cache.shared.span_of(weight_name(l));

        // dL/dv per row; fast-weight grads accumulate into the assigned member
        Tensor gv = Tensor::zeros({b, lo});
        for (std::size_t j = 0; j < b; ++j) {
            const std::size_t m = cache.assignment[j];
            auto s = cache.fast.span_of(fast_s_name(l, m));
            auto gs = grads.fast.span_of(fast_s_name(l, m));
            const double* gr = g.row_ptr(j);
            const double* vr = v.row_ptr(j);
            double* gvr = gv.row_ptr(j);
            for (std::size_t o = 0; o < lo; ++o) {
                gb[o] += gr[o];
                gs[o] += gr[o] * vr[o];
                gvr[o] = gr[o] * s[o];
            }
        }
        // dW = u^T gv
        for (std::size_t j = 0; j < b; ++j) {
            const double* ur = u.row_ptr(j);
            const double* gvr = gv.row_ptr(j);
            for (std::size_t c = 0; c < k; ++c) {
                const double uv = ur[c];
                if (uv == 0.0) continue;
                double* gwr = gw.data() + c * lo;
                for (std::size_t o = 0; o < lo; ++o) gwr[o] += uv * gvr[o];
            }
        }
        // dL/du = gv W^T; dr accumulates (dL/du) o x; dL/dx = (dL/du) o r
        Tensor gx = Tensor::zeros({b, k});
        const Tensor& x = cache.layer_inputs[l];
        for (std::size_t j = 0; j < b; ++j) {
            const std::size_t m = cache.assignment[j];
            auto r = cache.fast.span_of(fast_r_name(l, m));
            auto gr_fast = grads.fast.span_of(fast_r_name(l, m));
            const double* gvr = gv.row_ptr(j);
            const double* xr = x.row_ptr(j);
            double* gxr = gx.row_ptr(j);
            for (std::size_t c = 0; c < k; ++c) {
                const double* wr = wm.data() + c * lo;
                double du = 0.0;
                for (std::size_t o = 0; o < lo; ++o) du += gvr[o] * wr[o];
                gr_fast[c] += du * xr[c];
                gxr[c] = du * r[c];
            }
        }
        if (l == 0) break;
        const auto& mask = cache.relu_mask[l - 1];
        const auto& dscale = cache.dropout_scale[l - 1];
        for (std::size_t j = 0; j < gx.data.size(); ++j) {
            if (!dscale.empty()) gx.data[j] *= dscale[j];
            if (!mask[j]) gx.data[j] = 0.0;
        }
        g = std::move(gx);
    }
    return grads;
}

}  // namespace ecl
