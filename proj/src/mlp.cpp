#include "ecl/mlp.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "ecl/errors.hpp"

namespace ecl {

namespace {

std::string layer_name(std::size_t i, const char* part) {
    return "layer" + std::to_string(i) + "." + part;
}

// out (b, l) = x (b, k) * W (k, l) + bias (l). Accumulates the product first
// and adds the bias last; the rank-1 fast-weight forward uses the same order,
// which makes its identity-fast-weight reduction bitwise exact.
void linear(const Tensor& x, const double* w, const double* b, std::size_t k, std::size_t l,
            Tensor& out) {
    const std::size_t rows = x.rows();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.row_ptr(r);
        double* yr = out.row_ptr(r);
        for (std::size_t c = 0; c < k; ++c) {
            const double xv = xr[c];
            if (xv == 0.0) continue;
            const double* wr = w + c * l;
            for (std::size_t j = 0; j < l; ++j) yr[j] += xv * wr[j];
        }
        for (std::size_t j = 0; j < l; ++j) yr[j] += b[j];
    }
}

}  // namespace

LayoutPtr mlp_layout(const MlpSpec& spec) {
    spec.validate();
    auto layout = std::make_shared<ParamLayout>();
    const auto dims = spec.layer_dims();
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        layout->add(layer_name(i, "weight"), {dims[i], dims[i + 1]});
        layout->add(layer_name(i, "bias"), {dims[i + 1]});
    }
    return layout;
}

ParamVector init_mlp_params(const MlpSpec& spec, SeededRng& rng) {
    ParamVector params(mlp_layout(spec));
    const auto dims = spec.layer_dims();
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const double stddev = std::sqrt(2.0 / static_cast<double>(dims[i]));
        auto w = params.span_of(layer_name(i, "weight"));
        for (double& v : w) v = rng.normal(0.0, stddev);
        // biases stay zero
    }
    return params;
}

Tensor mlp_forward(const MlpSpec& spec, const ParamVector& params, const Tensor& batch,
                   RunMode mode, SeededRng* rng, ForwardCache* cache) {
    spec.validate();
    auto layout = mlp_layout(spec);
    if (!(*params.layout == *layout))
        throw InputError("mlp_forward: parameter layout does not match spec");
    if (batch.shape.size() != 2 || batch.cols() != spec.input_dim)
        throw DimensionError("mlp_forward: batch must be (b, " + std::to_string(spec.input_dim) +
                             ")");
    const bool use_dropout = mode == RunMode::kTrain && spec.dropout_rate > 0.0;
    if (use_dropout && rng == nullptr)
        throw InputError("mlp_forward: train mode with dropout requires an rng");

    const auto dims = spec.layer_dims();
    const std::size_t num_layers = dims.size() - 1;
    const std::size_t b = batch.rows();

    if (cache) {
        cache->params = params;
        cache->layer_inputs.clear();
        cache->relu_mask.clear();
        cache->dropout_scale.clear();
        cache->batch = b;
    }

    Tensor x = batch;
    for (std::size_t i = 0; i < num_layers; ++i) {
        if (cache) cache->layer_inputs.push_back(x);
        Tensor y = Tensor::zeros({b, dims[i + 1]});
        linear(x, params.span_of(layer_name(i, "weight")).data(),
               params.span_of(layer_name(i, "bias")).data(), dims[i], dims[i + 1], y);
        const bool hidden = i + 1 < num_layers;
        if (hidden) {
            std::vector<unsigned char> mask(y.data.size());
            for (std::size_t j = 0; j < y.data.size(); ++j) {
                const bool on = y.data[j] > 0.0;
                mask[j] = on ? 1 : 0;
                if (!on) y.data[j] = 0.0;
            }
            std::vector<double> scale;
            if (use_dropout) {
                // inverted dropout: kept units are rescaled so eval needs no correction
                scale.resize(y.data.size());
                const double keep_scale = 1.0 / (1.0 - spec.dropout_rate);
                for (std::size_t j = 0; j < y.data.size(); ++j) {
                    const bool keep = rng->uniform() >= spec.dropout_rate;
                    scale[j] = keep ? keep_scale : 0.0;
                    y.data[j] *= scale[j];
                }
            }
            if (cache) {
                cache->relu_mask.push_back(std::move(mask));
                cache->dropout_scale.push_back(std::move(scale));
            }
        }
        x = std::move(y);
    }
    return x;
}

Tensor softmax(const Tensor& logits) {
    if (logits.shape.size() != 2) throw DimensionError("softmax: logits must be 2-D");
    Tensor out = logits;
    const std::size_t rows = out.rows(), cols = out.cols();
    for (std::size_t r = 0; r < rows; ++r) {
        double* p = out.row_ptr(r);
        double mx = p[0];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, p[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            p[c] = std::exp(p[c] - mx);
            sum += p[c];
        }
        for (std::size_t c = 0; c < cols; ++c) p[c] /= sum;
    }
    return out;
}

LossGrad cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.shape.size() != 2) throw DimensionError("cross_entropy: logits must be 2-D");
    const std::size_t b = logits.rows(), k = logits.cols();
    if (labels.size() != b)
        throw InputError("cross_entropy: got " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(b) + " rows");
    if (b == 0) throw InputError("cross_entropy: empty batch");

    LossGrad out;
    out.grad_logits = Tensor::zeros({b, k});
    double total = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
        const int label = labels[r];
        if (label < 0 || static_cast<std::size_t>(label) >= k)
            throw InputError("cross_entropy: label " + std::to_string(label) +
                             " out of range [0, " + std::to_string(k) + ")");
        const double* z = logits.row_ptr(r);
        double mx = z[0];
        for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, z[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) sum += std::exp(z[c] - mx);
        const double log_sum = std::log(sum) + mx;
        total += log_sum - z[label];
        double* g = out.grad_logits.row_ptr(r);
        for (std::size_t c = 0; c < k; ++c)
            g[c] = std::exp(z[c] - log_sum) / static_cast<double>(b);
        g[label] -= 1.0 / static_cast<double>(b);
    }
    out.loss = total / static_cast<double>(b);
    if (!std::isfinite(out.loss)) throw NumericError("cross_entropy: non-finite loss");
    return out;
}

ParamVector mlp_backward(const MlpSpec& spec, const ForwardCache& cache,
                         const Tensor& grad_logits) {
    spec.validate();
    const auto dims = spec.layer_dims();
    const std::size_t num_layers = dims.size() - 1;
    if (cache.layer_inputs.size() != num_layers || cache.relu_mask.size() + 1 != num_layers)
        throw InternalError("mlp_backward: cache does not match spec");
    if (grad_logits.shape.size() != 2 || grad_logits.rows() != cache.batch ||
        grad_logits.cols() != spec.output_dim)
        throw DimensionError("mlp_backward: grad_logits must be (b, output_dim)");

    ParamVector grads(cache.params.layout);
    const std::size_t b = cache.batch;

    Tensor g = grad_logits;  // dL/dz for the layer being processed
    for (std::size_t i = num_layers; i-- > 0;) {
        const Tensor& x = cache.layer_inputs[i];
        const std::size_t k = dims[i], l = dims[i + 1];
        auto gw = grads.span_of(layer_name(i, "weight"));
        auto gb = grads.span_of(layer_name(i, "bias"));
        for (std::size_t r = 0; r < b; ++r) {
            const double* xr = x.row_ptr(r);
            const double* gr = g.row_ptr(r);
            for (std::size_t j = 0; j < l; ++j) gb[j] += gr[j];
            for (std::size_t c = 0; c < k; ++c) {
                const double xv = xr[c];
                if (xv == 0.0) continue;
                double* gwr = gw.data() + c * l;
                for (std::size_t j = 0; j < l; ++j) gwr[j] += xv * gr[j];
            }
        }
        if (i == 0) break;
        // dL/dx = g W^T, then back through dropout and relu of the previous layer
        const double* w = cache.params.span_of(layer_name(i, "weight")).data();
        Tensor gx = Tensor::zeros({b, k});
        for (std::size_t r = 0; r < b; ++r) {
            const double* gr = g.row_ptr(r);
            double* gxr = gx.row_ptr(r);
            for (std::size_t c = 0; c < k; ++c) {
                const double* wr = w + c * l;
                double acc = 0.0;
                for (std::size_t j = 0; j < l; ++j) acc += gr[j] * wr[j];
                gxr[c] = acc;
            }
        }
        const auto& mask = cache.relu_mask[i - 1];
        const auto& scale = cache.dropout_scale[i - 1];
        for (std::size_t j = 0; j < gx.data.size(); ++j) {
            if (!scale.empty()) gx.data[j] *= scale[j];
            if (!mask[j]) gx.data[j] = 0.0;
        }
        g = std::move(gx);
    }
    return grads;
}

ParamVector finite_diff_grad(const std::function<double(const ParamVector&)>& loss_fn,
                             const ParamVector& params, double eps) {
    if (!(eps > 0.0)) throw InputError("finite_diff_grad: eps must be positive");
    ParamVector grad(params.layout);
    ParamVector probe = params;
    for (std::size_t j = 0; j < probe.data.size(); ++j) {
        const double orig = probe.data[j];
        probe.data[j] = orig + eps;
        const double up = loss_fn(probe);
        probe.data[j] = orig - eps;
        const double down = loss_fn(probe);
        probe.data[j] = orig;
        const double d = (up - down) / (2.0 * eps);
        if (!std::isfinite(d)) throw NumericError("finite_diff_grad: non-finite difference");
        grad.data[j] = d;
    }
    return grad;
}

}  // namespace ecl
