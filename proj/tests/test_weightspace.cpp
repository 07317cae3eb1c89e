#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ecl/errors.hpp"
#include "ecl/mlp.hpp"
#include "ecl/weightspace.hpp"
#include "oracles.hpp"

using namespace ecl;

namespace {

MlpSpec small_spec() {
    MlpSpec s;
    s.input_dim = 3;
    s.hidden_dims = {4};
    s.output_dim = 2;
    return s;
}

EnsembleWeights random_members(std::size_t n, std::uint64_t seed) {
    SeededRng rng(seed, 99);
    MlpSpec spec = small_spec();
    EnsembleWeights w;
    for (std::size_t i = 0; i < n; ++i) {
        SeededRng member = rng.fork(i);
        w.members.push_back(init_mlp_params(spec, member));
    }
    return w;
}

}  // namespace

TEST_CASE("init_ensemble: sigma 0 duplicates member 1 bitwise") {
    SeededRng rng(5, 1);
    EnsembleWeights w = init_ensemble(small_spec(), 3, 0.0, rng);
    REQUIRE(w.n() == 3);
    for (std::size_t i = 1; i < 3; ++i)
        for (std::size_t j = 0; j < w.members[0].data.size(); ++j)
            CHECK(w.members[i].data[j] == w.members[0].data[j]);
}

TEST_CASE("init_ensemble: member 1 does not depend on n") {
    SeededRng a(5, 1), b(5, 1);
    EnsembleWeights w1 = init_ensemble(small_spec(), 1, 1.0, a);
    EnsembleWeights w3 = init_ensemble(small_spec(), 3, 1.0, b);
    for (std::size_t j = 0; j < w1.members[0].data.size(); ++j)
        CHECK(w1.members[0].data[j] == w3.members[0].data[j]);
}

TEST_CASE("init_ensemble: multiplicative spread has the stated moments") {
    MlpSpec spec;
    spec.input_dim = 100;
    spec.hidden_dims = {100};
    spec.output_dim = 10;
    SeededRng rng(7, 2);
    EnsembleWeights w = init_ensemble(spec, 2, 1.0, rng);
    // ratio w2/w1 per coordinate ~ N(1, 1) on nonzero coords (biases are 0/0)
    double sum = 0.0, sum2 = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < w.members[0].data.size(); ++j) {
        const double denom = w.members[0].data[j];
        if (denom == 0.0) {
            CHECK(w.members[1].data[j] == 0.0);  // zero bias stays zero
            continue;
        }
        const double r = w.members[1].data[j] / denom;
        sum += r;
        sum2 += r * r;
        ++count;
    }
    REQUIRE(count >= 10000);
    const double mean = sum / count;
    const double stddev = std::sqrt(sum2 / count - mean * mean);
    CHECK(mean == doctest::Approx(1.0).epsilon(0.05));
    CHECK(stddev == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("sample_simplex: n=1 is the trivial point") {
    SeededRng rng(1, 1);
    SimplexPoint p = sample_simplex(1, rng);
    REQUIRE(p.n() == 1);
    CHECK(p.alpha[0] == 1.0);
}

TEST_CASE("sample_simplex: validity and coordinate means") {
    for (std::size_t n : {2u, 3u, 5u}) {
        SeededRng rng(11, n);
        const int draws = 100000;
        std::vector<double> mean(n, 0.0);
        for (int d = 0; d < draws; ++d) {
            SimplexPoint p = sample_simplex(n, rng);
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                REQUIRE(p.alpha[i] >= 0.0);
                s += p.alpha[i];
                mean[i] += p.alpha[i];
            }
            REQUIRE(std::abs(s - 1.0) <= 1e-12);
        }
        // Dirichlet(1..1) coordinate: var = (n-1)/(n^2 (n+1))
        const double sd_mean =
            std::sqrt((n - 1.0) / (double(n) * n * (n + 1.0)) / draws);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(mean[i] / draws - 1.0 / n) < 3.0 * sd_mean + 1e-4);
    }
}

TEST_CASE("convex_combine: unit alpha returns the member bitwise") {
    EnsembleWeights w = random_members(3, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        ParamVector mixed = convex_combine(w, SimplexPoint::unit(3, i));
        for (std::size_t j = 0; j < mixed.data.size(); ++j)
            CHECK(mixed.data[j] == w.members[i].data[j]);
    }
}

TEST_CASE("convex_combine: identical members are a fixed point") {
    EnsembleWeights w = random_members(1, 4);
    w.members.push_back(w.members[0]);
    SeededRng rng(13, 1);
    SimplexPoint alpha = sample_simplex(2, rng);
    ParamVector mixed = convex_combine(w, alpha);
    for (std::size_t j = 0; j < mixed.data.size(); ++j)
        CHECK(mixed.data[j] == doctest::Approx(w.members[0].data[j]).epsilon(1e-14));
}

TEST_CASE("convex_combine matches the naive triple-loop oracle") {
    EnsembleWeights w = random_members(3, 5);
    SeededRng rng(17, 2);
    for (int rep = 0; rep < 20; ++rep) {
        SimplexPoint alpha = sample_simplex(3, rng);
        ParamVector mixed = convex_combine(w, alpha);
        std::vector<double> ref = oracle::convex_combine_naive(w.members, alpha.alpha);
        for (std::size_t j = 0; j < mixed.data.size(); ++j)
            CHECK(mixed.data[j] == doctest::Approx(ref[j]).epsilon(1e-14));
    }
}

TEST_CASE("convex_combine validates coefficient count") {
    EnsembleWeights w = random_members(3, 6);
    SimplexPoint bad;
    bad.alpha = {0.5, 0.5};
    CHECK_THROWS_AS(convex_combine(w, bad), InputError);
}

TEST_CASE("mixing linearity") {
    EnsembleWeights w = random_members(3, 7);
    SeededRng rng(19, 3);
    SimplexPoint a = sample_simplex(3, rng);
    SimplexPoint b = sample_simplex(3, rng);
    const double lambda = 0.3;
    SimplexPoint mix;
    mix.alpha.resize(3);
    for (std::size_t i = 0; i < 3; ++i)
        mix.alpha[i] = lambda * a.alpha[i] + (1 - lambda) * b.alpha[i];
    ParamVector lhs = convex_combine(w, mix);
    ParamVector wa = convex_combine(w, a);
    ParamVector wb = convex_combine(w, b);
    for (std::size_t j = 0; j < lhs.data.size(); ++j)
        CHECK(std::abs(lhs.data[j] - (lambda * wa.data[j] + (1 - lambda) * wb.data[j])) <= 1e-12);
}

TEST_CASE("midpoint equals convex_combine with uniform alpha, bitwise") {
    for (std::size_t n : {1u, 2u, 3u}) {
        EnsembleWeights w = random_members(n, 20 + n);
        ParamVector mid = midpoint(w);
        ParamVector mixed = convex_combine(w, SimplexPoint::uniform(n));
        for (std::size_t j = 0; j < mid.data.size(); ++j) CHECK(mid.data[j] == mixed.data[j]);
    }
    // antisymmetric pair cancels
    EnsembleWeights pair = random_members(1, 30);
    ParamVector neg = pair.members[0];
    scale(neg, -1.0);
    pair.members.push_back(neg);
    ParamVector mid = midpoint(pair);
    for (double v : mid.data) CHECK(v == 0.0);
}

TEST_CASE("subspace_grad_distribute scales the mixed gradient per member") {
    EnsembleWeights w = random_members(1, 8);
    ParamVector g = w.members[0];
    SimplexPoint alpha;
    alpha.alpha = {0.2, 0.3, 0.5};
    auto grads = subspace_grad_distribute(g, alpha);
    REQUIRE(grads.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < g.data.size(); ++j)
            CHECK(grads[i].data[j] == alpha.alpha[i] * g.data[j]);

    auto unit = subspace_grad_distribute(g, SimplexPoint::unit(3, 1));
    for (std::size_t j = 0; j < g.data.size(); ++j) {
        CHECK(unit[0].data[j] == 0.0);
        CHECK(unit[1].data[j] == g.data[j]);
        CHECK(unit[2].data[j] == 0.0);
    }
}

TEST_CASE("subspace gradient rule matches finite differences through the mixing map") {
    // L(w1..wn) = CE(forward(sum_i alpha_i w_i)); dL/dw_i must equal
    // alpha_i * dL/dw_mixed.
    MlpSpec spec = small_spec();
    EnsembleWeights w = random_members(3, 9);
    SeededRng rng(23, 4);
    SimplexPoint alpha = sample_simplex(3, rng);
    Tensor batch = Tensor::zeros({2, 3});
    for (double& v : batch.data) v = rng.normal();
    std::vector<int> labels{0, 1};

    ParamVector mixed = convex_combine(w, alpha);
    ForwardCache cache;
    Tensor logits = mlp_forward(spec, mixed, batch, RunMode::kEval, nullptr, &cache);
    ParamVector grad_mixed = mlp_backward(spec, cache, cross_entropy(logits, labels).grad_logits);
    auto member_grads = subspace_grad_distribute(grad_mixed, alpha);

    for (std::size_t i = 0; i < 3; ++i) {
        auto loss_wrt_member = [&](const ParamVector& wi) {
            EnsembleWeights probe = w;
            probe.members[i] = wi;
            Tensor z = mlp_forward(spec, convex_combine(probe, alpha), batch, RunMode::kEval,
                                   nullptr);
            return cross_entropy(z, labels).loss;
        };
        ParamVector fd = finite_diff_grad(loss_wrt_member, w.members[i], 1e-5);
        for (std::size_t j = 0; j < fd.data.size(); ++j) {
            const double denom = std::max({std::abs(fd.data[j]),
                                           std::abs(member_grads[i].data[j]), 1e-8});
            CHECK(std::abs(fd.data[j] - member_grads[i].data[j]) / denom <= 1e-5);
        }
    }
}

TEST_CASE("one subspace SGD step moves the re-mixed point by -eta sum(alpha^2) g") {
    EnsembleWeights w = random_members(3, 10);
    SeededRng rng(29, 5);
    SimplexPoint alpha = sample_simplex(3, rng);
    ParamVector g = w.members[0];  // arbitrary gradient direction
    auto grads = subspace_grad_distribute(g, alpha);

    const double eta = 0.05;
    EnsembleWeights stepped = w;
    for (std::size_t i = 0; i < 3; ++i) add_scaled(stepped.members[i], grads[i], -eta);

    ParamVector before = convex_combine(w, alpha);
    ParamVector after = convex_combine(stepped, alpha);
    double alpha_sq = 0.0;
    for (double a : alpha.alpha) alpha_sq += a * a;
    for (std::size_t j = 0; j < before.data.size(); ++j)
        CHECK(std::abs(after.data[j] - (before.data[j] - eta * alpha_sq * g.data[j])) <= 1e-12);
}

TEST_CASE("multiplicative_perturb: sigma 0 identity, zeros stay zero, stated std") {
    EnsembleWeights w = random_members(1, 11);
    SeededRng rng(31, 6);
    ParamVector same = multiplicative_perturb(w.members[0], 0.0, rng);
    for (std::size_t j = 0; j < same.data.size(); ++j)
        CHECK(same.data[j] == w.members[0].data[j]);

    ParamVector zero = w.members[0];
    fill(zero, 0.0);
    ParamVector still_zero = multiplicative_perturb(zero, 5.0, rng);
    for (double v : still_zero.data) CHECK(v == 0.0);

    MlpSpec big;
    big.input_dim = 100;
    big.hidden_dims = {100};
    big.output_dim = 10;
    SeededRng init(33, 7);
    ParamVector params = init_mlp_params(big, init);
    ParamVector noisy = multiplicative_perturb(params, 0.01, rng);
    double sum = 0.0, sum2 = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < params.data.size(); ++j) {
        if (params.data[j] == 0.0) continue;
        const double rel = noisy.data[j] / params.data[j] - 1.0;
        sum += rel;
        sum2 += rel * rel;
        ++count;
    }
    REQUIRE(count >= 10000);
    const double mean = sum / count;
    CHECK(std::sqrt(sum2 / count - mean * mean) == doctest::Approx(0.01).epsilon(0.10));
}

TEST_CASE("batch ensemble: identity fast weights reduce to the plain forward bitwise") {
    MlpSpec spec = small_spec();
    SeededRng rng(37, 8);
    for (int rep = 0; rep < 100; ++rep) {
        SeededRng init = rng.fork(rep);
        BatchEnsembleWeights w = init_batch_ensemble(spec, 3, 0.0, init);
        Tensor batch = Tensor::zeros({4, 3});
        for (double& v : batch.data) v = rng.normal();
        std::vector<std::size_t> assignment{0, 1, 2, 1};
        Tensor be = batch_ensemble_forward(spec, w, batch, assignment, RunMode::kEval, nullptr);
        Tensor plain = mlp_forward(spec, w.shared, batch, RunMode::kEval, nullptr);
        for (std::size_t j = 0; j < be.data.size(); ++j) CHECK(be.data[j] == plain.data[j]);
    }
}

TEST_CASE("batch ensemble forward matches explicit rank-1 materialization") {
    MlpSpec spec = small_spec();
    SeededRng rng(41, 9);
    SeededRng init = rng.fork(0);
    BatchEnsembleWeights w = init_batch_ensemble(spec, 3, 0.5, init);

    // member materialization against a hand-built W o (r s^T)
    for (std::size_t m = 0; m < 3; ++m) {
        ParamVector mat = batch_ensemble_member(spec, w, m);
        const auto dims = spec.layer_dims();
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            const std::string ls = std::to_string(l), ms = std::to_string(m);
            auto shared_w = w.shared.span_of("layer" + ls + ".weight");
            auto r = w.fast.span_of("layer" + ls + ".r" + ms);
            auto s = w.fast.span_of("layer" + ls + ".s" + ms);
            auto got = mat.span_of("layer" + ls + ".weight");
            for (std::size_t i = 0; i < dims[l]; ++i)
                for (std::size_t j = 0; j < dims[l + 1]; ++j)
                    CHECK(got[i * dims[l + 1] + j] ==
                          doctest::Approx(shared_w[i * dims[l + 1] + j] * r[i] * s[j])
                              .epsilon(1e-15));
            auto bias = mat.span_of("layer" + ls + ".bias");
            auto shared_b = w.shared.span_of("layer" + ls + ".bias");
            for (std::size_t j = 0; j < dims[l + 1]; ++j) CHECK(bias[j] == shared_b[j]);
        }
    }

    // single-example forward equals the materialized member's forward
    for (std::size_t m = 0; m < 3; ++m) {
        Tensor x = Tensor::zeros({1, 3});
        for (double& v : x.data) v = rng.normal();
        Tensor be = batch_ensemble_forward(spec, w, x, {m}, RunMode::kEval, nullptr);
        Tensor ref = mlp_forward(spec, batch_ensemble_member(spec, w, m), x, RunMode::kEval,
                                 nullptr);
        for (std::size_t j = 0; j < be.data.size(); ++j)
            CHECK(std::abs(be.data[j] - ref.data[j]) <= 1e-12);
    }
}

TEST_CASE("batch ensemble rejects out-of-range assignments") {
    MlpSpec spec = small_spec();
    SeededRng init(43, 1);
    BatchEnsembleWeights w = init_batch_ensemble(spec, 2, 0.0, init);
    Tensor x = Tensor::zeros({1, 3});
    CHECK_THROWS_AS(batch_ensemble_forward(spec, w, x, {2}, RunMode::kEval, nullptr), InputError);
    CHECK_THROWS_AS(batch_ensemble_forward(spec, w, x, {0, 1}, RunMode::kEval, nullptr),
                    InputError);
}

TEST_CASE("batch ensemble backward matches finite differences") {
    MlpSpec spec = small_spec();
    SeededRng rng(47, 2);
    SeededRng init = rng.fork(0);
    BatchEnsembleWeights w = init_batch_ensemble(spec, 2, 0.3, init);
    Tensor batch = Tensor::zeros({3, 3});
    for (double& v : batch.data) v = rng.normal();
    std::vector<std::size_t> assignment{0, 1, 0};
    std::vector<int> labels{1, 0, 1};

    BatchEnsembleCache cache;
    Tensor logits =
        batch_ensemble_forward(spec, w, batch, assignment, RunMode::kEval, nullptr, &cache);
    LossGrad lg = cross_entropy(logits, labels);
    BatchEnsembleGrads grads = batch_ensemble_backward(spec, cache, lg.grad_logits);

    auto loss_of = [&](const BatchEnsembleWeights& probe) {
        Tensor z = batch_ensemble_forward(spec, probe, batch, assignment, RunMode::kEval, nullptr);
        return cross_entropy(z, labels).loss;
    };
    const double eps = 1e-6;
    auto check_block = [&](bool is_shared) {
        BatchEnsembleWeights probe = w;
        ParamVector& block = is_shared ? probe.shared : probe.fast;
        const ParamVector& got = is_shared ? grads.shared : grads.fast;
        for (std::size_t j = 0; j < block.data.size(); ++j) {
            const double orig = block.data[j];
            block.data[j] = orig + eps;
            const double lp = loss_of(probe);
            block.data[j] = orig - eps;
            const double lm = loss_of(probe);
            block.data[j] = orig;
            const double fd = (lp - lm) / (2.0 * eps);
            const double denom = std::max({std::abs(fd), std::abs(got.data[j]), 1e-7});
            CHECK(std::abs(fd - got.data[j]) / denom <= 1e-4);
        }
    };
    check_block(true);
    check_block(false);
}

TEST_CASE("batch ensemble n=1 identity init: gradients equal the plain path bitwise") {
    MlpSpec spec = small_spec();
    SeededRng rng(53, 3);
    SeededRng init = rng.fork(0);
    BatchEnsembleWeights w = init_batch_ensemble(spec, 1, 0.0, init);
    Tensor batch = Tensor::zeros({4, 3});
    for (double& v : batch.data) v = rng.normal();
    std::vector<int> labels{0, 1, 1, 0};

    BatchEnsembleCache be_cache;
    Tensor be_logits = batch_ensemble_forward(spec, w, batch, {0, 0, 0, 0}, RunMode::kEval,
                                              nullptr, &be_cache);
    ForwardCache cache;
    Tensor logits = mlp_forward(spec, w.shared, batch, RunMode::kEval, nullptr, &cache);
    for (std::size_t j = 0; j < logits.data.size(); ++j)
        REQUIRE(be_logits.data[j] == logits.data[j]);

    LossGrad lg = cross_entropy(logits, labels);
    BatchEnsembleGrads be_grads = batch_ensemble_backward(spec, be_cache, lg.grad_logits);
    ParamVector plain = mlp_backward(spec, cache, lg.grad_logits);
    for (std::size_t j = 0; j < plain.data.size(); ++j)
        CHECK(be_grads.shared.data[j] == plain.data[j]);
}
