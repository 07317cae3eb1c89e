#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "ecl/analysis.hpp"
#include "ecl/errors.hpp"
#include "ecl/eval.hpp"
#include "ecl/mlp.hpp"
#include "ecl/params.hpp"
#include "ecl/rng.hpp"
#include "ecl/tasks.hpp"
#include "ecl/weightspace.hpp"
#include "oracles.hpp"

using namespace ecl;

namespace {

MlpSpec make_spec(std::size_t in, std::vector<std::size_t> hidden, std::size_t out) {
    MlpSpec s;
    s.input_dim = in;
    s.hidden_dims = std::move(hidden);
    s.output_dim = out;
    return s;
}

/// Features are standard normal; labels cycle through the classes, so they
/// carry no information about the inputs.
std::vector<Example> random_dataset(std::size_t count, std::size_t dim, std::size_t classes,
                                    SeededRng& rng) {
    std::vector<Example> out;
    for (std::size_t i = 0; i < count; ++i) {
        Example ex;
        ex.features = Tensor::zeros({dim});
        for (double& v : ex.features.data) v = rng.normal();
        ex.label = static_cast<int>(i % classes);
        out.push_back(std::move(ex));
    }
    return out;
}

ParamVector random_net(const MlpSpec& spec, std::uint64_t stream) {
    SeededRng rng(17, stream);
    return init_ensemble(spec, 1, 0.0, rng).members[0];
}

}  // namespace

TEST_CASE("linear path endpoints match direct evaluation bitwise") {
    const MlpSpec spec = make_spec(6, {10}, 4);
    SeededRng drng(5, 1);
    const auto ds = random_dataset(40, 6, 4, drng);
    const ParamVector w_a = random_net(spec, 100);
    const ParamVector w_b = random_net(spec, 101);

    const PathEval pe = eval_linear_path(spec, w_a, w_b, 11, ds);
    REQUIRE(pe.alphas.size() == 11);
    REQUIRE(pe.losses.size() == 11);
    REQUIRE(pe.accuracies.size() == 11);
    for (std::size_t i = 0; i < 11; ++i)
        CHECK(pe.alphas[i] == static_cast<double>(i) / 10.0);

    // alpha multiplies w_a, so alpha = 1 must reproduce w_a exactly
    const EvalResult ra = evaluate(spec, w_a, ds);
    const EvalResult rb = evaluate(spec, w_b, ds);
    CHECK(pe.losses.back() == ra.loss);
    CHECK(pe.accuracies.back() == ra.accuracy);
    CHECK(pe.losses.front() == rb.loss);
    CHECK(pe.accuracies.front() == rb.accuracy);
}

TEST_CASE("linear path between identical endpoints is flat") {
    const MlpSpec spec = make_spec(5, {8}, 3);
    SeededRng drng(6, 1);
    const auto ds = random_dataset(30, 5, 3, drng);
    const ParamVector w = random_net(spec, 102);
    const EvalResult direct = evaluate(spec, w, ds);

    const PathEval pe = eval_linear_path(spec, w, w, 9, ds);
    for (std::size_t i = 0; i < pe.losses.size(); ++i) {
        CHECK(pe.losses[i] == doctest::Approx(direct.loss).epsilon(1e-9));
        CHECK(pe.accuracies[i] == direct.accuracy);
    }
}

TEST_CASE("linear path validates point count and layouts") {
    const MlpSpec spec = make_spec(4, {6}, 3);
    SeededRng drng(7, 1);
    const auto ds = random_dataset(9, 4, 3, drng);
    const ParamVector w_a = random_net(spec, 103);
    const ParamVector w_b = random_net(spec, 104);
    CHECK_THROWS_AS(eval_linear_path(spec, w_a, w_b, 1, ds), InputError);
    CHECK_THROWS_AS(eval_linear_path(spec, w_a, w_b, 0, ds), InputError);

    const MlpSpec other = make_spec(4, {7}, 3);
    const ParamVector w_c = random_net(other, 105);
    CHECK_THROWS_AS(eval_linear_path(spec, w_a, w_c, 5, ds), InputError);
}

TEST_CASE("linear path over a convex quadratic is the closed-form parabola") {
    // 8-parameter layout; loss 0.5 * sum_j d_j theta_j^2 with d_j = j + 1
    const MlpSpec spec = make_spec(3, {}, 2);
    const auto layout = mlp_layout(spec);
    ParamVector w_a(layout), w_b(layout);
    SeededRng rng(11, 3);
    for (double& v : w_a.data) v = rng.normal();
    for (double& v : w_b.data) v = rng.normal();

    auto loss_fn = [](const ParamVector& p) {
        double s = 0.0;
        for (std::size_t j = 0; j < p.data.size(); ++j)
            s += 0.5 * static_cast<double>(j + 1) * p.data[j] * p.data[j];
        return s;
    };

    // f(alpha) = c0 + c1 alpha + c2 alpha^2 along alpha*w_a + (1-alpha)*w_b
    double c0 = 0.0, c1 = 0.0, c2 = 0.0;
    for (std::size_t j = 0; j < w_a.data.size(); ++j) {
        const double d = static_cast<double>(j + 1);
        const double a = w_a.data[j], b = w_b.data[j];
        c0 += 0.5 * d * b * b;
        c1 += d * b * (a - b);
        c2 += 0.5 * d * (a - b) * (a - b);
    }

    const PathEval pe = eval_linear_path(loss_fn, w_a, w_b, 21);
    REQUIRE(pe.losses.size() == 21);
    for (std::size_t i = 0; i < 21; ++i) {
        const double alpha = pe.alphas[i];
        const double expected = c0 + c1 * alpha + c2 * alpha * alpha;
        CHECK(std::abs(pe.losses[i] - expected) <= 1e-10);
        CHECK(pe.accuracies[i] == 0.0);
    }
    CHECK(pe.max_loss() == *std::max_element(pe.losses.begin(), pe.losses.end()));
}

TEST_CASE("path max_loss reports the worst point and rejects empty paths") {
    PathEval p;
    p.losses = {0.25, 4.0, 1.5};
    CHECK(p.max_loss() == 4.0);
    PathEval empty;
    CHECK_THROWS_AS(empty.max_loss(), InputError);
}

TEST_CASE("simplex grid enumerates all barycentric points at each resolution") {
    const MlpSpec spec = make_spec(4, {6}, 3);
    SeededRng drng(8, 1);
    const auto ds = random_dataset(12, 4, 3, drng);
    SeededRng irng(9, 2);
    const EnsembleWeights w = init_ensemble(spec, 3, 0.5, irng);

    for (std::size_t r : {std::size_t{2}, std::size_t{3}, std::size_t{5}, std::size_t{10},
                          std::size_t{20}}) {
        const SimplexGrid grid = eval_simplex_grid(spec, w, r, ds);
        CHECK(grid.resolution == r);
        CHECK(grid.points.size() == (r + 1) * (r + 2) / 2);
        for (const auto& pt : grid.points) {
            REQUIRE(pt.alpha.n() == 3);
            double sum = 0.0;
            for (double a : pt.alpha.alpha) {
                // every coordinate is an integer multiple of 1/r
                const double steps = a * static_cast<double>(r);
                CHECK(std::abs(steps - std::round(steps)) <= 1e-9);
                sum += a;
            }
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("simplex grid corners reproduce the members bitwise") {
    const MlpSpec spec = make_spec(5, {7}, 3);
    SeededRng drng(10, 1);
    const auto ds = random_dataset(15, 5, 3, drng);
    SeededRng irng(12, 2);
    const EnsembleWeights w = init_ensemble(spec, 3, 0.7, irng);

    const SimplexGrid grid = eval_simplex_grid(spec, w, 4, ds);
    for (std::size_t m = 0; m < 3; ++m) {
        const EvalResult direct = evaluate(spec, w.members[m], ds);
        bool found = false;
        for (const auto& pt : grid.points) {
            if (pt.alpha.alpha[m] == 1.0) {
                found = true;
                CHECK(pt.loss == direct.loss);
                CHECK(pt.accuracy == direct.accuracy);
            }
        }
        CHECK(found);
    }
}

TEST_CASE("simplex grid center matches the midpoint model bitwise") {
    const MlpSpec spec = make_spec(4, {5}, 3);
    SeededRng drng(13, 1);
    const auto ds = random_dataset(12, 4, 3, drng);
    SeededRng irng(14, 2);
    const EnsembleWeights w = init_ensemble(spec, 3, 0.4, irng);

    const EvalResult direct = evaluate(spec, midpoint(w), ds);
    const SimplexGrid grid = eval_simplex_grid(spec, w, 3, ds);
    bool found = false;
    for (const auto& pt : grid.points) {
        if (pt.alpha.alpha[0] == 1.0 / 3.0 && pt.alpha.alpha[1] == 1.0 / 3.0 &&
            pt.alpha.alpha[2] == 1.0 / 3.0) {
            found = true;
            CHECK(pt.loss == direct.loss);
            CHECK(pt.accuracy == direct.accuracy);
        }
    }
    CHECK(found);
}

TEST_CASE("simplex grid validates member count and resolution") {
    const MlpSpec spec = make_spec(4, {5}, 3);
    SeededRng drng(15, 1);
    const auto ds = random_dataset(6, 4, 3, drng);
    SeededRng irng(16, 2);
    const EnsembleWeights two = init_ensemble(spec, 2, 0.4, irng);
    const EnsembleWeights four = init_ensemble(spec, 4, 0.4, irng);
    const EnsembleWeights three = init_ensemble(spec, 3, 0.4, irng);
    CHECK_THROWS_AS(eval_simplex_grid(spec, two, 4, ds), InputError);
    CHECK_THROWS_AS(eval_simplex_grid(spec, four, 4, ds), InputError);
    CHECK_THROWS_AS(eval_simplex_grid(spec, three, 1, ds), InputError);
    CHECK_THROWS_AS(eval_simplex_grid(spec, three, 0, ds), InputError);
}

TEST_CASE("noise robustness at sigma zero is exact with zero spread") {
    const MlpSpec spec = make_spec(5, {6}, 4);
    SeededRng drng(18, 1);
    const auto ds = random_dataset(40, 5, 4, drng);
    const ParamVector w = random_net(spec, 106);
    const EvalResult direct = evaluate(spec, w, ds);

    SeededRng nrng(19, 4);
    const auto points = eval_noise_robustness(spec, w, {0.0, 0.05}, 5, ds, nrng);
    REQUIRE(points.size() == 2);
    CHECK(points[0].sigma == 0.0);
    CHECK(points[1].sigma == 0.05);
    CHECK(points[0].mean_accuracy == direct.accuracy);
    CHECK(points[0].std_accuracy == 0.0);
}

TEST_CASE("noise robustness on uninformative labels stays near chance") {
    const MlpSpec spec = make_spec(5, {8}, 4);
    SeededRng drng(20, 1);
    const auto ds = random_dataset(400, 5, 4, drng);
    const ParamVector w = random_net(spec, 107);

    SeededRng nrng(21, 4);
    const auto points = eval_noise_robustness(spec, w, {0.02}, 8, ds, nrng);
    REQUIRE(points.size() == 1);
    // labels are independent of features, so expected accuracy is exactly 1/4
    CHECK(std::abs(points[0].mean_accuracy - 0.25) < 0.12);
}

TEST_CASE("noise robustness of a margin classifier degrades monotonically") {
    // one linear layer with a dominant diagonal: class c maps to logit 6 vs 0.3
    const MlpSpec spec = make_spec(4, {}, 4);
    ParamVector w(mlp_layout(spec));
    auto ws = w.span_of("layer0.weight");
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) ws.data()[r * 4 + c] = (r == c) ? 6.0 : 0.3;

    std::vector<Example> ds;
    SeededRng jrng(22, 1);
    for (int rep = 0; rep < 25; ++rep) {
        for (int c = 0; c < 4; ++c) {
            Example ex;
            ex.features = Tensor::zeros({4});
            for (std::size_t d = 0; d < 4; ++d)
                ex.features.data[d] = (static_cast<int>(d) == c ? 1.0 : 0.0) +
                                      0.02 * jrng.normal();
            ex.label = c;
            ds.push_back(std::move(ex));
        }
    }

    SeededRng nrng(23, 4);
    const std::vector<double> sigmas = {0.0, 0.05, 0.2, 0.5, 1.0};
    const auto points = eval_noise_robustness(spec, w, sigmas, 12, ds, nrng);
    REQUIRE(points.size() == sigmas.size());
    CHECK(points[0].mean_accuracy == 1.0);
    CHECK(points[0].std_accuracy == 0.0);
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        const double band = 2.0 * (points[i].std_accuracy + points[i + 1].std_accuracy);
        CHECK(points[i + 1].mean_accuracy <= points[i].mean_accuracy + band + 1e-12);
    }
    CHECK(points.back().mean_accuracy < 1.0);
}

TEST_CASE("noise robustness validates trials and sigma sign") {
    const MlpSpec spec = make_spec(4, {}, 4);
    SeededRng drng(24, 1);
    const auto ds = random_dataset(8, 4, 4, drng);
    const ParamVector w = random_net(spec, 108);
    SeededRng nrng(25, 4);
    CHECK_THROWS_AS(eval_noise_robustness(spec, w, {0.1}, 0, ds, nrng), InputError);
    CHECK_THROWS_AS(eval_noise_robustness(spec, w, {-0.1}, 3, ds, nrng), InputError);
}

TEST_CASE("hessian of a diagonal quadratic recovers its curvatures") {
    // 2-parameter layout; loss 0.5*(3 x0^2 + x1^2) has gradient (3 x0, x1)
    const MlpSpec tiny = make_spec(1, {}, 1);
    const auto layout = mlp_layout(tiny);
    ParamVector at(layout);
    at.data = {0.7, -0.3};

    GradFn grad = [&](const ParamVector& p) {
        ParamVector g(p.layout);
        g.data[0] = 3.0 * p.data[0];
        g.data[1] = 1.0 * p.data[1];
        return g;
    };

    const HessianSpectrum s = hessian_top_eigs(grad, at, 2, 400, 1e-10);
    REQUIRE(s.eigenvalues.size() == 2);
    REQUIRE(s.iterations.size() == 2);
    REQUIRE(s.residuals.size() == 2);
    CHECK(s.converged);
    CHECK(s.eigenvalues[0] >= s.eigenvalues[1]);
    CHECK(std::abs(s.eigenvalues[0] - 3.0) <= 1e-6);
    CHECK(std::abs(s.eigenvalues[1] - 1.0) <= 1e-6);
}

TEST_CASE("hessian eigenvalues scale linearly with the loss") {
    const MlpSpec tiny = make_spec(1, {}, 1);
    ParamVector at(mlp_layout(tiny));
    at.data = {0.1, 0.2};

    const double c = 2.5;
    GradFn grad = [&](const ParamVector& p) {
        ParamVector g(p.layout);
        g.data[0] = c * 3.0 * p.data[0];
        g.data[1] = c * 1.0 * p.data[1];
        return g;
    };

    const HessianSpectrum s = hessian_top_eigs(grad, at, 2, 400, 1e-10);
    REQUIRE(s.eigenvalues.size() == 2);
    CHECK(std::abs(s.eigenvalues[0] - c * 3.0) <= 1e-6);
    CHECK(std::abs(s.eigenvalues[1] - c * 1.0) <= 1e-6);
}

TEST_CASE("hessian of a rotated SPD quadratic finds both eigenvalues") {
    // H = Q diag(4, 0.5) Q^T for a rotation by phi
    const double phi = 0.7;
    const double cs = std::cos(phi), sn = std::sin(phi);
    const double h00 = 4.0 * cs * cs + 0.5 * sn * sn;
    const double h01 = (4.0 - 0.5) * cs * sn;
    const double h11 = 4.0 * sn * sn + 0.5 * cs * cs;

    const MlpSpec tiny = make_spec(1, {}, 1);
    ParamVector at(mlp_layout(tiny));
    at.data = {0.4, -0.9};

    GradFn grad = [&](const ParamVector& p) {
        ParamVector g(p.layout);
        g.data[0] = h00 * p.data[0] + h01 * p.data[1];
        g.data[1] = h01 * p.data[0] + h11 * p.data[1];
        return g;
    };

    const HessianSpectrum s = hessian_top_eigs(grad, at, 2, 400, 1e-10);
    REQUIRE(s.eigenvalues.size() == 2);
    CHECK(s.converged);
    CHECK(std::abs(s.eigenvalues[0] - 4.0) <= 1e-6);
    CHECK(std::abs(s.eigenvalues[1] - 0.5) <= 1e-6);
}

TEST_CASE("hessian of a zero gradient field is the zero spectrum") {
    const MlpSpec tiny = make_spec(1, {}, 1);
    ParamVector at(mlp_layout(tiny));
    at.data = {0.3, 0.6};

    GradFn grad = [](const ParamVector& p) { return ParamVector(p.layout); };
    const HessianSpectrum s = hessian_top_eigs(grad, at, 2, 50, 1e-10);
    REQUIRE(s.eigenvalues.size() == 2);
    CHECK(s.converged);
    for (double ev : s.eigenvalues) CHECK(ev == 0.0);
    for (double r : s.residuals) CHECK(r == 0.0);
}

TEST_CASE("hessian of a small mlp matches a dense finite-difference oracle") {
    const MlpSpec spec = make_spec(3, {5}, 3);
    SeededRng drng(26, 1);
    const auto ds = random_dataset(20, 3, 3, drng);
    const ParamVector w = random_net(spec, 109);

    const auto dense = oracle::dense_hessian(spec, w, ds);
    const auto evals = oracle::jacobi_eigenvalues(dense);
    REQUIRE(evals.size() == w.data.size());

    const HessianSpectrum s = hessian_top_eigs(spec, w, ds, 3, 3000, 1e-10);
    REQUIRE(s.eigenvalues.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        const double tol = 1e-4 * std::max(1.0, std::abs(evals[i]));
        CHECK(std::abs(s.eigenvalues[i] - evals[i]) <= tol);
    }

    CHECK_THROWS_AS(hessian_top_eigs(spec, w, {}, 1, 10, 1e-6), InputError);
}

TEST_CASE("flops: single model counts and unit ratio") {
    // layers 784-100-100-10 at batch 10:
    //   2*10*784*100 + 10*100 = 1,569,000
    //   2*10*100*100 + 10*100 =   201,000
    //   2*10*100*10  + 10*10  =    20,100
    const MlpSpec spec = make_spec(784, {100, 100}, 10);
    const FlopsReport r = flops_report(spec, 10, FlopsMethod::kSingle, 1);
    CHECK(r.single_forward_flops == 1790100.0);
    CHECK(r.method_forward_flops == 1790100.0);
    CHECK(r.overhead_flops == 0.0);
    CHECK(r.relative_ratio == 1.0);
    CHECK(r.backward_flops == 2.0 * r.method_forward_flops);
    CHECK(r.train_step_flops == 3.0 * r.method_forward_flops);
    CHECK(r.batch_size == 10);
    CHECK(r.layer_dims == std::vector<std::size_t>{784, 100, 100, 10});
}

TEST_CASE("flops: vanilla ensemble costs exactly n singles") {
    const MlpSpec spec = make_spec(784, {100, 100}, 10);
    for (std::size_t n = 1; n <= 10; ++n) {
        const FlopsReport r = flops_report(spec, 10, FlopsMethod::kVanillaEnsemble, n);
        CHECK(r.method_forward_flops == static_cast<double>(n) * r.single_forward_flops);
        CHECK(r.relative_ratio == static_cast<double>(n));
        CHECK(r.overhead_flops == static_cast<double>(n - 1) * r.single_forward_flops);
    }
}

TEST_CASE("flops: subspace adds one mixing pass over the parameters") {
    // layers 784-256-256-10 at batch 10: single forward = 5,381,220 and the
    // parameter count is 269,322, so n = 3 mixing adds (2*3-1)*269,322
    const MlpSpec spec = make_spec(784, {256, 256}, 10);
    const FlopsReport r = flops_report(spec, 10, FlopsMethod::kSubspace, 3);
    CHECK(r.single_forward_flops == 5381220.0);
    CHECK(r.method_forward_flops == 6727830.0);
    CHECK(r.overhead_flops == 1346610.0);
    CHECK(r.relative_ratio == 6727830.0 / 5381220.0);
    CHECK(r.relative_ratio < 1.5);
    CHECK(r.backward_flops == 2.0 * r.method_forward_flops);
    CHECK(r.train_step_flops == 3.0 * r.method_forward_flops);

    double prev = 0.0;
    for (std::size_t n : {std::size_t{2}, std::size_t{3}, std::size_t{5}}) {
        const FlopsReport rn = flops_report(spec, 10, FlopsMethod::kSubspace, n);
        CHECK(rn.relative_ratio > prev);
        prev = rn.relative_ratio;
    }
}

TEST_CASE("flops: batch ensemble overhead is independent of n") {
    // two Hadamard passes per layer: 2*10*(784+256) + 2*10*(256+256)
    // + 2*10*(256+10) = 36,360 on top of one shared forward
    const MlpSpec spec = make_spec(784, {256, 256}, 10);
    const FlopsReport r3 = flops_report(spec, 10, FlopsMethod::kBatchEnsemble, 3);
    CHECK(r3.method_forward_flops == 5417580.0);
    CHECK(r3.overhead_flops == 36360.0);
    CHECK(r3.relative_ratio == 5417580.0 / 5381220.0);
    CHECK(r3.relative_ratio < 1.01);
    for (std::size_t n : {std::size_t{1}, std::size_t{2}, std::size_t{4}, std::size_t{8}}) {
        const FlopsReport rn = flops_report(spec, 10, FlopsMethod::kBatchEnsemble, n);
        CHECK(rn.method_forward_flops == r3.method_forward_flops);
        CHECK(rn.relative_ratio == r3.relative_ratio);
    }
}

TEST_CASE("flops validates batch size and member count") {
    const MlpSpec spec = make_spec(8, {4}, 2);
    CHECK_THROWS_AS(flops_report(spec, 0, FlopsMethod::kSingle, 1), InputError);
    CHECK_THROWS_AS(flops_report(spec, 4, FlopsMethod::kVanillaEnsemble, 0), InputError);
}
