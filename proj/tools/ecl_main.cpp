#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ecl/errors.hpp"
#include "ecl/runner.hpp"

namespace {

// Exit codes: 0 success, 1 usage/config, 2 data, 3 numeric failure.
constexpr int kUsageError = 1;
constexpr int kDataError = 2;
constexpr int kNumericError = 3;

void add_common(CLI::App* cmd, ecl::AnalyzeCommon& c) {
    cmd->add_option("--config", c.config_path, "run config that produced the checkpoints")
        ->required();
    cmd->add_option("--checkpoints", c.checkpoint_path, "checkpoint file (.eclw)")->required();
    cmd->add_option("--data-dir", c.data_dir_flag, "dataset root (overrides config/ECL_DATA_DIR)");
    cmd->add_option("--seed", c.seed, "seed used to rebuild the task stream");
    cmd->add_option("--task", c.task, "1-based task whose test split is evaluated");
    cmd->add_option("--out", c.out_path, "output file (default: stdout)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continual-learning lab: sequential-task training, metrics, and "
                 "weight-space analyses"};
    app.require_subcommand(1);

    std::string run_config, run_data_dir;
    auto* run = app.add_subcommand("run", "train every configured seed and write artifacts");
    run->add_option("config", run_config, "run config file (JSON)")->required();
    run->add_option("--data-dir", run_data_dir, "dataset root (overrides config/ECL_DATA_DIR)");

    std::string matrix_csv, baseline_csv, metrics_out;
    auto* metrics = app.add_subcommand("metrics", "recompute metrics from an accuracy-matrix CSV");
    metrics->add_option("matrix", matrix_csv, "accuracy-matrix CSV")->required();
    metrics->add_option("--baseline", baseline_csv,
                        "baseline matrix CSV for forgetting improvement");
    metrics->add_option("--out", metrics_out, "output file (default: stdout)");

    auto* analyze = app.add_subcommand("analyze", "weight-space analyses over saved checkpoints");
    analyze->require_subcommand(1);

    ecl::AnalyzeCommon path_c;
    std::string path_a, path_b;
    std::size_t path_points = 11;
    auto* path = analyze->add_subcommand("path", "loss/accuracy along a linear weight path");
    add_common(path, path_c);
    path->add_option("--a", path_a, "checkpoint label at alpha=1")->required();
    path->add_option("--b", path_b, "checkpoint label at alpha=0")->required();
    path->add_option("--points", path_points, "number of evenly spaced alphas");

    ecl::AnalyzeCommon simplex_c;
    std::vector<std::string> simplex_labels;
    std::size_t simplex_resolution = 10;
    auto* simplex = analyze->add_subcommand("simplex", "loss/accuracy on a 3-member simplex grid");
    add_common(simplex, simplex_c);
    simplex->add_option("--members", simplex_labels, "exactly 3 checkpoint labels")
        ->required()
        ->expected(3);
    simplex->add_option("--resolution", simplex_resolution, "barycentric subdivisions R");

    ecl::AnalyzeCommon noise_c;
    std::string noise_label;
    std::vector<double> noise_sigmas{0.0, 0.01, 0.02, 0.05, 0.1};
    std::size_t noise_trials = 10;
    std::uint64_t noise_seed = 1;
    auto* noise = analyze->add_subcommand("noise", "accuracy under multiplicative weight noise");
    add_common(noise, noise_c);
    noise->add_option("--label", noise_label, "checkpoint label to perturb")->required();
    noise->add_option("--sigmas", noise_sigmas, "noise standard deviations");
    noise->add_option("--trials", noise_trials, "perturbation draws per sigma");
    noise->add_option("--noise-seed", noise_seed, "seed of the perturbation stream");

    ecl::AnalyzeCommon hessian_c;
    std::string hessian_label;
    std::size_t hessian_top = 5, hessian_max_iter = 400, hessian_examples = 200;
    double hessian_tol = 1e-8;
    auto* hessian = analyze->add_subcommand("hessian", "top loss-Hessian eigenvalues");
    add_common(hessian, hessian_c);
    hessian->add_option("--label", hessian_label, "checkpoint label to analyze")->required();
    hessian->add_option("--top", hessian_top, "number of leading eigenvalues");
    hessian->add_option("--max-iter", hessian_max_iter, "power-iteration cap per eigenvalue");
    hessian->add_option("--tol", hessian_tol, "eigenvector convergence tolerance");
    hessian->add_option("--examples", hessian_examples,
                        "max test examples in the loss (0 = all)");

    std::vector<std::size_t> flops_dims;
    std::string flops_method = "single", flops_out;
    std::size_t flops_n = 1, flops_batch = 10;
    auto* flops = analyze->add_subcommand("flops", "forward/backward operation counts");
    flops->add_option("--dims", flops_dims, "layer sizes, input first (e.g. 784 100 100 10)")
        ->required()
        ->expected(-2);
    flops->add_option("--method", flops_method,
                      "single, vanilla_ensemble, subspace, or batch_ensemble");
    flops->add_option("--n", flops_n, "ensemble size");
    flops->add_option("--batch-size", flops_batch, "batch size b of the cost model");
    flops->add_option("--out", flops_out, "output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    try {
        if (*run) {
            ecl::cmd_run(run_config, run_data_dir);
        } else if (*metrics) {
            ecl::cmd_metrics(matrix_csv, baseline_csv, metrics_out);
        } else if (*path) {
            ecl::cmd_analyze_path(path_c, path_a, path_b, path_points);
        } else if (*simplex) {
            ecl::cmd_analyze_simplex(simplex_c, simplex_labels, simplex_resolution);
        } else if (*noise) {
            ecl::cmd_analyze_noise(noise_c, noise_label, noise_sigmas, noise_trials, noise_seed);
        } else if (*hessian) {
            ecl::cmd_analyze_hessian(hessian_c, hessian_label, hessian_top, hessian_max_iter,
                                     hessian_tol, hessian_examples);
        } else if (*flops) {
            ecl::cmd_analyze_flops(flops_dims, flops_method, flops_n, flops_batch, flops_out);
        }
        return 0;
    } catch (const ecl::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kNumericError;
    } catch (const ecl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsageError;
    } catch (const ecl::InputError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsageError;
    } catch (const ecl::DimensionError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kDataError;
    }
}
