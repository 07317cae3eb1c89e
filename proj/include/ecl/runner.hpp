#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ecl {

/// Trains every configured seed, writing per-seed artifacts under
/// output_dir/seed<k>/ (matrix.csv, summary.json, flops.json,
/// checkpoints.eclw, per-member and per-strategy matrices) plus a cross-seed
/// aggregate.json with mean, sample std, and the raw per-seed values.
void cmd_run(const std::string& config_path, const std::string& data_dir_flag);

/// Recomputes the metric summary of a stored accuracy matrix; with a baseline
/// matrix, also reports the forgetting improvement. Writes JSON to stdout or
/// out_path.
void cmd_metrics(const std::string& matrix_csv, const std::string& baseline_csv,
                 const std::string& out_path);

/// Shared arguments of the checkpoint-driven analyses: the run config supplies
/// the model spec and benchmark, seed/task pick the evaluation split.
struct AnalyzeCommon {
    std::string config_path;
    std::string checkpoint_path;
    std::string data_dir_flag;
    std::uint64_t seed = 1;
    std::size_t task = 1;
    std::string out_path;  // empty writes to stdout
};

void cmd_analyze_path(const AnalyzeCommon& c, const std::string& label_a,
                      const std::string& label_b, std::size_t k_points);
void cmd_analyze_simplex(const AnalyzeCommon& c, const std::vector<std::string>& labels,
                         std::size_t resolution);
void cmd_analyze_noise(const AnalyzeCommon& c, const std::string& label,
                       const std::vector<double>& sigmas, std::size_t trials,
                       std::uint64_t noise_seed);
void cmd_analyze_hessian(const AnalyzeCommon& c, const std::string& label, std::size_t top_k,
                         std::size_t max_iter, double tol, std::size_t max_examples);
void cmd_analyze_flops(const std::vector<std::size_t>& layer_dims, const std::string& method,
                       std::size_t n, std::size_t batch_size, const std::string& out_path);

}  // namespace ecl
