#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecl/tasks.hpp"
#include "ecl/trainers.hpp"

namespace ecl {

struct BenchmarkConfig {
    StreamKind kind = StreamKind::kSynthetic;
    std::size_t T = 1;
    double delta_deg = 0.0;           // rotated
    std::size_t classes_per_task = 2; // split
    std::size_t per_task_train = 0;   // rotated / permuted
    std::size_t per_task_test = 0;    // rotated / permuted
    std::size_t per_class_train = 0;  // split
    std::string data_dir;             // optional; env/flag may supply it
    SyntheticSpec synthetic;          // synthetic
};

/// Full description of one experiment: benchmark, method, model,
/// hyperparameters, seeds, output location. Parsing is strict: unknown keys
/// are rejected with their JSON path.
struct RunConfig {
    BenchmarkConfig benchmark;
    Method method = Method::kSingle;
    Combiner strategy = Combiner::kAveraging;
    MlpSpec model;
    TrainConfig train;
    std::vector<std::uint64_t> seeds;
    std::string output_dir;
};

RunConfig parse_run_config_json(const nlohmann::json& j);
RunConfig parse_run_config(const std::string& path);

std::string method_name(Method m);
Method method_from_name(const std::string& name);
std::string combiner_name(Combiner c);
Combiner combiner_from_name(const std::string& name);
std::string stream_kind_name(StreamKind k);

/// Builds the configured task stream for one seed. data_dir must point at the
/// IDX files for rotated/permuted/split benchmarks.
TaskStream build_stream(const BenchmarkConfig& benchmark, const std::string& data_dir,
                        std::uint64_t seed);

/// Flag > config > ECL_DATA_DIR. Empty result means no directory resolved.
std::string resolve_data_dir(const std::string& flag_value, const BenchmarkConfig& benchmark);

}  // namespace ecl
