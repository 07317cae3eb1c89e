#include "ecl/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "ecl/errors.hpp"

namespace ecl {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config field \"" + path + "\": " + what);
}

void reject_unknown(const json& j, const std::string& path,
                    const std::set<std::string>& known) {
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) fail(path + "." + key, "unknown key");
}

const json& require(const json& j, const std::string& path, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) fail(path + "." + key, "missing");
    return *it;
}

double get_number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

std::size_t get_count(const json& j, const std::string& path) {
    // signed non-negative values appear when documents are built in memory
    if (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() >= 0)
        return static_cast<std::size_t>(j.get<long long>());
    if (!j.is_number_unsigned()) fail(path, "expected a non-negative integer");
    return j.get<std::size_t>();
}

std::string get_string(const json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

BenchmarkConfig parse_benchmark(const json& j) {
    const std::string path = "benchmark";
    if (!j.is_object()) fail(path, "expected an object");
    BenchmarkConfig b;
    const std::string kind = get_string(require(j, path, "kind"), path + ".kind");
    std::set<std::string> known{"kind", "T", "data_dir"};
    if (kind == "rotated") {
        b.kind = StreamKind::kRotated;
        known.insert({"delta_deg", "per_task_train", "per_task_test"});
        b.delta_deg = get_number(require(j, path, "delta_deg"), path + ".delta_deg");
        b.per_task_train =
            get_count(require(j, path, "per_task_train"), path + ".per_task_train");
        b.per_task_test = get_count(require(j, path, "per_task_test"), path + ".per_task_test");
    } else if (kind == "permuted") {
        b.kind = StreamKind::kPermuted;
        known.insert({"per_task_train", "per_task_test"});
        b.per_task_train =
            get_count(require(j, path, "per_task_train"), path + ".per_task_train");
        b.per_task_test = get_count(require(j, path, "per_task_test"), path + ".per_task_test");
    } else if (kind == "split") {
        b.kind = StreamKind::kSplit;
        known.insert({"classes_per_task", "per_class_train"});
        b.classes_per_task =
            get_count(require(j, path, "classes_per_task"), path + ".classes_per_task");
        b.per_class_train =
            get_count(require(j, path, "per_class_train"), path + ".per_class_train");
    } else if (kind == "synthetic") {
        b.kind = StreamKind::kSynthetic;
        known.insert({"classes", "dims", "cluster_spread", "drift_deg", "train_per_class",
                      "test_per_class"});
        b.synthetic.classes = get_count(require(j, path, "classes"), path + ".classes");
        b.synthetic.dims = get_count(require(j, path, "dims"), path + ".dims");
        b.synthetic.cluster_spread =
            get_number(require(j, path, "cluster_spread"), path + ".cluster_spread");
        b.synthetic.drift_deg = get_number(require(j, path, "drift_deg"), path + ".drift_deg");
        b.synthetic.train_per_class =
            get_count(require(j, path, "train_per_class"), path + ".train_per_class");
        b.synthetic.test_per_class =
            get_count(require(j, path, "test_per_class"), path + ".test_per_class");
    } else {
        fail(path + ".kind", "expected rotated, permuted, split, or synthetic");
    }
    b.T = get_count(require(j, path, "T"), path + ".T");
    if (b.T < 1) fail(path + ".T", "must be >= 1");
    b.synthetic.T = b.T;
    if (j.contains("data_dir")) b.data_dir = get_string(j["data_dir"], path + ".data_dir");
    reject_unknown(j, path, known);
    return b;
}

MlpSpec parse_model(const json& j) {
    const std::string path = "model";
    if (!j.is_object()) fail(path, "expected an object");
    reject_unknown(j, path, {"input_dim", "hidden_dims", "output_dim", "dropout_rate"});
    MlpSpec spec;
    spec.input_dim = get_count(require(j, path, "input_dim"), path + ".input_dim");
    spec.output_dim = get_count(require(j, path, "output_dim"), path + ".output_dim");
    const json& hidden = require(j, path, "hidden_dims");
    if (!hidden.is_array()) fail(path + ".hidden_dims", "expected an array");
    for (const json& h : hidden)
        spec.hidden_dims.push_back(get_count(h, path + ".hidden_dims[]"));
    if (j.contains("dropout_rate"))
        spec.dropout_rate = get_number(j["dropout_rate"], path + ".dropout_rate");
    try {
        spec.validate();
    } catch (const InputError& e) {
        fail(path, e.what());
    }
    return spec;
}

TrainConfig parse_train(const json& j) {
    const std::string path = "train";
    if (!j.is_object()) fail(path, "expected an object");
    reject_unknown(j, path,
                   {"lr0", "lr_decay_per_task", "momentum", "batch_size", "epochs_per_task",
                    "n_models", "sigma_init", "sigma_connect_noise", "alpha_init_mix",
                    "reg_samples", "m_b", "connect_lr", "connect_steps", "buffer_policy"});
    TrainConfig cfg;
    cfg.lr0 = get_number(require(j, path, "lr0"), path + ".lr0");
    if (j.contains("lr_decay_per_task"))
        cfg.lr_decay_per_task = get_number(j["lr_decay_per_task"], path + ".lr_decay_per_task");
    if (j.contains("momentum")) cfg.momentum = get_number(j["momentum"], path + ".momentum");
    cfg.batch_size = get_count(require(j, path, "batch_size"), path + ".batch_size");
    cfg.epochs_per_task =
        get_count(require(j, path, "epochs_per_task"), path + ".epochs_per_task");
    if (j.contains("n_models")) cfg.n_models = get_count(j["n_models"], path + ".n_models");
    if (j.contains("sigma_init"))
        cfg.sigma_init = get_number(j["sigma_init"], path + ".sigma_init");
    if (j.contains("sigma_connect_noise"))
        cfg.sigma_connect_noise =
            get_number(j["sigma_connect_noise"], path + ".sigma_connect_noise");
    if (j.contains("alpha_init_mix"))
        cfg.alpha_init_mix = get_number(j["alpha_init_mix"], path + ".alpha_init_mix");
    if (j.contains("reg_samples"))
        cfg.reg_samples = get_count(j["reg_samples"], path + ".reg_samples");
    if (j.contains("m_b")) cfg.m_b = get_count(j["m_b"], path + ".m_b");
    if (j.contains("connect_lr"))
        cfg.connect_lr = get_number(j["connect_lr"], path + ".connect_lr");
    if (j.contains("connect_steps"))
        cfg.connect_steps = get_count(j["connect_steps"], path + ".connect_steps");
    if (j.contains("buffer_policy")) {
        const std::string policy = get_string(j["buffer_policy"], path + ".buffer_policy");
        if (policy == "first_seen")
            cfg.buffer_policy = ReplayBuffer::Policy::kFirstSeen;
        else if (policy == "reservoir")
            cfg.buffer_policy = ReplayBuffer::Policy::kReservoir;
        else
            fail(path + ".buffer_policy", "expected first_seen or reservoir");
    }
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        fail(path, e.what());
    }
    return cfg;
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::kSingle: return "single";
        case Method::kVanillaEnsemble: return "vanilla_ensemble";
        case Method::kBatchEnsemble: return "batch_ensemble";
        case Method::kSubspace: return "subspace";
        case Method::kSubspaceEr: return "subspace_er";
        case Method::kSubspaceConnectivity: return "subspace_connectivity";
        case Method::kMultitask: return "multitask";
    }
    throw InternalError("method_name: unknown method");
}

Method method_from_name(const std::string& name) {
    for (Method m : {Method::kSingle, Method::kVanillaEnsemble, Method::kBatchEnsemble,
                     Method::kSubspace, Method::kSubspaceEr, Method::kSubspaceConnectivity,
                     Method::kMultitask})
        if (method_name(m) == name) return m;
    throw ConfigError("unknown method \"" + name + "\"");
}

std::string combiner_name(Combiner c) {
    switch (c) {
        case Combiner::kAveraging: return "averaging";
        case Combiner::kHardVote: return "hard_vote";
        case Combiner::kMajorityVote: return "majority_vote";
    }
    throw InternalError("combiner_name: unknown combiner");
}

Combiner combiner_from_name(const std::string& name) {
    for (Combiner c : {Combiner::kAveraging, Combiner::kHardVote, Combiner::kMajorityVote})
        if (combiner_name(c) == name) return c;
    throw ConfigError("unknown strategy \"" + name + "\"");
}

std::string stream_kind_name(StreamKind k) {
    switch (k) {
        case StreamKind::kRotated: return "rotated";
        case StreamKind::kPermuted: return "permuted";
        case StreamKind::kSplit: return "split";
        case StreamKind::kSynthetic: return "synthetic";
    }
    throw InternalError("stream_kind_name: unknown kind");
}

RunConfig parse_run_config_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config root: expected an object");
    reject_unknown(j, "$",
                   {"benchmark", "method", "strategy", "model", "train", "seeds", "output_dir"});
    RunConfig cfg;
    cfg.benchmark = parse_benchmark(require(j, "$", "benchmark"));
    cfg.method = method_from_name(get_string(require(j, "$", "method"), "method"));
    if (j.contains("strategy"))
        cfg.strategy = combiner_from_name(get_string(j["strategy"], "strategy"));
    cfg.model = parse_model(require(j, "$", "model"));
    cfg.train = parse_train(require(j, "$", "train"));
    const json& seeds = require(j, "$", "seeds");
    if (!seeds.is_array() || seeds.empty()) fail("seeds", "expected a non-empty array");
    for (const json& s : seeds) cfg.seeds.push_back(get_count(s, "seeds[]"));
    cfg.output_dir = get_string(require(j, "$", "output_dir"), "output_dir");
    if (cfg.output_dir.empty()) fail("output_dir", "must not be empty");
    return cfg;
}

RunConfig parse_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_run_config_json(j);
}

TaskStream build_stream(const BenchmarkConfig& benchmark, const std::string& data_dir,
                        std::uint64_t seed) {
    SeededRng rng(seed, streams::kBenchmark);
    if (benchmark.kind == StreamKind::kSynthetic)
        return make_synthetic_stream(benchmark.synthetic, rng);

    if (data_dir.empty())
        throw FormatError("no data directory: pass --data-dir, set benchmark.data_dir, "
                          "or export ECL_DATA_DIR");
    BaseDataset base;
    base.train = load_idx(data_dir + "/train-images-idx3-ubyte",
                          data_dir + "/train-labels-idx1-ubyte");
    base.test =
        load_idx(data_dir + "/t10k-images-idx3-ubyte", data_dir + "/t10k-labels-idx1-ubyte");
    int max_label = 0;
    for (int l : base.train.labels) max_label = std::max(max_label, l);
    for (int l : base.test.labels) max_label = std::max(max_label, l);
    base.num_classes = max_label + 1;

    switch (benchmark.kind) {
        case StreamKind::kRotated:
            return make_rotated_stream(base, benchmark.T, benchmark.delta_deg,
                                       benchmark.per_task_train, benchmark.per_task_test, rng);
        case StreamKind::kPermuted:
            return make_permuted_stream(base, benchmark.T, benchmark.per_task_train,
                                        benchmark.per_task_test, rng);
        case StreamKind::kSplit:
            return make_split_stream(base, benchmark.T, benchmark.classes_per_task,
                                     benchmark.per_class_train, rng);
        default: throw InternalError("build_stream: unexpected kind");
    }
}

std::string resolve_data_dir(const std::string& flag_value, const BenchmarkConfig& benchmark) {
    if (!flag_value.empty()) return flag_value;
    if (!benchmark.data_dir.empty()) return benchmark.data_dir;
    const char* env = std::getenv("ECL_DATA_DIR");
    return env ? std::string(env) : std::string();
}

}  // namespace ecl
