#include "ecl/runner.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include <nlohmann/json.hpp>

#include "ecl/analysis.hpp"
#include "ecl/checkpoint.hpp"
#include "ecl/config.hpp"
#include "ecl/errors.hpp"
#include "ecl/matrix_io.hpp"
#include "ecl/metrics.hpp"
#include "ecl/trainers.hpp"

namespace ecl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string flops_method_name(FlopsMethod m) {
    switch (m) {
        case FlopsMethod::kSingle: return "single";
        case FlopsMethod::kVanillaEnsemble: return "vanilla_ensemble";
        case FlopsMethod::kSubspace: return "subspace";
        case FlopsMethod::kBatchEnsemble: return "batch_ensemble";
    }
    throw InternalError("unknown flops method");
}

FlopsMethod flops_method_from_name(const std::string& name) {
    if (name == "single") return FlopsMethod::kSingle;
    if (name == "vanilla_ensemble") return FlopsMethod::kVanillaEnsemble;
    if (name == "subspace") return FlopsMethod::kSubspace;
    if (name == "batch_ensemble") return FlopsMethod::kBatchEnsemble;
    throw InputError("unknown flops method \"" + name +
                     "\" (expected single, vanilla_ensemble, subspace, or batch_ensemble)");
}

json flops_to_json(const FlopsReport& r) {
    json j;
    j["method"] = flops_method_name(r.method);
    j["n"] = r.n;
    j["batch_size"] = r.batch_size;
    j["layer_dims"] = r.layer_dims;
    j["single_forward_flops"] = r.single_forward_flops;
    j["method_forward_flops"] = r.method_forward_flops;
    j["overhead_flops"] = r.overhead_flops;
    j["backward_flops"] = r.backward_flops;
    j["train_step_flops"] = r.train_step_flops;
    j["relative_ratio"] = r.relative_ratio;
    return j;
}

json summary_to_json(const MetricsSummary& m) {
    json j;
    j["final_accuracy"] = m.final_accuracy;
    j["forgetting"] = m.forgetting;
    j["learning_accuracy"] = m.learning_accuracy;
    if (m.forgetting_improvement) j["forgetting_improvement"] = *m.forgetting_improvement;
    return j;
}

json aggregate_stat(const std::vector<double>& values) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    if (values.size() > 1) {
        for (double v : values) var += (v - mean) * (v - mean);
        var /= static_cast<double>(values.size() - 1);
    }
    json j;
    j["mean"] = mean;
    j["std"] = std::sqrt(var);
    j["values"] = values;
    return j;
}

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty())
        std::cout << text;
    else
        write_text_file(out_path, text);
}

/// Loads the checkpoint file, pulls one label, and verifies its layout against
/// the configured model before any compute.
ParamVector checkpoint_params(const CheckpointFile& ck, const std::string& label,
                              const MlpSpec& spec, const std::string& path) {
    bool present = false;
    for (const LabeledCheckpoint& e : ck.entries) present = present || e.label == label;
    if (!present)
        throw FormatError(path + " has no checkpoint labeled \"" + label + "\"");
    const ParamVector& w = ck.find(label);
    ParamVector probe(mlp_layout(spec));
    if (!same_layout(w, probe))
        throw FormatError("checkpoint \"" + label + "\" in " + path +
                          " does not match the configured model layout");
    return w;
}

struct AnalyzeContext {
    RunConfig cfg;
    CheckpointFile ck;
    std::vector<Example> test;
};

AnalyzeContext load_analyze_context(const AnalyzeCommon& c) {
    AnalyzeContext ctx;
    ctx.cfg = parse_run_config(c.config_path);
    ctx.ck = load_checkpoint(c.checkpoint_path);
    std::string data_dir = resolve_data_dir(c.data_dir_flag, ctx.cfg.benchmark);
    TaskStream stream = build_stream(ctx.cfg.benchmark, data_dir, c.seed);
    if (c.task < 1 || c.task > stream.T())
        throw InputError("task index " + std::to_string(c.task) + " outside 1.." +
                         std::to_string(stream.T()));
    ctx.test = std::move(stream.tasks[c.task - 1].test);
    return ctx;
}

}  // namespace

void cmd_run(const std::string& config_path, const std::string& data_dir_flag) {
    RunConfig cfg = parse_run_config(config_path);
    std::string data_dir = resolve_data_dir(data_dir_flag, cfg.benchmark);
    fs::create_directories(cfg.output_dir);

    std::vector<double> finals, forgets, learns;
    for (std::uint64_t seed : cfg.seeds) {
        TaskStream stream = build_stream(cfg.benchmark, data_dir, seed);
        TrainConfig tc = cfg.train;
        tc.seed = seed;
        RunRecord rec = train(cfg.method, stream, tc, cfg.model, cfg.strategy);

        std::string seed_dir = cfg.output_dir + "/seed" + std::to_string(seed);
        fs::create_directories(seed_dir);
        write_text_file(seed_dir + "/matrix.csv", matrix_to_csv(rec.accuracy_matrix));

        MetricsSummary ms = summarize(rec.accuracy_matrix);
        json summary = summary_to_json(ms);
        summary["method"] = method_name(cfg.method);
        summary["seed"] = seed;
        summary["accuracy_matrix"] = rec.accuracy_matrix.rows;
        write_text_file(seed_dir + "/summary.json", summary.dump(2) + "\n");
        write_text_file(seed_dir + "/flops.json", flops_to_json(rec.flops).dump(2) + "\n");

        CheckpointFile ck;
        ck.n = static_cast<std::uint32_t>(tc.n_models);
        ck.T = static_cast<std::uint32_t>(stream.T());
        ck.entries = rec.checkpoints;
        save_checkpoint(seed_dir + "/checkpoints.eclw", ck);

        for (std::size_t i = 0; i < rec.per_member_matrices.size(); ++i)
            write_text_file(seed_dir + "/member" + std::to_string(i + 1) + "_matrix.csv",
                            matrix_to_csv(rec.per_member_matrices[i]));
        for (const auto& [name, m] : rec.extra_matrices)
            write_text_file(seed_dir + "/matrix_" + name + ".csv", matrix_to_csv(m));

        finals.push_back(ms.final_accuracy);
        forgets.push_back(ms.forgetting);
        learns.push_back(ms.learning_accuracy);
    }

    json agg;
    agg["method"] = method_name(cfg.method);
    agg["seeds"] = cfg.seeds;
    agg["final_accuracy"] = aggregate_stat(finals);
    agg["forgetting"] = aggregate_stat(forgets);
    agg["learning_accuracy"] = aggregate_stat(learns);
    write_text_file(cfg.output_dir + "/aggregate.json", agg.dump(2) + "\n");
}

void cmd_metrics(const std::string& matrix_csv, const std::string& baseline_csv,
                 const std::string& out_path) {
    AccuracyMatrix a = load_matrix_csv(matrix_csv);
    std::optional<double> baseline_f;
    if (!baseline_csv.empty()) baseline_f = forgetting(load_matrix_csv(baseline_csv));
    MetricsSummary ms = summarize(a, baseline_f);
    emit(out_path, summary_to_json(ms).dump(2) + "\n");
}

void cmd_analyze_path(const AnalyzeCommon& c, const std::string& label_a,
                      const std::string& label_b, std::size_t k_points) {
    AnalyzeContext ctx = load_analyze_context(c);
    ParamVector w_a = checkpoint_params(ctx.ck, label_a, ctx.cfg.model, c.checkpoint_path);
    ParamVector w_b = checkpoint_params(ctx.ck, label_b, ctx.cfg.model, c.checkpoint_path);
    PathEval pe = eval_linear_path(ctx.cfg.model, w_a, w_b, k_points, ctx.test);

    std::string csv = "# linear path: alpha*\"" + label_a + "\" + (1-alpha)*\"" + label_b +
                      "\"; columns: alpha,loss,accuracy\n";
    for (std::size_t i = 0; i < pe.alphas.size(); ++i)
        csv += format_g17(pe.alphas[i]) + "," + format_g17(pe.losses[i]) + "," +
               format_g17(pe.accuracies[i]) + "\n";
    emit(c.out_path, csv);
}

void cmd_analyze_simplex(const AnalyzeCommon& c, const std::vector<std::string>& labels,
                         std::size_t resolution) {
    if (labels.size() != 3)
        throw InputError("simplex analysis needs exactly 3 member labels, got " +
                         std::to_string(labels.size()));
    AnalyzeContext ctx = load_analyze_context(c);
    EnsembleWeights w;
    for (const auto& label : labels)
        w.members.push_back(checkpoint_params(ctx.ck, label, ctx.cfg.model, c.checkpoint_path));
    SimplexGrid grid = eval_simplex_grid(ctx.cfg.model, w, resolution, ctx.test);

    std::string csv = "# simplex grid, resolution " + std::to_string(resolution) +
                      ", members \"" + labels[0] + "\",\"" + labels[1] + "\",\"" + labels[2] +
                      "\"; columns: alpha1,alpha2,alpha3,loss,accuracy\n";
    for (const auto& p : grid.points)
        csv += format_g17(p.alpha.alpha[0]) + "," + format_g17(p.alpha.alpha[1]) + "," +
               format_g17(p.alpha.alpha[2]) + "," + format_g17(p.loss) + "," +
               format_g17(p.accuracy) + "\n";
    emit(c.out_path, csv);
}

void cmd_analyze_noise(const AnalyzeCommon& c, const std::string& label,
                       const std::vector<double>& sigmas, std::size_t trials,
                       std::uint64_t noise_seed) {
    AnalyzeContext ctx = load_analyze_context(c);
    ParamVector w = checkpoint_params(ctx.ck, label, ctx.cfg.model, c.checkpoint_path);
    SeededRng rng(noise_seed, streams::perturb(0, 0));
    std::vector<NoisePoint> pts =
        eval_noise_robustness(ctx.cfg.model, w, sigmas, trials, ctx.test, rng);

    std::string csv = "# multiplicative weight-noise robustness of \"" + label +
                      "\"; columns: sigma,mean_accuracy,std_accuracy\n";
    for (const auto& p : pts)
        csv += format_g17(p.sigma) + "," + format_g17(p.mean_accuracy) + "," +
               format_g17(p.std_accuracy) + "\n";
    emit(c.out_path, csv);
}

void cmd_analyze_hessian(const AnalyzeCommon& c, const std::string& label, std::size_t top_k,
                         std::size_t max_iter, double tol, std::size_t max_examples) {
    AnalyzeContext ctx = load_analyze_context(c);
    ParamVector w = checkpoint_params(ctx.ck, label, ctx.cfg.model, c.checkpoint_path);
    if (max_examples > 0 && ctx.test.size() > max_examples)
        ctx.test.resize(max_examples);
    HessianSpectrum spec = hessian_top_eigs(ctx.cfg.model, w, ctx.test, top_k, max_iter, tol);

    json j;
    j["label"] = label;
    j["examples"] = ctx.test.size();
    j["eigenvalues"] = spec.eigenvalues;
    j["iterations"] = spec.iterations;
    j["residuals"] = spec.residuals;
    j["converged"] = spec.converged;
    emit(c.out_path, j.dump(2) + "\n");
}

void cmd_analyze_flops(const std::vector<std::size_t>& layer_dims, const std::string& method,
                       std::size_t n, std::size_t batch_size, const std::string& out_path) {
    if (layer_dims.size() < 2)
        throw InputError("--dims needs at least input and output sizes");
    MlpSpec spec;
    spec.input_dim = layer_dims.front();
    spec.output_dim = layer_dims.back();
    spec.hidden_dims.assign(layer_dims.begin() + 1, layer_dims.end() - 1);
    spec.validate();
    FlopsReport r = flops_report(spec, batch_size, flops_method_from_name(method), n);
    emit(out_path, flops_to_json(r).dump(2) + "\n");
}

}  // namespace ecl
