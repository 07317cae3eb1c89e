#include "ecl/trainers.hpp"

#include <chrono>
#include <cmath>

#include "ecl/errors.hpp"

namespace ecl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string task_label(std::size_t tau) { return "task" + std::to_string(tau); }

std::vector<std::size_t> shuffled_order(std::size_t count, SeededRng& rng) {
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;
    rng.shuffle(order);
    return order;
}

Tensor gather_features(const std::vector<Example>& data, const std::vector<std::size_t>& order,
                       std::size_t begin, std::size_t count) {
    const std::size_t d = data[order[begin]].features.size();
    Tensor out = Tensor::zeros({count, d});
    for (std::size_t i = 0; i < count; ++i) {
        const Example& ex = data[order[begin + i]];
        std::copy(ex.features.data.begin(), ex.features.data.end(), out.row_ptr(i));
    }
    return out;
}

std::vector<int> gather_labels(const std::vector<Example>& data,
                               const std::vector<std::size_t>& order, std::size_t begin,
                               std::size_t count) {
    std::vector<int> labels(count);
    for (std::size_t i = 0; i < count; ++i) labels[i] = data[order[begin + i]].label;
    return labels;
}

void ensure_finite(const ParamVector& params, const char* who) {
    if (!all_finite(params))
        throw NumericError(std::string(who) + ": non-finite parameter after update");
}

std::vector<double> eval_row(const MlpSpec& spec, const ParamVector& params,
                             const TaskStream& stream, std::size_t upto) {
    std::vector<double> row;
    row.reserve(upto);
    for (std::size_t j = 1; j <= upto; ++j)
        row.push_back(evaluate(spec, params, stream.tasks[j - 1].test).accuracy);
    return row;
}

/// Runs one task's worth of mixed-subspace SGD (one alpha per batch, gradient
/// distributed by alpha). extra_examples, when non-null, yields replay items
/// appended to every batch.
void subspace_task_pass(const MlpSpec& spec, const TaskStream& stream, const TrainConfig& cfg,
                        std::size_t tau, EnsembleWeights& members,
                        std::vector<ParamVector>& velocities, SeededRng& alpha_rng,
                        SeededRng& dropout_rng,
                        const std::function<std::vector<Example>()>& extra_examples) {
    const std::vector<Example>& train = stream.tasks[tau - 1].train;
    for (std::size_t epoch = 0; epoch < cfg.epochs_per_task; ++epoch) {
        SeededRng shuffle_rng(cfg.seed, streams::shuffle(tau, epoch));
        const auto order = shuffled_order(train.size(), shuffle_rng);
        for (std::size_t begin = 0; begin < train.size(); begin += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, train.size() - begin);
            Tensor features = gather_features(train, order, begin, count);
            std::vector<int> labels = gather_labels(train, order, begin, count);
            if (extra_examples) {
                std::vector<Example> extras = extra_examples();
                if (!extras.empty()) {
                    const std::size_t d = features.cols();
                    Tensor grown = Tensor::zeros({count + extras.size(), d});
                    std::copy(features.data.begin(), features.data.end(), grown.data.begin());
                    for (std::size_t i = 0; i < extras.size(); ++i) {
                        std::copy(extras[i].features.data.begin(),
                                  extras[i].features.data.end(), grown.row_ptr(count + i));
                        labels.push_back(extras[i].label);
                    }
                    features = std::move(grown);
                }
            }
            SimplexPoint alpha = sample_simplex(members.n(), alpha_rng);
            ParamVector mixed = convex_combine(members, alpha);
            ForwardCache cache;
            Tensor logits =
                mlp_forward(spec, mixed, features, RunMode::kTrain, &dropout_rng, &cache);
            LossGrad lg = cross_entropy(logits, labels);
            ParamVector grad_mixed = mlp_backward(spec, cache, lg.grad_logits);
            std::vector<ParamVector> grads = subspace_grad_distribute(grad_mixed, alpha);
            sgd_step(members, grads, cfg, tau, velocities);
            for (const ParamVector& m : members.members) ensure_finite(m, "subspace training");
        }
    }
}

ParamVector mix_with_anchor(const EnsembleWeights& members, const SimplexPoint& alpha_ext,
                            const ParamVector& anchor) {
    EnsembleWeights ext;
    ext.members.reserve(members.n() + 1);
    ext.members = members.members;
    ext.members.push_back(anchor);
    return convex_combine(ext, alpha_ext);
}

ParamVector mean_ce_grad(const MlpSpec& spec, const ParamVector& at,
                         const std::vector<Example>& batch, double* loss_out) {
    Tensor features = stack_features(batch);
    std::vector<int> labels = stack_labels(batch);
    ForwardCache cache;
    Tensor logits = mlp_forward(spec, at, features, RunMode::kEval, nullptr, &cache);
    LossGrad lg = cross_entropy(logits, labels);
    if (loss_out) *loss_out += lg.loss;
    return mlp_backward(spec, cache, lg.grad_logits);
}

}  // namespace

void TrainConfig::validate() const {
    if (!(lr0 > 0.0)) throw ConfigError("TrainConfig: lr0 must be > 0");
    if (!(lr_decay_per_task > 0.0 && lr_decay_per_task <= 1.0))
        throw ConfigError("TrainConfig: lr_decay_per_task must be in (0,1]");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw ConfigError("TrainConfig: momentum must be in [0,1)");
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (epochs_per_task < 1) throw ConfigError("TrainConfig: epochs_per_task must be >= 1");
    if (n_models < 1) throw ConfigError("TrainConfig: n_models must be >= 1");
    if (sigma_init < 0.0) throw ConfigError("TrainConfig: sigma_init must be >= 0");
    if (sigma_connect_noise < 0.0)
        throw ConfigError("TrainConfig: sigma_connect_noise must be >= 0");
    if (!(alpha_init_mix >= 0.0 && alpha_init_mix <= 1.0))
        throw ConfigError("TrainConfig: alpha_init_mix must be in [0,1]");
    if (reg_samples < 1) throw ConfigError("TrainConfig: reg_samples must be >= 1");
    if (m_b < 1) throw ConfigError("TrainConfig: m_B must be >= 1");
    if (!(connect_lr > 0.0)) throw ConfigError("TrainConfig: connect_lr must be > 0");
    if (connect_steps < 1) throw ConfigError("TrainConfig: connect_steps must be >= 1");
}

const ParamVector& RunRecord::checkpoint(const std::string& label) const {
    for (const LabeledCheckpoint& c : checkpoints)
        if (c.label == label) return c.params;
    throw InputError("RunRecord: no checkpoint labeled " + label);
}

double effective_lr(const TrainConfig& cfg, std::size_t task_index) {
    if (task_index < 1) throw InputError("effective_lr: task index is 1-based");
    return cfg.lr0 * std::pow(cfg.lr_decay_per_task, static_cast<double>(task_index - 1));
}

void sgd_step(ParamVector& params, const ParamVector& grads, const TrainConfig& cfg,
              std::size_t task_index, ParamVector& velocity) {
    require_same_layout(params, grads, "sgd_step");
    require_same_layout(params, velocity, "sgd_step");
    const double lr = effective_lr(cfg, task_index);
    for (std::size_t i = 0; i < params.data.size(); ++i) {
        velocity.data[i] = cfg.momentum * velocity.data[i] + grads.data[i];
        params.data[i] -= lr * velocity.data[i];
    }
}

void sgd_step(EnsembleWeights& w, const std::vector<ParamVector>& grads, const TrainConfig& cfg,
              std::size_t task_index, std::vector<ParamVector>& velocity) {
    if (grads.size() != w.n() || velocity.size() != w.n())
        throw InputError("sgd_step: per-member gradient/velocity count mismatch");
    for (std::size_t i = 0; i < w.n(); ++i)
        sgd_step(w.members[i], grads[i], cfg, task_index, velocity[i]);
}

RunRecord train_single(const TaskStream& stream, const TrainConfig& cfg, const MlpSpec& spec) {
    cfg.validate();
    spec.validate();
    const auto start = Clock::now();
    SeededRng init_rng(cfg.seed, streams::member_init(0));
    ParamVector params = init_ensemble(spec, 1, cfg.sigma_init, init_rng).members[0];
    ParamVector velocity(params.layout);

    RunRecord rec;
    rec.flops = flops_report(spec, cfg.batch_size, FlopsMethod::kSingle, 1);
    for (std::size_t tau = 1; tau <= stream.T(); ++tau) {
        fill(velocity, 0.0);  // fresh momentum per task
        SeededRng dropout_rng(cfg.seed, streams::dropout(tau, 0));
        const std::vector<Example>& train = stream.tasks[tau - 1].train;
        for (std::size_t epoch = 0; epoch < cfg.epochs_per_task; ++epoch) {
            SeededRng shuffle_rng(cfg.seed, streams::shuffle(tau, epoch));
            const auto order = shuffled_order(train.size(), shuffle_rng);
            for (std::size_t begin = 0; begin < train.size(); begin += cfg.batch_size) {
                const std::size_t count = std::min(cfg.batch_size, train.size() - begin);
                Tensor features = gather_features(train, order, begin, count);
                std::vector<int> labels = gather_labels(train, order, begin, count);
                ForwardCache cache;
                Tensor logits =
                    mlp_forward(spec, params, features, RunMode::kTrain, &dropout_rng, &cache);
                LossGrad lg = cross_entropy(logits, labels);
                ParamVector grads = mlp_backward(spec, cache, lg.grad_logits);
                sgd_step(params, grads, cfg, tau, velocity);
                ensure_finite(params, "single-model training");
            }
        }
        rec.accuracy_matrix.rows.push_back(eval_row(spec, params, stream, tau));
        rec.checkpoints.push_back({task_label(tau) + ".model", params});
    }
    rec.wall_time = seconds_since(start);
    return rec;
}

RunRecord train_vanilla_ensemble(const TaskStream& stream, const TrainConfig& cfg,
                                 const MlpSpec& spec, Combiner strategy) {
    cfg.validate();
    spec.validate();
    const auto start = Clock::now();
    SeededRng init_rng(cfg.seed, streams::member_init(0));
    EnsembleWeights members = init_ensemble(spec, cfg.n_models, cfg.sigma_init, init_rng);
    const std::size_t n = members.n();
    std::vector<ParamVector> velocities(n, ParamVector(members.members[0].layout));

    RunRecord rec;
    rec.flops = flops_report(spec, cfg.batch_size, FlopsMethod::kVanillaEnsemble, n);
    rec.per_member_matrices.resize(n);
    AccuracyMatrix by_strategy[3];

    for (std::size_t tau = 1; tau <= stream.T(); ++tau) {
        for (ParamVector& v : velocities) fill(v, 0.0);
        std::vector<SeededRng> dropout_rngs;
        for (std::size_t i = 0; i < n; ++i)
            dropout_rngs.emplace_back(cfg.seed, streams::dropout(tau, i));
        const std::vector<Example>& train = stream.tasks[tau - 1].train;
        for (std::size_t epoch = 0; epoch < cfg.epochs_per_task; ++epoch) {
            SeededRng shuffle_rng(cfg.seed, streams::shuffle(tau, epoch));
            const auto order = shuffled_order(train.size(), shuffle_rng);
            for (std::size_t begin = 0; begin < train.size(); begin += cfg.batch_size) {
                const std::size_t count = std::min(cfg.batch_size, train.size() - begin);
                Tensor features = gather_features(train, order, begin, count);
                std::vector<int> labels = gather_labels(train, order, begin, count);
                // identical batches; each member updates independently
                for (std::size_t i = 0; i < n; ++i) {
                    ForwardCache cache;
                    Tensor logits = mlp_forward(spec, members.members[i], features,
                                                RunMode::kTrain, &dropout_rngs[i], &cache);
                    LossGrad lg = cross_entropy(logits, labels);
                    ParamVector grads = mlp_backward(spec, cache, lg.grad_logits);
                    sgd_step(members.members[i], grads, cfg, tau, velocities[i]);
                    ensure_finite(members.members[i], "ensemble training");
                }
            }
        }
        std::vector<double> row_avg, row_hard, row_majority;
        std::vector<std::vector<double>> member_rows(n);
        for (std::size_t j = 1; j <= tau; ++j) {
            const std::vector<Example>& test = stream.tasks[j - 1].test;
            PredictionBatch preds = ensemble_probs(spec, members.members, test);
            row_avg.push_back(accuracy_of(combine_average(preds), test));
            row_hard.push_back(accuracy_of(combine_hard_vote(preds), test));
            row_majority.push_back(accuracy_of(combine_majority_vote(preds), test));
            for (std::size_t i = 0; i < n; ++i) {
                PredictionBatch solo;
                solo.member_probs = {preds.member_probs[i]};
                member_rows[i].push_back(accuracy_of(combine_average(solo), test));
            }
        }
        by_strategy[0].rows.push_back(row_avg);
        by_strategy[1].rows.push_back(row_hard);
        by_strategy[2].rows.push_back(row_majority);
        for (std::size_t i = 0; i < n; ++i)
            rec.per_member_matrices[i].rows.push_back(member_rows[i]);
        for (std::size_t i = 0; i < n; ++i)
            rec.checkpoints.push_back(
                {task_label(tau) + ".member" + std::to_string(i), members.members[i]});
    }
    rec.extra_matrices["averaging"] = by_strategy[0];
    rec.extra_matrices["hard_vote"] = by_strategy[1];
    rec.extra_matrices["majority_vote"] = by_strategy[2];
    switch (strategy) {
        case Combiner::kAveraging: rec.accuracy_matrix = by_strategy[0]; break;
        case Combiner::kHardVote: rec.accuracy_matrix = by_strategy[1]; break;
        case Combiner::kMajorityVote: rec.accuracy_matrix = by_strategy[2]; break;
    }
    rec.wall_time = seconds_since(start);
    return rec;
}

RunRecord train_subspace(const TaskStream& stream, const TrainConfig& cfg, const MlpSpec& spec) {
    cfg.validate();
    spec.validate();
    const auto start = Clock::now();
    SeededRng init_rng(cfg.seed, streams::member_init(0));
    EnsembleWeights members = init_ensemble(spec, cfg.n_models, cfg.sigma_init, init_rng);
    std::vector<ParamVector> velocities(members.n(), ParamVector(members.members[0].layout));

    RunRecord rec;
    rec.flops = flops_report(spec, cfg.batch_size, FlopsMethod::kSubspace, members.n());
    for (std::size_t tau = 1; tau <= stream.T(); ++tau) {
        for (ParamVector& v : velocities) fill(v, 0.0);
        SeededRng alpha_rng(cfg.seed, streams::alpha(tau));
        SeededRng dropout_rng(cfg.seed, streams::dropout(tau, 0));
        subspace_task_pass(spec, stream, cfg, tau, members, velocities, alpha_rng, dropout_rng,
                           nullptr);
        ParamVector mid = midpoint(members);
        rec.accuracy_matrix.rows.push_back(eval_row(spec, mid, stream, tau));
        for (std::size_t i = 0; i < members.n(); ++i)
            rec.checkpoints.push_back(
                {task_label(tau) + ".member" + std::to_string(i), members.members[i]});
        rec.checkpoints.push_back({task_label(tau) + ".mid", std::move(mid)});
    }
    rec.wall_time = seconds_since(start);
    return rec;
}

RunRecord train_subspace_er(const TaskStream& stream, const TrainConfig& cfg,
                            const MlpSpec& spec) {
    cfg.validate();
    spec.validate();
    const auto start = Clock::now();
    SeededRng init_rng(cfg.seed, streams::member_init(0));
    EnsembleWeights members = init_ensemble(spec, cfg.n_models, cfg.sigma_init, init_rng);
    std::vector<ParamVector> velocities(members.n(), ParamVector(members.members[0].layout));
    ReplayBuffer buf(cfg.m_b, cfg.buffer_policy);

    RunRecord rec;
    rec.flops = flops_report(spec, cfg.batch_size, FlopsMethod::kSubspace, members.n());
    for (std::size_t tau = 1; tau <= stream.T(); ++tau) {
        for (ParamVector& v : velocities) fill(v, 0.0);
        SeededRng alpha_rng(cfg.seed, streams::alpha(tau));
        SeededRng dropout_rng(cfg.seed, streams::dropout(tau, 0));
        SeededRng buf_rng(cfg.seed, streams::buffer(tau));
        std::function<std::vector<Example>()> extras;
        if (tau > 1) {
            const std::vector<std::size_t> stored = buf.stored_tasks();
            extras = [&buf, &buf_rng, &cfg, stored]() {
                return buf.sample(cfg.reg_samples, stored, buf_rng);
            };
        }
        subspace_task_pass(spec, stream, cfg, tau, members, velocities, alpha_rng, dropout_rng,
                           extras);
        for (const Example& ex : stream.tasks[tau - 1].train) buf.insert(ex, &buf_rng);
        ParamVector mid = midpoint(members);
        rec.accuracy_matrix.rows.push_back(eval_row(spec, mid, stream, tau));
        for (std::size_t i = 0; i < members.n(); ++i)
            rec.checkpoints.push_back(
                {task_label(tau) + ".member" + std::to_string(i), members.members[i]});
        rec.checkpoints.push_back({task_label(tau) + ".mid", std::move(mid)});
    }
    rec.wall_time = seconds_since(start);
    return rec;
}

RunRecord train_batch_ensemble(const TaskStream& stream, const TrainConfig& cfg,
                               const MlpSpec& spec) {
    cfg.validate();
    spec.validate();
    const auto start = Clock::now();
    SeededRng init_rng(cfg.seed, streams::member_init(0));
    BatchEnsembleWeights w = init_batch_ensemble(spec, cfg.n_models, cfg.sigma_init, init_rng);
    ParamVector shared_velocity(w.shared.layout);
    ParamVector fast_velocity(w.fast.layout);

    RunRecord rec;
    rec.flops = flops_report(spec, cfg.batch_size, FlopsMethod::kBatchEnsemble, w.n);
    rec.per_member_matrices.resize(w.n);
    for (std::size_t tau = 1; tau <= stream.T(); ++tau) {
        fill(shared_velocity, 0.0);
        fill(fast_velocity, 0.0);
        SeededRng assign_rng(cfg.seed, streams::assignment(tau));
        SeededRng dropout_rng(cfg.seed, streams::dropout(tau, 0));
        const std::vector<Example>& train = stream.tasks[tau - 1].train;
        for (std::size_t epoch = 0; epoch < cfg.epochs_per_task; ++epoch) {
            SeededRng shuffle_rng(cfg.seed, streams::shuffle(tau, epoch));
            const auto order = shuffled_order(train.size(), shuffle_rng);
            for (std::size_t begin = 0; begin < train.size(); begin += cfg.batch_size) {
                const std::size_t count = std::min(cfg.batch_size, train.size() - begin);
                Tensor features = gather_features(train, order, begin, count);
                std::vector<int> labels = gather_labels(train, order, begin, count);
                std::vector<std::size_t> assignment(count);
                for (std::size_t i = 0; i < count; ++i)
                    assignment[i] = static_cast<std::size_t>(assign_rng.uniform_int(w.n));
                BatchEnsembleCache cache;
                Tensor logits = batch_ensemble_forward(spec, w, features, assignment,
                                                       RunMode::kTrain, &dropout_rng, &cache);
                LossGrad lg = cross_entropy(logits, labels);
                BatchEnsembleGrads grads = batch_ensemble_backward(spec, cache, lg.grad_logits);
                sgd_step(w.shared, grads.shared, cfg, tau, shared_velocity);
                sgd_step(w.fast, grads.fast, cfg, tau, fast_velocity);
                ensure_finite(w.shared, "batch-ensemble training");
                ensure_finite(w.fast, "batch-ensemble training");
            }
        }
        std::vector<ParamVector> effective;
        effective.reserve(w.n);
        for (std::size_t i = 0; i < w.n; ++i)
            effective.push_back(batch_ensemble_member(spec, w, i));
        std::vector<double> row;
        std::vector<std::vector<double>> member_rows(w.n);
        for (std::size_t j = 1; j <= tau; ++j) {
            const std::vector<Example>& test = stream.tasks[j - 1].test;
            PredictionBatch preds = ensemble_probs(spec, effective, test);
            row.push_back(accuracy_of(combine_average(preds), test));
            for (std::size_t i = 0; i < w.n; ++i) {
                PredictionBatch solo;
                solo.member_probs = {preds.member_probs[i]};
                member_rows[i].push_back(accuracy_of(combine_average(solo), test));
            }
        }
        rec.accuracy_matrix.rows.push_back(row);
        for (std::size_t i = 0; i < w.n; ++i)
            rec.per_member_matrices[i].rows.push_back(member_rows[i]);
        rec.checkpoints.push_back({task_label(tau) + ".shared", w.shared});
        rec.checkpoints.push_back({task_label(tau) + ".fast", w.fast});
        for (std::size_t i = 0; i < w.n; ++i)
            rec.checkpoints.push_back(
                {task_label(tau) + ".member" + std::to_string(i), std::move(effective[i])});
    }
    rec.wall_time = seconds_since(start);
    return rec;
}

double connectivity_loss(const MlpSpec& spec, const EnsembleWeights& members,
                         const SimplexPoint& alpha_ext, const ParamVector& prev_anchor,
                         const ParamVector& cur_anchor,
                         const std::vector<std::vector<Example>>& prev_batches,
                         const std::vector<Example>& cur_batch) {
    if (alpha_ext.n() != members.n() + 1)
        throw InputError("connectivity_loss: alpha must live on the (n+1)-simplex");
    ParamVector point_prev = mix_with_anchor(members, alpha_ext, prev_anchor);
    ParamVector point_cur = mix_with_anchor(members, alpha_ext, cur_anchor);
    double loss = 0.0;
    for (const auto& batch : prev_batches) {
        Tensor features = stack_features(batch);
        std::vector<int> labels = stack_labels(batch);
        Tensor logits = mlp_forward(spec, point_prev, features, RunMode::kEval, nullptr);
        loss += cross_entropy(logits, labels).loss;
    }
    Tensor features = stack_features(cur_batch);
    std::vector<int> labels = stack_labels(cur_batch);
    Tensor logits = mlp_forward(spec, point_cur, features, RunMode::kEval, nullptr);
    loss += cross_entropy(logits, labels).loss;
    return loss;
}

RunRecord train_subspace_connectivity(const TaskStream& stream, const TrainConfig& cfg,
                                      const MlpSpec& spec) {
    cfg.validate();
    spec.validate();
    const auto start = Clock::now();
    SeededRng init_rng(cfg.seed, streams::member_init(0));
    EnsembleWeights members = init_ensemble(spec, cfg.n_models, cfg.sigma_init, init_rng);
    const std::size_t n = members.n();
    std::vector<ParamVector> velocities(n, ParamVector(members.members[0].layout));
    ReplayBuffer buf(cfg.m_b, cfg.buffer_policy);
    ParamVector prev_star_mid;

    RunRecord rec;
    rec.flops = flops_report(spec, cfg.batch_size, FlopsMethod::kSubspace, n);
    for (std::size_t tau = 1; tau <= stream.T(); ++tau) {
        // subspace fine-tuning on the incoming task, continuing from the
        // previous members
        for (ParamVector& v : velocities) fill(v, 0.0);
        SeededRng alpha_rng(cfg.seed, streams::alpha(tau));
        SeededRng dropout_rng(cfg.seed, streams::dropout(tau, 0));
        subspace_task_pass(spec, stream, cfg, tau, members, velocities, alpha_rng, dropout_rng,
                           nullptr);
        ParamVector hat_mid = midpoint(members);
        for (std::size_t i = 0; i < n; ++i)
            rec.checkpoints.push_back(
                {task_label(tau) + ".hat.member" + std::to_string(i), members.members[i]});
        rec.checkpoints.push_back({task_label(tau) + ".hat.mid", hat_mid});

        SeededRng buf_rng(cfg.seed, streams::buffer(tau));
        for (const Example& ex : stream.tasks[tau - 1].train) buf.insert(ex, &buf_rng);

        if (tau > 1) {
            std::vector<std::size_t> prev_tasks;
            for (std::size_t j = 1; j < tau; ++j) {
                if (!buf.has_task(j))
                    throw StateError(
                        "subspace-connectivity: empty replay buffer for task " +
                        std::to_string(j));
                prev_tasks.push_back(j);
            }
            // connect the previous subspace to the fresh one: members restart
            // from a noisy mix of the two midpoints
            ParamVector base = prev_star_mid;
            scale(base, cfg.alpha_init_mix);
            add_scaled(base, hat_mid, 1.0 - cfg.alpha_init_mix);
            for (std::size_t i = 0; i < n; ++i) {
                SeededRng perturb_rng(cfg.seed, streams::perturb(tau, i));
                members.members[i] =
                    multiplicative_perturb(base, cfg.sigma_connect_noise, perturb_rng);
            }
            SeededRng connect_rng(cfg.seed, streams::connect(tau));
            for (std::size_t step = 0; step < cfg.connect_steps; ++step) {
                SimplexPoint alpha_ext = sample_simplex(n + 1, connect_rng);
                SimplexPoint alpha_members{std::vector<double>(
                    alpha_ext.alpha.begin(), alpha_ext.alpha.begin() + n)};
                ParamVector point_prev = mix_with_anchor(members, alpha_ext, prev_star_mid);
                ParamVector point_cur = mix_with_anchor(members, alpha_ext, hat_mid);
                ParamVector grad_mixed(members.members[0].layout);
                for (std::size_t j : prev_tasks) {
                    std::vector<Example> batch =
                        buf.sample(cfg.reg_samples, {j}, connect_rng);
                    ParamVector g = mean_ce_grad(spec, point_prev, batch, nullptr);
                    add_scaled(grad_mixed, g, 1.0);
                }
                std::vector<Example> cur_batch =
                    buf.sample(cfg.reg_samples, {tau}, connect_rng);
                ParamVector g_cur = mean_ce_grad(spec, point_cur, cur_batch, nullptr);
                add_scaled(grad_mixed, g_cur, 1.0);
                // member i moves by -connect_lr * alpha_i * grad_mixed
                for (std::size_t i = 0; i < n; ++i) {
                    add_scaled(members.members[i], grad_mixed,
                               -cfg.connect_lr * alpha_members.alpha[i]);
                    ensure_finite(members.members[i], "connectivity training");
                }
            }
        }
        ParamVector star_mid = midpoint(members);
        rec.accuracy_matrix.rows.push_back(eval_row(spec, star_mid, stream, tau));
        for (std::size_t i = 0; i < n; ++i)
            rec.checkpoints.push_back(
                {task_label(tau) + ".member" + std::to_string(i), members.members[i]});
        rec.checkpoints.push_back({task_label(tau) + ".mid", star_mid});
        prev_star_mid = std::move(star_mid);
    }
    rec.wall_time = seconds_since(start);
    return rec;
}

RunRecord train_multitask(const TaskStream& stream, const TrainConfig& cfg, const MlpSpec& spec) {
    cfg.validate();
    spec.validate();
    const auto start = Clock::now();
    SeededRng init_rng(cfg.seed, streams::member_init(0));
    ParamVector params = init_ensemble(spec, 1, cfg.sigma_init, init_rng).members[0];
    ParamVector velocity(params.layout);

    std::vector<Example> pool;
    for (const TaskDataset& task : stream.tasks)
        pool.insert(pool.end(), task.train.begin(), task.train.end());

    SeededRng dropout_rng(cfg.seed, streams::dropout(0, 0));
    for (std::size_t epoch = 0; epoch < cfg.epochs_per_task; ++epoch) {
        SeededRng shuffle_rng(cfg.seed, streams::shuffle(0, epoch));
        const auto order = shuffled_order(pool.size(), shuffle_rng);
        for (std::size_t begin = 0; begin < pool.size(); begin += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, pool.size() - begin);
            Tensor features = gather_features(pool, order, begin, count);
            std::vector<int> labels = gather_labels(pool, order, begin, count);
            ForwardCache cache;
            Tensor logits =
                mlp_forward(spec, params, features, RunMode::kTrain, &dropout_rng, &cache);
            LossGrad lg = cross_entropy(logits, labels);
            ParamVector grads = mlp_backward(spec, cache, lg.grad_logits);
            sgd_step(params, grads, cfg, 1, velocity);
            ensure_finite(params, "multitask training");
        }
    }
    RunRecord rec;
    rec.flops = flops_report(spec, cfg.batch_size, FlopsMethod::kSingle, 1);
    rec.accuracy_matrix.rows.push_back(eval_row(spec, params, stream, stream.T()));
    rec.checkpoints.push_back({"final.model", std::move(params)});
    rec.wall_time = seconds_since(start);
    return rec;
}

RunRecord train(Method method, const TaskStream& stream, const TrainConfig& cfg,
                const MlpSpec& spec, Combiner strategy) {
    switch (method) {
        case Method::kSingle: return train_single(stream, cfg, spec);
        case Method::kVanillaEnsemble:
            return train_vanilla_ensemble(stream, cfg, spec, strategy);
        case Method::kBatchEnsemble: return train_batch_ensemble(stream, cfg, spec);
        case Method::kSubspace: return train_subspace(stream, cfg, spec);
        case Method::kSubspaceEr: return train_subspace_er(stream, cfg, spec);
        case Method::kSubspaceConnectivity:
            return train_subspace_connectivity(stream, cfg, spec);
        case Method::kMultitask: return train_multitask(stream, cfg, spec);
    }
    throw InternalError("train: unknown method");
}

}  // namespace ecl
