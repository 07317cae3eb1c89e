#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ecl/analysis.hpp"
#include "ecl/eval.hpp"
#include "ecl/metrics.hpp"
#include "ecl/mlp.hpp"
#include "ecl/tasks.hpp"
#include "ecl/weightspace.hpp"

namespace ecl {

enum class Method {
    kSingle,
    kVanillaEnsemble,
    kBatchEnsemble,
    kSubspace,
    kSubspaceEr,
    kSubspaceConnectivity,
    kMultitask,
};

struct TrainConfig {
    double lr0 = 0.1;
    double lr_decay_per_task = 0.5;  // lr(tau) = lr0 * decay^(tau-1)
    double momentum = 0.0;
    std::size_t batch_size = 10;
    std::size_t epochs_per_task = 1;
    std::size_t n_models = 1;
    double sigma_init = 0.0;          // multiplicative init spread across members
    double sigma_connect_noise = 0.0; // member noise at connectivity-phase init
    double alpha_init_mix = 0.85;     // weight on the previous midpoint at that init
    std::size_t reg_samples = 5;      // buffer items drawn per task per step
    std::size_t m_b = 1;              // buffer capacity per (task, class)
    std::uint64_t seed = 1;
    double connect_lr = 0.05;         // connectivity-phase learning rate (plain SGD)
    std::size_t connect_steps = 100;  // connectivity-phase optimization steps
    ReplayBuffer::Policy buffer_policy = ReplayBuffer::Policy::kFirstSeen;

    void validate() const;
};

struct LabeledCheckpoint {
    std::string label;
    ParamVector params;
};

struct RunRecord {
    AccuracyMatrix accuracy_matrix;
    std::vector<AccuracyMatrix> per_member_matrices;
    std::map<std::string, AccuracyMatrix> extra_matrices;  // e.g. per-combiner
    std::vector<LabeledCheckpoint> checkpoints;
    double wall_time = 0.0;  // informational; never serialized
    FlopsReport flops;

    const ParamVector& checkpoint(const std::string& label) const;
};

double effective_lr(const TrainConfig& cfg, std::size_t task_index);

/// Classical momentum: v <- mu v + g; theta <- theta - lr(tau) v.
void sgd_step(ParamVector& params, const ParamVector& grads, const TrainConfig& cfg,
              std::size_t task_index, ParamVector& velocity);
void sgd_step(EnsembleWeights& w, const std::vector<ParamVector>& grads, const TrainConfig& cfg,
              std::size_t task_index, std::vector<ParamVector>& velocity);

RunRecord train_single(const TaskStream& stream, const TrainConfig& cfg, const MlpSpec& spec);
RunRecord train_vanilla_ensemble(const TaskStream& stream, const TrainConfig& cfg,
                                 const MlpSpec& spec, Combiner strategy);
RunRecord train_subspace(const TaskStream& stream, const TrainConfig& cfg, const MlpSpec& spec);
RunRecord train_batch_ensemble(const TaskStream& stream, const TrainConfig& cfg,
                               const MlpSpec& spec);
RunRecord train_subspace_er(const TaskStream& stream, const TrainConfig& cfg,
                            const MlpSpec& spec);
RunRecord train_subspace_connectivity(const TaskStream& stream, const TrainConfig& cfg,
                                      const MlpSpec& spec);
RunRecord train_multitask(const TaskStream& stream, const TrainConfig& cfg, const MlpSpec& spec);

RunRecord train(Method method, const TaskStream& stream, const TrainConfig& cfg,
                const MlpSpec& spec, Combiner strategy = Combiner::kAveraging);

/// Connectivity-phase regularization loss (exposed for verification): the sum
/// over previous tasks of the loss at mix(members, alpha_ext, prev_anchor)
/// plus the current-task loss at mix(members, alpha_ext, cur_anchor), where
/// alpha_ext is on the (n+1)-simplex and its last coefficient weights the
/// anchor.
double connectivity_loss(const MlpSpec& spec, const EnsembleWeights& members,
                         const SimplexPoint& alpha_ext, const ParamVector& prev_anchor,
                         const ParamVector& cur_anchor,
                         const std::vector<std::vector<Example>>& prev_batches,
                         const std::vector<Example>& cur_batch);

}  // namespace ecl
