#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "ecl/rng.hpp"
#include "ecl/tensor.hpp"

namespace ecl {

/// One supervised sample. features is a flat tensor with values in [0,1];
/// task_id is 1-based.
struct Example {
    Tensor features;
    int label = 0;
    std::size_t task_id = 0;
};

/// One task's train/test splits. class_map records original -> local class
/// indices for split streams (identity elsewhere); pixel_perm is the stored
/// pixel permutation for permuted streams (empty = identity).
struct TaskDataset {
    std::vector<Example> train;
    std::vector<Example> test;
    std::size_t task_id = 0;
    std::map<int, int> class_map;
    std::vector<std::size_t> pixel_perm;
};

enum class StreamKind { kRotated, kPermuted, kSplit, kSynthetic };

/// Ordered tasks T_1..T_T. requires_task_id marks streams whose label spaces
/// differ per task (split), so evaluation must know which head to use.
struct TaskStream {
    std::vector<TaskDataset> tasks;
    StreamKind kind = StreamKind::kSynthetic;
    bool requires_task_id = false;

    std::size_t T() const { return tasks.size(); }
};

/// Features matrix (N, d) with parallel labels.
struct LabeledData {
    Tensor features;
    std::vector<int> labels;

    std::size_t count() const { return labels.size(); }
};

/// Train/test image dataset used as the base of rotated/permuted/split streams.
struct BaseDataset {
    LabeledData train;
    LabeledData test;
    int num_classes = 0;
};

/// Reads one IDX image file and its label file (big-endian headers, magics
/// 0x00000803 / 0x00000801). Pixels are scaled to [0,1].
LabeledData load_idx(const std::string& images_path, const std::string& labels_path);

/// Task tau rotates every image by (tau-1)*delta_deg about the image center
/// (inverse-mapping bilinear interpolation, zero padding). Train/test subsets
/// are a deterministic first-N-per-class slice of the base, shared across
/// tasks.
TaskStream make_rotated_stream(const BaseDataset& base, std::size_t T, double delta_deg,
                               std::size_t per_task_train, std::size_t per_task_test,
                               SeededRng& rng);

/// Task 1 is unpermuted; each later task applies its own seed-derived pixel
/// permutation.
TaskStream make_permuted_stream(const BaseDataset& base, std::size_t T,
                                std::size_t per_task_train, std::size_t per_task_test,
                                SeededRng& rng);

/// Draws T disjoint class subsets without replacement; labels are remapped to
/// 0..classes_per_task-1 (ascending original class order). Test keeps all
/// base test examples of the selected classes.
TaskStream make_split_stream(const BaseDataset& base, std::size_t T,
                             std::size_t classes_per_task, std::size_t per_class_train,
                             SeededRng& rng);

/// Gaussian class clusters inside [0,1]^dims; task tau rotates the cluster
/// centers by (tau-1)*drift_deg in the first two coordinates about (0.5, 0.5).
struct SyntheticSpec {
    std::size_t T = 1;
    std::size_t classes = 2;
    std::size_t dims = 2;
    double cluster_spread = 0.05;
    double drift_deg = 0.0;
    std::size_t train_per_class = 50;
    std::size_t test_per_class = 20;
};

TaskStream make_synthetic_stream(const SyntheticSpec& spec, SeededRng& rng);

/// Rotates one flat image (side x side, row-major, [0,1] values) by angle_deg.
Tensor rotate_image(const Tensor& flat, std::size_t side, double angle_deg);

/// Small episodic memory holding at most m_B examples per (task, class) slot.
class ReplayBuffer {
public:
    enum class Policy { kFirstSeen, kReservoir };

    explicit ReplayBuffer(std::size_t m_b, Policy policy = Policy::kFirstSeen);

    std::size_t m_b() const { return m_b_; }
    std::size_t size() const;
    bool has_task(std::size_t task_id) const;
    std::vector<std::size_t> stored_tasks() const;
    std::size_t count_for(std::size_t task_id, int label) const;

    /// Under kFirstSeen, keeps the first m_B per slot; under kReservoir, each
    /// seen example is retained with equal probability (rng required).
    bool insert(const Example& ex, SeededRng* rng = nullptr);

    /// Uniform sample without replacement of per_task items from each
    /// requested task (all items if fewer are stored).
    std::vector<Example> sample(std::size_t per_task, const std::vector<std::size_t>& tasks,
                                SeededRng& rng) const;

    /// Every stored example of one task, in slot order.
    std::vector<Example> task_items(std::size_t task_id) const;

private:
    std::size_t m_b_;
    Policy policy_;
    std::map<std::pair<std::size_t, int>, std::vector<Example>> slots_;
    std::map<std::pair<std::size_t, int>, std::size_t> seen_;
};

inline bool buffer_insert(ReplayBuffer& buf, const Example& ex, SeededRng* rng = nullptr) {
    return buf.insert(ex, rng);
}

inline std::vector<Example> buffer_sample(const ReplayBuffer& buf, std::size_t per_task,
                                          const std::vector<std::size_t>& tasks, SeededRng& rng) {
    return buf.sample(per_task, tasks, rng);
}

/// Stacks examples into a (b, d) batch matrix.
Tensor stack_features(const std::vector<Example>& batch);
Tensor stack_features(const Example* const* batch, std::size_t count);
std::vector<int> stack_labels(const std::vector<Example>& batch);

}  // namespace ecl
