#include "ecl/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>

#include "ecl/errors.hpp"

namespace ecl {

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                      std::istreambuf_iterator<char>());
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                        const std::string& path) {
    if (offset + 4 > buf.size())
        throw FormatError(path + ": truncated at byte offset " + std::to_string(offset));
    return (std::uint32_t(buf[offset]) << 24) | (std::uint32_t(buf[offset + 1]) << 16) |
           (std::uint32_t(buf[offset + 2]) << 8) | std::uint32_t(buf[offset + 3]);
}

// Per-class quotas for a total budget: floor(total/C) each, remainder to the
// lowest class indices. Examples keep base order.
std::vector<std::size_t> first_n_per_class(const LabeledData& data, std::size_t total,
                                           int num_classes) {
    if (num_classes <= 0) throw InputError("first_n_per_class: num_classes must be positive");
    const std::size_t c = static_cast<std::size_t>(num_classes);
    std::vector<std::size_t> quota(c, total / c);
    for (std::size_t i = 0; i < total % c; ++i) quota[i] += 1;
    std::vector<std::size_t> taken(c, 0);
    std::vector<std::size_t> indices;
    indices.reserve(total);
    for (std::size_t i = 0; i < data.count() && indices.size() < total; ++i) {
        const int label = data.labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= c)
            throw InputError("first_n_per_class: label out of range");
        if (taken[label] < quota[label]) {
            taken[label] += 1;
            indices.push_back(i);
        }
    }
    for (std::size_t k = 0; k < c; ++k)
        if (taken[k] < quota[k])
            throw InputError("first_n_per_class: class " + std::to_string(k) + " has only " +
                             std::to_string(taken[k]) + " of " + std::to_string(quota[k]) +
                             " requested examples");
    return indices;
}

Example make_example(const LabeledData& data, std::size_t index, std::size_t task_id) {
    const std::size_t d = data.features.cols();
    const double* row = data.features.row_ptr(index);
    return Example{Tensor({d}, std::vector<double>(row, row + d)), data.labels[index], task_id};
}

std::size_t image_side(std::size_t d) {
    const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(d))));
    if (side * side != d)
        throw InputError("image operations need square images; got dim " + std::to_string(d));
    return side;
}

std::map<int, int> identity_class_map(int num_classes) {
    std::map<int, int> m;
    for (int k = 0; k < num_classes; ++k) m[k] = k;
    return m;
}

constexpr std::uint64_t kSplitShuffleTag = 0xC1A55ULL;

}  // namespace

LabeledData load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = read_file(images_path);
    const auto lab = read_file(labels_path);

    const std::uint32_t img_magic = read_be32(img, 0, images_path);
    if (img_magic != 0x00000803u)
        throw FormatError(images_path + ": bad image magic at byte offset 0 (got 0x" +
                          [&] { char b[16]; std::snprintf(b, sizeof b, "%08x", img_magic); return std::string(b); }() +
                          ", want 0x00000803)");
    const std::uint32_t n = read_be32(img, 4, images_path);
    const std::uint32_t rows = read_be32(img, 8, images_path);
    const std::uint32_t cols = read_be32(img, 12, images_path);
    const std::size_t pixels = std::size_t(n) * rows * cols;
    if (img.size() != 16 + pixels)
        throw FormatError(images_path + ": expected " + std::to_string(16 + pixels) +
                          " bytes, got " + std::to_string(img.size()) +
                          " (divergence at byte offset " +
                          std::to_string(std::min(img.size(), 16 + pixels)) + ")");

    const std::uint32_t lab_magic = read_be32(lab, 0, labels_path);
    if (lab_magic != 0x00000801u)
        throw FormatError(labels_path + ": bad label magic at byte offset 0");
    const std::uint32_t n_lab = read_be32(lab, 4, labels_path);
    if (n_lab != n)
        throw FormatError(labels_path + ": label count " + std::to_string(n_lab) +
                          " does not match image count " + std::to_string(n) +
                          " (byte offset 4)");
    if (lab.size() != 8 + std::size_t(n))
        throw FormatError(labels_path + ": expected " + std::to_string(8 + std::size_t(n)) +
                          " bytes, got " + std::to_string(lab.size()));

    LabeledData out;
    out.features = Tensor::zeros({n, std::size_t(rows) * cols});
    out.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double* dst = out.features.row_ptr(i);
        const unsigned char* src = img.data() + 16 + i * std::size_t(rows) * cols;
        for (std::size_t j = 0; j < std::size_t(rows) * cols; ++j)
            dst[j] = static_cast<double>(src[j]) / 255.0;
        out.labels[i] = static_cast<int>(lab[8 + i]);
    }
    return out;
}

Tensor rotate_image(const Tensor& flat, std::size_t side, double angle_deg) {
    if (flat.size() != side * side)
        throw DimensionError("rotate_image: flat image does not match side*side");
    if (angle_deg == 0.0) return flat;
    const double theta = angle_deg * std::numbers::pi / 180.0;
    const double c = std::cos(theta), s = std::sin(theta);
    const double m = (static_cast<double>(side) - 1.0) / 2.0;
    const double* img = flat.data.data();
    const auto lside = static_cast<long>(side);
    auto px = [&](long y, long x) -> double {
        if (y < 0 || x < 0 || y >= lside || x >= lside) return 0.0;
        return img[y * lside + x];
    };
    Tensor out = Tensor::zeros({side * side});
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t col = 0; col < side; ++col) {
            // inverse mapping: source = R(theta) * dest in centered pixel coords
            const double u = static_cast<double>(col) - m;
            const double v = static_cast<double>(r) - m;
            const double sx = u * c - v * s + m;
            const double sy = u * s + v * c + m;
            const double x0f = std::floor(sx), y0f = std::floor(sy);
            const long x0 = static_cast<long>(x0f), y0 = static_cast<long>(y0f);
            const double fx = sx - x0f, fy = sy - y0f;
            out.data[r * side + col] = px(y0, x0) * (1.0 - fy) * (1.0 - fx) +
                                       px(y0, x0 + 1) * (1.0 - fy) * fx +
                                       px(y0 + 1, x0) * fy * (1.0 - fx) +
                                       px(y0 + 1, x0 + 1) * fy * fx;
        }
    }
    return out;
}

TaskStream make_rotated_stream(const BaseDataset& base, std::size_t T, double delta_deg,
                               std::size_t per_task_train, std::size_t per_task_test,
                               SeededRng& rng) {
    (void)rng;  // subsetting and rotation are fully deterministic
    if (T < 1) throw InputError("make_rotated_stream: T must be >= 1");
    const std::size_t side = image_side(base.train.features.cols());
    const auto train_idx = first_n_per_class(base.train, per_task_train, base.num_classes);
    const auto test_idx = first_n_per_class(base.test, per_task_test, base.num_classes);

    TaskStream stream;
    stream.kind = StreamKind::kRotated;
    stream.requires_task_id = false;
    for (std::size_t tau = 1; tau <= T; ++tau) {
        const double angle = static_cast<double>(tau - 1) * delta_deg;
        TaskDataset task;
        task.task_id = tau;
        task.class_map = identity_class_map(base.num_classes);
        auto build = [&](const LabeledData& data, const std::vector<std::size_t>& idx,
                         std::vector<Example>& out) {
            out.reserve(idx.size());
            for (std::size_t i : idx) {
                Example ex = make_example(data, i, tau);
                ex.features = rotate_image(ex.features, side, angle);
                out.push_back(std::move(ex));
            }
        };
        build(base.train, train_idx, task.train);
        build(base.test, test_idx, task.test);
        stream.tasks.push_back(std::move(task));
    }
    return stream;
}

TaskStream make_permuted_stream(const BaseDataset& base, std::size_t T,
                                std::size_t per_task_train, std::size_t per_task_test,
                                SeededRng& rng) {
    if (T < 1) throw InputError("make_permuted_stream: T must be >= 1");
    const std::size_t d = base.train.features.cols();
    const auto train_idx = first_n_per_class(base.train, per_task_train, base.num_classes);
    const auto test_idx = first_n_per_class(base.test, per_task_test, base.num_classes);

    TaskStream stream;
    stream.kind = StreamKind::kPermuted;
    stream.requires_task_id = false;
    for (std::size_t tau = 1; tau <= T; ++tau) {
        TaskDataset task;
        task.task_id = tau;
        task.class_map = identity_class_map(base.num_classes);
        if (tau > 1) {
            task.pixel_perm.resize(d);
            for (std::size_t j = 0; j < d; ++j) task.pixel_perm[j] = j;
            SeededRng perm_rng = rng.fork(tau);
            perm_rng.shuffle(task.pixel_perm);
        }
        auto build = [&](const LabeledData& data, const std::vector<std::size_t>& idx,
                         std::vector<Example>& out) {
            out.reserve(idx.size());
            for (std::size_t i : idx) {
                Example ex = make_example(data, i, tau);
                if (!task.pixel_perm.empty()) {
                    Tensor permuted = Tensor::zeros({d});
                    // output pixel j takes input pixel perm[j]
                    for (std::size_t j = 0; j < d; ++j)
                        permuted.data[j] = ex.features.data[task.pixel_perm[j]];
                    ex.features = std::move(permuted);
                }
                out.push_back(std::move(ex));
            }
        };
        build(base.train, train_idx, task.train);
        build(base.test, test_idx, task.test);
        stream.tasks.push_back(std::move(task));
    }
    return stream;
}

TaskStream make_split_stream(const BaseDataset& base, std::size_t T,
                             std::size_t classes_per_task, std::size_t per_class_train,
                             SeededRng& rng) {
    if (T < 1) throw InputError("make_split_stream: T must be >= 1");
    if (classes_per_task < 1) throw InputError("make_split_stream: classes_per_task must be >= 1");
    const std::size_t c = static_cast<std::size_t>(base.num_classes);
    if (T * classes_per_task > c)
        throw InputError("make_split_stream: need " + std::to_string(T * classes_per_task) +
                         " classes, base has " + std::to_string(c));

    std::vector<int> order(c);
    for (std::size_t k = 0; k < c; ++k) order[k] = static_cast<int>(k);
    SeededRng shuffle_rng = rng.fork(kSplitShuffleTag);
    shuffle_rng.shuffle(order);

    TaskStream stream;
    stream.kind = StreamKind::kSplit;
    stream.requires_task_id = true;
    for (std::size_t tau = 1; tau <= T; ++tau) {
        std::vector<int> chosen(order.begin() + (tau - 1) * classes_per_task,
                                order.begin() + tau * classes_per_task);
        std::sort(chosen.begin(), chosen.end());
        TaskDataset task;
        task.task_id = tau;
        for (std::size_t k = 0; k < chosen.size(); ++k) task.class_map[chosen[k]] = static_cast<int>(k);

        std::map<int, std::size_t> taken;
        for (std::size_t i = 0; i < base.train.count(); ++i) {
            const int label = base.train.labels[i];
            auto it = task.class_map.find(label);
            if (it == task.class_map.end()) continue;
            if (taken[label] >= per_class_train) continue;
            taken[label] += 1;
            Example ex = make_example(base.train, i, tau);
            ex.label = it->second;
            task.train.push_back(std::move(ex));
        }
        for (const auto& [orig, cnt] : taken)
            if (cnt < per_class_train)
                throw InputError("make_split_stream: class " + std::to_string(orig) +
                                 " has fewer than " + std::to_string(per_class_train) +
                                 " train examples");
        for (std::size_t i = 0; i < base.test.count(); ++i) {
            const int label = base.test.labels[i];
            auto it = task.class_map.find(label);
            if (it == task.class_map.end()) continue;
            Example ex = make_example(base.test, i, tau);
            ex.label = it->second;
            task.test.push_back(std::move(ex));
        }
        stream.tasks.push_back(std::move(task));
    }
    return stream;
}

TaskStream make_synthetic_stream(const SyntheticSpec& spec, SeededRng& rng) {
    if (spec.T < 1) throw InputError("make_synthetic_stream: T must be >= 1");
    if (spec.classes < 2) throw InputError("make_synthetic_stream: classes must be >= 2");
    if (spec.dims < 2) throw InputError("make_synthetic_stream: dims must be >= 2");
    if (spec.cluster_spread < 0.0)
        throw InputError("make_synthetic_stream: cluster_spread must be >= 0");

    TaskStream stream;
    stream.kind = StreamKind::kSynthetic;
    stream.requires_task_id = false;
    for (std::size_t tau = 1; tau <= spec.T; ++tau) {
        const double theta =
            static_cast<double>(tau - 1) * spec.drift_deg * std::numbers::pi / 180.0;
        const double ct = std::cos(theta), st = std::sin(theta);
        TaskDataset task;
        task.task_id = tau;
        task.class_map = identity_class_map(static_cast<int>(spec.classes));
        for (std::size_t k = 0; k < spec.classes; ++k) {
            const double phi =
                2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(spec.classes);
            // base center on a radius-0.25 circle, rotated by the task drift
            const double bx = 0.25 * std::cos(phi), by = 0.25 * std::sin(phi);
            const double cx = 0.5 + bx * ct - by * st;
            const double cy = 0.5 + bx * st + by * ct;
            auto draw = [&](std::size_t count, std::uint64_t split_tag,
                            std::vector<Example>& out) {
                SeededRng draw_rng = rng.fork((tau << 20) ^ (k << 4) ^ split_tag);
                for (std::size_t i = 0; i < count; ++i) {
                    std::vector<double> x(spec.dims, 0.5);
                    x[0] = cx;
                    x[1] = cy;
                    for (std::size_t dch = 0; dch < spec.dims; ++dch) {
                        x[dch] += spec.cluster_spread * draw_rng.normal();
                        x[dch] = std::clamp(x[dch], 0.0, 1.0);
                    }
                    out.push_back(Example{Tensor({spec.dims}, std::move(x)),
                                          static_cast<int>(k), tau});
                }
            };
            draw(spec.train_per_class, 1, task.train);
            draw(spec.test_per_class, 2, task.test);
        }
        stream.tasks.push_back(std::move(task));
    }
    return stream;
}

ReplayBuffer::ReplayBuffer(std::size_t m_b, Policy policy) : m_b_(m_b), policy_(policy) {
    if (m_b < 1) throw InputError("ReplayBuffer: m_B must be >= 1");
}

std::size_t ReplayBuffer::size() const {
    std::size_t total = 0;
    for (const auto& [key, items] : slots_) total += items.size();
    return total;
}

bool ReplayBuffer::has_task(std::size_t task_id) const {
    for (const auto& [key, items] : slots_)
        if (key.first == task_id && !items.empty()) return true;
    return false;
}

std::vector<std::size_t> ReplayBuffer::stored_tasks() const {
    std::vector<std::size_t> tasks;
    for (const auto& [key, items] : slots_)
        if (tasks.empty() || tasks.back() != key.first) tasks.push_back(key.first);
    return tasks;
}

std::size_t ReplayBuffer::count_for(std::size_t task_id, int label) const {
    auto it = slots_.find({task_id, label});
    return it == slots_.end() ? 0 : it->second.size();
}

bool ReplayBuffer::insert(const Example& ex, SeededRng* rng) {
    auto key = std::make_pair(ex.task_id, ex.label);
    auto& items = slots_[key];
    if (policy_ == Policy::kFirstSeen) {
        if (items.size() >= m_b_) return false;
        items.push_back(ex);
        return true;
    }
    auto& seen = seen_[key];
    seen += 1;
    if (items.size() < m_b_) {
        items.push_back(ex);
        return true;
    }
    if (rng == nullptr) throw InputError("ReplayBuffer: reservoir policy requires an rng");
    const std::uint64_t pick = rng->uniform_int(seen);
    if (pick < m_b_) {
        items[static_cast<std::size_t>(pick)] = ex;
        return true;
    }
    return false;
}

std::vector<Example> ReplayBuffer::sample(std::size_t per_task,
                                          const std::vector<std::size_t>& tasks,
                                          SeededRng& rng) const {
    std::vector<Example> out;
    for (std::size_t task : tasks) {
        if (!has_task(task))
            throw InputError("ReplayBuffer: no stored examples for task " + std::to_string(task));
        std::vector<Example> items = task_items(task);
        if (items.size() <= per_task) {
            out.insert(out.end(), items.begin(), items.end());
            continue;
        }
        // partial Fisher-Yates: uniform without replacement
        for (std::size_t i = 0; i < per_task; ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(rng.uniform_int(items.size() - i));
            std::swap(items[i], items[j]);
            out.push_back(items[i]);
        }
    }
    return out;
}

std::vector<Example> ReplayBuffer::task_items(std::size_t task_id) const {
    std::vector<Example> items;
    for (const auto& [key, slot] : slots_)
        if (key.first == task_id) items.insert(items.end(), slot.begin(), slot.end());
    return items;
}

Tensor stack_features(const std::vector<Example>& batch) {
    if (batch.empty()) throw InputError("stack_features: empty batch");
    const std::size_t d = batch[0].features.size();
    Tensor out = Tensor::zeros({batch.size(), d});
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch[i].features.size() != d)
            throw DimensionError("stack_features: inconsistent feature dims");
        std::copy(batch[i].features.data.begin(), batch[i].features.data.end(), out.row_ptr(i));
    }
    return out;
}

Tensor stack_features(const Example* const* batch, std::size_t count) {
    if (count == 0) throw InputError("stack_features: empty batch");
    const std::size_t d = batch[0]->features.size();
    Tensor out = Tensor::zeros({count, d});
    for (std::size_t i = 0; i < count; ++i) {
        if (batch[i]->features.size() != d)
            throw DimensionError("stack_features: inconsistent feature dims");
        std::copy(batch[i]->features.data.begin(), batch[i]->features.data.end(), out.row_ptr(i));
    }
    return out;
}

std::vector<int> stack_labels(const std::vector<Example>& batch) {
    std::vector<int> labels(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = batch[i].label;
    return labels;
}

}  // namespace ecl
