#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ecl/errors.hpp"

namespace ecl {

struct ParamEntry {
    std::string name;
    std::size_t offset = 0;
    std::vector<std::size_t> shape;

    std::size_t size() const {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }
};

/// Ordered (name, offset, shape) descriptor for one flattened parameter
/// vector. Layouts are immutable and shared; two ParamVectors interoperate iff
/// their layouts are equal.
class ParamLayout {
public:
    void add(std::string name, std::vector<std::size_t> shape) {
        ParamEntry e{std::move(name), total_, std::move(shape)};
        total_ += e.size();
        entries_.push_back(std::move(e));
    }

    const std::vector<ParamEntry>& entries() const { return entries_; }
    std::size_t total() const { return total_; }

    const ParamEntry& entry(std::size_t i) const { return entries_[i]; }

    const ParamEntry* find(const std::string& name) const {
        for (const auto& e : entries_)
            if (e.name == name) return &e;
        return nullptr;
    }

    bool operator==(const ParamLayout& other) const {
        if (total_ != other.total_ || entries_.size() != other.entries_.size()) return false;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            const auto& a = entries_[i];
            const auto& b = other.entries_[i];
            if (a.name != b.name || a.offset != b.offset || a.shape != b.shape) return false;
        }
        return true;
    }

private:
    std::vector<ParamEntry> entries_;
    std::size_t total_ = 0;
};

using LayoutPtr = std::shared_ptr<const ParamLayout>;

/// Flat vector of all trainable weights for one model, the unit of all
/// weight-space algebra. Value semantics; the layout is shared.
struct ParamVector {
    LayoutPtr layout;
    std::vector<double> data;

    ParamVector() = default;
    explicit ParamVector(LayoutPtr l) : layout(std::move(l)), data(layout->total(), 0.0) {}
    ParamVector(LayoutPtr l, std::vector<double> d) : layout(std::move(l)), data(std::move(d)) {
        if (data.size() != layout->total())
            throw DimensionError("ParamVector: data length does not match layout");
    }

    std::size_t size() const { return data.size(); }

    std::span<double> span_of(const ParamEntry& e) { return {data.data() + e.offset, e.size()}; }
    std::span<const double> span_of(const ParamEntry& e) const {
        return {data.data() + e.offset, e.size()};
    }

    std::span<double> span_of(const std::string& name) {
        const ParamEntry* e = layout->find(name);
        if (!e) throw InputError("ParamVector: no entry named " + name);
        return span_of(*e);
    }
    std::span<const double> span_of(const std::string& name) const {
        const ParamEntry* e = layout->find(name);
        if (!e) throw InputError("ParamVector: no entry named " + name);
        return span_of(*e);
    }
};

inline bool same_layout(const ParamVector& a, const ParamVector& b) {
    if (a.layout == b.layout) return true;
    if (!a.layout || !b.layout) return false;
    return *a.layout == *b.layout;
}

inline void require_same_layout(const ParamVector& a, const ParamVector& b, const char* op) {
    if (!same_layout(a, b)) throw InputError(std::string(op) + ": parameter layouts differ");
}

/// dst += c * src
inline void add_scaled(ParamVector& dst, const ParamVector& src, double c) {
    require_same_layout(dst, src, "add_scaled");
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += c * src.data[i];
}

inline void scale(ParamVector& v, double c) {
    for (double& x : v.data) x *= c;
}

inline void fill(ParamVector& v, double c) {
    for (double& x : v.data) x = c;
}

inline bool all_finite(const ParamVector& v) {
    for (double x : v.data)
        if (!std::isfinite(x)) return false;
    return true;
}

enum class Activation { kRelu };

/// Architecture of the fully connected model family: input -> hidden... -> output,
/// ReLU hidden activations, optional inverted dropout on hidden activations.
struct MlpSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims;
    std::size_t output_dim = 0;
    Activation activation = Activation::kRelu;
    double dropout_rate = 0.0;

    void validate() const {
        if (input_dim < 1) throw InputError("MlpSpec: input_dim must be >= 1");
        if (output_dim < 1) throw InputError("MlpSpec: output_dim must be >= 1");
        for (std::size_t h : hidden_dims)
            if (h < 1) throw InputError("MlpSpec: hidden dims must be >= 1");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
            throw InputError("MlpSpec: dropout_rate must be in [0, 1)");
    }

    /// [input, hidden..., output]
    std::vector<std::size_t> layer_dims() const {
        std::vector<std::size_t> dims;
        dims.reserve(hidden_dims.size() + 2);
        dims.push_back(input_dim);
        dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
        dims.push_back(output_dim);
        return dims;
    }

    std::size_t num_layers() const { return hidden_dims.size() + 1; }

    bool operator==(const MlpSpec&) const = default;
};

}  // namespace ecl
