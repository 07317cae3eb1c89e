#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "ecl/errors.hpp"

namespace ecl {

/// Dense row-major tensor of 64-bit reals. Rank is dynamic but nearly all
/// users are 2-D (batch x features).
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != element_count(shape))
            throw DimensionError("Tensor: data length does not match shape");
    }

    static Tensor zeros(std::vector<std::size_t> s) {
        std::size_t n = element_count(s);
        return Tensor(std::move(s), std::vector<double>(n, 0.0));
    }

    static std::size_t element_count(const std::vector<std::size_t>& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }

    std::size_t size() const { return data.size(); }

    std::size_t rows() const {
        if (shape.size() != 2) throw DimensionError("Tensor::rows: tensor is not 2-D");
        return shape[0];
    }
    std::size_t cols() const {
        if (shape.size() != 2) throw DimensionError("Tensor::cols: tensor is not 2-D");
        return shape[1];
    }

    double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

    const double* row_ptr(std::size_t r) const { return data.data() + r * shape[1]; }
    double* row_ptr(std::size_t r) { return data.data() + r * shape[1]; }
};

}  // namespace ecl
