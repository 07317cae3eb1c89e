#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecl/trainers.hpp"

namespace ecl {

/// Container of labeled weight vectors, e.g. one training run's per-task
/// members and midpoints. Saved as "ECLW" version 1: little-endian integers
/// and 64-bit reals; round-trips bitwise.
struct CheckpointFile {
    std::uint32_t n = 1;  // ensemble size of the producing run
    std::uint32_t T = 0;  // task count of the producing run
    std::vector<LabeledCheckpoint> entries;

    const ParamVector& find(const std::string& label) const;
};

void save_checkpoint(const std::string& path, const CheckpointFile& file);
CheckpointFile load_checkpoint(const std::string& path);

}  // namespace ecl
