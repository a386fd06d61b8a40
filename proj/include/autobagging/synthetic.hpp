#pragma once

#include "autobagging/dataset.hpp"

#include <string>
#include <vector>

namespace autobagging {

struct SyntheticSpec {
    std::string id;
    std::string kind;  // blobs, xor, rings, mixed, imbalanced, linear, categorical, sparse_missing, spirals
    std::size_t n = 500;
    std::uint64_t seed = 0;
};

/// Deterministic synthetic classification table of the given kind.
Dataset make_synthetic(const SyntheticSpec& spec);

/// The synthetic half of the desk suite (300-2000 rows each).
std::vector<SyntheticSpec> desk_synthetic_specs(std::uint64_t seed);

/// Writes the synthetic CSVs into `dir` plus manifest.json listing them and
/// every CSV found in `public_dir` (target column "class"). Returns the
/// manifest path.
std::string write_desk_suite(const std::string& dir, const std::string& public_dir, std::uint64_t seed);

} // namespace autobagging
