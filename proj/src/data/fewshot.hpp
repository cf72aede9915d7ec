#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "data/cohort.hpp"

namespace clinbench::data {

/// k-shot plan. A k of nullopt means "all training records".
struct FewShotSpec {
  std::vector<std::optional<std::size_t>> ks;
  std::vector<std::uint64_t> seeds;
  bool stratify = true;
  std::vector<std::string> metrics{"auc", "c_os", "c_pfs"};
  /// Draw only from this subgroup's records instead of the full train split.
  std::optional<std::string> subgroup_pool;

  void validate() const;
};

std::string k_label(const std::optional<std::size_t>& k);

/// Indices (ascending) of a k-record subset. Stratified mode gives floor(k/2)
/// and ceil(k/2) records to the two response classes, with the seed deciding
/// which class receives the larger share. Sampling is without replacement and
/// depends only on (cohort order, k, seed).
std::vector<std::size_t> sample_fewshot(const Cohort& cohort, std::size_t k, std::uint64_t seed, bool stratify);

}  // namespace clinbench::data
