#include "data/fewshot.hpp"

#include <algorithm>

#include "common/error.hpp"
#include "numerics/rng.hpp"

namespace clinbench::data {

void FewShotSpec::validate() const {
  require(!ks.empty(), ErrorKind::Validation, "few-shot spec has no k values");
  require(!seeds.empty(), ErrorKind::Validation, "few-shot spec has no seeds");
  for (const auto& k : ks) {
    if (!k) continue;
    require(*k >= 1, ErrorKind::Validation, "k must be positive");
    require(!stratify || *k >= 2, ErrorKind::Validation, "stratified sampling needs k >= 2, got " + std::to_string(*k));
  }
}

std::string k_label(const std::optional<std::size_t>& k) { return k ? std::to_string(*k) : "all"; }

namespace {

/// Partial Fisher-Yates: the first `take` entries become a uniform sample.
void partial_shuffle(std::vector<std::size_t>& items, std::size_t take, numerics::CounterRng& rng) {
  for (std::size_t i = 0; i < take && i + 1 < items.size(); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(items.size() - i));
    std::swap(items[i], items[j]);
  }
}

}  // namespace

std::vector<std::size_t> sample_fewshot(const Cohort& cohort, std::size_t k, std::uint64_t seed, bool stratify) {
  require(k >= 1 && k <= cohort.size(), ErrorKind::Sampling,
          "k = " + std::to_string(k) + " outside [1, " + std::to_string(cohort.size()) + "]");
  numerics::CounterRng rng(numerics::combine_keys(seed, 0x5A3D'F00DULL));
  std::vector<std::size_t> chosen;
  if (k == cohort.size()) {
    chosen.resize(k);
    for (std::size_t i = 0; i < k; ++i) chosen[i] = i;
    return chosen;
  }
  if (!stratify) {
    std::vector<std::size_t> all(cohort.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    partial_shuffle(all, k, rng);
    chosen.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
  } else {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < cohort.size(); ++i) (cohort[i].bor == 1 ? pos : neg).push_back(i);
    require(!pos.empty() && !neg.empty(), ErrorKind::Sampling, "stratified sampling needs both response classes");
    const bool responders_get_more = (rng.next_u64() & 1u) != 0;
    const std::size_t small = k / 2, large = k - k / 2;
    const std::size_t n_pos = responders_get_more ? large : small;
    const std::size_t n_neg = k - n_pos;
    require(pos.size() >= n_pos && neg.size() >= n_neg, ErrorKind::Sampling,
            "not enough records per class for stratified k = " + std::to_string(k) + " (" + std::to_string(pos.size()) +
                " responders, " + std::to_string(neg.size()) + " non-responders)");
    numerics::CounterRng pos_rng = rng.fork(1), neg_rng = rng.fork(2);
    partial_shuffle(pos, n_pos, pos_rng);
    partial_shuffle(neg, n_neg, neg_rng);
    chosen.assign(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(n_pos));
    chosen.insert(chosen.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(n_neg));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace clinbench::data
