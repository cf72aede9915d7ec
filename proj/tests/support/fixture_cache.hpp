#pragma once

// Identity of the committed embedding fixture (tests/fixtures/embeddings.jsonl).

#include <cstddef>

namespace clinbench::testing {

inline constexpr const char* kFixtureModel = "stub-encoder-16";
inline constexpr std::size_t kFixtureDim = 16;

}  // namespace clinbench::testing
