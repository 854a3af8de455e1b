#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string_view>

namespace afc {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_label(std::string_view label);

// Streams are keyed by (master seed, label) so adding a new stream never
// perturbs an existing one.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// Runs body(i) for i in [0, n) on up to `workers` threads. Each index is
// executed exactly once; callers write results into per-index slots so the
// outcome is independent of the worker count.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& body);

}  // namespace afc
