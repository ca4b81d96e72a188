#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace regtune {

/// REGTUNE_THREADS when set to a positive integer, else the hardware concurrency (at least 1).
int thread_count();

/// Runs f(0..n-1) on up to thread_count() threads; the first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f);

/// Deterministic seed derivation (splitmix64 over the inputs).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

} // namespace regtune
