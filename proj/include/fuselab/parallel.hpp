#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <thread>
#include <vector>

namespace fuselab {

struct Range {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
};

/// Fixed contiguous partition of [0, n) into `parts` ranges (boundaries
/// floor(n*k/parts)). Reductions combine per-range partials in range order,
/// so results depend on the worker count but never on scheduling.
inline std::vector<Range> partition(std::size_t n, std::size_t parts) {
  if (parts == 0) parts = 1;
  std::vector<Range> out(parts);
  for (std::size_t k = 0; k < parts; ++k) {
    out[k].begin = static_cast<std::size_t>((static_cast<unsigned __int128>(n) * k) / parts);
    out[k].end = static_cast<std::size_t>((static_cast<unsigned __int128>(n) * (k + 1)) / parts);
  }
  return out;
}

/// Runs body(range_index, range) once per range of partition(n, threads).
template <class Body>
void parallel_ranges(std::size_t n, std::size_t threads, Body&& body) {
  const auto ranges = partition(n, threads);
  if (ranges.size() == 1) {
    body(std::size_t{0}, ranges[0]);
    return;
  }
  std::vector<std::jthread> workers;
  workers.reserve(ranges.size() - 1);
  for (std::size_t k = 1; k < ranges.size(); ++k) {
    workers.emplace_back([&body, &ranges, k] { body(k, ranges[k]); });
  }
  body(std::size_t{0}, ranges[0]);
}

/// Sum of per-range partials, combined left to right.
template <class Partial>
double reduce_ranges(std::size_t n, std::size_t threads, Partial&& partial) {
  const std::size_t parts = threads == 0 ? 1 : threads;
  std::vector<double> partials(parts, 0.0);
  parallel_ranges(n, parts, [&](std::size_t k, Range r) { partials[k] = partial(r); });
  double total = 0.0;
  for (double p : partials) total += p;
  return total;
}

}  // namespace fuselab
