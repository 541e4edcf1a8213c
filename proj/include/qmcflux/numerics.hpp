#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <span>
#include <thread>
#include <vector>

namespace qmcflux {

/// Pairwise (cascade) summation. The reduction tree depends only on the
/// length of the input, so results are reproducible across thread counts.
inline double pairwise_sum(std::span<const double> v)
{
  constexpr std::size_t block = 8;
  if (v.size() <= block) {
    double acc = 0.0;
    for (double x : v)
      acc += x;
    return acc;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

/// Runs body(i) for i in [0, count) on up to `threads` workers using static
/// contiguous chunks. body must be safe to call concurrently for distinct i.
inline void parallel_for(std::size_t count, unsigned threads,
                         const std::function<void(std::size_t)>& body)
{
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i)
      body(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, count);
  const std::size_t chunk = (count + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(count, lo + chunk);
    if (lo >= hi)
      break;
    pool.emplace_back([lo, hi, &body] {
      for (std::size_t i = lo; i < hi; ++i)
        body(i);
    });
  }
}

/// Least-squares slope of ys against xs.
inline double least_squares_slope(std::span<const double> xs, std::span<const double> ys)
{
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

} // namespace qmcflux
