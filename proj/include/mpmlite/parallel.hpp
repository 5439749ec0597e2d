#pragma once

// Thin wrappers over TBB with fixed chunking so that reductions give the
// same bits regardless of thread count.

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include <algorithm>
#include <cstddef>
#include <vector>

namespace mpmlite {

/// Compensated accumulator. Works for double and fixed-size Eigen types.
template <class T>
struct KahanSum {
  T sum;
  T carry;

  explicit KahanSum(const T& zero) : sum(zero), carry(zero) {}

  void add(const T& x) {
    const T y = x - carry;
    const T t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

/// Accumulator that is either compensated or plain, chosen at runtime.
template <class T>
struct Accumulator {
  KahanSum<T> k;
  bool compensated;

  Accumulator(const T& zero, bool comp) : k(zero), compensated(comp) {}

  void add(const T& x) {
    if (compensated)
      k.add(x);
    else
      k.sum = k.sum + x;
  }
  const T& value() const { return k.sum; }
};

template <class F>
void parallel_for(std::size_t n, F&& body, std::size_t grain = 256) {
  if (n == 0) return;
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, grain), [&](const tbb::blocked_range<std::size_t>& r) {
    for (std::size_t i = r.begin(); i != r.end(); ++i) body(i);
  });
}

/// Sum of term(i) over [0, n). Partial sums over fixed 1024-wide chunks
/// are combined in chunk order.
template <class T, class F>
T reduce_sum(std::size_t n, const T& zero, F&& term, bool compensated = true) {
  constexpr std::size_t kChunk = 1024;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<T> partial(chunks, zero);
  parallel_for(
      chunks,
      [&](std::size_t c) {
        Accumulator<T> acc(zero, compensated);
        const std::size_t end = std::min(n, (c + 1) * kChunk);
        for (std::size_t i = c * kChunk; i < end; ++i) acc.add(term(i));
        partial[c] = acc.value();
      },
      1);
  Accumulator<T> total(zero, compensated);
  for (const T& p : partial) total.add(p);
  return total.value();
}

}  // namespace mpmlite
