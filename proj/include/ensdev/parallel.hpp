#pragma once

// Loop drivers shared by every kernel. Each kernel exists in a serial form,
// kept as the reference, and an OpenMP form. Per-element results are written
// to disjoint slots and reduced serially afterwards, so both forms produce
// identical bits for any thread count.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <span>
#include <vector>

#include "ensdev/core.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ensdev {

enum class Exec { serial, openmp };

const char* exec_name(Exec e);

/// Process-wide default used by kernels that are not given an explicit policy.
Exec default_exec();
void set_default_exec(Exec e);
/// Number of OpenMP threads; 0 leaves the runtime default.
void set_thread_count(int n);
int thread_count();

template <class F>
void for_each_index(std::size_t n, F&& f, Exec exec = default_exec()) {
  if (exec == Exec::serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex guard;
  const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (long long i = 0; i < count; ++i) {
    try {
      f(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(guard);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

/// Sums `width` per-element contributions over [0, n). f(i, out) adds element
/// i into out. Elements are grouped in fixed chunks whose partial sums are
/// combined in chunk order, so the result does not depend on the thread count.
template <class F>
std::vector<double> chunked_sums(std::size_t n, std::size_t width, F&& f, Exec exec = default_exec()) {
  constexpr std::size_t kChunk = 256;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<double> partial(chunks * width, 0.0);
  for_each_index(
      chunks,
      [&](std::size_t c) {
        std::vector<CompensatedAccumulator> acc(width);
        std::vector<double> tmp(width);
        const std::size_t end = std::min(n, (c + 1) * kChunk);
        for (std::size_t i = c * kChunk; i < end; ++i) {
          std::fill(tmp.begin(), tmp.end(), 0.0);
          f(i, std::span<double>(tmp));
          for (std::size_t w = 0; w < width; ++w) acc[w].add(tmp[w]);
        }
        for (std::size_t w = 0; w < width; ++w) partial[c * width + w] = acc[w].value();
      },
      exec);
  std::vector<double> out(width);
  for (std::size_t w = 0; w < width; ++w) {
    CompensatedAccumulator a;
    for (std::size_t c = 0; c < chunks; ++c) a.add(partial[c * width + w]);
    out[w] = a.value();
  }
  return out;
}

}  // namespace ensdev
