// Shared scalar aliases, error types and a small deterministic parallel-for.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mmhar {

// Matrices are dynamically sized; images are row-major so a frame's memory
// layout matches its on-disk scanline order.
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;
using MatD = Mat<double>;
using MatF = Mat<float>;
using ImageU8 = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeMismatch : Error {
  using Error::Error;
};
struct TubeletMismatch : Error {
  using Error::Error;
};
struct AlignmentGap : Error {
  using Error::Error;
};
struct DegenerateSplit : Error {
  using Error::Error;
};
struct NonFiniteLoss : Error {
  using Error::Error;
};
struct ModalityMismatch : Error {
  using Error::Error;
};
struct NonMonotonicTimestamp : Error {
  using Error::Error;
};
struct EmptyPredictions : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

inline int& worker_count() {
  static int workers = std::max(1u, std::thread::hardware_concurrency());
  return workers;
}

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks; callers
// that reduce results must do so in index order to stay deterministic.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(worker_count(), n);
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int lo = w * chunk;
    const int hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace mmhar
