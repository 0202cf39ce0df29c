#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace tasktree {

// All randomness flows from one root seed through named sub-streams
// (e.g. "init", "corruption", "sampling", "episodes").  Distributions are
// implemented by hand on top of mt19937_64 because the standard library's
// distribution objects are not pinned across implementations, and reports
// must reproduce byte-identically.
uint64_t derive_seed(uint64_t root, std::string_view name, uint64_t index = 0);

class RngStream {
 public:
  explicit RngStream(uint64_t seed) : eng_(seed) {}

  uint64_t u64() { return eng_(); }

  // Uniform on [0, 1): 53 random mantissa bits.
  double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (fresh pair per call, spare discarded,
  // so consumption per call is fixed and stream splits stay reproducible).
  double normal();

  // Uniform integer on [0, n), unbiased via rejection.
  int uniform_int(int n);

  // k distinct values from {0..n-1}; returns all of them (ascending) when
  // k >= n, otherwise a sorted uniform sample without replacement.
  std::vector<int> sample_without_replacement(int n, int k);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

inline RngStream substream(uint64_t root, std::string_view name, uint64_t index = 0) {
  return RngStream(derive_seed(root, name, index));
}

}  // namespace tasktree
