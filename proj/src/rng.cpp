#include "tasktree/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tasktree/common.hpp"

namespace tasktree {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

uint64_t derive_seed(uint64_t root, std::string_view name, uint64_t index) {
  uint64_t h = splitmix64(root ^ fnv1a64(name));
  return splitmix64(h ^ splitmix64(index));
}

double RngStream::normal() {
  // u1 in (0, 1] so the log is finite.
  double u1 = static_cast<double>((u64() >> 11) + 1) * 0x1.0p-53;
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int RngStream::uniform_int(int n) {
  if (n <= 0) throw ValidationError("uniform_int requires a positive bound");
  uint64_t bound = static_cast<uint64_t>(n);
  uint64_t threshold = (0ULL - bound) % bound;  // 2^64 mod n
  for (;;) {
    uint64_t x = u64();
    if (x >= threshold) return static_cast<int>(x % bound);
  }
}

std::vector<int> RngStream::sample_without_replacement(int n, int k) {
  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  if (k >= n) return idx;
  // Partial Fisher-Yates: after i swaps the prefix holds the sample.
  for (int i = 0; i < k; ++i) {
    int j = i + uniform_int(n - i);
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }
  idx.resize(static_cast<size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace tasktree
