#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace cowdet {

/// Seeded generator with distribution code written out explicitly so that
/// streams are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  int range(int lo, int hi) { return lo + static_cast<int>(below(hi - lo + 1)); }
  bool bernoulli(double p) { return uniform() < p; }
  double normal();

  template <typename V>
  void shuffle(std::vector<V>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Stream seed for one work item, independent of scheduling order.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key, std::uint64_t index = 0);

}  // namespace cowdet
