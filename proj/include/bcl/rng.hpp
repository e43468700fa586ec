#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace bcl {

// Seeded random stream. Gaussian draws use Box-Muller on top of the raw
// mt19937_64 stream so that sequences are identical across standard
// libraries (std::normal_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  double uniform() {
    // in (0, 1); never returns 0 so log() below is safe
    return (static_cast<double>(gen_()) + 1.0) / (static_cast<double>(gen_.max()) + 2.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  std::vector<double> normal_vec(size_t n, double mean = 0.0, double sd = 1.0) {
    std::vector<double> out(n);
    for (auto& x : out) x = normal(mean, sd);
    return out;
  }

  // integer in [0, n)
  size_t index(size_t n) { return static_cast<size_t>(gen_() % n); }

  uint64_t raw() { return gen_(); }

  // derive an independent stream (e.g. one per task or per run phase)
  Rng fork() { return Rng(gen_() ^ 0x9e3779b97f4a7c15ULL); }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

template <typename T>
void shuffle_indices(std::vector<T>& idx, Rng& rng) {
  for (size_t i = idx.size(); i > 1; --i) {
    size_t j = rng.index(i);
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace bcl
