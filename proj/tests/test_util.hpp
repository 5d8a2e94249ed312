#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "hecop/rootsys.hpp"

namespace testutil {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double normal() { return std::normal_distribution<double>()(eng_); }
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(eng_); }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

/// Random point of the open chamber whose gaps are uniform on [min_gap, scale].
inline std::vector<double> random_interior(Rng& rng, const hecop::RootCase& rc, double scale,
                                           double min_gap = 0.05) {
  const int n = rc.rank();
  std::vector<double> x(n);
  using hecop::Family;
  switch (rc.family()) {
    case Family::A: {
      double v = rng.uniform(-scale, 0.0);
      for (int i = 0; i < n; ++i) {
        x[i] = v;
        v += rng.uniform(min_gap, scale);
      }
      break;
    }
    case Family::B:
    case Family::C: {
      double v = rng.uniform(min_gap, scale);
      for (int i = 0; i < n; ++i) {
        x[i] = v;
        v += rng.uniform(min_gap, scale);
      }
      break;
    }
    case Family::D: {
      const double a = rng.uniform(min_gap, scale);
      x[0] = rng.uniform(-1.0, 1.0) * std::max(0.0, a - min_gap);
      double v = a;
      for (int i = 1; i < n; ++i) {
        x[i] = v;
        v += rng.uniform(min_gap, scale);
      }
      break;
    }
  }
  return x;
}

}  // namespace testutil
