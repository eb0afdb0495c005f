#pragma once

// Independent reference computations used only by the tests.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "otca/numerics.hpp"

namespace otca::oracle {

// Central finite differences of f over every coordinate of `x`, with a step
// scaled to each coordinate's magnitude.
inline Vec central_differences(const std::function<double(std::span<const double>)>& f, Vec x,
                               double rel_step = 1e-5) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    const double h = rel_step * std::max(1.0, std::abs(orig));
    x[i] = orig + h;
    const double up = f(x);
    x[i] = orig - h;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// |a - b| / max(|a|, |b|) over whole vectors (2-norm), 0 when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::max(std::sqrt(na), std::sqrt(nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

// Minimum of (c.A)^2 - lambda (c.A) over the lattice {c >= 0, sum c = 1,
// c_k in {0, 1/n, ..., 1}}, enumerated directly on the simplex.
inline double simplex_grid_minimum(std::span<const double> a, double lambda, int n) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> counts(a.size(), 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t k, int left) {
    if (k + 1 == a.size()) {
      counts[k] = left;
      double z = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j) z += a[j] * counts[j] / static_cast<double>(n);
      best = std::min(best, z * z - lambda * z);
      return;
    }
    for (int c = 0; c <= left; ++c) {
      counts[k] = c;
      rec(k + 1, left - c);
    }
  };
  rec(0, n);
  return best;
}

}  // namespace otca::oracle
