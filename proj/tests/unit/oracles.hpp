#pragma once

// Slow, obviously-correct reference implementations used as test oracles.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "cpr/core/tensor.hpp"
#include "cpr/geom/pcgeom.hpp"

namespace oracle {

inline double dist2(const cpr::geom::PointSet<double>& a, std::size_t i,
                    const cpr::geom::PointSet<double>& b, std::size_t j) {
  double s = 0;
  for (std::size_t k = 0; k < a.dim; ++k) {
    double d = a.coords[i * a.dim + k] - b.coords[j * b.dim + k];
    s += d * d;
  }
  return s;
}

// O(n^2 m): recompute each candidate's distance to the whole selected set every round.
inline std::vector<std::size_t> fps(const cpr::geom::PointSet<double>& p, std::size_t m,
                                    std::size_t start) {
  std::vector<std::size_t> sel{start};
  while (sel.size() < m) {
    double best = -1;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      bool taken = false;
      for (auto s : sel) taken = taken || s == i;
      if (taken) continue;
      double md = std::numeric_limits<double>::infinity();
      for (auto s : sel) md = std::min(md, dist2(p, i, p, s));
      if (md > best) {
        best = md;
        best_i = i;
      }
    }
    sel.push_back(best_i);
  }
  return sel;
}

inline double chamfer(const cpr::geom::PointSet<double>& a, const cpr::geom::PointSet<double>& b) {
  auto directed = [](const auto& x, const auto& y) {
    double total = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double md = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < y.size(); ++j) md = std::min(md, dist2(x, i, y, j));
      total += md;
    }
    return total / static_cast<double>(x.size());
  };
  return directed(a, b) + directed(b, a);
}

// Inverse-distance interpolation in 1D using all sources (callers pass exactly k of them).
inline double idw_1d(const std::vector<double>& xs, const std::vector<double>& fs, double q) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double w = 1.0 / (std::abs(xs[i] - q) + 1e-8);
    num += w * fs[i];
    den += w;
  }
  return num / den;
}

// z, q: (B, n, p); hard: (B, h, p) or h == 0. Plain loops over every
// (sample, position) and every candidate, straight from the loss definition.
inline double local_infonce(const cpr::core::Tensor<double>& z, const cpr::core::Tensor<double>& q,
                            const cpr::core::Tensor<double>* hard, double tau, bool cross_batch) {
  const std::size_t B = z.dim(0), n = z.dim(1), p = z.dim(2);
  const std::size_t h = hard ? hard->dim(1) : 0;
  auto dot = [p](const double* a, const double* b) {
    double s = 0;
    for (std::size_t k = 0; k < p; ++k) s += a[k] * b[k];
    return s;
  };
  double total = 0;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* zi = z.data() + (b * n + i) * p;
      const double pos = std::exp(dot(zi, q.data() + (b * n + i) * p) / tau);
      double neg = 0;
      for (std::size_t bb = 0; bb < B; ++bb) {
        if (bb != b && !cross_batch) continue;
        for (std::size_t j = 0; j < n; ++j) {
          if (bb == b && j == i) continue;
          neg += std::exp(dot(zi, q.data() + (bb * n + j) * p) / tau);
        }
      }
      for (std::size_t j = 0; j < h; ++j) neg += std::exp(dot(zi, hard->data() + (b * h + j) * p) / tau);
      total += -std::log(pos / (pos + neg));
    }
  }
  return total / static_cast<double>(B * n);
}

// h, g: (B, p). Positive (h_b, g_b); negatives g_b' for b' != b.
inline double global_infonce(const cpr::core::Tensor<double>& h, const cpr::core::Tensor<double>& g,
                             double tau) {
  const std::size_t B = h.dim(0), p = h.dim(1);
  double total = 0;
  for (std::size_t b = 0; b < B; ++b) {
    double pos = 0, all = 0;
    for (std::size_t bb = 0; bb < B; ++bb) {
      double s = 0;
      for (std::size_t k = 0; k < p; ++k) s += h[b * p + k] * g[bb * p + k];
      const double e = std::exp(s / tau);
      all += e;
      if (bb == b) pos = e;
    }
    total += -std::log(pos / all);
  }
  return total / static_cast<double>(B);
}

}  // namespace oracle
