#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace bcl {

struct EigenResult {
  std::vector<double> values;             // descending
  std::vector<std::vector<double>> vectors;  // vectors[j] is the eigenvector of values[j]
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major, n x n).
// Adequate for the small Gram matrices used here (n <= a few hundred).
inline EigenResult jacobi_eigen_sym(std::vector<double> a, int n, int max_sweeps = 64) {
  if (static_cast<size_t>(n) * n != a.size()) throw std::invalid_argument("jacobi: bad matrix size");
  std::vector<double> v(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) v[static_cast<size_t>(i) * n + i] = 1.0;

  auto idx = [n](int r, int c) { return static_cast<size_t>(r) * n + c; };

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a[idx(p, q)] * a[idx(p, q)];
    if (off < 1e-24) break;

    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = a[idx(p, q)];
        if (std::fabs(apq) < 1e-300) continue;
        double app = a[idx(p, p)], aqq = a[idx(q, q)];
        double theta = (aqq - app) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        double tau = s / (1.0 + c);

        a[idx(p, p)] = app - t * apq;
        a[idx(q, q)] = aqq + t * apq;
        a[idx(p, q)] = 0.0;
        a[idx(q, p)] = 0.0;
        for (int i = 0; i < n; ++i) {
          if (i != p && i != q) {
            double aip = a[idx(i, p)], aiq = a[idx(i, q)];
            a[idx(i, p)] = aip - s * (aiq + tau * aip);
            a[idx(i, q)] = aiq + s * (aip - tau * aiq);
            a[idx(p, i)] = a[idx(i, p)];
            a[idx(q, i)] = a[idx(i, q)];
          }
          double vip = v[idx(i, p)], viq = v[idx(i, q)];
          v[idx(i, p)] = vip - s * (viq + tau * vip);
          v[idx(i, q)] = viq + s * (vip - tau * viq);
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) { return a[idx(x, x)] > a[idx(y, y)]; });

  EigenResult res;
  res.values.resize(n);
  res.vectors.assign(n, std::vector<double>(n));
  for (int j = 0; j < n; ++j) {
    int src = order[j];
    res.values[j] = a[idx(src, src)];
    for (int i = 0; i < n; ++i) res.vectors[j][i] = v[idx(i, src)];
  }
  return res;
}

}  // namespace bcl
