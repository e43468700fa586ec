#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace bcl {

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense row-major float64 tensor of rank 1 or 2. Rank-1 tensors behave as
// 1xN rows wherever a matrix is expected.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<double> vals) : shape(std::move(s)), v(std::move(vals)) {
    if (static_cast<size_t>(count()) != v.size()) throw ShapeError("tensor: shape/value size mismatch");
  }

  static Tensor scalar(double x) { return Tensor({1}, {x}); }
  static Tensor row(std::vector<double> vals) {
    int n = static_cast<int>(vals.size());
    return Tensor({n}, std::move(vals));
  }
  static Tensor matrix(int r, int c, std::vector<double> vals) { return Tensor({r, c}, std::move(vals)); }
  static Tensor zeros(std::vector<int> s) {
    Tensor t;
    t.shape = std::move(s);
    t.v.assign(t.count(), 0.0);
    return t;
  }

  int rank() const { return static_cast<int>(shape.size()); }
  int rows() const { return rank() == 2 ? shape[0] : 1; }
  int cols() const { return shape.empty() ? 0 : shape.back(); }
  long count() const {
    long n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  bool same_shape(const Tensor& o) const { return rows() == o.rows() && cols() == o.cols(); }

  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols() + c]; }

  std::string shape_str() const {
    std::string s;
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s.empty() ? "0" : s;
  }
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double sq_norm(const std::vector<double>& a) { return dot(a, a); }

// C += A * B with A: m x k, B: k x n, C: m x n (raw buffers, row-major)
inline void gemm_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<size_t>(i) * k;
    double* ci = c + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      double aip = ai[p];
      if (aip == 0.0) continue;
      const double* bp = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

}  // namespace bcl
