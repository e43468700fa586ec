#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bcl/tensor.hpp"

namespace bcl {

// Reverse-mode autodiff over a flat record of primitive applications.
//
// Primitives: matmul, add (same shape), add_row (row-vector broadcast over
// matrix rows), mul (Hadamard), scale (by compile-time constant), relu,
// sigmoid, softplus, tanh, exp, log, softmax (row-wise), sum, sum_rows,
// mean, square, l2norm, concat (column-wise), slice (contiguous flat range,
// reinterpreted to a target shape), slice_cols.
//
// Ops evaluate eagerly when recorded; forward() replays the whole record
// (used after set_leaf), backward() accumulates gradients into every node.
// A tape is single-threaded; independent tapes can run concurrently.

enum class Op {
  Const,
  Leaf,
  MatMul,
  Add,
  AddRow,
  Mul,
  Scale,
  Relu,
  Sigmoid,
  Softplus,
  Tanh,
  Exp,
  Log,
  Softmax,
  Sum,
  SumRows,
  Mean,
  Square,
  L2Norm,
  Concat,
  Slice,
  SliceCols,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::Const: return "const";
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::Add: return "add";
    case Op::AddRow: return "add_row";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::Relu: return "relu";
    case Op::Sigmoid: return "sigmoid";
    case Op::Softplus: return "softplus";
    case Op::Tanh: return "tanh";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Softmax: return "softmax";
    case Op::Sum: return "sum";
    case Op::SumRows: return "sum_rows";
    case Op::Mean: return "mean";
    case Op::L2Norm: return "l2norm";
    case Op::Square: return "square";
    case Op::Concat: return "concat";
    case Op::Slice: return "slice";
    case Op::SliceCols: return "slice_cols";
  }
  return "?";
}

struct TapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double sigmoid_scalar(double x) {
  if (x >= 0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus_scalar(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// inverse of softplus; useful to pick raw values hitting a target scale
inline double softplus_inv(double y) { return std::log(std::expm1(y)); }

struct TapeNode {
  Op op = Op::Const;
  int a = -1, b = -1;
  int i0 = 0, i1 = 0;  // slice bounds
  double c = 0.0;      // scale factor
  Tensor val;
  std::vector<double> grad;
};

class Tape {
 public:
  int constant(Tensor t) { return push(Op::Const, std::move(t)); }
  int constant_scalar(double x) { return push(Op::Const, Tensor::scalar(x)); }
  int leaf(Tensor t) { return push(Op::Leaf, std::move(t)); }
  int leaf(const std::vector<double>& values) { return push(Op::Leaf, Tensor::row(values)); }

  // overwrite a leaf/const value; forward() must run before backward()
  void set_values(int id, const std::vector<double>& values) {
    Tensor& t = nodes_[id].val;
    if (values.size() != t.v.size()) throw TapeError("set_values: size mismatch");
    t.v = values;
    stale_ = true;
  }

  int matmul(int a, int b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.cols() != B.rows())
      throw ShapeError("matmul: incompatible shapes " + A.shape_str() + " and " + B.shape_str());
    TapeNode n;
    n.op = Op::MatMul;
    n.a = a;
    n.b = b;
    n.val = Tensor::zeros({A.rows(), B.cols()});
    return push_and_eval(std::move(n));
  }

  int add(int a, int b) { return binary(Op::Add, a, b); }
  int mul(int a, int b) { return binary(Op::Mul, a, b); }

  // bias broadcast: A (m x n) + row (n)
  int add_row(int a, int b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (B.rows() != 1 || A.cols() != B.cols())
      throw ShapeError("add_row: incompatible shapes " + A.shape_str() + " and " + B.shape_str());
    TapeNode n;
    n.op = Op::AddRow;
    n.a = a;
    n.b = b;
    n.val = Tensor::zeros(val(a).shape);
    return push_and_eval(std::move(n));
  }

  int scale(int a, double c) {
    TapeNode n;
    n.op = Op::Scale;
    n.a = a;
    n.c = c;
    n.val = Tensor::zeros(val(a).shape);
    return push_and_eval(std::move(n));
  }

  int sub(int a, int b) { return add(a, scale(b, -1.0)); }

  int relu(int a) { return unary(Op::Relu, a); }
  int sigmoid(int a) { return unary(Op::Sigmoid, a); }
  int softplus(int a) { return unary(Op::Softplus, a); }
  int tanh_(int a) { return unary(Op::Tanh, a); }
  int exp_(int a) { return unary(Op::Exp, a); }
  int log_(int a) { return unary(Op::Log, a); }
  int square(int a) { return unary(Op::Square, a); }
  int softmax(int a) { return unary(Op::Softmax, a); }

  int sum(int a) { return reduce(Op::Sum, a); }
  int mean(int a) { return reduce(Op::Mean, a); }
  int l2norm(int a) { return reduce(Op::L2Norm, a); }

  int sum_rows(int a) {
    TapeNode n;
    n.op = Op::SumRows;
    n.a = a;
    n.val = Tensor::zeros({val(a).rows(), 1});
    return push_and_eval(std::move(n));
  }

  int concat(int a, int b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rows() != B.rows())
      throw ShapeError("concat: row mismatch " + A.shape_str() + " and " + B.shape_str());
    TapeNode n;
    n.op = Op::Concat;
    n.a = a;
    n.b = b;
    if (A.rank() == 1 && B.rank() == 1)
      n.val = Tensor::zeros({A.cols() + B.cols()});
    else
      n.val = Tensor::zeros({A.rows(), A.cols() + B.cols()});
    return push_and_eval(std::move(n));
  }

  // contiguous range [offset, offset+len) of the row-major buffer, viewed
  // with the given shape (len = product of shape)
  int slice(int a, int offset, std::vector<int> shape) {
    Tensor out = Tensor::zeros(std::move(shape));
    long len = out.count();
    if (offset < 0 || offset + len > val(a).count())
      throw ShapeError("slice: range [" + std::to_string(offset) + ", " + std::to_string(offset + len) +
                       ") outside " + val(a).shape_str());
    TapeNode n;
    n.op = Op::Slice;
    n.a = a;
    n.i0 = offset;
    n.i1 = offset + static_cast<int>(len);
    n.val = std::move(out);
    return push_and_eval(std::move(n));
  }

  int slice_cols(int a, int c0, int c1) {
    const Tensor& A = val(a);
    if (c0 < 0 || c1 > A.cols() || c0 >= c1)
      throw ShapeError("slice_cols: bad range on " + A.shape_str());
    TapeNode n;
    n.op = Op::SliceCols;
    n.a = a;
    n.i0 = c0;
    n.i1 = c1;
    if (A.rank() == 1)
      n.val = Tensor::zeros({c1 - c0});
    else
      n.val = Tensor::zeros({A.rows(), c1 - c0});
    return push_and_eval(std::move(n));
  }

  const Tensor& val(int id) const { return nodes_[id].val; }
  double scalar(int id) const {
    if (nodes_[id].val.count() != 1) throw TapeError("scalar: node is not scalar");
    return nodes_[id].val.v[0];
  }
  const std::vector<double>& grad(int id) const { return nodes_[id].grad; }
  size_t size() const { return nodes_.size(); }

  // replay every recorded op in topological (= insertion) order
  void forward() {
    for (size_t i = 0; i < nodes_.size(); ++i) eval(nodes_[i]);
    stale_ = false;
  }

  void backward(int root) { backward(root, Tensor::scalar(1.0)); }

  void backward(int root, const Tensor& seed) {
    if (stale_) throw TapeError("backward: leaf values changed since last forward()");
    if (!nodes_[root].val.same_shape(seed)) throw TapeError("backward: seed shape mismatch");
    for (auto& n : nodes_) n.grad.assign(n.val.v.size(), 0.0);
    nodes_[root].grad = seed.v;
    for (int i = root; i >= 0; --i) propagate(nodes_[i]);
  }

 private:
  std::vector<TapeNode> nodes_;
  bool stale_ = false;

  int push(Op op, Tensor t) {
    TapeNode n;
    n.op = op;
    n.val = std::move(t);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  int push_and_eval(TapeNode n) {
    nodes_.push_back(std::move(n));
    eval(nodes_.back());
    return static_cast<int>(nodes_.size()) - 1;
  }

  int unary(Op op, int a) {
    TapeNode n;
    n.op = op;
    n.a = a;
    n.val = Tensor::zeros(val(a).shape);
    return push_and_eval(std::move(n));
  }

  int reduce(Op op, int a) {
    TapeNode n;
    n.op = op;
    n.a = a;
    n.val = Tensor::zeros({1});
    return push_and_eval(std::move(n));
  }

  int binary(Op op, int a, int b) {
    if (!val(a).same_shape(val(b)))
      throw ShapeError(std::string(op_name(op)) + ": shape mismatch " + val(a).shape_str() + " and " +
                       val(b).shape_str());
    TapeNode n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.val = Tensor::zeros(val(a).shape);
    return push_and_eval(std::move(n));
  }

  void eval(TapeNode& n) {
    const Tensor* A = n.a >= 0 ? &nodes_[n.a].val : nullptr;
    const Tensor* B = n.b >= 0 ? &nodes_[n.b].val : nullptr;
    auto& out = n.val.v;
    switch (n.op) {
      case Op::Const:
      case Op::Leaf:
        break;
      case Op::MatMul: {
        std::fill(out.begin(), out.end(), 0.0);
        gemm_acc(A->v.data(), B->v.data(), out.data(), A->rows(), A->cols(), B->cols());
        break;
      }
      case Op::Add:
        for (size_t i = 0; i < out.size(); ++i) out[i] = A->v[i] + B->v[i];
        break;
      case Op::AddRow: {
        int r = A->rows(), c = A->cols();
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) out[static_cast<size_t>(i) * c + j] = A->at(i, j) + B->v[j];
        break;
      }
      case Op::Mul:
        for (size_t i = 0; i < out.size(); ++i) out[i] = A->v[i] * B->v[i];
        break;
      case Op::Scale:
        for (size_t i = 0; i < out.size(); ++i) out[i] = A->v[i] * n.c;
        break;
      case Op::Relu:
        for (size_t i = 0; i < out.size(); ++i) out[i] = A->v[i] > 0 ? A->v[i] : 0.0;
        break;
      case Op::Sigmoid:
        for (size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(A->v[i]);
        break;
      case Op::Softplus:
        for (size_t i = 0; i < out.size(); ++i) out[i] = softplus_scalar(A->v[i]);
        break;
      case Op::Tanh:
        for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(A->v[i]);
        break;
      case Op::Exp:
        for (size_t i = 0; i < out.size(); ++i) out[i] = std::exp(A->v[i]);
        break;
      case Op::Log:
        for (size_t i = 0; i < out.size(); ++i) out[i] = std::log(A->v[i]);
        break;
      case Op::Softmax: {
        int r = A->rows(), c = A->cols();
        for (int i = 0; i < r; ++i) {
          const double* x = A->v.data() + static_cast<size_t>(i) * c;
          double* y = out.data() + static_cast<size_t>(i) * c;
          double m = x[0];
          for (int j = 1; j < c; ++j) m = std::max(m, x[j]);
          double z = 0.0;
          for (int j = 0; j < c; ++j) {
            y[j] = std::exp(x[j] - m);
            z += y[j];
          }
          for (int j = 0; j < c; ++j) y[j] /= z;
        }
        break;
      }
      case Op::Sum: {
        double s = 0.0;
        for (double x : A->v) s += x;
        out[0] = s;
        break;
      }
      case Op::SumRows: {
        int r = A->rows(), c = A->cols();
        for (int i = 0; i < r; ++i) {
          double s = 0.0;
          for (int j = 0; j < c; ++j) s += A->at(i, j);
          out[i] = s;
        }
        break;
      }
      case Op::Mean: {
        double s = 0.0;
        for (double x : A->v) s += x;
        out[0] = s / static_cast<double>(A->v.size());
        break;
      }
      case Op::Square:
        for (size_t i = 0; i < out.size(); ++i) out[i] = A->v[i] * A->v[i];
        break;
      case Op::L2Norm: {
        double s = 0.0;
        for (double x : A->v) s += x * x;
        out[0] = std::sqrt(s);
        break;
      }
      case Op::Concat: {
        int r = n.val.rows(), ca = A->cols(), cb = B->cols();
        for (int i = 0; i < r; ++i) {
          for (int j = 0; j < ca; ++j) out[static_cast<size_t>(i) * (ca + cb) + j] = A->at(i, j);
          for (int j = 0; j < cb; ++j) out[static_cast<size_t>(i) * (ca + cb) + ca + j] = B->at(i, j);
        }
        break;
      }
      case Op::Slice:
        for (int i = n.i0; i < n.i1; ++i) out[i - n.i0] = A->v[i];
        break;
      case Op::SliceCols: {
        int r = A->rows();
        int w = n.i1 - n.i0;
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < w; ++j) out[static_cast<size_t>(i) * w + j] = A->at(i, n.i0 + j);
        break;
      }
    }
  }

  void propagate(TapeNode& n) {
    if (n.op == Op::Const || n.op == Op::Leaf) return;
    const std::vector<double>& g = n.grad;
    Tensor& Av = nodes_[n.a].val;
    std::vector<double>& ga = nodes_[n.a].grad;
    switch (n.op) {
      case Op::MatMul: {
        Tensor& Bv = nodes_[n.b].val;
        std::vector<double>& gb = nodes_[n.b].grad;
        int m = Av.rows(), k = Av.cols(), c = Bv.cols();
        // dA[i,p] += sum_j g[i,j] * B[p,j]
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            double s = 0.0;
            const double* gi = g.data() + static_cast<size_t>(i) * c;
            const double* bp = Bv.v.data() + static_cast<size_t>(p) * c;
            for (int j = 0; j < c; ++j) s += gi[j] * bp[j];
            ga[static_cast<size_t>(i) * k + p] += s;
          }
        // dB[p,j] += sum_i A[i,p] * g[i,j]
        for (int i = 0; i < m; ++i) {
          const double* ai = Av.v.data() + static_cast<size_t>(i) * k;
          const double* gi = g.data() + static_cast<size_t>(i) * c;
          for (int p = 0; p < k; ++p) {
            double aip = ai[p];
            if (aip == 0.0) continue;
            double* gbp = gb.data() + static_cast<size_t>(p) * c;
            for (int j = 0; j < c; ++j) gbp[j] += aip * gi[j];
          }
        }
        break;
      }
      case Op::Add: {
        std::vector<double>& gb = nodes_[n.b].grad;
        for (size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::AddRow: {
        std::vector<double>& gb = nodes_[n.b].grad;
        int r = Av.rows(), c = Av.cols();
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) {
            double gij = g[static_cast<size_t>(i) * c + j];
            ga[static_cast<size_t>(i) * c + j] += gij;
            gb[j] += gij;
          }
        break;
      }
      case Op::Mul: {
        Tensor& Bv = nodes_[n.b].val;
        std::vector<double>& gb = nodes_[n.b].grad;
        for (size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * Bv.v[i];
          gb[i] += g[i] * Av.v[i];
        }
        break;
      }
      case Op::Scale:
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.c;
        break;
      case Op::Relu:
        for (size_t i = 0; i < g.size(); ++i) ga[i] += Av.v[i] > 0 ? g[i] : 0.0;
        break;
      case Op::Sigmoid:
        for (size_t i = 0; i < g.size(); ++i) {
          double s = n.val.v[i];
          ga[i] += g[i] * s * (1.0 - s);
        }
        break;
      case Op::Softplus:
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * sigmoid_scalar(Av.v[i]);
        break;
      case Op::Tanh:
        for (size_t i = 0; i < g.size(); ++i) {
          double t = n.val.v[i];
          ga[i] += g[i] * (1.0 - t * t);
        }
        break;
      case Op::Exp:
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.val.v[i];
        break;
      case Op::Log:
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / Av.v[i];
        break;
      case Op::Softmax: {
        int r = Av.rows(), c = Av.cols();
        for (int i = 0; i < r; ++i) {
          const double* s = n.val.v.data() + static_cast<size_t>(i) * c;
          const double* gi = g.data() + static_cast<size_t>(i) * c;
          double gs = 0.0;
          for (int j = 0; j < c; ++j) gs += gi[j] * s[j];
          for (int j = 0; j < c; ++j) ga[static_cast<size_t>(i) * c + j] += s[j] * (gi[j] - gs);
        }
        break;
      }
      case Op::Sum:
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
        break;
      case Op::SumRows: {
        int r = Av.rows(), c = Av.cols();
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) ga[static_cast<size_t>(i) * c + j] += g[i];
        break;
      }
      case Op::Mean: {
        double inv = 1.0 / static_cast<double>(ga.size());
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * inv;
        break;
      }
      case Op::Square:
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 2.0 * Av.v[i];
        break;
      case Op::L2Norm: {
        double norm = n.val.v[0];
        if (norm > 0)
          for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * Av.v[i] / norm;
        break;
      }
      case Op::Concat: {
        Tensor& Bv = nodes_[n.b].val;
        std::vector<double>& gb = nodes_[n.b].grad;
        int r = n.val.rows(), ca = Av.cols(), cb = Bv.cols();
        for (int i = 0; i < r; ++i) {
          for (int j = 0; j < ca; ++j) ga[static_cast<size_t>(i) * ca + j] += g[static_cast<size_t>(i) * (ca + cb) + j];
          for (int j = 0; j < cb; ++j) gb[static_cast<size_t>(i) * cb + j] += g[static_cast<size_t>(i) * (ca + cb) + ca + j];
        }
        break;
      }
      case Op::Slice:
        for (int i = n.i0; i < n.i1; ++i) ga[i] += g[i - n.i0];
        break;
      case Op::SliceCols: {
        int r = Av.rows(), c = Av.cols(), w = n.i1 - n.i0;
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < w; ++j) ga[static_cast<size_t>(i) * c + n.i0 + j] += g[static_cast<size_t>(i) * w + j];
        break;
      }
      case Op::Const:
      case Op::Leaf:
        break;
    }
  }

  friend double grad_check(Tape& tape, int root, int leaf, double step);
};

// Central finite differences against backward() for one leaf. Returns the
// worst relative error over leaf coordinates, with denominator
// max(|analytic|, |numeric|, 1e-8). Root must be scalar.
inline double grad_check(Tape& tape, int root, int leaf, double step) {
  if (tape.val(root).count() != 1) throw TapeError("grad_check: root must be scalar");
  if (step <= 0) throw TapeError("grad_check: step must be positive");
  tape.forward();
  tape.backward(root);
  std::vector<double> analytic = tape.grad(leaf);
  std::vector<double>& x = tape.nodes_[leaf].val.v;
  double worst = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double keep = x[i];
    x[i] = keep + step;
    tape.forward();
    double up = tape.scalar(root);
    x[i] = keep - step;
    tape.forward();
    double dn = tape.scalar(root);
    x[i] = keep;
    double fd = (up - dn) / (2.0 * step);
    double denom = std::max({std::fabs(fd), std::fabs(analytic[i]), 1e-8});
    worst = std::max(worst, std::fabs(fd - analytic[i]) / denom);
  }
  tape.forward();
  return worst;
}

}  // namespace bcl
