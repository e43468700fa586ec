#pragma once

#include <string>
#include <vector>

#include "bcl/posteriors.hpp"

namespace bcl {

// Scaling data for the Monte-Carlo negative log-likelihood and the tempered
// prior-matching term of the per-task loss.
struct LikelihoodSpec {
  enum class Kind { Regression, Classification };
  Kind kind = Kind::Regression;
  double sigma_ll = 1.0;  // fixed regression likelihood scale
  int dataset_size = 0;   // N
  int minibatch = 0;      // N_mb
  int mc_samples = 1;     // K, draws for the NLL estimate
  int pm_samples = 10;    // draws for sample-based prior matching
  double kappa = 1.0;     // prior-matching scaling factor

  void validate() const {
    if (dataset_size < minibatch || minibatch < 1) throw std::invalid_argument("likelihood: need N >= N_mb >= 1");
    if (mc_samples < 1) throw std::invalid_argument("likelihood: need K >= 1");
    if (kind == Kind::Regression && !(sigma_ll > 0)) throw std::invalid_argument("likelihood: sigma_ll must be positive");
  }
};

struct GaussPrior {
  std::vector<double> mu, sigma;
  static GaussPrior standard(int n) {
    GaussPrior p;
    p.mu.assign(n, 0.0);
    p.sigma.assign(n, 1.0);
    return p;
  }
};

// N/(2 K N_mb sigma^2) * sum_k sum_batch (f(x, w_k) - y)^2
inline int nll_regression(Tape& t, const Tensor& X, const Tensor& Y, const std::vector<int>& w_nodes,
                          const MlpSpec& mlp, const LikelihoodSpec& lik) {
  lik.validate();
  if (X.rows() == 0 || w_nodes.empty()) throw std::invalid_argument("nll_regression: empty batch or sample set");
  int xs = t.constant(X);
  int ys = t.constant(Y);
  int acc = -1;
  for (int w : w_nodes) {
    int pred = mlp_forward(t, xs, w, mlp);
    int sq = t.sum(t.square(t.sub(pred, ys)));
    acc = acc < 0 ? sq : t.add(acc, sq);
  }
  double c = lik.dataset_size /
             (2.0 * static_cast<double>(w_nodes.size()) * X.rows() * lik.sigma_ll * lik.sigma_ll);
  return t.scale(acc, c);
}

// numerically safe log-sum-exp over rows; the row max enters as a constant,
// which leaves both value and gradient exact
inline int logsumexp_rows(Tape& t, int logits) {
  const Tensor& L = t.val(logits);
  int r = L.rows(), c = L.cols();
  std::vector<double> rowmax_mat(static_cast<size_t>(r) * c);
  std::vector<double> rowmax_col(r);
  for (int i = 0; i < r; ++i) {
    double m = L.at(i, 0);
    for (int j = 1; j < c; ++j) m = std::max(m, L.at(i, j));
    rowmax_col[i] = m;
    for (int j = 0; j < c; ++j) rowmax_mat[static_cast<size_t>(i) * c + j] = m;
  }
  int shifted = t.sub(logits, t.constant(Tensor::matrix(r, c, rowmax_mat)));
  int lse = t.log_(t.sum_rows(t.exp_(shifted)));
  return t.add(lse, t.constant(Tensor::matrix(r, 1, rowmax_col)));
}

// cross-entropy of softmax(logits) against per-row target distributions
// (rows of T sum to one); targets enter as constants
inline int cross_entropy_rows(Tape& t, int logits, const Tensor& targets) {
  int lse = t.sum(logsumexp_rows(t, logits));
  int picked = t.sum(t.mul(logits, t.constant(targets)));
  return t.sub(lse, picked);
}

inline Tensor one_hot(const std::vector<int>& labels, int classes) {
  Tensor T = Tensor::zeros({static_cast<int>(labels.size()), classes});
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes)
      throw std::out_of_range("one_hot: label " + std::to_string(labels[i]) + " outside head of " +
                              std::to_string(classes) + " classes");
    T.at(static_cast<int>(i), labels[i]) = 1.0;
  }
  return T;
}

// N/(K N_mb) * sum_k sum_batch CE(softmax of the active head slice, target).
// labels are local to the head slice of `task`.
inline int nll_classification(Tape& t, const Tensor& X, const std::vector<int>& labels,
                              const std::vector<int>& w_nodes, const MlpSpec& mlp, const LikelihoodSpec& lik,
                              int task) {
  lik.validate();
  if (X.rows() == 0 || w_nodes.empty()) throw std::invalid_argument("nll_classification: empty batch or sample set");
  auto [c0, c1] = mlp.head_slice(task);
  Tensor targets = one_hot(labels, c1 - c0);
  int xs = t.constant(X);
  int acc = -1;
  for (int w : w_nodes) {
    int full = mlp_forward(t, xs, w, mlp);
    int logits = (c0 == 0 && c1 == mlp.output_dim()) ? full : t.slice_cols(full, c0, c1);
    int ce = cross_entropy_rows(t, logits, targets);
    acc = acc < 0 ? ce : t.add(acc, ce);
  }
  double c = lik.dataset_size / (static_cast<double>(w_nodes.size()) * X.rows());
  return t.scale(acc, c);
}

// soft-target variant used by the coreset fine-tuning stage
inline int nll_classification_soft(Tape& t, const Tensor& X, const Tensor& targets,
                                   const std::vector<int>& w_nodes, const MlpSpec& mlp,
                                   const LikelihoodSpec& lik, int task) {
  lik.validate();
  if (X.rows() == 0 || w_nodes.empty()) throw std::invalid_argument("nll_classification: empty batch or sample set");
  auto [c0, c1] = mlp.head_slice(task);
  if (targets.cols() != c1 - c0) throw ShapeError("nll_classification_soft: target width mismatch");
  int xs = t.constant(X);
  int acc = -1;
  for (int w : w_nodes) {
    int full = mlp_forward(t, xs, w, mlp);
    int logits = (c0 == 0 && c1 == mlp.output_dim()) ? full : t.slice_cols(full, c0, c1);
    int ce = cross_entropy_rows(t, logits, targets);
    acc = acc < 0 ? ce : t.add(acc, ce);
  }
  double c = lik.dataset_size / (static_cast<double>(w_nodes.size()) * X.rows());
  return t.scale(acc, c);
}

// analytic prior matching for mean-field Gaussian posteriors
inline int pm_analytic(Tape& t, GaussNodes q, const GaussPrior& prior) {
  return kl_diag_gauss_node(t, q, prior.mu, prior.sigma);
}

// -(1/S) sum_k log p(w_k), reparametrized through the sample nodes
inline int pm_cross_entropy_mc(Tape& t, const std::vector<int>& w_nodes, const GaussPrior& prior) {
  if (w_nodes.empty()) throw std::invalid_argument("pm_cross_entropy_mc: no samples");
  int acc = -1;
  for (int w : w_nodes) {
    int lp = gauss_log_density_node(t, w, prior.mu, prior.sigma);
    acc = acc < 0 ? lp : t.add(acc, lp);
  }
  return t.scale(acc, -1.0 / static_cast<double>(w_nodes.size()));
}

// negative entropy (sigma part) plus Monte-Carlo cross-entropy
inline int pm_radial(Tape& t, GaussNodes q, const GaussPrior& prior, const std::vector<int>& w_nodes) {
  return t.add(radial_neg_entropy_node(t, q), pm_cross_entropy_mc(t, w_nodes, prior));
}

}  // namespace bcl
