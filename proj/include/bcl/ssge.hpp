#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "bcl/jacobi.hpp"
#include "bcl/tape.hpp"

namespace bcl {

// Spectral Stein gradient estimation: recover grad_w log q(w) from samples
// of q alone, via the Nystrom eigenfunctions of an RBF kernel Gram matrix.

struct SsgeConfig {
  int sample_count = 20;     // S
  int fixed_J = 0;           // 0 = select J by the cumulative eigenvalue rule
  double tau = 0.99;         // cumulative eigenvalue ratio
  double kernel_width = 0.0; // 0 = median of pairwise distances
};

struct SpectralBasis {
  std::vector<std::vector<double>> samples;      // S rows of dimension d
  double width = 1.0;
  int J = 0;
  std::vector<double> eigenvalues;               // retained, descending
  std::vector<std::vector<double>> eigenvectors; // J vectors of length S
  std::vector<std::vector<double>> gamma;        // d x J spectral coefficients
  int dropped = 0;                               // near-zero eigenvalues discarded
};

inline double rbf_kernel(const std::vector<double>& a, const std::vector<double>& b, double width) {
  double d2 = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    d2 += d * d;
  }
  return std::exp(-d2 / (2.0 * width * width));
}

inline double median_pairwise_distance(const std::vector<std::vector<double>>& samples) {
  std::vector<double> dists;
  for (size_t i = 0; i < samples.size(); ++i)
    for (size_t j = i + 1; j < samples.size(); ++j) {
      double d2 = 0.0;
      for (size_t k = 0; k < samples[i].size(); ++k) {
        double d = samples[i][k] - samples[j][k];
        d2 += d * d;
      }
      dists.push_back(std::sqrt(d2));
    }
  size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
  return dists[mid];
}

inline SpectralBasis build_spectral_basis(const std::vector<std::vector<double>>& samples,
                                          const SsgeConfig& cfg) {
  int s = static_cast<int>(samples.size());
  if (s < 2) throw std::invalid_argument("ssge: need at least two samples");
  int d = static_cast<int>(samples[0].size());

  SpectralBasis basis;
  basis.samples = samples;
  basis.width = cfg.kernel_width > 0 ? cfg.kernel_width : median_pairwise_distance(samples);
  if (!(basis.width > 0)) throw std::invalid_argument("ssge: all samples identical, kernel width is zero");

  std::vector<double> gram(static_cast<size_t>(s) * s);
  for (int i = 0; i < s; ++i)
    for (int j = i; j < s; ++j) {
      double k = rbf_kernel(samples[i], samples[j], basis.width);
      gram[static_cast<size_t>(i) * s + j] = k;
      gram[static_cast<size_t>(j) * s + i] = k;
    }

  EigenResult eig = jacobi_eigen_sym(gram, s);

  // discard numerically zero directions before applying the selection rule
  double cutoff = 1e-10 * std::max(eig.values[0], 0.0);
  int usable = 0;
  while (usable < s && eig.values[usable] > cutoff) ++usable;
  basis.dropped = s - usable;
  if (usable == 0) throw std::invalid_argument("ssge: Gram matrix has no positive spectrum");

  int J;
  if (cfg.fixed_J > 0) {
    J = std::min(cfg.fixed_J, usable);
  } else {
    double total = 0.0;
    for (int j = 0; j < usable; ++j) total += eig.values[j];
    double run = 0.0;
    J = usable;
    for (int j = 0; j < usable; ++j) {
      run += eig.values[j];
      if (run / total > cfg.tau) {
        J = j + 1;
        break;
      }
    }
  }
  basis.J = J;
  basis.eigenvalues.assign(eig.values.begin(), eig.values.begin() + J);
  basis.eigenvectors.assign(eig.vectors.begin(), eig.vectors.begin() + J);

  // gamma_ij = -(1/(sqrt(S) lambda_j)) sum_n sum_s d/dw^n_i k(w^n, w^s) u^j_s
  // with the analytic RBF gradient d/dw^n_i k = -k (w^n_i - w^s_i)/h^2
  double h2 = basis.width * basis.width;
  double sqrt_s = std::sqrt(static_cast<double>(s));
  basis.gamma.assign(d, std::vector<double>(J, 0.0));
  for (int n = 0; n < s; ++n)
    for (int m = 0; m < s; ++m) {
      double k = gram[static_cast<size_t>(n) * s + m];
      for (int j = 0; j < J; ++j) {
        double c = k * basis.eigenvectors[j][m] / (sqrt_s * basis.eigenvalues[j] * h2);
        if (c == 0.0) continue;
        for (int i = 0; i < d; ++i) basis.gamma[i][j] += c * (samples[n][i] - samples[m][i]);
      }
    }
  return basis;
}

// ghat_i(w) = sum_j gamma_ij phi_j(w), phi_j(w) = sqrt(S)/lambda_j sum_s u^j_s k(w, w^s);
// valid at arbitrary query points
inline std::vector<std::vector<double>> estimate_score(const std::vector<std::vector<double>>& queries,
                                                       const SpectralBasis& basis) {
  int s = static_cast<int>(basis.samples.size());
  int d = static_cast<int>(basis.samples[0].size());
  double sqrt_s = std::sqrt(static_cast<double>(s));
  std::vector<std::vector<double>> scores;
  scores.reserve(queries.size());
  for (const auto& q : queries) {
    if (static_cast<int>(q.size()) != d) throw std::invalid_argument("ssge: query dimension mismatch");
    std::vector<double> phi(basis.J, 0.0);
    for (int m = 0; m < s; ++m) {
      double k = rbf_kernel(q, basis.samples[m], basis.width);
      for (int j = 0; j < basis.J; ++j) phi[j] += basis.eigenvectors[j][m] * k;
    }
    for (int j = 0; j < basis.J; ++j) phi[j] *= sqrt_s / basis.eigenvalues[j];
    std::vector<double> g(d, 0.0);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < basis.J; ++j) g[i] += basis.gamma[i][j] * phi[j];
    scores.push_back(std::move(g));
  }
  return scores;
}

// Entropy-gradient hook for implicit posteriors: the estimated score at each
// sampled w acts as a fixed cotangent on that sample node, so backward()
// yields (1/S) sum_k ghat(w_k)^T dw_k/dtheta, the Monte-Carlo estimate of
// grad_theta E[log q]. The estimator itself is not differentiated through.
// The basis must have been built from the values of exactly these nodes.
inline int entropy_grad_surrogate(Tape& t, const std::vector<int>& w_nodes, const SpectralBasis& basis) {
  if (w_nodes.size() != basis.samples.size())
    throw std::invalid_argument("ssge: sample node count differs from basis sample count");
  std::vector<std::vector<double>> scores = estimate_score(basis.samples, basis);
  int acc = -1;
  for (size_t k = 0; k < w_nodes.size(); ++k) {
    int term = t.sum(t.mul(w_nodes[k], t.constant(Tensor::row(scores[k]))));
    acc = acc < 0 ? term : t.add(acc, term);
  }
  return t.scale(acc, 1.0 / static_cast<double>(w_nodes.size()));
}

// same surrogate with externally supplied cotangents (cross-entropy against a
// frozen implicit prior uses the prior's estimated score at the q samples)
inline int score_surrogate(Tape& t, const std::vector<int>& w_nodes,
                           const std::vector<std::vector<double>>& cotangents, double scale) {
  if (w_nodes.size() != cotangents.size()) throw std::invalid_argument("ssge: cotangent count mismatch");
  int acc = -1;
  for (size_t k = 0; k < w_nodes.size(); ++k) {
    int term = t.sum(t.mul(w_nodes[k], t.constant(Tensor::row(cotangents[k]))));
    acc = acc < 0 ? term : t.add(acc, term);
  }
  return t.scale(acc, scale / static_cast<double>(w_nodes.size()));
}

}  // namespace bcl
