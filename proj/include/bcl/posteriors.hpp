#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bcl/nets.hpp"
#include "bcl/rng.hpp"
#include "bcl/tape.hpp"

namespace bcl {

enum class Family { Dirac, GaussMF, Radial, Implicit };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::Dirac: return "Dirac";
    case Family::GaussMF: return "GaussMF";
    case Family::Radial: return "Radial";
    case Family::Implicit: return "Implicit";
  }
  return "?";
}

constexpr double kDefaultInitialSigma = 0.02;

// How a flat parameter vector theta is read as a distribution over main
// network weights.
//   Dirac    - theta is the weight vector itself
//   GaussMF  - theta = [mu, rho], sigma = softplus(rho + rho_shift)
//   Radial   - same layout as GaussMF; draws are normalized per block
//   Implicit - theta parametrizes a weight-generator hypernetwork
struct PosteriorSpec {
  Family family = Family::GaussMF;
  int weight_count = 0;
  double rho_shift = softplus_inv(kDefaultInitialSigma);
  std::vector<std::pair<int, int>> radial_blocks;  // (offset, length) per block

  HypernetSpec wg;        // Implicit only; wg.input_dim == latent_dim
  int latent_dim = 0;     // n_z
  double sigma_noise = 0; // output perturbation scale
  double latent_sd = 1.0;

  int theta_count() const {
    switch (family) {
      case Family::Dirac: return weight_count;
      case Family::GaussMF:
      case Family::Radial: return 2 * weight_count;
      case Family::Implicit: return wg.param_count();
    }
    return 0;
  }
};

struct PosteriorParams {
  PosteriorSpec spec;
  std::vector<double> theta;
};

// weight and bias block of every layer, in flattening order
inline std::vector<std::pair<int, int>> layer_blocks(const MlpSpec& spec) {
  std::vector<std::pair<int, int>> blocks;
  int off = 0;
  for (int l = 0; l < spec.layers(); ++l) {
    int wn = spec.widths[l] * spec.widths[l + 1];
    blocks.emplace_back(off, wn);
    off += wn;
    blocks.emplace_back(off, spec.widths[l + 1]);
    off += spec.widths[l + 1];
  }
  return blocks;
}

// Per-draw base randomness. GaussMF: eps ~ N(0,I) over weights. Radial: eps
// plus one scalar radius per block. Implicit: eps is the latent z ~
// N(0, latent_sd^2 I), long enough to perturb every output entry.
struct WeightNoise {
  std::vector<double> eps;
  std::vector<double> radius;
};

inline WeightNoise draw_weight_noise(const PosteriorSpec& spec, Rng& rng) {
  WeightNoise n;
  switch (spec.family) {
    case Family::Dirac:
      break;
    case Family::GaussMF:
      n.eps = rng.normal_vec(spec.weight_count);
      break;
    case Family::Radial:
      n.eps = rng.normal_vec(spec.weight_count);
      for (size_t b = 0; b < spec.radial_blocks.size(); ++b) n.radius.push_back(rng.normal());
      break;
    case Family::Implicit:
      n.eps = rng.normal_vec(spec.weight_count, 0.0, spec.latent_sd);
      break;
  }
  return n;
}

struct GaussNodes {
  int mu = -1;
  int sigma = -1;
};

// split theta into mean and sigma = softplus(rho + rho_shift)
inline GaussNodes gauss_nodes(Tape& t, int theta, const PosteriorSpec& spec) {
  if (spec.family != Family::GaussMF && spec.family != Family::Radial)
    throw TapeError(std::string("gauss_nodes: wrong family ") + family_name(spec.family));
  int n = spec.weight_count;
  GaussNodes g;
  g.mu = t.slice(theta, 0, {n});
  int rho = t.slice(theta, n, {n});
  int shift = t.constant(Tensor::row(std::vector<double>(n, spec.rho_shift)));
  g.sigma = t.softplus(t.add(rho, shift));
  return g;
}

// one reparametrized weight sample as a tape node (1 x weight_count)
inline int sample_weights(Tape& t, int theta, const PosteriorSpec& spec, const WeightNoise& noise) {
  if (t.val(theta).count() != spec.theta_count())
    throw ShapeError("sample_weights: theta has " + std::to_string(t.val(theta).count()) + " entries, spec needs " +
                     std::to_string(spec.theta_count()));
  switch (spec.family) {
    case Family::Dirac:
      return t.slice(theta, 0, {spec.weight_count});
    case Family::GaussMF: {
      if (static_cast<int>(noise.eps.size()) != spec.weight_count)
        throw ShapeError("sample_weights: noise length mismatch");
      GaussNodes g = gauss_nodes(t, theta, spec);
      int eps = t.constant(Tensor::row(noise.eps));
      return t.add(g.mu, t.mul(g.sigma, eps));
    }
    case Family::Radial: {
      if (static_cast<int>(noise.eps.size()) != spec.weight_count ||
          noise.radius.size() != spec.radial_blocks.size())
        throw ShapeError("sample_weights: noise length mismatch");
      GaussNodes g = gauss_nodes(t, theta, spec);
      // direction * radius is data-independent of theta: precompute as constant
      std::vector<double> dir(spec.weight_count, 0.0);
      for (size_t b = 0; b < spec.radial_blocks.size(); ++b) {
        auto [off, len] = spec.radial_blocks[b];
        double norm = 0.0;
        for (int i = 0; i < len; ++i) norm += noise.eps[off + i] * noise.eps[off + i];
        norm = std::sqrt(norm);
        if (norm == 0.0) norm = 1.0;
        for (int i = 0; i < len; ++i) dir[off + i] = noise.eps[off + i] / norm * noise.radius[b];
      }
      int d = t.constant(Tensor::row(dir));
      return t.add(g.mu, t.mul(g.sigma, d));
    }
    case Family::Implicit: {
      if (static_cast<int>(noise.eps.size()) != spec.weight_count || spec.latent_dim > spec.weight_count)
        throw ShapeError("sample_weights: noise length mismatch");
      std::vector<double> z(noise.eps.begin(), noise.eps.begin() + spec.latent_dim);
      int zin = t.constant(Tensor::row(z));
      int out = hnet_forward(t, zin, theta, spec.wg);
      if (spec.sigma_noise > 0) {
        std::vector<double> pert(spec.weight_count);
        for (int i = 0; i < spec.weight_count; ++i) pert[i] = spec.sigma_noise * noise.eps[i];
        out = t.add(out, t.constant(Tensor::row(pert)));
      }
      return out;
    }
  }
  throw TapeError("sample_weights: unknown family");
}

inline std::vector<double> sample_weights_raw(const PosteriorParams& p, const WeightNoise& noise) {
  Tape t;
  int theta = t.constant(Tensor::row(p.theta));
  int w = sample_weights(t, theta, p.spec, noise);
  return t.val(w).v;
}

inline std::vector<double> sample_weights_raw(const PosteriorParams& p, Rng& rng) {
  return sample_weights_raw(p, draw_weight_noise(p.spec, rng));
}

// ---- closed forms on plain vectors ----

inline void check_positive_sigma(const std::vector<double>& s, const char* who) {
  for (double x : s)
    if (!(x > 0)) throw std::invalid_argument(std::string(who) + ": sigma must be positive");
}

inline double kl_diag_gauss(const std::vector<double>& mu1, const std::vector<double>& s1,
                            const std::vector<double>& mu2, const std::vector<double>& s2) {
  check_positive_sigma(s1, "kl_diag_gauss");
  check_positive_sigma(s2, "kl_diag_gauss");
  double kl = 0.0;
  for (size_t i = 0; i < mu1.size(); ++i) {
    double d = mu1[i] - mu2[i];
    kl += std::log(s2[i] / s1[i]) + (s1[i] * s1[i] + d * d) / (2.0 * s2[i] * s2[i]) - 0.5;
  }
  return kl;
}

enum class DivergenceKind { FKL, RKL, W2 };

inline DivergenceKind divergence_from_string(const std::string& s) {
  if (s == "fKL" || s == "fkl") return DivergenceKind::FKL;
  if (s == "rKL" || s == "rkl") return DivergenceKind::RKL;
  if (s == "W2" || s == "w2") return DivergenceKind::W2;
  throw std::invalid_argument("unknown divergence kind: " + s);
}

inline double divergence_diag_gauss(DivergenceKind kind, const std::vector<double>& mu1,
                                    const std::vector<double>& s1, const std::vector<double>& mu2,
                                    const std::vector<double>& s2) {
  switch (kind) {
    case DivergenceKind::FKL: return kl_diag_gauss(mu1, s1, mu2, s2);
    case DivergenceKind::RKL: return kl_diag_gauss(mu2, s2, mu1, s1);
    case DivergenceKind::W2: {
      check_positive_sigma(s1, "divergence_diag_gauss");
      check_positive_sigma(s2, "divergence_diag_gauss");
      double acc = 0.0;
      for (size_t i = 0; i < mu1.size(); ++i) {
        double dm = mu1[i] - mu2[i];
        double ds = s1[i] - s2[i];
        acc += dm * dm + ds * ds;
      }
      return std::sqrt(acc);
    }
  }
  throw std::invalid_argument("divergence_diag_gauss: unknown kind");
}

// entropy constant dropped; only the sigma-dependent part matters for training
inline double radial_neg_entropy(const PosteriorParams& p) {
  if (p.spec.family != Family::Radial) throw std::invalid_argument("radial_neg_entropy: wrong family");
  double acc = 0.0;
  int n = p.spec.weight_count;
  for (int i = 0; i < n; ++i) acc -= std::log(softplus_scalar(p.theta[n + i] + p.spec.rho_shift));
  return acc;
}

inline double gauss_log_density(const std::vector<double>& x, const std::vector<double>& mu,
                                const std::vector<double>& sigma) {
  check_positive_sigma(sigma, "gauss_log_density");
  double acc = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double z = (x[i] - mu[i]) / sigma[i];
    acc += -0.5 * std::log(2.0 * M_PI) - std::log(sigma[i]) - 0.5 * z * z;
  }
  return acc;
}

// mu/sigma values of a GaussMF/Radial posterior
inline std::pair<std::vector<double>, std::vector<double>> gauss_moments(const PosteriorParams& p) {
  int n = p.spec.weight_count;
  std::vector<double> mu(p.theta.begin(), p.theta.begin() + n);
  std::vector<double> sigma(n);
  for (int i = 0; i < n; ++i) sigma[i] = softplus_scalar(p.theta[n + i] + p.spec.rho_shift);
  return {mu, sigma};
}

// build theta hitting the requested moments exactly
inline PosteriorParams make_gauss_posterior(const std::vector<double>& mu, const std::vector<double>& sigma,
                                            PosteriorSpec spec) {
  check_positive_sigma(sigma, "make_gauss_posterior");
  spec.weight_count = static_cast<int>(mu.size());
  PosteriorParams p;
  p.spec = std::move(spec);
  p.theta = mu;
  for (double s : sigma) p.theta.push_back(softplus_inv(s) - p.spec.rho_shift);
  return p;
}

// ---- the same quantities as tape nodes (for loss assembly) ----

// KL( N(mu,sigma) || N(mu_p, sigma_p) ) with a constant prior
inline int kl_diag_gauss_node(Tape& t, GaussNodes q, const std::vector<double>& mu_p,
                              const std::vector<double>& sigma_p) {
  check_positive_sigma(sigma_p, "kl_diag_gauss_node");
  size_t n = mu_p.size();
  double const_term = -0.5 * static_cast<double>(n);
  std::vector<double> inv_2sp2(n);
  for (size_t i = 0; i < n; ++i) {
    const_term += std::log(sigma_p[i]);
    inv_2sp2[i] = 1.0 / (2.0 * sigma_p[i] * sigma_p[i]);
  }
  int d2 = t.square(t.sub(q.mu, t.constant(Tensor::row(mu_p))));
  int num = t.add(t.square(q.sigma), d2);
  int quad = t.sum(t.mul(num, t.constant(Tensor::row(inv_2sp2))));
  int neg_logs = t.scale(t.sum(t.log_(q.sigma)), -1.0);
  return t.add(t.add(quad, neg_logs), t.constant_scalar(const_term));
}

// KL( N(mu_p,sigma_p) || N(mu,sigma) ) with constant first argument
inline int kl_diag_gauss_node_rev(Tape& t, const std::vector<double>& mu_p, const std::vector<double>& sigma_p,
                                  GaussNodes q) {
  check_positive_sigma(sigma_p, "kl_diag_gauss_node_rev");
  size_t n = mu_p.size();
  double const_term = -0.5 * static_cast<double>(n);
  std::vector<double> sp2(n);
  for (size_t i = 0; i < n; ++i) {
    const_term -= std::log(sigma_p[i]);
    sp2[i] = sigma_p[i] * sigma_p[i];
  }
  int logs = t.sum(t.log_(q.sigma));
  // (sigma_p^2 + (mu_p - mu)^2) / (2 sigma^2), with 1/sigma^2 = exp(-2 log sigma)
  int d2 = t.square(t.sub(t.constant(Tensor::row(mu_p)), q.mu));
  int num = t.add(t.constant(Tensor::row(sp2)), d2);
  int inv_s2 = t.exp_(t.scale(t.log_(q.sigma), -2.0));
  int quad = t.scale(t.sum(t.mul(num, inv_s2)), 0.5);
  return t.add(t.add(logs, quad), t.constant_scalar(const_term));
}

inline int w2_diag_gauss_node(Tape& t, GaussNodes q, const std::vector<double>& mu_p,
                              const std::vector<double>& sigma_p) {
  int dm = t.sub(q.mu, t.constant(Tensor::row(mu_p)));
  int ds = t.sub(q.sigma, t.constant(Tensor::row(sigma_p)));
  return t.l2norm(t.concat(dm, ds));
}

// log density of a constant diagonal Gaussian evaluated at node x
inline int gauss_log_density_node(Tape& t, int x, const std::vector<double>& mu_p,
                                  const std::vector<double>& sigma_p) {
  check_positive_sigma(sigma_p, "gauss_log_density_node");
  size_t n = mu_p.size();
  double const_term = 0.0;
  std::vector<double> inv_s2(n);
  for (size_t i = 0; i < n; ++i) {
    const_term += -0.5 * std::log(2.0 * M_PI) - std::log(sigma_p[i]);
    inv_s2[i] = 1.0 / (sigma_p[i] * sigma_p[i]);
  }
  int quad = t.sum(t.mul(t.square(t.sub(x, t.constant(Tensor::row(mu_p)))), t.constant(Tensor::row(inv_s2))));
  return t.add(t.scale(quad, -0.5), t.constant_scalar(const_term));
}

inline int radial_neg_entropy_node(Tape& t, GaussNodes q) { return t.scale(t.sum(t.log_(q.sigma)), -1.0); }

}  // namespace bcl
