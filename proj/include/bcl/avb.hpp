#pragma once

#include <vector>

#include "bcl/nets.hpp"
#include "bcl/optim.hpp"
#include "bcl/vi.hpp"

namespace bcl {

// Adversarial density-ratio estimation of the prior-matching term. A small
// discriminator MLP over flat weight vectors is refreshed in an inner loop
// each outer iteration; its output at posterior samples estimates
// log q(w) - log p(w). Intended for main networks of only a few hundred
// weights.

struct DiscriminatorState {
  MlpSpec spec;  // input n_w -> hidden -> 1 (pre-sigmoid logit)
  std::vector<double> params;
  Adam opt;
  int inner_steps = 5;
  int inner_batch = 10;
};

inline DiscriminatorState make_discriminator(int weight_count, const std::vector<int>& hidden, Rng& rng,
                                             double lr, int inner_steps, int inner_batch) {
  DiscriminatorState d;
  d.spec.widths.push_back(weight_count);
  for (int h : hidden) d.spec.widths.push_back(h);
  d.spec.widths.push_back(1);
  d.params = init_mlp_params(d.spec, rng);
  d.opt = Adam(AdamConfig{.lr = lr});
  d.inner_steps = inner_steps;
  d.inner_batch = inner_batch;
  return d;
}

inline Tensor stack_rows(const std::vector<std::vector<double>>& rows) {
  int r = static_cast<int>(rows.size());
  int c = static_cast<int>(rows[0].size());
  Tensor out = Tensor::zeros({r, c});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.at(i, j) = rows[i][j];
  return out;
}

// One ascent step on E_q[log sigmoid(f)] + E_p[log(1 - sigmoid(f))].
// Returns the objective value before the step (0-initialized discriminators
// start at exactly -2 log 2).
inline double discriminator_step(DiscriminatorState& d, const std::vector<std::vector<double>>& q_samples,
                                 const std::vector<std::vector<double>>& p_samples) {
  if (q_samples.empty() || p_samples.empty()) throw std::invalid_argument("discriminator_step: empty sample set");
  if (q_samples[0].size() != p_samples[0].size())
    throw ShapeError("discriminator_step: sample dimension mismatch");
  Tape t;
  int w = t.leaf(d.params);
  int fq = mlp_forward(t, t.constant(stack_rows(q_samples)), w, d.spec);
  int fp = mlp_forward(t, t.constant(stack_rows(p_samples)), w, d.spec);
  // log sigmoid(f) = -softplus(-f); log(1 - sigmoid(f)) = -softplus(f)
  int loss = t.add(t.mean(t.softplus(t.scale(fq, -1.0))), t.mean(t.softplus(fp)));
  t.backward(loss);
  d.opt.step(d.params, t.grad(w));
  return -t.scalar(loss);
}

// (1/K) sum_k f_D(w_k) over posterior sample nodes. Discriminator parameters
// enter the tape as constants: the theta gradient reaches f_D only through
// its input samples.
inline int avb_prior_matching(Tape& t, const std::vector<int>& w_nodes, const DiscriminatorState& d) {
  if (w_nodes.empty()) throw std::invalid_argument("avb_prior_matching: no samples");
  int params = t.constant(Tensor::row(d.params));
  int acc = -1;
  for (int w : w_nodes) {
    int f = mlp_forward(t, w, params, d.spec);
    int sc = t.sum(f);
    acc = acc < 0 ? sc : t.add(acc, sc);
  }
  return t.scale(acc, 1.0 / static_cast<double>(w_nodes.size()));
}

// Auxiliary Gaussian matched to the empirical moments of the posterior draws.
// Re-pairs the discriminator against r_alpha and moves the analytically
// known part of the density ratio out of the adversarial estimate.
struct AdaptiveContrastStats {
  std::vector<double> mean, sd;
  bool floored = false;  // a zero-variance coordinate hit the 1e-8 floor
};

inline AdaptiveContrastStats adaptive_contrast_stats(const std::vector<std::vector<double>>& samples) {
  if (samples.size() < 2) throw std::invalid_argument("adaptive_contrast_stats: need at least two samples");
  size_t d = samples[0].size();
  AdaptiveContrastStats st;
  st.mean.assign(d, 0.0);
  st.sd.assign(d, 0.0);
  for (const auto& s : samples)
    for (size_t i = 0; i < d; ++i) st.mean[i] += s[i];
  for (auto& m : st.mean) m /= static_cast<double>(samples.size());
  for (const auto& s : samples)
    for (size_t i = 0; i < d; ++i) st.sd[i] += (s[i] - st.mean[i]) * (s[i] - st.mean[i]);
  for (auto& v : st.sd) {
    v /= static_cast<double>(samples.size());
    if (v < 1e-8) {
      v = 1e-8;
      st.floored = true;
    }
    v = std::sqrt(v);
  }
  return st;
}

inline std::vector<std::vector<double>> sample_adaptive_contrast(const AdaptiveContrastStats& st, int n,
                                                                 Rng& rng) {
  std::vector<std::vector<double>> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    std::vector<double> s(st.mean.size());
    for (size_t i = 0; i < s.size(); ++i) s[i] = rng.normal(st.mean[i], st.sd[i]);
    out.push_back(std::move(s));
  }
  return out;
}

// full prior-matching estimate with adaptive contrast:
//   E_q[ f_D ] + E_q[ log r_alpha(w) - log p(w) ]
// where f_D was inner-trained to tell q from r_alpha
inline int avb_prior_matching_ac(Tape& t, const std::vector<int>& w_nodes, const DiscriminatorState& d,
                                 const AdaptiveContrastStats& st, const GaussPrior& prior) {
  int ratio = avb_prior_matching(t, w_nodes, d);
  int acc = -1;
  for (int w : w_nodes) {
    int lr_alpha = gauss_log_density_node(t, w, st.mean, st.sd);
    int lp = gauss_log_density_node(t, w, prior.mu, prior.sigma);
    int term = t.sub(lr_alpha, lp);
    acc = acc < 0 ? term : t.add(acc, term);
  }
  return t.add(ratio, t.scale(acc, 1.0 / static_cast<double>(w_nodes.size())));
}

}  // namespace bcl
