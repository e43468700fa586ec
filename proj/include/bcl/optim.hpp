#pragma once

#include <cmath>
#include <vector>

namespace bcl {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void step(std::vector<double>& params, const std::vector<double>& grads) {
    if (m_.size() != params.size()) {
      m_.assign(params.size(), 0.0);
      v_.assign(params.size(), 0.0);
      t_ = 0;
    }
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
      params[i] -= cfg_.lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + cfg_.eps);
    }
  }

  void reset() {
    m_.clear();
    v_.clear();
    t_ = 0;
  }

  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

// scales gradients in place so the global norm does not exceed max_norm;
// max_norm <= 0 disables clipping
inline void clip_grad_norm(std::vector<std::vector<double>*> grads, double max_norm) {
  if (max_norm <= 0) return;
  double total = 0.0;
  for (auto* g : grads)
    for (double x : *g) total += x * x;
  total = std::sqrt(total);
  if (total <= max_norm) return;
  double s = max_norm / total;
  for (auto* g : grads)
    for (double& x : *g) x *= s;
}

}  // namespace bcl
