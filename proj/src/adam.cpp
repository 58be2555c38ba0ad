#include "dctlm/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace dctlm {

void Adam::step(const std::vector<Parameter*>& params, const Tape& tape, int64_t t) {
  if (t < 1) throw std::invalid_argument("Adam update count must be >= 1");

  // Gather gradient views and validate before touching any state, so a bad
  // gradient can't leave a half-applied update behind.
  std::vector<const Matrix*> grads(params.size(), nullptr);
  double sq_norm = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    Parameter* p = params[i];
    if (!p->trainable) continue;
    const Matrix& g = tape.grad(p->node);
    if (!g.all_finite())
      throw std::runtime_error("non-finite gradient for tensor '" + p->name + "'");
    grads[i] = &g;
    for (size_t k = 0; k < g.size(); ++k) {
      double x = (double)g.flat()[k];
      sq_norm += x * x;
    }
  }

  double scale = 1.0;
  if (clip_norm_ > 0) {
    double norm = std::sqrt(sq_norm);
    if (norm > clip_norm_) scale = clip_norm_ / norm;
  }

  const double c1 = 1.0 - std::pow(beta1_, (double)t);
  const double c2 = 1.0 - std::pow(beta2_, (double)t);

  for (size_t i = 0; i < params.size(); ++i) {
    if (!grads[i]) continue;
    Parameter* p = params[i];
    const Matrix& g = *grads[i];
    Slots& s = slots_[p->name];
    if (s.m.size() == 0) {
      s.m = Matrix(p->value.rows(), p->value.cols());
      s.v = Matrix(p->value.rows(), p->value.cols());
    }
    if (s.m.rows() != p->value.rows() || s.m.cols() != p->value.cols())
      throw std::runtime_error("optimizer slot shape mismatch for tensor '" + p->name + "'");
    for (size_t k = 0; k < g.size(); ++k) {
      double gk = (double)g.flat()[k] * scale;
      double mk = beta1_ * (double)s.m.flat()[k] + (1.0 - beta1_) * gk;
      double vk = beta2_ * (double)s.v.flat()[k] + (1.0 - beta2_) * gk * gk;
      s.m.flat()[k] = (real_t)mk;
      s.v.flat()[k] = (real_t)vk;
      double update = lr_ * (mk / c1) / (std::sqrt(vk / c2) + eps_);
      p->value.flat()[k] = (real_t)((double)p->value.flat()[k] - update);
    }
  }
}

}  // namespace dctlm
