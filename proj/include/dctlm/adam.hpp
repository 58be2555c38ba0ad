#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dctlm/layers.hpp"
#include "dctlm/tape.hpp"

namespace dctlm {

/// Adam with bias correction and optional global gradient-norm clipping.
/// First and second moments are keyed by parameter name so they survive
/// checkpointing and rebinding.
class Adam {
 public:
  struct Slots {
    Matrix m, v;
  };

  Adam(double lr, double beta1, double beta2, double eps, double clip_norm = 0.0)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), clip_norm_(clip_norm) {}

  double lr() const { return lr_; }

  /// Applies one update using the gradients currently on `tape`. `t` is the
  /// 1-based update count for bias correction. Non-trainable parameters are
  /// skipped. A non-finite gradient aborts with the offending tensor's name.
  void step(const std::vector<Parameter*>& params, const Tape& tape, int64_t t);

  std::map<std::string, Slots>& slots() { return slots_; }
  const std::map<std::string, Slots>& slots() const { return slots_; }

 private:
  double lr_, beta1_, beta2_, eps_, clip_norm_;
  std::map<std::string, Slots> slots_;
};

}  // namespace dctlm
