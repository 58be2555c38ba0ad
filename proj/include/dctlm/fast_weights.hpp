#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dctlm/layers.hpp"

namespace dctlm {

/// Twin: two slow LSTMs, one per fast weight matrix. Single: one slow LSTM
/// whose hidden state splits into both coefficient vectors.
enum class FastVariant : uint8_t { kTwin, kSingle };

/// What the weight-generation cell saves for its backward pass: the dense
/// per-step weight matrices (naive) or only the coefficient vectors, with
/// dense weights re-derived by decompression inside backward (recompute).
enum class FastBackward : uint8_t { kNaive, kRecompute };

FastBackward fast_backward_from_string(std::string_view s);
const char* to_string(FastBackward m);

/// Detached per-lane state carried across segment boundaries. For the single
/// variant `gi`/`ci` hold the full (c_i + c_h)-dim slow state and `gh`/`ch`
/// stay empty.
struct FastLaneState {
  Matrix gi, ci;
  Matrix gh, ch;
  Matrix h;  // fast hidden, B x n
};

/// Tape bindings of a FastLaneState during one segment.
struct FastStateNodes {
  NodeId gi = kNoNode, ci = kNoNode;
  NodeId gh = kNoNode, ch = kNoNode;
  NodeId h = kNoNode;
};

/// Recurrent layer whose weight matrices are regenerated every time step:
/// slow LSTM hidden states are the DCT coefficient vectors of the fast RNN's
/// input and recurrent matrices; the fast cell is h_t = tanh(W_t x + R_t h).
class FastRnnLayer {
 public:
  FastRnnLayer(std::string name, int hidden, int input, double rate, Corner corner,
               BudgetMode mode, FastVariant variant);

  int hidden() const { return n_; }
  int input() const { return m_; }
  int c_i() const { return plan_in_->c; }
  int c_h() const { return plan_rec_->c; }
  FastVariant variant() const { return variant_; }
  int64_t fast_param_count() const { return plan_in_->c + plan_rec_->c; }
  int64_t param_count() const;  // trainable scalars (the slow networks)

  void init(Rng& rng);
  void collect(std::vector<Parameter*>& out);

  FastLaneState make_state(int batch) const;
  void begin_segment(Tape& t, FastBackward mode, bool train, double recurrent_drop,
                     Rng& rng);
  FastStateNodes bind_state(Tape& t, const FastLaneState& s) const;
  /// One step; returns the fast hidden node and advances `s` in place.
  NodeId step(Tape& t, NodeId x, FastStateNodes& s);
  void read_state(const Tape& t, const FastStateNodes& s, FastLaneState& out) const;

  /// Floats saved by this segment's weight-generation cells (all lanes).
  /// Recompute mode: B*T*(c_i+c_h). Naive mode: B*T*(n*m+n*n).
  size_t segment_payload_floats(const Tape& t) const;

 private:
  std::string name_;
  int n_, m_;
  FastVariant variant_;
  FastBackward mode_ = FastBackward::kRecompute;
  PlanPtr plan_in_;   // n x m
  PlanPtr plan_rec_;  // n x n
  // Twin: slow_i_ emits g^i (hidden c_i), slow_h_ emits g^h (hidden c_h).
  // Single: slow_i_ alone, hidden c_i + c_h.
  std::unique_ptr<DenseLstmLayer> slow_i_, slow_h_;
  Parameter g0i_, g0h_;  // non-trainable initial coefficient states
  std::vector<NodeId> cells_;
};

}  // namespace dctlm
