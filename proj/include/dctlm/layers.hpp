#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dctlm/dct.hpp"
#include "dctlm/matrix.hpp"
#include "dctlm/rng.hpp"
#include "dctlm/tape.hpp"

namespace dctlm {

/// A named tensor of the model. Between segments it lives in `value`; during
/// a segment it is bound to a tape node (leaf when trainable, else constant).
struct Parameter {
  Parameter() = default;
  Parameter(std::string name_, Matrix value_, bool trainable_ = true)
      : name(std::move(name_)), value(std::move(value_)), trainable(trainable_) {}

  std::string name;
  Matrix value;
  bool trainable = true;
  NodeId node = kNoNode;
  PlanPtr plan;  // set on DCT coefficient vectors (metadata for checkpoints)
};

NodeId bind(Tape& t, Parameter& p);

/// Uniform init in [-bound, bound]; row-major draw order (fixed for
/// reproducibility and for the dense-vs-DCT equivalence tests).
Matrix uniform_matrix(int rows, int cols, real_t bound, Rng& rng);

/// Inverted dropout. Train mode zeroes entries with probability p and scales
/// survivors by 1/(1-p); eval mode is the identity. p must be in [0, 1).
NodeId t_dropout(Tape& t, NodeId x, double p, bool train, Rng& rng);

inline real_t bits_per_char(real_t nats) {
  return nats / static_cast<real_t>(0.6931471805599453);
}

// ---------------------------------------------------------------------------

/// V x E table shared by the input lookup and the (transposed) output
/// projection.
class EmbeddingTable {
 public:
  EmbeddingTable(int vocab, int dim);
  void init(Rng& rng);
  void begin_segment(Tape& t) { bind(t, table); }
  NodeId embed(Tape& t, std::span<const int32_t> ids) const;
  NodeId logits(Tape& t, NodeId h) const;  // h: B x E -> B x V
  int vocab() const { return vocab_; }
  int dim() const { return dim_; }

  Parameter table;

 private:
  int vocab_, dim_;
};

// ---------------------------------------------------------------------------

/// Common LSTM machinery: both layer kinds materialize, once per segment, a
/// stacked 4n x m input weight view, a 4n x n recurrent view (with the
/// per-segment recurrent dropout mask already applied) and a 1 x 4n bias, and
/// then share the same step. Gate block order is [i f o z].
class LstmLayerBase {
 public:
  LstmLayerBase(int hidden, int input) : n_(hidden), m_(input) {}
  virtual ~LstmLayerBase() = default;

  int hidden() const { return n_; }
  int input() const { return m_; }

  virtual void init(Rng& rng) = 0;
  virtual void collect(std::vector<Parameter*>& out) = 0;
  virtual int64_t param_count() const = 0;
  virtual void begin_segment(Tape& t, bool train, double recurrent_drop, Rng& rng) = 0;

  /// x: B x m, h/c: B x n. Returns (h', c').
  std::pair<NodeId, NodeId> step(Tape& t, NodeId x, NodeId h, NodeId c) const;

 protected:
  void finish_segment_weights(Tape& t, std::span<const NodeId> w_gates,
                              std::span<const NodeId> r_gates,
                              std::span<const NodeId> biases, bool train,
                              double recurrent_drop, Rng& rng);

  int n_, m_;
  NodeId wstack_ = kNoNode;  // 4n x m
  NodeId rstack_ = kNoNode;  // 4n x n
  NodeId bias_ = kNoNode;    // 1 x 4n
};

/// Plain dense LSTM: 4 input matrices, 4 recurrent matrices, 4 biases.
class DenseLstmLayer : public LstmLayerBase {
 public:
  DenseLstmLayer(std::string name, int hidden, int input);
  void init(Rng& rng) override;
  void collect(std::vector<Parameter*>& out) override;
  int64_t param_count() const override;
  void begin_segment(Tape& t, bool train, double recurrent_drop, Rng& rng) override;

  Parameter w[4], r[4], b[4];
};

/// LSTM whose 8 weight matrices are truncated DCT coefficient vectors, each
/// with its own packing plan; biases stay dense. Decompression to the dense
/// stacked views happens once per segment (the coefficients are constant
/// across the span, so this is mathematically identical to per-step
/// decompression).
class DctLstmLayer : public LstmLayerBase {
 public:
  DctLstmLayer(std::string name, int hidden, int input, double rate, Corner corner,
               BudgetMode mode);
  void init(Rng& rng) override;
  void collect(std::vector<Parameter*>& out) override;
  int64_t param_count() const override;
  void begin_segment(Tape& t, bool train, double recurrent_drop, Rng& rng) override;

  PlanPtr plan_in;   // n x m
  PlanPtr plan_rec;  // n x n
  Parameter gw[4], gr[4], b[4];
};

int64_t dense_lstm_param_count(int n, int m);
int64_t dct_lstm_param_count(int n, int m, double rate, BudgetMode mode);

}  // namespace dctlm
