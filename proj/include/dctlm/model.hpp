#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dctlm/fast_weights.hpp"
#include "dctlm/layers.hpp"

namespace dctlm {

enum class Arch : uint8_t { kDense, kDct, kFastTwin, kFastSingle };
Arch arch_from_string(std::string_view s);
const char* to_string(Arch a);
inline bool is_fast(Arch a) { return a == Arch::kFastTwin || a == Arch::kFastSingle; }

struct ModelSpec {
  Arch arch = Arch::kDense;
  int vocab = 0;
  int embed = 0;
  std::vector<int> layers;
  double rate = 0;
  Corner corner = Corner::kHigh;
  BudgetMode budget_mode = BudgetMode::kCompleteDiagonals;
  double dropout_ff = 0, dropout_recurrent = 0, dropout_output = 0;
  FastBackward fast_backward = FastBackward::kRecompute;
};

/// Per-batch recurrent state carried (detached) across segment boundaries.
struct LaneState {
  std::vector<Matrix> h, c;          // one per LSTM layer
  std::vector<FastLaneState> fast;   // one per fast layer
};

struct SegmentResult {
  NodeId loss = kNoNode;  // scalar: mean cross-entropy in nats per character
  std::vector<size_t> fast_payload_floats;  // per fast layer, summed over lanes+steps
};

/// Character-level language model: tied embedding, a stack of recurrent
/// layers (dense LSTM, DCT-coefficient LSTM, or fast-weight RNN), an optional
/// dense projection when the last hidden size differs from the embedding
/// size, and the tied softmax readout.
class LanguageModel {
 public:
  explicit LanguageModel(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  void init(Rng& rng);
  std::vector<Parameter*> params();  // includes non-trainable buffers
  int64_t param_count() const;       // trainable scalars only
  int64_t fast_param_count() const;  // 0 for non-fast architectures
  std::vector<std::pair<std::string, int64_t>> breakdown() const;

  LaneState make_state(int batch) const;

  /// Runs one truncated-BPTT segment. `inputs`/`targets` are B x T token ids,
  /// row-major by lane. Updates `state` with the detached end-of-segment
  /// values. `rng` drives dropout masks (only consumed in train mode with
  /// nonzero rates).
  SegmentResult forward_segment(Tape& t, std::span<const int32_t> inputs,
                                std::span<const int32_t> targets, int batch, int span,
                                LaneState& state, bool train, Rng& rng);

  EmbeddingTable& embedding() { return emb_; }
  FastRnnLayer& fast_layer(size_t i) { return *fast_[i]; }
  size_t fast_layer_count() const { return fast_.size(); }
  LstmLayerBase& lstm_layer(size_t i) { return *lstm_[i]; }

 private:
  ModelSpec spec_;
  EmbeddingTable emb_;
  std::vector<std::unique_ptr<LstmLayerBase>> lstm_;
  std::vector<std::unique_ptr<FastRnnLayer>> fast_;
  Parameter proj_;  // last-hidden -> embed, only when sizes differ
  bool has_proj_ = false;
};

/// Trainable-parameter count computed purely from a ModelSpec (no allocation);
/// LanguageModel::param_count() must agree with it.
int64_t count_params(const ModelSpec& spec);
int64_t count_fast_params(const ModelSpec& spec);

}  // namespace dctlm
