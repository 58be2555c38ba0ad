#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dctlm {

/// Relative split weights, e.g. "90/5/5". Train and valid lengths round to
/// nearest; test takes the remainder.
struct SplitSpec {
  double train = 90, valid = 5, test = 5;
  static SplitSpec parse(std::string_view s);
  std::string to_string() const;
};

enum class Split : uint8_t { kTrain, kValid, kTest };
Split split_from_string(std::string_view s);
const char* to_string(Split s);

/// A byte corpus with contiguous train/valid/test ranges. The vocabulary is
/// built from the distinct bytes of the training range in ascending byte
/// order; bytes appearing only in valid/test map to an unknown id appended
/// after the training alphabet.
class Corpus {
 public:
  static Corpus load(const std::string& path, const SplitSpec& spec);
  static Corpus from_bytes(std::vector<uint8_t> bytes, const SplitSpec& spec);

  int vocab_size() const { return vocab_; }
  int32_t unknown_id() const { return unk_; }  // -1 when every byte is known
  int32_t id_of_byte(uint8_t b) const;
  int32_t id_at(size_t pos) const { return id_of_byte(bytes_[pos]); }
  size_t size() const { return bytes_.size(); }

  size_t split_begin(Split s) const;
  size_t split_length(Split s) const;

  const std::array<int32_t, 256>& byte_map() const { return map_; }
  /// "byte<TAB>id" lines, ascending byte order, plus the unknown id if any.
  std::string export_vocab() const;

  /// Replaces the mapping with one taken from a checkpoint, so held-out text
  /// is tokenized exactly as the model was trained.
  void override_vocab(const std::array<int32_t, 256>& map, int vocab, int32_t unk);

 private:
  std::vector<uint8_t> bytes_;
  std::array<int32_t, 256> map_{};
  int vocab_ = 0;
  int32_t unk_ = -1;
  size_t train_len_ = 0, valid_len_ = 0;
};

/// B x T token batch; `inputs[b*T + t]`'s target is the next byte of lane b.
struct Batch {
  int batch = 0, span = 0;
  std::vector<int32_t> inputs, targets;
};

/// Deterministic contiguous-lane iterator over one split: the split is cut
/// into B equal stripes, lane b walks stripe b in T-sized steps, and
/// consecutive segments of a lane are contiguous in the text so recurrent
/// state can carry over. batch(step) is a pure function of step; epochs wrap.
class BatchStream {
 public:
  BatchStream(const Corpus& corpus, Split split, int batch, int span);
  int64_t segments_per_epoch() const { return segments_; }
  Batch batch(int64_t step) const;

 private:
  const Corpus* corpus_;
  size_t begin_ = 0, lane_len_ = 0;
  int batch_ = 0, span_ = 0;
  int64_t segments_ = 0;
};

}  // namespace dctlm
