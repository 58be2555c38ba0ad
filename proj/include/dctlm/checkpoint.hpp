#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dctlm/dct.hpp"
#include "dctlm/matrix.hpp"

namespace dctlm {

/// One named tensor inside a checkpoint. `plan` is set on coefficient-vector
/// parameters so tools can decompress them without rebuilding the model.
struct TensorRecord {
  std::string name;
  std::string role;  // "param" | "adam_m" | "adam_v" | "state"
  bool trainable = false;
  Matrix value;
  PlanPtr plan;  // null for dense tensors
};

/// Self-contained training snapshot: the verbatim config, the step counter,
/// the optimizer clock, the RNG, the vocabulary, and every tensor needed to
/// resume bit-exactly. Binary layout: 8-byte magic, u32 format version,
/// u64 header length, a JSON header (sorted keys), then each tensor's values
/// as little-endian f64 in header order. save -> load -> save is
/// byte-identical.
struct Checkpoint {
  static constexpr char kMagic[9] = "DCTLMCKP";
  static constexpr uint32_t kFormatVersion = 1;

  std::string config_text;
  int64_t step = 0;
  double best_valid_bpc = 0;  // +inf until the first evaluation
  bool has_best = false;
  uint64_t rng_state = 0, rng_inc = 0;

  std::array<int32_t, 256> byte_map{};
  int vocab_size = 0;
  int32_t unknown_id = -1;

  std::vector<TensorRecord> tensors;

  TensorRecord& add(std::string name, std::string role, bool trainable, Matrix value,
                    PlanPtr plan = nullptr);
  const TensorRecord* find(const std::string& name) const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace dctlm
