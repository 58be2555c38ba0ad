#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dctlm/data.hpp"
#include "dctlm/model.hpp"

namespace dctlm {

/// Flat key=value run configuration. Keys are section-prefixed
/// ("model.layers", "optim.lr", ...); '#' starts a comment; unknown keys are
/// rejected so typos fail loudly instead of silently using defaults.
struct TrainConfig {
  ModelSpec model;

  struct {
    double lr = 0.001;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double clip_norm = 0.0;  // 0 disables clipping
  } optim;

  struct {
    int batch = 32;
    int span = 200;
    int64_t steps = 2000;
    int64_t eval_interval = 200;
    int eval_batch = 32;
  } schedule;

  struct {
    std::string path;
    SplitSpec split;
  } data;

  struct {
    std::string out_dir = "run";
  } run;

  uint64_t seed = 1;

  std::string raw_text;  // verbatim file contents, echoed into checkpoints

  static TrainConfig parse_file(const std::string& path);
  static TrainConfig parse_string(const std::string& text);
};

}  // namespace dctlm
