#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "dctlm/adam.hpp"
#include "dctlm/checkpoint.hpp"
#include "dctlm/config.hpp"
#include "dctlm/data.hpp"
#include "dctlm/model.hpp"

namespace dctlm {

/// Mean bits-per-character over every whole segment of a split, starting from
/// zero state and carrying it across segments. No dropout, no RNG.
double evaluate_split(LanguageModel& model, const Corpus& corpus, Split split, int batch,
                      int span);

/// Snapshot of everything train_run needs to resume bit-exactly.
Checkpoint snapshot(LanguageModel& model, const Adam& adam, const LaneState& state,
                    const Rng& rng, int64_t step, double best_valid, bool has_best,
                    const std::string& config_text, const Corpus& corpus);

/// Restores parameters (and optionally optimizer slots, carried state, RNG)
/// from a checkpoint into an already-built model of the same architecture.
void restore_model(LanguageModel& model, const Checkpoint& ck, Adam* adam = nullptr,
                   LaneState* state = nullptr, Rng* rng = nullptr);

/// Builds the model spec a checkpoint was trained with (config text + stored
/// vocabulary size).
ModelSpec spec_from_checkpoint(const Checkpoint& ck);

/// Runs (or resumes) a training loop. `corpus_path` is the resolved data
/// file. `resume_path` is empty for a fresh run. Appends tab-separated
/// metric lines (step, split, bpc, lr, elapsed_s) to <out_dir>/metrics.tsv,
/// mirrors them to `console`, and writes <out_dir>/last.ckpt every logging
/// interval plus <out_dir>/best.ckpt whenever validation improves.
/// Returns the final step count.
int64_t train_run(const TrainConfig& cfg, const std::string& corpus_path,
                  const std::string& resume_path, std::ostream& console);

}  // namespace dctlm
