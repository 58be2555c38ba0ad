#include "dctlm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace dctlm {

namespace {

std::string state_name(const std::string& kind, size_t layer, const char* field) {
  return "state." + kind + std::to_string(layer) + "." + field;
}

void add_state_tensors(Checkpoint& ck, const LaneState& state) {
  for (size_t i = 0; i < state.h.size(); ++i) {
    ck.add(state_name("lstm", i, "h"), "state", false, state.h[i]);
    ck.add(state_name("lstm", i, "c"), "state", false, state.c[i]);
  }
  for (size_t i = 0; i < state.fast.size(); ++i) {
    const FastLaneState& f = state.fast[i];
    ck.add(state_name("fast", i, "gi"), "state", false, f.gi);
    ck.add(state_name("fast", i, "ci"), "state", false, f.ci);
    if (f.gh.size() > 0) {
      ck.add(state_name("fast", i, "gh"), "state", false, f.gh);
      ck.add(state_name("fast", i, "ch"), "state", false, f.ch);
    }
    ck.add(state_name("fast", i, "h"), "state", false, f.h);
  }
}

const Matrix& state_tensor(const Checkpoint& ck, const std::string& name) {
  const TensorRecord* rec = ck.find(name);
  if (!rec) throw std::runtime_error("checkpoint is missing state tensor '" + name + "'");
  return rec->value;
}

// A resumed run may extend schedule.steps, move out_dir, or change the eval
// cadence, but everything that shapes the arithmetic must be unchanged.
void check_resumable(const TrainConfig& now, const TrainConfig& was) {
  const ModelSpec &a = now.model, &b = was.model;
  bool model_ok = a.arch == b.arch && a.vocab == b.vocab && a.embed == b.embed &&
                  a.layers == b.layers && a.rate == b.rate && a.corner == b.corner &&
                  a.budget_mode == b.budget_mode && a.dropout_ff == b.dropout_ff &&
                  a.dropout_recurrent == b.dropout_recurrent &&
                  a.dropout_output == b.dropout_output && a.fast_backward == b.fast_backward;
  bool optim_ok = now.optim.lr == was.optim.lr && now.optim.beta1 == was.optim.beta1 &&
                  now.optim.beta2 == was.optim.beta2 && now.optim.eps == was.optim.eps &&
                  now.optim.clip_norm == was.optim.clip_norm;
  bool stream_ok = now.schedule.batch == was.schedule.batch &&
                   now.schedule.span == was.schedule.span &&
                   now.data.split.train == was.data.split.train &&
                   now.data.split.valid == was.data.split.valid &&
                   now.data.split.test == was.data.split.test;
  if (!model_ok || !optim_ok || !stream_ok)
    throw std::runtime_error(
        "resume checkpoint was produced by an incompatible config (model, optimizer, "
        "batch/span, or split differs)");
}

}  // namespace

double evaluate_split(LanguageModel& model, const Corpus& corpus, Split split, int batch,
                      int span) {
  BatchStream stream(corpus, split, batch, span);
  LaneState state = model.make_state(batch);
  Rng rng(0);  // never consumed: dropout is off in eval mode
  Tape tape;
  tape.set_economy(true);
  double nats = 0;
  const int64_t segs = stream.segments_per_epoch();
  for (int64_t s = 0; s < segs; ++s) {
    Batch b = stream.batch(s);
    tape.reset();
    SegmentResult r = model.forward_segment(tape, b.inputs, b.targets, batch, span, state,
                                            /*train=*/false, rng);
    nats += (double)tape.value(r.loss)(0, 0);
  }
  return (double)bits_per_char((real_t)(nats / (double)segs));
}

Checkpoint snapshot(LanguageModel& model, const Adam& adam, const LaneState& state,
                    const Rng& rng, int64_t step, double best_valid, bool has_best,
                    const std::string& config_text, const Corpus& corpus) {
  Checkpoint ck;
  ck.config_text = config_text;
  ck.step = step;
  ck.best_valid_bpc = best_valid;
  ck.has_best = has_best;
  ck.rng_state = rng.state();
  ck.rng_inc = rng.inc();
  ck.byte_map = corpus.byte_map();
  ck.vocab_size = corpus.vocab_size();
  ck.unknown_id = corpus.unknown_id();

  for (Parameter* p : model.params())
    ck.add(p->name, "param", p->trainable, p->value, p->plan);
  for (const auto& [name, slots] : adam.slots()) {
    ck.add(name, "adam_m", false, slots.m);
    ck.add(name, "adam_v", false, slots.v);
  }
  add_state_tensors(ck, state);
  return ck;
}

void restore_model(LanguageModel& model, const Checkpoint& ck, Adam* adam, LaneState* state,
                   Rng* rng) {
  for (Parameter* p : model.params()) {
    const TensorRecord* rec = nullptr;
    for (const auto& t : ck.tensors)
      if (t.role == "param" && t.name == p->name) {
        rec = &t;
        break;
      }
    if (!rec) throw std::runtime_error("checkpoint is missing parameter '" + p->name + "'");
    if (rec->value.rows() != p->value.rows() || rec->value.cols() != p->value.cols())
      throw std::runtime_error("checkpoint parameter '" + p->name + "' has shape " +
                               std::to_string(rec->value.rows()) + "x" +
                               std::to_string(rec->value.cols()) + ", model expects " +
                               std::to_string(p->value.rows()) + "x" +
                               std::to_string(p->value.cols()));
    p->value = rec->value;
  }
  if (adam) {
    adam->slots().clear();
    for (const auto& t : ck.tensors) {
      if (t.role == "adam_m") adam->slots()[t.name].m = t.value;
      if (t.role == "adam_v") adam->slots()[t.name].v = t.value;
    }
  }
  if (state) {
    for (size_t i = 0; i < state->h.size(); ++i) {
      state->h[i] = state_tensor(ck, state_name("lstm", i, "h"));
      state->c[i] = state_tensor(ck, state_name("lstm", i, "c"));
    }
    for (size_t i = 0; i < state->fast.size(); ++i) {
      FastLaneState& f = state->fast[i];
      f.gi = state_tensor(ck, state_name("fast", i, "gi"));
      f.ci = state_tensor(ck, state_name("fast", i, "ci"));
      if (f.gh.size() > 0) {
        f.gh = state_tensor(ck, state_name("fast", i, "gh"));
        f.ch = state_tensor(ck, state_name("fast", i, "ch"));
      }
      f.h = state_tensor(ck, state_name("fast", i, "h"));
    }
  }
  if (rng) rng->restore(ck.rng_state, ck.rng_inc);
}

ModelSpec spec_from_checkpoint(const Checkpoint& ck) {
  TrainConfig cfg = TrainConfig::parse_string(ck.config_text);
  ModelSpec spec = cfg.model;
  if (spec.vocab == 0) spec.vocab = ck.vocab_size;
  return spec;
}

int64_t train_run(const TrainConfig& cfg, const std::string& corpus_path,
                  const std::string& resume_path, std::ostream& console) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  Corpus corpus = Corpus::load(corpus_path, cfg.data.split);
  ModelSpec spec = cfg.model;
  if (spec.vocab == 0) {
    spec.vocab = corpus.vocab_size();
  } else if (spec.vocab != corpus.vocab_size()) {
    throw std::runtime_error("config sets model.vocab = " + std::to_string(spec.vocab) +
                             " but the corpus vocabulary has " +
                             std::to_string(corpus.vocab_size()) + " symbols");
  }

  LanguageModel model(spec);
  Rng rng(cfg.seed);
  model.init(rng);
  std::vector<Parameter*> params = model.params();
  Adam adam(cfg.optim.lr, cfg.optim.beta1, cfg.optim.beta2, cfg.optim.eps,
            cfg.optim.clip_norm);

  BatchStream stream(corpus, Split::kTrain, cfg.schedule.batch, cfg.schedule.span);
  LaneState state = model.make_state(cfg.schedule.batch);

  int64_t start_step = 0;
  double best_valid = std::numeric_limits<double>::infinity();
  bool has_best = false;

  if (!resume_path.empty()) {
    Checkpoint ck = Checkpoint::load(resume_path);
    check_resumable(cfg, TrainConfig::parse_string(ck.config_text));
    if (ck.byte_map != corpus.byte_map() || ck.vocab_size != corpus.vocab_size())
      throw std::runtime_error("resume checkpoint vocabulary does not match the corpus");
    restore_model(model, ck, &adam, &state, &rng);
    start_step = ck.step;
    has_best = ck.has_best;
    if (has_best) best_valid = ck.best_valid_bpc;
  }

  fs::create_directories(cfg.run.out_dir);
  const std::string metrics_path = cfg.run.out_dir + "/metrics.tsv";
  const std::string last_path = cfg.run.out_dir + "/last.ckpt";
  const std::string best_path = cfg.run.out_dir + "/best.ckpt";
  std::ofstream log(metrics_path,
                    resume_path.empty() ? std::ios::trunc : (std::ios::app | std::ios::ate));
  if (!log) throw std::runtime_error("cannot open metric log '" + metrics_path + "'");
  if (resume_path.empty()) {
    log << "# training log\n# step\tsplit\tbpc\tlr\telapsed_s\n";
    std::ofstream vocab_out(cfg.run.out_dir + "/vocab.tsv", std::ios::trunc);
    vocab_out << corpus.export_vocab();
  }

  auto emit = [&](int64_t step, const char* split, double bpc) {
    char line[160];
    std::snprintf(line, sizeof(line), "%lld\t%s\t%.6f\t%g\t%.3f", (long long)step, split,
                  bpc, adam.lr(), elapsed());
    log << line << '\n';
    log.flush();
    console << line << std::endl;
  };

  Tape tape;
  tape.set_economy(true);
  double interval_nats = 0;
  int64_t interval_count = 0;

  for (int64_t step = start_step; step < cfg.schedule.steps; ++step) {
    Batch b = stream.batch(step);
    tape.reset();
    SegmentResult r = model.forward_segment(tape, b.inputs, b.targets, cfg.schedule.batch,
                                            cfg.schedule.span, state, /*train=*/true, rng);
    tape.backward(r.loss);
    adam.step(params, tape, step + 1);
    interval_nats += (double)tape.value(r.loss)(0, 0);
    ++interval_count;

    const int64_t done = step + 1;
    if (done % cfg.schedule.eval_interval == 0 || done == cfg.schedule.steps) {
      emit(done, "train", (double)bits_per_char((real_t)(interval_nats / interval_count)));
      interval_nats = 0;
      interval_count = 0;
      double valid_bpc =
          evaluate_split(model, corpus, Split::kValid, cfg.schedule.eval_batch,
                         cfg.schedule.span);
      emit(done, "valid", valid_bpc);
      if (!has_best || valid_bpc < best_valid) {
        best_valid = valid_bpc;
        has_best = true;
        snapshot(model, adam, state, rng, done, best_valid, has_best, cfg.raw_text, corpus)
            .save(best_path);
      }
      snapshot(model, adam, state, rng, done, best_valid, has_best, cfg.raw_text, corpus)
          .save(last_path);
    }
  }
  return cfg.schedule.steps;
}

}  // namespace dctlm
