// Acceptance suite. Each criterion prints exactly one [PASS]/[FAIL] line;
// the binary exits 0 only if every criterion passes. Tolerances are fixed
// here, not configurable: loosening one is a code change reviewers can see.

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dctlm/adam.hpp"
#include "dctlm/trainer.hpp"
#include "../tools/synth_corpus.hpp"
#include "testutil.hpp"

using namespace dctlm;
using testutil::TempDir;

namespace {

struct Failure {
  std::string detail;
};

void fail(const std::string& detail) { throw Failure{detail}; }

void require(bool ok, const std::string& detail) {
  if (!ok) fail(detail);
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (real_t& v : m.flat()) v = (real_t)rng.uniform(-1, 1);
  return m;
}

// last bpc logged for a split in a metrics.tsv, and how many such lines
std::pair<double, int> last_bpc(const std::string& log, const std::string& split) {
  std::istringstream is(log);
  std::string line;
  double bpc = -1;
  int count = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string step, sp, val;
    std::getline(ls, step, '\t');
    std::getline(ls, sp, '\t');
    std::getline(ls, val, '\t');
    if (sp == split) {
      bpc = std::stod(val);
      ++count;
    }
  }
  return {bpc, count};
}

double first_bpc(const std::string& log, const std::string& split) {
  std::istringstream is(log);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string step, sp, val;
    std::getline(ls, step, '\t');
    std::getline(ls, sp, '\t');
    std::getline(ls, val, '\t');
    if (sp == split) return std::stod(val);
  }
  return -1;
}

std::string strip_elapsed(const std::string& log) {
  std::istringstream is(log);
  std::string line, out;
  while (std::getline(is, line)) {
    size_t cut = line.rfind('\t');
    out += (line[0] == '#' ? line : line.substr(0, cut)) + "\n";
  }
  return out;
}

std::string train_cfg(const std::string& corpus, const std::string& out_dir, int hidden,
                      int embed, double rate, Corner corner, int batch, int span,
                      int steps, int interval, int seed = 1) {
  std::ostringstream os;
  os << "model.architecture = dct\nmodel.layers = " << hidden
     << "\nmodel.embedding = " << embed << "\nmodel.rate = " << rate
     << "\nmodel.corner = " << (corner == Corner::kLow ? "low" : "high")
     << "\noptim.lr = 0.001\nschedule.batch = " << batch << "\nschedule.span = " << span
     << "\nschedule.steps = " << steps << "\nschedule.eval_interval = " << interval
     << "\nschedule.eval_batch = " << batch << "\ndata.path = " << corpus
     << "\ndata.split = 90/5/5\nrun.out_dir = " << out_dir << "\nseed = " << seed << "\n";
  return os.str();
}

ModelSpec tiny_spec(Arch arch, Corner corner, int hidden, int embed, int vocab,
                    double rate) {
  ModelSpec spec;
  spec.arch = arch;
  spec.corner = corner;
  spec.layers = {hidden};
  spec.embed = embed;
  spec.vocab = vocab;
  spec.rate = rate;
  return spec;
}

void make_batch(int batch, int span, int vocab, uint64_t seed,
                std::vector<int32_t>& inputs, std::vector<int32_t>& targets) {
  Rng rng(seed);
  inputs.resize((size_t)batch * span);
  targets.resize((size_t)batch * span);
  for (auto& v : inputs) v = (int32_t)rng.bounded(vocab);
  for (auto& v : targets) v = (int32_t)rng.bounded(vocab);
}

// ---------------------------------------------------------------------------

// 1. The transform pair is orthonormal, compress/decompress is lossless at
//    rate 0, and synthesis preserves the coefficient norm (Parseval), for
//    every matrix geometry this project uses.
void criterion_codec() {
  const std::pair<int, int> shapes[] = {{1, 1},     {2, 3},    {3, 2},
                                        {8, 8},     {64, 32},  {80, 80},
                                        {154, 154}, {400, 80}, {478, 478}};
  double worst_ortho = 0, worst_round = 0, worst_parseval = 0;
  Rng rng(101);
  for (auto [n, m] : shapes) {
    for (int dim : {n, m}) {
      const Matrix& d = dct_basis(dim);
      Matrix gram = matmul_nt(d, d);
      for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) {
          double err = std::abs((double)gram(r, c) - (r == c ? 1.0 : 0.0));
          if (err > worst_ortho) worst_ortho = err;
        }
    }
    Matrix w = random_matrix(n, m, rng);
    for (Corner corner : {Corner::kLow, Corner::kHigh}) {
      auto plan = PackingPlan::make(n, m, n * m, corner);
      double err = (double)max_abs_diff(w, decompress(compress(w, *plan), *plan));
      if (err > worst_round) worst_round = err;

      // truncated coefficient vector: synthesis must preserve its norm
      auto cut = PackingPlan::make(n, m, std::max(1, (n * m + 2) / 3), corner);
      Matrix g = random_matrix(1, cut->c, rng);
      double diff = std::abs((double)decompress(g, *cut).frobenius_norm() -
                             (double)g.frobenius_norm());
      if (diff > worst_parseval) worst_parseval = diff;
    }
  }
  require(worst_ortho < 1e-10, fmt("orthonormality error %.3g", worst_ortho));
  require(worst_round < 1e-10, fmt("round-trip error %.3g", worst_round));
  require(worst_parseval < 1e-10, fmt("norm drift %.3g", worst_parseval));
  std::printf(
      "[PASS] 1 codec invertibility: orthonormality %.2e, rate-0 round trip %.2e, "
      "norm preservation %.2e\n",
      worst_ortho, worst_round, worst_parseval);
}

// 2. Whole-diagonal coefficient budgets at the two standard fast-weight
//    operating points, and the resulting fast state sizes.
void criterion_budgets() {
  require(coeff_budget(478, 478, 0.99, BudgetMode::kExactFloor) == 2284,
          fmt("raw floor 478@0.99 = %d, want 2284",
              coeff_budget(478, 478, 0.99, BudgetMode::kExactFloor)));
  require(coeff_budget(154, 154, 0.9, BudgetMode::kExactFloor) == 2371,
          fmt("raw floor 154@0.9 = %d, want 2371",
              coeff_budget(154, 154, 0.9, BudgetMode::kExactFloor)));
  const int b478 = coeff_budget(478, 478, 0.99);
  const int b154 = coeff_budget(154, 154, 0.9);
  require(b478 == 2278, fmt("whole-diagonal budget 478@0.99 = %d, want 2278", b478));
  require(b154 == 2346, fmt("whole-diagonal budget 154@0.9 = %d, want 2346", b154));

  ModelSpec s478 = tiny_spec(Arch::kFastTwin, Corner::kHigh, 478, 478, 205, 0.99);
  ModelSpec s154 = tiny_spec(Arch::kFastTwin, Corner::kHigh, 154, 154, 205, 0.9);
  require(count_fast_params(s478) == 4556,
          fmt("fast params 478 = %lld, want 4556", (long long)count_fast_params(s478)));
  require(count_fast_params(s154) == 4692,
          fmt("fast params 154 = %lld, want 4692", (long long)count_fast_params(s154)));
  std::printf(
      "[PASS] 2 coefficient budgets: 478@0.99 -> 2278 (fast 4556), 154@0.9 -> 2346 "
      "(fast 4692)\n");
}

// 3. Trainable-parameter counts of the three reference configurations, from
//    the shipped config files, as exact integers.
void criterion_param_table() {
  const char* dir = std::getenv("DCTLM_CONFIG_DIR");
  require(dir != nullptr, "DCTLM_CONFIG_DIR not set");
  auto count_of = [&](const std::string& name) {
    TrainConfig cfg = TrainConfig::parse_file(std::string(dir) + "/" + name);
    LanguageModel model(cfg.model);
    int64_t formula = count_params(cfg.model);
    require(model.param_count() == formula, "model and formula disagree for " + name);
    return formula;
  };
  const int64_t dense_big = count_of("table_dense_1840.cfg");
  const int64_t dct = count_of("table_dct_rate09.cfg");
  const int64_t dense_small = count_of("table_dense_465.cfg");
  require(dense_big == 47253520, fmt("dense-1840 = %lld, want 47253520", (long long)dense_big));
  require(dct == 4809368, fmt("dct rate-0.9 = %lld, want 4809368", (long long)dct));
  require(dense_small == 4810020,
          fmt("dense-465 = %lld, want 4810020", (long long)dense_small));
  require(std::llabs(dct - dense_small) * 1000 < dense_small,
          "matched pair differs by more than 0.1%");
  std::printf(
      "[PASS] 3 parameter table: 47253520 / 4809368 / 4810020 "
      "(dense-1840 rounds to 47.3M, not 47.0M)\n");
}

// 4. Reverse-mode gradients agree with central finite differences: for a
//    plain feed-forward layer read through the codec, and for the full
//    segment loss of every architecture and both packing corners.
void criterion_gradients() {
  const int B = 2, T = 3, V = 7;
  std::vector<int32_t> inputs, targets;
  make_batch(B, T, V, 77, inputs, targets);

  double ff_err;
  {
    const int n = 7, m = 5;
    auto plan = PackingPlan::make(n, m, coeff_budget(n, m, 0.4), Corner::kHigh);
    Rng rng(19);
    Parameter g{"g", random_matrix(1, plan->c, rng)};
    Parameter b{"b", random_matrix(1, n, rng)};
    Matrix x = random_matrix(3, m, rng);
    auto build = [&](Tape& t) {
      NodeId w = t_decompress(t, bind(t, g), t.constant(dct_basis(n)),
                              t.constant(dct_basis(m)), plan);
      NodeId h = t_tanh(t, t_add_bias(t, t_matmul_nt(t, t.constant(x), w), bind(t, b)));
      return t_sum_all(t, h);
    };
    ff_err = testutil::fd_gradcheck({&g, &b}, build);
    require(ff_err < 1e-5, fmt("feed-forward codec gradient error %.3g", ff_err));
  }

  struct Case {
    const char* label;
    ModelSpec spec;
  };
  std::vector<Case> cases = {
      {"dense", tiny_spec(Arch::kDense, Corner::kHigh, 6, 5, V, 0)},
      {"dct/low", tiny_spec(Arch::kDct, Corner::kLow, 6, 5, V, 0.4)},
      {"dct/high", tiny_spec(Arch::kDct, Corner::kHigh, 6, 5, V, 0.4)},
      {"fast-twin/low", tiny_spec(Arch::kFastTwin, Corner::kLow, 6, 5, V, 0.5)},
      {"fast-twin/high", tiny_spec(Arch::kFastTwin, Corner::kHigh, 6, 5, V, 0.5)},
      {"fast-single/low", tiny_spec(Arch::kFastSingle, Corner::kLow, 6, 5, V, 0.5)},
      {"fast-single/high", tiny_spec(Arch::kFastSingle, Corner::kHigh, 6, 5, V, 0.5)},
  };
  double worst = 0;
  for (auto& c : cases) {
    LanguageModel model(c.spec);
    Rng rng(5);
    model.init(rng);
    LaneState start = model.make_state(B);
    std::vector<Parameter*> trainable;
    for (Parameter* p : model.params())
      if (p->trainable) trainable.push_back(p);
    auto build = [&](Tape& t) {
      LaneState state = start;
      Rng unused(0);
      return model.forward_segment(t, inputs, targets, B, T, state, true, unused).loss;
    };
    double err = testutil::fd_gradcheck(trainable, build);
    if (err > worst) worst = err;
    require(err < 1e-5, fmt("%s gradient error %.3g", c.label, err));
  }
  std::printf(
      "[PASS] 4 gradient check: feed-forward codec %.2e; 7 model variants, worst "
      "%.2e (tol 1e-5)\n",
      ff_err, worst);
}

// 5. The memory-saving backward for the weight-generation cell reproduces the
//    dense-saving backward exactly, while storing only coefficient vectors.
void criterion_fast_backward() {
  const int B = 2, T = 5, n = 8, V = 7;
  std::vector<int32_t> inputs, targets;
  make_batch(B, T, V, 31, inputs, targets);

  auto run = [&](FastBackward mode) {
    ModelSpec spec = tiny_spec(Arch::kFastTwin, Corner::kHigh, n, n, V, 0.5);
    spec.fast_backward = mode;
    LanguageModel model(spec);
    Rng rng(5);
    model.init(rng);
    Tape t;
    LaneState state = model.make_state(B);
    Rng unused(0);
    SegmentResult r = model.forward_segment(t, inputs, targets, B, T, state, true, unused);
    t.backward(r.loss);
    std::map<std::string, Matrix> grads;
    for (Parameter* p : model.params())
      if (p->trainable) grads.emplace(p->name, t.grad(p->node));
    return std::tuple{(double)t.value(r.loss)(0, 0), std::move(grads),
                      r.fast_payload_floats.at(0)};
  };
  auto [loss_n, grads_n, floats_n] = run(FastBackward::kNaive);
  auto [loss_r, grads_r, floats_r] = run(FastBackward::kRecompute);

  require(std::abs(loss_n - loss_r) < 1e-10,
          fmt("losses differ by %.3g", std::abs(loss_n - loss_r)));
  double worst = 0;
  for (auto& [name, g] : grads_n) {
    double d = (double)max_abs_diff(g, grads_r.at(name));
    if (d > worst) worst = d;
  }
  require(worst < 1e-10, fmt("gradients differ by %.3g", worst));

  const int ci = coeff_budget(n, n, 0.5), ch = coeff_budget(n, n, 0.5);
  const size_t naive_want = (size_t)B * T * (n * n + n * n);
  const size_t rec_want = (size_t)B * T * (size_t)(ci + ch);
  require(floats_n == naive_want,
          fmt("naive payload %zu floats, want %zu", floats_n, naive_want));
  require(floats_r == rec_want,
          fmt("recompute payload %zu floats, want %zu", floats_r, rec_want));
  require(rec_want < naive_want, "recompute does not save memory at this rate");
  std::printf(
      "[PASS] 5 fast backward equivalence: grads match to %.2e; payload %zu vs %zu "
      "floats per segment\n",
      worst, floats_r, floats_n);
}

// 6. A 90%-compressed coefficient LSTM trains: after 2000 steps on a 1 MB
//    corpus the train bpc is at most 60% of the uniform-model bpc.
void criterion_training(const std::string& corpus_path, const TempDir& dir) {
  Corpus corpus = Corpus::load(corpus_path, SplitSpec::parse("90/5/5"));
  const double uniform = std::log2((double)corpus.vocab_size());
  const double target = 0.6 * uniform;

  std::string out_dir = dir.file("train_full");
  TrainConfig cfg = TrainConfig::parse_string(
      train_cfg(corpus_path, out_dir, 256, 128, 0.9, Corner::kHigh, 32, 200, 2000, 200));
  train_run(cfg, corpus_path, "", std::cout);

  auto [bpc, lines] = last_bpc(testutil::read_file(out_dir + "/metrics.tsv"), "train");
  require(lines == 10, fmt("expected 10 train log lines, got %d", lines));
  require(bpc > 0 && bpc <= target,
          fmt("train bpc %.4f after 2000 steps, target <= %.4f", bpc, target));
  std::printf(
      "[PASS] 6 training smoke: rate-0.9 model, train bpc %.4f <= %.4f "
      "(uniform %.4f) after 2000 steps\n",
      bpc, target, uniform);
}

// 7. Both packing corners train; they are genuinely different
//    parameterizations (distinct trajectories from the same seed).
void criterion_corners(const std::string& corpus_path, const TempDir& dir) {
  double final_bpc[2], start_bpc[2];
  int i = 0;
  for (Corner corner : {Corner::kLow, Corner::kHigh}) {
    std::string out_dir = dir.file(corner == Corner::kLow ? "corner_low" : "corner_high");
    TrainConfig cfg = TrainConfig::parse_string(
        train_cfg(corpus_path, out_dir, 128, 64, 0.9, corner, 16, 100, 200, 50));
    train_run(cfg, corpus_path, "", std::cout);
    std::string log = testutil::read_file(out_dir + "/metrics.tsv");
    start_bpc[i] = first_bpc(log, "train");
    final_bpc[i] = last_bpc(log, "train").first;
    ++i;
  }
  for (int k = 0; k < 2; ++k) {
    require(std::isfinite(final_bpc[k]), "non-finite bpc");
    require(final_bpc[k] < start_bpc[k] - 0.05,
            fmt("corner %d did not learn: %.4f -> %.4f", k, start_bpc[k], final_bpc[k]));
  }
  require(std::abs(final_bpc[0] - final_bpc[1]) > 1e-9,
          "low and high corners produced identical trajectories");
  std::printf(
      "[PASS] 7 corner comparison: low %.4f -> %.4f, high %.4f -> %.4f over 200 steps\n",
      start_bpc[0], final_bpc[0], start_bpc[1], final_bpc[1]);
}

// 8. Bit-for-bit determinism of the training log (modulo wall time), and
//    interrupt/resume transparency.
void criterion_determinism(const TempDir& dir) {
  std::string corpus_path = dir.file("small.txt");
  testutil::write_file(corpus_path, make_synthetic_corpus(9, 60000));
  auto cfg = [&](const std::string& out, int steps) {
    return TrainConfig::parse_string(
        train_cfg(corpus_path, dir.file(out), 24, 16, 0.5, Corner::kHigh, 4, 32, steps, 5, 3));
  };
  std::ostringstream sink;
  train_run(cfg("det_a", 10), corpus_path, "", sink);
  train_run(cfg("det_b", 10), corpus_path, "", sink);
  train_run(cfg("det_c", 5), corpus_path, "", sink);
  train_run(cfg("det_c", 10), corpus_path, dir.file("det_c/last.ckpt"), sink);

  std::string a = strip_elapsed(testutil::read_file(dir.file("det_a/metrics.tsv")));
  std::string b = strip_elapsed(testutil::read_file(dir.file("det_b/metrics.tsv")));
  std::string c = strip_elapsed(testutil::read_file(dir.file("det_c/metrics.tsv")));
  require(!a.empty(), "empty metrics log");
  require(a == b, "rerun with identical config diverged");
  require(a == c, "interrupted-and-resumed run diverged from the uninterrupted one");
  std::printf(
      "[PASS] 8 determinism and resume: rerun and interrupt/resume logs are identical "
      "(%d lines, wall time excluded)\n",
      (int)std::count(a.begin(), a.end(), '\n'));
}

// 9. The generated fast weights move by more than a rank-1 update between
//    consecutive time steps (unlike classical outer-product fast weights).
void criterion_rank() {
  const int n = 8, B = 2;
  FastRnnLayer layer("f", n, n, 0.0, Corner::kHigh, BudgetMode::kCompleteDiagonals,
                     FastVariant::kTwin);
  Rng rng(5);
  layer.init(rng);
  Tape t;
  Rng unused(0);
  layer.begin_segment(t, FastBackward::kRecompute, false, 0, unused);
  FastLaneState lane = layer.make_state(B);
  FastStateNodes nodes = layer.bind_state(t, lane);
  Rng data(13);

  auto plan = PackingPlan::make(n, n, n * n, Corner::kHigh);
  int min_rank = n + 1;
  Matrix prev_w[2];
  for (int step = 0; step < 3; ++step) {
    layer.step(t, t.constant(random_matrix(B, n, data)), nodes);
    FastLaneState now = layer.make_state(B);
    layer.read_state(t, nodes, now);
    for (int lane_i = 0; lane_i < B; ++lane_i) {
      Matrix g(1, n * n);
      for (int k = 0; k < n * n; ++k) g(0, k) = now.gi(lane_i, k);
      Matrix w = decompress(g, *plan);
      if (step > 0) {
        Matrix delta = w;
        for (size_t k = 0; k < delta.size(); ++k) delta.flat()[k] -= prev_w[lane_i].flat()[k];
        int rank = testutil::matrix_rank(delta);
        if (rank < min_rank) min_rank = rank;
      }
      prev_w[lane_i] = w;
    }
  }
  require(min_rank >= 2, fmt("weight delta rank %d, want >= 2", min_rank));
  std::printf(
      "[PASS] 9 fast update rank: min rank of consecutive weight deltas = %d (8x8, "
      "rank-1 would be 1)\n",
      min_rank);
}

}  // namespace

int main() {
  std::setvbuf(stdout, nullptr, _IONBF, 0);
  int failed = 0;
  auto run = [&](int id, const char* label, const std::function<void()>& body) {
    try {
      body();
    } catch (const Failure& f) {
      std::printf("[FAIL] %d %s: %s\n", id, label, f.detail.c_str());
      ++failed;
    } catch (const std::exception& e) {
      std::printf("[FAIL] %d %s: unexpected exception: %s\n", id, label, e.what());
      ++failed;
    }
  };

  TempDir dir("acceptance");
  std::string corpus_path = dir.file("corpus_1m.txt");
  testutil::write_file(corpus_path, make_synthetic_corpus(7, 1000000));

  run(1, "codec invertibility", criterion_codec);
  run(2, "coefficient budgets", criterion_budgets);
  run(3, "parameter table", criterion_param_table);
  run(4, "gradient check", criterion_gradients);
  run(5, "fast backward equivalence", criterion_fast_backward);
  run(6, "training smoke", [&] { criterion_training(corpus_path, dir); });
  run(7, "corner comparison", [&] { criterion_corners(corpus_path, dir); });
  run(8, "determinism and resume", [&] { criterion_determinism(dir); });
  run(9, "fast update rank", criterion_rank);

  std::printf("acceptance: %d/9 criteria passed\n", 9 - failed);
  return failed == 0 ? 0 : 1;
}
