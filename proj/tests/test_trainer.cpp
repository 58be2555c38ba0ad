#include <cmath>
#include <sstream>

#include "doctest.h"
#include "dctlm/adam.hpp"
#include "dctlm/trainer.hpp"
#include "../tools/synth_corpus.hpp"
#include "testutil.hpp"

using namespace dctlm;

static Parameter scalar_param(const char* name, double v) {
  Parameter p;
  p.name = name;
  p.value = Matrix::scalar((real_t)v);
  return p;
}

TEST_CASE("adam: first update against the closed form") {
  // With gradient exactly 1 at t = 1: m-hat = 1, v-hat = 1, so the update is
  // lr / (1 + eps) regardless of beta values.
  Parameter x = scalar_param("x", 0.5);
  Adam adam(0.001, 0.9, 0.999, 1e-8);
  Tape t;
  bind(t, x);
  t.backward(t_sum_all(t, x.node));  // d(sum)/dx = 1
  adam.step({&x}, t, 1);
  const double expect = 0.5 - 0.001 / (1.0 + 1e-8);
  CHECK((double)x.value(0, 0) == doctest::Approx(expect).epsilon(1e-14));

  // second identical step: moments stay aligned, same effective update
  Tape t2;
  bind(t2, x);
  t2.backward(t_sum_all(t2, x.node));
  adam.step({&x}, t2, 2);
  CHECK((double)x.value(0, 0) ==
        doctest::Approx(expect - 0.001 / (1.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adam: zero gradient leaves the parameter untouched") {
  Parameter x = scalar_param("x", 2.0);
  Parameter y = scalar_param("y", 3.0);
  Adam adam(0.01, 0.9, 0.999, 1e-8);
  Tape t;
  bind(t, x);
  bind(t, y);
  // loss depends only on x
  t.backward(t_sum_all(t, t_mul(t, x.node, x.node)));
  adam.step({&x, &y}, t, 1);
  CHECK((double)y.value(0, 0) == 3.0);
  CHECK((double)x.value(0, 0) != 2.0);
}

TEST_CASE("adam: global norm clipping rescales before the moments see it") {
  auto run = [](double clip, double gx, double gy) {
    Parameter x = scalar_param("x", 0);
    Parameter y = scalar_param("y", 0);
    Adam adam(0.1, 0.9, 0.999, 1e-8, clip);
    Tape t;
    bind(t, x);
    bind(t, y);
    NodeId loss = t_add(t, t_scale(t, x.node, (real_t)gx), t_scale(t, y.node, (real_t)gy));
    t.backward(t_sum_all(t, loss));
    adam.step({&x, &y}, t, 1);
    return std::pair{(double)x.value(0, 0), (double)y.value(0, 0)};
  };
  // grads (3,4): norm 5, clip 1 -> effective (0.6, 0.8). First-step Adam
  // update direction is sign(g) with magnitude ~lr, so compare against the
  // unclipped run with grads already scaled by 0.2.
  auto clipped = run(1.0, 3, 4);
  auto manual = run(0.0, 0.6, 0.8);
  CHECK(clipped.first == doctest::Approx(manual.first).epsilon(1e-12));
  CHECK(clipped.second == doctest::Approx(manual.second).epsilon(1e-12));
  // below the threshold nothing changes
  auto loose = run(100.0, 3, 4);
  auto free_run = run(0.0, 3, 4);
  CHECK(loose.first == doctest::Approx(free_run.first).epsilon(1e-12));
}

TEST_CASE("adam: non-finite gradients abort with the tensor's name") {
  Parameter x = scalar_param("weights.w_i", 1e308);
  Adam adam(0.001, 0.9, 0.999, 1e-8);
  Tape t;
  bind(t, x);
  t.backward(t_sum_all(t, t_mul(t, x.node, x.node)));  // grad 2e308 overflows
  try {
    adam.step({&x}, t, 1);
    FAIL("expected a runtime_error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("weights.w_i") != std::string::npos);
  }
}

TEST_CASE("an untrained model scores exactly log2(V) everywhere") {
  std::string text;
  for (int i = 0; i < 200; ++i) text += (char)('a' + i % 4);
  Corpus corpus = Corpus::from_bytes({text.begin(), text.end()}, SplitSpec::parse("1/0/0"));
  ModelSpec spec;
  spec.arch = Arch::kDense;
  spec.vocab = corpus.vocab_size();
  spec.embed = 4;
  spec.layers = {6};
  LanguageModel model(spec);  // all-zero parameters -> uniform logits
  double bpc = evaluate_split(model, corpus, Split::kTrain, 2, 10);
  CHECK(bpc == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("a small LSTM memorizes a 100-byte loop") {
  std::string unit = "the cat sat. ";
  std::string text;
  while (text.size() < 100) text += unit;
  text.resize(100);
  Corpus corpus = Corpus::from_bytes({text.begin(), text.end()}, SplitSpec::parse("1/0/0"));

  ModelSpec spec;
  spec.arch = Arch::kDense;
  spec.vocab = corpus.vocab_size();
  spec.embed = 16;
  spec.layers = {32};
  LanguageModel model(spec);
  Rng rng(1);
  model.init(rng);
  auto params = model.params();
  Adam adam(0.01, 0.9, 0.999, 1e-8);
  BatchStream stream(corpus, Split::kTrain, 1, 25);
  LaneState state = model.make_state(1);
  Tape tape;
  tape.set_economy(true);
  double bpc = 1e9;
  for (int64_t step = 0; step < 400; ++step) {
    Batch b = stream.batch(step);
    tape.reset();
    SegmentResult r =
        model.forward_segment(tape, b.inputs, b.targets, 1, 25, state, true, rng);
    tape.backward(r.loss);
    adam.step(params, tape, step + 1);
    bpc = (double)bits_per_char(tape.value(r.loss)(0, 0));
  }
  CHECK(bpc < 0.15);
}

TEST_CASE("five updates reduce the loss for every architecture") {
  const int B = 2, T = 8, V = 5;
  Rng data(9);
  std::vector<int32_t> inputs((size_t)B * T), targets((size_t)B * T);
  for (auto& v : inputs) v = (int32_t)data.bounded(V);
  for (size_t i = 0; i < targets.size(); ++i)
    targets[i] = (i + 1 < targets.size()) ? inputs[i + 1] : 0;

  for (Arch arch : {Arch::kDense, Arch::kDct, Arch::kFastTwin, Arch::kFastSingle}) {
    ModelSpec spec;
    spec.arch = arch;
    spec.vocab = V;
    spec.embed = 6;
    spec.layers = {6};
    spec.rate = is_fast(arch) ? 0.5 : 0.25;
    LanguageModel model(spec);
    Rng rng(3);
    model.init(rng);
    auto params = model.params();
    Adam adam(0.01, 0.9, 0.999, 1e-8);
    Tape tape;
    double first = 0, last = 0;
    for (int step = 0; step < 5; ++step) {
      LaneState state = model.make_state(B);  // same batch, fresh state
      tape.reset();
      SegmentResult r =
          model.forward_segment(tape, inputs, targets, B, T, state, true, rng);
      tape.backward(r.loss);
      adam.step(params, tape, step + 1);
      double loss = (double)tape.value(r.loss)(0, 0);
      if (step == 0) first = loss;
      last = loss;
    }
    INFO("arch " << to_string(arch));
    CHECK(last < first);
  }
}

TEST_CASE("coefficient gradient equals the transformed dense gradient at rate 0") {
  const int n = 5, m = 3, B = 2;
  DenseLstmLayer dense("L", n, m);
  DctLstmLayer dct("L", n, m, 0.0, Corner::kHigh, BudgetMode::kCompleteDiagonals);
  {
    Rng r(11);
    dense.init(r);
  }
  {
    Rng r(11);
    dct.init(r);
  }
  Rng data(12);
  Matrix xv(B, m), hv(B, n), cv(B, n);
  for (real_t& v : xv.flat()) v = (real_t)data.uniform(-1, 1);
  for (real_t& v : hv.flat()) v = (real_t)data.uniform(-1, 1);
  for (real_t& v : cv.flat()) v = (real_t)data.uniform(-1, 1);

  auto grads_of = [&](LstmLayerBase& layer) {
    Tape t;
    Rng seg(1);
    layer.begin_segment(t, false, 0, seg);
    auto [h1, c1] = layer.step(t, t.constant(xv), t.constant(hv), t.constant(cv));
    t.backward(t_sum_all(t, h1));
    std::vector<Parameter*> ps;
    layer.collect(ps);
    std::vector<Matrix> out;
    for (Parameter* p : ps) out.push_back(t.grad(p->node));
    return out;
  };
  auto gd = grads_of(dense);  // w[4], r[4], b[4]
  auto gq = grads_of(dct);    // gw[4], gr[4], b[4]

  // chain rule through the synthesis: dL/dcoeff = gather(D_n dL/dW D_m)
  const Matrix& dn = dct_basis(n);
  const Matrix& dm = dct_basis(m);
  auto plan_in = dct.plan_in;
  for (int g = 0; g < 4; ++g) {
    Matrix spec_grad = matmul(matmul(dn, gd[(size_t)g]), dm);
    Matrix expect(1, plan_in->c);
    for (int k = 0; k < plan_in->c; ++k)
      expect(0, k) = spec_grad(plan_in->rows[(size_t)k], plan_in->cols[(size_t)k]);
    CHECK(max_abs_diff(expect, gq[(size_t)g]) < 1e-10);
  }
}

TEST_CASE("train_run: deterministic, resumable, vocab-checked") {
  testutil::TempDir dir("trainer");
  std::string corpus_path = dir.file("corpus.txt");
  testutil::write_file(corpus_path, make_synthetic_corpus(3, 20000));

  auto cfg_text = [&](const std::string& out_dir, int steps) {
    std::ostringstream os;
    os << "model.architecture = dct\nmodel.layers = 12\nmodel.embedding = 8\n"
       << "model.rate = 0.5\noptim.lr = 0.005\nschedule.batch = 4\nschedule.span = 16\n"
       << "schedule.steps = " << steps << "\nschedule.eval_interval = 3\n"
       << "schedule.eval_batch = 4\ndata.path = " << corpus_path << "\n"
       << "data.split = 80/10/10\nrun.out_dir = " << dir.file(out_dir) << "\nseed = 5\n";
    return os.str();
  };
  auto strip_elapsed = [](const std::string& log) {
    std::istringstream is(log);
    std::string line, out;
    while (std::getline(is, line)) {
      size_t cut = line.rfind('\t');
      out += (line[0] == '#' ? line : line.substr(0, cut)) + "\n";
    }
    return out;
  };

  std::ostringstream sink;
  train_run(TrainConfig::parse_string(cfg_text("run_a", 6)), corpus_path, "", sink);
  train_run(TrainConfig::parse_string(cfg_text("run_b", 6)), corpus_path, "", sink);
  std::string log_a = testutil::read_file(dir.file("run_a/metrics.tsv"));
  std::string log_b = testutil::read_file(dir.file("run_b/metrics.tsv"));
  CHECK(strip_elapsed(log_a) == strip_elapsed(log_b));
  CHECK(log_a.find("train") != std::string::npos);
  CHECK(log_a.find("valid") != std::string::npos);

  // interrupted at 3, resumed to 6: the log continues identically
  train_run(TrainConfig::parse_string(cfg_text("run_c", 3)), corpus_path, "", sink);
  train_run(TrainConfig::parse_string(cfg_text("run_c", 6)), corpus_path,
            dir.file("run_c/last.ckpt"), sink);
  std::string log_c = testutil::read_file(dir.file("run_c/metrics.tsv"));
  CHECK(strip_elapsed(log_a) == strip_elapsed(log_c));

  // a vocab pin that disagrees with the corpus is an error
  std::string bad = cfg_text("run_d", 2) + "model.vocab = 7\n";
  CHECK_THROWS_AS(train_run(TrainConfig::parse_string(bad), corpus_path, "", sink),
                  std::runtime_error);

  // resuming under an incompatible config is an error
  std::string other = cfg_text("run_e", 6);
  other.replace(other.find("rate = 0.5"), 10, "rate = 0.6");
  CHECK_THROWS_AS(train_run(TrainConfig::parse_string(other), corpus_path,
                            dir.file("run_c/last.ckpt"), sink),
                  std::runtime_error);

  // best.ckpt exists and evaluates to the recorded number
  Checkpoint best = Checkpoint::load(dir.file("run_a/best.ckpt"));
  CHECK(best.has_best);
  LanguageModel model(spec_from_checkpoint(best));
  restore_model(model, best);
  Corpus corpus = Corpus::load(corpus_path, SplitSpec::parse("80/10/10"));
  corpus.override_vocab(best.byte_map, best.vocab_size, best.unknown_id);
  double bpc = evaluate_split(model, corpus, Split::kValid, 4, 16);
  CHECK(bpc == doctest::Approx(best.best_valid_bpc).epsilon(1e-9));
}
