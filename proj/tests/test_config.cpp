#include "doctest.h"
#include "dctlm/config.hpp"
#include "testutil.hpp"

using namespace dctlm;

namespace {
const char* kGood = R"(# full example
model.architecture = dct
model.layers = 1840, 1840, 400
model.embedding = 400
model.vocab = 205
model.rate = 0.9          # drop 90% of the spectrum
model.corner = low
model.budget_mode = exact-floor
model.fast_backward = naive

dropout.ff = 0.1
dropout.recurrent = 0.2
dropout.output = 0.4

optim.lr = 0.002
optim.beta1 = 0.8
optim.beta2 = 0.95
optim.eps = 1e-7
optim.clip_norm = 5

schedule.batch = 16
schedule.span = 100
schedule.steps = 5000
schedule.eval_interval = 250
schedule.eval_batch = 8

data.path = corpus.bin
data.split = 90/5/5
run.out_dir = out/run1
seed = 42
)";
}  // namespace

TEST_CASE("a full config parses into the right fields") {
  TrainConfig cfg = TrainConfig::parse_string(kGood);
  CHECK(cfg.model.arch == Arch::kDct);
  CHECK(cfg.model.layers == std::vector<int>{1840, 1840, 400});
  CHECK(cfg.model.embed == 400);
  CHECK(cfg.model.vocab == 205);
  CHECK(cfg.model.rate == 0.9);
  CHECK(cfg.model.corner == Corner::kLow);
  CHECK(cfg.model.budget_mode == BudgetMode::kExactFloor);
  CHECK(cfg.model.fast_backward == FastBackward::kNaive);
  CHECK(cfg.model.dropout_ff == 0.1);
  CHECK(cfg.model.dropout_recurrent == 0.2);
  CHECK(cfg.model.dropout_output == 0.4);
  CHECK(cfg.optim.lr == 0.002);
  CHECK(cfg.optim.beta1 == 0.8);
  CHECK(cfg.optim.beta2 == 0.95);
  CHECK(cfg.optim.eps == 1e-7);
  CHECK(cfg.optim.clip_norm == 5);
  CHECK(cfg.schedule.batch == 16);
  CHECK(cfg.schedule.span == 100);
  CHECK(cfg.schedule.steps == 5000);
  CHECK(cfg.schedule.eval_interval == 250);
  CHECK(cfg.schedule.eval_batch == 8);
  CHECK(cfg.data.path == "corpus.bin");
  CHECK(cfg.data.split.train == 90);
  CHECK(cfg.data.split.valid == 5);
  CHECK(cfg.run.out_dir == "out/run1");
  CHECK(cfg.seed == 42);
  CHECK(cfg.raw_text == kGood);  // verbatim echo for checkpoints
}

TEST_CASE("defaults fill everything except the model shape") {
  TrainConfig cfg = TrainConfig::parse_string("model.layers = 8\nmodel.embedding = 4\n");
  CHECK(cfg.model.arch == Arch::kDense);
  CHECK(cfg.model.vocab == 0);  // resolved from the corpus at train time
  CHECK(cfg.model.corner == Corner::kHigh);
  CHECK(cfg.model.budget_mode == BudgetMode::kCompleteDiagonals);
  CHECK(cfg.model.fast_backward == FastBackward::kRecompute);
  CHECK(cfg.optim.lr == 0.001);
  CHECK(cfg.optim.beta1 == 0.9);
  CHECK(cfg.optim.beta2 == 0.999);
  CHECK(cfg.optim.eps == 1e-8);
  CHECK(cfg.optim.clip_norm == 0);
  CHECK(cfg.schedule.batch == 32);
  CHECK(cfg.schedule.span == 200);
  CHECK(cfg.model.dropout_ff == 0);
}

TEST_CASE("unknown keys are rejected, not ignored") {
  CHECK_THROWS_WITH_AS(TrainConfig::parse_string("model.layers = 8\nmodel.hidden = 3\n"),
                       "unknown config key 'model.hidden'", std::invalid_argument);
  CHECK_THROWS_AS(TrainConfig::parse_string("model.layers = 8\nlr = 0.1\n"),
                  std::invalid_argument);
}

TEST_CASE("malformed values name the key") {
  CHECK_THROWS_AS(TrainConfig::parse_string("model.layers = abc\n"), std::invalid_argument);
  CHECK_THROWS_AS(TrainConfig::parse_string("model.layers = 8\noptim.lr = fast\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(TrainConfig::parse_string("model.layers = 8\nschedule.batch = 2.5\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(TrainConfig::parse_string("model.layers\n"), std::invalid_argument);
  CHECK_THROWS_AS(TrainConfig::parse_string("model.layers = \n"), std::invalid_argument);
  CHECK_THROWS_AS(TrainConfig::parse_string("model.layers = 8\nmodel.layers = 9\n"),
                  std::invalid_argument);
}

TEST_CASE("range validation") {
  auto base = [](const std::string& extra) {
    return TrainConfig::parse_string("model.layers = 8\nmodel.embedding = 4\n" + extra);
  };
  CHECK_THROWS_AS(base("model.rate = 1.0\n"), std::invalid_argument);
  CHECK_THROWS_AS(base("model.rate = -0.2\n"), std::invalid_argument);
  CHECK_THROWS_AS(base("dropout.ff = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(base("optim.lr = 0\n"), std::invalid_argument);
  CHECK_THROWS_AS(base("optim.beta1 = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(base("schedule.steps = 0\n"), std::invalid_argument);
  CHECK_THROWS_AS(base("schedule.batch = 0\n"), std::invalid_argument);
  CHECK_THROWS_AS(base("seed = -1\n"), std::invalid_argument);
  CHECK_THROWS_AS(TrainConfig::parse_string("model.embedding = 4\n"),
                  std::invalid_argument);  // layers missing
  CHECK_NOTHROW(base("model.rate = 0.999\n"));
}

TEST_CASE("architecture and enum strings") {
  auto with_arch = [](const std::string& a) {
    return TrainConfig::parse_string("model.layers = 8\nmodel.embedding = 4\n"
                                     "model.architecture = " + a + "\n");
  };
  CHECK(with_arch("baseline-dense").model.arch == Arch::kDense);
  CHECK(with_arch("dct").model.arch == Arch::kDct);
  CHECK(with_arch("fast-twin").model.arch == Arch::kFastTwin);
  CHECK(with_arch("fast-single").model.arch == Arch::kFastSingle);
  CHECK_THROWS_AS(with_arch("transformer"), std::invalid_argument);
}

TEST_CASE("file parsing matches string parsing") {
  testutil::TempDir dir("config");
  std::string path = dir.file("run.cfg");
  testutil::write_file(path, kGood);
  TrainConfig a = TrainConfig::parse_file(path);
  TrainConfig b = TrainConfig::parse_string(kGood);
  CHECK(a.raw_text == b.raw_text);
  CHECK(a.model.layers == b.model.layers);
  CHECK_THROWS_AS(TrainConfig::parse_file(dir.file("absent.cfg")), std::runtime_error);
}
