#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "dctlm/checkpoint.hpp"
#include "dctlm/config.hpp"
#include "dctlm/dct.hpp"
#include "dctlm/model.hpp"
#include "dctlm/trainer.hpp"

namespace fs = std::filesystem;
using namespace dctlm;

namespace {

// --data beats the config; relative paths that don't exist as-is are retried
// under $DCTLM_DATA_DIR.
std::string resolve_data_path(const TrainConfig& cfg, const std::string& override_path) {
  std::string p = override_path.empty() ? cfg.data.path : override_path;
  if (p.empty())
    throw std::runtime_error("no data file: set data.path in the config or pass --data");
  if (!fs::exists(p) && fs::path(p).is_relative()) {
    if (const char* dir = std::getenv("DCTLM_DATA_DIR")) {
      fs::path alt = fs::path(dir) / p;
      if (fs::exists(alt)) return alt.string();
    }
  }
  return p;
}

int cmd_train(const std::string& config_path, const std::string& resume,
              const std::string& data) {
  TrainConfig cfg = TrainConfig::parse_file(config_path);
  train_run(cfg, resolve_data_path(cfg, data), resume, std::cout);
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data,
             const std::string& split_name) {
  Checkpoint ck = Checkpoint::load(ckpt_path);
  TrainConfig cfg = TrainConfig::parse_string(ck.config_text);
  LanguageModel model(spec_from_checkpoint(ck));
  restore_model(model, ck);

  Corpus corpus = Corpus::load(resolve_data_path(cfg, data), cfg.data.split);
  corpus.override_vocab(ck.byte_map, ck.vocab_size, ck.unknown_id);
  Split split = split_from_string(split_name);
  double bpc = evaluate_split(model, corpus, split, cfg.schedule.eval_batch,
                              cfg.schedule.span);
  char line[64];
  std::snprintf(line, sizeof(line), "%s bpc: %.6f", to_string(split), bpc);
  std::cout << line << std::endl;
  return 0;
}

int cmd_count_params(const std::string& config_path) {
  TrainConfig cfg = TrainConfig::parse_file(config_path);
  ModelSpec spec = cfg.model;
  if (spec.vocab == 0) {
    Corpus corpus = Corpus::load(resolve_data_path(cfg, ""), cfg.data.split);
    spec.vocab = corpus.vocab_size();
  }
  std::cout << "architecture: " << to_string(spec.arch) << "\n";
  std::cout << "vocab: " << spec.vocab << "  embedding: " << spec.embed << "  layers:";
  for (int n : spec.layers) std::cout << ' ' << n;
  std::cout << "\n";

  LanguageModel model(spec);
  for (const auto& [name, count] : model.breakdown())
    std::cout << "  " << name << ": " << count << "\n";
  int64_t total = count_params(spec);
  if (model.param_count() != total)
    throw std::logic_error("parameter count mismatch between model and formula");
  std::cout << "trainable parameters: " << total << "\n";
  if (is_fast(spec.arch))
    std::cout << "fast parameters: " << count_fast_params(spec) << "\n";
  return 0;
}

void print_matrix_stats(const Matrix& m) {
  double mn = 0, mx = 0, sum = 0, sq = 0;
  for (size_t i = 0; i < m.size(); ++i) {
    double x = (double)m.flat()[i];
    if (i == 0 || x < mn) mn = x;
    if (i == 0 || x > mx) mx = x;
    sum += x;
    sq += x * x;
  }
  std::printf("  shape: %dx%d  min: %.6g  max: %.6g  mean: %.6g  fro: %.6g\n", m.rows(),
              m.cols(), mn, mx, m.size() ? sum / (double)m.size() : 0.0, std::sqrt(sq));
  if (m.size() <= 64) {
    for (int r = 0; r < m.rows(); ++r) {
      std::printf("  ");
      for (int c = 0; c < m.cols(); ++c) std::printf("% .8g ", (double)m(r, c));
      std::printf("\n");
    }
  }
}

int cmd_inspect(const std::string& ckpt_path, const std::string& tensor, bool do_decompress) {
  Checkpoint ck = Checkpoint::load(ckpt_path);
  if (tensor.empty()) {
    std::printf("step: %lld\n", (long long)ck.step);
    if (ck.has_best) std::printf("best valid bpc: %.6f\n", ck.best_valid_bpc);
    std::printf("vocab size: %d (unknown id %d)\n", ck.vocab_size, (int)ck.unknown_id);
    std::printf("tensors:\n");
    for (const auto& t : ck.tensors) {
      std::printf("  %-32s %-7s %6dx%-6d%s", t.name.c_str(), t.role.c_str(), t.value.rows(),
                  t.value.cols(), t.trainable ? " trainable" : "");
      if (t.plan)
        std::printf("  [coefficients for %dx%d, %s corner]", t.plan->n, t.plan->m,
                    to_string(t.plan->corner));
      std::printf("\n");
    }
    return 0;
  }
  const TensorRecord* rec = nullptr;
  for (const auto& t : ck.tensors)
    if (t.name == tensor && t.role == "param") rec = &t;
  if (!rec) rec = ck.find(tensor);
  if (!rec) {
    std::cerr << "no tensor named '" << tensor << "' in " << ckpt_path << "\n";
    return 1;
  }
  std::printf("%s (%s)\n", rec->name.c_str(), rec->role.c_str());
  if (do_decompress) {
    if (!rec->plan) {
      std::cerr << "tensor '" << tensor << "' is dense; nothing to decompress\n";
      return 1;
    }
    print_matrix_stats(decompress(rec->value, *rec->plan));
  } else {
    print_matrix_stats(rec->value);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"character-level language models with DCT-compressed weights"};
  app.require_subcommand(1);

  std::string config_path, resume, data, ckpt_path, split_name = "test", tensor;
  bool do_decompress = false;

  CLI::App* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", config_path, "run configuration")->required();
  train->add_option("--resume", resume, "checkpoint to resume from");
  train->add_option("--data", data, "corpus file (overrides data.path)");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval->add_option("--data", data, "corpus file (overrides data.path)");
  eval->add_option("--split", split_name, "train|valid|test (default test)");

  CLI::App* count = app.add_subcommand("count-params", "print parameter counts for a config");
  count->add_option("--config", config_path, "run configuration")->required();

  CLI::App* inspect = app.add_subcommand("inspect", "look inside a checkpoint");
  inspect->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  inspect->add_option("--tensor", tensor, "tensor name (omit to list all)");
  inspect->add_flag("--decompress", do_decompress, "decompress a coefficient tensor");

  CLI::App* selftest = app.add_subcommand("codec-selftest", "run the codec invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);  // usage goes to stderr, exit code is nonzero on error
  }

  try {
    if (train->parsed()) return cmd_train(config_path, resume, data);
    if (eval->parsed()) return cmd_eval(ckpt_path, data, split_name);
    if (count->parsed()) return cmd_count_params(config_path);
    if (inspect->parsed()) return cmd_inspect(ckpt_path, tensor, do_decompress);
    if (selftest->parsed()) return codec_selftest(std::cout) == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
