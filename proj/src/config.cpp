#include "dctlm/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dctlm {
namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': expected an integer, got '" + v + "'");
  }
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::string item;
  std::istringstream is(v);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (item.empty())
      throw std::invalid_argument("config key '" + key + "': empty list element in '" + v + "'");
    out.push_back((int)parse_int(key, item));
  }
  if (out.empty()) throw std::invalid_argument("config key '" + key + "': empty list");
  return out;
}

}  // namespace

TrainConfig TrainConfig::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

TrainConfig TrainConfig::parse_string(const std::string& text) {
  TrainConfig cfg;
  cfg.raw_text = text;

  std::set<std::string> seen;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": empty key or value");
    if (!seen.insert(key).second)
      throw std::invalid_argument("config key '" + key + "' appears more than once");

    if (key == "model.architecture") {
      cfg.model.arch = arch_from_string(val);
    } else if (key == "model.layers") {
      cfg.model.layers = parse_int_list(key, val);
    } else if (key == "model.embedding") {
      cfg.model.embed = (int)parse_int(key, val);
    } else if (key == "model.vocab") {
      cfg.model.vocab = (int)parse_int(key, val);
    } else if (key == "model.rate") {
      cfg.model.rate = parse_real(key, val);
    } else if (key == "model.corner") {
      cfg.model.corner = corner_from_string(val);
    } else if (key == "model.budget_mode") {
      cfg.model.budget_mode = budget_mode_from_string(val);
    } else if (key == "model.fast_backward") {
      cfg.model.fast_backward = fast_backward_from_string(val);
    } else if (key == "dropout.ff") {
      cfg.model.dropout_ff = parse_real(key, val);
    } else if (key == "dropout.recurrent") {
      cfg.model.dropout_recurrent = parse_real(key, val);
    } else if (key == "dropout.output") {
      cfg.model.dropout_output = parse_real(key, val);
    } else if (key == "optim.lr") {
      cfg.optim.lr = parse_real(key, val);
    } else if (key == "optim.beta1") {
      cfg.optim.beta1 = parse_real(key, val);
    } else if (key == "optim.beta2") {
      cfg.optim.beta2 = parse_real(key, val);
    } else if (key == "optim.eps") {
      cfg.optim.eps = parse_real(key, val);
    } else if (key == "optim.clip_norm") {
      cfg.optim.clip_norm = parse_real(key, val);
    } else if (key == "schedule.batch") {
      cfg.schedule.batch = (int)parse_int(key, val);
    } else if (key == "schedule.span") {
      cfg.schedule.span = (int)parse_int(key, val);
    } else if (key == "schedule.steps") {
      cfg.schedule.steps = parse_int(key, val);
    } else if (key == "schedule.eval_interval") {
      cfg.schedule.eval_interval = parse_int(key, val);
    } else if (key == "schedule.eval_batch") {
      cfg.schedule.eval_batch = (int)parse_int(key, val);
    } else if (key == "data.path") {
      cfg.data.path = val;
    } else if (key == "data.split") {
      cfg.data.split = SplitSpec::parse(val);
    } else if (key == "run.out_dir") {
      cfg.run.out_dir = val;
    } else if (key == "seed") {
      int64_t s = parse_int(key, val);
      if (s < 0) throw std::invalid_argument("config key 'seed': must be non-negative");
      cfg.seed = (uint64_t)s;
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }

  if (cfg.model.layers.empty())
    throw std::invalid_argument("config is missing model.layers");
  if (cfg.model.embed < 1) throw std::invalid_argument("model.embedding must be >= 1");
  for (int n : cfg.model.layers)
    if (n < 1) throw std::invalid_argument("model.layers entries must be >= 1");
  if (cfg.model.rate < 0.0 || cfg.model.rate >= 1.0)
    throw std::invalid_argument("model.rate must lie in [0, 1)");
  for (double p : {cfg.model.dropout_ff, cfg.model.dropout_recurrent, cfg.model.dropout_output})
    if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout rates must lie in [0, 1)");
  if (cfg.optim.lr <= 0) throw std::invalid_argument("optim.lr must be positive");
  if (cfg.optim.beta1 < 0 || cfg.optim.beta1 >= 1 || cfg.optim.beta2 < 0 || cfg.optim.beta2 >= 1)
    throw std::invalid_argument("optim.beta1/"
                                "beta2 must lie in [0, 1)");
  if (cfg.optim.eps <= 0) throw std::invalid_argument("optim.eps must be positive");
  if (cfg.optim.clip_norm < 0) throw std::invalid_argument("optim.clip_norm must be >= 0");
  if (cfg.schedule.batch < 1 || cfg.schedule.span < 1 || cfg.schedule.eval_batch < 1)
    throw std::invalid_argument("schedule.batch/span/eval_batch must be >= 1");
  if (cfg.schedule.steps < 1) throw std::invalid_argument("schedule.steps must be >= 1");
  if (cfg.schedule.eval_interval < 1)
    throw std::invalid_argument("schedule.eval_interval must be >= 1");
  return cfg;
}

}  // namespace dctlm
