#include "dctlm/model.hpp"

#include <cmath>
#include <stdexcept>

namespace dctlm {

Arch arch_from_string(std::string_view s) {
  if (s == "baseline-dense") return Arch::kDense;
  if (s == "dct") return Arch::kDct;
  if (s == "fast-twin") return Arch::kFastTwin;
  if (s == "fast-single") return Arch::kFastSingle;
  throw std::invalid_argument(
      "architecture must be one of baseline-dense|dct|fast-twin|fast-single, got '" +
      std::string(s) + "'");
}

const char* to_string(Arch a) {
  switch (a) {
    case Arch::kDense: return "baseline-dense";
    case Arch::kDct: return "dct";
    case Arch::kFastTwin: return "fast-twin";
    case Arch::kFastSingle: return "fast-single";
  }
  return "?";
}

namespace {

void validate(const ModelSpec& s) {
  if (s.vocab < 1) throw std::invalid_argument("model: vocab must be >= 1");
  if (s.embed < 1) throw std::invalid_argument("model: embedding size must be >= 1");
  if (s.layers.empty()) throw std::invalid_argument("model: need at least one layer");
  for (int n : s.layers)
    if (n < 1) throw std::invalid_argument("model: layer sizes must be >= 1");
  if (s.rate < 0 || s.rate > 1) throw std::invalid_argument("model: rate must be in [0,1]");
}

}  // namespace

LanguageModel::LanguageModel(ModelSpec spec)
    : spec_(std::move(spec)), emb_(([&] { validate(spec_); return spec_.vocab; })(), spec_.embed) {
  int input = spec_.embed;
  for (size_t i = 0; i < spec_.layers.size(); ++i) {
    const int n = spec_.layers[i];
    const std::string name = "layer" + std::to_string(i);
    switch (spec_.arch) {
      case Arch::kDense:
        lstm_.push_back(std::make_unique<DenseLstmLayer>(name, n, input));
        break;
      case Arch::kDct:
        lstm_.push_back(std::make_unique<DctLstmLayer>(name, n, input, spec_.rate,
                                                       spec_.corner, spec_.budget_mode));
        break;
      case Arch::kFastTwin:
      case Arch::kFastSingle:
        fast_.push_back(std::make_unique<FastRnnLayer>(
            name, n, input, spec_.rate, spec_.corner, spec_.budget_mode,
            spec_.arch == Arch::kFastTwin ? FastVariant::kTwin : FastVariant::kSingle));
        break;
    }
    input = n;
  }
  has_proj_ = spec_.layers.back() != spec_.embed;
  if (has_proj_) {
    proj_.name = "projection";
    proj_.value = Matrix(spec_.layers.back(), spec_.embed);
  }
}

void LanguageModel::init(Rng& rng) {
  emb_.init(rng);
  for (auto& l : lstm_) l->init(rng);
  for (auto& f : fast_) f->init(rng);
  if (has_proj_)
    proj_.value = uniform_matrix(
        spec_.layers.back(), spec_.embed,
        static_cast<real_t>(1.0 / std::sqrt(double(spec_.layers.back()))), rng);
}

std::vector<Parameter*> LanguageModel::params() {
  std::vector<Parameter*> out;
  out.push_back(&emb_.table);
  for (auto& l : lstm_) l->collect(out);
  for (auto& f : fast_) f->collect(out);
  if (has_proj_) out.push_back(&proj_);
  return out;
}

int64_t LanguageModel::param_count() const { return count_params(spec_); }
int64_t LanguageModel::fast_param_count() const { return count_fast_params(spec_); }

std::vector<std::pair<std::string, int64_t>> LanguageModel::breakdown() const {
  std::vector<std::pair<std::string, int64_t>> out;
  out.emplace_back("embedding", int64_t(spec_.vocab) * spec_.embed);
  int input = spec_.embed;
  for (size_t i = 0; i < spec_.layers.size(); ++i) {
    const int n = spec_.layers[i];
    int64_t count = 0;
    switch (spec_.arch) {
      case Arch::kDense: count = dense_lstm_param_count(n, input); break;
      case Arch::kDct: count = dct_lstm_param_count(n, input, spec_.rate, spec_.budget_mode); break;
      case Arch::kFastTwin:
      case Arch::kFastSingle: count = fast_[i]->param_count(); break;
    }
    out.emplace_back("layer" + std::to_string(i), count);
    input = n;
  }
  if (has_proj_)
    out.emplace_back("projection", int64_t(spec_.layers.back()) * spec_.embed);
  return out;
}

LaneState LanguageModel::make_state(int batch) const {
  LaneState s;
  for (auto& l : lstm_) {
    s.h.emplace_back(batch, l->hidden());
    s.c.emplace_back(batch, l->hidden());
  }
  for (auto& f : fast_) s.fast.push_back(f->make_state(batch));
  return s;
}

SegmentResult LanguageModel::forward_segment(Tape& t, std::span<const int32_t> inputs,
                                             std::span<const int32_t> targets, int batch,
                                             int span, LaneState& state, bool train,
                                             Rng& rng) {
  const int B = batch, T = span;
  if (inputs.size() != size_t(B) * T || targets.size() != size_t(B) * T)
    throw std::invalid_argument("forward_segment: inputs/targets must be B*T ids");
  if (state.h.size() != lstm_.size() || state.fast.size() != fast_.size())
    throw std::invalid_argument("forward_segment: state does not match the model");

  emb_.begin_segment(t);
  for (auto& l : lstm_) l->begin_segment(t, train, spec_.dropout_recurrent, rng);
  for (auto& f : fast_) f->begin_segment(t, spec_.fast_backward, train,
                                         spec_.dropout_recurrent, rng);
  NodeId proj_node = kNoNode;
  if (has_proj_) proj_node = bind(t, proj_);

  // Carried states enter as constants: no gradient crosses segment bounds.
  std::vector<NodeId> h_nodes, c_nodes;
  for (size_t i = 0; i < lstm_.size(); ++i) {
    h_nodes.push_back(t.constant(state.h[i]));
    c_nodes.push_back(t.constant(state.c[i]));
  }
  std::vector<FastStateNodes> fast_nodes;
  for (size_t i = 0; i < fast_.size(); ++i)
    fast_nodes.push_back(fast_[i]->bind_state(t, state.fast[i]));

  std::vector<int32_t> col(B);
  NodeId loss_sum = kNoNode;
  for (int step = 0; step < T; ++step) {
    for (int b = 0; b < B; ++b) col[b] = inputs[size_t(b) * T + step];
    NodeId x = emb_.embed(t, col);
    for (size_t i = 0; i < lstm_.size(); ++i) {
      if (i > 0) x = t_dropout(t, x, spec_.dropout_ff, train, rng);
      auto [h2, c2] = lstm_[i]->step(t, x, h_nodes[i], c_nodes[i]);
      h_nodes[i] = h2;
      c_nodes[i] = c2;
      x = h2;
    }
    for (size_t i = 0; i < fast_.size(); ++i) {
      if (i > 0) x = t_dropout(t, x, spec_.dropout_ff, train, rng);
      x = fast_[i]->step(t, x, fast_nodes[i]);
    }
    NodeId out = t_dropout(t, x, spec_.dropout_output, train, rng);
    if (has_proj_) out = t_matmul(t, out, proj_node);
    NodeId logits = emb_.logits(t, out);
    for (int b = 0; b < B; ++b) col[b] = targets[size_t(b) * T + step];
    NodeId lt = t_lm_loss(t, logits, col);
    loss_sum = (loss_sum == kNoNode) ? lt : t_add(t, loss_sum, lt);
  }
  SegmentResult res;
  res.loss = t_scale(t, loss_sum, static_cast<real_t>(1.0 / T));

  for (size_t i = 0; i < lstm_.size(); ++i) {
    state.h[i] = t.value(h_nodes[i]);
    state.c[i] = t.value(c_nodes[i]);
  }
  for (size_t i = 0; i < fast_.size(); ++i) {
    fast_[i]->read_state(t, fast_nodes[i], state.fast[i]);
    res.fast_payload_floats.push_back(fast_[i]->segment_payload_floats(t));
  }
  return res;
}

int64_t count_params(const ModelSpec& spec) {
  validate(spec);
  int64_t total = int64_t(spec.vocab) * spec.embed;
  int input = spec.embed;
  for (int n : spec.layers) {
    switch (spec.arch) {
      case Arch::kDense:
        total += dense_lstm_param_count(n, input);
        break;
      case Arch::kDct:
        total += dct_lstm_param_count(n, input, spec.rate, spec.budget_mode);
        break;
      case Arch::kFastTwin: {
        const int ci = coeff_budget(n, input, spec.rate, spec.budget_mode);
        const int ch = coeff_budget(n, n, spec.rate, spec.budget_mode);
        total += dense_lstm_param_count(ci, input) + dense_lstm_param_count(ch, input);
        break;
      }
      case Arch::kFastSingle: {
        const int ci = coeff_budget(n, input, spec.rate, spec.budget_mode);
        const int ch = coeff_budget(n, n, spec.rate, spec.budget_mode);
        total += dense_lstm_param_count(ci + ch, input);
        break;
      }
    }
    input = n;
  }
  if (spec.layers.back() != spec.embed) total += int64_t(spec.layers.back()) * spec.embed;
  return total;
}

int64_t count_fast_params(const ModelSpec& spec) {
  if (!is_fast(spec.arch)) return 0;
  int64_t total = 0;
  int input = spec.embed;
  for (int n : spec.layers) {
    total += coeff_budget(n, input, spec.rate, spec.budget_mode) +
             coeff_budget(n, n, spec.rate, spec.budget_mode);
    input = n;
  }
  return total;
}

}  // namespace dctlm
