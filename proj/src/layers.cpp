#include "dctlm/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace dctlm {

NodeId bind(Tape& t, Parameter& p) {
  p.node = p.trainable ? t.leaf(p.value) : t.constant(p.value);
  return p.node;
}

Matrix uniform_matrix(int rows, int cols, real_t bound, Rng& rng) {
  Matrix m(rows, cols);
  for (real_t& v : m.flat()) v = static_cast<real_t>(rng.uniform(-bound, bound));
  return m;
}

NodeId t_dropout(Tape& t, NodeId x, double p, bool train, Rng& rng) {
  if (p < 0 || p >= 1)
    throw std::invalid_argument("dropout: p must be in [0,1), got " + std::to_string(p));
  if (!train || p == 0) return x;
  const Matrix& v = t.value(x);
  Matrix mask(v.rows(), v.cols());
  const real_t keep_scale = static_cast<real_t>(1.0 / (1.0 - p));
  for (real_t& e : mask.flat()) e = rng.bernoulli(p) ? 0 : keep_scale;
  return t_mul(t, x, t.constant(std::move(mask)));
}

// ---------------------------------------------------------------------------

EmbeddingTable::EmbeddingTable(int vocab, int dim) : vocab_(vocab), dim_(dim) {
  if (vocab < 1 || dim < 1)
    throw std::invalid_argument("embedding: vocab and dim must be positive");
  table.name = "embedding";
  table.value = Matrix(vocab, dim);
}

void EmbeddingTable::init(Rng& rng) {
  table.value = uniform_matrix(vocab_, dim_,
                               static_cast<real_t>(1.0 / std::sqrt(double(dim_))), rng);
}

NodeId EmbeddingTable::embed(Tape& t, std::span<const int32_t> ids) const {
  return t_gather_rows(t, table.node, ids);
}

NodeId EmbeddingTable::logits(Tape& t, NodeId h) const {
  return t_matmul_nt(t, h, table.node);
}

// ---------------------------------------------------------------------------

std::pair<NodeId, NodeId> LstmLayerBase::step(Tape& t, NodeId x, NodeId h,
                                              NodeId c) const {
  NodeId pre = t_add_bias(t, t_add(t, t_matmul_nt(t, x, wstack_), t_matmul_nt(t, h, rstack_)),
                          bias_);
  NodeId hc = t_lstm_gates(t, pre, c);
  return {t_slice_cols(t, hc, 0, n_), t_slice_cols(t, hc, n_, 2 * n_)};
}

void LstmLayerBase::finish_segment_weights(Tape& t, std::span<const NodeId> w_gates,
                                           std::span<const NodeId> r_gates,
                                           std::span<const NodeId> biases, bool train,
                                           double recurrent_drop, Rng& rng) {
  wstack_ = t_concat_rows(t, w_gates);
  rstack_ = t_concat_rows(t, r_gates);
  // One recurrent-weight mask per segment, applied to the (decompressed)
  // recurrent matrices, not to activations.
  rstack_ = t_dropout(t, rstack_, recurrent_drop, train, rng);
  bias_ = t_concat_cols(t, biases);
}

// ---------------------------------------------------------------------------

DenseLstmLayer::DenseLstmLayer(std::string name, int hidden, int input)
    : LstmLayerBase(hidden, input) {
  static const char* kGate = "ifoz";
  for (int g = 0; g < 4; ++g) {
    w[g].name = name + ".w_" + kGate[g];
    w[g].value = Matrix(n_, m_);
    r[g].name = name + ".r_" + kGate[g];
    r[g].value = Matrix(n_, n_);
    b[g].name = name + ".b_" + kGate[g];
    b[g].value = Matrix(1, n_);
  }
}

void DenseLstmLayer::init(Rng& rng) {
  const real_t wb = static_cast<real_t>(1.0 / std::sqrt(double(m_)));
  const real_t rb = static_cast<real_t>(1.0 / std::sqrt(double(n_)));
  for (int g = 0; g < 4; ++g) w[g].value = uniform_matrix(n_, m_, wb, rng);
  for (int g = 0; g < 4; ++g) r[g].value = uniform_matrix(n_, n_, rb, rng);
  for (int g = 0; g < 4; ++g) b[g].value.fill(g == 1 ? 1 : 0);  // forget bias 1
}

void DenseLstmLayer::collect(std::vector<Parameter*>& out) {
  for (int g = 0; g < 4; ++g) out.push_back(&w[g]);
  for (int g = 0; g < 4; ++g) out.push_back(&r[g]);
  for (int g = 0; g < 4; ++g) out.push_back(&b[g]);
}

int64_t DenseLstmLayer::param_count() const { return dense_lstm_param_count(n_, m_); }

void DenseLstmLayer::begin_segment(Tape& t, bool train, double recurrent_drop, Rng& rng) {
  NodeId wg[4], rg[4], bg[4];
  for (int g = 0; g < 4; ++g) wg[g] = bind(t, w[g]);
  for (int g = 0; g < 4; ++g) rg[g] = bind(t, r[g]);
  for (int g = 0; g < 4; ++g) bg[g] = bind(t, b[g]);
  finish_segment_weights(t, wg, rg, bg, train, recurrent_drop, rng);
}

// ---------------------------------------------------------------------------

DctLstmLayer::DctLstmLayer(std::string name, int hidden, int input, double rate,
                           Corner corner, BudgetMode mode)
    : LstmLayerBase(hidden, input) {
  plan_in = PackingPlan::make(n_, m_, coeff_budget(n_, m_, rate, mode), corner);
  plan_rec = PackingPlan::make(n_, n_, coeff_budget(n_, n_, rate, mode), corner);
  static const char* kGate = "ifoz";
  for (int g = 0; g < 4; ++g) {
    gw[g].name = name + ".g_w_" + kGate[g];
    gw[g].value = Matrix(1, plan_in->c);
    gw[g].plan = plan_in;
    gr[g].name = name + ".g_r_" + kGate[g];
    gr[g].value = Matrix(1, plan_rec->c);
    gr[g].plan = plan_rec;
    b[g].name = name + ".b_" + kGate[g];
    b[g].value = Matrix(1, n_);
  }
}

void DctLstmLayer::init(Rng& rng) {
  // Generate the conventional time-domain init, then keep its compression.
  const real_t wb = static_cast<real_t>(1.0 / std::sqrt(double(m_)));
  const real_t rb = static_cast<real_t>(1.0 / std::sqrt(double(n_)));
  for (int g = 0; g < 4; ++g)
    gw[g].value = compress(uniform_matrix(n_, m_, wb, rng), *plan_in);
  for (int g = 0; g < 4; ++g)
    gr[g].value = compress(uniform_matrix(n_, n_, rb, rng), *plan_rec);
  for (int g = 0; g < 4; ++g) b[g].value.fill(g == 1 ? 1 : 0);
}

void DctLstmLayer::collect(std::vector<Parameter*>& out) {
  for (int g = 0; g < 4; ++g) out.push_back(&gw[g]);
  for (int g = 0; g < 4; ++g) out.push_back(&gr[g]);
  for (int g = 0; g < 4; ++g) out.push_back(&b[g]);
}

int64_t DctLstmLayer::param_count() const {
  return 4LL * (plan_in->c + plan_rec->c) + 4LL * n_;
}

void DctLstmLayer::begin_segment(Tape& t, bool train, double recurrent_drop, Rng& rng) {
  NodeId dn = t.constant(dct_basis(n_));
  NodeId dm = (m_ == n_) ? dn : t.constant(dct_basis(m_));
  NodeId wg[4], rg[4], bg[4];
  for (int g = 0; g < 4; ++g) wg[g] = t_decompress(t, bind(t, gw[g]), dn, dm, plan_in);
  for (int g = 0; g < 4; ++g) rg[g] = t_decompress(t, bind(t, gr[g]), dn, dn, plan_rec);
  for (int g = 0; g < 4; ++g) bg[g] = bind(t, b[g]);
  finish_segment_weights(t, wg, rg, bg, train, recurrent_drop, rng);
}

int64_t dense_lstm_param_count(int n, int m) {
  return 4LL * (int64_t(n) * m + int64_t(n) * n + n);
}

int64_t dct_lstm_param_count(int n, int m, double rate, BudgetMode mode) {
  return 4LL * (coeff_budget(n, m, rate, mode) + coeff_budget(n, n, rate, mode)) + 4LL * n;
}

}  // namespace dctlm
