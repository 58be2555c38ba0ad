#include "dctlm/fast_weights.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dctlm {

FastBackward fast_backward_from_string(std::string_view s) {
  if (s == "recompute") return FastBackward::kRecompute;
  if (s == "naive") return FastBackward::kNaive;
  throw std::invalid_argument("fast backward mode must be 'recompute' or 'naive', got '" +
                              std::string(s) + "'");
}

const char* to_string(FastBackward m) {
  return m == FastBackward::kRecompute ? "recompute" : "naive";
}

namespace {

struct FastCellBox {
  PlanPtr plan_in, plan_rec;
};

constexpr int64_t kModeNaive = 0;
constexpr int64_t kModeRecompute = 1;

Matrix row_of(const Matrix& m, int r) {
  Matrix out(1, m.cols());
  for (int c = 0; c < m.cols(); ++c) out(0, c) = m(r, c);
  return out;
}

// h_t = tanh(W_t x_t + R_t h_{t-1}) with per-lane weights decompressed from
// the per-lane coefficient rows. Inputs: g_i (B x c_i), g_h (B x c_h),
// x (B x m), h_prev (B x n). The payload depends on the mode: dense weights
// (naive) or coefficient copies (recompute).
OpId fast_cell_op() {
  static OpId id = register_custom_op(OpDef{
      "fast_cell", 4, PayloadPolicy::kSavesMats,
      [](std::span<const Matrix* const> in, OpPayload& p) {
        const Matrix& gi = *in[0];
        const Matrix& gh = *in[1];
        const Matrix& x = *in[2];
        const Matrix& hp = *in[3];
        const auto* box = static_cast<const FastCellBox*>(p.box.get());
        const PackingPlan& pi = *box->plan_in;
        const PackingPlan& ph = *box->plan_rec;
        const int B = x.rows(), n = pi.n, m = pi.m;
        if (gi.rows() != B || gh.rows() != B || hp.rows() != B || gi.cols() != pi.c ||
            gh.cols() != ph.c || x.cols() != m || hp.cols() != n || ph.n != n || ph.m != n) {
          std::ostringstream os;
          os << "fast_cell: inconsistent shapes (gi " << gi.rows() << "x" << gi.cols()
             << ", gh " << gh.rows() << "x" << gh.cols() << ", x " << x.rows() << "x"
             << x.cols() << ", h " << hp.rows() << "x" << hp.cols() << ")";
          throw std::invalid_argument(os.str());
        }
        const bool naive = p.ints.at(0) == kModeNaive;
        Matrix y(B, n);
        Matrix wall, rall;
        if (naive) {
          wall = Matrix(B * n, m);
          rall = Matrix(B * n, n);
        }
        for (int b = 0; b < B; ++b) {
          Matrix w = decompress(row_of(gi, b), pi);
          Matrix r = decompress(row_of(gh, b), ph);
          for (int i = 0; i < n; ++i) {
            real_t acc = 0;
            for (int j = 0; j < m; ++j) acc += w(i, j) * x(b, j);
            for (int j = 0; j < n; ++j) acc += r(i, j) * hp(b, j);
            y(b, i) = std::tanh(acc);
          }
          if (naive) {
            for (int i = 0; i < n; ++i) {
              for (int j = 0; j < m; ++j) wall(b * n + i, j) = w(i, j);
              for (int j = 0; j < n; ++j) rall(b * n + i, j) = r(i, j);
            }
          }
        }
        if (naive) {
          p.mats.push_back(std::move(wall));
          p.mats.push_back(std::move(rall));
        } else {
          p.mats.push_back(gi);
          p.mats.push_back(gh);
        }
        return y;
      },
      [](const BackwardArgs& a) {
        const Matrix& x = *a.inputs[2];
        const Matrix& hp = *a.inputs[3];
        const auto* box = static_cast<const FastCellBox*>(a.payload.box.get());
        const PackingPlan& pi = *box->plan_in;
        const PackingPlan& ph = *box->plan_rec;
        const int B = x.rows(), n = pi.n, m = pi.m;
        const bool naive = a.payload.ints.at(0) == kModeNaive;
        const Matrix& dn = dct_basis(n);
        const Matrix& dm = dct_basis(m);

        std::vector<Matrix> adj(4);
        if (a.input_needs_grad[0]) adj[0] = Matrix(B, pi.c);
        if (a.input_needs_grad[1]) adj[1] = Matrix(B, ph.c);
        if (a.input_needs_grad[2]) adj[2] = Matrix(B, m);
        if (a.input_needs_grad[3]) adj[3] = Matrix(B, n);

        std::vector<real_t> s(n), u(n), vi(m), vh(n);
        for (int b = 0; b < B; ++b) {
          for (int i = 0; i < n; ++i) {
            real_t y = a.output(b, i);
            s[i] = a.grad(b, i) * (1 - y * y);
          }
          // u = D_n * s; the adjoint of a packed cell (r, c) is u[r] * v[c].
          for (int r = 0; r < n; ++r) {
            real_t acc = 0;
            for (int i = 0; i < n; ++i) acc += dn(r, i) * s[i];
            u[r] = acc;
          }
          if (a.input_needs_grad[0]) {
            for (int c = 0; c < m; ++c) {
              real_t acc = 0;
              for (int j = 0; j < m; ++j) acc += dm(j, c) * x(b, j);
              vi[c] = acc;
            }
            for (int k = 0; k < pi.c; ++k) adj[0](b, k) = u[pi.rows[k]] * vi[pi.cols[k]];
          }
          if (a.input_needs_grad[1]) {
            for (int c = 0; c < n; ++c) {
              real_t acc = 0;
              for (int j = 0; j < n; ++j) acc += dn(j, c) * hp(b, j);
              vh[c] = acc;
            }
            for (int k = 0; k < ph.c; ++k) adj[1](b, k) = u[ph.rows[k]] * vh[ph.cols[k]];
          }
          if (a.input_needs_grad[2] || a.input_needs_grad[3]) {
            // Dense weights: straight from the payload in naive mode,
            // regenerated from the saved coefficients in recompute mode.
            Matrix w, r;
            if (naive) {
              const Matrix& wall = a.payload.mats.at(0);
              const Matrix& rall = a.payload.mats.at(1);
              w = Matrix(n, m);
              r = Matrix(n, n);
              for (int i = 0; i < n; ++i) {
                for (int j = 0; j < m; ++j) w(i, j) = wall(b * n + i, j);
                for (int j = 0; j < n; ++j) r(i, j) = rall(b * n + i, j);
              }
            } else {
              w = decompress(row_of(a.payload.mats.at(0), b), pi);
              r = decompress(row_of(a.payload.mats.at(1), b), ph);
            }
            if (a.input_needs_grad[2]) {
              for (int j = 0; j < m; ++j) {
                real_t acc = 0;
                for (int i = 0; i < n; ++i) acc += w(i, j) * s[i];
                adj[2](b, j) = acc;
              }
            }
            if (a.input_needs_grad[3]) {
              for (int j = 0; j < n; ++j) {
                real_t acc = 0;
                for (int i = 0; i < n; ++i) acc += r(i, j) * s[i];
                adj[3](b, j) = acc;
              }
            }
          }
        }
        return adj;
      }});
  return id;
}

}  // namespace

FastRnnLayer::FastRnnLayer(std::string name, int hidden, int input, double rate,
                           Corner corner, BudgetMode mode, FastVariant variant)
    : name_(std::move(name)), n_(hidden), m_(input), variant_(variant) {
  plan_in_ = PackingPlan::make(n_, m_, coeff_budget(n_, m_, rate, mode), corner);
  plan_rec_ = PackingPlan::make(n_, n_, coeff_budget(n_, n_, rate, mode), corner);
  if (plan_in_->c < 1 || plan_rec_->c < 1)
    throw std::invalid_argument("fast layer: compression rate leaves zero coefficients");
  if (variant_ == FastVariant::kTwin) {
    slow_i_ = std::make_unique<DenseLstmLayer>(name_ + ".slow_i", plan_in_->c, m_);
    slow_h_ = std::make_unique<DenseLstmLayer>(name_ + ".slow_h", plan_rec_->c, m_);
  } else {
    slow_i_ = std::make_unique<DenseLstmLayer>(name_ + ".slow", plan_in_->c + plan_rec_->c, m_);
  }
  g0i_.name = name_ + ".g0_i";
  g0i_.value = Matrix(1, plan_in_->c);
  g0i_.trainable = false;
  g0i_.plan = plan_in_;
  g0h_.name = name_ + ".g0_h";
  g0h_.value = Matrix(1, plan_rec_->c);
  g0h_.trainable = false;
  g0h_.plan = plan_rec_;
}

int64_t FastRnnLayer::param_count() const {
  int64_t total = slow_i_->param_count();
  if (slow_h_) total += slow_h_->param_count();
  return total;
}

void FastRnnLayer::init(Rng& rng) {
  slow_i_->init(rng);
  if (slow_h_) slow_h_->init(rng);
  // Start from the compression of a conventionally initialized dense matrix
  // rather than zero weights.
  const real_t wb = static_cast<real_t>(1.0 / std::sqrt(double(m_)));
  const real_t rb = static_cast<real_t>(1.0 / std::sqrt(double(n_)));
  g0i_.value = compress(uniform_matrix(n_, m_, wb, rng), *plan_in_);
  g0h_.value = compress(uniform_matrix(n_, n_, rb, rng), *plan_rec_);
}

void FastRnnLayer::collect(std::vector<Parameter*>& out) {
  slow_i_->collect(out);
  if (slow_h_) slow_h_->collect(out);
  out.push_back(&g0i_);
  out.push_back(&g0h_);
}

FastLaneState FastRnnLayer::make_state(int batch) const {
  FastLaneState s;
  auto replicate = [&](const Matrix& row) {
    Matrix m(batch, row.cols());
    for (int b = 0; b < batch; ++b)
      for (int c = 0; c < row.cols(); ++c) m(b, c) = row(0, c);
    return m;
  };
  if (variant_ == FastVariant::kTwin) {
    s.gi = replicate(g0i_.value);
    s.ci = Matrix(batch, plan_in_->c);
    s.gh = replicate(g0h_.value);
    s.ch = Matrix(batch, plan_rec_->c);
  } else {
    Matrix joint(1, plan_in_->c + plan_rec_->c);
    for (int c = 0; c < plan_in_->c; ++c) joint(0, c) = g0i_.value(0, c);
    for (int c = 0; c < plan_rec_->c; ++c) joint(0, plan_in_->c + c) = g0h_.value(0, c);
    s.gi = replicate(joint);
    s.ci = Matrix(batch, plan_in_->c + plan_rec_->c);
  }
  s.h = Matrix(batch, n_);
  return s;
}

void FastRnnLayer::begin_segment(Tape& t, FastBackward mode, bool train,
                                 double recurrent_drop, Rng& rng) {
  mode_ = mode;
  cells_.clear();
  slow_i_->begin_segment(t, train, recurrent_drop, rng);
  if (slow_h_) slow_h_->begin_segment(t, train, recurrent_drop, rng);
}

FastStateNodes FastRnnLayer::bind_state(Tape& t, const FastLaneState& s) const {
  FastStateNodes nodes;
  nodes.gi = t.constant(s.gi);
  nodes.ci = t.constant(s.ci);
  if (variant_ == FastVariant::kTwin) {
    nodes.gh = t.constant(s.gh);
    nodes.ch = t.constant(s.ch);
  }
  nodes.h = t.constant(s.h);
  return nodes;
}

NodeId FastRnnLayer::step(Tape& t, NodeId x, FastStateNodes& s) {
  NodeId gi, gh;
  if (variant_ == FastVariant::kTwin) {
    auto [gi2, ci2] = slow_i_->step(t, x, s.gi, s.ci);
    auto [gh2, ch2] = slow_h_->step(t, x, s.gh, s.ch);
    s.gi = gi2;
    s.ci = ci2;
    s.gh = gh2;
    s.ch = ch2;
    gi = gi2;
    gh = gh2;
  } else {
    auto [g2, c2] = slow_i_->step(t, x, s.gi, s.ci);
    s.gi = g2;
    s.ci = c2;
    gi = t_slice_cols(t, g2, 0, plan_in_->c);
    gh = t_slice_cols(t, g2, plan_in_->c, plan_in_->c + plan_rec_->c);
  }
  auto box = std::make_shared<FastCellBox>();
  box->plan_in = plan_in_;
  box->plan_rec = plan_rec_;
  OpPayload p;
  p.box = std::move(box);
  p.ints = {mode_ == FastBackward::kNaive ? kModeNaive : kModeRecompute};
  NodeId h = t.apply(fast_cell_op(), {gi, gh, x, s.h}, std::move(p));
  s.h = h;
  cells_.push_back(h);
  return h;
}

void FastRnnLayer::read_state(const Tape& t, const FastStateNodes& s,
                              FastLaneState& out) const {
  out.gi = t.value(s.gi);
  out.ci = t.value(s.ci);
  if (variant_ == FastVariant::kTwin) {
    out.gh = t.value(s.gh);
    out.ch = t.value(s.ch);
  }
  out.h = t.value(s.h);
}

size_t FastRnnLayer::segment_payload_floats(const Tape& t) const {
  size_t total = 0;
  for (NodeId id : cells_) total += t.payload_floats(id);
  return total;
}

}  // namespace dctlm
