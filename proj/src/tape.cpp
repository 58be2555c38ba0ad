#include "dctlm/tape.hpp"

#include <cmath>
#include <deque>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace dctlm {

namespace {

struct Registry {
  std::mutex mu;
  std::deque<OpDef> defs;  // deque: references stay valid as it grows
};

Registry& registry() {
  static Registry* r = new Registry;
  return *r;
}

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

OpId register_custom_op(OpDef def) {
  if (!def.forward || !def.backward) fail("register_custom_op: missing forward or backward");
  if (def.arity < -1) fail("register_custom_op: bad arity");
  Registry& r = registry();
  std::lock_guard<std::mutex> lock(r.mu);
  r.defs.push_back(std::move(def));
  return static_cast<OpId>(r.defs.size() - 1);
}

const OpDef& op_def(OpId id) {
  Registry& r = registry();
  std::lock_guard<std::mutex> lock(r.mu);
  if (id < 0 || id >= static_cast<OpId>(r.defs.size()))
    throw std::out_of_range("op_def: unknown op id " + std::to_string(id));
  return r.defs[id];
}

OpId find_op(std::string_view name) {
  Registry& r = registry();
  std::lock_guard<std::mutex> lock(r.mu);
  for (size_t i = 0; i < r.defs.size(); ++i)
    if (r.defs[i].name == name) return static_cast<OpId>(i);
  throw std::out_of_range("find_op: no op named '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Tape

const Tape::Node& Tape::node(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
    throw std::out_of_range("tape: node id " + std::to_string(id) + " out of range");
  return nodes_[id];
}

Tape::Node& Tape::node(NodeId id) {
  return const_cast<Node&>(static_cast<const Tape*>(this)->node(id));
}

NodeId Tape::constant(Matrix value) {
  Node nd;
  nd.kind = Kind::kConstant;
  nd.value = std::move(value);
  nodes_.push_back(std::move(nd));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(Matrix value) {
  Node nd;
  nd.kind = Kind::kLeaf;
  nd.needs_grad = true;
  nd.value = std::move(value);
  nodes_.push_back(std::move(nd));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::apply(OpId op, std::span<const NodeId> parents, OpPayload payload) {
  const OpDef& def = op_def(op);
  if (def.arity >= 0 && static_cast<int>(parents.size()) != def.arity) {
    std::ostringstream os;
    os << "op '" << def.name << "' expects " << def.arity << " input(s), got "
       << parents.size();
    fail(os.str());
  }
  if (def.arity == -1 && parents.empty()) fail("op '" + def.name + "' needs >= 1 input");

  std::vector<const Matrix*> inputs;
  inputs.reserve(parents.size());
  bool needs = false;
  for (NodeId p : parents) {
    const Node& pn = node(p);
    inputs.push_back(&pn.value);
    needs |= pn.needs_grad;
  }

  Node nd;
  nd.kind = Kind::kOp;
  nd.op = op;
  nd.needs_grad = needs;
  nd.parents.assign(parents.begin(), parents.end());
  nd.payload = std::move(payload);
  nd.value = def.forward(std::span<const Matrix* const>(inputs.data(), inputs.size()),
                         nd.payload);
  if (def.policy == PayloadPolicy::kNoSavedMats && !nd.payload.mats.empty())
    throw std::logic_error("op '" + def.name +
                           "' declares no saved payload but stored matrices");
  nodes_.push_back(std::move(nd));
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::backward(NodeId root) {
  const Node& rn = node(root);
  if (rn.value.rows() != 1 || rn.value.cols() != 1) {
    std::ostringstream os;
    os << "backward: root must be scalar (1x1), got " << rn.value.rows() << "x"
       << rn.value.cols();
    fail(os.str());
  }
  for (Node& nd : nodes_) nd.grad = Matrix();
  grads_valid_ = true;
  node(root).grad = Matrix::scalar(1);

  std::vector<const Matrix*> inputs;
  // std::vector<bool> is bit-packed and cannot back a span<const bool>.
  std::vector<char> needs_raw;

  for (NodeId k = root; k >= 0; --k) {
    Node& nd = nodes_[k];
    if (nd.kind != Kind::kOp || !nd.needs_grad || nd.grad.empty()) continue;
    const OpDef& def = op_def(nd.op);

    inputs.clear();
    needs_raw.clear();
    for (NodeId p : nd.parents) {
      inputs.push_back(&nodes_[p].value);
      needs_raw.push_back(nodes_[p].needs_grad ? 1 : 0);
    }
    static_assert(sizeof(bool) == sizeof(char));
    BackwardArgs args{nd.grad,
                      std::span<const Matrix* const>(inputs.data(), inputs.size()),
                      nd.value, nd.payload,
                      std::span<const bool>(reinterpret_cast<const bool*>(needs_raw.data()),
                                            needs_raw.size())};
    std::vector<Matrix> adj = def.backward(args);
    if (adj.size() != nd.parents.size()) {
      std::ostringstream os;
      os << "op '" << def.name << "' backward returned " << adj.size()
         << " adjoint(s) for " << nd.parents.size() << " input(s)";
      throw std::logic_error(os.str());
    }
    for (size_t i = 0; i < nd.parents.size(); ++i) {
      Node& pn = nodes_[nd.parents[i]];
      if (!pn.needs_grad) continue;
      if (adj[i].empty())
        throw std::logic_error("op '" + def.name + "' returned empty adjoint for input " +
                               std::to_string(i) + " that needs a gradient");
      if (!adj[i].same_shape(pn.value)) {
        std::ostringstream os;
        os << "op '" << def.name << "' adjoint " << i << " has shape " << adj[i].rows()
           << "x" << adj[i].cols() << ", input is " << pn.value.rows() << "x"
           << pn.value.cols();
        throw std::logic_error(os.str());
      }
      if (pn.grad.empty())
        pn.grad = std::move(adj[i]);
      else
        pn.grad.add_inplace(adj[i]);
    }
    if (economy_) nd.grad = Matrix();  // interior adjoint no longer needed
  }
}

const Matrix& Tape::grad(NodeId id) const {
  if (!grads_valid_) throw std::logic_error("grad: backward has not been run");
  const Node& nd = node(id);
  if (nd.grad.empty()) {
    if (economy_ && nd.kind == Kind::kOp)
      throw std::logic_error("grad: interior adjoints are released in economy mode");
    static thread_local Matrix zero;
    zero = Matrix(nd.value.rows(), nd.value.cols());
    return zero;
  }
  return nd.grad;
}

void Tape::reset() {
  nodes_.clear();
  grads_valid_ = false;
}

size_t Tape::stored_value_floats() const {
  size_t n = 0;
  for (const Node& nd : nodes_) n += nd.value.size();
  return n;
}

size_t Tape::stored_payload_floats() const {
  size_t n = 0;
  for (const Node& nd : nodes_) n += nd.payload.float_count();
  return n;
}

// ---------------------------------------------------------------------------
// Built-in ops

namespace {

Matrix colsum(const Matrix& g) {
  Matrix out(1, g.cols());
  for (int r = 0; r < g.rows(); ++r)
    for (int c = 0; c < g.cols(); ++c) out(0, c) += g(r, c);
  return out;
}

struct TargetsBox {
  std::vector<int32_t> ids;
};

OpId make_add() {
  return register_custom_op(OpDef{
      "add", 2, PayloadPolicy::kNoSavedMats,
      [](std::span<const Matrix* const> in, OpPayload&) { return add(*in[0], *in[1]); },
      [](const BackwardArgs& a) {
        return std::vector<Matrix>{a.grad, a.grad};
      }});
}

OpId make_add_bias() {
  return register_custom_op(OpDef{
      "add_bias", 2, PayloadPolicy::kNoSavedMats,
      [](std::span<const Matrix* const> in, OpPayload&) {
        const Matrix& x = *in[0];
        const Matrix& b = *in[1];
        if (b.rows() != 1 || b.cols() != x.cols())
          fail("add_bias: bias must be 1x" + std::to_string(x.cols()) + ", got " +
               std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
        Matrix out = x;
        for (int r = 0; r < out.rows(); ++r)
          for (int c = 0; c < out.cols(); ++c) out(r, c) += b(0, c);
        return out;
      },
      [](const BackwardArgs& a) {
        return std::vector<Matrix>{a.grad, colsum(a.grad)};
      }});
}

OpId make_mul() {
  return register_custom_op(OpDef{
      "mul", 2, PayloadPolicy::kNoSavedMats,
      [](std::span<const Matrix* const> in, OpPayload&) { return hadamard(*in[0], *in[1]); },
      [](const BackwardArgs& a) {
        std::vector<Matrix> adj(2);
        if (a.input_needs_grad[0]) adj[0] = hadamard(a.grad, *a.inputs[1]);
        if (a.input_needs_grad[1]) adj[1] = hadamard(a.grad, *a.inputs[0]);
        return adj;
      }});
}

OpId make_scale() {
  return register_custom_op(OpDef{
      "scale", 1, PayloadPolicy::kNoSavedMats,
      [](std::span<const Matrix* const> in, OpPayload& p) {
        Matrix out = *in[0];
        out.scale_inplace(p.reals.at(0));
        return out;
      },
      [](const BackwardArgs& a) {
        Matrix g = a.grad;
        g.scale_inplace(a.payload.reals.at(0));
        return std::vector<Matrix>{std::move(g)};
      }});
}

OpId make_matmul() {
  return register_custom_op(OpDef{
      "matmul", 2, PayloadPolicy::kNoSavedMats,
      [](std::span<const Matrix* const> in, OpPayload&) { return matmul(*in[0], *in[1]); },
      [](const BackwardArgs& a) {
        std::vector<Matrix> adj(2);
        if (a.input_needs_grad[0]) adj[0] = matmul_nt(a.grad, *a.inputs[1]);
        if (a.input_needs_grad[1]) adj[1] = matmul_tn(*a.inputs[0], a.grad);
        return adj;
      }});
}

OpId make_matmul_nt() {
  return register_custom_op(OpDef{
      "matmul_nt", 2, PayloadPolicy::kNoSavedMats,
      [](std::span<const Matrix* const> in, OpPayload&) { return matmul_nt(*in[0], *in[1]); },
      [](const BackwardArgs& a) {
        std::vector<Matrix> adj(2);
        if (a.input_needs_grad[0]) adj[0] = matmul(a.grad, *a.inputs[1]);
        if (a.input_needs_grad[1]) adj[1] = matmul_tn(a.grad, *a.inputs[0]);
        return adj;
      }});
}

OpId make_matmul_tn() {
  return register_custom_op(OpDef{
      "matmul_tn", 2, PayloadPolicy::kNoSavedMats,
      [](std::span<const Matrix* const> in, OpPayload&) { return matmul_tn(*in[0], *in[1]); },
      [](const BackwardArgs& a) {
        std::vector<Matrix> adj(2);
        if (a.input_needs_grad[0]) adj[0] = matmul_nt(*a.inputs[1], a.grad);
        if (a.input_needs_grad[1]) adj[1] = matmul(*a.inputs[0], a.grad);
        return adj;
      }});
}

OpId make_tanh() {
  return register_custom_op(OpDef{
      "tanh", 1, PayloadPolicy::kNoSavedMats,
      [](std::span<const Matrix* const> in, OpPayload&) {
        Matrix out = *in[0];
        for (real_t& v : out.flat()) v = std::tanh(v);
        return out;
      },
      [](const BackwardArgs& a) {
        Matrix g(a.output.rows(), a.output.cols());
        for (size_t i = 0; i < g.size(); ++i) {
          real_t y = a.output.flat()[i];
          g.flat()[i] = a.grad.flat()[i] * (1 - y * y);
        }
        return std::vector<Matrix>{std::move(g)};
      }});
}

OpId make_sigmoid() {
  return register_custom_op(OpDef{
      "sigmoid", 1, PayloadPolicy::kNoSavedMats,
      [](std::span<const Matrix* const> in, OpPayload&) {
        Matrix out = *in[0];
        for (real_t& v : out.flat()) v = 1 / (1 + std::exp(-v));
        return out;
      },
      [](const BackwardArgs& a) {
        Matrix g(a.output.rows(), a.output.cols());
        for (size_t i = 0; i < g.size(); ++i) {
          real_t y = a.output.flat()[i];
          g.flat()[i] = a.grad.flat()[i] * y * (1 - y);
        }
        return std::vector<Matrix>{std::move(g)};
      }});
}

OpId make_sum_all() {
  return register_custom_op(OpDef{
      "sum_all", 1, PayloadPolicy::kNoSavedMats,
      [](std::span<const Matrix* const> in, OpPayload&) {
        return Matrix::scalar(in[0]->sum());
      },
      [](const BackwardArgs& a) {
        return std::vector<Matrix>{
            Matrix::full(a.inputs[0]->rows(), a.inputs[0]->cols(), a.grad(0, 0))};
      }});
}

OpId make_gather_rows() {
  return register_custom_op(OpDef{
      "gather_rows", 1, PayloadPolicy::kNoSavedMats,
      [](std::span<const Matrix* const> in, OpPayload& p) {
        const Matrix& table = *in[0];
        Matrix out(static_cast<int>(p.ints.size()), table.cols());
        for (size_t r = 0; r < p.ints.size(); ++r) {
          int64_t id = p.ints[r];
          if (id < 0 || id >= table.rows())
            throw std::out_of_range("gather_rows: id " + std::to_string(id) +
                                    " outside table with " + std::to_string(table.rows()) +
                                    " rows");
          for (int c = 0; c < table.cols(); ++c)
            out(static_cast<int>(r), c) = table(static_cast<int>(id), c);
        }
        return out;
      },
      [](const BackwardArgs& a) {
        Matrix g(a.inputs[0]->rows(), a.inputs[0]->cols());
        for (size_t r = 0; r < a.payload.ints.size(); ++r) {
          int id = static_cast<int>(a.payload.ints[r]);
          for (int c = 0; c < g.cols(); ++c) g(id, c) += a.grad(static_cast<int>(r), c);
        }
        return std::vector<Matrix>{std::move(g)};
      }});
}

OpId make_slice_cols() {
  return register_custom_op(OpDef{
      "slice_cols", 1, PayloadPolicy::kNoSavedMats,
      [](std::span<const Matrix* const> in, OpPayload& p) {
        const Matrix& x = *in[0];
        int b = static_cast<int>(p.ints.at(0)), e = static_cast<int>(p.ints.at(1));
        if (b < 0 || e > x.cols() || b >= e)
          fail("slice_cols: bad range [" + std::to_string(b) + ", " + std::to_string(e) +
               ") for " + std::to_string(x.cols()) + " columns");
        Matrix out(x.rows(), e - b);
        for (int r = 0; r < x.rows(); ++r)
          for (int c = b; c < e; ++c) out(r, c - b) = x(r, c);
        return out;
      },
      [](const BackwardArgs& a) {
        int b = static_cast<int>(a.payload.ints.at(0));
        Matrix g(a.inputs[0]->rows(), a.inputs[0]->cols());
        for (int r = 0; r < a.grad.rows(); ++r)
          for (int c = 0; c < a.grad.cols(); ++c) g(r, b + c) = a.grad(r, c);
        return std::vector<Matrix>{std::move(g)};
      }});
}

OpId make_concat_rows() {
  return register_custom_op(OpDef{
      "concat_rows", -1, PayloadPolicy::kNoSavedMats,
      [](std::span<const Matrix* const> in, OpPayload&) {
        int rows = 0, cols = in[0]->cols();
        for (const Matrix* m : in) {
          if (m->cols() != cols) fail("concat_rows: column mismatch");
          rows += m->rows();
        }
        Matrix out(rows, cols);
        int at = 0;
        for (const Matrix* m : in) {
          for (int r = 0; r < m->rows(); ++r)
            for (int c = 0; c < cols; ++c) out(at + r, c) = (*m)(r, c);
          at += m->rows();
        }
        return out;
      },
      [](const BackwardArgs& a) {
        std::vector<Matrix> adj;
        adj.reserve(a.inputs.size());
        int at = 0;
        for (size_t i = 0; i < a.inputs.size(); ++i) {
          const Matrix& x = *a.inputs[i];
          Matrix g(x.rows(), x.cols());
          for (int r = 0; r < x.rows(); ++r)
            for (int c = 0; c < x.cols(); ++c) g(r, c) = a.grad(at + r, c);
          at += x.rows();
          adj.push_back(std::move(g));
        }
        return adj;
      }});
}

OpId make_concat_cols() {
  return register_custom_op(OpDef{
      "concat_cols", -1, PayloadPolicy::kNoSavedMats,
      [](std::span<const Matrix* const> in, OpPayload&) {
        int cols = 0, rows = in[0]->rows();
        for (const Matrix* m : in) {
          if (m->rows() != rows) fail("concat_cols: row mismatch");
          cols += m->cols();
        }
        Matrix out(rows, cols);
        int at = 0;
        for (const Matrix* m : in) {
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < m->cols(); ++c) out(r, at + c) = (*m)(r, c);
          at += m->cols();
        }
        return out;
      },
      [](const BackwardArgs& a) {
        std::vector<Matrix> adj;
        adj.reserve(a.inputs.size());
        int at = 0;
        for (size_t i = 0; i < a.inputs.size(); ++i) {
          const Matrix& x = *a.inputs[i];
          Matrix g(x.rows(), x.cols());
          for (int r = 0; r < x.rows(); ++r)
            for (int c = 0; c < x.cols(); ++c) g(r, c) = a.grad(r, at + c);
          at += x.cols();
          adj.push_back(std::move(g));
        }
        return adj;
      }});
}

// Numerically stable mean cross-entropy over rows; softmax is recomputed in
// the backward pass rather than saved.
OpId make_lm_loss() {
  return register_custom_op(OpDef{
      "lm_loss", 1, PayloadPolicy::kNoSavedMats,
      [](std::span<const Matrix* const> in, OpPayload& p) {
        const Matrix& logits = *in[0];
        const auto* box = static_cast<const TargetsBox*>(p.box.get());
        if (!box || static_cast<int>(box->ids.size()) != logits.rows())
          fail("lm_loss: need one target per logits row");
        double acc = 0;
        for (int r = 0; r < logits.rows(); ++r) {
          int32_t t = box->ids[r];
          if (t < 0 || t >= logits.cols())
            throw std::out_of_range("lm_loss: target " + std::to_string(t) +
                                    " outside vocab of " + std::to_string(logits.cols()));
          real_t mx = logits(r, 0);
          for (int c = 1; c < logits.cols(); ++c) mx = std::max(mx, logits(r, c));
          double sum = 0;
          for (int c = 0; c < logits.cols(); ++c) sum += std::exp(logits(r, c) - mx);
          acc += mx + std::log(sum) - logits(r, t);
        }
        return Matrix::scalar(static_cast<real_t>(acc / logits.rows()));
      },
      [](const BackwardArgs& a) {
        const Matrix& logits = *a.inputs[0];
        const auto* box = static_cast<const TargetsBox*>(a.payload.box.get());
        const real_t g = a.grad(0, 0) / logits.rows();
        Matrix adj(logits.rows(), logits.cols());
        for (int r = 0; r < logits.rows(); ++r) {
          real_t mx = logits(r, 0);
          for (int c = 1; c < logits.cols(); ++c) mx = std::max(mx, logits(r, c));
          double sum = 0;
          for (int c = 0; c < logits.cols(); ++c) sum += std::exp(logits(r, c) - mx);
          for (int c = 0; c < logits.cols(); ++c)
            adj(r, c) = g * static_cast<real_t>(std::exp(logits(r, c) - mx) / sum);
          adj(r, box->ids[r]) -= g;
        }
        return std::vector<Matrix>{std::move(adj)};
      }});
}

// Fused LSTM cell tail: pre-activations (B x 4n, gate blocks [i f o z]) and
// previous cell state (B x n) to [h | c] (B x 2n). Saves the post-activation
// gates so the backward pass skips the transcendental recompute.
OpId make_lstm_gates() {
  return register_custom_op(OpDef{
      "lstm_gates", 2, PayloadPolicy::kSavesMats,
      [](std::span<const Matrix* const> in, OpPayload& p) {
        const Matrix& pre = *in[0];
        const Matrix& cp = *in[1];
        const int B = pre.rows(), n = cp.cols();
        if (cp.rows() != B || pre.cols() != 4 * n)
          fail("lstm_gates: pre must be Bx4n and c_prev Bxn, got " +
               std::to_string(pre.rows()) + "x" + std::to_string(pre.cols()) + " and " +
               std::to_string(cp.rows()) + "x" + std::to_string(cp.cols()));
        Matrix acts(B, 4 * n);
        Matrix out(B, 2 * n);
        for (int r = 0; r < B; ++r) {
          for (int j = 0; j < n; ++j) {
            real_t i = 1 / (1 + std::exp(-pre(r, j)));
            real_t f = 1 / (1 + std::exp(-pre(r, n + j)));
            real_t o = 1 / (1 + std::exp(-pre(r, 2 * n + j)));
            real_t z = std::tanh(pre(r, 3 * n + j));
            acts(r, j) = i;
            acts(r, n + j) = f;
            acts(r, 2 * n + j) = o;
            acts(r, 3 * n + j) = z;
            real_t c = f * cp(r, j) + i * z;
            out(r, j) = o * std::tanh(c);
            out(r, n + j) = c;
          }
        }
        p.mats.push_back(std::move(acts));
        return out;
      },
      [](const BackwardArgs& a) {
        const Matrix& cp = *a.inputs[1];
        const Matrix& acts = a.payload.mats.at(0);
        const int B = cp.rows(), n = cp.cols();
        Matrix dpre(B, 4 * n);
        Matrix dcp(B, n);
        for (int r = 0; r < B; ++r) {
          for (int j = 0; j < n; ++j) {
            real_t i = acts(r, j), f = acts(r, n + j), o = acts(r, 2 * n + j),
                   z = acts(r, 3 * n + j);
            real_t c = a.output(r, n + j);
            real_t tc = std::tanh(c);
            real_t gh = a.grad(r, j), gc = a.grad(r, n + j);
            real_t dout = gh * tc;
            real_t dc = gc + gh * o * (1 - tc * tc);
            dpre(r, j) = dc * z * i * (1 - i);
            dpre(r, n + j) = dc * cp(r, j) * f * (1 - f);
            dpre(r, 2 * n + j) = dout * o * (1 - o);
            dpre(r, 3 * n + j) = dc * i * (1 - z * z);
            dcp(r, j) = dc * f;
          }
        }
        return std::vector<Matrix>{std::move(dpre), std::move(dcp)};
      }});
}

struct Builtins {
  OpId add = make_add();
  OpId add_bias = make_add_bias();
  OpId mul = make_mul();
  OpId scale = make_scale();
  OpId matmul = make_matmul();
  OpId matmul_nt = make_matmul_nt();
  OpId matmul_tn = make_matmul_tn();
  OpId tanh_fn = make_tanh();
  OpId sigmoid_fn = make_sigmoid();
  OpId sum_all = make_sum_all();
  OpId gather_rows = make_gather_rows();
  OpId slice_cols = make_slice_cols();
  OpId concat_rows = make_concat_rows();
  OpId concat_cols = make_concat_cols();
  OpId lm_loss = make_lm_loss();
  OpId lstm_gates = make_lstm_gates();
};

const Builtins& builtins() {
  static Builtins b;
  return b;
}

}  // namespace

namespace ops {
OpId add() { return builtins().add; }
OpId add_bias() { return builtins().add_bias; }
OpId mul() { return builtins().mul; }
OpId scale() { return builtins().scale; }
OpId matmul() { return builtins().matmul; }
OpId matmul_nt() { return builtins().matmul_nt; }
OpId matmul_tn() { return builtins().matmul_tn; }
OpId tanh_fn() { return builtins().tanh_fn; }
OpId sigmoid_fn() { return builtins().sigmoid_fn; }
OpId sum_all() { return builtins().sum_all; }
OpId gather_rows() { return builtins().gather_rows; }
OpId slice_cols() { return builtins().slice_cols; }
OpId concat_rows() { return builtins().concat_rows; }
OpId concat_cols() { return builtins().concat_cols; }
OpId lm_loss() { return builtins().lm_loss; }
OpId lstm_gates() { return builtins().lstm_gates; }
}  // namespace ops

NodeId t_add(Tape& t, NodeId a, NodeId b) { return t.apply(ops::add(), {a, b}); }
NodeId t_add_bias(Tape& t, NodeId x, NodeId bias) {
  return t.apply(ops::add_bias(), {x, bias});
}
NodeId t_mul(Tape& t, NodeId a, NodeId b) { return t.apply(ops::mul(), {a, b}); }
NodeId t_scale(Tape& t, NodeId x, real_t k) {
  OpPayload p;
  p.reals = {k};
  return t.apply(ops::scale(), {x}, std::move(p));
}
NodeId t_matmul(Tape& t, NodeId a, NodeId b) { return t.apply(ops::matmul(), {a, b}); }
NodeId t_matmul_nt(Tape& t, NodeId a, NodeId b) {
  return t.apply(ops::matmul_nt(), {a, b});
}
NodeId t_matmul_tn(Tape& t, NodeId a, NodeId b) {
  return t.apply(ops::matmul_tn(), {a, b});
}
NodeId t_tanh(Tape& t, NodeId x) { return t.apply(ops::tanh_fn(), {x}); }
NodeId t_sigmoid(Tape& t, NodeId x) { return t.apply(ops::sigmoid_fn(), {x}); }
NodeId t_sum_all(Tape& t, NodeId x) { return t.apply(ops::sum_all(), {x}); }

NodeId t_gather_rows(Tape& t, NodeId table, std::span<const int32_t> ids) {
  OpPayload p;
  p.ints.assign(ids.begin(), ids.end());
  return t.apply(ops::gather_rows(), {table}, std::move(p));
}

NodeId t_slice_cols(Tape& t, NodeId x, int begin, int end) {
  OpPayload p;
  p.ints = {begin, end};
  return t.apply(ops::slice_cols(), {x}, std::move(p));
}

NodeId t_concat_rows(Tape& t, std::span<const NodeId> xs) {
  return t.apply(ops::concat_rows(), xs);
}
NodeId t_concat_cols(Tape& t, std::span<const NodeId> xs) {
  return t.apply(ops::concat_cols(), xs);
}

NodeId t_lm_loss(Tape& t, NodeId logits, std::span<const int32_t> targets) {
  auto box = std::make_shared<TargetsBox>();
  box->ids.assign(targets.begin(), targets.end());
  OpPayload p;
  p.box = std::move(box);
  return t.apply(ops::lm_loss(), {logits}, std::move(p));
}

NodeId t_lstm_gates(Tape& t, NodeId pre, NodeId c_prev) {
  return t.apply(ops::lstm_gates(), {pre, c_prev});
}

}  // namespace dctlm
