#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dctlm/matrix.hpp"

namespace dctlm {

using NodeId = int32_t;
using OpId = int32_t;
inline constexpr NodeId kNoNode = -1;

/// Everything an operation saves between the forward and backward pass.
/// `mats` is the part that counts as "saved payload" in memory accounting;
/// small metadata (ints, reals, box) is free.
struct OpPayload {
  std::vector<Matrix> mats;
  std::vector<int64_t> ints;
  std::vector<real_t> reals;
  std::shared_ptr<const void> box;

  size_t float_count() const {
    size_t n = reals.size();
    for (const Matrix& m : mats) n += m.size();
    return n;
  }
};

/// Declares what an op may stash for its backward pass. kNoSavedMats ops must
/// reconstruct anything they need from inputs/output; violating the policy at
/// runtime is a logic error. This is the lever behind the memory-efficient
/// fast-weight backward: the recompute variant saves coefficient vectors, the
/// naive one saves dense weight matrices.
enum class PayloadPolicy { kNoSavedMats, kSavesMats };

struct BackwardArgs {
  const Matrix& grad;                         // adjoint of the output
  std::span<const Matrix* const> inputs;      // parent values
  const Matrix& output;                       // forward result
  const OpPayload& payload;
  std::span<const bool> input_needs_grad;     // adjoints for `false` slots may be empty
};

struct OpDef {
  std::string name;
  int arity = 0;  // -1 = variadic (>= 1 inputs)
  PayloadPolicy policy = PayloadPolicy::kNoSavedMats;
  std::function<Matrix(std::span<const Matrix* const>, OpPayload&)> forward;
  // Must return exactly one adjoint per input (empty Matrix allowed where
  // input_needs_grad is false).
  std::function<std::vector<Matrix>(const BackwardArgs&)> backward;
};

/// Registers an operation in the process-wide registry and returns its id.
OpId register_custom_op(OpDef def);
const OpDef& op_def(OpId id);
OpId find_op(std::string_view name);  // throws std::out_of_range if absent

/// Append-only reverse-mode autodiff tape. Parents always precede children,
/// so a single reverse sweep is a valid topological traversal. The tape is
/// confined to one thread.
class Tape {
 public:
  NodeId constant(Matrix value);  // no gradient ever flows into it
  NodeId leaf(Matrix value);      // gradient target (parameter or probe)
  NodeId apply(OpId op, std::span<const NodeId> parents, OpPayload payload = {});
  NodeId apply(OpId op, std::initializer_list<NodeId> parents, OpPayload payload = {}) {
    return apply(op, std::span<const NodeId>(parents.begin(), parents.size()),
                 std::move(payload));
  }

  const Matrix& value(NodeId id) const { return node(id).value; }
  bool needs_grad(NodeId id) const { return node(id).needs_grad; }
  bool is_leaf(NodeId id) const { return node(id).kind == Kind::kLeaf; }

  /// Reverse sweep from a scalar root. Grads are recomputed from scratch each
  /// call (running it twice gives identical results). With economy mode on,
  /// interior adjoints are released as soon as their parents consumed them and
  /// only leaf/constant-node grads stay queryable.
  void backward(NodeId root);
  const Matrix& grad(NodeId id) const;

  void set_economy(bool on) { economy_ = on; }

  void reset();
  size_t size() const { return nodes_.size(); }
  size_t stored_value_floats() const;
  size_t stored_payload_floats() const;
  size_t payload_floats(NodeId id) const { return node(id).payload.float_count(); }

 private:
  enum class Kind : uint8_t { kConstant, kLeaf, kOp };
  struct Node {
    Kind kind;
    OpId op = -1;
    bool needs_grad = false;
    std::vector<NodeId> parents;
    Matrix value;
    Matrix grad;
    OpPayload payload;
  };

  const Node& node(NodeId id) const;
  Node& node(NodeId id);

  std::vector<Node> nodes_;
  bool grads_valid_ = false;
  bool economy_ = false;
};

// Built-in differentiable ops (registered on first use).
namespace ops {
OpId add();          // a + b, same shape
OpId add_bias();     // x (B x n) + bias (1 x n) broadcast over rows
OpId mul();          // elementwise product, same shape
OpId scale();        // x * payload.reals[0]
OpId matmul();       // a * b
OpId matmul_nt();    // a * b^T
OpId matmul_tn();    // a^T * b
OpId tanh_fn();
OpId sigmoid_fn();
OpId sum_all();      // 1x1 sum of all entries
OpId gather_rows();  // rows of input selected by payload.ints
OpId slice_cols();   // columns [ints[0], ints[1])
OpId concat_rows();  // variadic, stacks inputs vertically
OpId concat_cols();  // variadic, stacks inputs horizontally
OpId lm_loss();      // mean cross-entropy over rows; targets in payload box
OpId lstm_gates();   // (pre B x 4n, c_prev B x n) -> [h | c] B x 2n
}  // namespace ops

// Graph-building helpers.
NodeId t_add(Tape& t, NodeId a, NodeId b);
NodeId t_add_bias(Tape& t, NodeId x, NodeId bias);
NodeId t_mul(Tape& t, NodeId a, NodeId b);
NodeId t_scale(Tape& t, NodeId x, real_t k);
NodeId t_matmul(Tape& t, NodeId a, NodeId b);
NodeId t_matmul_nt(Tape& t, NodeId a, NodeId b);
NodeId t_matmul_tn(Tape& t, NodeId a, NodeId b);
NodeId t_tanh(Tape& t, NodeId x);
NodeId t_sigmoid(Tape& t, NodeId x);
NodeId t_sum_all(Tape& t, NodeId x);
NodeId t_gather_rows(Tape& t, NodeId table, std::span<const int32_t> ids);
NodeId t_slice_cols(Tape& t, NodeId x, int begin, int end);
NodeId t_concat_rows(Tape& t, std::span<const NodeId> xs);
NodeId t_concat_cols(Tape& t, std::span<const NodeId> xs);
NodeId t_lm_loss(Tape& t, NodeId logits, std::span<const int32_t> targets);
NodeId t_lstm_gates(Tape& t, NodeId pre, NodeId c_prev);

}  // namespace dctlm
