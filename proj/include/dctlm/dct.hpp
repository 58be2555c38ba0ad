#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string_view>
#include <vector>

#include "dctlm/matrix.hpp"
#include "dctlm/tape.hpp"

namespace dctlm {

/// Which corner of the frequency matrix the coefficient anti-diagonals are
/// anchored to. Named geometrically: kLow is cell (0,0), kHigh is (n-1, m-1).
enum class Corner : uint8_t { kLow, kHigh };

/// How the per-matrix coefficient count is derived from a compression rate:
/// round down to whole anti-diagonals (default) or take the exact floor.
enum class BudgetMode : uint8_t { kCompleteDiagonals, kExactFloor };

Corner corner_from_string(std::string_view s);
const char* to_string(Corner c);
BudgetMode budget_mode_from_string(std::string_view s);
const char* to_string(BudgetMode m);

/// Orthonormal DCT-II matrix of size n, cached per size and shared read-only:
/// D[k,i] = s_k * sqrt(2/n) * cos(pi*(2i+1)*k / (2n)), s_0 = 1/sqrt(2).
/// Its inverse is its transpose.
const Matrix& dct_basis(int n);

/// Coefficient count for an n x m matrix at the given compression rate.
/// Raw budget b = floor((1-rate)*n*m + 1e-9); kCompleteDiagonals keeps the
/// largest prefix of whole anti-diagonals with total cell count <= b.
int coeff_budget(int n, int m, double rate,
                 BudgetMode mode = BudgetMode::kCompleteDiagonals);

/// Ordered cell positions for placing a length-c coefficient vector into an
/// n x m matrix: whole anti-diagonals by increasing distance from the anchor
/// corner, ascending row index inside each diagonal. The order is frozen
/// (kOrderVersion) because checkpoints depend on it.
struct PackingPlan {
  int n = 0;
  int m = 0;
  int c = 0;
  Corner corner = Corner::kHigh;
  std::vector<int32_t> rows;  // rows[k], cols[k]: cell of coefficient k
  std::vector<int32_t> cols;

  static constexpr int32_t kOrderVersion = 1;

  static std::shared_ptr<const PackingPlan> make(int n, int m, int c, Corner corner);
};

using PlanPtr = std::shared_ptr<const PackingPlan>;

// Raw (tape-free) codec operations. Coefficient vectors are 1 x c matrices.
Matrix pack(const Matrix& g, const PackingPlan& plan);        // sparse n x m
Matrix decompress(const Matrix& g, const PackingPlan& plan);  // dense n x m
Matrix compress(const Matrix& w, const PackingPlan& plan);    // 1 x c

// Differentiable versions. `basis_n`/`basis_m` are tape constants holding
// dct_basis(plan.n) / dct_basis(plan.m); callers create them once per tape.
NodeId t_pack(Tape& t, NodeId g, PlanPtr plan);
NodeId t_decompress(Tape& t, NodeId g, NodeId basis_n, NodeId basis_m, PlanPtr plan);

/// Runs the codec invariant suite (orthonormality, round-trips, Parseval,
/// corner symmetry, budget arithmetic), printing one line per check.
/// Returns the number of failed checks.
int codec_selftest(std::ostream& out);

}  // namespace dctlm
