#include "dctlm/dct.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dctlm/rng.hpp"

namespace dctlm {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Guard against 0.1*n*m style products landing a hair under an exact integer.
constexpr double kBudgetEps = 1e-9;

int diagonal_cells(int n, int m, int d) {
  return std::min(std::min(d, n - 1), std::min(m - 1, n + m - 2 - d)) + 1;
}

}  // namespace

Corner corner_from_string(std::string_view s) {
  if (s == "high") return Corner::kHigh;
  if (s == "low") return Corner::kLow;
  throw std::invalid_argument("corner must be 'high' or 'low', got '" + std::string(s) + "'");
}

const char* to_string(Corner c) { return c == Corner::kHigh ? "high" : "low"; }

BudgetMode budget_mode_from_string(std::string_view s) {
  if (s == "complete-diagonals") return BudgetMode::kCompleteDiagonals;
  if (s == "exact-floor") return BudgetMode::kExactFloor;
  throw std::invalid_argument("budget mode must be 'complete-diagonals' or 'exact-floor', got '" +
                              std::string(s) + "'");
}

const char* to_string(BudgetMode m) {
  return m == BudgetMode::kCompleteDiagonals ? "complete-diagonals" : "exact-floor";
}

const Matrix& dct_basis(int n) {
  if (n < 1) throw std::invalid_argument("dct_basis: size must be >= 1, got " + std::to_string(n));
  static std::mutex mu;
  static std::map<int, Matrix> cache;  // node-based: references stay valid
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  Matrix d(n, n);
  const double norm = std::sqrt(2.0 / n);
  for (int k = 0; k < n; ++k) {
    const double s = (k == 0) ? 1.0 / std::sqrt(2.0) : 1.0;
    for (int i = 0; i < n; ++i)
      d(k, i) = static_cast<real_t>(s * norm * std::cos(kPi * (2 * i + 1) * k / (2.0 * n)));
  }
  return cache.emplace(n, std::move(d)).first->second;
}

int coeff_budget(int n, int m, double rate, BudgetMode mode) {
  if (n < 1 || m < 1) throw std::invalid_argument("coeff_budget: dimensions must be >= 1");
  if (rate < 0.0 || rate > 1.0)
    throw std::invalid_argument("coeff_budget: rate must be in [0,1], got " +
                                std::to_string(rate));
  const int b = static_cast<int>(std::floor((1.0 - rate) * n * m + kBudgetEps));
  if (mode == BudgetMode::kExactFloor) return std::min(b, n * m);
  int total = 0;
  for (int d = 0; d <= n + m - 2; ++d) {
    const int cells = diagonal_cells(n, m, d);
    if (total + cells > b) break;
    total += cells;
  }
  return total;
}

std::shared_ptr<const PackingPlan> PackingPlan::make(int n, int m, int c, Corner corner) {
  if (n < 1 || m < 1) throw std::invalid_argument("PackingPlan: dimensions must be >= 1");
  if (c < 0 || c > n * m)
    throw std::invalid_argument("PackingPlan: c = " + std::to_string(c) +
                                " outside [0, " + std::to_string(n * m) + "]");
  auto plan = std::make_shared<PackingPlan>();
  plan->n = n;
  plan->m = m;
  plan->c = c;
  plan->corner = corner;
  plan->rows.reserve(c);
  plan->cols.reserve(c);
  for (int d = 0; d <= n + m - 2 && static_cast<int>(plan->rows.size()) < c; ++d) {
    if (corner == Corner::kLow) {
      // Cells (i, d-i), ascending row.
      const int lo = std::max(0, d - m + 1), hi = std::min(n - 1, d);
      for (int i = lo; i <= hi && static_cast<int>(plan->rows.size()) < c; ++i) {
        plan->rows.push_back(i);
        plan->cols.push_back(d - i);
      }
    } else {
      // Mirrored: (n-1-a, m-1-(d-a)) with a+b = d; ascending row = descending a.
      const int lo = std::max(0, d - m + 1), hi = std::min(n - 1, d);
      for (int a = hi; a >= lo && static_cast<int>(plan->rows.size()) < c; --a) {
        plan->rows.push_back(n - 1 - a);
        plan->cols.push_back(m - 1 - (d - a));
      }
    }
  }
  return plan;
}

namespace {

void check_coeffs(const Matrix& g, const PackingPlan& plan, const char* who) {
  if (g.rows() != 1 || g.cols() != plan.c) {
    std::ostringstream os;
    os << who << ": coefficients must be 1x" << plan.c << ", got " << g.rows() << "x"
       << g.cols();
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

Matrix pack(const Matrix& g, const PackingPlan& plan) {
  check_coeffs(g, plan, "pack");
  Matrix w(plan.n, plan.m);
  for (int k = 0; k < plan.c; ++k) w(plan.rows[k], plan.cols[k]) = g(0, k);
  return w;
}

Matrix decompress(const Matrix& g, const PackingPlan& plan) {
  const Matrix& dn = dct_basis(plan.n);
  const Matrix& dm = dct_basis(plan.m);
  return matmul_nt(matmul_tn(dn, pack(g, plan)), dm);  // Dn^T * W_f * Dm^T
}

Matrix compress(const Matrix& w, const PackingPlan& plan) {
  if (w.rows() != plan.n || w.cols() != plan.m) {
    std::ostringstream os;
    os << "compress: matrix is " << w.rows() << "x" << w.cols() << ", plan expects "
       << plan.n << "x" << plan.m;
    throw std::invalid_argument(os.str());
  }
  const Matrix f = matmul(matmul(dct_basis(plan.n), w), dct_basis(plan.m));
  Matrix g(1, plan.c);
  for (int k = 0; k < plan.c; ++k) g(0, k) = f(plan.rows[k], plan.cols[k]);
  return g;
}

namespace {

struct PlanBox {
  PlanPtr plan;
};

OpId pack_op() {
  static OpId id = register_custom_op(OpDef{
      "pack", 1, PayloadPolicy::kNoSavedMats,
      [](std::span<const Matrix* const> in, OpPayload& p) {
        const auto* box = static_cast<const PlanBox*>(p.box.get());
        return pack(*in[0], *box->plan);
      },
      [](const BackwardArgs& a) {
        const auto* box = static_cast<const PlanBox*>(a.payload.box.get());
        const PackingPlan& plan = *box->plan;
        Matrix dg(1, plan.c);
        for (int k = 0; k < plan.c; ++k) dg(0, k) = a.grad(plan.rows[k], plan.cols[k]);
        return std::vector<Matrix>{std::move(dg)};
      }});
  return id;
}

}  // namespace

NodeId t_pack(Tape& t, NodeId g, PlanPtr plan) {
  auto box = std::make_shared<PlanBox>();
  box->plan = std::move(plan);
  OpPayload p;
  p.box = std::move(box);
  return t.apply(pack_op(), {g}, std::move(p));
}

NodeId t_decompress(Tape& t, NodeId g, NodeId basis_n, NodeId basis_m, PlanPtr plan) {
  NodeId wf = t_pack(t, g, std::move(plan));
  return t_matmul_nt(t, t_matmul_tn(t, basis_n, wf), basis_m);
}

int codec_selftest(std::ostream& out) {
  int failures = 0;
  auto report = [&](const std::string& label, bool ok, double detail) {
    out << (ok ? "ok   " : "FAIL ") << label << "  (" << detail << ")\n";
    if (!ok) ++failures;
  };

  const int sizes[] = {1, 2, 3, 8, 64, 80, 154, 400, 478};
  Rng rng(20240817);

  for (int n : sizes) {
    const Matrix& d = dct_basis(n);
    Matrix gram = matmul_nt(d, d);
    double err = max_abs_diff(gram, Matrix::identity(n));
    report("orthonormality D_" + std::to_string(n), err < 1e-10, err);
  }

  for (int n : sizes) {
    for (int m : {n, std::max(1, n / 2)}) {
      for (Corner corner : {Corner::kLow, Corner::kHigh}) {
        auto plan = PackingPlan::make(n, m, n * m, corner);
        Matrix w(n, m);
        for (real_t& v : w.flat()) v = static_cast<real_t>(rng.uniform(-1, 1));
        double err = max_abs_diff(decompress(compress(w, *plan), *plan), w);
        std::ostringstream label;
        label << "round-trip rate0 " << n << "x" << m << " " << to_string(corner);
        report(label.str(), err < 1e-10, err);
      }
    }
  }

  for (int n : {3, 8, 80, 154}) {
    for (Corner corner : {Corner::kLow, Corner::kHigh}) {
      const int c = coeff_budget(n, n, 0.5);
      auto plan = PackingPlan::make(n, n, c, corner);
      Matrix g(1, c);
      for (real_t& v : g.flat()) v = static_cast<real_t>(rng.uniform(-1, 1));
      double e1 = std::abs(pack(g, *plan).frobenius_norm() - g.frobenius_norm());
      double e2 = std::abs(decompress(g, *plan).frobenius_norm() - g.frobenius_norm());
      double e3 = max_abs_diff(compress(decompress(g, *plan), *plan), g);
      std::ostringstream label;
      label << "energy+projection " << n << "x" << n << " " << to_string(corner);
      // e1 is not exactly zero: the packed matrix sums the same squares in a
      // different order than the flat vector does.
      report(label.str(), e1 < 1e-10 && e2 < 1e-10 && e3 < 1e-10,
             std::max(std::max(e1, e2), e3));
    }
  }

  for (int n : {3, 5, 8}) {
    const int c = coeff_budget(n, n, 0.5);
    auto low = PackingPlan::make(n, n, c, Corner::kLow);
    auto high = PackingPlan::make(n, n, c, Corner::kHigh);
    bool ok = true;
    // High-corner cells are exactly the mirrored low-corner cells, diagonal by
    // diagonal (order inside a diagonal is its own ascending-row rule).
    std::vector<std::pair<int, int>> mirrored, actual;
    for (int k = 0; k < c; ++k) {
      mirrored.emplace_back(n - 1 - low->rows[k], n - 1 - low->cols[k]);
      actual.emplace_back(high->rows[k], high->cols[k]);
    }
    auto key = [&](std::pair<int, int> p) {
      return std::make_pair(p.first + p.second, p);  // diagonal, then cell
    };
    std::sort(mirrored.begin(), mirrored.end(),
              [&](auto a, auto b) { return key(a) < key(b); });
    std::sort(actual.begin(), actual.end(), [&](auto a, auto b) { return key(a) < key(b); });
    ok = mirrored == actual;
    report("corner mirror symmetry " + std::to_string(n) + "x" + std::to_string(n), ok,
           static_cast<double>(c));
  }

  report("budget(478,478,0.99) == 2278", coeff_budget(478, 478, 0.99) == 2278,
         coeff_budget(478, 478, 0.99));
  report("budget(154,154,0.90) == 2346", coeff_budget(154, 154, 0.90) == 2346,
         coeff_budget(154, 154, 0.90));
  {
    bool mono = true;
    for (int n : {8, 80}) {
      int prev = n * n + 1;
      for (double r = 0.0; r <= 1.0001; r += 0.05) {
        int c = coeff_budget(n, n, std::min(1.0, r));
        if (c > prev) mono = false;
        if (c > std::floor((1.0 - std::min(1.0, r)) * n * n + kBudgetEps)) mono = false;
        prev = c;
      }
    }
    report("budget monotone + under raw floor", mono, 0);
  }

  out << (failures == 0 ? "codec selftest passed\n"
                        : "codec selftest FAILED (" + std::to_string(failures) + ")\n");
  return failures;
}

}  // namespace dctlm
