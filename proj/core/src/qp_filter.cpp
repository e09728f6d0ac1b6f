#include "resdob/qp_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace resdob {

namespace {

constexpr double kFeasTol = 1e-9;

// a . z + b >= 0
struct Row {
  Eigen::VectorXd a;
  double b = 0.0;
};

// At most kMaxFilterDim controls plus the shared slack; fixed capacity keeps
// the per-subset factorizations off the heap.
constexpr int kMaxVars = kMaxFilterDim + 1;
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxVars, 1>;
using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxVars, kMaxVars>;

struct SmallRow {
  SmallVec a;
  double b = 0.0;
};

struct Candidate {
  Eigen::VectorXd z;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<int> active;
};

// Works in whitened coordinates y = L^T (z - z0), Q = L L^T, where the
// objective is 0.5 |y|^2 and each active set gives a minimum-norm solution.
class ActiveSetEnumerator {
 public:
  ActiveSetEnumerator(const Eigen::MatrixXd& Q, const Eigen::VectorXd& z0,
                      const std::vector<Row>& rows)
      : llt_(Q), z0_(z0) {
    for (const Row& row : rows) {
      rows_.push_back(SmallRow{llt_.matrixL().solve(row.a), row.a.dot(z0) + row.b});
    }
  }

  std::optional<Candidate> run(int max_active) {
    std::vector<int> subset;
    for (int k = 0; k <= max_active && k <= static_cast<int>(rows_.size()) && !optimal_; ++k) {
      subset.clear();
      visit(0, k, subset);
    }
    if (best_) best_->z = z0_ + llt_.matrixU().solve(best_->z);
    return best_;
  }

 private:
  void visit(int start, int remaining, std::vector<int>& subset) {
    if (optimal_) return;
    if (remaining == 0) {
      evaluate(subset);
      return;
    }
    const int n = static_cast<int>(rows_.size());
    for (int i = start; i <= n - remaining; ++i) {
      subset.push_back(i);
      visit(i + 1, remaining - 1, subset);
      subset.pop_back();
    }
  }

  void evaluate(const std::vector<int>& subset) {
    const int n = static_cast<int>(z0_.size());
    const int k = static_cast<int>(subset.size());
    SmallVec y = SmallVec::Zero(n);
    SmallVec mu(k);
    if (k > 0) {
      // A^T P = Q R; the minimum-norm solution of A y = -r is y = A^T mu.
      SmallMat At(n, k);
      SmallVec r(k);
      for (int i = 0; i < k; ++i) {
        At.col(i) = rows_[subset[i]].a;
        r[i] = rows_[subset[i]].b;
      }
      Eigen::ColPivHouseholderQR<SmallMat> qr(At);
      qr.setThreshold(1e-10);
      if (qr.rank() < k) return;
      const auto R = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
      const SmallVec w = R.transpose().solve(SmallVec(-(qr.colsPermutation().transpose() * r)));
      SmallVec wn = SmallVec::Zero(n);
      wn.head(k) = w;
      y = qr.householderQ() * wn;
      mu = qr.colsPermutation() * SmallVec(R.solve(w));
      if (!y.allFinite()) return;
    }
    for (const SmallRow& row : rows_) {
      const double scale = 1.0 + std::abs(row.b) + row.a.norm() * y.norm();
      if (row.a.dot(y) + row.b < -kFeasTol * scale) return;
    }
    const double obj = 0.5 * y.squaredNorm();
    const double tie = 1e-12 * (1.0 + obj);
    if (!best_ || obj < best_->objective - tie) {
      best_ = Candidate{Eigen::VectorXd(y), obj, subset};
    }
    // Feasible with non-negative multipliers: KKT holds, so this is the optimum.
    if (k == 0 || (mu.array() >= -kFeasTol * (1.0 + mu.cwiseAbs().maxCoeff())).all()) optimal_ = true;
  }

  Eigen::LLT<SmallMat> llt_;
  const Eigen::VectorXd& z0_;
  std::vector<SmallRow> rows_;
  std::optional<Candidate> best_;
  bool optimal_ = false;
};

}  // namespace

FilterProblem FilterProblem::make(Eigen::MatrixXd P, Eigen::VectorXd u_rl,
                                  std::vector<BarrierConstraint> constraints,
                                  Eigen::VectorXd lower, Eigen::VectorXd upper) {
  const Eigen::Index m = u_rl.size();
  if (m < 1 || m > kMaxFilterDim) throw std::invalid_argument("filter: control dimension out of range");
  if (P.rows() != m || P.cols() != m) throw std::invalid_argument("filter: P shape mismatch");
  if (lower.size() != m || upper.size() != m) throw std::invalid_argument("filter: box shape mismatch");
  if (!((upper - lower).array() > 0.0).all()) {
    throw std::invalid_argument("filter: box lower must be < upper");
  }
  if (!P.allFinite() || !(P - P.transpose()).isZero(1e-12 * (1.0 + P.norm()))) {
    throw std::invalid_argument("filter: P must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(P);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("filter: P must be positive-definite");
  for (const auto& c : constraints) {
    if (c.coeff.size() != m) throw std::invalid_argument("filter: constraint dimension mismatch");
    if (!c.coeff.allFinite() || !std::isfinite(c.rhs)) {
      throw std::invalid_argument("filter: non-finite constraint");
    }
  }
  return FilterProblem{std::move(P), std::move(u_rl), std::move(constraints), std::move(lower),
                       std::move(upper)};
}

FilterResult solve(const FilterProblem& p) {
  const int m = static_cast<int>(p.u_rl.size());
  const int nb = static_cast<int>(p.constraints.size());

  auto box_rows = [&](int dim) {
    std::vector<Row> rows;
    for (int i = 0; i < m; ++i) {
      Row r{Eigen::VectorXd::Zero(dim), -p.lower[i]};
      r.a[i] = 1.0;
      rows.push_back(std::move(r));
    }
    for (int i = 0; i < m; ++i) {
      Row r{Eigen::VectorXd::Zero(dim), p.upper[i]};
      r.a[i] = -1.0;
      rows.push_back(std::move(r));
    }
    return rows;
  };

  FilterResult result;
  std::optional<Candidate> best;
  {
    std::vector<Row> rows;
    for (const auto& c : p.constraints) rows.push_back(Row{c.coeff, c.rhs});
    for (auto& r : box_rows(m)) rows.push_back(std::move(r));
    ActiveSetEnumerator solver(p.P, p.u_rl, rows);
    best = solver.run(m);
  }

  if (best) {
    result.u_safe = best->z;
    result.objective = best->objective;
    result.active_constraints = best->active;
  } else {
    // Relaxation over z = (u, s).
    const int n = m + 1;
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
    Q.topLeftCorner(m, m) = p.P;
    Q(m, m) = 2.0 * kSlackPenalty;
    Eigen::VectorXd z0 = Eigen::VectorXd::Zero(n);
    z0.head(m) = p.u_rl;
    std::vector<Row> rows;
    for (const auto& c : p.constraints) {
      Row r{Eigen::VectorXd::Zero(n), c.rhs};
      r.a.head(m) = c.coeff;
      r.a[m] = 1.0;
      rows.push_back(std::move(r));
    }
    for (auto& r : box_rows(n)) rows.push_back(std::move(r));
    Row slack_nonneg{Eigen::VectorXd::Zero(n), 0.0};
    slack_nonneg.a[m] = 1.0;
    rows.push_back(std::move(slack_nonneg));

    ActiveSetEnumerator solver(Q, z0, rows);
    std::optional<Candidate> relaxed = solver.run(n);
    if (!relaxed) {
      // Unreachable for a valid box: the box corner with a large slack is feasible.
      throw std::runtime_error("filter: relaxed problem has no feasible active set");
    }
    result.u_safe = relaxed->z.head(m);
    result.slack_used = std::max(0.0, relaxed->z[m]);
    const Eigen::VectorXd du = result.u_safe - p.u_rl;
    result.objective = 0.5 * du.dot(p.P * du);
    for (int idx : relaxed->active) {
      if (idx < nb + 2 * m) result.active_constraints.push_back(idx);
    }
  }

  result.u_safe = result.u_safe.cwiseMax(p.lower).cwiseMin(p.upper);
  result.intervention_norm = (result.u_safe - p.u_rl).norm();
  result.intervened = result.intervention_norm > 0.0;
  return result;
}

}  // namespace resdob
