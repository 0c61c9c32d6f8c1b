#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "zono/linalg.hpp"

namespace zono {

/// minimize objective.x  subject to  row.x >= rhs for every constraint,
/// var_lo <= x <= var_hi (all bounds finite).
struct LinearProgram {
  Vec objective;
  Vec var_lo, var_hi;
  std::vector<std::pair<Vec, double>> constraints;
};

enum class LpStatus { Optimal, Infeasible, IterLimit };

struct LpResult {
  LpStatus status = LpStatus::IterLimit;
  double value = 0.0;
  Vec x;
};

namespace detail {

/// Bounded-variable primal simplex on a dense tableau.  Phase 1 minimizes
/// artificial surplus; Bland's rule (smallest eligible index entering,
/// smallest basic index leaving on ratio ties) prevents cycling.  Built for
/// small dense problems; robustness over speed.
class BoundedSimplex {
public:
  explicit BoundedSimplex(const LinearProgram& lp) { build(lp); }

  LpResult run() {
    LpResult res;
    if (nart_ > 0) {
      Vec phase1_cost(ncols_, 0.0);
      for (std::size_t j = art_begin_; j < ncols_; ++j) phase1_cost[j] = 1.0;
      if (!iterate(phase1_cost)) return res;  // IterLimit
      double infeas = 0.0;
      for (std::size_t r = 0; r < rows_; ++r)
        if (basis_[r] >= art_begin_) infeas += std::max(0.0, beta_[r]);
      if (infeas > kFeasTol) {
        res.status = LpStatus::Infeasible;
        return res;
      }
      lock_artificials();
    }
    Vec cost(ncols_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) cost[j] = obj_[j];
    if (!iterate(cost)) return res;
    res.x = current_x();
    if (!feasible(res.x)) return res;  // numerical trouble -> IterLimit
    res.status = LpStatus::Optimal;
    res.value = dot(obj_, res.x);
    return res;
  }

private:
  static constexpr double kPivTol = 1e-9;
  static constexpr double kFeasTol = 1e-7;
  static constexpr double kDualTol = 1e-9;
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  void build(const LinearProgram& lp) {
    n_ = lp.objective.size();
    rows_ = lp.constraints.size();
    obj_ = lp.objective;
    if (lp.var_lo.size() != n_ || lp.var_hi.size() != n_)
      throw std::invalid_argument("solve_lp: bound vector length mismatch");
    for (std::size_t j = 0; j < n_; ++j)
      if (!(lp.var_lo[j] <= lp.var_hi[j]) || !std::isfinite(lp.var_lo[j]) ||
          !std::isfinite(lp.var_hi[j]))
        throw std::invalid_argument("solve_lp: variable bounds must be finite with lo <= hi");

    // Residual of each constraint at x = var_lo decides whether the surplus
    // column itself can start basic or an artificial is needed.
    Vec q(rows_);
    std::size_t nart = 0;
    for (std::size_t i = 0; i < rows_; ++i) {
      const auto& [row, rhs] = lp.constraints[i];
      if (row.size() != n_)
        throw std::invalid_argument("solve_lp: constraint row length mismatch");
      q[i] = dot(row, lp.var_lo) - rhs;
      if (q[i] < 0.0) ++nart;
    }
    nart_ = nart;
    art_begin_ = n_ + rows_;
    ncols_ = n_ + rows_ + nart_;

    lo_.assign(ncols_, 0.0);
    hi_.assign(ncols_, kInf);
    for (std::size_t j = 0; j < n_; ++j) {
      lo_[j] = lp.var_lo[j];
      hi_[j] = lp.var_hi[j];
    }
    at_upper_.assign(ncols_, 0);
    is_basic_.assign(ncols_, 0);
    basis_.assign(rows_, 0);
    beta_.assign(rows_, 0.0);
    tab_.assign(rows_, Vec(ncols_, 0.0));
    iters_left_ = 50 * (n_ + rows_) + 50;

    std::size_t art = art_begin_;
    for (std::size_t i = 0; i < rows_; ++i) {
      Vec& t = tab_[i];
      const Vec& row = lp.constraints[i].first;
      for (std::size_t j = 0; j < n_; ++j) t[j] = row[j];
      t[n_ + i] = -1.0;  // surplus
      if (q[i] >= 0.0) {
        // surplus basic; initial basis entry is -1, so flip the row
        for (double& v : t) v = -v;
        basis_[i] = n_ + i;
        beta_[i] = q[i];
      } else {
        t[art] = 1.0;
        basis_[i] = art;
        beta_[i] = -q[i];
        ++art;
      }
      is_basic_[basis_[i]] = 1;
    }
  }

  double nonbasic_value(std::size_t j) const { return at_upper_[j] ? hi_[j] : lo_[j]; }

  Vec current_x() const {
    Vec x(n_);
    for (std::size_t j = 0; j < n_; ++j) x[j] = nonbasic_value(j);
    for (std::size_t r = 0; r < rows_; ++r)
      if (basis_[r] < n_) x[basis_[r]] = beta_[r];
    return x;
  }

  bool feasible(const Vec& x) const {
    for (std::size_t j = 0; j < n_; ++j)
      if (x[j] < lo_[j] - kFeasTol || x[j] > hi_[j] + kFeasTol) return false;
    return true;
  }

  void lock_artificials() {
    for (std::size_t j = art_begin_; j < ncols_; ++j) hi_[j] = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) {
      if (basis_[r] < art_begin_) continue;
      if (std::abs(beta_[r]) <= kFeasTol) beta_[r] = 0.0;
      // try to swap the artificial for any usable column (degenerate pivot)
      for (std::size_t j = 0; j < art_begin_; ++j) {
        if (is_basic_[j] || std::abs(tab_[r][j]) <= kPivTol) continue;
        pivot(r, j, nonbasic_value(j));
        break;
      }
    }
  }

  /// Row-reduce so column e becomes basic in row lr with value enter_val.
  void pivot(std::size_t lr, std::size_t e, double enter_val) {
    const std::size_t leaving = basis_[lr];
    is_basic_[leaving] = 0;
    const double piv = tab_[lr][e];
    Vec& prow = tab_[lr];
    for (double& v : prow) v /= piv;
    prow[e] = 1.0;
    for (std::size_t r = 0; r < rows_; ++r) {
      if (r == lr) continue;
      const double f = tab_[r][e];
      if (f == 0.0) continue;
      Vec& row = tab_[r];
      for (std::size_t j = 0; j < ncols_; ++j) row[j] -= f * prow[j];
      row[e] = 0.0;
    }
    basis_[lr] = e;
    is_basic_[e] = 1;
    beta_[lr] = enter_val;
  }

  /// Returns false only on iteration-limit / numerical trouble.
  bool iterate(const Vec& cost) {
    while (iters_left_-- > 0) {
      // multipliers y_r = cost of the basic variable in row r
      Vec y(rows_);
      for (std::size_t r = 0; r < rows_; ++r) y[r] = cost[basis_[r]];

      // Bland: smallest-index improving nonbasic column
      std::size_t e = ncols_;
      double dir = 1.0;
      for (std::size_t j = 0; j < ncols_; ++j) {
        if (is_basic_[j] || !(lo_[j] < hi_[j])) continue;
        double rc = cost[j];
        for (std::size_t r = 0; r < rows_; ++r) rc -= y[r] * tab_[r][j];
        if (!at_upper_[j] && rc < -kDualTol) {
          e = j;
          dir = 1.0;
          break;
        }
        if (at_upper_[j] && rc > kDualTol) {
          e = j;
          dir = -1.0;
          break;
        }
      }
      if (e == ncols_) return true;  // optimal for this cost

      // ratio test: how far can x_e move before a basic variable (or x_e's
      // own opposite bound) hits a bound
      double limit = hi_[e] - lo_[e];  // own flip; may be +inf for surplus
      std::ptrdiff_t lr = -1;
      for (std::size_t r = 0; r < rows_; ++r) {
        const double u = tab_[r][e] * dir;
        double ratio = kInf;
        if (u > kPivTol) {
          ratio = std::max(0.0, beta_[r] - lo_[basis_[r]]) / u;
        } else if (u < -kPivTol) {
          if (hi_[basis_[r]] == kInf) continue;
          ratio = std::max(0.0, hi_[basis_[r]] - beta_[r]) / (-u);
        } else {
          continue;
        }
        if (ratio < limit - 1e-12 ||
            (ratio < limit + 1e-12 && (lr < 0 || basis_[r] < basis_[lr]))) {
          limit = ratio;
          lr = static_cast<std::ptrdiff_t>(r);
        }
      }
      if (!(limit < kInf)) return false;  // unbounded ray: numerical trouble

      const double step = dir * limit;
      if (lr < 0) {
        for (std::size_t r = 0; r < rows_; ++r) beta_[r] -= tab_[r][e] * step;
        at_upper_[e] = !at_upper_[e];
        continue;
      }
      const double enter_val = nonbasic_value(e) + step;
      const bool leave_at_upper = tab_[lr][e] * dir < 0.0;
      for (std::size_t r = 0; r < rows_; ++r)
        if (static_cast<std::ptrdiff_t>(r) != lr) beta_[r] -= tab_[r][e] * step;
      at_upper_[basis_[lr]] = leave_at_upper ? 1 : 0;
      pivot(static_cast<std::size_t>(lr), e, enter_val);
    }
    return false;
  }

  std::size_t n_ = 0, rows_ = 0, ncols_ = 0, art_begin_ = 0, nart_ = 0;
  Vec obj_;
  std::vector<Vec> tab_;
  Vec beta_, lo_, hi_;
  std::vector<std::size_t> basis_;
  std::vector<char> at_upper_, is_basic_;
  long iters_left_ = 0;
};

}  // namespace detail

/// Exact solver for small dense LPs with boxed variables.  Never reports
/// Unbounded (the box precludes it); IterLimit signals numerical trouble and
/// callers fall back to an interval relaxation.
inline LpResult solve_lp(const LinearProgram& lp) {
  return detail::BoundedSimplex(lp).run();
}

}  // namespace zono
