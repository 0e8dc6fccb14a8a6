// SPDX-FileCopyrightText: Copyright (c) 2026 the irscran authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <variant>
#include <vector>

#include "irscran/types.hpp"

namespace irscran::conic {

// ---------------------------------------------------------------------------
// Program description
// ---------------------------------------------------------------------------

/// Sparse affine form a^T x + b over the program's real decision vector.
struct Affine {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  Affine& add(int var, double coef) {
    if (coef != 0.0) terms.emplace_back(var, coef);
    return *this;
  }
  double eval(const VecR& x) const {
    double v = constant;
    for (auto [i, c] : terms) v += c * x[i];
    return v;
  }
  void add_gradient(VecR& g, double scale) const {
    for (auto [i, c] : terms) g[i] += scale * c;
  }
  void scatter(VecR& dense) const {
    for (auto [i, c] : terms) dense[i] += c;
  }
};

/// f(x) <= 0 with f affine.
struct AffineIneq {
  Affine f;
};
/// f(x) == 0 with f affine.
struct AffineEq {
  Affine f;
};
/// sum_i rows_i(x)^2 <= rhs(x)   (convex quadratic constraint)
struct QuadIneq {
  std::vector<Affine> rows;
  Affine rhs;
};
/// || rows(x) ||_2 <= rhs(x)     (second-order cone)
struct SocIneq {
  std::vector<Affine> rows;
  Affine rhs;
};
/// r(x) <= scale * log2(1 + t(x)), domain 1 + t(x) > 0
struct LogIneq {
  Affine r;
  Affine t;
  double scale = 1.0;
};
/// Hermitian PSD block of dimension `dim`. Entry (i,i) is the real variable
/// diag[i]; entry (i,j), i<j, is off[q].first + i*off[q].second with q the
/// row-major upper-triangle index. The constraint is M(x) >= 0.
struct PsdBlock {
  int dim = 0;
  std::vector<int> diag;
  std::vector<std::array<int, 2>> off;

  int off_index(int i, int j) const {  // i < j
    return i * dim - i * (i + 1) / 2 + (j - i - 1);
  }
  MatC matrix(const VecR& x) const {
    MatC M(dim, dim);
    for (int i = 0; i < dim; ++i) M(i, i) = x[diag[i]];
    for (int i = 0; i < dim; ++i)
      for (int j = i + 1; j < dim; ++j) {
        const auto& o = off[off_index(i, j)];
        const cplx z(x[o[0]], x[o[1]]);
        M(i, j) = z;
        M(j, i) = std::conj(z);
      }
    return M;
  }
};

enum class SolveStatus { optimal, infeasible, max_iters };

struct Solution {
  SolveStatus status = SolveStatus::max_iters;
  VecR x;
  double objective = 0.0;     ///< value of the minimized objective
  double max_residual = 0.0;  ///< worst primal constraint violation
  double duality_gap = 0.0;   ///< barrier gap certificate at exit
  int newton_iters = 0;
  std::vector<double> merit_trace;  ///< centering merit per Newton step
  bool feasible() const { return status == SolveStatus::optimal; }
};

/// A dense convex program: minimize obj^T x + obj_constant over the listed
/// constraints. Complex quantities are pre-split into real variables by the
/// builders.
struct Program {
  int num_vars = 0;
  VecR obj;  // resized lazily
  double obj_constant = 0.0;
  std::vector<AffineIneq> lin;
  std::vector<AffineEq> eq;
  std::vector<QuadIneq> quad;
  std::vector<SocIneq> soc;
  std::vector<LogIneq> log;
  std::vector<PsdBlock> psd;
  std::vector<double> x0;  ///< optional initial point (valid domains required)

  int add_var() { return num_vars++; }
  std::vector<int> add_vars(int count) {
    std::vector<int> idx(count);
    for (int i = 0; i < count; ++i) idx[i] = add_var();
    return idx;
  }
  void set_obj(int var, double coef) {
    if (obj.size() < num_vars) {
      VecR grown = VecR::Zero(num_vars);
      grown.head(obj.size()) = obj;
      obj = grown;
    }
    obj[var] = coef;
  }
  VecR objective_vector() const {
    VecR c = VecR::Zero(num_vars);
    c.head(obj.size()) = obj;
    return c;
  }
  std::size_t constraint_count() const {
    return lin.size() + eq.size() + quad.size() + soc.size() + log.size() + psd.size();
  }
};

void dump(const Program& p, std::ostream& os);

// ---------------------------------------------------------------------------
// Solver: primal barrier path-following over the cone family above.
//
// Equalities are eliminated up front (single-variable rows fix variables,
// the rest go through a dense nullspace), feasibility is established by a
// phase-I minimization of a single infeasibility shift s, and each centering
// stage runs damped Newton on  t * c^T x + sum(-log slack_i) - sum log det M_j.
// ---------------------------------------------------------------------------

namespace detail {

struct QuadCache {
  std::vector<int> support;  // sorted unique full-space vars
  MatR ata;                  // sum a_i a_i^T over support (quad) or A^T A (soc)
};

inline QuadCache build_cache(const std::vector<Affine>& rows, int /*num_vars*/) {
  QuadCache c;
  for (const auto& r : rows)
    for (auto [i, _] : r.terms) c.support.push_back(i);
  std::sort(c.support.begin(), c.support.end());
  c.support.erase(std::unique(c.support.begin(), c.support.end()), c.support.end());
  const int m = static_cast<int>(c.support.size());
  c.ata = MatR::Zero(m, m);
  std::vector<int> pos;
  for (const auto& r : rows) {
    pos.clear();
    std::vector<double> coef;
    for (auto [i, cf] : r.terms) {
      const int p = static_cast<int>(
          std::lower_bound(c.support.begin(), c.support.end(), i) - c.support.begin());
      pos.push_back(p);
      coef.push_back(cf);
    }
    for (std::size_t a = 0; a < pos.size(); ++a)
      for (std::size_t b = 0; b < pos.size(); ++b) c.ata(pos[a], pos[b]) += coef[a] * coef[b];
  }
  return c;
}

/// Shared scratch for one barrier evaluation sweep.
struct BarrierEval {
  bool ok = true;       // all slacks strictly positive, PSD blocks PD
  double phi = 0.0;     // barrier value
  double min_slack = std::numeric_limits<double>::infinity();
};

}  // namespace detail

class Solver {
 public:
  Solver(const Program& p, double tol, int max_iters)
      : p_(p), tol_(tol), max_iters_(max_iters) {
    n_ = p.num_vars;
    c_full_ = p.objective_vector();
    obj_scale_ = std::max(1.0, c_full_.cwiseAbs().maxCoeff());
    c_full_ /= obj_scale_;
    for (const auto& q : p_.quad) quad_cache_.push_back(detail::build_cache(q.rows, n_));
    for (const auto& s : p_.soc) soc_cache_.push_back(detail::build_cache(s.rows, n_));
    nu_ = static_cast<double>(p_.lin.size() + p_.quad.size() + 2 * p_.soc.size() + p_.log.size());
    for (const auto& b : p_.psd) nu_ += b.dim;
    reduce_equalities();
  }

  /// Barrier value at a full-space point (also usable as a feasibility probe).
  detail::BarrierEval eval_barrier_at(const VecR& x_full, double shift = 0.0) const {
    return barrier(x_full, shift);
  }
  /// Barrier first and second derivatives at a full-space point.
  void eval_derivs_at(const VecR& x_full, double shift, bool with_s, VecR& g, MatR& H,
                      double& g_s, double& h_ss, VecR& h_sx) const {
    g.resize(n_);
    H.resize(n_, n_);
    if (with_s) h_sx.resize(n_);
    barrier_derivs(x_full, shift, with_s, g, H, g_s, h_ss, h_sx);
  }

  Solution solve() {
    Solution sol;
    VecR z = initial_reduced_point();
    // Phase I: find a strictly feasible point unless the start already is one.
    double shift = required_shift(z);
    if (shift > -strict_margin()) {
      if (!phase1(z, sol)) {
        sol.status = SolveStatus::infeasible;
        finalize(sol, z, 0.0);
        return sol;
      }
    }
    // Phase II: path-following on the real objective. The stage multiplier
    // adapts to the observed centering effort.
    double t_bar = 1.0;
    double mu = mu_;
    bool converged = false;
    while (sol.newton_iters < max_iters_) {
      const int before = sol.newton_iters;
      if (!center(z, t_bar, /*phase1=*/false, /*s=*/nullptr, sol)) break;
      if (nu_ / t_bar <= tol_) {
        converged = true;
        break;
      }
      const int spent = sol.newton_iters - before;
      if (spent <= 3)
        mu = std::min(mu * 2.5, 200.0);
      else if (spent > 12)
        mu = std::max(mu * 0.5, 10.0);
      t_bar *= mu;
    }
    sol.status = converged ? SolveStatus::optimal : SolveStatus::max_iters;
    finalize(sol, z, nu_ / t_bar);
    return sol;
  }

 private:
  // ---- equality elimination ------------------------------------------------
  void reduce_equalities() {
    fixed_.assign(n_, std::numeric_limits<double>::quiet_NaN());
    std::vector<AffineEq> general;
    for (const auto& e : p_.eq) {
      if (e.f.terms.size() == 1) {
        const auto [i, c] = e.f.terms[0];
        fixed_[i] = -e.f.constant / c;
      } else {
        general.push_back(e);
      }
    }
    free_.clear();
    for (int i = 0; i < n_; ++i)
      if (std::isnan(fixed_[i])) free_.push_back(i);
    const int nf = static_cast<int>(free_.size());
    if (general.empty()) {
      null_ = MatR::Identity(nf, nf);
      y0_ = VecR::Zero(nf);
      nz_ = nf;
      identity_null_ = true;
      return;
    }
    identity_null_ = false;
    MatR A = MatR::Zero(static_cast<int>(general.size()), nf);
    VecR b = VecR::Zero(static_cast<int>(general.size()));
    std::vector<int> inv(n_, -1);
    for (int j = 0; j < nf; ++j) inv[free_[j]] = j;
    for (std::size_t r = 0; r < general.size(); ++r) {
      double cst = general[r].f.constant;
      for (auto [i, c] : general[r].f.terms) {
        if (inv[i] >= 0)
          A(static_cast<int>(r), inv[i]) = c;
        else
          cst += c * fixed_[i];
      }
      b[static_cast<int>(r)] = -cst;
    }
    Eigen::CompleteOrthogonalDecomposition<MatR> cod(A);
    y0_ = cod.solve(b);
    eq_residual_ = (A * y0_ - b).cwiseAbs().maxCoeff();
    // Nullspace basis from the full SVD.
    Eigen::JacobiSVD<MatR> svd(A, Eigen::ComputeFullV);
    const double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
    int rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()[i] > 1e-12 * std::max(1.0, smax)) ++rank;
    null_ = svd.matrixV().rightCols(nf - rank);
    nz_ = nf - rank;
  }

  VecR expand(const VecR& z) const {
    VecR x = VecR::Zero(n_);
    for (int i = 0; i < n_; ++i)
      if (!std::isnan(fixed_[i])) x[i] = fixed_[i];
    const VecR y = identity_null_ ? z : VecR(y0_ + null_ * z);
    for (std::size_t j = 0; j < free_.size(); ++j) x[free_[j]] = y[static_cast<int>(j)];
    return x;
  }

  /// Gathers a full-space gradient into the reduced space.
  VecR reduce_grad(const VecR& g_full) const {
    VecR gy(free_.size());
    for (std::size_t j = 0; j < free_.size(); ++j) gy[static_cast<int>(j)] = g_full[free_[j]];
    return identity_null_ ? gy : VecR(null_.transpose() * gy);
  }

  MatR reduce_hess(const MatR& h_full) const {
    MatR hy(free_.size(), free_.size());
    for (std::size_t a = 0; a < free_.size(); ++a)
      for (std::size_t b = 0; b < free_.size(); ++b)
        hy(static_cast<int>(a), static_cast<int>(b)) = h_full(free_[a], free_[b]);
    return identity_null_ ? hy : MatR(null_.transpose() * hy * null_);
  }

  // ---- starting point -------------------------------------------------------
  VecR initial_reduced_point() const {
    VecR z = VecR::Zero(nz_);
    if (static_cast<int>(p_.x0.size()) == n_) {
      VecR y(free_.size());
      for (std::size_t j = 0; j < free_.size(); ++j)
        y[static_cast<int>(j)] = p_.x0[free_[j]];
      z = identity_null_ ? y : VecR(null_.transpose() * (y - y0_));
    }
    return z;
  }

  double strict_margin() const { return 1e-9; }

  /// Smallest shift s such that every constraint satisfies f(x) <= s and
  /// every PSD block satisfies M + sI > 0 (with a little room).
  double required_shift(const VecR& z) const {
    const VecR x = expand(z);
    double s = -std::numeric_limits<double>::infinity();
    auto upd = [&](double f) { s = std::max(s, f); };
    for (const auto& c : p_.lin) upd(c.f.eval(x));
    for (const auto& c : p_.quad) {
      double q = -c.rhs.eval(x);
      for (const auto& r : c.rows) {
        const double v = r.eval(x);
        q += v * v;
      }
      upd(q);
    }
    for (const auto& c : p_.soc) {
      double nrm = 0.0;
      for (const auto& r : c.rows) {
        const double v = r.eval(x);
        nrm += v * v;
      }
      upd(std::sqrt(nrm) - c.rhs.eval(x));
    }
    for (const auto& c : p_.log) {
      const double tt = c.t.eval(x);
      if (1.0 + tt <= 1e-12) return std::numeric_limits<double>::infinity();
      upd(c.r.eval(x) - c.scale * std::log2(1.0 + tt));
    }
    for (const auto& b : p_.psd) {
      Eigen::SelfAdjointEigenSolver<MatC> es(b.matrix(x), Eigen::EigenvaluesOnly);
      upd(-es.eigenvalues().minCoeff());
    }
    return s;
  }

  // ---- barrier evaluation ----------------------------------------------------
  // Each scalar constraint contributes -log(s_shift - f(x)); PSD blocks
  // contribute -log det(M(x) + s_shift I).
  detail::BarrierEval barrier(const VecR& x, double s_shift) const {
    detail::BarrierEval ev;
    // Phase-I bounding box; keeps the infeasibility minimization coercive
    // when some coordinate only ever relaxes constraints.
    if (phase1_box_ > 0.0) {
      for (int i : free_) {
        const double lo = phase1_box_ + x[i];
        const double hi = phase1_box_ - x[i];
        if (lo <= 0.0 || hi <= 0.0) {
          ev.ok = false;
          return ev;
        }
        ev.phi -= std::log(lo) + std::log(hi);
      }
    }
    auto scalar = [&](double f) {
      const double slack = s_shift - f;
      ev.min_slack = std::min(ev.min_slack, slack);
      if (slack <= 0.0) {
        ev.ok = false;
        return;
      }
      ev.phi -= std::log(slack);
    };
    for (const auto& c : p_.lin) {
      scalar(c.f.eval(x));
      if (!ev.ok) return ev;
    }
    for (const auto& c : p_.quad) {
      double q = -c.rhs.eval(x);
      for (const auto& r : c.rows) {
        const double v = r.eval(x);
        q += v * v;
      }
      scalar(q);
      if (!ev.ok) return ev;
    }
    for (const auto& c : p_.soc) {
      const double u = c.rhs.eval(x) + s_shift;
      double nrm2 = 0.0;
      for (const auto& r : c.rows) {
        const double v = r.eval(x);
        nrm2 += v * v;
      }
      const double slack = u * u - nrm2;
      ev.min_slack = std::min(ev.min_slack, slack);
      if (u <= 0.0 || slack <= 0.0) {
        ev.ok = false;
        return ev;
      }
      ev.phi -= std::log(slack);
    }
    for (const auto& c : p_.log) {
      const double tt = c.t.eval(x);
      if (1.0 + tt <= 0.0) {
        ev.ok = false;
        return ev;
      }
      scalar(c.r.eval(x) - c.scale * std::log2(1.0 + tt));
      if (!ev.ok) return ev;
    }
    for (const auto& b : p_.psd) {
      MatC M = b.matrix(x);
      for (int i = 0; i < b.dim; ++i) M(i, i) += s_shift;
      Eigen::LLT<MatC> llt(M);
      if (llt.info() != Eigen::Success) {
        ev.ok = false;
        return ev;
      }
      double logdet = 0.0;
      for (int i = 0; i < b.dim; ++i) logdet += std::log(std::real(llt.matrixL()(i, i)));
      ev.phi -= 2.0 * logdet;
    }
    return ev;
  }

  /// Accumulates barrier gradient and Hessian in full variable space.
  /// In phase I (`with_s`), the extra scalars g_s, h_ss and the coupling row
  /// h_sx are filled in for the shift variable.
  void barrier_derivs(const VecR& x, double s_shift, bool with_s, VecR& g, MatR& H, double& g_s,
                      double& h_ss, VecR& h_sx) const {
    g.setZero();
    H.setZero();
    g_s = 0.0;
    h_ss = 0.0;
    if (with_s) h_sx.setZero();

    if (phase1_box_ > 0.0) {
      for (int i : free_) {
        const double lo = phase1_box_ + x[i];
        const double hi = phase1_box_ - x[i];
        g[i] += 1.0 / hi - 1.0 / lo;
        H(i, i) += 1.0 / (hi * hi) + 1.0 / (lo * lo);
      }
    }

    // Generic scalar handler: slack = s - f(x), grad f given sparse.
    // d(-log slack)/dx = fx / slack ; d/ds = -1/slack
    // Hessian = [fx;-1][fx;-1]^T / slack^2 + Hf / slack
    auto scalar_rank1 = [&](const VecR& fx_dense, const std::vector<int>& support, double slack) {
      const double inv = 1.0 / slack;
      const double inv2 = inv * inv;
      for (int a : support) g[a] += fx_dense[a] * inv;
      for (int a : support)
        for (int b : support) H(a, b) += fx_dense[a] * fx_dense[b] * inv2;
      if (with_s) {
        g_s -= inv;
        h_ss += inv2;
        for (int a : support) h_sx[a] -= fx_dense[a] * inv2;
      }
    };

    VecR dense = VecR::Zero(n_);
    std::vector<int> support;
    auto load_affine = [&](const Affine& a) {
      support.clear();
      for (auto [i, c] : a.terms) {
        if (dense[i] == 0.0) support.push_back(i);
        dense[i] += c;
      }
    };
    auto clear_dense = [&]() {
      for (int i : support) dense[i] = 0.0;
    };

    for (const auto& c : p_.lin) {
      const double slack = s_shift - c.f.eval(x);
      load_affine(c.f);
      scalar_rank1(dense, support, slack);
      clear_dense();
    }

    for (std::size_t qi = 0; qi < p_.quad.size(); ++qi) {
      const auto& c = p_.quad[qi];
      const auto& cache = quad_cache_[qi];
      double q = -c.rhs.eval(x);
      // grad f = 2 sum r_i a_i - rhs_vec
      support.clear();
      for (const auto& r : c.rows) {
        const double v = r.eval(x);
        q += v * v;
        for (auto [i, cf] : r.terms) {
          if (dense[i] == 0.0) support.push_back(i);
          dense[i] += 2.0 * v * cf;
        }
      }
      for (auto [i, cf] : c.rhs.terms) {
        if (dense[i] == 0.0) support.push_back(i);
        dense[i] -= cf;
      }
      const double slack = s_shift - q;
      scalar_rank1(dense, support, slack);
      // curvature part: 2 A^T A / slack over the cached support
      const double inv = 1.0 / slack;
      const int m = static_cast<int>(cache.support.size());
      for (int a = 0; a < m; ++a) {
        const int ia = cache.support[a];
        for (int b = 0; b < m; ++b) H(ia, cache.support[b]) += 2.0 * inv * cache.ata(a, b);
      }
      clear_dense();
    }

    for (std::size_t si = 0; si < p_.soc.size(); ++si) {
      const auto& c = p_.soc[si];
      const auto& cache = soc_cache_[si];
      const double u = c.rhs.eval(x) + s_shift;
      double nrm2 = 0.0;
      // grad slack = 2u * rhs_vec - 2 sum r_i a_i ; slack = u^2 - ||r||^2
      support.clear();
      for (const auto& r : c.rows) {
        const double v = r.eval(x);
        nrm2 += v * v;
        for (auto [i, cf] : r.terms) {
          if (dense[i] == 0.0) support.push_back(i);
          dense[i] -= 2.0 * v * cf;
        }
      }
      for (auto [i, cf] : c.rhs.terms) {
        if (dense[i] == 0.0) support.push_back(i);
        dense[i] += 2.0 * u * cf;
      }
      const double slack = u * u - nrm2;
      const double inv = 1.0 / slack;
      const double inv2 = inv * inv;
      // -log slack: grad = -dslack/dx / slack, Hess = ds ds^T/slack^2 - d2s/slack
      for (int a : support) g[a] -= dense[a] * inv;
      for (int a : support)
        for (int b : support) H(a, b) += dense[a] * dense[b] * inv2;
      // d2 slack = 2 rhs_vec rhs_vec^T - 2 A^T A  =>  -d2s/slack adds
      //   2 A^T A / slack - 2 rhs rhs^T / slack
      const int m = static_cast<int>(cache.support.size());
      for (int a = 0; a < m; ++a) {
        const int ia = cache.support[a];
        for (int b = 0; b < m; ++b) H(ia, cache.support[b]) += 2.0 * inv * cache.ata(a, b);
      }
      VecR rv = VecR::Zero(n_);
      std::vector<int> rsup;
      for (auto [i, cf] : c.rhs.terms) {
        if (rv[i] == 0.0) rsup.push_back(i);
        rv[i] += cf;
      }
      for (int a : rsup)
        for (int b : rsup) H(a, b) -= 2.0 * inv * rv[a] * rv[b];
      if (with_s) {
        const double ds = 2.0 * u;  // d slack / d s
        g_s -= ds * inv;
        h_ss += ds * ds * inv2 - 2.0 * inv;
        for (int a : support) h_sx[a] += dense[a] * ds * inv2;
        for (int a : rsup) h_sx[a] -= 2.0 * inv * rv[a];
      }
      clear_dense();
    }

    for (const auto& c : p_.log) {
      const double tt = c.t.eval(x);
      const double f = c.r.eval(x) - c.scale * std::log2(1.0 + tt);
      const double slack = s_shift - f;
      const double dl = c.scale / ((1.0 + tt) * std::log(2.0));
      // grad f = a_r - dl * a_t
      support.clear();
      for (auto [i, cf] : c.r.terms) {
        if (dense[i] == 0.0) support.push_back(i);
        dense[i] += cf;
      }
      for (auto [i, cf] : c.t.terms) {
        if (dense[i] == 0.0) support.push_back(i);
        dense[i] -= dl * cf;
      }
      scalar_rank1(dense, support, slack);
      // convex part of f'' : + dl/(1+t) * a_t a_t^T, divided by slack
      const double curv = dl / (1.0 + tt) / slack;
      for (auto [i, ci] : c.t.terms)
        for (auto [j, cj] : c.t.terms) H(i, j) += curv * ci * cj;
      clear_dense();
    }

    for (const auto& b : p_.psd) {
      MatC M = b.matrix(x);
      for (int i = 0; i < b.dim; ++i) M(i, i) += s_shift;
      const MatC S = M.inverse();
      const int d = b.dim;
      // gradient
      for (int i = 0; i < d; ++i) g[b.diag[i]] -= std::real(S(i, i));
      for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
          const auto& o = b.off[b.off_index(i, j)];
          g[o[0]] -= 2.0 * std::real(S(i, j));
          g[o[1]] -= 2.0 * std::imag(S(i, j));
        }
      // Hessian: Tr(S E_a S E_b) with E the Hermitian basis matrices.
      // Parameter list: index p -> (kind, i, j)
      struct Par {
        int var;
        int kind;  // 0 diag, 1 off-re, 2 off-im
        int i, j;
      };
      std::vector<Par> pars;
      pars.reserve(d * d);
      for (int i = 0; i < d; ++i) pars.push_back({b.diag[i], 0, i, i});
      for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
          const auto& o = b.off[b.off_index(i, j)];
          pars.push_back({o[0], 1, i, j});
          pars.push_back({o[1], 2, i, j});
        }
      auto hval = [&](const Par& a, const Par& c2) -> double {
        const int i = a.i, j = a.j, k = c2.i, l = c2.j;
        if (a.kind == 0 && c2.kind == 0) return std::norm(S(i, k));
        if (a.kind == 0 && c2.kind == 1) return 2.0 * std::real(S(i, k) * std::conj(S(i, l)));
        if (a.kind == 0 && c2.kind == 2) return -2.0 * std::imag(S(i, k) * std::conj(S(i, l)));
        if (a.kind == 1 && c2.kind == 0)
          return 2.0 * std::real(S(k, i) * std::conj(S(k, j)));
        if (a.kind == 2 && c2.kind == 0)
          return -2.0 * std::imag(S(k, i) * std::conj(S(k, j)));
        const cplx A = S(j, k) * S(l, i);
        const cplx B = S(i, k) * S(l, j);
        if (a.kind == 1 && c2.kind == 1) return 2.0 * std::real(A) + 2.0 * std::real(B);
        if (a.kind == 1 && c2.kind == 2) return -2.0 * std::imag(A) - 2.0 * std::imag(B);
        if (a.kind == 2 && c2.kind == 1) return -2.0 * std::imag(A) + 2.0 * std::imag(B);
        return -2.0 * std::real(A) + 2.0 * std::real(B);  // im-im
      };
      for (std::size_t a = 0; a < pars.size(); ++a)
        for (std::size_t c2 = 0; c2 < pars.size(); ++c2)
          H(pars[a].var, pars[c2].var) += hval(pars[a], pars[c2]);
      if (with_s) {
        // d/ds -log det(M+sI) = -Tr(S); d2/ds2 = Tr(S^2);
        // cross term with parameter E_a: Tr(S E_a S)
        g_s -= std::real(S.trace());
        h_ss += std::real((S * S).trace());
        const MatC S2 = S * S;
        for (int i = 0; i < d; ++i) h_sx[b.diag[i]] += std::real(S2(i, i));
        for (int i = 0; i < d; ++i)
          for (int j = i + 1; j < d; ++j) {
            const auto& o = b.off[b.off_index(i, j)];
            h_sx[o[0]] += 2.0 * std::real(S2(i, j));
            h_sx[o[1]] += 2.0 * std::imag(S2(i, j));
          }
      }
    }
  }

  // ---- centering -------------------------------------------------------------
  // Minimizes t_bar * f0 + barrier via damped Newton. In phase I, f0 = s and
  // the reduced variable vector is [z; s]. Returns false when the Newton
  // budget is exhausted.
  bool center(VecR& z, double t_bar, bool phase1_mode, double* s_ptr, Solution& sol,
              double early_exit_s = std::numeric_limits<double>::quiet_NaN()) {
    const int dim = nz_ + (phase1_mode ? 1 : 0);
    VecR g_full(n_);
    MatR h_full(n_, n_);
    VecR h_sx(phase1_mode ? n_ : 0);
    while (sol.newton_iters < max_iters_) {
      const VecR x = expand(z);
      const double s = phase1_mode ? *s_ptr : 0.0;
      double g_s = 0.0, h_ss = 0.0;
      barrier_derivs(x, s, phase1_mode, g_full, h_full, g_s, h_ss, h_sx);
      // objective part
      VecR g_r = reduce_grad(g_full);
      MatR H_r = reduce_hess(h_full);
      VecR g(dim);
      MatR H(dim, dim);
      if (phase1_mode) {
        g.head(nz_) = g_r;
        g[nz_] = g_s + t_bar;
        H.topLeftCorner(nz_, nz_) = H_r;
        VecR hs_r = reduce_grad(h_sx);
        H.topRightCorner(nz_, 1) = hs_r;
        H.bottomLeftCorner(1, nz_) = hs_r.transpose();
        H(nz_, nz_) = h_ss;
      } else {
        g = g_r + t_bar * reduce_grad(c_full_);
        H = H_r;
      }
      if (!g.allFinite() || !H.allFinite())
        throw std::logic_error("conic solver: non-finite derivatives");
      // Newton step with a ridge fallback.
      VecR dx;
      double ridge = 0.0;
      for (int attempt = 0;; ++attempt) {
        MatR Hr = H;
        if (ridge > 0.0) Hr.diagonal().array() += ridge;
        Eigen::LLT<MatR> llt(Hr);
        if (llt.info() == Eigen::Success) {
          dx = llt.solve(-g);
          if (dx.allFinite()) break;
        }
        ridge = (ridge == 0.0) ? 1e-10 * std::max(1.0, H.diagonal().maxCoeff()) : ridge * 100.0;
        if (attempt > 12) throw std::logic_error("conic solver: Newton system unsolvable");
      }
      const double decrement2 = -g.dot(dx);
      if (decrement2 / 2.0 <= center_tol_) return true;
      // backtracking line search on the merit
      const double merit0 = merit(z, phase1_mode ? *s_ptr : 0.0, t_bar, phase1_mode);
      double alpha = 1.0;
      VecR z_try;
      double s_try = 0.0;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        z_try = z + alpha * dx.head(nz_);
        s_try = phase1_mode ? *s_ptr + alpha * dx[nz_] : 0.0;
        const auto ev = barrier(expand(z_try), s_try);
        if (ev.ok) {
          const double m_try =
              t_bar * (phase1_mode ? s_try : c_full_.dot(expand(z_try))) + ev.phi;
          if (m_try <= merit0 - 0.25 * alpha * decrement2) {
            accepted = true;
            break;
          }
        }
        alpha *= 0.5;
      }
      if (!accepted) return true;  // step stalled at numerical precision
      z = z_try;
      if (phase1_mode) *s_ptr = s_try;
      ++sol.newton_iters;
      sol.merit_trace.push_back(merit(z, phase1_mode ? *s_ptr : 0.0, t_bar, phase1_mode));
      if (phase1_mode && !std::isnan(early_exit_s) && *s_ptr < early_exit_s) return true;
    }
    return false;
  }

  double merit(const VecR& z, double s, double t_bar, bool phase1_mode) const {
    const auto ev = barrier(expand(z), s);
    if (!ev.ok) return std::numeric_limits<double>::infinity();
    return t_bar * (phase1_mode ? s : c_full_.dot(expand(z))) + ev.phi;
  }

  bool phase1(VecR& z, Solution& sol) {
    double s = required_shift(z);
    if (!std::isfinite(s)) return false;  // start outside log domains
    s += 0.1 * (1.0 + std::abs(s));
    const double target = -1e-7 * (1.0 + std::abs(s));
    const VecR x_start = expand(z);
    const double span = x_start.size() ? x_start.cwiseAbs().maxCoeff() : 0.0;
    phase1_box_ = 1e4 * std::max(10.0, span);
    const double nu1 = nu_ + 2.0 * static_cast<double>(free_.size());
    // Match the first stage to the starting infeasibility so the centered s
    // begins near s0 instead of drifting to the analytic center first.
    double t_bar = std::max(1.0, nu1 / std::max(s, 1e-2));
    bool ok = false;
    while (sol.newton_iters < max_iters_) {
      if (!center(z, t_bar, /*phase1=*/true, &s, sol, target)) break;
      if (s < target) {
        ok = true;
        break;
      }
      if (nu1 / t_bar <= 1e-7 && s >= 0.0) break;  // converged infeasible
      if (nu1 / t_bar <= 1e-9) {
        ok = s < 0.0;
        break;
      }
      t_bar *= 50.0;
    }
    phase1_box_ = 0.0;
    return ok || s < target;
  }

  void finalize(Solution& sol, const VecR& z, double gap) {
    const VecR x = expand(z);
    sol.x = x;
    sol.objective = obj_scale_ * c_full_.dot(x) + p_.obj_constant;
    sol.duality_gap = gap * obj_scale_;
    double res = 0.0;
    auto upd = [&](double f) { res = std::max(res, f); };
    for (const auto& c : p_.lin) upd(c.f.eval(x));
    for (const auto& c : p_.quad) {
      double q = -c.rhs.eval(x);
      for (const auto& r : c.rows) {
        const double v = r.eval(x);
        q += v * v;
      }
      upd(q);
    }
    for (const auto& c : p_.soc) {
      double nrm2 = 0.0;
      for (const auto& r : c.rows) {
        const double v = r.eval(x);
        nrm2 += v * v;
      }
      upd(std::sqrt(nrm2) - c.rhs.eval(x));
    }
    for (const auto& c : p_.log) {
      const double tt = c.t.eval(x);
      upd(1.0 + tt <= 0.0 ? 1.0 : c.r.eval(x) - c.scale * std::log2(1.0 + tt));
    }
    for (const auto& b : p_.psd) {
      Eigen::SelfAdjointEigenSolver<MatC> es(b.matrix(x), Eigen::EigenvaluesOnly);
      upd(-es.eigenvalues().minCoeff());
    }
    for (const auto& e : p_.eq) upd(std::abs(e.f.eval(x)));
    sol.max_residual = std::max(res, 0.0);
  }

  const Program& p_;
  double tol_;
  int max_iters_;
  int n_ = 0;
  VecR c_full_;
  double obj_scale_ = 1.0;
  double nu_ = 0.0;
  double mu_ = 20.0;
  double center_tol_ = 1e-9;
  double phase1_box_ = 0.0;  // >0 while phase I runs
  std::vector<detail::QuadCache> quad_cache_, soc_cache_;
  // equality elimination state
  std::vector<double> fixed_;
  std::vector<int> free_;
  MatR null_;
  VecR y0_;
  int nz_ = 0;
  bool identity_null_ = true;
  double eq_residual_ = 0.0;
};

/// Solves the program; deterministic for fixed inputs. `max_iters` caps the
/// total Newton iteration count across both phases.
inline Solution solve(const Program& p, double tol = 1e-7, int max_iters = 200) {
  Solver s(p, tol, max_iters);
  return s.solve();
}

inline void dump(const Program& p, std::ostream& os) {
  auto aff = [&](const Affine& a) {
    for (auto [i, c] : a.terms) os << (c >= 0 ? " +" : " ") << c << "*x" << i;
    if (a.constant != 0.0) os << (a.constant >= 0 ? " +" : " ") << a.constant;
    if (a.terms.empty() && a.constant == 0.0) os << " 0";
  };
  os << "vars " << p.num_vars << "\nminimize";
  const VecR c = p.objective_vector();
  for (int i = 0; i < c.size(); ++i)
    if (c[i] != 0.0) os << (c[i] >= 0 ? " +" : " ") << c[i] << "*x" << i;
  os << " + " << p.obj_constant << "\n";
  for (const auto& e : p.eq) {
    os << "eq:";
    aff(e.f);
    os << " == 0\n";
  }
  for (const auto& l : p.lin) {
    os << "lin:";
    aff(l.f);
    os << " <= 0\n";
  }
  for (const auto& q : p.quad) {
    os << "quad: sum_sq{";
    for (const auto& r : q.rows) {
      os << " [";
      aff(r);
      os << " ]";
    }
    os << " } <=";
    aff(q.rhs);
    os << "\n";
  }
  for (const auto& s : p.soc) {
    os << "soc: norm{";
    for (const auto& r : s.rows) {
      os << " [";
      aff(r);
      os << " ]";
    }
    os << " } <=";
    aff(s.rhs);
    os << "\n";
  }
  for (const auto& l : p.log) {
    os << "log:";
    aff(l.r);
    os << " <= " << l.scale << "*log2(1 +";
    aff(l.t);
    os << " )\n";
  }
  for (const auto& b : p.psd) os << "psd: block dim " << b.dim << "\n";
}

}  // namespace irscran::conic
