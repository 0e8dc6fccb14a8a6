// SPDX-FileCopyrightText: Copyright (c) 2026 the irscran authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "irscran/conic.hpp"
#include "irscran/model.hpp"

namespace irscran::relax {

// ---------------------------------------------------------------------------
// Scalar surrogates
// ---------------------------------------------------------------------------

/// Smooth arctan step (2/pi) atan(x/alpha): approaches the 0/1 indicator of
/// x > 0 as alpha shrinks.
inline double f_alpha(double x, double alpha) {
  if (x < 0.0) throw std::invalid_argument("f_alpha: negative argument");
  return (2.0 / kPi) * std::atan(x / alpha);
}

inline double f_alpha_deriv(double x, double alpha) {
  if (x < 0.0) throw std::invalid_argument("f_alpha_deriv: negative argument");
  return (2.0 / kPi) * alpha / (alpha * alpha + x * x);
}

/// Affine-in-(w,t) lower bound of |h^H w|^2 / t around (w_tilde, t_tilde):
///   2 Re{w~^H h h^H w} / t~  -  |h^H w~|^2 t / t~^2.
/// Tight at the expansion point.
inline double taylor_qol_lower(const VecC& h, const VecC& w_tilde, double t_tilde, const VecC& w,
                               double t) {
  if (t_tilde <= 0.0) throw std::invalid_argument("taylor_qol_lower: nonpositive t_tilde");
  const cplx hw = h.dot(w);         // h^H w
  const cplx hwt = h.dot(w_tilde);  // h^H w~
  const double cross = 2.0 * std::real(std::conj(hwt) * hw);
  return cross / t_tilde - std::norm(hwt) * t / (t_tilde * t_tilde);
}

/// Convex upper bound of the bilinear product d*q around (dt, qt):
///   (d+q)^2/2 - dt^2/2 - qt^2/2 - dt (d-dt) - qt (q-qt)
/// which equals dt*qt at the expansion point and dominates d*q everywhere.
inline double bilinear_upper(double d, double q, double dt, double qt) {
  const double s = d + q;
  return 0.5 * s * s - 0.5 * dt * dt - 0.5 * qt * qt - dt * (d - dt) - qt * (q - qt);
}

/// Tangent over-estimator of the concave f_alpha at x_tilde, evaluated at x.
inline double linearize_f_alpha(double x_tilde, double x, double alpha) {
  return f_alpha(x_tilde, alpha) + f_alpha_deriv(x_tilde, alpha) * (x - x_tilde);
}

/// Tangent over-estimator of log2(1+t) at t_tilde, evaluated at t.
inline double linearize_log(double t, double t_tilde) {
  return log2p1(t_tilde) + (t - t_tilde) / ((1.0 + t_tilde) * std::log(2.0));
}

// ---------------------------------------------------------------------------
// Optimization state
// ---------------------------------------------------------------------------

/// Stacked SCA state: beams, SINR auxiliaries, indicator surrogates d in
/// [0,1], spectral-efficiency surrogates q (bits/s/Hz) and the carried rate
/// allocation. Entries for streams a user does not transmit are zero.
struct LambdaPoint {
  BeamformerSet w;
  VecR t_p, t_c;
  MatR d_p, d_c;  // N x K
  VecR q_p, q_c;
  RateAllocation R;

  LambdaPoint() = default;
  LambdaPoint(int N, int L, int K)
      : w(N, L, K),
        t_p(VecR::Zero(K)),
        t_c(VecR::Zero(K)),
        d_p(MatR::Zero(N, K)),
        d_c(MatR::Zero(N, K)),
        q_p(VecR::Zero(K)),
        q_c(VecR::Zero(K)),
        R(K) {}

  double t(int k, Stream o) const { return o == Stream::priv ? t_p[k] : t_c[k]; }
  double q(int k, Stream o) const { return o == Stream::priv ? q_p[k] : q_c[k]; }
  double d(int n, int k, Stream o) const { return o == Stream::priv ? d_p(n, k) : d_c(n, k); }
  double rate(int k, Stream o) const { return o == Stream::priv ? R.Rp[k] : R.Rc[k]; }
};

/// Expansion point plus the Dinkelbach multiplier of the current iteration.
struct SurrogateContext {
  LambdaPoint tilde;
  double alpha = 0.0;
  double lambda_dink = 0.0;  // Mbps per W
};

/// Scheme-dependent shape of the beamforming subproblem.
struct BuildOptions {
  bool rs = true;                  ///< false: no common streams at all (TIN)
  bool dynamic_clustering = true;  ///< false: fixed supports, affine fronthaul
  std::vector<std::vector<int>> clusters;  ///< per-user serving BSs (static mode)
  bool repair = false;   ///< maximize the worst QoS margin instead of the EE objective
  int irs_elements = 0;  ///< active reflect elements (fixed power constant)

  bool bs_allowed(int n, int k) const {
    if (dynamic_clustering) return true;
    for (int m : clusters[k])
      if (m == n) return true;
    return false;
  }
};

/// A stream whose expansion SINR auxiliary falls below this floor is parked
/// for the iteration: its beam stays structurally zero and its rate is 0.
/// The quotient surrogate degenerates at a zero expansion beam, so a parked
/// stream cannot be re-grown by the convex step.
inline constexpr double kStreamFloor = 1e-7;

/// Decision-variable indices of one subproblem; -1 marks eliminated entries.
struct VarMap {
  int N = 0, L = 0, K = 0;
  // w[o][k] holds 2*N*L indices: re,im per antenna in BS order; -1 if absent
  std::vector<std::vector<std::vector<int>>> w;
  std::vector<std::vector<int>> t;               // [o][k]
  std::vector<std::vector<int>> r;               // [o][k]
  std::vector<std::vector<std::vector<int>>> d;  // [o][n][k]
  std::vector<std::vector<int>> q;               // [o][k]
  std::vector<int> u;                            // per BS, dynamic mode
  int ptr = -1;
  int repair_margin = -1;
  std::vector<std::vector<bool>> active;  // [o][k]

  LambdaPoint extract(const VecR& x, const BuildOptions& opt, double alpha) const {
    LambdaPoint lp(N, L, K);
    for (int k = 0; k < K; ++k)
      for (int o = 0; o < 2; ++o) {
        if (!active[o][k]) continue;
        const Stream st = o == 0 ? Stream::priv : Stream::common;
        VecC& vec = lp.w.vec(k, st);
        for (int i = 0; i < N * L; ++i) {
          const int re = w[o][k][2 * i], im = w[o][k][2 * i + 1];
          vec[i] = cplx(re >= 0 ? x[re] : 0.0, im >= 0 ? x[im] : 0.0);
        }
        (o == 0 ? lp.t_p[k] : lp.t_c[k]) = std::max(0.0, x[t[o][k]]);
        (o == 0 ? lp.R.Rp[k] : lp.R.Rc[k]) = std::max(0.0, x[r[o][k]]);
        for (int n = 0; n < N; ++n) {
          double dv;
          if (opt.dynamic_clustering)
            dv = std::clamp(x[d[o][n][k]], 0.0, 1.0);
          else
            dv = f_alpha(lp.w.block_power(n, k, st), alpha);
          (o == 0 ? lp.d_p(n, k) : lp.d_c(n, k)) = dv;
        }
        const double qv = opt.dynamic_clustering
                              ? std::max(0.0, x[q[o][k]])
                              : log2p1(o == 0 ? lp.t_p[k] : lp.t_c[k]);
        (o == 0 ? lp.q_p[k] : lp.q_c[k]) = qv;
      }
    return lp;
  }
};

struct Subproblem {
  conic::Program program;
  VarMap map;
};

namespace detail {

/// Two affine rows (real and imaginary part) of hbar^H w_k^o over the
/// subproblem's w variables. Eliminated entries are structurally zero beams
/// and contribute nothing.
inline void inner_product_rows(const VecC& hbar, const VarMap& map, int o, int k,
                               conic::Affine& re_row, conic::Affine& im_row) {
  const int nl = map.N * map.L;
  for (int i = 0; i < nl; ++i) {
    const int vre = map.w[o][k][2 * i], vim = map.w[o][k][2 * i + 1];
    const double p = std::real(hbar[i]), q = std::imag(hbar[i]);
    if (vre >= 0) {
      re_row.add(vre, p);
      im_row.add(vre, -q);
    }
    if (vim >= 0) {
      re_row.add(vim, q);
      im_row.add(vim, p);
    }
  }
}

}  // namespace detail

/// Assembles the convex inner approximation of the beamforming subproblem in
/// Dinkelbach parametric form around the context's expansion point. SINR
/// quantities are noise-normalized inside the program.
inline Subproblem build_subproblem(const SurrogateContext& ctx, const PhaseShiftVector& v,
                                   const CmdSets& S, const ChannelSet& ch,
                                   const FronthaulAllocation& alloc, const SimConfig& cfg,
                                   const BuildOptions& opt) {
  const int N = ch.N, L = ch.L, K = ch.K;
  const double sigma2 = cfg.noise_power_watt();
  const double bmhz = cfg.bandwidth_mhz();
  const double lam = ctx.lambda_dink;
  const double alpha = ctx.alpha;

  Subproblem sp;
  conic::Program& p = sp.program;
  VarMap& m = sp.map;
  m.N = N;
  m.L = L;
  m.K = K;
  m.active.assign(2, std::vector<bool>(K, false));
  for (int k = 0; k < K; ++k) {
    m.active[0][k] = ctx.tilde.t_p[k] > kStreamFloor;
    m.active[1][k] = opt.rs && !S.M[k].empty() && ctx.tilde.t_c[k] > kStreamFloor;
  }

  // Noise-normalized effective channels.
  std::vector<VecC> hbar(K);
  for (int k = 0; k < K; ++k) hbar[k] = effective_channel(ch, v, k) / std::sqrt(sigma2);

  // --- variables -------------------------------------------------------------
  m.w.assign(2, std::vector<std::vector<int>>(K, std::vector<int>(2 * N * L, -1)));
  m.t.assign(2, std::vector<int>(K, -1));
  m.r.assign(2, std::vector<int>(K, -1));
  m.q.assign(2, std::vector<int>(K, -1));
  m.d.assign(2, std::vector<std::vector<int>>(N, std::vector<int>(K, -1)));
  for (int k = 0; k < K; ++k)
    for (int o = 0; o < 2; ++o) {
      if (!m.active[o][k]) continue;
      for (int n = 0; n < N; ++n) {
        if (!opt.bs_allowed(n, k)) continue;
        for (int l = 0; l < L; ++l) {
          m.w[o][k][2 * (n * L + l)] = p.add_var();
          m.w[o][k][2 * (n * L + l) + 1] = p.add_var();
        }
      }
      m.t[o][k] = p.add_var();
      m.r[o][k] = p.add_var();
      if (opt.dynamic_clustering) {
        m.q[o][k] = p.add_var();
        for (int n = 0; n < N; ++n) m.d[o][n][k] = p.add_var();
      }
    }
  if (opt.dynamic_clustering) {
    m.u.assign(N, -1);
    for (int n = 0; n < N; ++n) m.u[n] = p.add_var();
  }
  m.ptr = p.add_var();
  if (opt.repair) m.repair_margin = p.add_var();

  // --- constraints -------------------------------------------------------------
  const double p_max = cfg.p_max_watt();
  for (int n = 0; n < N; ++n) {
    conic::QuadIneq q;
    for (int k = 0; k < K; ++k)
      for (int o = 0; o < 2; ++o) {
        if (!m.active[o][k]) continue;
        for (int l = 0; l < L; ++l)
          for (int c = 0; c < 2; ++c) {
            const int var = m.w[o][k][2 * (n * L + l) + c];
            if (var >= 0) q.rows.push_back(conic::Affine{}.add(var, 1.0));
          }
      }
    q.rhs.constant = p_max;
    if (!q.rows.empty()) p.quad.push_back(std::move(q));
  }
  {
    conic::QuadIneq q;
    for (int k = 0; k < K; ++k)
      for (int o = 0; o < 2; ++o)
        for (int idx : m.w[o][k])
          if (idx >= 0) q.rows.push_back(conic::Affine{}.add(idx, 1.0));
    q.rhs = conic::Affine{}.add(m.ptr, 1.0);
    p.quad.push_back(std::move(q));
    // keeps the epigraph coercive in programs that do not price it
    p.lin.push_back({conic::Affine{{{m.ptr, 1.0}}, -static_cast<double>(N) * p_max}});
    p.lin.push_back({conic::Affine{}.add(m.ptr, -1.0)});
  }

  for (int k = 0; k < K; ++k) {
    conic::Affine f;
    f.constant = cfg.r_min;
    if (m.active[0][k]) f.add(m.r[0][k], -1.0);
    if (m.active[1][k]) f.add(m.r[1][k], -1.0);
    if (opt.repair) f.add(m.repair_margin, 1.0);
    p.lin.push_back({std::move(f)});
  }

  for (int k = 0; k < K; ++k)
    for (int o = 0; o < 2; ++o) {
      if (!m.active[o][k]) continue;
      conic::LogIneq lg;  // R <= B log2(1 + t)
      lg.r = conic::Affine{}.add(m.r[o][k], 1.0);
      lg.t = conic::Affine{}.add(m.t[o][k], 1.0);
      lg.scale = bmhz;
      p.log.push_back(std::move(lg));
      p.lin.push_back({conic::Affine{}.add(m.t[o][k], -1.0)});
      p.lin.push_back({conic::Affine{}.add(m.r[o][k], -1.0)});
    }

  // Surrogate SINR constraints: interference + 1 <= qol lower bound. Each
  // constraint is rescaled so its leading coefficient stays O(1); scaling a
  // quadratic constraint by a positive constant leaves the feasible set and
  // the central path untouched.
  auto push_sinr_constraint = [&](const VecC& hb, int o_sig, int k_sig, double tt,
                                  const std::vector<std::pair<int, int>>& interferers) {
    const VecC& wt = o_sig == 0 ? ctx.tilde.w.wp[k_sig] : ctx.tilde.w.wc[k_sig];
    const cplx beta = hb.dot(wt);
    const double cscale = 1.0 / std::max(1.0, std::norm(beta) / (tt * tt));
    const double rscale = std::sqrt(cscale);
    conic::QuadIneq q;
    for (auto [o, j] : interferers) {
      conic::Affine re, im;
      detail::inner_product_rows(hb, m, o, j, re, im);
      for (auto& term : re.terms) term.second *= rscale;
      for (auto& term : im.terms) term.second *= rscale;
      q.rows.push_back(std::move(re));
      q.rows.push_back(std::move(im));
    }
    conic::Affine re, im;
    detail::inner_product_rows(hb, m, o_sig, k_sig, re, im);
    conic::Affine rhs;  // 2 Re{beta^* (h^H w)} / t~ - |beta|^2 t / t~^2 - 1
    for (auto [var, c] : re.terms) rhs.add(var, cscale * 2.0 * std::real(beta) * c / tt);
    for (auto [var, c] : im.terms) rhs.add(var, cscale * 2.0 * std::imag(beta) * c / tt);
    rhs.add(m.t[o_sig][k_sig], -cscale * std::norm(beta) / (tt * tt));
    rhs.constant = -cscale;
    q.rhs = std::move(rhs);
    p.quad.push_back(std::move(q));
  };

  for (int k = 0; k < K; ++k) {
    if (!m.active[0][k]) continue;
    std::vector<std::pair<int, int>> intf;
    for (int j = 0; j < K; ++j)
      if (j != k && m.active[0][j]) intf.emplace_back(0, j);
    for (int l : S.phi_bar(k))
      if (m.active[1][l]) intf.emplace_back(1, l);
    push_sinr_constraint(hbar[k], 0, k, ctx.tilde.t_p[k], intf);
  }
  for (int k = 0; k < K; ++k) {
    if (!m.active[1][k]) continue;
    for (int i : S.M[k]) {
      std::vector<std::pair<int, int>> intf;
      for (int j = 0; j < K; ++j)  // T_i: every private stream interferes
        if (m.active[0][j]) intf.emplace_back(0, j);
      for (int l : S.phi_bar(i))
        if (m.active[1][l]) intf.emplace_back(1, l);
      for (int mm : S.omega(i, k))
        if (m.active[1][mm]) intf.emplace_back(1, mm);
      push_sinr_constraint(hbar[i], 1, k, ctx.tilde.t_c[k], intf);
    }
  }

  if (opt.dynamic_clustering) {
    for (int k = 0; k < K; ++k)
      for (int o = 0; o < 2; ++o) {
        if (!m.active[o][k]) continue;
        const Stream st = o == 0 ? Stream::priv : Stream::common;
        for (int n = 0; n < N; ++n) {
          const int dv = m.d[o][n][k];
          p.lin.push_back({conic::Affine{}.add(dv, -1.0)});
          p.lin.push_back({conic::Affine{{{dv, 1.0}}, -1.0}});
          const double xt = ctx.tilde.w.block_power(n, k, st);
          const double fp = f_alpha_deriv(xt, alpha);
          conic::QuadIneq q;  // f' ||w_{n,k}||^2 <= d - f(x~) + f' x~
          const double s = std::sqrt(fp);
          for (int l = 0; l < L; ++l)
            for (int c = 0; c < 2; ++c) {
              const int var = m.w[o][k][2 * (n * L + l) + c];
              if (var >= 0) q.rows.push_back(conic::Affine{}.add(var, s));
            }
          q.rhs = conic::Affine{{{dv, 1.0}}, fp * xt - f_alpha(xt, alpha)};
          p.quad.push_back(std::move(q));
        }
        const double tq = ctx.tilde.t(k, st);
        conic::Affine f;  // log2(1+t~) + (t - t~)/((1+t~) ln2) <= q
        const double slope = 1.0 / ((1.0 + tq) * std::log(2.0));
        f.constant = log2p1(tq) - slope * tq;
        f.add(m.t[o][k], slope);
        f.add(m.q[o][k], -1.0);
        p.lin.push_back({std::move(f)});
        p.lin.push_back({conic::Affine{}.add(m.q[o][k], -1.0)});
      }
    for (int n = 0; n < N; ++n) {
      conic::QuadIneq q;
      conic::Affine rhs;
      rhs.add(m.u[n], 1.0);
      double cst = 0.0;
      for (int k = 0; k < K; ++k)
        for (int o = 0; o < 2; ++o) {
          if (!m.active[o][k]) continue;
          const Stream st = o == 0 ? Stream::priv : Stream::common;
          const double dt = ctx.tilde.d(n, k, st);
          const double qt = ctx.tilde.q(k, st);
          conic::Affine row;
          row.add(m.d[o][n][k], 1.0 / std::sqrt(2.0));
          row.add(m.q[o][k], 1.0 / std::sqrt(2.0));
          q.rows.push_back(std::move(row));
          rhs.add(m.d[o][n][k], dt);
          rhs.add(m.q[o][k], qt);
          cst -= 0.5 * dt * dt + 0.5 * qt * qt;
        }
      rhs.constant = cst;
      q.rhs = std::move(rhs);
      p.quad.push_back(std::move(q));
      p.lin.push_back({conic::Affine{{{m.u[n], 1.0}}, -alloc.C[n] / bmhz}});
      p.lin.push_back({conic::Affine{}.add(m.u[n], -1.0)});
    }
  } else {
    for (int n = 0; n < N; ++n) {
      conic::Affine f;  // frozen clusters: affine fronthaul in the rates
      f.constant = -alloc.C[n];
      for (int k = 0; k < K; ++k) {
        if (!opt.bs_allowed(n, k)) continue;
        if (m.active[0][k]) f.add(m.r[0][k], 1.0);
        if (m.active[1][k]) f.add(m.r[1][k], 1.0);
      }
      p.lin.push_back({std::move(f)});
    }
  }

  // --- objective: minimize -(R^t - lam (P_tr + P_fixed + P_fh~)) ---------------
  if (opt.repair) {
    p.set_obj(m.repair_margin, -1.0);
  } else {
    for (int k = 0; k < K; ++k)
      for (int o = 0; o < 2; ++o) {
        if (!m.active[o][k]) continue;
        double coef = -1.0;
        if (!opt.dynamic_clustering)
          coef += lam * cfg.P_mbps * static_cast<double>(opt.clusters[k].size());
        p.set_obj(m.r[o][k], coef);
      }
    p.set_obj(m.ptr, lam);
    if (opt.dynamic_clustering)
      for (int n = 0; n < N; ++n) p.set_obj(m.u[n], lam * cfg.P_mbps * bmhz);
    p.obj_constant = lam * cfg.p_fixed_watt(opt.irs_elements);
  }

  // --- initial point ------------------------------------------------------------
  p.x0.assign(p.num_vars, 0.0);
  std::vector<double> usum(N, 0.0);
  double ptr0 = 0.0;
  for (int k = 0; k < K; ++k)
    for (int o = 0; o < 2; ++o) {
      if (!m.active[o][k]) continue;
      const Stream st = o == 0 ? Stream::priv : Stream::common;
      const VecC& wt = ctx.tilde.w.vec(k, st);
      for (int i = 0; i < N * L; ++i) {
        if (m.w[o][k][2 * i] >= 0) p.x0[m.w[o][k][2 * i]] = std::real(wt[i]);
        if (m.w[o][k][2 * i + 1] >= 0) p.x0[m.w[o][k][2 * i + 1]] = std::imag(wt[i]);
      }
      ptr0 += wt.squaredNorm();
      p.x0[m.t[o][k]] = ctx.tilde.t(k, st);
      p.x0[m.r[o][k]] = ctx.tilde.rate(k, st);
      if (opt.dynamic_clustering) {
        p.x0[m.q[o][k]] = ctx.tilde.q(k, st);
        for (int n = 0; n < N; ++n) {
          p.x0[m.d[o][n][k]] = ctx.tilde.d(n, k, st);
          usum[n] += ctx.tilde.d(n, k, st) * ctx.tilde.q(k, st);
        }
      }
    }
  if (opt.dynamic_clustering)
    for (int n = 0; n < N; ++n) p.x0[m.u[n]] = usum[n];
  p.x0[m.ptr] = ptr0;
  if (opt.repair) {
    double margin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
      double rk = 0.0;
      if (m.active[0][k]) rk += ctx.tilde.R.Rp[k];
      if (m.active[1][k]) rk += ctx.tilde.R.Rc[k];
      margin = std::min(margin, rk - cfg.r_min);
    }
    p.x0[m.repair_margin] = margin;
  }
  return sp;
}

}  // namespace irscran::relax
