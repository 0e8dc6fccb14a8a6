// SPDX-FileCopyrightText: Copyright (c) 2026 the irscran authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>

#include "irscran/relax.hpp"

namespace irscran::beamform {

struct BeamformParams {
  double rho_step = 1.0;  ///< SCA step in (0,1]; halved on regression, floor 0.125
  int Z_max = 30;
  double dink_tol = 1e-5;  ///< stop when the subtractive optimum falls below this
  double sca_tol = 1e-5;   ///< relative objective stall tolerance
  double solver_tol = 1e-7;
  int solver_iters = 400;
};

enum class BeamformStatus { converged, max_iters, infeasible, solver_warning };

struct BeamformResult {
  relax::LambdaPoint lambda;
  BeamformStatus status = BeamformStatus::infeasible;
  double exact_ee = 0.0;      ///< exact-model EE of the returned point
  double surrogate_obj = 0.0; ///< last surrogate EE value
  std::vector<std::string> trace;
};

namespace detail {

/// Surrogate EE: exact rates and transmit power, fronthaul power through the
/// bilinear bound around `exp`.
inline double surrogate_ee(const relax::LambdaPoint& lp, const relax::LambdaPoint& exp,
                           const SimConfig& cfg, const relax::BuildOptions& opt) {
  double pfh = 0.0;
  if (opt.dynamic_clustering) {
    for (int n = 0; n < lp.w.N; ++n)
      for (int k = 0; k < lp.w.K; ++k) {
        pfh += relax::bilinear_upper(lp.d_p(n, k), lp.q_p[k], exp.d_p(n, k), exp.q_p[k]);
        pfh += relax::bilinear_upper(lp.d_c(n, k), lp.q_c[k], exp.d_c(n, k), exp.q_c[k]);
      }
    pfh *= cfg.P_mbps * cfg.bandwidth_mhz();
  } else {
    for (int k = 0; k < lp.w.K; ++k)
      pfh += cfg.P_mbps * static_cast<double>(opt.clusters[k].size()) *
             (lp.R.Rp[k] + lp.R.Rc[k]);
  }
  const double ptot = lp.w.total_power() + cfg.p_fixed_watt(opt.irs_elements) + pfh;
  return lp.R.total() / ptot;
}

/// Exact-model EE at the point's allocated rates.
inline double exact_ee(const relax::LambdaPoint& lp, const SimConfig& cfg,
                       const relax::BuildOptions& opt) {
  const auto pb = power_breakdown(lp.w, lp.R, cfg, cfg.prune_eps, opt.irs_elements);
  return energy_efficiency(lp.R, pb);
}

/// In-loop feasibility of an iterate: power, QoS and rate decodability. The
/// exact l0 fronthaul is enforced at finalization, not per iterate.
inline bool loop_feasible(const relax::LambdaPoint& lp, const PhaseShiftVector& v,
                          const CmdSets& S, const ChannelSet& ch, const SimConfig& cfg) {
  const double p_max = cfg.p_max_watt();
  for (int n = 0; n < lp.w.N; ++n)
    if (lp.w.bs_power(n) > p_max + kAuditTol) return false;
  for (int k = 0; k < ch.K; ++k)
    if (lp.R.Rp[k] + lp.R.Rc[k] < cfg.r_min - kAuditTol) return false;
  const auto s = compute_sinrs(lp.w, v, S, ch, cfg.noise_power_watt());
  const double bmhz = cfg.bandwidth_mhz();
  for (int k = 0; k < ch.K; ++k) {
    if (lp.R.Rp[k] > bmhz * log2p1(s.gamma_p[k]) + kAuditTol) return false;
    if (lp.R.Rc[k] > kAuditTol) {
      if (S.M[k].empty()) return false;
      for (int i : S.M[k])
        if (lp.R.Rc[k] > bmhz * log2p1(s.gamma_c(i, k)) + kAuditTol) return false;
    }
  }
  return true;
}

/// Rebuilds the tangency-consistent auxiliaries (t, d, q) from the point's
/// beams; rates are carried through unchanged.
inline void rederive_tangency(relax::LambdaPoint& lp, const PhaseShiftVector& v, const CmdSets& S,
                              const ChannelSet& ch, const SimConfig& cfg) {
  const auto s = compute_sinrs(lp.w, v, S, ch, cfg.noise_power_watt());
  for (int k = 0; k < ch.K; ++k) {
    lp.t_p[k] = s.gamma_p[k];
    lp.t_c[k] = 0.0;
    if (!S.M[k].empty() && lp.w.wc[k].squaredNorm() > 0.0) {
      double worst = std::numeric_limits<double>::infinity();
      for (int i : S.M[k]) worst = std::min(worst, s.gamma_c(i, k));
      lp.t_c[k] = worst;
    }
    for (int n = 0; n < ch.N; ++n) {
      lp.d_p(n, k) = relax::f_alpha(lp.w.block_power(n, k, Stream::priv), cfg.alpha);
      lp.d_c(n, k) = relax::f_alpha(lp.w.block_power(n, k, Stream::common), cfg.alpha);
    }
    lp.q_p[k] = log2p1(lp.t_p[k]);
    lp.q_c[k] = log2p1(lp.t_c[k]);
  }
}

/// Surrogate fronthaul load sum_{k,o} f_alpha(power) log2(1+sinr) per BS.
inline std::vector<double> surrogate_fronthaul(const relax::LambdaPoint& lp, const SimConfig& cfg) {
  std::vector<double> g(lp.w.N, 0.0);
  for (int n = 0; n < lp.w.N; ++n)
    for (int k = 0; k < lp.w.K; ++k) {
      g[n] += lp.d_p(n, k) * lp.q_p[k];
      g[n] += lp.d_c(n, k) * lp.q_c[k];
    }
  return g;
}

}  // namespace detail

/// Builds a feasible expansion point. Maximum-ratio beams are scaled to a 0.9
/// power margin, then shrunk until the arctan-relaxed fronthaul constraint
/// holds (a saturated indicator pins its linearization near 1, so feasibility
/// of the smooth constraint must be established here, not by the solver).
/// When QoS cannot be met at that point, one repair solve maximizes the worst
/// QoS margin; a negative optimum declares the drop infeasible.
inline std::optional<relax::LambdaPoint> initialize_lambda(
    const ChannelSet& ch, const PhaseShiftVector& v, const CmdSets& S,
    const FronthaulAllocation& alloc, const SimConfig& cfg, const relax::BuildOptions& opt,
    const BeamformParams& params = BeamformParams{},
    const relax::LambdaPoint* warm = nullptr) {
  const int N = ch.N, L = ch.L, K = ch.K;
  relax::LambdaPoint lp(N, L, K);
  constexpr double kCommonAmp = 0.01;  // epsilon on the MRT amplitude

  if (warm != nullptr) {
    lp = *warm;
  } else {
    for (int k = 0; k < K; ++k) {
      VecC dir = effective_channel(ch, v, k);
      for (int n = 0; n < N; ++n)
        if (!opt.bs_allowed(n, k)) dir.segment(n * L, L).setZero();
      const double nrm = dir.norm();
      if (nrm > 0.0) dir /= nrm;
      lp.w.wp[k] = dir;
      if (opt.rs && !S.M[k].empty()) lp.w.wc[k] = kCommonAmp * dir;
    }
    double worst = 0.0;
    for (int n = 0; n < N; ++n) worst = std::max(worst, lp.w.bs_power(n));
    const double scale = std::sqrt(0.9 * cfg.p_max_watt() / worst);
    for (int k = 0; k < K; ++k) {
      lp.w.wp[k] *= scale;
      lp.w.wc[k] *= scale;
    }
  }

  detail::rederive_tangency(lp, v, S, ch, cfg);

  if (opt.dynamic_clustering) {
    // Shrink until the smooth fronthaul constraint holds with margin.
    for (int iter = 0; iter < 80; ++iter) {
      const auto g = detail::surrogate_fronthaul(lp, cfg);
      bool ok = true;
      for (int n = 0; n < N; ++n)
        if (g[n] > 0.9 * alloc.C[n] / cfg.bandwidth_mhz()) ok = false;
      if (ok) break;
      for (int k = 0; k < K; ++k) {
        lp.w.wp[k] *= 0.5;
        lp.w.wc[k] *= 0.5;
      }
      detail::rederive_tangency(lp, v, S, ch, cfg);
    }
  }

  // Rate seed: full decodable rates, capped for frozen clusters.
  const double bmhz = cfg.bandwidth_mhz();
  for (int k = 0; k < K; ++k) {
    lp.R.Rp[k] = lp.t_p[k] > relax::kStreamFloor ? bmhz * log2p1(lp.t_p[k]) : 0.0;
    lp.R.Rc[k] = lp.t_c[k] > relax::kStreamFloor ? bmhz * log2p1(lp.t_c[k]) : 0.0;
  }
  if (!opt.dynamic_clustering) {
    double shrink = 1.0;
    for (int n = 0; n < N; ++n) {
      double load = 0.0;
      for (int k = 0; k < K; ++k)
        if (opt.bs_allowed(n, k)) load += lp.R.Rp[k] + lp.R.Rc[k];
      if (load > alloc.C[n]) shrink = std::min(shrink, alloc.C[n] / load);
    }
    lp.R.Rp *= shrink;
    lp.R.Rc *= shrink;
  }

  bool qos_ok = true;
  for (int k = 0; k < K; ++k)
    if (lp.R.Rp[k] + lp.R.Rc[k] < cfg.r_min) qos_ok = false;
  if (qos_ok) return lp;

  // Repair: maximize the worst QoS margin over the same approximated set.
  relax::SurrogateContext ctx{lp, cfg.alpha, 0.0};
  relax::BuildOptions ropt = opt;
  ropt.repair = true;
  const auto sp = relax::build_subproblem(ctx, v, S, ch, alloc, cfg, ropt);
  const auto sol = conic::solve(sp.program, params.solver_tol, params.solver_iters);
  if (sol.status == conic::SolveStatus::infeasible) return std::nullopt;
  const double margin = sol.x[sp.map.repair_margin];
  if (margin < -1e-9) return std::nullopt;
  relax::LambdaPoint rep = sp.map.extract(sol.x, ropt, cfg.alpha);
  detail::rederive_tangency(rep, v, S, ch, cfg);
  // Carried rates keep the repaired allocation, clamped to the decodable cap.
  for (int k = 0; k < K; ++k) {
    rep.R.Rp[k] = std::min(rep.R.Rp[k], bmhz * log2p1(rep.t_p[k]));
    rep.R.Rc[k] = std::min(rep.R.Rc[k], bmhz * log2p1(rep.t_c[k]));
  }
  return rep;
}

/// Inner loop: SCA-wrapped Dinkelbach iterations on the convex inner
/// approximation, tracking the best exactly-feasible iterate (the warm input
/// included, so the returned EE never falls below the starting point's).
inline BeamformResult solve_beamforming(const ChannelSet& ch, const PhaseShiftVector& v,
                                        const CmdSets& S, const FronthaulAllocation& alloc,
                                        const SimConfig& cfg, const relax::BuildOptions& opt,
                                        const BeamformParams& params = BeamformParams{},
                                        const relax::LambdaPoint* warm = nullptr) {
  BeamformResult out;
  auto init = initialize_lambda(ch, v, S, alloc, cfg, opt, params, warm);
  if (!init) {
    out.status = BeamformStatus::infeasible;
    return out;
  }
  relax::LambdaPoint tilde = *init;

  relax::LambdaPoint best = tilde;
  bool best_valid = detail::loop_feasible(tilde, v, S, ch, cfg);
  double best_ee = best_valid ? detail::exact_ee(tilde, cfg, opt) : -1.0;

  relax::LambdaPoint hat = tilde;
  double rho = params.rho_step;
  double prev_obj = detail::surrogate_ee(hat, tilde, cfg, opt);
  int stall_count = 0;
  out.status = BeamformStatus::max_iters;

  for (int z = 1; z <= params.Z_max; ++z) {
    const double lam = detail::surrogate_ee(hat, tilde, cfg, opt);
    relax::SurrogateContext ctx{tilde, cfg.alpha, lam};
    const auto sp = relax::build_subproblem(ctx, v, S, ch, alloc, cfg, opt);
    const auto sol = conic::solve(sp.program, params.solver_tol, params.solver_iters);
    if (sol.status == conic::SolveStatus::infeasible) {
      out.status = BeamformStatus::solver_warning;
      break;
    }
    relax::LambdaPoint cand = sp.map.extract(sol.x, opt, cfg.alpha);
    const double obj = detail::surrogate_ee(cand, tilde, cfg, opt);
    const double dink_gap = cand.R.total() - lam * (cand.R.total() / std::max(obj, 1e-12));
    if (obj < prev_obj - 1e-12) rho = std::max(rho * 0.5, 0.125);

    // exact bookkeeping of the candidate
    if (detail::loop_feasible(cand, v, S, ch, cfg)) {
      const double ee = detail::exact_ee(cand, cfg, opt);
      if (ee > best_ee) {
        best_ee = ee;
        best = cand;
        best_valid = true;
      }
    }
    {
      char line[160];
      std::snprintf(line, sizeof line, "bf z=%d lambda=%.6g obj=%.6g gap=%.3g rho=%.3g res=%.3g",
                    z, lam, obj, dink_gap, rho, sol.max_residual);
      out.trace.emplace_back(line);
    }

    // step-norm for the stall test
    double step = 0.0;
    for (int k = 0; k < ch.K; ++k) {
      step += (cand.w.wp[k] - tilde.w.wp[k]).squaredNorm();
      step += (cand.w.wc[k] - tilde.w.wc[k]).squaredNorm();
    }
    step = std::sqrt(step);

    // SCA averaging toward the new optimum
    relax::LambdaPoint next = tilde;
    for (int k = 0; k < ch.K; ++k) {
      next.w.wp[k] += rho * (cand.w.wp[k] - tilde.w.wp[k]);
      next.w.wc[k] += rho * (cand.w.wc[k] - tilde.w.wc[k]);
    }
    next.t_p += rho * (cand.t_p - tilde.t_p);
    next.t_c += rho * (cand.t_c - tilde.t_c);
    next.d_p += rho * (cand.d_p - tilde.d_p);
    next.d_c += rho * (cand.d_c - tilde.d_c);
    next.q_p += rho * (cand.q_p - tilde.q_p);
    next.q_c += rho * (cand.q_c - tilde.q_c);
    next.R.Rp += rho * (cand.R.Rp - tilde.R.Rp);
    next.R.Rc += rho * (cand.R.Rc - tilde.R.Rc);
    tilde = next;
    hat = cand;
    out.surrogate_obj = obj;

    const double rel = std::abs(obj - prev_obj) / std::max(std::abs(prev_obj), 1e-12);
    prev_obj = obj;
    if (rel < params.sca_tol) {
      ++stall_count;
      if (stall_count >= 2 && step < 1e-6) {
        out.status = BeamformStatus::converged;
        break;
      }
    } else {
      stall_count = 0;
    }
    if (std::abs(dink_gap) < params.dink_tol && stall_count >= 1) {
      out.status = BeamformStatus::converged;
      break;
    }
  }

  if (!best_valid) {
    // No exactly feasible iterate: surface the last candidate with a warning.
    out.status = BeamformStatus::solver_warning;
    out.lambda = tilde;
    out.exact_ee = 0.0;
    return out;
  }
  out.lambda = best;
  out.exact_ee = best_ee;
  return out;
}

}  // namespace irscran::beamform
