// SPDX-FileCopyrightText: Copyright (c) 2026 the irscran authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <string>
#include <vector>

#include "irscran/beamformers.hpp"
#include "irscran/config.hpp"
#include "irscran/scenario.hpp"
#include "irscran/sets.hpp"

namespace irscran {

struct RateAllocation {
  VecR Rp, Rc;  // Mbps
  RateAllocation() = default;
  explicit RateAllocation(int K) : Rp(VecR::Zero(K)), Rc(VecR::Zero(K)) {}
  double total() const { return Rp.sum() + Rc.sum(); }
};

/// Exact SINRs of one operating point.
///   gamma_p[k]        : user k decoding its own private message
///   gamma_c(i,k)      : user i decoding user k's common message, i in M[k]
///                       (NaN where undefined)
///   gamma_cross_p(i,k): user i decoding user k's *private* message, the
///                       cross ratio used for CMD candidate screening
struct SinrSet {
  VecR gamma_p;
  MatR gamma_c;
  MatR gamma_cross_p;
};

namespace detail {

inline double abs2(const cplx& z) { return std::norm(z); }

}  // namespace detail

/// Evaluates the exact SINR expressions at (w, v, S). Private SINR treats the
/// other private streams plus the undecodable common streams (Phi-bar) as
/// interference; common SINR of user i on message k sees all private streams,
/// the commons i never decodes, and the commons i decodes after k.
inline SinrSet compute_sinrs(const BeamformerSet& w, const PhaseShiftVector& v, const CmdSets& S,
                             const ChannelSet& ch, double sigma2) {
  const int K = ch.K;
  SinrSet out;
  out.gamma_p = VecR::Zero(K);
  out.gamma_c = MatR::Constant(K, K, std::numeric_limits<double>::quiet_NaN());
  out.gamma_cross_p = MatR::Zero(K, K);

  // sig(i,j,o) = |h_i^eff^H w_j^o|^2
  std::vector<VecC> heff(K);
  for (int k = 0; k < K; ++k) heff[k] = effective_channel(ch, v, k);
  MatR sp(K, K), sc(K, K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) {
      sp(i, j) = detail::abs2(heff[i].dot(w.wp[j]));
      sc(i, j) = detail::abs2(heff[i].dot(w.wc[j]));
    }

  // Private denominators share structure with the cross ratios: user i
  // decoding user k's private message sees sum_{m != k} sp(i,m) plus the
  // commons in Phi-bar_k evaluated at i's channel.
  for (int k = 0; k < K; ++k) {
    const auto phibar_k = S.phi_bar(k);
    for (int i = 0; i < K; ++i) {
      double den = sigma2;
      for (int m = 0; m < K; ++m)
        if (m != k) den += sp(i, m);
      for (int l : phibar_k) den += sc(i, l);
      const double val = sp(i, k) / den;
      out.gamma_cross_p(i, k) = val;
      if (i == k) out.gamma_p[k] = val;
    }
  }

  for (int k = 0; k < K; ++k)
    for (int i : S.M[k]) {
      double den = sigma2;
      for (int j = 0; j < K; ++j) den += sp(i, j);  // T_i
      for (int l : S.phi_bar(i)) den += sc(i, l);
      for (int m : S.omega(i, k)) den += sc(i, m);
      out.gamma_c(i, k) = sc(i, k) / den;
    }
  return out;
}

/// Shannon rates at the exact SINRs: Rp = B log2(1+gamma_p); the common rate
/// is set by the worst decoder in M[k] and is zero when nobody decodes it or
/// the common beam carries no power.
inline RateAllocation achievable_rates(const BeamformerSet& w, const PhaseShiftVector& v,
                                       const CmdSets& S, const ChannelSet& ch, double sigma2,
                                       double bandwidth_mhz) {
  const SinrSet s = compute_sinrs(w, v, S, ch, sigma2);
  RateAllocation r(ch.K);
  for (int k = 0; k < ch.K; ++k) {
    r.Rp[k] = bandwidth_mhz * log2p1(s.gamma_p[k]);
    if (!S.M[k].empty() && w.wc[k].squaredNorm() > 0.0) {
      double worst = std::numeric_limits<double>::infinity();
      for (int i : S.M[k]) worst = std::min(worst, s.gamma_c(i, k));
      r.Rc[k] = bandwidth_mhz * log2p1(worst);
    }
  }
  return r;
}

struct PowerBreakdown {
  double transmit = 0.0;    // W
  double circ_fixed = 0.0;  // W, circuitry plus active IRS elements
  double fronthaul = 0.0;   // W
  double total() const { return transmit + circ_fixed + fronthaul; }
};

/// Per-BS fronthaul traffic in Mbps: a stream's allocated rate counts against
/// BS n whenever the corresponding per-BS beam block carries more than
/// prune_eps of power.
inline std::vector<double> fronthaul_load(const BeamformerSet& w, const RateAllocation& rates,
                                          double prune_eps) {
  std::vector<double> load(w.N, 0.0);
  for (int n = 0; n < w.N; ++n)
    for (int k = 0; k < w.K; ++k) {
      if (w.block_power(n, k, Stream::priv) > prune_eps) load[n] += rates.Rp[k];
      if (w.block_power(n, k, Stream::common) > prune_eps) load[n] += rates.Rc[k];
    }
  return load;
}

/// Transmit + fixed circuitry + fronthaul power. `irs_elements` is the count
/// of active reflect elements (0 when no IRS is deployed).
inline PowerBreakdown power_breakdown(const BeamformerSet& w, const RateAllocation& rates,
                                      const SimConfig& cfg, double prune_eps, int irs_elements) {
  PowerBreakdown p;
  p.transmit = w.total_power();
  p.circ_fixed = cfg.p_fixed_watt(irs_elements);
  const auto load = fronthaul_load(w, rates, prune_eps);
  for (double l : load) p.fronthaul += cfg.P_mbps * l;
  return p;
}

/// Total network rate over total consumed power, Mbps per Watt.
inline double energy_efficiency(const RateAllocation& rates, const PowerBreakdown& powers) {
  const double p = powers.total();
  if (p <= 0.0) throw std::invalid_argument("energy_efficiency: nonpositive total power");
  return rates.total() / p;
}

struct FeasibilityReport {
  bool power_ok = true;
  double power_violation = 0.0;  // W, worst over BSs
  bool qos_ok = true;
  double qos_violation = 0.0;  // Mbps, worst over users
  bool private_rate_ok = true;
  double private_rate_violation = 0.0;  // Mbps
  bool common_rate_ok = true;
  double common_rate_violation = 0.0;  // Mbps
  bool fronthaul_ok = true;
  double fronthaul_violation = 0.0;  // Mbps, worst over BSs
  bool unit_modulus_ok = true;
  double unit_modulus_violation = 0.0;

  bool overall() const {
    return power_ok && qos_ok && private_rate_ok && common_rate_ok && fronthaul_ok &&
           unit_modulus_ok;
  }
  std::string describe() const {
    std::string s;
    auto add = [&](bool ok, const char* name, double viol) {
      if (!ok) s += std::string(name) + " violated by " + std::to_string(viol) + "; ";
    };
    add(power_ok, "power", power_violation);
    add(qos_ok, "qos", qos_violation);
    add(private_rate_ok, "private-rate", private_rate_violation);
    add(common_rate_ok, "common-rate", common_rate_violation);
    add(fronthaul_ok, "fronthaul", fronthaul_violation);
    add(unit_modulus_ok, "unit-modulus", unit_modulus_violation);
    return s.empty() ? "feasible" : s;
  }
};

inline constexpr double kAuditTol = 1e-6;

/// Exact audit of a candidate operating point against per-BS power, QoS,
/// decodability of the allocated rates, the l0 fronthaul constraint and the
/// unit-modulus requirement. Reports, never throws.
inline FeasibilityReport check_feasibility(const BeamformerSet& w, const PhaseShiftVector& v,
                                           const RateAllocation& rates, const CmdSets& S,
                                           const ChannelSet& ch, const FronthaulAllocation& alloc,
                                           const SimConfig& cfg) {
  FeasibilityReport rep;
  const double p_max = cfg.p_max_watt();
  for (int n = 0; n < w.N; ++n) {
    const double over = w.bs_power(n) - p_max;
    if (over > kAuditTol) {
      rep.power_ok = false;
      rep.power_violation = std::max(rep.power_violation, over);
    }
  }
  for (int k = 0; k < ch.K; ++k) {
    const double shortfall = cfg.r_min - (rates.Rp[k] + rates.Rc[k]);
    if (shortfall > kAuditTol) {
      rep.qos_ok = false;
      rep.qos_violation = std::max(rep.qos_violation, shortfall);
    }
  }
  const SinrSet s = compute_sinrs(w, v, S, ch, cfg.noise_power_watt());
  const double bmhz = cfg.bandwidth_mhz();
  for (int k = 0; k < ch.K; ++k) {
    const double over_p = rates.Rp[k] - bmhz * log2p1(s.gamma_p[k]);
    if (over_p > kAuditTol) {
      rep.private_rate_ok = false;
      rep.private_rate_violation = std::max(rep.private_rate_violation, over_p);
    }
    if (rates.Rc[k] > kAuditTol && S.M[k].empty()) {
      rep.common_rate_ok = false;
      rep.common_rate_violation = std::max(rep.common_rate_violation, rates.Rc[k]);
    }
    for (int i : S.M[k]) {
      const double over_c = rates.Rc[k] - bmhz * log2p1(s.gamma_c(i, k));
      if (over_c > kAuditTol) {
        rep.common_rate_ok = false;
        rep.common_rate_violation = std::max(rep.common_rate_violation, over_c);
      }
    }
  }
  const auto load = fronthaul_load(w, rates, cfg.prune_eps);
  for (int n = 0; n < w.N; ++n) {
    const double over = load[n] - alloc.C[n];
    if (over > kAuditTol) {
      rep.fronthaul_ok = false;
      rep.fronthaul_violation = std::max(rep.fronthaul_violation, over);
    }
  }
  for (int r = 0; r < v.v.size(); ++r) {
    const double dev = std::abs(std::abs(v.v[r]) - 1.0);
    if (dev > PhaseShiftVector::kModulusTol) {
      rep.unit_modulus_ok = false;
      rep.unit_modulus_violation = std::max(rep.unit_modulus_violation, dev);
    }
  }
  return rep;
}

}  // namespace irscran
