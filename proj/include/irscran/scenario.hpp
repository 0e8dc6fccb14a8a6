// SPDX-FileCopyrightText: Copyright (c) 2026 the irscran authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "irscran/config.hpp"
#include "irscran/types.hpp"

namespace irscran {

struct Topology {
  std::vector<std::array<double, 2>> bs_positions;    // N points, m
  std::vector<std::array<double, 2>> user_positions;  // K points, m
  std::array<double, 2> irs_position{0.0, 0.0};
};

/// All channel coefficients of one drop, plus the aggregate stackings used by
/// the optimization. Immutable after generation.
struct ChannelSet {
  int N = 0, L = 0, K = 0, R = 0;
  std::vector<std::vector<VecC>> h_direct;  // [n][k], length L
  std::vector<MatC> H_bs_irs;               // [n], L x R
  std::vector<VecC> h_irs_user;             // [k], length R

  // Aggregates, derived at construction.
  std::vector<VecC> h_agg;  // [k], length N*L, blocks in BS order
  MatC H_bi_agg;            // N*L x R
  std::vector<MatC> H_eff;  // [k], N*L x R, = H_bi_agg * diag(h_irs_user[k])

  void build_aggregates() {
    h_agg.assign(K, VecC::Zero(N * L));
    H_bi_agg = MatC::Zero(N * L, R);
    for (int n = 0; n < N; ++n) {
      H_bi_agg.middleRows(n * L, L) = H_bs_irs[n];
      for (int k = 0; k < K; ++k) h_agg[k].segment(n * L, L) = h_direct[n][k];
    }
    H_eff.assign(K, MatC());
    for (int k = 0; k < K; ++k) H_eff[k] = H_bi_agg * h_irs_user[k].asDiagonal();
  }

  /// Copy with the reflected paths removed (IRS absent).
  ChannelSet without_irs() const {
    ChannelSet c = *this;
    for (auto& m : c.H_bs_irs) m.setZero();
    for (auto& v : c.h_irs_user) v.setZero();
    c.build_aggregates();
    return c;
  }

  /// FNV-1a over all coefficient bytes; used by the paired-drop contract.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto feed = [&](const cplx* p, std::size_t count) {
      const unsigned char* b = reinterpret_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < count * sizeof(cplx); ++i) {
        h ^= b[i];
        h *= 1099511628211ULL;
      }
    };
    for (int n = 0; n < N; ++n)
      for (int k = 0; k < K; ++k) feed(h_direct[n][k].data(), h_direct[n][k].size());
    for (int n = 0; n < N; ++n) feed(H_bs_irs[n].data(), H_bs_irs[n].size());
    for (int k = 0; k < K; ++k) feed(h_irs_user[k].data(), h_irs_user[k].size());
    return h;
  }
};

/// Unit-modulus reflection coefficients of the IRS.
struct PhaseShiftVector {
  VecC v;

  static constexpr double kModulusTol = 1e-9;

  static PhaseShiftVector ones(int R) { return PhaseShiftVector{VecC::Ones(R)}; }

  bool unit_modulus() const {
    for (int r = 0; r < v.size(); ++r)
      if (std::abs(std::abs(v[r]) - 1.0) > kModulusTol) return false;
    return true;
  }
  void require_unit_modulus() const {
    if (!unit_modulus()) throw std::invalid_argument("phase-shift vector is not unit-modulus");
  }
};

enum class FronthaulRegime { partially_connected, fully_connected };

struct FronthaulAllocation {
  std::vector<double> C;  // per-BS capacity, Mbps
  FronthaulRegime regime = FronthaulRegime::partially_connected;
  double total() const {
    double s = 0;
    for (double c : C) s += c;
    return s;
  }
};

inline Topology generate_topology(const SimConfig& cfg, Rng& rng) {
  Topology t;
  const double a = cfg.area_half_width;
  t.bs_positions.resize(cfg.N);
  for (auto& p : t.bs_positions) p = {rng.uniform(-a, a), rng.uniform(-a, a)};
  t.user_positions.resize(cfg.K);
  for (auto& p : t.user_positions) p = {rng.uniform(-a, a), rng.uniform(-a, a)};
  t.irs_position = {0.0, 0.0};
  return t;
}

namespace detail {

inline double distance_m(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1];
  return std::sqrt(dx * dx + dy * dy);
}

/// Amplitude gain of one link: path loss 148.1 + 37.6 log10(d_km) plus
/// log-normal shadowing, as a linear multiplier on the fading coefficients.
/// Distances are clamped to 1 m.
inline double link_amplitude(double dist_m, double shadow_db) {
  const double d_km = std::max(dist_m, 1.0) / 1000.0;
  const double pl_db = 148.1 + 37.6 * std::log10(d_km);
  return std::pow(10.0, -(pl_db + shadow_db) / 20.0);
}

}  // namespace detail

/// Draw order is fixed: per-(n,k) direct links, then per-n BS-IRS links, then
/// per-k IRS-user links; shadowing is drawn per link, fading per coefficient.
inline ChannelSet generate_channels(const Topology& topo, const SimConfig& cfg, Rng& rng) {
  ChannelSet ch;
  ch.N = cfg.N;
  ch.L = cfg.L;
  ch.K = cfg.K;
  ch.R = cfg.R;
  ch.h_direct.assign(cfg.N, std::vector<VecC>(cfg.K));
  for (int n = 0; n < cfg.N; ++n)
    for (int k = 0; k < cfg.K; ++k) {
      const double amp = detail::link_amplitude(
          detail::distance_m(topo.bs_positions[n], topo.user_positions[k]),
          rng.normal(0.0, cfg.shadowing_sigma));
      VecC h(cfg.L);
      for (int l = 0; l < cfg.L; ++l) h[l] = amp * rng.cnormal();
      ch.h_direct[n][k] = h;
    }
  ch.H_bs_irs.assign(cfg.N, MatC());
  for (int n = 0; n < cfg.N; ++n) {
    const double amp = detail::link_amplitude(
        detail::distance_m(topo.bs_positions[n], topo.irs_position),
        rng.normal(0.0, cfg.shadowing_sigma));
    MatC H(cfg.L, cfg.R);
    for (int l = 0; l < cfg.L; ++l)
      for (int r = 0; r < cfg.R; ++r) H(l, r) = amp * rng.cnormal();
    ch.H_bs_irs[n] = H;
  }
  ch.h_irs_user.assign(cfg.K, VecC());
  for (int k = 0; k < cfg.K; ++k) {
    const double amp = detail::link_amplitude(
        detail::distance_m(topo.irs_position, topo.user_positions[k]),
        rng.normal(0.0, cfg.shadowing_sigma));
    VecC h(cfg.R);
    for (int r = 0; r < cfg.R; ++r) h[r] = amp * rng.cnormal();
    ch.h_irs_user[k] = h;
  }
  ch.build_aggregates();
  return ch;
}

/// Splits a total fronthaul budget over the BSs. Below the transition point
/// C_TP = N*K*r_min the budget is dealt out in r_min-sized user slots, spread
/// as evenly as possible with remainder slots going to the lowest-index BSs;
/// from the transition point on it is split equally.
inline FronthaulAllocation allocate_fronthaul(double C_total, const SimConfig& cfg) {
  if (C_total < cfg.N * cfg.r_min)
    throw std::invalid_argument("fronthaul budget below one user slot per BS");
  FronthaulAllocation out;
  out.C.assign(cfg.N, 0.0);
  const double C_tp = static_cast<double>(cfg.N) * cfg.K * cfg.r_min;
  if (C_total < C_tp) {
    out.regime = FronthaulRegime::partially_connected;
    const long slots = static_cast<long>(std::floor(C_total / cfg.r_min));
    const long base = slots / cfg.N;
    const long rem = slots % cfg.N;
    for (int n = 0; n < cfg.N; ++n) out.C[n] = (base + (n < rem ? 1 : 0)) * cfg.r_min;
  } else {
    out.regime = FronthaulRegime::fully_connected;
    for (int n = 0; n < cfg.N; ++n) out.C[n] = C_total / cfg.N;
  }
  return out;
}

/// h_k + H_k v, the direct path superposed with the reflected path.
inline VecC effective_channel(const ChannelSet& ch, const PhaseShiftVector& psv, int k) {
  return ch.h_agg[k] + ch.H_eff[k] * psv.v;
}

/// All effective channels at once.
inline std::vector<VecC> effective_channels(const ChannelSet& ch, const PhaseShiftVector& psv) {
  std::vector<VecC> h(ch.K);
  for (int k = 0; k < ch.K; ++k) h[k] = effective_channel(ch, psv, k);
  return h;
}

}  // namespace irscran
