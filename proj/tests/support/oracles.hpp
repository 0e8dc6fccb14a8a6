// SPDX-FileCopyrightText: Copyright (c) 2026 the irscran authors
// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used as test oracles. These are
// written from the governing expressions directly, with plain loops, and must
// stay decoupled from the library code paths they check.
#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "irscran/beamformers.hpp"
#include "irscran/scenario.hpp"
#include "irscran/sets.hpp"
#include "irscran/types.hpp"

namespace oracle {

using irscran::cplx;
using irscran::VecC;

/// |h^H w|^2 by explicit summation.
inline double abs2_inner(const VecC& h, const VecC& w) {
  cplx acc{0.0, 0.0};
  for (int i = 0; i < h.size(); ++i) acc += std::conj(h[i]) * w[i];
  return std::norm(acc);
}

/// Effective channel of user k by per-element summation over reflect paths.
inline VecC effective_channel_sum(const irscran::ChannelSet& ch, const irscran::VecC& v, int k) {
  VecC h = ch.h_agg[k];
  for (int r = 0; r < ch.R; ++r) h += ch.H_eff[k].col(r) * v[r];
  return h;
}

/// Private SINR of user i decoding the private message of user k, from the
/// definition: all other private streams plus the commons outside Phi_k are
/// interference.
inline double sinr_private_cross(const std::vector<VecC>& heff, const irscran::BeamformerSet& w,
                                 const irscran::CmdSets& S, double sigma2, int i, int k) {
  double den = sigma2;
  for (int m = 0; m < w.K; ++m)
    if (m != k) den += abs2_inner(heff[i], w.wp[m]);
  for (int l = 0; l < w.K; ++l)
    if (!S.in_Phi(l, k)) den += abs2_inner(heff[i], w.wc[l]);
  return abs2_inner(heff[i], w.wp[k]) / den;
}

/// Common SINR of user i decoding s_k^c: every private stream interferes,
/// plus commons i never decodes, plus commons i decodes after k.
inline double sinr_common(const std::vector<VecC>& heff, const irscran::BeamformerSet& w,
                          const irscran::CmdSets& S, double sigma2, int i, int k) {
  double den = sigma2;
  for (int j = 0; j < w.K; ++j) den += abs2_inner(heff[i], w.wp[j]);
  for (int l = 0; l < w.K; ++l)
    if (!S.in_Phi(l, i)) den += abs2_inner(heff[i], w.wc[l]);
  bool after = false;
  for (int m : S.pi[i]) {
    if (after) den += abs2_inner(heff[i], w.wc[m]);
    if (m == k) after = true;
  }
  return abs2_inner(heff[i], w.wc[k]) / den;
}

/// Central finite difference of a scalar function.
inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace oracle
