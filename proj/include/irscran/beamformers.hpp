// SPDX-FileCopyrightText: Copyright (c) 2026 the irscran authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "irscran/types.hpp"

namespace irscran {

enum class Stream { priv = 0, common = 1 };
inline constexpr Stream kStreams[2] = {Stream::priv, Stream::common};

/// Aggregate beamformers: one length-N*L vector per user and stream, stacked
/// in BS-index order. Per-BS blocks are views into the aggregate.
struct BeamformerSet {
  int N = 0, L = 0, K = 0;
  std::vector<VecC> wp;  // [k], length N*L
  std::vector<VecC> wc;  // [k], length N*L

  BeamformerSet() = default;
  BeamformerSet(int N_, int L_, int K_) : N(N_), L(L_), K(K_) {
    wp.assign(K, VecC::Zero(N * L));
    wc.assign(K, VecC::Zero(N * L));
  }

  VecC& vec(int k, Stream o) { return o == Stream::priv ? wp[k] : wc[k]; }
  const VecC& vec(int k, Stream o) const { return o == Stream::priv ? wp[k] : wc[k]; }

  Eigen::VectorBlock<VecC> block(int n, int k, Stream o) { return vec(k, o).segment(n * L, L); }
  Eigen::VectorBlock<const VecC> block(int n, int k, Stream o) const {
    return vec(k, o).segment(n * L, L);
  }

  double block_power(int n, int k, Stream o) const { return block(n, k, o).squaredNorm(); }

  double total_power() const {
    double p = 0;
    for (int k = 0; k < K; ++k) p += wp[k].squaredNorm() + wc[k].squaredNorm();
    return p;
  }

  double bs_power(int n) const {
    double p = 0;
    for (int k = 0; k < K; ++k) p += block_power(n, k, Stream::priv) + block_power(n, k, Stream::common);
    return p;
  }

  /// Zeroes every per-BS block whose power is at or below eps.
  void prune(double eps) {
    for (int k = 0; k < K; ++k)
      for (int n = 0; n < N; ++n)
        for (Stream o : kStreams)
          if (block_power(n, k, o) <= eps) block(n, k, o).setZero();
  }
};

}  // namespace irscran
