// SPDX-FileCopyrightText: Copyright (c) 2026 the irscran authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace irscran {

/// The common-message-decoding set system: M[k] is the group of users that
/// decode user k's common message, Phi[k] the users whose common messages
/// user k decodes, and pi[k] the successive-decoding order over Phi[k]
/// (first element decoded first). M and Phi are duals of each other:
/// j in M[k]  <=>  k in Phi[j].
struct CmdSets {
  int K = 0;
  std::vector<std::vector<int>> M;    // sorted ascending
  std::vector<std::vector<int>> Phi;  // sorted ascending
  std::vector<std::vector<int>> pi;   // permutation of Phi[k], decode order

  static CmdSets tin(int K) {
    CmdSets s;
    s.K = K;
    s.M.assign(K, {});
    s.Phi.assign(K, {});
    s.pi.assign(K, {});
    return s;
  }

  /// Phi_k = {k} for every user: each user decodes only its own common
  /// message.
  static CmdSets self_only(int K) {
    CmdSets s = tin(K);
    for (int k = 0; k < K; ++k) {
      s.M[k] = {k};
      s.Phi[k] = {k};
      s.pi[k] = {k};
    }
    return s;
  }

  bool tin_mode() const {
    for (const auto& m : M)
      if (!m.empty()) return false;
    return true;
  }

  bool in_M(int j, int k) const { return std::binary_search(M[k].begin(), M[k].end(), j); }
  bool in_Phi(int j, int k) const { return std::binary_search(Phi[k].begin(), Phi[k].end(), j); }

  /// Complement of Phi[k] within {0..K-1}.
  std::vector<int> phi_bar(int k) const {
    std::vector<int> out;
    for (int j = 0; j < K; ++j)
      if (!in_Phi(j, k)) out.push_back(j);
    return out;
  }

  /// Position of k in user i's decode order; -1 if i does not decode s_k^c.
  int decode_pos(int i, int k) const {
    for (std::size_t p = 0; p < pi[i].size(); ++p)
      if (pi[i][p] == k) return static_cast<int>(p);
    return -1;
  }

  /// Omega_{i,k}: common messages user i decodes after s_k^c (still
  /// uncancelled interference while decoding s_k^c).
  std::vector<int> omega(int i, int k) const {
    const int pos = decode_pos(i, k);
    if (pos < 0) throw std::logic_error("omega: user does not decode this common message");
    return {pi[i].begin() + pos + 1, pi[i].end()};
  }

  /// Adds user j to M[k] (j will decode s_k^c); pi[j] must be re-derived by
  /// the caller.
  void add_member(int j, int k) {
    auto ins = [](std::vector<int>& v, int x) {
      auto it = std::lower_bound(v.begin(), v.end(), x);
      if (it == v.end() || *it != x) v.insert(it, x);
    };
    ins(M[k], j);
    ins(Phi[j], k);
  }

  void validate(int D) const {
    for (int k = 0; k < K; ++k) {
      if (static_cast<int>(Phi[k].size()) > D) throw std::logic_error("CmdSets: |Phi_k| > D");
      if (pi[k].size() != Phi[k].size())
        throw std::logic_error("CmdSets: pi is not a permutation of Phi");
      std::vector<int> sorted = pi[k];
      std::sort(sorted.begin(), sorted.end());
      if (sorted != Phi[k]) throw std::logic_error("CmdSets: pi is not a permutation of Phi");
      for (int j : M[k])
        if (!in_Phi(k, j)) throw std::logic_error("CmdSets: M/Phi duality broken");
      for (int j : Phi[k])
        if (!in_M(k, j)) throw std::logic_error("CmdSets: Phi/M duality broken");
    }
  }
};

}  // namespace irscran
