// SPDX-FileCopyrightText: Copyright (c) 2026 the irscran authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "irscran/types.hpp"

namespace irscran {

/// Network and algorithm parameters for one simulation run.
///
/// Powers are stored in the units they are quoted in (dBm) and converted on
/// access; rates are Mbps throughout, bandwidth is Hz.
struct SimConfig {
  int N = 3;    ///< base stations
  int L = 2;    ///< antennas per BS
  int K = 6;    ///< users
  int R = 15;   ///< IRS reflect elements
  double B = 10e6;               ///< bandwidth, Hz
  double noise_psd = -169.0;     ///< dBm/Hz
  double area_half_width = 500;  ///< m
  double r_min = 3.0;            ///< per-user QoS, Mbps
  double P_max = 35.0;           ///< per-BS transmit budget, dBm
  double P_circ = 37.0;          ///< network circuitry, dBm
  double P_irs_elem = 10.0;      ///< per-element IRS power, dBm
  double P_mbps = 0.3;           ///< fronthaul power factor, W per Mbps
  double shadowing_sigma = 8.0;  ///< dB
  std::uint64_t seed = 1;
  int G = 25;                 ///< Gaussian randomization count
  double rho_penalty = 0.9;   ///< rank-one penalty trade-off, [0,1]
  double eps_cmd = -0.4;      ///< CMD candidate threshold, >= -1
  double eps_thr = -0.5;      ///< CMD verification threshold, >= -1
  int D = 6;                  ///< max decoding layers
  double alpha = 0.0;         ///< l0 smoothness parameter, W; <=0 derives default
  double prune_eps = 1e-6;    ///< inactive-link power threshold, W

  double noise_power_watt() const { return dbm_to_watt(noise_psd + 10.0 * std::log10(B)); }
  double p_max_watt() const { return dbm_to_watt(P_max); }
  double p_circ_watt() const { return dbm_to_watt(P_circ); }
  double p_irs_elem_watt() const { return dbm_to_watt(P_irs_elem); }
  double bandwidth_mhz() const { return B / 1e6; }
  /// Fixed circuitry power with `irs_elements` active reflect elements, W.
  double p_fixed_watt(int irs_elements) const {
    return p_circ_watt() + irs_elements * p_irs_elem_watt();
  }

  /// Fills derived defaults and throws std::invalid_argument on any invariant
  /// violation.
  void validate() {
    if (alpha <= 0.0) alpha = 1e-4 * p_max_watt();
    std::ostringstream bad;
    auto req = [&](bool ok, const char* what) {
      if (!ok) bad << what << "; ";
    };
    req(N >= 1, "N >= 1");
    req(L >= 1, "L >= 1");
    req(K >= 1, "K >= 1");
    req(R >= 1, "R >= 1");
    req(B > 0.0, "B > 0");
    req(r_min > 0.0, "r_min > 0");
    req(rho_penalty >= 0.0 && rho_penalty <= 1.0, "rho_penalty in [0,1]");
    req(eps_cmd >= -1.0, "eps_cmd >= -1");
    req(eps_thr >= -1.0, "eps_thr >= -1");
    req(prune_eps > 0.0, "prune_eps > 0");
    req(alpha > 0.0, "alpha > 0");
    req(D >= 1, "D >= 1");
    req(G >= 1, "G >= 1");
    req(area_half_width > 0.0, "area_half_width > 0");
    req(shadowing_sigma >= 0.0, "shadowing_sigma >= 0");
    if (!bad.str().empty()) throw std::invalid_argument("invalid SimConfig: " + bad.str());
  }
};

inline void from_json(const nlohmann::json& j, SimConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("N", c.N);
  get("L", c.L);
  get("K", c.K);
  get("R", c.R);
  get("B", c.B);
  get("noise_psd", c.noise_psd);
  get("area_half_width", c.area_half_width);
  get("r_min", c.r_min);
  get("P_max", c.P_max);
  get("P_circ", c.P_circ);
  get("P_irs_elem", c.P_irs_elem);
  get("P_mbps", c.P_mbps);
  get("shadowing_sigma", c.shadowing_sigma);
  get("seed", c.seed);
  get("G", c.G);
  get("rho_penalty", c.rho_penalty);
  get("eps_cmd", c.eps_cmd);
  get("eps_thr", c.eps_thr);
  get("D", c.D);
  get("alpha", c.alpha);
  get("prune_eps", c.prune_eps);
}

inline void to_json(nlohmann::json& j, const SimConfig& c) {
  j = nlohmann::json{{"N", c.N},
                     {"L", c.L},
                     {"K", c.K},
                     {"R", c.R},
                     {"B", c.B},
                     {"noise_psd", c.noise_psd},
                     {"area_half_width", c.area_half_width},
                     {"r_min", c.r_min},
                     {"P_max", c.P_max},
                     {"P_circ", c.P_circ},
                     {"P_irs_elem", c.P_irs_elem},
                     {"P_mbps", c.P_mbps},
                     {"shadowing_sigma", c.shadowing_sigma},
                     {"seed", c.seed},
                     {"G", c.G},
                     {"rho_penalty", c.rho_penalty},
                     {"eps_cmd", c.eps_cmd},
                     {"eps_thr", c.eps_thr},
                     {"D", c.D},
                     {"alpha", c.alpha},
                     {"prune_eps", c.prune_eps}};
}

inline SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  SimConfig c = j.get<SimConfig>();
  c.validate();
  return c;
}

}  // namespace irscran
