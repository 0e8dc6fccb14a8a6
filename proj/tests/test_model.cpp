// SPDX-FileCopyrightText: Copyright (c) 2026 the irscran authors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "irscran/model.hpp"
#include "support/oracles.hpp"

using namespace irscran;

namespace {

struct Fixture {
  SimConfig cfg;
  Topology topo;
  ChannelSet ch;
  PhaseShiftVector v;

  explicit Fixture(std::uint64_t seed, int N = 2, int L = 2, int K = 3, int R = 4) {
    cfg.N = N;
    cfg.L = L;
    cfg.K = K;
    cfg.R = R;
    cfg.validate();
    Rng rng(seed);
    topo = generate_topology(cfg, rng);
    ch = generate_channels(topo, cfg, rng);
    VecC vv(R);
    for (int r = 0; r < R; ++r) vv[r] = std::polar(1.0, rng.uniform(0.0, 2.0 * kPi));
    v.v = vv;
  }

  BeamformerSet random_beams(std::uint64_t seed, double scale = 1.0) const {
    BeamformerSet w(cfg.N, cfg.L, cfg.K);
    Rng rng(seed);
    for (int k = 0; k < cfg.K; ++k)
      for (int i = 0; i < cfg.N * cfg.L; ++i) {
        w.wp[k][i] = scale * rng.cnormal();
        w.wc[k][i] = scale * rng.cnormal();
      }
    return w;
  }

  /// Three users in a chain: 0 decoded by {0,1}, 1 by {1}, 2 by {2,0}.
  CmdSets chain_sets() const {
    CmdSets S = CmdSets::self_only(cfg.K);
    S.add_member(1, 0);
    S.add_member(0, 2);
    // decode orders: user 0 decodes {0,2}, order 2 first; user 1 decodes {0,1}.
    S.pi[0] = {2, 0};
    S.pi[1] = {0, 1};
    S.pi[2] = {2};
    S.validate(cfg.D);
    return S;
  }
};

}  // namespace

TEST_CASE("single-user private SINR is signal over noise", "[model]") {
  SimConfig cfg;
  cfg.N = 1;
  cfg.L = 2;
  cfg.K = 1;
  cfg.R = 1;
  cfg.validate();
  ChannelSet ch;
  ch.N = 1;
  ch.L = 2;
  ch.K = 1;
  ch.R = 1;
  ch.h_direct = {{(VecC(2) << cplx(1, 0), cplx(0, 0)).finished()}};
  ch.H_bs_irs = {MatC::Zero(2, 1)};
  ch.h_irs_user = {VecC::Zero(1)};
  ch.build_aggregates();
  BeamformerSet w(1, 2, 1);
  w.wp[0] << cplx(2, 0), cplx(0, 0);
  const CmdSets S = CmdSets::tin(1);
  const auto s = compute_sinrs(w, PhaseShiftVector::ones(1), S, ch, 1.0);
  CHECK(s.gamma_p[0] == Catch::Approx(4.0));
}

TEST_CASE("last-layer common SINR sees only private interference", "[model]") {
  // i == k, Phi_bar and Omega empty: gamma_c = |h^H w_c|^2/(sigma^2 + sum |h^H w_p|^2).
  Fixture f(21, 1, 2, 2, 2);
  CmdSets S = CmdSets::self_only(2);
  S.add_member(1, 0);
  S.add_member(0, 1);
  S.pi[0] = {1, 0};  // user 0 decodes s_1^c first, own last
  S.pi[1] = {0, 1};
  BeamformerSet w = f.random_beams(31);
  w.wc[1].setZero();  // single common beam (user 0's)
  const double sigma2 = f.cfg.noise_power_watt();
  const auto s = compute_sinrs(w, f.v, S, f.ch, sigma2);
  const VecC heff = effective_channel(f.ch, f.v, 0);
  double den = sigma2;
  for (int j = 0; j < 2; ++j) den += std::norm(heff.dot(w.wp[j]));
  CHECK(s.gamma_c(0, 0) == Catch::Approx(std::norm(heff.dot(w.wc[0])) / den).epsilon(1e-12));
}

TEST_CASE("SINRs match the independent summation oracle", "[model]") {
  Fixture f(77);
  const CmdSets S = f.chain_sets();
  const BeamformerSet w = f.random_beams(78);
  const double sigma2 = f.cfg.noise_power_watt();
  const auto s = compute_sinrs(w, f.v, S, f.ch, sigma2);
  std::vector<VecC> heff;
  for (int k = 0; k < f.cfg.K; ++k) heff.push_back(effective_channel(f.ch, f.v, k));
  for (int k = 0; k < f.cfg.K; ++k) {
    CHECK(s.gamma_p[k] ==
          Catch::Approx(oracle::sinr_private_cross(heff, w, S, sigma2, k, k)).epsilon(1e-10));
    for (int i = 0; i < f.cfg.K; ++i)
      CHECK(s.gamma_cross_p(i, k) ==
            Catch::Approx(oracle::sinr_private_cross(heff, w, S, sigma2, i, k)).epsilon(1e-10));
    for (int i : S.M[k])
      CHECK(s.gamma_c(i, k) ==
            Catch::Approx(oracle::sinr_common(heff, w, S, sigma2, i, k)).epsilon(1e-10));
  }
}

TEST_CASE("scaling the intended beam strictly increases the private SINR", "[model]") {
  Fixture f(101);
  const CmdSets S = f.chain_sets();
  BeamformerSet w = f.random_beams(102);
  const double sigma2 = f.cfg.noise_power_watt();
  const double before = compute_sinrs(w, f.v, S, f.ch, sigma2).gamma_p[1];
  w.wp[1] *= 1.5;
  const double after = compute_sinrs(w, f.v, S, f.ch, sigma2).gamma_p[1];
  CHECK(after > before);
}

TEST_CASE("common SINR depends only on its own interference structure", "[model]") {
  // gamma_c(i,k) must be bit-identical under perturbation of a common beam
  // that i decodes before k.
  Fixture f(55);
  CmdSets S = f.chain_sets();
  BeamformerSet w = f.random_beams(56);
  const double sigma2 = f.cfg.noise_power_watt();
  // user 0 decodes order {2, 0}: while decoding s_2^c, s_0^c is still
  // interference; while decoding s_0^c, s_2^c is cancelled.
  const double g00 = compute_sinrs(w, f.v, S, f.ch, sigma2).gamma_c(0, 0);
  w.wc[2] *= 3.0;  // decoded earlier by user 0
  const double g00_after = compute_sinrs(w, f.v, S, f.ch, sigma2).gamma_c(0, 0);
  CHECK(g00 == g00_after);  // bit-identical
}

TEST_CASE("rates: log2 mapping, min rule, and empty-group rule", "[model]") {
  Fixture f(61, 1, 2, 2, 2);
  SECTION("gamma = 1 at 10 MHz gives 10 Mbps") {
    CHECK(10.0 * log2p1(1.0) == Catch::Approx(10.0));
  }
  SECTION("common rate is governed by the worst group member") {
    CmdSets S = CmdSets::self_only(2);
    S.add_member(1, 0);
    S.pi[1] = {0, 1};
    const BeamformerSet w = f.random_beams(62);
    const double sigma2 = f.cfg.noise_power_watt();
    const auto s = compute_sinrs(w, f.v, S, f.ch, sigma2);
    const auto r = achievable_rates(w, f.v, S, f.ch, sigma2, f.cfg.bandwidth_mhz());
    const double worst = std::min(s.gamma_c(0, 0), s.gamma_c(1, 0));
    CHECK(r.Rc[0] == Catch::Approx(f.cfg.bandwidth_mhz() * log2p1(worst)));
    // exhaustive per-member evaluation
    for (int i : S.M[0])
      CHECK(r.Rc[0] <= f.cfg.bandwidth_mhz() * log2p1(s.gamma_c(i, 0)) + 1e-12);
  }
  SECTION("no decoders means zero common rate") {
    const CmdSets S = CmdSets::tin(2);
    const auto r = achievable_rates(f.random_beams(63), f.v, S, f.ch,
                                    f.cfg.noise_power_watt(), f.cfg.bandwidth_mhz());
    CHECK(r.Rc.sum() == 0.0);
  }
}

TEST_CASE("TIN sets reduce rates to private-only rates", "[model]") {
  Fixture f(71);
  BeamformerSet w = f.random_beams(72);
  for (int k = 0; k < f.cfg.K; ++k) w.wc[k].setZero();
  const double sigma2 = f.cfg.noise_power_watt();
  const auto r_tin = achievable_rates(w, f.v, CmdSets::tin(f.cfg.K), f.ch, sigma2,
                                      f.cfg.bandwidth_mhz());
  const auto s = compute_sinrs(w, f.v, CmdSets::tin(f.cfg.K), f.ch, sigma2);
  for (int k = 0; k < f.cfg.K; ++k) {
    CHECK(r_tin.Rp[k] == Catch::Approx(f.cfg.bandwidth_mhz() * log2p1(s.gamma_p[k])));
    CHECK(r_tin.Rc[k] == 0.0);
  }
}

TEST_CASE("power breakdown components", "[model]") {
  Fixture f(81);
  SECTION("all-zero beams leave only fixed circuitry") {
    const BeamformerSet w(f.cfg.N, f.cfg.L, f.cfg.K);
    const RateAllocation r(f.cfg.K);
    const auto p = power_breakdown(w, r, f.cfg, f.cfg.prune_eps, f.cfg.R);
    CHECK(p.total() == Catch::Approx(f.cfg.p_fixed_watt(f.cfg.R)));
    CHECK(p.transmit == 0.0);
    CHECK(p.fronthaul == 0.0);
  }
  SECTION("one private link at 3 Mbps costs 0.9 W of fronthaul power") {
    BeamformerSet w(f.cfg.N, f.cfg.L, f.cfg.K);
    w.wp[0][0] = cplx(1.0, 0.0);  // served by BS 0 only
    RateAllocation r(f.cfg.K);
    r.Rp[0] = 3.0;
    const auto p = power_breakdown(w, r, f.cfg, f.cfg.prune_eps, f.cfg.R);
    CHECK(p.fronthaul == Catch::Approx(0.3 * 3.0));
  }
  SECTION("indicator matches the l0 definition on sparse beams") {
    Rng rng(83);
    BeamformerSet w(f.cfg.N, f.cfg.L, f.cfg.K);
    RateAllocation r(f.cfg.K);
    for (int k = 0; k < f.cfg.K; ++k) {
      r.Rp[k] = rng.uniform(0.0, 10.0);
      r.Rc[k] = rng.uniform(0.0, 10.0);
      for (int n = 0; n < f.cfg.N; ++n) {
        if (rng.uniform(0, 1) < 0.5) w.block(n, k, Stream::priv).setConstant(cplx(0.1, 0));
        if (rng.uniform(0, 1) < 0.5) w.block(n, k, Stream::common).setConstant(cplx(0.2, 0));
      }
    }
    double expect = 0.0;
    for (int n = 0; n < f.cfg.N; ++n)
      for (int k = 0; k < f.cfg.K; ++k) {
        const double pp = w.block(n, k, Stream::priv).squaredNorm();
        const double pc = w.block(n, k, Stream::common).squaredNorm();
        expect += f.cfg.P_mbps * ((pp > f.cfg.prune_eps ? 1.0 : 0.0) * r.Rp[k] +
                                  (pc > f.cfg.prune_eps ? 1.0 : 0.0) * r.Rc[k]);
      }
    const auto p = power_breakdown(w, r, f.cfg, f.cfg.prune_eps, f.cfg.R);
    CHECK(p.fronthaul == Catch::Approx(expect));
  }
}

TEST_CASE("fronthaul load accounting", "[model]") {
  Fixture f(91);
  SECTION("simple sum of served private rates") {
    BeamformerSet w(f.cfg.N, f.cfg.L, f.cfg.K);
    w.wp[0][0] = cplx(1, 0);
    w.wp[1][1] = cplx(1, 0);
    RateAllocation r(f.cfg.K);
    r.Rp[0] = 3.0;
    r.Rp[1] = 4.0;
    CHECK(fronthaul_load(w, r, f.cfg.prune_eps)[0] == Catch::Approx(7.0));
  }
  SECTION("links below the prune threshold carry nothing") {
    BeamformerSet w(f.cfg.N, f.cfg.L, f.cfg.K);
    w.wp[0][0] = cplx(1e-5, 0);  // power 1e-10 < prune_eps
    RateAllocation r(f.cfg.K);
    r.Rp[0] = 3.0;
    CHECK(fronthaul_load(w, r, f.cfg.prune_eps)[0] == 0.0);
  }
  SECTION("matches the set-membership form") {
    Rng rng(92);
    BeamformerSet w = f.random_beams(93, 1e-2);
    RateAllocation r(f.cfg.K);
    for (int k = 0; k < f.cfg.K; ++k) {
      r.Rp[k] = rng.uniform(0, 5);
      r.Rc[k] = rng.uniform(0, 5);
    }
    const auto load = fronthaul_load(w, r, f.cfg.prune_eps);
    for (int n = 0; n < f.cfg.N; ++n) {
      // K_n^p / K_n^c as explicit membership sets
      double want = 0.0;
      for (int k = 0; k < f.cfg.K; ++k) {
        if (w.block(n, k, Stream::priv).squaredNorm() > f.cfg.prune_eps) want += r.Rp[k];
        if (w.block(n, k, Stream::common).squaredNorm() > f.cfg.prune_eps) want += r.Rc[k];
      }
      CHECK(load[n] == Catch::Approx(want));
    }
  }
  SECTION("load with prune_eps -> 0 upper-bounds any positive threshold") {
    BeamformerSet w = f.random_beams(94, 1e-3);
    RateAllocation r(f.cfg.K);
    r.Rp.setConstant(2.0);
    r.Rc.setConstant(1.0);
    const auto tight = fronthaul_load(w, r, 1e-300);
    const auto loose = fronthaul_load(w, r, 1e-4);
    for (int n = 0; n < f.cfg.N; ++n) CHECK(tight[n] >= loose[n]);
  }
}

TEST_CASE("energy efficiency arithmetic", "[model]") {
  RateAllocation r(2);
  r.Rp << 4.0, 4.0;
  r.Rc << 1.0, 1.0;
  PowerBreakdown p;
  p.transmit = 8.0;
  p.circ_fixed = 10.0;
  p.fronthaul = 2.0;
  CHECK(energy_efficiency(r, p) == Catch::Approx(0.5));
  RateAllocation r2 = r;
  r2.Rp *= 2.0;
  r2.Rc *= 2.0;
  CHECK(energy_efficiency(r2, p) == Catch::Approx(1.0));
  // compositional check against the component formulas
  Fixture f(111);
  const BeamformerSet w = f.random_beams(112);
  RateAllocation rr(f.cfg.K);
  rr.Rp.setConstant(3.0);
  const auto pb = power_breakdown(w, rr, f.cfg, f.cfg.prune_eps, f.cfg.R);
  const double want =
      rr.total() / (w.total_power() + f.cfg.p_fixed_watt(f.cfg.R) + pb.fronthaul);
  CHECK(energy_efficiency(rr, pb) == Catch::Approx(want));
}

TEST_CASE("feasibility audit flags each violated constraint", "[model]") {
  Fixture f(121);
  const CmdSets S = CmdSets::tin(f.cfg.K);
  const auto alloc = allocate_fronthaul(60.0, f.cfg);
  SECTION("textbook feasible point passes") {
    BeamformerSet w(f.cfg.N, f.cfg.L, f.cfg.K);  // zero beams
    RateAllocation r(f.cfg.K);                   // zero rates, but QoS fails then
    // give every user a huge private SINR via direct channel beams
    for (int k = 0; k < f.cfg.K; ++k) {
      w.wp[k] = f.ch.h_agg[k].normalized() * 0.3;
    }
    const auto rates = achievable_rates(w, f.v, S, f.ch, f.cfg.noise_power_watt(),
                                        f.cfg.bandwidth_mhz());
    if ((rates.Rp.array() >= f.cfg.r_min).all()) {
      const auto rep = check_feasibility(w, f.v, rates, S, f.ch, alloc, f.cfg);
      CHECK(rep.overall());
      CHECK(rep.describe() == "feasible");
    }
  }
  SECTION("QoS shortfall is reported with its magnitude") {
    BeamformerSet w(f.cfg.N, f.cfg.L, f.cfg.K);
    RateAllocation r(f.cfg.K);
    r.Rp.setConstant(f.cfg.r_min - 0.5);
    const auto rep = check_feasibility(w, f.v, r, S, f.ch, alloc, f.cfg);
    CHECK_FALSE(rep.qos_ok);
    CHECK(rep.qos_violation == Catch::Approx(0.5));
  }
  SECTION("per-BS power above 35 dBm is flagged") {
    BeamformerSet w(f.cfg.N, f.cfg.L, f.cfg.K);
    w.wp[0].segment(0, f.cfg.L).setConstant(cplx(2.0, 0.0));  // 8 W > 3.16 W at BS 0
    RateAllocation r(f.cfg.K);
    r.Rp.setConstant(f.cfg.r_min);
    const auto rep = check_feasibility(w, f.v, r, S, f.ch, alloc, f.cfg);
    CHECK_FALSE(rep.power_ok);
    CHECK(rep.power_violation > 0.0);
  }
  SECTION("allocated rates above achievable are flagged") {
    BeamformerSet w(f.cfg.N, f.cfg.L, f.cfg.K);
    RateAllocation r(f.cfg.K);
    r.Rp.setConstant(50.0);  // zero beams cannot carry this
    const auto rep = check_feasibility(w, f.v, r, S, f.ch, alloc, f.cfg);
    CHECK_FALSE(rep.private_rate_ok);
  }
  SECTION("non-unit phase entries are flagged") {
    PhaseShiftVector bad = f.v;
    bad.v[0] *= 1.5;
    BeamformerSet w(f.cfg.N, f.cfg.L, f.cfg.K);
    RateAllocation r = achievable_rates(w, bad, S, f.ch, f.cfg.noise_power_watt(),
                                        f.cfg.bandwidth_mhz());
    const auto rep = check_feasibility(w, bad, r, S, f.ch, alloc, f.cfg);
    CHECK_FALSE(rep.unit_modulus_ok);
  }
}

TEST_CASE("cmd set bookkeeping invariants", "[model]") {
  CmdSets S = CmdSets::self_only(4);
  S.add_member(2, 1);  // user 2 decodes s_1^c
  S.pi[2] = {1, 2};
  S.validate(4);
  CHECK(S.in_M(2, 1));
  CHECK(S.in_Phi(1, 2));
  CHECK(S.omega(2, 1) == std::vector<int>{2});
  CHECK(S.omega(2, 2).empty());
  const auto bar = S.phi_bar(2);
  CHECK(bar == std::vector<int>{0, 3});
  // duality break detection
  CmdSets broken = S;
  broken.M[3] = {0};
  CHECK_THROWS_AS(broken.validate(4), std::logic_error);
}
