#include <doctest.h>

#include <cmath>
#include <random>

#include "fdsic/bss_sic.hpp"
#include "fdsic/ls_sic.hpp"
#include "oracles.hpp"
#include "scenario.hpp"

using namespace fdsic;
using scenario::make_link;
using scenario::linear;

namespace {

Eigen::Matrix2Xd lift_pair(const ComplexVector& s) {
  Eigen::Matrix2Xd y(2, static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    y(0, static_cast<Eigen::Index>(i)) = s[i].real();
    y(1, static_cast<Eigen::Index>(i)) = s[i].imag();
  }
  return y;
}

ComplexVector qpsk(std::size_t n, Rng& rng) {
  ComplexVector s(n);
  const double a = 1.0 / std::sqrt(2.0);
  for (auto& v : s) v = {(rng() & 1u) ? a : -a, (rng() & 1u) ? a : -a};
  return s;
}

}  // namespace

TEST_CASE("lifting: worked example and the real form of complex products") {
  const ComplexVector x1(4, {1.0, 2.0}), x2(4, {3.0, -4.0});
  const RealDataMatrix x = lift_to_real(x1, x2);
  CHECK(x.values().col(0).isApprox(Eigen::Vector4d(1, 2, 3, -4)));

  Rng rng(11);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const auto v = oracle::gaussian(4, rng);
    const Complex a1 = v[0], a2 = v[1], s1 = v[2], s2 = v[3];
    const Complex y = a1 * s1 + a2 * s2;
    const Eigen::Vector4d s(s1.real(), s1.imag(), s2.real(), s2.imag());
    const Eigen::Vector4d lifted = lifted_mixing(a1, a2) * s;
    worst = std::max({worst, std::abs(lifted(0) - s1.real()), std::abs(lifted(1) - s1.imag()),
                      std::abs(lifted(2) - y.real()), std::abs(lifted(3) - y.imag())});
    const Eigen::Vector2d prod = complex_as_real(a1) * Eigen::Vector2d(s1.real(), s1.imag());
    worst = std::max({worst, std::abs(prod(0) - (a1 * s1).real()), std::abs(prod(1) - (a1 * s1).imag())});
  }
  CHECK(worst <= 1e-12);
  CHECK_THROWS_AS(lift_to_real(ComplexVector(5), ComplexVector(4)), Error);
}

TEST_CASE("lifting: mixing matrix of alpha1 = 1, alpha2 = j") {
  const Eigen::Matrix4d a = lifted_mixing(1.0, Complex(0.0, 1.0));
  Eigen::Matrix4d expect;
  expect << 1, 0, 0, 0,  //
      0, 1, 0, 0,        //
      1, 0, 0, -1,       //
      0, 1, 1, 0;
  CHECK(a == expect);
}

TEST_CASE("ambiguity: noiseless fits") {
  const ComplexVector t{{0.6, -0.8}, {0.8, 0.6}};
  AmbiguityEstimate est = estimate_ambiguity(2.0 * lift_pair(t), t);
  CHECK(est.g.isApprox(2.0 * Eigen::Matrix2d::Identity(), 1e-12));
  CHECK(est.condition_number == doctest::Approx(1.0));
  CHECK(est.accepted());

  const Complex g(1.0, 0.5);
  est = estimate_ambiguity(complex_as_real(g) * lift_pair(t), t);
  CHECK(std::abs(est.as_complex() - g) < 1e-12);
  CHECK(est.complexness < 1e-12);

  Eigen::Matrix2d general;
  general << 1.0, 0.3, -0.2, 0.5;
  est = estimate_ambiguity(general * lift_pair(t), t);
  CHECK(est.g.isApprox(general, 1e-12));
  CHECK(est.complexness > 0.1);

  est = estimate_ambiguity(Eigen::Matrix2Xd::Ones(2, 2), ComplexVector{{1.0, 1.0}, {2.0, 2.0}});
  CHECK(std::isinf(est.condition_number));
  CHECK_FALSE(est.accepted());
  CHECK_THROWS_AS(estimate_ambiguity(Eigen::Matrix2Xd::Ones(2, 3), t), Error);
}

TEST_CASE("ambiguity: entry spread under AWGN matches sigma / sqrt(L |T|^2)") {
  // Complex noise of variance s2 puts s2/2 on each real component; with the
  // orthogonal pair T, jT the LS entry error has that same variance over L = 2.
  const ComplexVector t{{0.6, -0.8}, {-0.8, -0.6}};
  const double s2 = 0.01;
  Rng rng(5);
  const int trials = 1000;
  Eigen::Matrix2d sum = Eigen::Matrix2d::Zero(), sq = Eigen::Matrix2d::Zero();
  for (int i = 0; i < trials; ++i) {
    const auto n = oracle::gaussian(2, rng, s2);
    const Eigen::Matrix2Xd y = lift_pair(t) + lift_pair(ComplexVector(n.begin(), n.end()));
    const Eigen::Matrix2d e = estimate_ambiguity(y, t).g - Eigen::Matrix2d::Identity();
    sum += e;
    sq += e.cwiseProduct(e);
  }
  const double expect = std::sqrt(s2 / 2.0);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      const double mean = sum(r, c) / trials;
      const double sd = std::sqrt(sq(r, c) / trials - mean * mean);
      CHECK(std::abs(sd / expect - 1.0) < 3.0 / std::sqrt(2.0 * trials));
      CHECK(std::abs(mean) < 3.0 * expect / std::sqrt(trials));
    }
}

TEST_CASE("resolve: order, sign and SI-leak rejection") {
  Rng rng(3);
  const std::size_t m = 300;
  const auto si = oracle::gaussian(m, rng);
  const ComplexVector x1(si.begin(), si.end());
  ComplexVector s = qpsk(m, rng);
  const ComplexVector t{{0.6, -0.8}, {0.8, 0.6}};
  const std::vector<int> lp{static_cast<int>(m) - 2, static_cast<int>(m) - 1};
  s[m - 2] = t[0];
  s[m - 1] = t[1];
  const Eigen::Matrix2Xd truth = lift_pair(s);

  const ResolvedComponents direct = resolve_components(truth, x1, lp, t);
  REQUIRE(direct.ok);
  CHECK(direct.order == std::vector<int>{0, 1});
  CHECK(direct.ambiguity.g.isApprox(Eigen::Matrix2d::Identity(), 1e-12));

  Eigen::MatrixXd mixed(3, static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) mixed(0, static_cast<Eigen::Index>(i)) = si[i].real();
  mixed.row(1) = -truth.row(1);
  mixed.row(2) = 2.5 * truth.row(0);
  const ResolvedComponents swapped = resolve_components(mixed, x1, lp, t);
  REQUIRE(swapped.ok);
  CHECK(swapped.si_leak[0] == doctest::Approx(1.0));
  CHECK(std::find(swapped.order.begin(), swapped.order.end(), 0) == swapped.order.end());
  const Eigen::Matrix2Xd s_hat = swapped.ambiguity.g.inverse() * swapped.y;
  CHECK((s_hat - truth).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(swapped.ambiguity.g(0, 0) > 0.0);
  CHECK(swapped.ambiguity.g(1, 1) > 0.0);

  const ResolvedComponents only_si = resolve_components(mixed.topRows(1), x1, lp, t);
  CHECK_FALSE(only_si.ok);
  CHECK_FALSE(only_si.note.empty());
  CHECK_THROWS_AS(resolve_components(truth.leftCols(10), x1, lp, t), Error);
}

TEST_CASE("fica_sic: noiseless separation per subcarrier") {
  Rng rng(21);
  for (bool multipath : {false, true}) {
    const FrameSpec spec = FrameSpec::wifi(0, 100);
    const ChannelRealization chan =
        multipath ? draw_channel({ChannelModel::Multipath, 4, 3.0}, spec, rng)
                  : ChannelRealization::flat(scenario::unit_phase(rng), scenario::unit_phase(rng), 64);
    const auto link = make_link(spec, chan, linear(0.0, -5.0), 7);
    const SicResult r = fica_sic(link.tx.x1, link.tx.x2, spec);
    CHECK(r.method == SicMethod::Fica);
    REQUIRE(r.bins.size() == 52);
    int good = 0;
    for (std::size_t i = 0; i < r.bins.size(); ++i) {
      const int bin = r.bins[i];
      const auto hat = r.soi_grid.row(bin), truth = link.soi.ref_grid.data.row(bin);
      const double c = oracle::corr({hat.begin(), hat.end()}, {truth.begin(), truth.end()});
      good += c >= 0.999 && r.diag[i].status == SubcarrierStatus::Ok;
    }
    CHECK(good == 52);
  }
}

TEST_CASE("fica_sic: absent SOI yields no spurious output") {
  const FrameSpec spec = FrameSpec::wifi(0, 50);
  Rng rng(4);
  const auto si = build_frame(scenario::random_bits(static_cast<std::size_t>(payload_bit_count(spec, 4)), rng),
                              spec, NodeId::A);
  const auto soi = silent_frame(spec, NodeId::B);
  const auto tx = transmit_through(si, soi, ChannelRealization::flat(0.8, 1.0, 64), linear(0.0), spec);
  const SicResult r = fica_sic(tx.x1, tx.x2, spec);
  CHECK(r.count(SubcarrierStatus::Ok) == 0);
  CHECK(r.soi_grid.values().cwiseAbs().maxCoeff() == 0.0);

  FicaSicOptions strict;
  strict.fallback_to_ls = false;
  CHECK_THROWS_AS(fica_sic(tx.x1, tx.x2, spec, strict), Error);
}

TEST_CASE("fica_sic: output is invariant to a common scaling of the observations") {
  const FrameSpec spec = FrameSpec::wifi(0, 100);
  const auto link = make_link(spec, ChannelRealization::flat({0.3, -0.9}, {0.7, 0.2}, 64), linear(0.01, -5.0, 9), 8);
  FrameGrids x1 = link.tx.x1, x2 = link.tx.x2;
  for (FrameGrids* g : {&x1, &x2})
    for (ComplexGrid* grid : {&g->lp_a, &g->lp_b, &g->data}) grid->values() *= 3.7;
  const SicResult a = fica_sic(link.tx.x1, link.tx.x2, spec);
  const SicResult b = fica_sic(x1, x2, spec);
  for (std::size_t i = 0; i < a.diag.size(); ++i) CHECK(a.diag[i].status == b.diag[i].status);
  CHECK((a.soi_grid.values() - b.soi_grid.values()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("fica_sic: each subcarrier is processed on its own") {
  const FrameSpec spec = FrameSpec::wifi(0, 50);
  Rng rng(12);
  const auto link = make_link(spec, draw_channel({ChannelModel::Multipath, 4, 3.0}, spec, rng),
                              linear(0.01, -5.0, 3), 13);
  const SicResult whole = fica_sic(link.tx.x1, link.tx.x2, spec);
  // The only frame-level input is the pooled noise floor.
  const double noise = estimate_noise_power(link.tx.x1, link.tx.x2, spec.data_bins(), spec);
  const LsChannelEstimate ls = ls_initial_estimate(link.tx.x1, link.tx.x2, spec);
  int checked = 0;
  for (std::size_t i = 0; i < whole.bins.size(); i += 7) {
    if (whole.diag[i].status != SubcarrierStatus::Ok) continue;
    const double floor = noise / std::norm(ls.alpha2_hat[static_cast<std::size_t>(whole.bins[i])]);
    const SeparationOutcome one = fica_separate(link.tx.x1, link.tx.x2, {whole.bins[i]}, spec, {}, floor);
    REQUIRE(one.ok);
    for (int n = 0; n < spec.n_symbols; ++n)
      CHECK(one.soi[0][static_cast<std::size_t>(n)] == whole.soi_grid(whole.bins[i], n));
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("fica_sic: failed bins take the LS estimate") {
  const FrameSpec spec = FrameSpec::wifi(0, 10);
  const auto link = make_link(spec, ChannelRealization::flat(1.0, {0.0, 0.5}, 64), linear(0.05, 0.0, 2), 5);
  FicaSicOptions opts;
  opts.max_condition = 1.0;  // nothing passes
  const SicResult r = fica_sic(link.tx.x1, link.tx.x2, spec, opts);
  const SicResult ls = ls_sic(link.tx.x1, link.tx.x2, spec);
  CHECK(r.count(SubcarrierStatus::FallbackLs) == 52);
  CHECK(r.soi_grid.values() == ls.soi_grid.values());
  for (const auto& d : r.diag) CHECK_FALSE(d.note.empty());
}

TEST_CASE("noise floor estimate from the LP residuals") {
  const FrameSpec spec = FrameSpec::wifi(0, 4);
  const double s2 = 0.02;
  double acc = 0.0;
  const int frames = 20;
  for (int f = 0; f < frames; ++f) {
    const auto link = make_link(spec, ChannelRealization::flat({0.6, 0.6}, {-0.3, 0.9}, 64),
                                linear(s2, 0.0, 100 + f), 200 + f);
    acc += estimate_noise_power(link.tx.x1, link.tx.x2, spec.data_bins(), spec);
  }
  // 20 frames x 52 bins x 2 slots x 1 complex dof.
  CHECK(std::abs(acc / frames / s2 - 1.0) < 3.0 / std::sqrt(2080.0));

  const auto clean = make_link(spec, ChannelRealization::flat(1.0, 1.0, 64), linear(0.0), 1);
  CHECK(estimate_noise_power(clean.tx.x1, clean.tx.x2, spec.data_bins(), spec) < 1e-20);
}

TEST_CASE("fica_sic: contract errors") {
  const FrameSpec over = FrameSpec::wifi(0, 10, PreambleMode::Overlapped);
  const auto link = make_link(over, ChannelRealization::flat(1.0, 1.0, 64), linear(0.0), 1);
  CHECK_THROWS_AS(fica_sic(link.tx.x1, link.tx.x2, over), Error);
  CHECK_THROWS_AS(fica_separate(link.tx.x1, link.tx.x2, {1}, over), Error);

  const FrameSpec spec = FrameSpec::wifi(0, 10);
  const auto ok = make_link(spec, ChannelRealization::flat(1.0, 1.0, 64), linear(0.0), 1);
  CHECK_THROWS_AS(fica_sic(ok.tx.x1, ok.tx.x2, FrameSpec::wifi(0, 12)), Error);
  CHECK_THROWS_AS(fica_separate(ok.tx.x1, ok.tx.x2, {}, spec), Error);
}
