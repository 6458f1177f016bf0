#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "fdsic/ofdm_phy.hpp"
#include "oracles.hpp"

using namespace fdsic;

namespace {

ComplexGrid random_grid(int k, int n, Rng& rng) {
  ComplexGrid g(k, n);
  std::normal_distribution<double> d;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = {d(rng), d(rng)};
  return g;
}

Bits random_bits(std::size_t n, Rng& rng) {
  Bits b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng() & 1u);
  return b;
}

}  // namespace

TEST_CASE("table I timing gives 16-sample CP, 80-sample symbols, 160-sample LP") {
  const FrameSpec spec = FrameSpec::from_timing(FrameTiming{}, 0, 100);
  CHECK(spec.cp_len == 16);
  CHECK(spec.samples_per_symbol() == 80);
  CHECK(spec.lp_slot_len() == 160);
  CHECK(spec.sp_len == 80);
  CHECK(spec == FrameSpec::wifi(0, 100));
}

TEST_CASE("wifi layouts") {
  const FrameSpec f = FrameSpec::wifi(0, 10);
  CHECK(f.data_bins().size() == 52);
  CHECK(f.pilot_bins(NodeId::A).empty());
  CHECK(f.subcarrier_map[0] == SubcarrierRole::Null);

  const FrameSpec l = FrameSpec::wifi(8, 10);
  CHECK(l.data_bins().size() == 44);
  const auto pa = l.pilot_bins(NodeId::A);
  const auto pb = l.pilot_bins(NodeId::B);
  REQUIRE(pa.size() == 4);
  REQUIRE(pb.size() == 4);
  std::set<int> logical;
  for (int b : pa) logical.insert(l.logical_index(b));
  for (int b : pb) logical.insert(l.logical_index(b));
  CHECK(logical == std::set<int>{-26, -21, -14, -7, 7, 14, 21, 26});
  CHECK(l.active_bins().size() == 52);
  CHECK_THROWS_AS(FrameSpec::wifi(4, 10), Error);
}

TEST_CASE("unitary FFT matches the direct DFT") {
  Rng rng(3);
  for (int n : {8, 16, 64}) {
    const auto x = oracle::gaussian(static_cast<std::size_t>(n), rng);
    const ComplexVector fast = fft_unitary(x);
    const auto slow = oracle::dft(x);
    const ComplexVector back = ifft_unitary(fast);
    for (int k = 0; k < n; ++k) {
      CHECK(std::abs(fast[k] - slow[k]) < 1e-12);
      CHECK(std::abs(back[k] - x[k]) < 1e-12);
    }
  }
}

TEST_CASE("modulate_ofdm: zero grid, impulse, Parseval, round trip") {
  FrameSpec spec = FrameSpec::wifi(0, 3);
  Rng rng(5);

  const ComplexVector zeros = modulate_ofdm(ComplexGrid(64, 3), spec);
  CHECK(zeros.size() == 3u * 80u);
  CHECK(std::all_of(zeros.begin(), zeros.end(), [](Complex c) { return c == Complex{}; }));

  ComplexGrid impulse(64, 1);
  impulse(5, 0) = 1.0;
  spec.n_symbols = 1;
  const ComplexVector tone = modulate_ofdm(impulse, spec);
  for (int t = 16; t < 80; ++t) CHECK(std::abs(std::abs(tone[t]) - 0.125) < 1e-12);

  spec.n_symbols = 4;
  const ComplexGrid g = random_grid(64, 4, rng);
  const ComplexVector x = modulate_ofdm(g, spec);
  for (int n = 0; n < 4; ++n) {
    double ef = 0.0, et = 0.0;
    for (int k = 0; k < 64; ++k) ef += std::norm(g(k, n));
    for (int t = 16; t < 80; ++t) et += std::norm(x[n * 80 + t]);
    CHECK(std::abs(et / ef - 1.0) < 1e-10);
  }
  const ComplexGrid back = demodulate_ofdm(x, spec);
  CHECK((back.values() - g.values()).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(modulate_ofdm(ComplexGrid(32, 4), spec), Error);
  CHECK_THROWS_AS(demodulate_ofdm(ComplexVector(81), spec), Error);
  const ComplexGrid z = demodulate_ofdm(ComplexVector(320), spec);
  CHECK(z.values().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("delay inside the cyclic prefix becomes a per-bin phase ramp") {
  FrameSpec spec = FrameSpec::wifi(0, 1);
  Rng rng(11);
  const ComplexGrid g = random_grid(64, 1, rng);
  const ComplexVector x = modulate_ofdm(g, spec);
  for (int d : {1, 7, 16}) {
    ComplexVector delayed(x.size());
    for (std::size_t t = static_cast<std::size_t>(d); t < x.size(); ++t) delayed[t] = x[t - d];
    const ComplexGrid r = demodulate_ofdm(delayed, spec);
    for (int k = 0; k < 64; ++k) {
      const Complex expected = g(k, 0) * std::polar(1.0, -2.0 * std::numbers::pi * k * d / 64.0);
      CHECK(std::abs(r(k, 0) - expected) < 1e-12);
    }
  }
}

TEST_CASE("frame length matches the layout formula for random specs") {
  Rng rng(17);
  std::uniform_int_distribution<int> cp(0, 32), nsym(1, 40), lp(1, 4), sp(0, 60);
  for (int i = 0; i < 200; ++i) {
    FrameSpec spec = FrameSpec::wifi(i % 2 ? 8 : 0, nsym(rng),
                                     i % 3 ? PreambleMode::Nonoverlapped : PreambleMode::Overlapped);
    spec.cp_len = cp(rng);
    spec.lp_symbols = lp(rng);
    spec.sp_len = 2 * sp(rng);
    spec.validate();
    const int sym = spec.cp_len + spec.n_fft;
    const int slots = spec.preamble_mode == PreambleMode::Nonoverlapped ? 2 : 1;
    const int expected = spec.sp_len + slots * spec.lp_symbols * sym + spec.n_symbols * sym;
    CHECK(spec.frame_len() == expected);

    const int qam = 4;
    const NodeFrame f = build_frame(random_bits(static_cast<std::size_t>(payload_bit_count(spec, qam)), rng),
                                    spec, NodeId::B, qam);
    CHECK(static_cast<int>(f.time_samples.size()) == expected);
  }
}

TEST_CASE("build_frame: constant payload, silent slots, reference grid") {
  const FrameSpec spec = FrameSpec::wifi(8, 6);
  const Bits zeros(static_cast<std::size_t>(payload_bit_count(spec, 4)), 0);
  CHECK(zeros.size() == 44u * 6u * 2u);
  const NodeFrame a = build_frame(zeros, spec, NodeId::A);
  const Complex s00 = map_bits(Bits{0, 0}, 4)[0];
  for (int k : spec.data_bins())
    for (int n = 0; n < spec.n_symbols; ++n) CHECK(std::abs(a.ref_grid.data(k, n) - s00) < 1e-15);

  // Nulls and the other node's pilots carry nothing.
  const ComplexGrid pa = pilot_grid(spec, NodeId::A);
  for (int k = 0; k < 64; ++k) {
    const auto role = spec.subcarrier_map[static_cast<std::size_t>(k)];
    if (role == SubcarrierRole::Null || role == SubcarrierRole::PilotB)
      for (int n = 0; n < spec.n_symbols; ++n) CHECK(a.ref_grid.data(k, n) == Complex{});
    if (role == SubcarrierRole::PilotA)
      for (int n = 0; n < spec.n_symbols; ++n) CHECK(a.ref_grid.data(k, n) == pa(k, n));
  }

  // Node A is silent in node B's LP slot and vice versa.
  const NodeFrame b = build_frame(zeros, spec, NodeId::B);
  const int off_b = spec.lp_slot_offset(NodeId::B);
  const int off_a = spec.lp_slot_offset(NodeId::A);
  for (int t = 0; t < spec.lp_slot_len(); ++t) {
    CHECK(a.time_samples[off_b + t] == Complex{});
    CHECK(b.time_samples[off_a + t] == Complex{});
  }
  CHECK(off_a + spec.lp_slot_len() <= off_b);

  // Demodulating the clean frame reproduces the reference grids.
  const FrameGrids g = demodulate_frame(a.time_samples, spec);
  CHECK((g.data.values() - a.ref_grid.data.values()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.lp_a.values() - a.ref_grid.lp_a.values()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(g.lp_b.values().cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(build_frame(Bits(10, 0), spec, NodeId::A), Error);
  CHECK_THROWS_AS(build_frame(zeros, spec, static_cast<NodeId>(7)), Error);
}

TEST_CASE("overlapped mode shares one LP slot") {
  const FrameSpec spec = FrameSpec::wifi(0, 2, PreambleMode::Overlapped);
  CHECK(spec.lp_region_len() == spec.lp_slot_len());
  CHECK(spec.lp_slot_offset(NodeId::A) == spec.lp_slot_offset(NodeId::B));
  const Bits bits(static_cast<std::size_t>(payload_bit_count(spec, 4)), 1);
  const NodeFrame a = build_frame(bits, spec, NodeId::A);
  const NodeFrame b = build_frame(bits, spec, NodeId::B);
  int both = 0;
  for (int t = 0; t < spec.lp_slot_len(); ++t) {
    const int i = spec.lp_slot_offset(NodeId::A) + t;
    both += std::abs(a.time_samples[i]) > 0 && std::abs(b.time_samples[i]) > 0;
  }
  CHECK(both > spec.lp_slot_len() / 2);
  CHECK(a.ref_grid.lp_b.empty());
}

TEST_CASE("training sequences are constant modulus and rotate by j") {
  const FrameSpec spec = FrameSpec::wifi(8, 2);
  for (NodeId node : {NodeId::A, NodeId::B}) {
    const ComplexGrid t = training_grid(spec, node);
    for (int k : spec.active_bins()) {
      CHECK(std::abs(std::abs(t(k, 0)) - 1.0) < 1e-12);
      CHECK(std::abs(t(k, 1) - Complex(0, 1) * t(k, 0)) < 1e-12);
    }
    CHECK(t(0, 0) == Complex{});
  }
}

TEST_CASE("QAM mapping") {
  const Bits b{0, 0, 0, 1, 1, 1, 1, 0};
  const ComplexVector s = map_bits(b, 4);
  REQUIRE(s.size() == 4);
  std::set<std::pair<int, int>> quadrants;
  for (const Complex& c : s) {
    CHECK(std::abs(std::abs(c) - 1.0) < 1e-12);
    quadrants.insert({c.real() > 0, c.imag() > 0});
  }
  CHECK(quadrants.size() == 4);
  // Gray: neighbours 00-01 and 00-10 differ in one quadrant coordinate.
  CHECK(std::abs(s[0] - s[1]) == doctest::Approx(std::sqrt(2.0)));
  CHECK(std::abs(s[0] - s[3]) == doctest::Approx(std::sqrt(2.0)));

  Rng rng(23);
  for (int m : {4, 16, 64}) {
    const Bits bits = random_bits(static_cast<std::size_t>(bits_per_qam_symbol(m)) * 2000, rng);
    const ComplexVector sym = map_bits(bits, m);
    double e = 0.0;
    for (const Complex& c : sym) e += std::norm(c);
    CHECK(e / sym.size() == doctest::Approx(1.0).epsilon(0.05));
    CHECK(demap_symbols(sym, m) == bits);
  }
  CHECK_THROWS_AS(map_bits(Bits(8, 0), 8), Error);
  CHECK_THROWS_AS(map_bits(Bits(3, 0), 4), Error);
}

TEST_CASE("QPSK BER at Es/N0 = 10 dB follows Q(sqrt(10))") {
  Rng rng(29);
  const std::size_t n_sym = 400000;
  const Bits bits = random_bits(2 * n_sym, rng);
  ComplexVector s = map_bits(bits, 4);
  std::normal_distribution<double> g(0.0, std::sqrt(0.1 / 2.0));
  for (auto& c : s) c += Complex{g(rng), g(rng)};
  const Bits hat = demap_symbols(s, 4);
  std::size_t err = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) err += hat[i] != bits[i];
  const double ber = static_cast<double>(err) / bits.size();
  const double p = oracle::qfunc(std::sqrt(10.0));
  CHECK(std::abs(ber - p) < 3.0 * oracle::rate_sigma(p, static_cast<double>(bits.size())));
}
