#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <stdexcept>
#include <vector>

#include "bfc/eventsim.hpp"
#include "bfc/qkd.hpp"
#include "bfc/rng.hpp"
#include "doctest.h"

using bfc::core::CombParams;
using bfc::core::DetectorParams;
using bfc::core::FilterMode;
using bfc::sim::Channel;
using bfc::sim::EventStream;
using bfc::sim::LinkParams;
using bfc::sim::SourceParams;

namespace {

CombParams nominal_comb() {
  CombParams comb;
  comb.fsr_hz = 45.32e9;
  comb.linewidth_fwhm_hz = 1.56e9;
  comb.phase_matching_fwhm_hz = 245e9;
  comb.n_lines = 5;
  comb.center_wavelength_nm = 1316.0;
  comb.filter_mode = FilterMode::SinglyFiltered;
  return comb;
}

EventStream stream_of(std::vector<double> times) {
  EventStream stream;
  for (double t : times) stream.records.push_back({t, Channel::SignalA, bfc::sim::kUnknownId});
  return stream;
}

struct MatchedStreams {
  EventStream signal;
  EventStream idler;
};

MatchedStreams nominal_pair_streams(double duration_s, std::uint64_t seed) {
  SourceParams src;
  src.pair_rate_hz = 2e6;
  src.duration_s = duration_s;
  src.seed = seed;
  DetectorParams det{15.27e-12, 0.9, 0.0};
  const auto stream =
      bfc::sim::generate_pairs(nominal_comb(), src, det, det, LinkParams{});
  return {bfc::sim::channel_subset(stream, Channel::SignalA),
          bfc::sim::channel_subset(stream, Channel::IdlerB)};
}

double agreement(const bfc::qkd::TimeBinSymbols& syms) {
  std::size_t hits = 0;
  for (std::size_t k = 0; k < syms.size(); ++k) {
    if (syms.frame_a[k] == syms.frame_b[k] && syms.symbol_a[k] == syms.symbol_b[k]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(syms.size());
}

}  // namespace

TEST_CASE("discretize: identical streams agree exactly") {
  const auto [signal, idler] = nominal_pair_streams(2e-3, 91u);
  const auto syms = bfc::qkd::discretize(signal, signal, 40e-9, 16, 2e-9);
  REQUIRE(syms.size() == signal.records.size());
  CHECK(agreement(syms) == 1.0);
  for (std::size_t k = 0; k < syms.size(); ++k) {
    REQUIRE(syms.symbol_a[k] >= 0);
    REQUIRE(syms.symbol_a[k] < 16);
  }
}

TEST_CASE("discretize: symbol arithmetic on crafted timestamps") {
  // bin 1 ns, frame 4 bins: t = 6.2 ns -> abs bin 6 -> frame 1, symbol 2.
  const auto a = stream_of({6.2e-9});
  const auto b = stream_of({6.4e-9});
  const auto syms = bfc::qkd::discretize(a, b, 1e-9, 4, 2e-9);
  REQUIRE(syms.size() == 1);
  CHECK(syms.frame_a[0] == 1);
  CHECK(syms.symbol_a[0] == 2);
  CHECK(syms.frame_b[0] == 1);
  CHECK(syms.symbol_b[0] == 2);

  // Negative timestamps keep symbols in [0, F) via the Euclidean mod.
  const auto neg_a = stream_of({-6.5e-9});
  const auto neg_b = stream_of({-6.4e-9});
  const auto neg = bfc::qkd::discretize(neg_a, neg_b, 1e-9, 4, 2e-9);
  REQUIRE(neg.size() == 1);
  CHECK(neg.symbol_a[0] == 1);  // abs bin -7 -> frame -2, symbol 1
  CHECK(neg.frame_a[0] == -2);
}

TEST_CASE("discretize: no coincidences and argument guards") {
  const auto a = stream_of({1.0});
  const auto b = stream_of({2.0});
  CHECK_THROWS_AS(bfc::qkd::discretize(a, b, 40e-9, 16, 2e-9), bfc::qkd::NoCoincidences);
  CHECK_THROWS_AS(bfc::qkd::discretize(a, a, 0.0, 16, 2e-9), std::invalid_argument);
  CHECK_THROWS_AS(bfc::qkd::discretize(a, a, 40e-9, 1, 2e-9), std::invalid_argument);
  CHECK_THROWS_AS(bfc::qkd::discretize(a, a, 40e-9, 16, 0.0), std::invalid_argument);
}

TEST_CASE("discretize: agreement matches the bin-straddling prediction") {
  const auto [signal, idler] = nominal_pair_streams(1e-2, 2026u);
  const double bin = 40e-9;
  const auto syms = bfc::qkd::discretize(signal, idler, bin, 16, 2e-9);
  REQUIRE(syms.size() > 10000);

  const double measured = agreement(syms);
  CHECK(measured > 0.99);

  // A matched pair lands in different bins exactly when a bin boundary falls
  // between the two timestamps; with Poisson arrivals the boundary phase is
  // uniform, so P(disagree) = E[min(|dt|, bin)] / bin over the matched pairs.
  std::size_t i = 0, j = 0;
  double sum_frac = 0.0;
  std::size_t n = 0;
  while (i < signal.records.size() && j < idler.records.size()) {
    const double dt = idler.records[j].timestamp_s - signal.records[i].timestamp_s;
    if (dt < -1e-9) {
      ++j;
    } else if (dt > 1e-9) {
      ++i;
    } else {
      sum_frac += std::min(std::abs(dt), bin) / bin;
      ++n;
      ++i;
      ++j;
    }
  }
  REQUIRE(n == syms.size());
  const double predicted_disagree = sum_frac / static_cast<double>(n);
  const double sigma =
      std::sqrt(predicted_disagree / static_cast<double>(n));  // binomial, p small
  CHECK(std::abs((1.0 - measured) - predicted_disagree) < 5.0 * sigma + 1e-4);
}

TEST_CASE("discretize: agreement degrades monotonically as bins shrink below the delay spread") {
  const auto [signal, idler] = nominal_pair_streams(5e-3, 515u);
  double last = 1.1;
  for (double bin : {40e-9, 100e-12, 30e-12, 10e-12}) {
    const auto syms = bfc::qkd::discretize(signal, idler, bin, 16, 2e-9);
    const double a = agreement(syms);
    CAPTURE(bin);
    CHECK(a < last);
    last = a;
  }
  CHECK(last < 0.2);
}

TEST_CASE("plug-in mutual information: exact corner cases") {
  std::vector<int> a, b;
  for (int rep = 0; rep < 100; ++rep) {
    for (int s = 0; s < 16; ++s) {
      a.push_back(s);
      b.push_back(s);
    }
  }
  CHECK(bfc::qkd::pie_shannon(a, b) == doctest::Approx(4.0).epsilon(1e-12));

  // Exactly independent empirical joint: every combination once.
  a.clear();
  b.clear();
  for (int x = 0; x < 16; ++x) {
    for (int y = 0; y < 16; ++y) {
      a.push_back(x);
      b.push_back(y);
    }
  }
  CHECK(bfc::qkd::pie_shannon(a, b) == doctest::Approx(0.0).epsilon(1e-12));

  // A deterministic permutation carries full information.
  a.clear();
  b.clear();
  for (int rep = 0; rep < 50; ++rep) {
    for (int s = 0; s < 8; ++s) {
      a.push_back(s);
      b.push_back((s * 3) % 8);
    }
  }
  CHECK(bfc::qkd::pie_shannon(a, b) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("plug-in mutual information: bounds and guards") {
  bfc::rng::Xoshiro256 gen(7u);
  std::vector<int> a, b;
  for (int k = 0; k < 4000; ++k) {
    a.push_back(static_cast<int>(gen.uniform() * 16.0));
    b.push_back(gen.uniform() < 0.7 ? a.back() : static_cast<int>(gen.uniform() * 16.0));
  }
  const double mi = bfc::qkd::pie_shannon(a, b);
  CHECK(mi >= 0.0);
  CHECK(mi <= 4.0 + 1e-12);

  std::vector<int> short_b(a.begin(), a.end() - 1);
  CHECK_THROWS_AS(bfc::qkd::pie_shannon(a, short_b), bfc::qkd::LengthMismatch);
  CHECK_THROWS_AS(bfc::qkd::pie_shannon(std::vector<int>{}, std::vector<int>{}),
                  std::invalid_argument);
  std::vector<int> neg{1, -2, 3};
  std::vector<int> pos{1, 2, 3};
  CHECK_THROWS_AS(bfc::qkd::pie_shannon(neg, pos), std::invalid_argument);
}

TEST_CASE("coarsening symbols never increases the plug-in information") {
  const auto [signal, idler] = nominal_pair_streams(5e-3, 31u);
  const auto syms = bfc::qkd::discretize(signal, idler, 30e-12, 16, 2e-9);
  REQUIRE(syms.size() > 3000);

  const double fine = bfc::qkd::pie_shannon(syms.symbol_a, syms.symbol_b);
  std::vector<int> coarse_a, coarse_b;
  for (std::size_t k = 0; k < syms.size(); ++k) {
    coarse_a.push_back(syms.symbol_a[k] / 2);
    coarse_b.push_back(syms.symbol_b[k] / 2);
  }
  const double coarse = bfc::qkd::pie_shannon(coarse_a, coarse_b);
  CHECK(coarse <= fine + 1e-9);
}

TEST_CASE("holevo surrogate: endpoints, monotonicity, clamp") {
  CHECK(bfc::qkd::holevo_bound(1.0, 16) == 0.0);
  CHECK(bfc::qkd::holevo_bound(0.0, 16) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(bfc::qkd::holevo_bound(0.5, 4) == doctest::Approx(1.0).epsilon(1e-12));
  double last = 5.0;
  for (double v : {0.0, 0.25, 0.5, 0.75, 0.9946, 1.0}) {
    const double chi = bfc::qkd::holevo_bound(v, 16);
    CHECK(chi <= last);
    CHECK(chi >= 0.0);
    CHECK(chi <= 4.0);
    last = chi;
  }
  CHECK_THROWS_AS(bfc::qkd::holevo_bound(-0.1, 16), std::invalid_argument);
  CHECK_THROWS_AS(bfc::qkd::holevo_bound(1.1, 16), std::invalid_argument);
  CHECK_THROWS_AS(bfc::qkd::holevo_bound(0.5, 1), std::invalid_argument);
}

TEST_CASE("holevo table model interpolates with flat ends") {
  bfc::qkd::HolevoModel model;
  model.table = {{0.9, 0.5}, {1.0, 0.0}};
  CHECK(model.bound(0.95, 16) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(model.bound(0.9, 16) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(model.bound(0.5, 16) == doctest::Approx(0.5).epsilon(1e-12));  // flat left
  CHECK(model.bound(1.0, 16) == 0.0);

  // Table values above log2(d) are clamped to the cap.
  bfc::qkd::HolevoModel hot;
  hot.table = {{0.0, 9.0}, {1.0, 9.0}};
  CHECK(hot.bound(0.3, 4) == doctest::Approx(2.0).epsilon(1e-12));

  // Empty table falls back to the analytic surrogate.
  bfc::qkd::HolevoModel empty;
  CHECK(empty.bound(0.25, 16) == doctest::Approx(bfc::qkd::holevo_bound(0.25, 16)).epsilon(1e-12));
}

TEST_CASE("key-rate report: the perfect-pair worked example") {
  std::vector<bfc::qkd::PairInput> pairs{{"0:0", 1000.0, 4.0, 1.0}};
  const auto report = bfc::qkd::key_rate_report(pairs, 16);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].holevo_bits == 0.0);
  CHECK(report.rows[0].raw_rate_bps == doctest::Approx(4000.0).epsilon(1e-12));
  CHECK(report.rows[0].secure_rate_bps == doctest::Approx(4000.0).epsilon(1e-12));
  CHECK(report.total.label == "TOTAL");
  CHECK(report.total.raw_rate_bps == doctest::Approx(4000.0).epsilon(1e-12));
}

TEST_CASE("key-rate report: hostile channel zeroes secure rate but not raw rate") {
  std::vector<bfc::qkd::PairInput> pairs{{"1:-1", 500.0, 0.5, 0.0}};
  const auto report = bfc::qkd::key_rate_report(pairs, 16);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].holevo_bits == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(report.rows[0].secure_pie_bits == doctest::Approx(-3.5).epsilon(1e-12));
  CHECK(report.rows[0].secure_rate_bps == 0.0);
  CHECK(report.rows[0].raw_rate_bps == doctest::Approx(250.0).epsilon(1e-12));
  CHECK(report.total.secure_rate_bps == 0.0);
  CHECK(report.total.secure_pie_bits == 0.0);  // clamped at the row level
}

TEST_CASE("key-rate report: totals are column sums and secure never exceeds raw") {
  std::vector<bfc::qkd::PairInput> pairs{
      {"-2:2", 120.0, 3.2, 0.95}, {"-1:1", 480.0, 3.9, 0.999}, {"0:0", 610.0, 4.0, 1.0},
      {"1:-1", 455.0, 3.8, 0.97}, {"2:-2", 130.0, 3.1, 0.2},
  };
  const auto report = bfc::qkd::key_rate_report(pairs, 16);
  REQUIRE(report.rows.size() == pairs.size());

  double cps = 0.0, raw = 0.0, secure = 0.0;
  for (const auto& row : report.rows) {
    CHECK(row.secure_rate_bps <= row.raw_rate_bps + 1e-12);
    CHECK(row.secure_rate_bps >= 0.0);
    cps += row.coincidence_rate_hz;
    raw += row.raw_rate_bps;
    secure += row.secure_rate_bps;
  }
  CHECK(report.total.coincidence_rate_hz == doctest::Approx(cps).epsilon(1e-12));
  CHECK(report.total.raw_rate_bps == doctest::Approx(raw).epsilon(1e-12));
  CHECK(report.total.secure_rate_bps == doctest::Approx(secure).epsilon(1e-12));
  CHECK(report.total.secure_rate_bps <= report.total.raw_rate_bps);

  std::vector<bfc::qkd::PairInput> bad{{"x", -1.0, 1.0, 0.5}};
  CHECK_THROWS_AS(bfc::qkd::key_rate_report(bad, 16), std::invalid_argument);
}
