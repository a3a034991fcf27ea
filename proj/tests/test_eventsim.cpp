#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "bfc/csv.hpp"
#include "bfc/eventsim.hpp"
#include "bfc/tagger.hpp"
#include "bfc/units.hpp"
#include "doctest.h"

using bfc::core::CombParams;
using bfc::core::DetectorParams;
using bfc::core::FilterMode;
using bfc::sim::Channel;
using bfc::sim::EventStream;
using bfc::sim::LinkParams;
using bfc::sim::SourceParams;

namespace {

CombParams nominal_comb(FilterMode mode = FilterMode::SinglyFiltered) {
  CombParams comb;
  comb.fsr_hz = 45.32e9;
  comb.linewidth_fwhm_hz = 1.56e9;
  comb.phase_matching_fwhm_hz = 245e9;
  comb.n_lines = 5;
  comb.center_wavelength_nm = 1316.0;
  comb.filter_mode = mode;
  return comb;
}

SourceParams make_source(double rate_hz, double duration_s, std::uint64_t seed) {
  SourceParams src;
  src.pair_rate_hz = rate_hz;
  src.duration_s = duration_s;
  src.seed = seed;
  return src;
}

struct TruthPair {
  std::optional<double> t_signal;
  std::optional<double> t_idler;
};

std::map<std::int64_t, TruthPair> truth_pairs(const EventStream& stream) {
  std::map<std::int64_t, TruthPair> pairs;
  for (const auto& rec : stream.records) {
    if (rec.pair_id < 0) continue;
    if (rec.channel == Channel::SignalA) pairs[rec.pair_id].t_signal = rec.timestamp_s;
    if (rec.channel == Channel::IdlerB) pairs[rec.pair_id].t_idler = rec.timestamp_s;
  }
  return pairs;
}

std::size_t count_channel(const EventStream& stream, Channel ch) {
  std::size_t n = 0;
  for (const auto& rec : stream.records) n += rec.channel == ch ? 1 : 0;
  return n;
}

std::size_t count_photons(const EventStream& stream) {
  std::size_t n = 0;
  for (const auto& rec : stream.records) n += rec.pair_id >= 0 ? 1 : 0;
  return n;
}

bool same_records(const EventStream& a, const EventStream& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    if (a.records[i].timestamp_s != b.records[i].timestamp_s) return false;
    if (a.records[i].channel != b.records[i].channel) return false;
    if (a.records[i].pair_id != b.records[i].pair_id) return false;
  }
  return true;
}

// CDF of the sampler's tabulated piecewise-linear delay density: trapezoid
// cell masses, quadratic mass function inside each cell. Built independently
// from the published grid convention so the KS test has an exact null.
class TabulatedCdf {
 public:
  explicit TabulatedCdf(const CombParams& comb) {
    auto psi = bfc::core::temporal_wavefunction(comb, bfc::core::default_tau_grid(comb));
    for (double& v : psi.values) v *= v;
    start_ = psi.tau_start_s;
    step_ = psi.tau_step_s;
    f_ = psi.values;
    cum_.resize(f_.size(), 0.0);
    for (std::size_t i = 0; i + 1 < f_.size(); ++i)
      cum_[i + 1] = cum_[i] + 0.5 * (f_[i] + f_[i + 1]) * step_;
    total_ = cum_.back();
  }

  double operator()(double x) const {
    if (x <= start_) return 0.0;
    const double end = start_ + step_ * static_cast<double>(f_.size() - 1);
    if (x >= end) return 1.0;
    const auto idx = static_cast<std::size_t>((x - start_) / step_);
    const double dx = x - (start_ + step_ * static_cast<double>(idx));
    const double slope = (f_[idx + 1] - f_[idx]) / step_;
    return (cum_[idx] + f_[idx] * dx + 0.5 * slope * dx * dx) / total_;
  }

 private:
  double start_ = 0.0, step_ = 0.0, total_ = 0.0;
  std::vector<double> f_;
  std::vector<double> cum_;
};

double ks_statistic(std::vector<double> samples, const TabulatedCdf& cdf) {
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::abs(f - static_cast<double>(i + 1) / n));
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
  }
  return d;
}

}  // namespace

TEST_CASE("identical seeds give bit-identical streams at any worker count") {
  const auto comb = nominal_comb();
  const auto src = make_source(5e5, 7e-3, 424242u);
  DetectorParams det{15.27e-12, 0.9, 200.0};
  LinkParams link{0.0, 1.0, 2e-9};

  const auto serial = bfc::sim::generate_pairs(comb, src, det, det, link, 1);
  const auto fanned = bfc::sim::generate_pairs(comb, src, det, det, link, 3);
  const auto wide = bfc::sim::generate_pairs(comb, src, det, det, link, 8);
  CHECK(serial.records.size() > 1000);
  CHECK(same_records(serial, fanned));
  CHECK(same_records(serial, wide));

  auto other = src;
  other.seed = 424243u;
  const auto different = bfc::sim::generate_pairs(comb, other, det, det, link, 1);
  CHECK_FALSE(same_records(serial, different));
}

TEST_CASE("records are sorted by timestamp") {
  const auto stream = bfc::sim::generate_pairs(nominal_comb(), make_source(1e6, 5e-3, 7u),
                                               DetectorParams{10e-12, 0.9, 500.0},
                                               DetectorParams{10e-12, 0.9, 500.0}, LinkParams{});
  for (std::size_t i = 1; i < stream.records.size(); ++i)
    REQUIRE(stream.records[i - 1].timestamp_s <= stream.records[i].timestamp_s);
  CHECK(stream.seed == 7u);
  CHECK(stream.comb.fsr_hz == nominal_comb().fsr_hz);
}

TEST_CASE("singly filtered delays are one-sided and follow the tabulated density") {
  const auto comb = nominal_comb();
  DetectorParams perfect{0.0, 1.0, 0.0};
  const auto stream =
      bfc::sim::generate_pairs(comb, make_source(2e6, 0.1, 31337u), perfect, perfect, LinkParams{});

  std::vector<double> delays;
  for (const auto& [id, pair] : truth_pairs(stream)) {
    REQUIRE(pair.t_signal.has_value());
    REQUIRE(pair.t_idler.has_value());
    const double tau = *pair.t_signal - *pair.t_idler;
    CHECK(tau >= 0.0);
    delays.push_back(tau);
  }
  REQUIRE(delays.size() > 150000);

  const TabulatedCdf cdf(comb);
  const double d = ks_statistic(delays, cdf);
  // Kolmogorov critical value at alpha = 0.01.
  CHECK(d < 1.628 / std::sqrt(static_cast<double>(delays.size())));
}

TEST_CASE("doubly filtered delays are two-sided and balanced") {
  const auto comb = nominal_comb(FilterMode::DoublyFiltered);
  DetectorParams perfect{0.0, 1.0, 0.0};
  const auto stream =
      bfc::sim::generate_pairs(comb, make_source(1e6, 0.02, 99u), perfect, perfect, LinkParams{});

  std::size_t n_pos = 0, n_total = 0;
  for (const auto& [id, pair] : truth_pairs(stream)) {
    const double tau = *pair.t_signal - *pair.t_idler;
    ++n_total;
    n_pos += tau > 0.0 ? 1 : 0;
  }
  REQUIRE(n_total > 15000);
  const double frac = static_cast<double>(n_pos) / static_cast<double>(n_total);
  const double sigma = 0.5 / std::sqrt(static_cast<double>(n_total));
  CHECK(std::abs(frac - 0.5) < 5.0 * sigma);
}

TEST_CASE("efficiency and link loss thin the expected channels") {
  const auto comb = nominal_comb();
  DetectorParams det{0.0, 0.9, 0.0};
  LinkParams link{0.0, 3.0102999566, 0.0};  // one half
  const double rate = 2e6, duration = 5e-3;
  const auto stream =
      bfc::sim::generate_pairs(comb, make_source(rate, duration, 5150u), det, det, link);

  const double n_pairs = rate * duration;
  const double exp_signal = n_pairs * 0.9;
  const double exp_idler = n_pairs * 0.9 * 0.5;
  const auto n_signal = static_cast<double>(count_channel(stream, Channel::SignalA));
  const auto n_idler = static_cast<double>(count_channel(stream, Channel::IdlerB));
  CHECK(std::abs(n_signal - exp_signal) < 5.0 * std::sqrt(exp_signal));
  CHECK(std::abs(n_idler - exp_idler) < 5.0 * std::sqrt(exp_idler));
}

TEST_CASE("dark counts: rate, truth tag, uniform arrival") {
  const auto comb = nominal_comb();
  DetectorParams dark_det{0.0, 0.9, 2e5};
  const double duration = 5e-3;
  const auto stream = bfc::sim::generate_pairs(comb, make_source(0.0, duration, 808u), dark_det,
                                               dark_det, LinkParams{});

  double sum_t = 0.0;
  std::size_t n_dark = 0;
  for (const auto& rec : stream.records) {
    REQUIRE(rec.pair_id == bfc::sim::kDarkId);
    REQUIRE(rec.timestamp_s >= 0.0);
    REQUIRE(rec.timestamp_s <= duration);
    sum_t += rec.timestamp_s;
    ++n_dark;
  }
  const double expected = 2.0 * 2e5 * duration;  // both detectors
  CHECK(std::abs(static_cast<double>(n_dark) - expected) < 5.0 * std::sqrt(expected));

  // Uniform arrivals: mean timestamp at duration/2.
  const double mean_t = sum_t / static_cast<double>(n_dark);
  const double sigma_mean = duration / std::sqrt(12.0 * static_cast<double>(n_dark));
  CHECK(std::abs(mean_t - 0.5 * duration) < 5.0 * sigma_mean);
}

TEST_CASE("link delay rigidly shifts both arms") {
  const auto comb = nominal_comb();
  DetectorParams det{0.0, 0.8, 0.0};
  const auto src = make_source(1e6, 2e-3, 1234u);
  const auto base = bfc::sim::generate_pairs(comb, src, det, det, LinkParams{0.0, 0.0, 0.0});
  const auto delayed = bfc::sim::generate_pairs(comb, src, det, det, LinkParams{0.0, 0.0, 5e-9});

  const auto pairs_base = truth_pairs(base);
  const auto pairs_delayed = truth_pairs(delayed);
  REQUIRE(pairs_base.size() == pairs_delayed.size());
  for (const auto& [id, pair] : pairs_base) {
    const auto it = pairs_delayed.find(id);
    REQUIRE(it != pairs_delayed.end());
    if (pair.t_idler && it->second.t_idler)
      CHECK(*it->second.t_idler - *pair.t_idler == doctest::Approx(5e-9).epsilon(1e-6));
    if (pair.t_signal && it->second.t_signal)
      CHECK(*it->second.t_signal - *pair.t_signal == doctest::Approx(5e-9).epsilon(1e-6));
  }
}

TEST_CASE("apply_loss thins photons, keeps darks, and composes") {
  const auto comb = nominal_comb();
  DetectorParams det{0.0, 0.9, 1e4};
  const auto stream =
      bfc::sim::generate_pairs(comb, make_source(2e6, 5e-3, 2024u), det, det, LinkParams{});
  const std::size_t darks_before = stream.records.size() - count_photons(stream);
  const auto n_photons = static_cast<double>(count_photons(stream));

  const auto halved = bfc::sim::apply_loss(stream, 3.0102999566, 1u);
  const std::size_t darks_after = halved.records.size() - count_photons(halved);
  CHECK(darks_after == darks_before);
  const auto kept = static_cast<double>(count_photons(halved));
  CHECK(std::abs(kept - 0.5 * n_photons) < 5.0 * std::sqrt(n_photons * 0.25));

  // Two sequential losses behave like their sum.
  const auto two_step = bfc::sim::apply_loss(bfc::sim::apply_loss(stream, 2.0, 11u), 3.0, 12u);
  const auto one_step = bfc::sim::apply_loss(stream, 5.0, 13u);
  const double p = bfc::db_to_transmission(5.0);
  const double sigma = std::sqrt(2.0 * n_photons * p * (1.0 - p));
  CHECK(std::abs(static_cast<double>(count_photons(two_step)) -
                 static_cast<double>(count_photons(one_step))) < 5.0 * sigma);

  CHECK_THROWS_AS(bfc::sim::apply_loss(stream, -1.0, 1u), std::invalid_argument);
}

TEST_CASE("hbt_split partitions idlers and preserves timestamps") {
  const auto comb = nominal_comb();
  DetectorParams det{0.0, 0.9, 0.0};
  const auto stream =
      bfc::sim::generate_pairs(comb, make_source(2e6, 5e-3, 3100u), det, det, LinkParams{});
  const std::size_t n_idler = count_channel(stream, Channel::IdlerB);
  REQUIRE(n_idler > 5000);

  const auto split = bfc::sim::hbt_split(stream, 0.5, 1717u);
  CHECK(split.records.size() == stream.records.size());
  CHECK(count_channel(split, Channel::IdlerB) == 0);
  const auto n_b1 = static_cast<double>(count_channel(split, Channel::IdlerB1));
  const auto n_b2 = static_cast<double>(count_channel(split, Channel::IdlerB2));
  CHECK(n_b1 + n_b2 == static_cast<double>(n_idler));
  CHECK(std::abs(n_b1 - 0.5 * static_cast<double>(n_idler)) <
        5.0 * std::sqrt(static_cast<double>(n_idler) * 0.25));

  // Only the channel tag changes.
  for (std::size_t i = 0; i < stream.records.size(); ++i) {
    REQUIRE(split.records[i].timestamp_s == stream.records[i].timestamp_s);
    REQUIRE(split.records[i].pair_id == stream.records[i].pair_id);
  }

  CHECK_THROWS_AS(bfc::sim::hbt_split(stream, 0.0, 1u), std::invalid_argument);
  CHECK_THROWS_AS(bfc::sim::hbt_split(stream, 1.0, 1u), std::invalid_argument);
  const auto signal_only = bfc::sim::channel_subset(stream, Channel::SignalA);
  CHECK_THROWS_AS(bfc::sim::hbt_split(signal_only, 0.5, 1u), bfc::sim::NoIdlerRecords);
}

TEST_CASE("channel_subset filters exactly one channel") {
  const auto comb = nominal_comb();
  DetectorParams det{0.0, 0.9, 1e4};
  const auto stream =
      bfc::sim::generate_pairs(comb, make_source(1e6, 2e-3, 41u), det, det, LinkParams{});
  const auto idlers = bfc::sim::channel_subset(stream, Channel::IdlerB);
  CHECK(idlers.records.size() == count_channel(stream, Channel::IdlerB));
  for (const auto& rec : idlers.records) REQUIRE(rec.channel == Channel::IdlerB);
  CHECK(idlers.seed == stream.seed);
}

TEST_CASE("multi-pair emission has Poisson moments and is seeded") {
  const double mu = 0.02;
  const std::size_t n = 200000;
  const auto counts = bfc::sim::multi_pair_emission(mu, n, 66u);
  REQUIRE(counts.size() == n);

  double sum = 0.0, sum_sq = 0.0;
  for (int c : counts) {
    sum += c;
    sum_sq += static_cast<double>(c) * c;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = sum_sq / static_cast<double>(n) - mean * mean;
  const double sigma_mean = std::sqrt(mu / static_cast<double>(n));
  CHECK(std::abs(mean - mu) < 5.0 * sigma_mean);
  CHECK(var == doctest::Approx(mu).epsilon(0.06));

  CHECK(bfc::sim::multi_pair_emission(mu, 1000, 66u) ==
        std::vector<int>(bfc::sim::multi_pair_emission(mu, 1000, 66u)));
  CHECK(bfc::sim::multi_pair_emission(0.0, 50, 1u) == std::vector<int>(50, 0));
  CHECK_THROWS_AS(bfc::sim::multi_pair_emission(-0.1, 10, 1u), std::invalid_argument);
}

TEST_CASE("bandpass scan passes only the configured line pair") {
  const auto comb = nominal_comb();
  DetectorParams det{0.0, 0.9, 0.0};
  const auto src = make_source(1e6, 5e-3, 2718u);

  const auto symmetric = bfc::sim::scan_pair_stream(comb, src, det, det, LinkParams{}, 1, -1);
  const auto asymmetric = bfc::sim::scan_pair_stream(comb, src, det, det, LinkParams{}, 1, 0);

  // Truth-matched coincidences only exist for the energy-conserving pairing.
  std::size_t sym_matched = 0, asym_matched = 0;
  for (const auto& [id, pair] : truth_pairs(symmetric))
    sym_matched += pair.t_signal && pair.t_idler ? 1 : 0;
  for (const auto& [id, pair] : truth_pairs(asymmetric))
    asym_matched += pair.t_signal && pair.t_idler ? 1 : 0;
  CHECK(sym_matched > 500);
  CHECK(asym_matched == 0);

  // Determinism and bin bounds.
  const auto again = bfc::sim::scan_pair_stream(comb, src, det, det, LinkParams{}, 1, -1);
  CHECK(same_records(symmetric, again));
  CHECK_THROWS_AS(bfc::sim::scan_pair_stream(comb, src, det, det, LinkParams{}, 3, -3),
                  std::invalid_argument);
}

TEST_CASE("scan delay law is the reduced one-line exponential") {
  const auto comb = nominal_comb();
  DetectorParams perfect{0.0, 1.0, 0.0};
  const auto stream = bfc::sim::scan_pair_stream(comb, make_source(1e6, 0.05, 5u), perfect,
                                                 perfect, LinkParams{}, 1, -1);
  std::vector<double> delays;
  for (const auto& [id, pair] : truth_pairs(stream)) {
    if (pair.t_signal && pair.t_idler) delays.push_back(*pair.t_signal - *pair.t_idler);
  }
  REQUIRE(delays.size() > 8000);
  double sum = 0.0;
  for (double d : delays) {
    REQUIRE(d >= 0.0);  // singly filtered: one-sided
    sum += d;
  }
  const double mean = sum / static_cast<double>(delays.size());
  const double expected = 1.0 / (2.0 * comb.half_linewidth());
  const double sigma_mean = expected / std::sqrt(static_cast<double>(delays.size()));
  CHECK(std::abs(mean - expected) < 5.0 * sigma_mean);
}

TEST_CASE("events CSV round-trips records") {
  const auto comb = nominal_comb();
  DetectorParams det{10e-12, 0.9, 1e4};
  const auto stream =
      bfc::sim::generate_pairs(comb, make_source(5e5, 1e-3, 12u), det, det, LinkParams{});
  REQUIRE(stream.records.size() > 100);

  std::stringstream ss;
  const std::vector<std::string> comments{"roundtrip fixture"};
  bfc::csv::write_events(ss, stream, true, comments);
  const auto back = bfc::csv::read_events(ss);

  REQUIRE(back.records.size() == stream.records.size());
  for (std::size_t i = 0; i < stream.records.size(); ++i) {
    CHECK(back.records[i].timestamp_s ==
          doctest::Approx(stream.records[i].timestamp_s).epsilon(1e-12));
    CHECK(back.records[i].channel == stream.records[i].channel);
    CHECK(back.records[i].pair_id == stream.records[i].pair_id);
  }

  // Without truth the tags are unknown.
  std::stringstream anon;
  bfc::csv::write_events(anon, stream, false, comments);
  const auto blind = bfc::csv::read_events(anon);
  REQUIRE(blind.records.size() == stream.records.size());
  for (const auto& rec : blind.records) REQUIRE(rec.pair_id == bfc::sim::kUnknownId);
}

TEST_CASE("channel names round-trip") {
  for (Channel ch :
       {Channel::SignalA, Channel::IdlerB, Channel::IdlerB1, Channel::IdlerB2}) {
    CHECK(bfc::csv::parse_channel(bfc::csv::channel_name(ch)) == ch);
  }
  CHECK_THROWS_AS(bfc::csv::parse_channel("nonsense"), bfc::tagger::UnknownChannel);
}

TEST_CASE("parameter validation propagates") {
  const auto comb = nominal_comb();
  DetectorParams det{0.0, 0.9, 0.0};

  auto bad_source = make_source(1e6, 0.0, 1u);
  CHECK_THROWS_AS(bfc::sim::generate_pairs(comb, bad_source, det, det, LinkParams{}),
                  std::invalid_argument);

  DetectorParams bad_det{0.0, 1.5, 0.0};
  CHECK_THROWS_AS(bfc::sim::generate_pairs(comb, make_source(1e6, 1e-3, 1u), bad_det, det,
                                           LinkParams{}),
                  std::invalid_argument);

  LinkParams bad_link{0.0, -2.0, 0.0};
  CHECK_THROWS_AS(bfc::sim::generate_pairs(comb, make_source(1e6, 1e-3, 1u), det, det, bad_link),
                  std::invalid_argument);
}
