#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bfc/eventsim.hpp"

namespace bfc::qkd {

struct NoCoincidences : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LengthMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Matched coincidences mapped to time-bin symbols, index-aligned across
// parties: entry k of every vector describes the k-th matched pair.
struct TimeBinSymbols {
  std::vector<std::int64_t> frame_a;
  std::vector<std::int64_t> frame_b;
  std::vector<int> symbol_a;
  std::vector<int> symbol_b;

  std::size_t size() const { return symbol_a.size(); }
};

// Greedy two-pointer matching of the two record sequences within
// |t_a - t_b| <= window/2; each matched timestamp becomes
// (frame = floor(t/(bin*F)), symbol = floor(t/bin) mod F).
TimeBinSymbols discretize(const sim::EventStream& stream_a, const sim::EventStream& stream_b,
                          double bin_s, int frame_bins, double window_s);

// Plug-in mutual information of the empirical joint distribution, bits.
double pie_shannon(std::span<const int> symbols_a, std::span<const int> symbols_b);

// Optional piecewise-linear (visibility -> bits) override of the analytic
// surrogate; points sorted by visibility, flat extrapolation at the ends.
struct HolevoModel {
  std::vector<std::pair<double, double>> table;

  double bound(double visibility, int alphabet_d) const;
};

// Conservative monotone surrogate chi(V, d) = (1 - V) * log2(d), clamped to
// [0, log2 d]. Not a tight physical bound; swap in a HolevoModel table when a
// better one is available.
double holevo_bound(double visibility, int alphabet_d);
double holevo_bound(double visibility, int alphabet_d, const HolevoModel& model);

struct PairInput {
  std::string label;
  double coincidence_rate_hz = 0.0;
  double pie_bits = 0.0;
  double visibility = 1.0;
};

struct KeyRateRow {
  std::string label;
  double coincidence_rate_hz = 0.0;
  double pie_bits = 0.0;
  double holevo_bits = 0.0;
  double secure_pie_bits = 0.0;  // signed: pie - holevo
  double raw_rate_bps = 0.0;
  double secure_rate_bps = 0.0;  // cps * max(0, secure_pie)
};

struct KeyRateReport {
  std::vector<KeyRateRow> rows;
  KeyRateRow total;  // column sums; secure columns sum only nonnegative parts
};

KeyRateReport key_rate_report(std::span<const PairInput> pairs, int alphabet_d,
                              const HolevoModel& model = {});

}  // namespace bfc::qkd
