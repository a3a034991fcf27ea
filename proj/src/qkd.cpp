#include "bfc/qkd.hpp"

#include <algorithm>
#include <cmath>

namespace bfc::qkd {

namespace {

void append_symbol(std::vector<std::int64_t>& frames, std::vector<int>& symbols, double t,
                   double bin_s, int frame_bins) {
  const auto abs_bin = static_cast<std::int64_t>(std::floor(t / bin_s));
  const auto f = static_cast<std::int64_t>(frame_bins);
  // Euclidean mod so pre-delay negative timestamps stay in [0, F).
  std::int64_t sym = abs_bin % f;
  if (sym < 0) sym += f;
  frames.push_back((abs_bin - sym) / f);
  symbols.push_back(static_cast<int>(sym));
}

}  // namespace

TimeBinSymbols discretize(const sim::EventStream& stream_a, const sim::EventStream& stream_b,
                          double bin_s, int frame_bins, double window_s) {
  if (!(bin_s > 0.0)) throw std::invalid_argument("discretize: requires bin_s > 0");
  if (frame_bins < 2) throw std::invalid_argument("discretize: requires frame_bins >= 2");
  if (!(window_s > 0.0)) throw std::invalid_argument("discretize: requires window_s > 0");

  const double half = 0.5 * window_s;
  const auto& a = stream_a.records;
  const auto& b = stream_b.records;
  TimeBinSymbols out;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    const double dt = b[j].timestamp_s - a[i].timestamp_s;
    if (dt < -half) {
      ++j;
    } else if (dt > half) {
      ++i;
    } else {
      append_symbol(out.frame_a, out.symbol_a, a[i].timestamp_s, bin_s, frame_bins);
      append_symbol(out.frame_b, out.symbol_b, b[j].timestamp_s, bin_s, frame_bins);
      ++i;
      ++j;
    }
  }
  if (out.size() == 0) throw NoCoincidences("discretize: no coincidences within window");
  return out;
}

double pie_shannon(std::span<const int> symbols_a, std::span<const int> symbols_b) {
  if (symbols_a.size() != symbols_b.size()) {
    throw LengthMismatch("pie_shannon: symbol sequences differ in length");
  }
  if (symbols_a.empty()) throw std::invalid_argument("pie_shannon: empty symbol sequences");

  int d = 0;
  for (std::size_t k = 0; k < symbols_a.size(); ++k) {
    if (symbols_a[k] < 0 || symbols_b[k] < 0) {
      throw std::invalid_argument("pie_shannon: symbols must be nonnegative");
    }
    d = std::max({d, symbols_a[k] + 1, symbols_b[k] + 1});
  }

  const auto dim = static_cast<std::size_t>(d);
  std::vector<double> joint(dim * dim, 0.0);
  std::vector<double> pa(dim, 0.0);
  std::vector<double> pb(dim, 0.0);
  const double w = 1.0 / static_cast<double>(symbols_a.size());
  for (std::size_t k = 0; k < symbols_a.size(); ++k) {
    const auto ia = static_cast<std::size_t>(symbols_a[k]);
    const auto ib = static_cast<std::size_t>(symbols_b[k]);
    joint[ia * dim + ib] += w;
    pa[ia] += w;
    pb[ib] += w;
  }

  double mi = 0.0;
  for (std::size_t ia = 0; ia < dim; ++ia) {
    for (std::size_t ib = 0; ib < dim; ++ib) {
      const double pab = joint[ia * dim + ib];
      if (pab > 0.0) mi += pab * std::log2(pab / (pa[ia] * pb[ib]));
    }
  }
  return std::max(mi, 0.0);
}

double HolevoModel::bound(double visibility, int alphabet_d) const {
  if (table.empty()) return holevo_bound(visibility, alphabet_d);
  if (!(visibility >= 0.0 && visibility <= 1.0)) {
    throw std::invalid_argument("holevo_bound: visibility must lie in [0, 1]");
  }
  if (alphabet_d < 2) throw std::invalid_argument("holevo_bound: requires alphabet_d >= 2");
  double chi;
  if (visibility <= table.front().first) {
    chi = table.front().second;
  } else if (visibility >= table.back().first) {
    chi = table.back().second;
  } else {
    chi = table.back().second;
    for (std::size_t k = 1; k < table.size(); ++k) {
      if (visibility <= table[k].first) {
        const auto& [v0, c0] = table[k - 1];
        const auto& [v1, c1] = table[k];
        const double s = (visibility - v0) / (v1 - v0);
        chi = c0 + s * (c1 - c0);
        break;
      }
    }
  }
  return std::clamp(chi, 0.0, std::log2(static_cast<double>(alphabet_d)));
}

double holevo_bound(double visibility, int alphabet_d) {
  if (!(visibility >= 0.0 && visibility <= 1.0)) {
    throw std::invalid_argument("holevo_bound: visibility must lie in [0, 1]");
  }
  if (alphabet_d < 2) throw std::invalid_argument("holevo_bound: requires alphabet_d >= 2");
  const double cap = std::log2(static_cast<double>(alphabet_d));
  return std::clamp((1.0 - visibility) * cap, 0.0, cap);
}

double holevo_bound(double visibility, int alphabet_d, const HolevoModel& model) {
  return model.bound(visibility, alphabet_d);
}

KeyRateReport key_rate_report(std::span<const PairInput> pairs, int alphabet_d,
                              const HolevoModel& model) {
  KeyRateReport report;
  report.total.label = "TOTAL";
  for (const auto& in : pairs) {
    if (!(in.coincidence_rate_hz >= 0.0) || !(in.pie_bits >= 0.0)) {
      throw std::invalid_argument("key_rate_report: rates and PIEs must be nonnegative");
    }
    KeyRateRow row;
    row.label = in.label;
    row.coincidence_rate_hz = in.coincidence_rate_hz;
    row.pie_bits = in.pie_bits;
    row.holevo_bits = model.bound(in.visibility, alphabet_d);
    row.secure_pie_bits = in.pie_bits - row.holevo_bits;
    row.raw_rate_bps = in.coincidence_rate_hz * in.pie_bits;
    row.secure_rate_bps = in.coincidence_rate_hz * std::max(0.0, row.secure_pie_bits);
    report.rows.push_back(row);

    report.total.coincidence_rate_hz += row.coincidence_rate_hz;
    report.total.pie_bits += row.pie_bits;
    report.total.holevo_bits += row.holevo_bits;
    report.total.secure_pie_bits += std::max(0.0, row.secure_pie_bits);
    report.total.raw_rate_bps += row.raw_rate_bps;
    report.total.secure_rate_bps += row.secure_rate_bps;
  }
  return report;
}

}  // namespace bfc::qkd
