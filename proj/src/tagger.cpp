#include "bfc/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

namespace bfc::tagger {

namespace {

std::vector<double> channel_times(const sim::EventStream& stream, sim::Channel ch) {
  std::vector<double> times;
  for (const auto& r : stream.records) {
    if (r.channel == ch) times.push_back(r.timestamp_s);
  }
  return times;
}

// True if any element of sorted `times` lies within [lo, hi].
bool any_in_range(const std::vector<double>& times, double lo, double hi) {
  auto it = std::lower_bound(times.begin(), times.end(), lo);
  return it != times.end() && *it <= hi;
}

}  // namespace

CoincidenceAccumulator::CoincidenceAccumulator(sim::Channel ch_a, sim::Channel ch_b,
                                               double bin_width_s, double span_s)
    : ch_a_(ch_a), ch_b_(ch_b), bin_width_s_(bin_width_s), span_s_(span_s) {
  if (ch_a == ch_b) throw UnknownChannel("coincidence: channels must differ");
  if (!(bin_width_s > 0.0) || !(span_s > 0.0)) {
    throw std::invalid_argument("coincidence: requires bin_width_s > 0 and span_s > 0");
  }
  const auto n_bins = static_cast<std::size_t>(std::lround(2.0 * span_s / bin_width_s));
  counts_.assign(std::max<std::size_t>(n_bins, 1), 0.0);
}

void CoincidenceAccumulator::record_delay(double delta_t) {
  if (delta_t < -span_s_ || delta_t > span_s_) return;
  auto idx = static_cast<std::ptrdiff_t>(std::floor((delta_t + span_s_) / bin_width_s_));
  idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(counts_.size()) - 1);
  counts_[static_cast<std::size_t>(idx)] += 1.0;
}

void CoincidenceAccumulator::push(const sim::EventRecord& record) {
  const double t = record.timestamp_s;
  while (!recent_a_.empty() && t - recent_a_.front() > span_s_) recent_a_.pop_front();
  while (!recent_b_.empty() && t - recent_b_.front() > span_s_) recent_b_.pop_front();
  if (record.channel == ch_a_) {
    // Partner already seen => this record is the later one; count once here.
    for (double tb : recent_b_) record_delay(tb - t);
    recent_a_.push_back(t);
  } else if (record.channel == ch_b_) {
    for (double ta : recent_a_) record_delay(t - ta);
    recent_b_.push_back(t);
  }
}

core::CorrelationTrace CoincidenceAccumulator::finish() const {
  core::CorrelationTrace trace;
  trace.tau_start_s = -span_s_ + 0.5 * bin_width_s_;
  trace.tau_step_s = bin_width_s_;
  trace.values = counts_;
  trace.kind = core::TraceKind::Histogram;
  return trace;
}

core::CorrelationTrace coincidence_histogram(const sim::EventStream& stream, sim::Channel ch_a,
                                             sim::Channel ch_b, double bin_width_s, double span_s) {
  CoincidenceAccumulator acc(ch_a, ch_b, bin_width_s, span_s);
  for (const auto& r : stream.records) acc.push(r);
  return acc.finish();
}

std::size_t coincidence_count(const sim::EventStream& stream, sim::Channel ch_a,
                              sim::Channel ch_b, double window_s) {
  if (ch_a == ch_b) throw UnknownChannel("coincidence: channels must differ");
  if (!(window_s > 0.0)) throw std::invalid_argument("coincidence: requires window_s > 0");
  const double half = 0.5 * window_s;
  std::size_t count = 0;
  std::deque<double> recent_a;
  std::deque<double> recent_b;
  for (const auto& r : stream.records) {
    const double t = r.timestamp_s;
    while (!recent_a.empty() && t - recent_a.front() > half) recent_a.pop_front();
    while (!recent_b.empty() && t - recent_b.front() > half) recent_b.pop_front();
    if (r.channel == ch_a) {
      count += recent_b.size();
      recent_a.push_back(t);
    } else if (r.channel == ch_b) {
      count += recent_a.size();
      recent_b.push_back(t);
    }
  }
  return count;
}

std::vector<std::pair<double, double>> default_accidental_region(const core::CombParams& comb,
                                                                 double span_s) {
  const double support = 5.0 * std::max(16.0 * comb.round_trip(), 20.0 / comb.half_linewidth());
  if (!(span_s > support)) {
    throw std::invalid_argument("accidental region: span_s must exceed the correlation support");
  }
  return {{-span_s, -support}, {support, span_s}};
}

core::CorrelationTrace estimate_g2(const core::CorrelationTrace& hist,
                                   std::span<const std::pair<double, double>> accidental_region) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const double tau = hist.tau(i);
    for (const auto& [lo, hi] : accidental_region) {
      if (tau >= lo && tau <= hi) {
        sum += hist.values[i];
        ++n;
        break;
      }
    }
  }
  if (n == 0) throw EmptyAccidentalRegion("estimate_g2: no histogram bins in accidental region");
  const double mean = sum / static_cast<double>(n);
  if (!(mean > 0.0)) throw EmptyAccidentalRegion("estimate_g2: zero accidental level");
  core::CorrelationTrace g2 = hist;
  for (auto& v : g2.values) v /= mean;
  g2.kind = core::TraceKind::Intensity;
  return g2;
}

HeraldedG2 heralded_g2_zero(const sim::EventStream& stream, double window_s) {
  if (!(window_s > 0.0)) throw std::invalid_argument("heralded_g2: requires window_s > 0");
  const auto heralds = channel_times(stream, sim::Channel::SignalA);
  if (heralds.empty()) throw NoHeralds("heralded_g2: stream has no herald records");
  const auto b1 = channel_times(stream, sim::Channel::IdlerB1);
  const auto b2 = channel_times(stream, sim::Channel::IdlerB2);

  const double half = 0.5 * window_s;
  HeraldedG2 out;
  out.n_heralds = static_cast<long>(heralds.size());
  for (double t : heralds) {
    const bool hit1 = any_in_range(b1, t - half, t + half);
    const bool hit2 = any_in_range(b2, t - half, t + half);
    out.n_ab += hit1 ? 1 : 0;
    out.n_ac += hit2 ? 1 : 0;
    out.n_abc += (hit1 && hit2) ? 1 : 0;
  }

  const double na = static_cast<double>(out.n_heralds);
  const double nab = static_cast<double>(out.n_ab);
  const double nac = static_cast<double>(out.n_ac);
  const double nabc = static_cast<double>(out.n_abc);
  if (out.n_ab == 0 || out.n_ac == 0) {
    out.g2h = 0.0;
    out.sigma = 0.0;
    return out;
  }
  if (out.n_abc == 0) {
    out.g2h = 0.0;
    // One-triple scale: what a single N_ABC count would contribute.
    out.sigma = na / (nab * nac);
    return out;
  }
  out.g2h = nabc * na / (nab * nac);
  out.sigma = out.g2h * std::sqrt(1.0 / nabc + 1.0 / na + 1.0 / nab + 1.0 / nac);
  return out;
}

schmidt::JSIMatrix assemble_jsi(const std::vector<ScanRun>& runs, double window_s) {
  if (runs.empty()) throw IncompleteGrid("assemble_jsi: no runs");
  int n = 0;
  for (const auto& run : runs) {
    n = std::max({n, std::abs(run.m_signal), std::abs(run.m_idler)});
  }
  const std::size_t dim = 2 * static_cast<std::size_t>(n) + 1;
  schmidt::JSIMatrix jsi;
  jsi.side_lines = n;
  jsi.weights.assign(dim * dim, 0.0);
  std::vector<bool> seen(dim * dim, false);
  for (const auto& run : runs) {
    const auto row = static_cast<std::size_t>(run.m_signal + n);
    const auto col = static_cast<std::size_t>(run.m_idler + n);
    const std::size_t idx = row * dim + col;
    if (seen[idx]) {
      throw IncompleteGrid("assemble_jsi: duplicate run for bin pair (" +
                           std::to_string(run.m_signal) + ", " + std::to_string(run.m_idler) +
                           ")");
    }
    seen[idx] = true;
    jsi.weights[idx] = static_cast<double>(coincidence_count(
        run.stream, sim::Channel::SignalA, sim::Channel::IdlerB, window_s));
  }
  if (static_cast<std::size_t>(std::count(seen.begin(), seen.end(), true)) != dim * dim) {
    throw IncompleteGrid("assemble_jsi: runs do not cover the full bin grid");
  }
  return jsi;
}

double estimate_peak_spacing(const core::CorrelationTrace& trace, double min_separation_s,
                             double min_height_rel) {
  if (trace.size() < 3) throw std::invalid_argument("peak_spacing: trace too short");
  const auto radius = std::max<std::ptrdiff_t>(
      1, static_cast<std::ptrdiff_t>(std::lround(0.5 * min_separation_s / trace.tau_step_s)));
  const double floor_value =
      min_height_rel * *std::max_element(trace.values.begin(), trace.values.end());

  std::vector<double> peak_taus;
  const auto size = static_cast<std::ptrdiff_t>(trace.size());
  for (std::ptrdiff_t i = 1; i + 1 < size; ++i) {
    const double v0 = trace.values[static_cast<std::size_t>(i)];
    if (v0 < floor_value) continue;
    bool is_max = true;
    bool strictly_above_one = false;
    for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - radius);
         j <= std::min(size - 1, i + radius); ++j) {
      if (j == i) continue;
      const double vj = trace.values[static_cast<std::size_t>(j)];
      if (vj > v0) {
        is_max = false;
        break;
      }
      if (vj < v0) strictly_above_one = true;
    }
    if (!is_max || !strictly_above_one) continue;
    const double vm = trace.values[static_cast<std::size_t>(i - 1)];
    const double vp = trace.values[static_cast<std::size_t>(i + 1)];
    const double denom = vm - 2.0 * v0 + vp;
    const double delta = denom < 0.0 ? 0.5 * (vm - vp) / denom : 0.0;
    peak_taus.push_back(trace.tau(static_cast<std::size_t>(i)) + delta * trace.tau_step_s);
  }
  if (peak_taus.size() < 2) {
    throw std::runtime_error("peak_spacing: fewer than two peaks detected");
  }
  std::vector<double> spacings;
  spacings.reserve(peak_taus.size() - 1);
  for (std::size_t i = 1; i < peak_taus.size(); ++i) {
    spacings.push_back(peak_taus[i] - peak_taus[i - 1]);
  }
  std::nth_element(spacings.begin(), spacings.begin() + spacings.size() / 2, spacings.end());
  double median = spacings[spacings.size() / 2];
  if (spacings.size() % 2 == 0) {
    const auto lower = std::max_element(spacings.begin(), spacings.begin() + spacings.size() / 2);
    median = 0.5 * (median + *lower);
  }
  return median;
}

}  // namespace bfc::tagger
