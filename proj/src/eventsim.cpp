#include "bfc/eventsim.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <tuple>

#include "bfc/rng.hpp"
#include "bfc/units.hpp"

namespace bfc::sim {

namespace {

// Fixed sharding protocol: the time axis is cut into 1 ms shards, each with a
// counter-derived seed, so the draw sequence for a shard never depends on how
// many shards exist, which worker runs it, or in what order.
constexpr double kShardDuration = 1e-3;

struct Shard {
  std::size_t index;
  double t0;
  double t1;
};

std::vector<Shard> make_shards(double duration_s) {
  const auto count =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(duration_s / kShardDuration)));
  std::vector<Shard> shards;
  shards.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t0 = static_cast<double>(i) * kShardDuration;
    shards.push_back(Shard{i, t0, std::min(duration_s, t0 + kShardDuration)});
  }
  return shards;
}

// Inverse-CDF sampler over a piecewise-linear density tabulated on a uniform
// grid. Cell masses are trapezoids; within a cell the quadratic mass function
// is inverted exactly.
class InverseCdfSampler {
 public:
  explicit InverseCdfSampler(const core::CorrelationTrace& density)
      : start_(density.tau_start_s), step_(density.tau_step_s), f_(density.values) {
    cum_.resize(f_.size(), 0.0);
    for (std::size_t i = 0; i + 1 < f_.size(); ++i)
      cum_[i + 1] = cum_[i] + 0.5 * (f_[i] + f_[i + 1]) * step_;
    total_ = cum_.back();
  }

  double sample(double u) const {
    const double target = u * total_;
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), target);
    const auto idx = static_cast<std::size_t>(
        std::clamp<std::ptrdiff_t>(it - cum_.begin() - 1, 0,
                                   static_cast<std::ptrdiff_t>(cum_.size()) - 2));
    const double m = target - cum_[idx];
    const double f0 = f_[idx];
    const double slope = (f_[idx + 1] - f0) / step_;
    double x;
    if (std::abs(slope) * step_ < 1e-12 * std::max(f0, 1e-300)) {
      x = f0 > 0.0 ? m / f0 : 0.5 * step_;
    } else {
      const double disc = std::max(0.0, f0 * f0 + 2.0 * slope * m);
      x = (std::sqrt(disc) - f0) / slope;
    }
    return start_ + step_ * static_cast<double>(idx) + std::clamp(x, 0.0, step_);
  }

 private:
  double start_;
  double step_;
  std::vector<double> f_;
  std::vector<double> cum_;
  double total_ = 0.0;
};

core::CorrelationTrace delay_density(const core::CombParams& comb) {
  core::CorrelationTrace density = core::temporal_wavefunction(comb, core::default_tau_grid(comb));
  density.kind = core::TraceKind::Intensity;
  for (double& v : density.values) v *= v;
  return density;
}

void append_darks(std::vector<EventRecord>& out, const Shard& shard, double rate_hz,
                  Channel channel, std::uint64_t seed, std::uint64_t stream_tag) {
  if (rate_hz <= 0.0) return;
  rng::Xoshiro256 gen(rng::derive_seed(seed, stream_tag, shard.index));
  double t = shard.t0;
  while ((t += gen.exponential(rate_hz)) < shard.t1)
    out.push_back(EventRecord{t, channel, kDarkId});
}

void sort_records(std::vector<EventRecord>& records) {
  std::sort(records.begin(), records.end(), [](const EventRecord& a, const EventRecord& b) {
    return std::tie(a.timestamp_s, a.channel, a.pair_id) <
           std::tie(b.timestamp_s, b.channel, b.pair_id);
  });
}

// Runs one shard generator per shard, fanned out over n_workers, and merges
// in shard order. The merge is order-insensitive by construction; the fan-out
// only decides who computes what.
template <typename ShardFn>
std::vector<EventRecord> run_sharded(const std::vector<Shard>& shards, int n_workers,
                                     ShardFn&& fn) {
  std::vector<std::vector<EventRecord>> slots(shards.size());
  if (n_workers <= 1) {
    for (const Shard& shard : shards) slots[shard.index] = fn(shard);
  } else {
    std::vector<std::future<void>> workers;
    workers.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) {
      workers.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = static_cast<std::size_t>(w); i < shards.size();
             i += static_cast<std::size_t>(n_workers))
          slots[i] = fn(shards[i]);
      }));
    }
    for (auto& worker : workers) worker.get();
  }
  std::vector<EventRecord> merged;
  for (auto& slot : slots) merged.insert(merged.end(), slot.begin(), slot.end());
  sort_records(merged);
  return merged;
}

}  // namespace

void SourceParams::validate() const {
  if (pair_rate_hz < 0.0) throw std::invalid_argument("source: pair_rate_hz must be >= 0");
  if (mu_per_window < 0.0) throw std::invalid_argument("source: mu_per_window must be >= 0");
  if (!(duration_s > 0.0)) throw std::invalid_argument("source: duration_s must be > 0");
}

double LinkParams::transmission() const { return db_to_transmission(loss_db); }

void LinkParams::validate() const {
  if (length_km < 0.0 || loss_db < 0.0 || delay_s < 0.0)
    throw std::invalid_argument("link: length, loss and delay must be >= 0");
}

EventStream generate_pairs(const core::CombParams& comb, const SourceParams& source,
                           const core::DetectorParams& det_s, const core::DetectorParams& det_i,
                           const LinkParams& link, int n_workers) {
  comb.validate();
  source.validate();
  det_s.validate();
  det_i.validate();
  link.validate();

  EventStream stream;
  stream.seed = source.seed;
  stream.comb = comb;
  stream.source = source;
  stream.det_signal = det_s;
  stream.det_idler = det_i;
  stream.link = link;

  const InverseCdfSampler sampler(delay_density(comb));
  const double idler_survival = det_i.efficiency * link.transmission();
  const std::vector<Shard> shards = make_shards(source.duration_s);

  stream.records = run_sharded(shards, n_workers, [&](const Shard& shard) {
    std::vector<EventRecord> out;
    if (source.pair_rate_hz > 0.0) {
      rng::Xoshiro256 gen(rng::derive_seed(source.seed, rng::kStreamPairs, shard.index));
      std::int64_t k = 0;
      double t = shard.t0;
      while ((t += gen.exponential(source.pair_rate_hz)) < shard.t1) {
        const std::int64_t pair_id = static_cast<std::int64_t>(shard.index) * (1ll << 32) + k++;
        const double tau = sampler.sample(gen.uniform());
        const double t_idler = t + link.delay_s;
        const double t_signal = t_idler + tau;
        const bool keep_s = gen.uniform() < det_s.efficiency;
        const bool keep_i = gen.uniform() < idler_survival;
        if (keep_s)
          out.push_back(EventRecord{t_signal + gen.gaussian() * det_s.jitter_rms_s,
                                    Channel::SignalA, pair_id});
        if (keep_i)
          out.push_back(EventRecord{t_idler + gen.gaussian() * det_i.jitter_rms_s,
                                    Channel::IdlerB, pair_id});
      }
    }
    append_darks(out, shard, det_s.dark_rate_hz, Channel::SignalA, source.seed,
                 rng::kStreamDarksSignal);
    append_darks(out, shard, det_i.dark_rate_hz, Channel::IdlerB, source.seed,
                 rng::kStreamDarksIdler);
    return out;
  });
  return stream;
}

EventStream hbt_split(const EventStream& stream, double split_ratio, std::uint64_t seed) {
  if (!(split_ratio > 0.0 && split_ratio < 1.0))
    throw std::invalid_argument("hbt_split: split_ratio must be in (0, 1)");
  bool any_idler = false;
  EventStream out = stream;
  rng::Xoshiro256 gen(rng::derive_seed(seed, rng::kStreamSplit, 0));
  for (EventRecord& record : out.records) {
    if (record.channel != Channel::IdlerB) continue;
    any_idler = true;
    record.channel = gen.uniform() < split_ratio ? Channel::IdlerB1 : Channel::IdlerB2;
  }
  if (!any_idler) throw NoIdlerRecords("hbt_split: stream has no IdlerB records");
  return out;
}

std::vector<int> multi_pair_emission(double mu_per_window, std::size_t n_windows,
                                     std::uint64_t seed) {
  if (mu_per_window < 0.0) throw std::invalid_argument("multi_pair_emission: mu must be >= 0");
  std::vector<int> counts(n_windows, 0);
  if (mu_per_window == 0.0) return counts;
  rng::Xoshiro256 gen(rng::derive_seed(seed, rng::kStreamPairs, 0));
  for (auto& c : counts) c = static_cast<int>(gen.poisson(mu_per_window));
  return counts;
}

EventStream apply_loss(const EventStream& stream, double loss_db, std::uint64_t seed) {
  if (loss_db < 0.0) throw std::invalid_argument("apply_loss: loss_db must be >= 0");
  const double transmission = db_to_transmission(loss_db);
  EventStream out = stream;
  out.records.clear();
  rng::Xoshiro256 gen(rng::derive_seed(seed, rng::kStreamLoss, 0));
  for (const EventRecord& record : stream.records) {
    if (record.pair_id == kDarkId) {
      out.records.push_back(record);
      continue;
    }
    if (gen.uniform() < transmission) out.records.push_back(record);
  }
  return out;
}

EventStream channel_subset(const EventStream& stream, Channel channel) {
  EventStream out = stream;
  out.records.clear();
  for (const EventRecord& record : stream.records)
    if (record.channel == channel) out.records.push_back(record);
  return out;
}

EventStream scan_pair_stream(const core::CombParams& comb, const SourceParams& source,
                             const core::DetectorParams& det_s, const core::DetectorParams& det_i,
                             const LinkParams& link, int m_signal, int m_idler) {
  comb.validate();
  source.validate();
  det_s.validate();
  det_i.validate();
  link.validate();
  const int n = comb.side_lines();
  if (std::abs(m_signal) > n || std::abs(m_idler) > n)
    throw std::invalid_argument("scan_pair_stream: bin outside the comb");

  // Categorical line weights from the phase-matching envelope.
  std::vector<double> cum;
  double total = 0.0;
  for (int m = -n; m <= n; ++m) {
    total += sinc_sq(comb.envelope_time() * m * comb.line_spacing());
    cum.push_back(total);
  }

  EventStream stream;
  stream.seed = source.seed;
  stream.comb = comb;
  stream.source = source;
  stream.det_signal = det_s;
  stream.det_idler = det_i;
  stream.link = link;

  const double dw = comb.half_linewidth();
  const double idler_survival = det_i.efficiency * link.transmission();
  const bool doubly = comb.filter_mode == core::FilterMode::DoublyFiltered;
  const std::vector<Shard> shards = make_shards(source.duration_s);

  stream.records = run_sharded(shards, 1, [&](const Shard& shard) {
    std::vector<EventRecord> out;
    if (source.pair_rate_hz > 0.0) {
      rng::Xoshiro256 gen(rng::derive_seed(source.seed, rng::kStreamScan, shard.index));
      std::int64_t k = 0;
      double t = shard.t0;
      while ((t += gen.exponential(source.pair_rate_hz)) < shard.t1) {
        const std::int64_t pair_id = static_cast<std::int64_t>(shard.index) * (1ll << 32) + k++;
        const double pick = gen.uniform() * total;
        const int line =
            static_cast<int>(std::upper_bound(cum.begin(), cum.end(), pick) - cum.begin()) - n;
        // Reduced one-line delay law behind the bandpass pair.
        double tau = gen.exponential(2.0 * dw);
        if (doubly && gen.uniform() < 0.5) tau = -tau;
        const bool pass_s = line == m_signal;
        const bool pass_i = -line == m_idler;
        const bool keep_s = gen.uniform() < det_s.efficiency && pass_s;
        const bool keep_i = gen.uniform() < idler_survival && pass_i;
        const double t_idler = t + link.delay_s;
        if (keep_s)
          out.push_back(EventRecord{t_idler + tau + gen.gaussian() * det_s.jitter_rms_s,
                                    Channel::SignalA, pair_id});
        if (keep_i)
          out.push_back(EventRecord{t_idler + gen.gaussian() * det_i.jitter_rms_s,
                                    Channel::IdlerB, pair_id});
      }
    }
    append_darks(out, shard, det_s.dark_rate_hz, Channel::SignalA, source.seed,
                 rng::kStreamDarksSignal);
    append_darks(out, shard, det_i.dark_rate_hz, Channel::IdlerB, source.seed,
                 rng::kStreamDarksIdler);
    return out;
  });
  return stream;
}

}  // namespace bfc::sim
