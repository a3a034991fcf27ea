#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "bfc/core_model.hpp"

namespace bfc::sim {

struct NoIdlerRecords : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SourceParams {
  double pair_rate_hz = 0.0;
  double mu_per_window = 0.0;  // mean pairs per coincidence window (pump-power proxy)
  double duration_s = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LinkParams {
  double length_km = 0.0;
  double loss_db = 0.0;
  double delay_s = 0.0;

  double transmission() const;  // in (0, 1]
  void validate() const;
};

enum class Channel { SignalA, IdlerB, IdlerB1, IdlerB2 };

inline constexpr std::int64_t kDarkId = -1;
inline constexpr std::int64_t kUnknownId = -2;

struct EventRecord {
  double timestamp_s = 0.0;
  Channel channel = Channel::SignalA;
  std::int64_t pair_id = kUnknownId;  // >= 0: pair truth tag; kDarkId: dark count
};

struct EventStream {
  std::vector<EventRecord> records;  // sorted by (timestamp, channel, pair_id)
  std::uint64_t seed = 0;
  core::CombParams comb;
  SourceParams source;
  core::DetectorParams det_signal;
  core::DetectorParams det_idler;
  LinkParams link;
};

// Seeded Poisson pair generation: idler at emission + link delay, signal at
// idler + tau with tau drawn from |psi(tau)|^2; link loss on the idler arm
// only; per-detector efficiency, Gaussian jitter, and uniform dark counts.
// Output is bit-identical for identical (params, seed) at any worker count;
// the sharding scheme is the documented seed contract (see README).
EventStream generate_pairs(const core::CombParams& comb, const SourceParams& source,
                           const core::DetectorParams& det_s, const core::DetectorParams& det_i,
                           const LinkParams& link, int n_workers = 1);

// Reassign each IdlerB record to IdlerB1/IdlerB2 with the given split ratio.
EventStream hbt_split(const EventStream& stream, double split_ratio, std::uint64_t seed);

// I.i.d. Poisson(mu) pair counts per coincidence window.
std::vector<int> multi_pair_emission(double mu_per_window, std::size_t n_windows,
                                     std::uint64_t seed);

// Thin photon records by an extra optical loss; dark counts are detector
// noise downstream of the loss and are kept.
EventStream apply_loss(const EventStream& stream, double loss_db, std::uint64_t seed);

// Records of one channel only (params/seed snapshot preserved).
EventStream channel_subset(const EventStream& stream, Channel channel);

// One bandpass-scan run: pairs are born on a comb line drawn from the
// phase-matching weights; the signal filter passes line m_signal, the idler
// filter passes line m_idler (idler of line m sits at -m). Filtered pairs
// follow the reduced one-line delay law.
EventStream scan_pair_stream(const core::CombParams& comb, const SourceParams& source,
                             const core::DetectorParams& det_s, const core::DetectorParams& det_i,
                             const LinkParams& link, int m_signal, int m_idler);

}  // namespace bfc::sim
