#pragma once

#include <deque>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bfc/core_model.hpp"
#include "bfc/eventsim.hpp"
#include "bfc/schmidt.hpp"

namespace bfc::tagger {

struct UnknownChannel : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyAccidentalRegion : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoHeralds : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IncompleteGrid : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Streaming coincidence histogrammer: push time-ordered records (whole stream
// or in chunks — the result is identical), then read the histogram. Delay
// convention is t_b - t_a; bin values are counts at bin centers.
class CoincidenceAccumulator {
 public:
  CoincidenceAccumulator(sim::Channel ch_a, sim::Channel ch_b, double bin_width_s, double span_s);

  void push(const sim::EventRecord& record);
  core::CorrelationTrace finish() const;

 private:
  void record_delay(double delta_t);

  sim::Channel ch_a_;
  sim::Channel ch_b_;
  double bin_width_s_;
  double span_s_;
  std::deque<double> recent_a_;
  std::deque<double> recent_b_;
  std::vector<double> counts_;
};

core::CorrelationTrace coincidence_histogram(const sim::EventStream& stream, sim::Channel ch_a,
                                             sim::Channel ch_b, double bin_width_s, double span_s);

// Number of (a, b) pairs with |t_b - t_a| <= window/2.
std::size_t coincidence_count(const sim::EventStream& stream, sim::Channel ch_a,
                              sim::Channel ch_b, double window_s);

// Far-wing delay ranges clear of the correlation support.
std::vector<std::pair<double, double>> default_accidental_region(const core::CombParams& comb,
                                                                 double span_s);

// Histogram divided by its mean accidental level: dimensionless g2 with the
// accidental-region mean pinned at 1.
core::CorrelationTrace estimate_g2(const core::CorrelationTrace& hist,
                                   std::span<const std::pair<double, double>> accidental_region);

struct HeraldedG2 {
  double g2h = 0.0;
  double sigma = 0.0;
  long n_heralds = 0;
  long n_ab = 0;
  long n_ac = 0;
  long n_abc = 0;
};

// N_ABC*N_A/(N_AB*N_AC) over the split-idler channels, binary coincidence per
// herald within +-window/2. Sigma from independent-Poisson propagation.
HeraldedG2 heralded_g2_zero(const sim::EventStream& stream, double window_s);

struct ScanRun {
  int m_signal = 0;
  int m_idler = 0;
  sim::EventStream stream;
};

// JSI from a full grid of bandpass-scan runs: each cell is that run's
// coincidence count within the window.
schmidt::JSIMatrix assemble_jsi(const std::vector<ScanRun>& runs, double window_s);

// Median spacing of local maxima (parabolic sub-bin refinement). Candidates
// must dominate a +-min_separation/2 neighborhood and clear a height floor
// relative to the trace maximum.
double estimate_peak_spacing(const core::CorrelationTrace& trace, double min_separation_s = 0.0,
                             double min_height_rel = 0.05);

}  // namespace bfc::tagger
