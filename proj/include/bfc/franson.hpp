#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfc/core_model.hpp"
#include "bfc/quadrature.hpp"

namespace bfc::franson {

using bfc::QuadratureError;

struct FitDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InsufficientSamples : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BinOutOfRange : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One visibility per analysis bin; bins carry their identifier as text so the
// same table shape serves time bins ("3") and frequency pairs ("1:-1").
struct VisibilityTable {
  std::vector<std::string> bins;
  std::vector<double> v_raw;
  std::vector<double> v_subtracted;
  std::vector<double> sigma;

  std::size_t size() const { return bins.size(); }
};

struct FringeCurve {
  std::vector<double> phase_rad;
  std::vector<double> counts;
  std::optional<double> true_v;
  double background = 0.0;  // flat accidental floor as a fraction of the signal scale
};

// |FT of the spectral density| at delay shift delta_tau, normalized by the
// zero-shift value. Adaptive quadrature; panels split at the comb lines.
double recurrence_visibility(const core::CombParams& comb, double delta_tau_s);

// Visibility per integer time bin n = 0..n_bins-1 at delays n*round_trip.
// v_raw applies the flat-background model: v_raw = v_sub / (1 + ratio).
VisibilityTable recurrence_table(const core::CombParams& comb, int n_bins,
                                 double background_ratio = 0.0);

// Single-rate exponential decay law fitted to reference visibilities by least
// squares (reference normalized by its first entry; one free decay rate).
struct DecayFit {
  double rate_per_bin;            // fitted ln-decay per round trip
  double effective_linewidth_hz;  // the rate read back as a line FWHM
};
DecayFit fit_decay_rate(std::span<const double> reference, const core::CombParams& comb);

// Table from the fitted decay law evaluated on n_bins integer bins.
VisibilityTable fitted_decay_table(std::span<const double> reference,
                                   const core::CombParams& comb, int n_bins,
                                   double background_ratio = 0.0);

// Reduced one-line comb used once a bandpass selects a single line pair.
core::CombParams reduced_single_line(const core::CombParams& comb);

// Visibility of a bandpass-selected frequency-bin pair: zero for asymmetric
// pairs (energy mismatch), zero-shift visibility of the reduced one-line
// spectrum for symmetric ones.
double frequency_pair_visibility(const core::CombParams& comb, int m_signal, int m_idler,
                                 double bpf_fwhm_hz);

// Fixture generator: counts = scale*(1 + v cos(phase)) + scale*background,
// optionally Poisson-perturbed under a seed.
FringeCurve synthesize_fringe(double true_v, double background_ratio,
                              std::span<const double> phase_rad, double scale,
                              std::optional<std::uint64_t> poisson_seed = std::nullopt);

struct VisFit {
  double v = 0.0;
  double sigma = 0.0;
};

// Least-squares cosine fit of the fringe; with subtract_background the
// curve's known flat floor is removed before forming the visibility ratio.
VisFit fit_visibility(const FringeCurve& fringe, bool subtract_background);

// Strict CHSH-style threshold.
bool bell_violation(double visibility);

}  // namespace bfc::franson
