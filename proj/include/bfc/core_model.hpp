#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace bfc::core {

enum class FilterMode { SinglyFiltered, DoublyFiltered, Unfiltered };

// Comb geometry plus filter configuration. Config-facing units are linear
// frequencies in Hz; the angular quantities used by the math are derived
// accessors so the rad/s-vs-Hz conversion lives in exactly one place.
struct CombParams {
  double fsr_hz = 0.0;
  double linewidth_fwhm_hz = 0.0;
  double phase_matching_fwhm_hz = 0.0;
  int n_lines = 1;  // odd; lines m = -N..N
  double center_wavelength_nm = 0.0;
  FilterMode filter_mode = FilterMode::SinglyFiltered;

  double line_spacing() const;    // rad/s between comb lines
  double half_linewidth() const;  // rad/s; line FWHM is twice this
  double envelope_time() const;   // seconds; phase-matching sinc argument scale
  double round_trip() const;      // seconds; 1/fsr
  int side_lines() const { return (n_lines - 1) / 2; }

  void validate() const;  // throws std::invalid_argument
};

struct DetectorParams {
  double jitter_rms_s = 0.0;
  double efficiency = 1.0;
  double dark_rate_hz = 0.0;

  void validate() const;  // throws std::invalid_argument
};

enum class TraceKind { Amplitude, Intensity, Histogram, Fringe };

// Uniformly sampled function of relative delay tau. Amplitude traces are
// real-valued in this model (the comb sum is a cosine series).
struct CorrelationTrace {
  double tau_start_s = 0.0;
  double tau_step_s = 0.0;
  std::vector<double> values;
  TraceKind kind = TraceKind::Intensity;

  std::size_t size() const { return values.size(); }
  double tau(std::size_t i) const { return tau_start_s + tau_step_s * static_cast<double>(i); }
  double integral() const;  // trapezoid rule
};

struct TauGrid {
  double start_s = 0.0;
  double step_s = 0.0;
  std::size_t count = 0;
};

struct ResolutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filtered-comb spectral density at one angular detuning, normalized to 1 at
// the central-line peak.
double spectral_density(const CombParams& comb, double omega_rad_s);

// Same density without normalization; shared by the visibility integrals.
double raw_spectral_density(const CombParams& comb, double omega_rad_s);

// Grid covering the temporal support at round_trip/div resolution, truncated
// at span_factor half-linewidth decay times, optionally padded on both ends.
TauGrid default_tau_grid(const CombParams& comb, int div = 64, double span_factor = 20.0,
                         double pad_s = 0.0);

CorrelationTrace temporal_wavefunction(const CombParams& comb, const TauGrid& grid);

// Area-preserving Gaussian smear (kernel truncated at 6 sigma, renormalized).
CorrelationTrace convolve_gaussian(const CorrelationTrace& in, double sigma_s);

// |psi|^2 smeared by the two detectors' combined jitter, unit peak.
CorrelationTrace cross_correlation(const CombParams& comb, const DetectorParams& det_a,
                                   const DetectorParams& det_b, const TauGrid& grid);

double combined_jitter(double jitter_a_s, double jitter_b_s);

}  // namespace bfc::core
