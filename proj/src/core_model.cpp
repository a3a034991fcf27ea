#include "bfc/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bfc/units.hpp"

namespace bfc::core {

double CombParams::line_spacing() const { return kTwoPi * fsr_hz; }

double CombParams::half_linewidth() const { return kPi * linewidth_fwhm_hz; }

// 1.39 makes the sinc^2 envelope's FWHM equal the configured phase-matching
// bandwidth: sinc^2(1.39) = 1/2.
double CombParams::envelope_time() const { return 1.39 / (kPi * phase_matching_fwhm_hz); }

double CombParams::round_trip() const { return 1.0 / fsr_hz; }

void CombParams::validate() const {
  if (!(fsr_hz > 0.0) || !(linewidth_fwhm_hz > 0.0) || fsr_hz <= linewidth_fwhm_hz)
    throw std::invalid_argument("comb: requires fsr_hz > linewidth_fwhm_hz > 0");
  if (n_lines < 1 || n_lines % 2 == 0)
    throw std::invalid_argument("comb: n_lines must be odd and >= 1");
  if (!(phase_matching_fwhm_hz > 0.0))
    throw std::invalid_argument("comb: phase_matching_fwhm_hz must be > 0");
  if (!(center_wavelength_nm > 0.0))
    throw std::invalid_argument("comb: center_wavelength_nm must be > 0");
}

void DetectorParams::validate() const {
  if (jitter_rms_s < 0.0) throw std::invalid_argument("detector: jitter_rms_s must be >= 0");
  if (efficiency < 0.0 || efficiency > 1.0)
    throw std::invalid_argument("detector: efficiency must be in [0, 1]");
  if (dark_rate_hz < 0.0) throw std::invalid_argument("detector: dark_rate_hz must be >= 0");
}

double CorrelationTrace::integral() const {
  if (values.size() < 2) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  sum -= 0.5 * (values.front() + values.back());
  return sum * tau_step_s;
}

double raw_spectral_density(const CombParams& comb, double omega_rad_s) {
  const double envelope = sinc_sq(comb.envelope_time() * omega_rad_s);
  if (comb.filter_mode == FilterMode::Unfiltered) return envelope;

  const double dw = comb.half_linewidth();
  const double spacing = comb.line_spacing();
  const int n = comb.side_lines();
  const bool doubly = comb.filter_mode == FilterMode::DoublyFiltered;
  double lines = 0.0;
  for (int m = -n; m <= n; ++m) {
    const double nu = omega_rad_s - m * spacing;
    const double lorentzian = 1.0 / (dw * dw + nu * nu);
    lines += doubly ? lorentzian * lorentzian : lorentzian;
  }
  return envelope * lines;
}

// The global maximum sits at zero detuning: the envelope peaks there and the
// symmetric line sum is largest on the central line.
double spectral_density(const CombParams& comb, double omega_rad_s) {
  return raw_spectral_density(comb, omega_rad_s) / raw_spectral_density(comb, 0.0);
}

TauGrid default_tau_grid(const CombParams& comb, int div, double span_factor, double pad_s) {
  const double step = comb.round_trip() / static_cast<double>(div);
  double lo = 0.0;
  double hi = 0.0;
  if (comb.filter_mode == FilterMode::Unfiltered) {
    hi = 2.0 * comb.envelope_time();
    lo = -hi;
  } else {
    hi = span_factor / comb.half_linewidth();
    lo = comb.filter_mode == FilterMode::DoublyFiltered ? -hi : 0.0;
  }
  lo -= pad_s;
  hi += pad_s;
  const auto count = static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1;
  return TauGrid{lo, step, count};
}

CorrelationTrace temporal_wavefunction(const CombParams& comb, const TauGrid& grid) {
  const double spacing = comb.line_spacing();
  const double dw = comb.half_linewidth();
  const double a = comb.envelope_time();
  const int n = comb.side_lines();

  CorrelationTrace out;
  out.tau_start_s = grid.start_s;
  out.tau_step_s = grid.step_s;
  out.kind = TraceKind::Amplitude;
  out.values.resize(grid.count);

  for (std::size_t i = 0; i < grid.count; ++i) {
    const double tau = grid.start_s + grid.step_s * static_cast<double>(i);
    double v = 0.0;
    switch (comb.filter_mode) {
      case FilterMode::SinglyFiltered:
        if (tau >= 0.0) {
          double comb_sum = 0.0;
          for (int m = -n; m <= n; ++m)
            comb_sum += sinc(a * m * spacing) * std::cos(m * spacing * tau);
          v = std::exp(-dw * tau) * comb_sum;
        }
        break;
      case FilterMode::DoublyFiltered: {
        double comb_sum = 0.0;
        for (int m = -n; m <= n; ++m)
          comb_sum += sinc(a * m * spacing) * std::cos(m * spacing * tau);
        v = std::exp(-dw * std::abs(tau)) * comb_sum;
        break;
      }
      case FilterMode::Unfiltered:
        // Flat-phase sinc amplitude: a box of width 2A in delay.
        v = std::abs(tau) <= a ? 1.0 : 0.0;
        break;
    }
    out.values[i] = v;
  }

  double peak = 0.0;
  for (double v : out.values) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : out.values) v /= peak;
  return out;
}

CorrelationTrace convolve_gaussian(const CorrelationTrace& in, double sigma_s) {
  if (sigma_s <= 0.0) return in;
  const double h = in.tau_step_s;
  const auto half = static_cast<long>(std::ceil(6.0 * sigma_s / h));

  std::vector<double> kernel(static_cast<std::size_t>(2 * half + 1));
  double norm = 0.0;
  for (long j = -half; j <= half; ++j) {
    const double x = static_cast<double>(j) * h / sigma_s;
    const double w = std::exp(-0.5 * x * x);
    kernel[static_cast<std::size_t>(j + half)] = w;
    norm += w;
  }
  // Discrete renormalization: the smear redistributes mass, never changes it.
  for (double& w : kernel) w /= norm;

  CorrelationTrace out = in;
  const auto n = static_cast<long>(in.values.size());
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    const long j_lo = std::max(-half, i - (n - 1));
    const long j_hi = std::min(half, i);
    for (long j = j_lo; j <= j_hi; ++j)
      acc += kernel[static_cast<std::size_t>(j + half)] * in.values[static_cast<std::size_t>(i - j)];
    out.values[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

CorrelationTrace cross_correlation(const CombParams& comb, const DetectorParams& det_a,
                                   const DetectorParams& det_b, const TauGrid& grid) {
  const double tj = combined_jitter(det_a.jitter_rms_s, det_b.jitter_rms_s);
  if (tj > 0.0) {
    const double max_step = std::min(comb.round_trip() / 20.0, tj / 5.0);
    if (grid.step_s > max_step)
      throw ResolutionError("cross_correlation: grid step " + std::to_string(grid.step_s) +
                            " s exceeds resolution bound " + std::to_string(max_step) + " s");
  }

  CorrelationTrace intensity = temporal_wavefunction(comb, grid);
  intensity.kind = TraceKind::Intensity;
  for (double& v : intensity.values) v *= v;

  CorrelationTrace out = tj > 0.0 ? convolve_gaussian(intensity, tj) : std::move(intensity);
  out.kind = TraceKind::Intensity;
  double peak = 0.0;
  for (double v : out.values) peak = std::max(peak, v);
  if (peak > 0.0)
    for (double& v : out.values) v /= peak;
  return out;
}

double combined_jitter(double jitter_a_s, double jitter_b_s) {
  return std::hypot(jitter_a_s, jitter_b_s);
}

}  // namespace bfc::core
