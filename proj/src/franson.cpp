#include "bfc/franson.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "bfc/rng.hpp"
#include "bfc/units.hpp"

namespace bfc::franson {

namespace {

// Panel layout for the spectral integrals: boundaries at every line center
// and every midpoint between lines, so each Lorentzian peak sits on a panel
// edge (Gauss-Kronrod nodes are interior; a peak at an edge is benign).
std::vector<double> base_panel_edges(const core::CombParams& comb) {
  std::vector<double> edges{0.0};
  const double spacing = comb.line_spacing();
  const int n = comb.side_lines();
  for (int m = 1; m <= n; ++m) {
    edges.push_back((m - 0.5) * spacing);
    edges.push_back(m * spacing);
  }
  edges.push_back((n + 0.5) * spacing);
  return edges;
}

// Upper bound on the density mass beyond w (nonnegative integrand, even).
double tail_mass_bound(const core::CombParams& comb, double w) {
  const double a = comb.envelope_time();
  const int n = comb.side_lines();
  const double spacing = comb.line_spacing();
  const double kappa = 1.0 - n * spacing / w;  // (omega - m spacing) >= kappa*omega beyond w
  const double lines = 2.0 * n + 1.0;
  switch (comb.filter_mode) {
    case core::FilterMode::SinglyFiltered:
      return lines / (3.0 * a * a * kappa * kappa * w * w * w);
    case core::FilterMode::DoublyFiltered: {
      const double k4 = kappa * kappa * kappa * kappa;
      return lines / (5.0 * a * a * k4 * w * w * w * w * w);
    }
    case core::FilterMode::Unfiltered:
      return 1.0 / (a * a * w);
  }
  return 0.0;
}

struct Integrals {
  double numerator = 0.0;
  double denominator = 0.0;
  double error = 0.0;
};

// One-sided integrals of S_raw(omega)*cos(omega*dtau) and S_raw(omega) over
// [0, W], with W extended until the analytic tail bound is negligible
// relative to the accumulated denominator.
Integrals filtered_integrals(const core::CombParams& comb, double dtau) {
  const auto num_f = [&](double w) {
    return core::raw_spectral_density(comb, w) * std::cos(w * dtau);
  };
  const auto den_f = [&](double w) { return core::raw_spectral_density(comb, w); };

  // Panels wider than half a cosine period defeat the quadrature's error
  // estimate (the oscillation aliases through the fixed node set), so every
  // span is subdivided to at most w_max before it reaches the integrator.
  const double spacing = comb.line_spacing();
  double w_max = 0.5 * spacing;
  if (dtau > 0.0) w_max = std::min(w_max, kPi / dtau);

  Integrals acc;
  const auto add_span = [&](double lo, double hi) {
    const int pieces = std::max(1, static_cast<int>(std::ceil((hi - lo) / w_max)));
    double piece_sum = 0.0;
    for (int k = 0; k < pieces; ++k) {
      const double a = lo + (hi - lo) * k / pieces;
      const double b = lo + (hi - lo) * (k + 1) / pieces;
      piece_sum += quad::integrate_panel(den_f, a, b, &acc.error);
      acc.numerator += quad::integrate_panel(num_f, a, b, &acc.error);
    }
    acc.denominator += piece_sum;
    return piece_sum;
  };

  const std::vector<double> edges = base_panel_edges(comb);
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) add_span(edges[i], edges[i + 1]);

  double cur = edges.back();
  for (int iter = 0;; ++iter) {
    if (iter >= 20000)
      throw QuadratureError("recurrence_visibility: tail extension failed to converge");
    const double piece = add_span(cur, cur + 0.5 * spacing);
    cur += 0.5 * spacing;
    const double tol = 1e-9 * acc.denominator;
    if (tail_mass_bound(comb, cur) < tol && std::abs(piece) < tol) break;
  }
  return acc;
}

double golden_minimize(const std::function<double(double)>& f, double lo, double hi) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < 200; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

std::array<double, 9> invert3(const std::array<double, 9>& m) {
  const double det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
                     m[2] * (m[3] * m[7] - m[4] * m[6]);
  if (det == 0.0) throw FitDivergence("fit_visibility: singular design matrix");
  const double inv = 1.0 / det;
  return {(m[4] * m[8] - m[5] * m[7]) * inv, (m[2] * m[7] - m[1] * m[8]) * inv,
          (m[1] * m[5] - m[2] * m[4]) * inv, (m[5] * m[6] - m[3] * m[8]) * inv,
          (m[0] * m[8] - m[2] * m[6]) * inv, (m[2] * m[3] - m[0] * m[5]) * inv,
          (m[3] * m[7] - m[4] * m[6]) * inv, (m[1] * m[6] - m[0] * m[7]) * inv,
          (m[0] * m[4] - m[1] * m[3]) * inv};
}

}  // namespace

double recurrence_visibility(const core::CombParams& comb, double delta_tau_s) {
  comb.validate();

  // The unfiltered density is a bare sinc^2 whose transform is the closed-form
  // triangle; quadrature over its 1/omega^2 tail would converge hopelessly
  // slowly, so use the exact result.
  if (comb.filter_mode == core::FilterMode::Unfiltered) {
    const double x = std::abs(delta_tau_s) / (2.0 * comb.envelope_time());
    return x >= 1.0 ? 0.0 : 1.0 - x;
  }

  const Integrals acc = filtered_integrals(comb, delta_tau_s);
  if (acc.error > 1e-8 * acc.denominator)
    throw QuadratureError("recurrence_visibility: quadrature error " + std::to_string(acc.error) +
                          " exceeds tolerance at delta_tau = " + std::to_string(delta_tau_s));
  return std::clamp(std::abs(acc.numerator) / acc.denominator, 0.0, 1.0);
}

VisibilityTable recurrence_table(const core::CombParams& comb, int n_bins,
                                 double background_ratio) {
  if (n_bins < 1) throw std::invalid_argument("recurrence_table: n_bins must be >= 1");
  if (background_ratio < 0.0)
    throw std::invalid_argument("recurrence_table: background_ratio must be >= 0");
  const double dt = comb.round_trip();
  VisibilityTable table;
  for (int n = 0; n < n_bins; ++n) {
    const double v = recurrence_visibility(comb, n * dt);
    table.bins.push_back(std::to_string(n));
    table.v_subtracted.push_back(v);
    table.v_raw.push_back(v / (1.0 + background_ratio));
    table.sigma.push_back(0.0);
  }
  return table;
}

DecayFit fit_decay_rate(std::span<const double> reference, const core::CombParams& comb) {
  if (reference.size() < 2)
    throw std::invalid_argument("fit_decay_rate: need at least two reference bins");
  if (!(reference[0] > 0.0))
    throw std::invalid_argument("fit_decay_rate: reference[0] must be positive");

  std::vector<double> r(reference.begin(), reference.end());
  for (double& v : r) v /= reference[0];

  const auto sse = [&](double x) {
    double s = 0.0;
    for (std::size_t n = 0; n < r.size(); ++n) {
      const double d = std::exp(-x * static_cast<double>(n)) - r[n];
      s += d * d;
    }
    return s;
  };
  const double rate = golden_minimize(sse, 1e-4, 2.0);
  return DecayFit{rate, rate / (kPi * comb.round_trip())};
}

VisibilityTable fitted_decay_table(std::span<const double> reference,
                                   const core::CombParams& comb, int n_bins,
                                   double background_ratio) {
  if (n_bins < 1) throw std::invalid_argument("fitted_decay_table: n_bins must be >= 1");
  const DecayFit fit = fit_decay_rate(reference, comb);
  VisibilityTable table;
  for (int n = 0; n < n_bins; ++n) {
    const double v = std::exp(-fit.rate_per_bin * n);
    table.bins.push_back(std::to_string(n));
    table.v_subtracted.push_back(v);
    table.v_raw.push_back(v / (1.0 + background_ratio));
    table.sigma.push_back(0.0);
  }
  return table;
}

core::CombParams reduced_single_line(const core::CombParams& comb) {
  core::CombParams reduced = comb;
  reduced.n_lines = 1;
  return reduced;
}

double frequency_pair_visibility(const core::CombParams& comb, int m_signal, int m_idler,
                                 double bpf_fwhm_hz) {
  const int n = comb.side_lines();
  if (std::abs(m_signal) > n || std::abs(m_idler) > n)
    throw BinOutOfRange("frequency_pair_visibility: |m| exceeds comb side lines");
  if (!(bpf_fwhm_hz > 0.0) || bpf_fwhm_hz >= comb.fsr_hz)
    throw std::invalid_argument(
        "frequency_pair_visibility: bandpass must select a single line (bpf < fsr)");
  // Energy conservation pins idler bin -m to signal bin +m; any other pairing
  // carries no two-photon coherence.
  if (m_signal + m_idler != 0) return 0.0;
  return recurrence_visibility(reduced_single_line(comb), 0.0);
}

FringeCurve synthesize_fringe(double true_v, double background_ratio,
                              std::span<const double> phase_rad, double scale,
                              std::optional<std::uint64_t> poisson_seed) {
  if (true_v < 0.0 || true_v > 1.0)
    throw std::invalid_argument("synthesize_fringe: true_v must be in [0, 1]");
  if (background_ratio < 0.0 || scale < 0.0)
    throw std::invalid_argument("synthesize_fringe: background_ratio and scale must be >= 0");

  FringeCurve fringe;
  fringe.phase_rad.assign(phase_rad.begin(), phase_rad.end());
  fringe.true_v = true_v;
  fringe.background = background_ratio;
  fringe.counts.reserve(phase_rad.size());
  for (double phi : phase_rad)
    fringe.counts.push_back(scale * (1.0 + true_v * std::cos(phi)) + scale * background_ratio);

  if (poisson_seed) {
    rng::Xoshiro256 gen(rng::derive_seed(*poisson_seed, rng::kStreamFringe, 0));
    for (double& c : fringe.counts) c = static_cast<double>(gen.poisson(c));
  }
  return fringe;
}

VisFit fit_visibility(const FringeCurve& fringe, bool subtract_background) {
  const std::size_t n = fringe.counts.size();
  if (n < 8 || fringe.phase_rad.size() != n)
    throw InsufficientSamples("fit_visibility: need >= 8 phase samples");
  const auto [lo, hi] =
      std::minmax_element(fringe.phase_rad.begin(), fringe.phase_rad.end());
  if (*hi - *lo < kTwoPi - 1e-9)
    throw InsufficientSamples("fit_visibility: phase samples must span >= 2*pi");

  // Linear least squares on counts = b0 + b1 cos(phi) + b2 sin(phi).
  std::array<double, 9> xtx{};
  std::array<double, 3> xty{};
  for (std::size_t i = 0; i < n; ++i) {
    const std::array<double, 3> row{1.0, std::cos(fringe.phase_rad[i]),
                                    std::sin(fringe.phase_rad[i])};
    for (int r = 0; r < 3; ++r) {
      xty[r] += row[r] * fringe.counts[i];
      for (int c = 0; c < 3; ++c) xtx[3 * r + c] += row[r] * row[c];
    }
  }
  const std::array<double, 9> inv = invert3(xtx);
  std::array<double, 3> beta{};
  for (int r = 0; r < 3; ++r)
    beta[r] = inv[3 * r] * xty[0] + inv[3 * r + 1] * xty[1] + inv[3 * r + 2] * xty[2];

  const double offset = beta[0];
  const double amp = std::hypot(beta[1], beta[2]);
  if (!(offset > 0.0)) throw FitDivergence("fit_visibility: nonpositive fitted offset");

  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double model =
        beta[0] + beta[1] * std::cos(fringe.phase_rad[i]) + beta[2] * std::sin(fringe.phase_rad[i]);
    const double d = fringe.counts[i] - model;
    ssr += d * d;
  }
  if (std::sqrt(ssr / static_cast<double>(n)) > 0.5 * offset)
    throw FitDivergence("fit_visibility: residual exceeds half the fitted offset");

  // Flat floor B = offset*ratio/(1+ratio); removing it rescales the ratio.
  const double k = subtract_background ? 1.0 + fringe.background : 1.0;
  const double v = std::clamp(k * amp / offset, 0.0, 1.0);

  // Delta-method standard error from the fit covariance.
  const double s2 = ssr / static_cast<double>(n - 3);
  double sigma = 0.0;
  if (amp > 0.0) {
    const std::array<double, 3> grad{-k * amp / (offset * offset), k * beta[1] / (amp * offset),
                                     k * beta[2] / (amp * offset)};
    double q = 0.0;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) q += grad[r] * inv[3 * r + c] * grad[c];
    sigma = std::sqrt(std::max(0.0, q * s2));
  } else {
    sigma = k * std::sqrt(std::max(0.0, (inv[4] + inv[8]) * s2)) / offset;
  }
  return VisFit{v, sigma};
}

bool bell_violation(double visibility) {
  if (visibility < 0.0 || visibility > 1.0)
    throw std::invalid_argument("bell_violation: visibility must be in [0, 1]");
  return visibility > 1.0 / std::numbers::sqrt2;
}

}  // namespace bfc::franson
