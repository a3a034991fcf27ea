#include "bfc/schmidt.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "bfc/units.hpp"

namespace bfc::schmidt {

double& JSIMatrix::at(int m_signal, int m_idler) {
  if (std::abs(m_signal) > side_lines || std::abs(m_idler) > side_lines)
    throw BinOutOfRange("jsi: bin index outside [-N, N]");
  return weights[static_cast<std::size_t>((m_signal + side_lines) * dim() +
                                          (m_idler + side_lines))];
}

double JSIMatrix::at(int m_signal, int m_idler) const {
  return const_cast<JSIMatrix*>(this)->at(m_signal, m_idler);
}

SchmidtResult schmidt_from_weights(std::span<const double> weights) {
  if (weights.empty()) throw AllZeroWeights("schmidt_from_weights: no weights");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("schmidt_from_weights: negative weight");
    total += w;
  }
  if (total <= 0.0) throw AllZeroWeights("schmidt_from_weights: all weights zero");

  SchmidtResult result;
  result.eigenvalues.reserve(weights.size());
  for (double w : weights) result.eigenvalues.push_back(w / total);
  std::sort(result.eigenvalues.begin(), result.eigenvalues.end(), std::greater<>());

  double sum_sq = 0.0;
  for (double lambda : result.eigenvalues) sum_sq += lambda * lambda;
  result.schmidt_number = 1.0 / sum_sq;
  result.dimension_lower_bound =
      static_cast<long>(std::floor(result.schmidt_number * result.schmidt_number));
  return result;
}

JsiSchmidtResult schmidt_from_jsi(const JSIMatrix& jsi) {
  const int n = jsi.side_lines;
  if (jsi.weights.size() != static_cast<std::size_t>(jsi.dim()) * jsi.dim())
    throw std::invalid_argument("schmidt_from_jsi: weight count does not match dimension");

  std::vector<double> pair_weights;
  double pair_mass = 0.0;
  double total_mass = 0.0;
  for (double w : jsi.weights) {
    if (w < 0.0) throw std::invalid_argument("schmidt_from_jsi: negative weight");
    total_mass += w;
  }
  for (int m = -n; m <= n; ++m) {
    const double w = jsi.at(m, -m);
    pair_weights.push_back(w);
    pair_mass += w;
  }

  JsiSchmidtResult result;
  result.schmidt = schmidt_from_weights(pair_weights);
  result.contamination = total_mass > 0.0 ? (total_mass - pair_mass) / total_mass : 0.0;
  return result;
}

long dimension_lower_bound(double k_signal, double k_idler) {
  if (k_signal < 1.0 || k_idler < 1.0)
    throw std::invalid_argument("dimension_lower_bound: Schmidt numbers must be >= 1");
  return static_cast<long>(std::floor(k_signal * k_idler));
}

JSIMatrix ideal_jsi(const core::CombParams& comb, double cross_talk) {
  comb.validate();
  if (cross_talk < 0.0 || cross_talk >= 1.0)
    throw std::invalid_argument("ideal_jsi: cross_talk must be in [0, 1)");

  const int n = comb.side_lines();
  const double a = comb.envelope_time();
  const double spacing = comb.line_spacing();
  JSIMatrix jsi;
  jsi.side_lines = n;
  jsi.weights.assign(static_cast<std::size_t>(jsi.dim()) * jsi.dim(), 0.0);

  const auto line_weight = [&](int m) { return sinc_sq(a * m * spacing); };
  for (int ms = -n; ms <= n; ++ms) {
    for (int mi = -n; mi <= n; ++mi) {
      if (mi == -ms) {
        jsi.at(ms, mi) = line_weight(ms);
      } else if (cross_talk > 0.0) {
        // Nearest anti-diagonal point in L1 distance: s = (ms - mi)/2.
        const int s = std::clamp((ms - mi + (ms - mi >= 0 ? 1 : -1)) / 2, -n, n);
        jsi.at(ms, mi) = cross_talk * line_weight(s);
      }
    }
  }
  return jsi;
}

PlanResult plan_dimensionality(double b_spdc_hz, double fsr_hz, double linewidth_fwhm_hz) {
  if (!(b_spdc_hz > fsr_hz && fsr_hz > linewidth_fwhm_hz && linewidth_fwhm_hz > 0.0))
    throw InvalidOrdering("plan_dimensionality: requires bandwidth > fsr > linewidth > 0");

  PlanResult plan;
  plan.n_f = static_cast<long>(std::floor(b_spdc_hz / fsr_hz));
  plan.n_t = static_cast<long>(std::floor(fsr_hz / linewidth_fwhm_hz));
  // pi * bandwidth / half-linewidth in angular units reduces to this ratio.
  plan.product = b_spdc_hz / linewidth_fwhm_hz;
  const double achieved = static_cast<double>(plan.n_f) * static_cast<double>(plan.n_t);
  plan.consistent = std::abs(achieved - plan.product) / plan.product <= 0.1;
  return plan;
}

}  // namespace bfc::schmidt
