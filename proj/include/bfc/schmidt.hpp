#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "bfc/core_model.hpp"

namespace bfc::schmidt {

struct AllZeroWeights : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidOrdering : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BinOutOfRange : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SchmidtResult {
  std::vector<double> eigenvalues;  // descending, sums to 1
  double schmidt_number = 1.0;      // inverse participation ratio
  long dimension_lower_bound = 1;   // floor(K^2)
};

// Joint spectral intensity on the (m_signal, m_idler) bin grid, m in [-N..N].
struct JSIMatrix {
  int side_lines = 0;
  std::vector<double> weights;  // row-major, signal-major, (2N+1)^2 entries

  int dim() const { return 2 * side_lines + 1; }
  double& at(int m_signal, int m_idler);
  double at(int m_signal, int m_idler) const;
};

SchmidtResult schmidt_from_weights(std::span<const double> weights);

struct JsiSchmidtResult {
  SchmidtResult schmidt;
  double contamination = 0.0;  // off-anti-diagonal mass fraction, excluded from K
};

// Schmidt bookkeeping from the symmetric-pair weights w_m = jsi[m, -m].
JsiSchmidtResult schmidt_from_jsi(const JSIMatrix& jsi);

long dimension_lower_bound(double k_signal, double k_idler);

// Model JSI: anti-diagonal follows the phase-matching envelope, everything
// else is a uniform cross-talk fraction of the nearest anti-diagonal weight.
JSIMatrix ideal_jsi(const core::CombParams& comb, double cross_talk = 0.0);

struct PlanResult {
  long n_f = 0;
  long n_t = 0;
  double product = 0.0;
  bool consistent = false;  // n_f*n_t within 10% of product
};

// Time-bin x frequency-bin budget for a bandwidth/fsr/linewidth hierarchy.
PlanResult plan_dimensionality(double b_spdc_hz, double fsr_hz, double linewidth_fwhm_hz);

}  // namespace bfc::schmidt
