#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bfc/core_model.hpp"
#include "bfc/eventsim.hpp"

namespace bfc::config {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct QkdConfig {
  double bin_s = 40e-9;
  int frame_bins = 16;
  std::vector<std::pair<double, double>> holevo_table;  // (visibility, bits)
  double filter_transmission_db = 2.6;                  // one-pass filter loss
  std::vector<double> visibilities;  // per anti-diagonal pair, low m first
};

struct AnalysisConfig {
  int tau_step_div = 64;
  double tau_span_factor = 20.0;
  double hist_bin_s = 1e-12;
  double hist_span_s = 25e-9;
  double window_s = 2e-9;
  int franson_bins = 16;
  double background_ratio = 0.0;
  double bpf_fwhm_hz = 0.0;  // 0 = auto: 0.8 * fsr (single-line selection)
  std::vector<double> fit_reference;  // percent visibilities per recurrence
  int spectrum_points = 2001;
  double spectrum_span_hz = 0.0;  // 0 = auto from comb extent
  std::vector<double> schmidt_weights;
  double jsi_cross_talk = 0.0;
  double scan_duration_s = 0.0;  // 0 = source duration
  bool emit_truth = true;
  double hbt_split = 0.0;  // 0 = no beamsplitter stage
  QkdConfig qkd;
};

struct Scenario {
  core::CombParams comb;
  core::DetectorParams det_signal;
  core::DetectorParams det_idler;
  sim::SourceParams source;
  sim::LinkParams link;
  AnalysisConfig analysis;
};

Scenario default_scenario();

// Parse document text (JSON, unit-suffixed keys) over the defaults. Unknown
// keys, type errors, and invariant violations raise ConfigError with the
// dotted key path; parse errors carry a line number.
Scenario parse_config_text(const std::string& text);

// File + `--set key.path=value` pipeline; path nullopt = builtin defaults.
Scenario load_scenario(const std::optional<std::string>& path,
                       std::span<const std::string> overrides);

// Resolved config as a compact single-line document (keys sorted); feeding it
// back through parse_config_text reproduces the scenario.
std::string scenario_json(const Scenario& scenario);

// Standard artifact comment lines: tool/version stamp + config echo.
std::vector<std::string> artifact_comments(const Scenario& scenario);

}  // namespace bfc::config
