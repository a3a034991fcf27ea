#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bfc/config.hpp"
#include "bfc/core_model.hpp"
#include "bfc/csv.hpp"
#include "bfc/eventsim.hpp"
#include "bfc/franson.hpp"
#include "bfc/qkd.hpp"
#include "bfc/rng.hpp"
#include "bfc/schmidt.hpp"
#include "bfc/tagger.hpp"
#include "bfc/version.hpp"

namespace fs = std::filesystem;

namespace {

using bfc::config::Scenario;

std::ofstream open_artifact(const fs::path& out_dir, const std::string& name) {
  const fs::path path = out_dir / name;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw bfc::config::ConfigError("cannot open output file: " + path.string());
  std::cout << "wrote " << path.string() << "\n";
  return os;
}

double effective_bpf(const Scenario& s) {
  return s.analysis.bpf_fwhm_hz > 0.0 ? s.analysis.bpf_fwhm_hz : 0.8 * s.comb.fsr_hz;
}

double auto_spectrum_span(const bfc::core::CombParams& comb) {
  const double comb_extent = (comb.side_lines() + 0.5) * comb.line_spacing();
  const double envelope_zero = bfc::kPi / comb.envelope_time();
  return std::max(comb_extent, envelope_zero);
}

void run_spectrum(const Scenario& s, const fs::path& out_dir) {
  const auto comments = bfc::config::artifact_comments(s);
  const double span = s.analysis.spectrum_span_hz > 0.0
                          ? bfc::kTwoPi * s.analysis.spectrum_span_hz
                          : auto_spectrum_span(s.comb);
  const int n = s.analysis.spectrum_points;
  std::vector<double> omega(static_cast<std::size_t>(n));
  std::vector<double> value(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    omega[static_cast<std::size_t>(i)] = -span + 2.0 * span * i / (n - 1);
    value[static_cast<std::size_t>(i)] =
        bfc::core::spectral_density(s.comb, omega[static_cast<std::size_t>(i)]);
  }
  auto os = open_artifact(out_dir, "spectrum.csv");
  bfc::csv::write_spectrum(os, omega, value, comments);
}

void run_wavefunction(const Scenario& s, const fs::path& out_dir) {
  const auto comments = bfc::config::artifact_comments(s);
  const auto grid =
      bfc::core::default_tau_grid(s.comb, s.analysis.tau_step_div, s.analysis.tau_span_factor);
  const auto trace = bfc::core::temporal_wavefunction(s.comb, grid);
  auto os = open_artifact(out_dir, "wavefunction.csv");
  bfc::csv::write_trace(os, trace, comments);
}

void run_correlation(const Scenario& s, const fs::path& out_dir) {
  const auto comments = bfc::config::artifact_comments(s);
  const double sigma =
      bfc::core::combined_jitter(s.det_signal.jitter_rms_s, s.det_idler.jitter_rms_s);
  const auto grid = bfc::core::default_tau_grid(s.comb, s.analysis.tau_step_div,
                                                s.analysis.tau_span_factor, 6.0 * sigma);
  const auto trace = bfc::core::cross_correlation(s.comb, s.det_signal, s.det_idler, grid);
  auto os = open_artifact(out_dir, "correlation.csv");
  bfc::csv::write_trace(os, trace, comments);
}

void run_franson(const Scenario& s, const fs::path& out_dir) {
  const auto comments = bfc::config::artifact_comments(s);
  const auto table = bfc::franson::recurrence_table(s.comb, s.analysis.franson_bins,
                                                    s.analysis.background_ratio);
  {
    auto os = open_artifact(out_dir, "franson_recurrence.csv");
    bfc::csv::write_visibility(os, table, comments);
  }
  {
    bfc::franson::VisibilityTable pairs;
    const int n = s.comb.side_lines();
    for (int m = -n; m <= n; ++m) {
      const double v =
          bfc::franson::frequency_pair_visibility(s.comb, m, -m, effective_bpf(s));
      pairs.bins.push_back(std::to_string(m) + ":" + std::to_string(-m));
      pairs.v_subtracted.push_back(v);
      pairs.v_raw.push_back(v / (1.0 + s.analysis.background_ratio));
      pairs.sigma.push_back(0.0);
    }
    auto os = open_artifact(out_dir, "franson_pairs.csv");
    bfc::csv::write_visibility(os, pairs, comments);
  }
  if (!s.analysis.fit_reference.empty()) {
    const auto fit = bfc::franson::fit_decay_rate(s.analysis.fit_reference, s.comb);
    const auto fitted = bfc::franson::fitted_decay_table(
        s.analysis.fit_reference, s.comb, s.analysis.franson_bins, s.analysis.background_ratio);
    auto os = open_artifact(out_dir, "franson_fitted.csv");
    bfc::csv::write_visibility(os, fitted, comments);
    std::cout << "fitted_rate_per_bin=" << fit.rate_per_bin << "\n";
    std::cout << "fitted_effective_linewidth_ghz=" << fit.effective_linewidth_hz / 1e9 << "\n";
  }
}

void run_schmidt(const Scenario& s, const fs::path& out_dir) {
  const auto comments = bfc::config::artifact_comments(s);
  if (!s.analysis.schmidt_weights.empty()) {
    const auto result = bfc::schmidt::schmidt_from_weights(s.analysis.schmidt_weights);
    auto os = open_artifact(out_dir, "schmidt.csv");
    bfc::csv::write_schmidt(os, result, std::nullopt, comments);
    std::cout << "schmidt_number=" << result.schmidt_number << "\n";
    std::cout << "dimension_lower_bound=" << result.dimension_lower_bound << "\n";
    return;
  }
  const auto jsi = bfc::schmidt::ideal_jsi(s.comb, s.analysis.jsi_cross_talk);
  const auto result = bfc::schmidt::schmidt_from_jsi(jsi);
  {
    auto os = open_artifact(out_dir, "jsi.csv");
    bfc::csv::write_jsi(os, jsi, comments);
  }
  auto os = open_artifact(out_dir, "schmidt.csv");
  bfc::csv::write_schmidt(os, result.schmidt, result.contamination, comments);
  std::cout << "schmidt_number=" << result.schmidt.schmidt_number << "\n";
  std::cout << "dimension_lower_bound=" << result.schmidt.dimension_lower_bound << "\n";
  std::cout << "contamination=" << result.contamination << "\n";
}

void run_simulate(const Scenario& s, const fs::path& out_dir) {
  const auto comments = bfc::config::artifact_comments(s);
  auto stream = bfc::sim::generate_pairs(s.comb, s.source, s.det_signal, s.det_idler, s.link,
                                         /*n_workers=*/4);
  if (s.analysis.hbt_split > 0.0) {
    stream = bfc::sim::hbt_split(stream, s.analysis.hbt_split, s.source.seed);
  }
  auto os = open_artifact(out_dir, "events.csv");
  bfc::csv::write_events(os, stream, s.analysis.emit_truth, comments);
  std::cout << "records=" << stream.records.size() << "\n";
}

void run_analyze(const Scenario& s, const fs::path& out_dir, const std::string& events_path) {
  const auto comments = bfc::config::artifact_comments(s);
  std::ifstream in(events_path, std::ios::binary);
  if (!in) throw bfc::config::ConfigError("cannot open events file: " + events_path);
  auto stream = bfc::csv::read_events(in);
  stream.comb = s.comb;

  const auto hist =
      bfc::tagger::coincidence_histogram(stream, bfc::sim::Channel::SignalA,
                                         bfc::sim::Channel::IdlerB, s.analysis.hist_bin_s,
                                         s.analysis.hist_span_s);
  {
    auto os = open_artifact(out_dir, "histogram.csv");
    bfc::csv::write_trace(os, hist, comments);
  }
  try {
    const auto region = bfc::tagger::default_accidental_region(s.comb, s.analysis.hist_span_s);
    const auto g2 = bfc::tagger::estimate_g2(hist, region);
    auto os = open_artifact(out_dir, "g2.csv");
    bfc::csv::write_trace(os, g2, comments);
  } catch (const bfc::tagger::EmptyAccidentalRegion& e) {
    std::cout << "g2 skipped: " << e.what() << "\n";
  }
  const auto n_coinc = bfc::tagger::coincidence_count(
      stream, bfc::sim::Channel::SignalA, bfc::sim::Channel::IdlerB, s.analysis.window_s);
  std::cout << "coincidences=" << n_coinc << "\n";
  try {
    const double spacing =
        bfc::tagger::estimate_peak_spacing(hist, 0.5 * s.comb.round_trip());
    std::cout << "peak_spacing_ps=" << spacing * 1e12 << "\n";
  } catch (const std::exception& e) {
    std::cout << "peak spacing unavailable: " << e.what() << "\n";
  }
  const bool has_split =
      std::any_of(stream.records.begin(), stream.records.end(), [](const auto& r) {
        return r.channel == bfc::sim::Channel::IdlerB1 ||
               r.channel == bfc::sim::Channel::IdlerB2;
      });
  if (has_split) {
    const auto h = bfc::tagger::heralded_g2_zero(stream, s.analysis.window_s);
    std::cout << "heralded_g2=" << h.g2h << " sigma=" << h.sigma << "\n";
  }
}

void run_qkd(const Scenario& s, const fs::path& out_dir) {
  const auto comments = bfc::config::artifact_comments(s);
  const int n = s.comb.side_lines();
  const double duration =
      s.analysis.scan_duration_s > 0.0 ? s.analysis.scan_duration_s : s.source.duration_s;
  const auto n_pairs = static_cast<std::size_t>(2 * n + 1);
  const bool have_vis = s.analysis.qkd.visibilities.size() == n_pairs;

  std::vector<bfc::qkd::PairInput> pairs;
  for (int m = -n; m <= n; ++m) {
    auto src = s.source;
    src.duration_s = duration;
    src.seed = bfc::rng::derive_seed(s.source.seed, bfc::rng::kStreamScan,
                                     static_cast<std::uint64_t>(m + n));
    const auto stream =
        bfc::sim::scan_pair_stream(s.comb, src, s.det_signal, s.det_idler, s.link, m, -m);
    const auto alice = bfc::sim::channel_subset(stream, bfc::sim::Channel::SignalA);
    const auto bob = bfc::sim::channel_subset(stream, bfc::sim::Channel::IdlerB);

    bfc::qkd::PairInput input;
    input.label = std::to_string(m) + ":" + std::to_string(-m);
    try {
      const auto symbols = bfc::qkd::discretize(alice, bob, s.analysis.qkd.bin_s,
                                                s.analysis.qkd.frame_bins, s.analysis.window_s);
      input.coincidence_rate_hz = static_cast<double>(symbols.size()) / duration;
      input.pie_bits = bfc::qkd::pie_shannon(symbols.symbol_a, symbols.symbol_b);
    } catch (const bfc::qkd::NoCoincidences&) {
      input.coincidence_rate_hz = 0.0;
      input.pie_bits = 0.0;
    }
    input.visibility =
        have_vis ? s.analysis.qkd.visibilities[static_cast<std::size_t>(m + n)]
                 : bfc::franson::frequency_pair_visibility(s.comb, m, -m, effective_bpf(s));
    pairs.push_back(input);
  }

  bfc::qkd::HolevoModel model{s.analysis.qkd.holevo_table};
  const auto report = bfc::qkd::key_rate_report(pairs, s.analysis.qkd.frame_bins, model);
  auto os = open_artifact(out_dir, "keyrate.csv");
  bfc::csv::write_keyrate(os, report, comments);
  std::cout << "total_cps=" << report.total.coincidence_rate_hz << "\n";
  std::cout << "total_pie_bits=" << report.total.pie_bits << "\n";
  std::cout << "total_raw_bps=" << report.total.raw_rate_bps << "\n";
  std::cout << "total_secure_bps=" << report.total.secure_rate_bps << "\n";
}

void run_plan(const Scenario& s, const fs::path& out_dir) {
  const auto comments = bfc::config::artifact_comments(s);
  const auto plan = bfc::schmidt::plan_dimensionality(
      s.comb.phase_matching_fwhm_hz, s.comb.fsr_hz, s.comb.linewidth_fwhm_hz);
  std::cout << "n_f=" << plan.n_f << "\n";
  std::cout << "n_t=" << plan.n_t << "\n";
  std::cout << "product=" << plan.product << "\n";
  std::cout << "consistent=" << (plan.consistent ? "true" : "false") << "\n";
  auto os = open_artifact(out_dir, "plan.csv");
  bfc::csv::write_header(os, comments);
  os << "n_f,n_t,product,consistent\n";
  os << plan.n_f << "," << plan.n_t << "," << plan.product << ","
     << (plan.consistent ? "true" : "false") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"biphoton frequency-comb laboratory"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::string events_path;

  app.add_option("--config", config_path, "scenario file (JSON, unit-suffixed keys)");
  app.add_option("--out", out_dir, "output directory for CSV artifacts");
  app.add_option("--seed", seed, "override source.seed");
  app.add_option("--set", overrides, "override a config key: key.path=value");
  app.set_version_flag("--version", std::string(bfc::kToolName) + " " + bfc::kToolVersion);

  auto* sc_spectrum = app.add_subcommand("spectrum", "filtered spectral density trace");
  auto* sc_wavefunction = app.add_subcommand("wavefunction", "temporal correlation amplitude");
  auto* sc_correlation = app.add_subcommand("correlation", "jitter-convolved intensity correlation");
  auto* sc_franson = app.add_subcommand("franson", "recurrence and frequency-pair visibilities");
  auto* sc_schmidt = app.add_subcommand("schmidt", "Schmidt-mode bookkeeping");
  auto* sc_simulate = app.add_subcommand("simulate", "seeded detection-event stream");
  auto* sc_analyze = app.add_subcommand("analyze", "histogram/g2/peak analysis of an event file");
  auto* sc_qkd = app.add_subcommand("qkd", "frequency-multiplexed key-rate report");
  auto* sc_plan = app.add_subcommand("plan", "dimensionality budget");
  sc_analyze->add_option("--events", events_path, "events CSV to analyze")->required();
  for (auto* sc : {sc_spectrum, sc_wavefunction, sc_correlation, sc_franson, sc_schmidt,
                   sc_simulate, sc_analyze, sc_qkd, sc_plan}) {
    sc->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    Scenario scenario = bfc::config::load_scenario(config_path, overrides);
    if (seed) scenario.source.seed = *seed;
    fs::path out(out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec && !fs::is_directory(out)) {
      throw bfc::config::ConfigError("cannot create output directory: " + out.string());
    }

    if (sc_spectrum->parsed()) run_spectrum(scenario, out);
    if (sc_wavefunction->parsed()) run_wavefunction(scenario, out);
    if (sc_correlation->parsed()) run_correlation(scenario, out);
    if (sc_franson->parsed()) run_franson(scenario, out);
    if (sc_schmidt->parsed()) run_schmidt(scenario, out);
    if (sc_simulate->parsed()) run_simulate(scenario, out);
    if (sc_analyze->parsed()) run_analyze(scenario, out, events_path);
    if (sc_qkd->parsed()) run_qkd(scenario, out);
    if (sc_plan->parsed()) run_plan(scenario, out);
  } catch (const bfc::config::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
