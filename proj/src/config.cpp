#include "bfc/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "bfc/version.hpp"

namespace bfc::config {

namespace {

using nlohmann::json;

void check_keys(const json& node, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : node.items()) {
    bool known = false;
    for (const char* name : allowed) {
      if (key == name) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("unknown config key: " + path + key);
  }
}

double get_double(const json& node, const char* key, double fallback, const std::string& path) {
  if (!node.contains(key)) return fallback;
  const auto& v = node.at(key);
  if (!v.is_number()) throw ConfigError("config key " + path + key + " must be a number");
  return v.get<double>();
}

int get_int(const json& node, const char* key, int fallback, const std::string& path) {
  if (!node.contains(key)) return fallback;
  const auto& v = node.at(key);
  if (!v.is_number_integer()) throw ConfigError("config key " + path + key + " must be an integer");
  return v.get<int>();
}

bool get_bool(const json& node, const char* key, bool fallback, const std::string& path) {
  if (!node.contains(key)) return fallback;
  const auto& v = node.at(key);
  if (!v.is_boolean()) throw ConfigError("config key " + path + key + " must be a boolean");
  return v.get<bool>();
}

std::string get_string(const json& node, const char* key, const std::string& fallback,
                       const std::string& path) {
  if (!node.contains(key)) return fallback;
  const auto& v = node.at(key);
  if (!v.is_string()) throw ConfigError("config key " + path + key + " must be a string");
  return v.get<std::string>();
}

std::vector<double> get_number_list(const json& node, const char* key,
                                    std::vector<double> fallback, const std::string& path) {
  if (!node.contains(key)) return fallback;
  const auto& v = node.at(key);
  if (!v.is_array()) throw ConfigError("config key " + path + key + " must be an array");
  std::vector<double> out;
  for (const auto& item : v) {
    if (!item.is_number()) {
      throw ConfigError("config key " + path + key + " must contain numbers only");
    }
    out.push_back(item.get<double>());
  }
  return out;
}

std::vector<std::pair<double, double>> get_pair_list(const json& node, const char* key,
                                                     std::vector<std::pair<double, double>> fallback,
                                                     const std::string& path) {
  if (!node.contains(key)) return fallback;
  const auto& v = node.at(key);
  if (!v.is_array()) throw ConfigError("config key " + path + key + " must be an array");
  std::vector<std::pair<double, double>> out;
  for (const auto& item : v) {
    if (!item.is_array() || item.size() != 2 || !item[0].is_number() || !item[1].is_number()) {
      throw ConfigError("config key " + path + key + " must contain [x, y] number pairs");
    }
    out.emplace_back(item[0].get<double>(), item[1].get<double>());
  }
  return out;
}

core::FilterMode parse_filter_mode(const std::string& token, const std::string& path) {
  if (token == "singly") return core::FilterMode::SinglyFiltered;
  if (token == "doubly") return core::FilterMode::DoublyFiltered;
  if (token == "unfiltered") return core::FilterMode::Unfiltered;
  throw ConfigError("config key " + path +
                    "filter_mode must be one of: singly, doubly, unfiltered");
}

std::string filter_mode_name(core::FilterMode mode) {
  switch (mode) {
    case core::FilterMode::SinglyFiltered:
      return "singly";
    case core::FilterMode::DoublyFiltered:
      return "doubly";
    case core::FilterMode::Unfiltered:
      return "unfiltered";
  }
  return "singly";
}

core::DetectorParams parse_detector(const json& node, const core::DetectorParams& base,
                                    const std::string& path) {
  check_keys(node, path, {"jitter_rms_ps", "efficiency", "dark_rate_hz"});
  core::DetectorParams det = base;
  det.jitter_rms_s = 1e-12 * get_double(node, "jitter_rms_ps", base.jitter_rms_s * 1e12, path);
  det.efficiency = get_double(node, "efficiency", base.efficiency, path);
  det.dark_rate_hz = get_double(node, "dark_rate_hz", base.dark_rate_hz, path);
  return det;
}

Scenario scenario_from_json(const json& doc) {
  Scenario s = default_scenario();
  if (!doc.is_object()) throw ConfigError("config root must be an object");
  check_keys(doc, "", {"comb", "detector_signal", "detector_idler", "source", "link", "analysis"});

  if (doc.contains("comb")) {
    const auto& node = doc.at("comb");
    const std::string path = "comb.";
    check_keys(node, path,
               {"fsr_ghz", "linewidth_fwhm_ghz", "phase_matching_fwhm_ghz", "n_lines",
                "center_wavelength_nm", "filter_mode"});
    s.comb.fsr_hz = 1e9 * get_double(node, "fsr_ghz", s.comb.fsr_hz / 1e9, path);
    s.comb.linewidth_fwhm_hz =
        1e9 * get_double(node, "linewidth_fwhm_ghz", s.comb.linewidth_fwhm_hz / 1e9, path);
    s.comb.phase_matching_fwhm_hz = 1e9 * get_double(node, "phase_matching_fwhm_ghz",
                                                     s.comb.phase_matching_fwhm_hz / 1e9, path);
    s.comb.n_lines = get_int(node, "n_lines", s.comb.n_lines, path);
    s.comb.center_wavelength_nm =
        get_double(node, "center_wavelength_nm", s.comb.center_wavelength_nm, path);
    s.comb.filter_mode =
        parse_filter_mode(get_string(node, "filter_mode", filter_mode_name(s.comb.filter_mode), path),
                          path);
  }
  if (doc.contains("detector_signal")) {
    s.det_signal = parse_detector(doc.at("detector_signal"), s.det_signal, "detector_signal.");
  }
  if (doc.contains("detector_idler")) {
    s.det_idler = parse_detector(doc.at("detector_idler"), s.det_idler, "detector_idler.");
  }
  if (doc.contains("source")) {
    const auto& node = doc.at("source");
    const std::string path = "source.";
    check_keys(node, path, {"pair_rate_hz", "mu_per_window", "duration_s", "seed"});
    s.source.pair_rate_hz = get_double(node, "pair_rate_hz", s.source.pair_rate_hz, path);
    s.source.mu_per_window = get_double(node, "mu_per_window", s.source.mu_per_window, path);
    s.source.duration_s = get_double(node, "duration_s", s.source.duration_s, path);
    if (node.contains("seed")) {
      const auto& v = node.at("seed");
      if (!v.is_number_unsigned() && !v.is_number_integer()) {
        throw ConfigError("config key source.seed must be an integer");
      }
      s.source.seed = v.get<std::uint64_t>();
    }
  }
  if (doc.contains("link")) {
    const auto& node = doc.at("link");
    const std::string path = "link.";
    check_keys(node, path, {"length_km", "loss_db", "delay_ns"});
    s.link.length_km = get_double(node, "length_km", s.link.length_km, path);
    s.link.loss_db = get_double(node, "loss_db", s.link.loss_db, path);
    s.link.delay_s = 1e-9 * get_double(node, "delay_ns", s.link.delay_s * 1e9, path);
  }
  if (doc.contains("analysis")) {
    const auto& node = doc.at("analysis");
    const std::string path = "analysis.";
    check_keys(node, path,
               {"tau_step_div", "tau_span_factor", "hist_bin_ps", "hist_span_ns", "window_ns",
                "franson_bins", "background_ratio", "bpf_fwhm_ghz", "fit_reference",
                "spectrum_points", "spectrum_span_ghz", "schmidt_weights", "jsi_cross_talk",
                "scan_duration_s", "emit_truth", "hbt_split", "qkd"});
    auto& a = s.analysis;
    a.tau_step_div = get_int(node, "tau_step_div", a.tau_step_div, path);
    a.tau_span_factor = get_double(node, "tau_span_factor", a.tau_span_factor, path);
    a.hist_bin_s = 1e-12 * get_double(node, "hist_bin_ps", a.hist_bin_s * 1e12, path);
    a.hist_span_s = 1e-9 * get_double(node, "hist_span_ns", a.hist_span_s * 1e9, path);
    a.window_s = 1e-9 * get_double(node, "window_ns", a.window_s * 1e9, path);
    a.franson_bins = get_int(node, "franson_bins", a.franson_bins, path);
    a.background_ratio = get_double(node, "background_ratio", a.background_ratio, path);
    a.bpf_fwhm_hz = 1e9 * get_double(node, "bpf_fwhm_ghz", a.bpf_fwhm_hz / 1e9, path);
    a.fit_reference = get_number_list(node, "fit_reference", a.fit_reference, path);
    a.spectrum_points = get_int(node, "spectrum_points", a.spectrum_points, path);
    a.spectrum_span_hz = 1e9 * get_double(node, "spectrum_span_ghz", a.spectrum_span_hz / 1e9, path);
    a.schmidt_weights = get_number_list(node, "schmidt_weights", a.schmidt_weights, path);
    a.jsi_cross_talk = get_double(node, "jsi_cross_talk", a.jsi_cross_talk, path);
    a.scan_duration_s = get_double(node, "scan_duration_s", a.scan_duration_s, path);
    a.emit_truth = get_bool(node, "emit_truth", a.emit_truth, path);
    a.hbt_split = get_double(node, "hbt_split", a.hbt_split, path);
    if (node.contains("qkd")) {
      const auto& qnode = node.at("qkd");
      const std::string qpath = "analysis.qkd.";
      check_keys(qnode, qpath,
                 {"bin_ns", "frame_bins", "holevo_table", "filter_transmission_db",
                  "visibilities"});
      a.qkd.bin_s = 1e-9 * get_double(qnode, "bin_ns", a.qkd.bin_s * 1e9, qpath);
      a.qkd.frame_bins = get_int(qnode, "frame_bins", a.qkd.frame_bins, qpath);
      a.qkd.holevo_table = get_pair_list(qnode, "holevo_table", a.qkd.holevo_table, qpath);
      a.qkd.filter_transmission_db =
          get_double(qnode, "filter_transmission_db", a.qkd.filter_transmission_db, qpath);
      a.qkd.visibilities = get_number_list(qnode, "visibilities", a.qkd.visibilities, qpath);
    }
  }

  try {
    s.comb.validate();
    s.det_signal.validate();
    s.det_idler.validate();
    s.source.validate();
    s.link.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const auto& a = s.analysis;
  if (a.tau_step_div < 2) throw ConfigError("config: analysis.tau_step_div must be >= 2");
  if (!(a.tau_span_factor > 0.0)) throw ConfigError("config: analysis.tau_span_factor must be > 0");
  if (!(a.hist_bin_s > 0.0)) throw ConfigError("config: analysis.hist_bin_ps must be > 0");
  if (!(a.hist_span_s > 0.0)) throw ConfigError("config: analysis.hist_span_ns must be > 0");
  if (!(a.window_s > 0.0)) throw ConfigError("config: analysis.window_ns must be > 0");
  if (a.franson_bins < 1) throw ConfigError("config: analysis.franson_bins must be >= 1");
  if (a.background_ratio < 0.0) {
    throw ConfigError("config: analysis.background_ratio must be >= 0");
  }
  if (a.spectrum_points < 2) throw ConfigError("config: analysis.spectrum_points must be >= 2");
  if (a.hbt_split < 0.0 || a.hbt_split >= 1.0) {
    throw ConfigError("config: analysis.hbt_split must lie in [0, 1)");
  }
  if (a.qkd.frame_bins < 2) throw ConfigError("config: analysis.qkd.frame_bins must be >= 2");
  if (!(a.qkd.bin_s > 0.0)) throw ConfigError("config: analysis.qkd.bin_ns must be > 0");
  return s;
}

// Inverse of the parser's `x = parse_factor * value` unit scaling, nudged so
// the echoed value parses back to x bit-exactly whenever a preimage exists.
double inverse_scale(double x, double parse_factor) {
  const double d = x / parse_factor;
  if (parse_factor * d == x) return d;
  for (const double cand : {std::nextafter(d, std::numeric_limits<double>::infinity()),
                            std::nextafter(d, -std::numeric_limits<double>::infinity())}) {
    if (parse_factor * cand == x) return cand;
  }
  return d;
}

json scenario_to_json(const Scenario& s) {
  json doc;
  doc["comb"] = {{"fsr_ghz", inverse_scale(s.comb.fsr_hz, 1e9)},
                 {"linewidth_fwhm_ghz", inverse_scale(s.comb.linewidth_fwhm_hz, 1e9)},
                 {"phase_matching_fwhm_ghz", inverse_scale(s.comb.phase_matching_fwhm_hz, 1e9)},
                 {"n_lines", s.comb.n_lines},
                 {"center_wavelength_nm", s.comb.center_wavelength_nm},
                 {"filter_mode", filter_mode_name(s.comb.filter_mode)}};
  auto detector_json = [](const core::DetectorParams& det) {
    return json{{"jitter_rms_ps", inverse_scale(det.jitter_rms_s, 1e-12)},
                {"efficiency", det.efficiency},
                {"dark_rate_hz", det.dark_rate_hz}};
  };
  doc["detector_signal"] = detector_json(s.det_signal);
  doc["detector_idler"] = detector_json(s.det_idler);
  doc["source"] = {{"pair_rate_hz", s.source.pair_rate_hz},
                   {"mu_per_window", s.source.mu_per_window},
                   {"duration_s", s.source.duration_s},
                   {"seed", s.source.seed}};
  doc["link"] = {{"length_km", s.link.length_km},
                 {"loss_db", s.link.loss_db},
                 {"delay_ns", inverse_scale(s.link.delay_s, 1e-9)}};
  const auto& a = s.analysis;
  json qkd = {{"bin_ns", inverse_scale(a.qkd.bin_s, 1e-9)},
              {"frame_bins", a.qkd.frame_bins},
              {"holevo_table", a.qkd.holevo_table},
              {"filter_transmission_db", a.qkd.filter_transmission_db},
              {"visibilities", a.qkd.visibilities}};
  doc["analysis"] = {{"tau_step_div", a.tau_step_div},
                     {"tau_span_factor", a.tau_span_factor},
                     {"hist_bin_ps", inverse_scale(a.hist_bin_s, 1e-12)},
                     {"hist_span_ns", inverse_scale(a.hist_span_s, 1e-9)},
                     {"window_ns", inverse_scale(a.window_s, 1e-9)},
                     {"franson_bins", a.franson_bins},
                     {"background_ratio", a.background_ratio},
                     {"bpf_fwhm_ghz", inverse_scale(a.bpf_fwhm_hz, 1e9)},
                     {"fit_reference", a.fit_reference},
                     {"spectrum_points", a.spectrum_points},
                     {"spectrum_span_ghz", inverse_scale(a.spectrum_span_hz, 1e9)},
                     {"schmidt_weights", a.schmidt_weights},
                     {"jsi_cross_talk", a.jsi_cross_talk},
                     {"scan_duration_s", a.scan_duration_s},
                     {"emit_truth", a.emit_truth},
                     {"hbt_split", a.hbt_split},
                     {"qkd", qkd}};
  return doc;
}

}  // namespace

Scenario default_scenario() {
  Scenario s;
  s.comb.fsr_hz = 45.32e9;
  s.comb.linewidth_fwhm_hz = 1.56e9;
  s.comb.phase_matching_fwhm_hz = 245e9;
  s.comb.n_lines = 5;
  s.comb.center_wavelength_nm = 1316.0;
  s.comb.filter_mode = core::FilterMode::SinglyFiltered;
  s.det_signal = {15.27e-12, 0.9, 100.0};
  s.det_idler = {15.27e-12, 0.9, 100.0};
  s.source.pair_rate_hz = 1e6;
  s.source.mu_per_window = 0.0;
  s.source.duration_s = 0.01;
  s.source.seed = 12345;
  s.link = {0.0, 0.0, 0.0};
  return s;
}

Scenario parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto),
                                     '\n');
    throw ConfigError("config parse error at line " + std::to_string(line) + ": " + e.what());
  }
  return scenario_from_json(doc);
}

Scenario load_scenario(const std::optional<std::string>& path,
                       std::span<const std::string> overrides) {
  json doc = json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot open config file: " + *path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
      const auto line = 1 + std::count(text.begin(),
                                       text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
      throw ConfigError(*path + ": parse error at line " + std::to_string(line) + ": " + e.what());
    }
  }
  for (const auto& assignment : overrides) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set expects key.path=value, got: " + assignment);
    }
    std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::parse_error&) {
      parsed = value;  // bare token: treat as string (e.g. filter_mode=doubly)
    }
    std::string pointer = "/";
    for (char c : key) pointer += (c == '.') ? '/' : c;
    try {
      doc[json::json_pointer(pointer)] = parsed;
    } catch (const json::exception& e) {
      throw ConfigError("--set " + assignment + ": " + e.what());
    }
  }
  return scenario_from_json(doc);
}

std::string scenario_json(const Scenario& scenario) { return scenario_to_json(scenario).dump(); }

std::vector<std::string> artifact_comments(const Scenario& scenario) {
  return {std::string(kToolName) + " " + std::string(kToolVersion),
          "config: " + scenario_json(scenario)};
}

}  // namespace bfc::config
