#include "bfc/csv.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "bfc/tagger.hpp"

namespace bfc::csv {

namespace {

std::string fmt(double x, const char* spec = "%.12g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

std::string fmt_time(double x) { return fmt(x, "%.15g"); }

}  // namespace

std::string channel_name(sim::Channel ch) {
  switch (ch) {
    case sim::Channel::SignalA:
      return "SignalA";
    case sim::Channel::IdlerB:
      return "IdlerB";
    case sim::Channel::IdlerB1:
      return "IdlerB1";
    case sim::Channel::IdlerB2:
      return "IdlerB2";
  }
  throw tagger::UnknownChannel("channel_name: unhandled channel value");
}

sim::Channel parse_channel(const std::string& token) {
  if (token == "SignalA") return sim::Channel::SignalA;
  if (token == "IdlerB") return sim::Channel::IdlerB;
  if (token == "IdlerB1") return sim::Channel::IdlerB1;
  if (token == "IdlerB2") return sim::Channel::IdlerB2;
  throw tagger::UnknownChannel("unknown channel token: " + token);
}

void write_header(std::ostream& os, std::span<const std::string> comments) {
  for (const auto& line : comments) os << "# " << line << "\n";
}

void write_trace(std::ostream& os, const core::CorrelationTrace& trace,
                 std::span<const std::string> comments) {
  write_header(os, comments);
  os << "tau_s,value\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    os << fmt(trace.tau(i)) << "," << fmt(trace.values[i]) << "\n";
  }
}

void write_spectrum(std::ostream& os, std::span<const double> omega_rad_s,
                    std::span<const double> values, std::span<const std::string> comments) {
  if (omega_rad_s.size() != values.size()) {
    throw std::invalid_argument("write_spectrum: axis and value lengths differ");
  }
  write_header(os, comments);
  os << "omega_rad_s,value\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    os << fmt(omega_rad_s[i]) << "," << fmt(values[i]) << "\n";
  }
}

void write_visibility(std::ostream& os, const franson::VisibilityTable& table,
                      std::span<const std::string> comments) {
  write_header(os, comments);
  os << "bin,v_raw,v_subtracted,sigma\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    os << table.bins[i] << "," << fmt(table.v_raw[i]) << "," << fmt(table.v_subtracted[i]) << ","
       << fmt(table.sigma[i]) << "\n";
  }
}

void write_fringe(std::ostream& os, const franson::FringeCurve& fringe,
                  std::span<const std::string> comments) {
  write_header(os, comments);
  os << "phase_rad,counts\n";
  for (std::size_t i = 0; i < fringe.phase_rad.size(); ++i) {
    os << fmt(fringe.phase_rad[i]) << "," << fmt(fringe.counts[i]) << "\n";
  }
}

void write_jsi(std::ostream& os, const schmidt::JSIMatrix& jsi,
               std::span<const std::string> comments) {
  write_header(os, comments);
  os << "m_signal,m_idler,weight\n";
  const int n = jsi.side_lines;
  for (int ms = -n; ms <= n; ++ms) {
    for (int mi = -n; mi <= n; ++mi) {
      os << ms << "," << mi << "," << fmt(jsi.at(ms, mi)) << "\n";
    }
  }
}

void write_schmidt(std::ostream& os, const schmidt::SchmidtResult& result,
                   std::optional<double> contamination, std::span<const std::string> comments) {
  write_header(os, comments);
  os << "# schmidt_number: " << fmt(result.schmidt_number) << "\n";
  os << "# dimension_lower_bound: " << result.dimension_lower_bound << "\n";
  if (contamination) os << "# contamination: " << fmt(*contamination) << "\n";
  os << "k,lambda\n";
  for (std::size_t k = 0; k < result.eigenvalues.size(); ++k) {
    os << k << "," << fmt(result.eigenvalues[k]) << "\n";
  }
}

void write_events(std::ostream& os, const sim::EventStream& stream, bool emit_truth,
                  std::span<const std::string> comments) {
  write_header(os, comments);
  os << (emit_truth ? "timestamp_s,channel,truth\n" : "timestamp_s,channel\n");
  for (const auto& r : stream.records) {
    os << fmt_time(r.timestamp_s) << "," << channel_name(r.channel);
    if (emit_truth) {
      if (r.pair_id == sim::kDarkId) {
        os << ",dark";
      } else {
        os << ",pair:" << r.pair_id;
      }
    }
    os << "\n";
  }
}

void write_keyrate(std::ostream& os, const qkd::KeyRateReport& report,
                   std::span<const std::string> comments) {
  write_header(os, comments);
  os << "pair,cps,pie_bits,holevo_bits,secure_pie_bits,raw_bps,secure_bps\n";
  auto row_out = [&os](const qkd::KeyRateRow& row) {
    os << row.label << "," << fmt(row.coincidence_rate_hz) << "," << fmt(row.pie_bits) << ","
       << fmt(row.holevo_bits) << "," << fmt(row.secure_pie_bits) << "," << fmt(row.raw_rate_bps)
       << "," << fmt(row.secure_rate_bps) << "\n";
  };
  for (const auto& row : report.rows) row_out(row);
  row_out(report.total);
}

sim::EventStream read_events(std::istream& is) {
  sim::EventStream stream;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      // Column header row.
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    std::string ts_token;
    std::string ch_token;
    std::string truth_token;
    if (!std::getline(row, ts_token, ',') || !std::getline(row, ch_token, ',')) {
      throw std::runtime_error("read_events: malformed row: " + line);
    }
    std::getline(row, truth_token, ',');

    sim::EventRecord record;
    try {
      record.timestamp_s = std::stod(ts_token);
    } catch (const std::exception&) {
      throw std::runtime_error("read_events: bad timestamp: " + ts_token);
    }
    record.channel = parse_channel(ch_token);
    if (truth_token.empty()) {
      record.pair_id = sim::kUnknownId;
    } else if (truth_token == "dark") {
      record.pair_id = sim::kDarkId;
    } else if (truth_token.rfind("pair:", 0) == 0) {
      record.pair_id = std::stoll(truth_token.substr(5));
    } else {
      throw std::runtime_error("read_events: bad truth token: " + truth_token);
    }
    stream.records.push_back(record);
  }
  std::sort(stream.records.begin(), stream.records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.timestamp_s, a.channel, a.pair_id) <
           std::tie(b.timestamp_s, b.channel, b.pair_id);
  });
  return stream;
}

}  // namespace bfc::csv
