#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>

#include "bfc/core_model.hpp"
#include "bfc/eventsim.hpp"
#include "bfc/franson.hpp"
#include "bfc/qkd.hpp"
#include "bfc/schmidt.hpp"

namespace bfc::csv {

std::string channel_name(sim::Channel ch);
sim::Channel parse_channel(const std::string& token);  // throws tagger::UnknownChannel

// Each comment line is emitted as "# <line>" ahead of the column header.
void write_header(std::ostream& os, std::span<const std::string> comments);

// Columns: tau_s,value
void write_trace(std::ostream& os, const core::CorrelationTrace& trace,
                 std::span<const std::string> comments);

// Columns: omega_rad_s,value
void write_spectrum(std::ostream& os, std::span<const double> omega_rad_s,
                    std::span<const double> values, std::span<const std::string> comments);

// Columns: bin,v_raw,v_subtracted,sigma
void write_visibility(std::ostream& os, const franson::VisibilityTable& table,
                      std::span<const std::string> comments);

// Columns: phase_rad,counts
void write_fringe(std::ostream& os, const franson::FringeCurve& fringe,
                  std::span<const std::string> comments);

// Columns: m_signal,m_idler,weight
void write_jsi(std::ostream& os, const schmidt::JSIMatrix& jsi,
               std::span<const std::string> comments);

// Columns: k,lambda; K, dimension bound, and optional contamination go into
// extra "# ..." summary lines.
void write_schmidt(std::ostream& os, const schmidt::SchmidtResult& result,
                   std::optional<double> contamination, std::span<const std::string> comments);

// Columns: timestamp_s,channel[,truth]; truth is "pair:<id>" or "dark".
void write_events(std::ostream& os, const sim::EventStream& stream, bool emit_truth,
                  std::span<const std::string> comments);

// Columns: pair,cps,pie_bits,holevo_bits,secure_pie_bits,raw_bps,secure_bps
// plus a trailing TOTAL row.
void write_keyrate(std::ostream& os, const qkd::KeyRateReport& report,
                   std::span<const std::string> comments);

// Reads an events CSV written by write_events (comments and header skipped);
// record metadata beyond the columns is not recovered.
sim::EventStream read_events(std::istream& is);

}  // namespace bfc::csv
