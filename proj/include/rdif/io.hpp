#pragma once

#include "rdif/calibration.hpp"
#include "rdif/report.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

namespace rdif {

enum class Format { json, csv };

std::optional<Format> parse_format(std::string_view name);

/// Picks the format from a file extension; JSON unless the path ends in ".csv".
Format format_for_path(std::string_view path);

/// Reads and validates a calibration pair.
///
/// JSON: {"n0": int, "n1": int, "items": [{"index", "a0", "d0", "a1", "d1",
/// "cov": 4x4}]}.
/// CSV: a "# n0=<int>,n1=<int>" line, a header row, then one row per item with
/// columns index,a0,d0,a1,d1,cov00,cov01,...,cov33 (row-major).
///
/// Throws ParseError for malformed input and ValidationError for invariant
/// violations.
CalibrationPair load_calibration(std::istream& in, Format format);
void save_calibration(const CalibrationPair& pair, std::ostream& out, Format format);

/// Throws std::invalid_argument when the report is not populated.
void save_report(const DifReport& report, std::ostream& out, Format format);

/// Reads a report written by save_report in JSON format.
DifReport load_report(std::istream& in);

/// Shortest round-trip decimal form of x with a trailing ".0" for integral
/// values; "NA" for NaN.
std::string format_real(double x);

}  // namespace rdif
