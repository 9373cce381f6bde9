#include "rdif/io.hpp"

#include "rdif/error.hpp"

#include <json.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rdif {

namespace {

using ordered_json = nlohmann::ordered_json;

// ---- JSON helpers ---------------------------------------------------------

const ordered_json& field(const ordered_json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing field \"" + key + "\"");
  return *it;
}

double as_real(const ordered_json& v, const std::string& where) {
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!v.is_number()) throw ParseError(where + ": expected a number");
  return v.get<double>();
}

int as_int(const ordered_json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ParseError(where + ": expected an integer");
  return v.get<int>();
}

bool as_bool(const ordered_json& v, const std::string& where) {
  if (!v.is_boolean()) throw ParseError(where + ": expected a boolean");
  return v.get<bool>();
}

ordered_json real(double x) { return std::isnan(x) ? ordered_json(nullptr) : ordered_json(x); }

ordered_json parse_json(std::istream& in) {
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
}

// ---- CSV helpers ----------------------------------------------------------

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_real(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ParseError(where + ": invalid number \"" + s + "\"");
  return v;
}

int parse_int(const std::string& s, const std::string& where) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(where + ": invalid integer \"" + s + "\"");
  }
  return v;
}

std::string calibration_csv_header() {
  std::string h = "index,a0,d0,a1,d1";
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) h += ",cov" + std::to_string(r) + std::to_string(c);
  }
  return h;
}

CalibrationPair load_calibration_json(std::istream& in) {
  const ordered_json doc = parse_json(in);
  CalibrationPair pair;
  pair.n0 = as_int(field(doc, "n0", "root"), "n0");
  pair.n1 = as_int(field(doc, "n1", "root"), "n1");
  const ordered_json& items = field(doc, "items", "root");
  if (!items.is_array()) throw ParseError("items: expected an array");
  for (std::size_t j = 0; j < items.size(); ++j) {
    const std::string where = "items[" + std::to_string(j) + "]";
    const ordered_json& it = items[j];
    ItemCalibration item;
    item.index = as_int(field(it, "index", where), where + ".index");
    item.a0 = as_real(field(it, "a0", where), where + ".a0");
    item.d0 = as_real(field(it, "d0", where), where + ".d0");
    item.a1 = as_real(field(it, "a1", where), where + ".a1");
    item.d1 = as_real(field(it, "d1", where), where + ".d1");
    const ordered_json& cov = field(it, "cov", where);
    if (!cov.is_array() || cov.size() != 4) throw ParseError(where + ".cov: expected 4 rows");
    for (int r = 0; r < 4; ++r) {
      if (!cov[r].is_array() || cov[r].size() != 4) {
        throw ParseError(where + ".cov[" + std::to_string(r) + "]: expected 4 columns");
      }
      for (int c = 0; c < 4; ++c) {
        item.cov(r, c) = as_real(cov[r][c], where + ".cov");
      }
    }
    pair.items.push_back(item);
  }
  return pair;
}

CalibrationPair load_calibration_csv(std::istream& in) {
  CalibrationPair pair;
  bool have_sizes = false;
  bool have_header = false;
  std::string line;
  int line_no = 0;
  const std::vector<std::string> expected = split(calibration_csv_header());
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = "line " + std::to_string(line_no);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      for (const std::string& kv : split(body)) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ParseError(where + ": expected key=value");
        const std::string key = kv.substr(0, eq);
        const int value = parse_int(kv.substr(eq + 1), where);
        if (key == "n0") {
          pair.n0 = value;
        } else if (key == "n1") {
          pair.n1 = value;
        } else {
          throw ParseError(where + ": unknown key \"" + key + "\"");
        }
      }
      have_sizes = true;
      continue;
    }
    const std::vector<std::string> cells = split(line);
    if (!have_header) {
      if (cells != expected) throw ParseError(where + ": unexpected header");
      have_header = true;
      continue;
    }
    if (cells.size() != expected.size()) {
      throw ParseError(where + ": expected " + std::to_string(expected.size()) + " columns, got " +
                       std::to_string(cells.size()));
    }
    ItemCalibration item;
    item.index = parse_int(cells[0], where);
    item.a0 = parse_real(cells[1], where);
    item.d0 = parse_real(cells[2], where);
    item.a1 = parse_real(cells[3], where);
    item.d1 = parse_real(cells[4], where);
    for (int e = 0; e < 16; ++e) item.cov(e / 4, e % 4) = parse_real(cells[5 + e], where);
    pair.items.push_back(item);
  }
  if (!have_sizes) throw ParseError("missing \"# n0=...,n1=...\" line");
  if (!have_header) throw ParseError("missing header row");
  return pair;
}

ordered_json fit_to_json(const RdifFit& fit) {
  ordered_json j;
  j["kind"] = to_string(fit.kind);
  j["theta"] = real(fit.theta);
  j["var_theta"] = real(fit.var_theta);
  j["start"] = real(fit.start);
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["objective"] = real(fit.objective);
  j["psi_sum"] = real(fit.psi_sum);
  auto reals = [](const std::vector<double>& v) {
    ordered_json a = ordered_json::array();
    for (double x : v) a.push_back(real(x));
    return a;
  };
  j["residuals"] = reals(fit.residuals);
  j["weights"] = reals(fit.weights);
  ordered_json flags = ordered_json::array();
  for (bool f : fit.flagged) flags.push_back(f);
  j["flagged"] = flags;
  j["taus"] = reals(fit.taus);
  j["k"] = reals(fit.k);
  return j;
}

ScalingKind parse_kind(const ordered_json& v, const std::string& where) {
  if (!v.is_string()) throw ParseError(where + ": expected a string");
  const std::string s = v.get<std::string>();
  if (s == "intercept") return ScalingKind::intercept;
  if (s == "slope") return ScalingKind::slope;
  if (s == "log_slope") return ScalingKind::log_slope;
  throw ParseError(where + ": unknown scaling kind \"" + s + "\"");
}

RdifFit fit_from_json(const ordered_json& j, const std::string& where) {
  RdifFit fit;
  fit.kind = parse_kind(field(j, "kind", where), where + ".kind");
  fit.theta = as_real(field(j, "theta", where), where + ".theta");
  fit.var_theta = as_real(field(j, "var_theta", where), where + ".var_theta");
  fit.start = as_real(field(j, "start", where), where + ".start");
  fit.iterations = as_int(field(j, "iterations", where), where + ".iterations");
  fit.converged = as_bool(field(j, "converged", where), where + ".converged");
  fit.objective = as_real(field(j, "objective", where), where + ".objective");
  fit.psi_sum = as_real(field(j, "psi_sum", where), where + ".psi_sum");
  auto reals = [&](const char* key) {
    const ordered_json& a = field(j, key, where);
    if (!a.is_array()) throw ParseError(where + "." + key + ": expected an array");
    std::vector<double> v;
    for (const auto& x : a) v.push_back(as_real(x, where + "." + key));
    return v;
  };
  fit.residuals = reals("residuals");
  fit.weights = reals("weights");
  const ordered_json& flags = field(j, "flagged", where);
  if (!flags.is_array()) throw ParseError(where + ".flagged: expected an array");
  for (const auto& f : flags) fit.flagged.push_back(as_bool(f, where + ".flagged"));
  fit.taus = reals("taus");
  fit.k = reals("k");
  return fit;
}

const char* bool_text(bool b) { return b ? "true" : "false"; }

}  // namespace

std::optional<Format> parse_format(std::string_view name) {
  if (name == "json") return Format::json;
  if (name == "csv") return Format::csv;
  return std::nullopt;
}

Format format_for_path(std::string_view path) {
  return path.size() >= 4 && path.substr(path.size() - 4) == ".csv" ? Format::csv
                                                                      : Format::json;
}

std::string format_real(double x) {
  if (std::isnan(x)) return "NA";
  if (std::isinf(x)) return x > 0 ? "Inf" : "-Inf";
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  std::string s(buf.data(), ptr);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

CalibrationPair load_calibration(std::istream& in, Format format) {
  CalibrationPair pair =
      format == Format::json ? load_calibration_json(in) : load_calibration_csv(in);
  validate(pair);
  return pair;
}

void save_calibration(const CalibrationPair& pair, std::ostream& out, Format format) {
  if (format == Format::csv) {
    out << "# n0=" << pair.n0 << ",n1=" << pair.n1 << '\n' << calibration_csv_header() << '\n';
    for (const auto& item : pair.items) {
      out << item.index << ',' << format_real(item.a0) << ',' << format_real(item.d0) << ','
          << format_real(item.a1) << ',' << format_real(item.d1);
      for (int e = 0; e < 16; ++e) out << ',' << format_real(item.cov(e / 4, e % 4));
      out << '\n';
    }
    return;
  }
  ordered_json doc;
  doc["n0"] = pair.n0;
  doc["n1"] = pair.n1;
  ordered_json items = ordered_json::array();
  for (const auto& item : pair.items) {
    ordered_json it;
    it["index"] = item.index;
    it["a0"] = item.a0;
    it["d0"] = item.d0;
    it["a1"] = item.a1;
    it["d1"] = item.d1;
    ordered_json cov = ordered_json::array();
    for (int r = 0; r < 4; ++r) {
      ordered_json row = ordered_json::array();
      for (int c = 0; c < 4; ++c) row.push_back(item.cov(r, c));
      cov.push_back(row);
    }
    it["cov"] = cov;
    items.push_back(it);
  }
  doc["items"] = items;
  out << doc.dump(2) << '\n';
}

void save_report(const DifReport& report, std::ostream& out, Format format) {
  if (!report.populated()) throw std::invalid_argument("report not populated");
  if (format == Format::csv) {
    out << "index,y,z,t_intercept,p_intercept,flag_intercept,t_slope,p_slope,flag_slope,"
           "q_joint,p_joint,flag_joint\n";
    for (const auto& r : report.items) {
      out << r.index << ',' << format_real(r.y) << ',' << format_real(r.z) << ','
          << format_real(r.t_intercept) << ',' << format_real(r.p_intercept) << ','
          << bool_text(r.flag_intercept) << ',' << format_real(r.t_slope) << ','
          << format_real(r.p_slope) << ',' << bool_text(r.flag_slope) << ','
          << format_real(r.q_joint) << ',' << format_real(r.p_joint) << ','
          << bool_text(r.flag_joint) << '\n';
    }
    return;
  }
  ordered_json doc;
  doc["alpha"] = report.alpha;
  doc["log_slope"] = report.log_slope;
  doc["theta_fit"] = fit_to_json(report.theta_fit);
  doc["sigma_fit"] = fit_to_json(report.sigma_fit);
  ordered_json items = ordered_json::array();
  for (const auto& r : report.items) {
    ordered_json it;
    it["index"] = r.index;
    it["y"] = real(r.y);
    it["z"] = real(r.z);
    it["t_intercept"] = real(r.t_intercept);
    it["p_intercept"] = real(r.p_intercept);
    it["flag_intercept"] = r.flag_intercept;
    it["t_slope"] = real(r.t_slope);
    it["p_slope"] = real(r.p_slope);
    it["flag_slope"] = r.flag_slope;
    it["q_joint"] = real(r.q_joint);
    it["p_joint"] = real(r.p_joint);
    it["flag_joint"] = r.flag_joint;
    items.push_back(it);
  }
  doc["items"] = items;
  out << doc.dump(2) << '\n';
}

DifReport load_report(std::istream& in) {
  const ordered_json doc = parse_json(in);
  DifReport report;
  report.alpha = as_real(field(doc, "alpha", "root"), "alpha");
  report.log_slope = as_bool(field(doc, "log_slope", "root"), "log_slope");
  report.theta_fit = fit_from_json(field(doc, "theta_fit", "root"), "theta_fit");
  report.sigma_fit = fit_from_json(field(doc, "sigma_fit", "root"), "sigma_fit");
  const ordered_json& items = field(doc, "items", "root");
  if (!items.is_array()) throw ParseError("items: expected an array");
  for (std::size_t j = 0; j < items.size(); ++j) {
    const std::string where = "items[" + std::to_string(j) + "]";
    const ordered_json& it = items[j];
    ItemDifResult r;
    r.index = as_int(field(it, "index", where), where + ".index");
    r.y = as_real(field(it, "y", where), where + ".y");
    r.z = as_real(field(it, "z", where), where + ".z");
    r.t_intercept = as_real(field(it, "t_intercept", where), where + ".t_intercept");
    r.p_intercept = as_real(field(it, "p_intercept", where), where + ".p_intercept");
    r.flag_intercept = as_bool(field(it, "flag_intercept", where), where + ".flag_intercept");
    r.t_slope = as_real(field(it, "t_slope", where), where + ".t_slope");
    r.p_slope = as_real(field(it, "p_slope", where), where + ".p_slope");
    r.flag_slope = as_bool(field(it, "flag_slope", where), where + ".flag_slope");
    r.q_joint = as_real(field(it, "q_joint", where), where + ".q_joint");
    r.p_joint = as_real(field(it, "p_joint", where), where + ".p_joint");
    r.flag_joint = as_bool(field(it, "flag_joint", where), where + ".flag_joint");
    report.items.push_back(r);
  }
  return report;
}

}  // namespace rdif
