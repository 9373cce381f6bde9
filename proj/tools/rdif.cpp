#include "rdif/dif_tests.hpp"
#include "rdif/error.hpp"
#include "rdif/io.hpp"
#include "rdif/irt.hpp"
#include "rdif/simulation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 2;
constexpr int kNumerical = 3;

// Writes through a sibling temp file so a failed run leaves nothing behind.
void write_atomically(const std::string& path, const std::function<void(std::ostream&)>& body) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw rdif::ValidationError("cannot open " + tmp + " for writing");
    try {
      body(out);
    } catch (...) {
      out.close();
      fs::remove(tmp);
      throw;
    }
    out.flush();
    if (!out) {
      fs::remove(tmp);
      throw rdif::ValidationError("failed writing " + tmp);
    }
  }
  fs::rename(tmp, path);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw rdif::ValidationError("cannot open " + path);
  return in;
}

struct AnalyzeArgs {
  std::string input;
  std::string out;
  double alpha = 0.05;
  bool log_slope = false;
  std::string start = "med3";
  std::optional<double> downtune;
};

int cmd_analyze(const AnalyzeArgs& args) {
  if (!(args.alpha > 0.0 && args.alpha < 1.0)) {
    std::cerr << "error: alpha must be in (0,1)\n";
    return kInvalid;
  }
  const auto start = rdif::parse_start_strategy(args.start.c_str());
  if (!start) {
    std::cerr << "error: unknown start strategy \"" << args.start << "\"\n";
    return kInvalid;
  }
  rdif::AnalyzeOptions options;
  options.log_slope = args.log_slope;
  options.start = *start;
  options.downtune_alpha = args.downtune;
  if (args.downtune && !(*args.downtune > 0.0 && *args.downtune < args.alpha)) {
    std::cerr << "error: downtune must be in (0, alpha)\n";
    return kInvalid;
  }

  std::ifstream in = open_input(args.input);
  const rdif::CalibrationPair pair = rdif::load_calibration(in, rdif::format_for_path(args.input));
  const rdif::DifReport report = rdif::analyze(pair, args.alpha, options);
  if (!report.theta_fit.converged || !report.sigma_fit.converged) {
    std::cerr << "error: "
              << (!report.theta_fit.converged ? "intercept" : "slope")
              << " scaling fit did not converge\n";
    return kNumerical;
  }
  write_atomically(args.out, [&](std::ostream& out) {
    rdif::save_report(report, out, rdif::format_for_path(args.out));
  });
  return kOk;
}

struct FitArgs {
  std::string group0;
  std::string group1;
  std::string out;
  int quad = 61;
};

int cmd_fit(const FitArgs& args) {
  if (args.quad < 2) {
    std::cerr << "error: --quad must be at least 2\n";
    return kInvalid;
  }
  if (args.quad < 21) {
    std::cerr << "warning: " << args.quad
              << " quadrature points give a coarse likelihood approximation\n";
  }
  rdif::FitOptions options;
  options.quad_points = args.quad;

  rdif::Mle2pl fits[2];
  const std::string* paths[2] = {&args.group0, &args.group1};
  for (int g = 0; g < 2; ++g) {
    std::ifstream in = open_input(*paths[g]);
    const rdif::ResponseMatrix data = rdif::read_responses(in);
    try {
      fits[g] = rdif::fit_2pl(data, options);
    } catch (const rdif::DegenerateItemError& e) {
      std::cerr << "error: group " << g << ": " << e.what() << '\n';
      return kNumerical;
    }
    if (!fits[g].converged) {
      std::cerr << "error: group " << g << ": 2PL calibration did not converge\n";
      return kNumerical;
    }
  }
  const rdif::CalibrationPair pair = rdif::make_pair(fits[0], fits[1]);
  rdif::validate(pair);
  write_atomically(args.out, [&](std::ostream& out) {
    rdif::save_calibration(pair, out, rdif::format_for_path(args.out));
  });
  return kOk;
}

struct SimulateArgs {
  std::string design;
  std::string config;
  std::string out;
  std::string theta_out;
  std::optional<int> reps;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 0;
};

nlohmann::json read_config(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in = open_input(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw rdif::ParseError(std::string("malformed config: ") + e.what());
  }
}

int cmd_simulate(const SimulateArgs& args) {
  nlohmann::json cfg = read_config(args.config);
  if (!cfg.is_object()) throw rdif::ValidationError("config must be a JSON object");
  if (args.reps) cfg["reps"] = *args.reps;
  if (args.seed) cfg["seed"] = *args.seed;

  rdif::RunOptions options;
  options.jobs = args.jobs;
  rdif::SimResult result;
  if (args.design == "sim1") {
    result = rdif::run_sim1(rdif::sim1_config_from_json(cfg), options);
  } else {
    result = rdif::run_sim2(rdif::sim2_config_from_json(cfg), options);
  }
  const std::string theta_path =
      args.theta_out.empty() ? fs::path(args.out).replace_extension(".theta.csv").string()
                             : args.theta_out;
  write_atomically(args.out, [&](std::ostream& out) { rdif::write_sim_csv(result, out); });
  write_atomically(theta_path, [&](std::ostream& out) { rdif::write_theta_dump(result, out); });
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust DIF detection via redescending M-estimation of IRT scaling parameters"};
  app.set_version_flag("--version", std::string("rdif ") + RDIF_VERSION);
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  auto* a = app.add_subcommand("analyze", "Test every item of a calibration pair for DIF");
  a->add_option("--input", analyze.input, "Calibration pair (.json or .csv)")->required();
  a->add_option("--alpha", analyze.alpha, "Significance level");
  a->add_flag("--log-slope", analyze.log_slope, "Estimate the slope scaling on the log scale");
  a->add_option("--start", analyze.start, "Starting value: med3, median, lts or grid");
  a->add_option("--downtune", analyze.downtune, "Error rate used to tune k during estimation");
  a->add_option("--out", analyze.out, "Report path (.json or .csv)")->required();

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Calibrate the 2PL in two groups and write the pair");
  f->add_option("--group0", fit.group0, "Reference group responses (CSV)")->required();
  f->add_option("--group1", fit.group1, "Focal group responses (CSV)")->required();
  f->add_option("--out", fit.out, "Calibration pair path (.json or .csv)")->required();
  f->add_option("--quad", fit.quad, "Quadrature points");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Run a simulation design");
  s->add_option("--design", sim.design, "sim1 or sim2")
      ->required()
      ->check(CLI::IsMember({"sim1", "sim2"}));
  s->add_option("--config", sim.config, "JSON configuration");
  s->add_option("--out", sim.out, "Result CSV")->required();
  s->add_option("--theta-out", sim.theta_out, "Per-replication estimate dump");
  s->add_option("--reps", sim.reps, "Replications per condition");
  s->add_option("--seed", sim.seed, "Base seed");
  s->add_option("--jobs", sim.jobs, "Concurrent replications (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (a->parsed()) return cmd_analyze(analyze);
    if (f->parsed()) return cmd_fit(fit);
    return cmd_simulate(sim);
  } catch (const rdif::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const rdif::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const rdif::NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
}
