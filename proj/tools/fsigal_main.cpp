// fsigal command-line front end: run, verify, converge, plotdata.
//
// Exit codes: 0 pass, 1 usage or configuration error, 2 verification failure.

#include "fsigal/diagnostics.hpp"
#include "fsigal/output.hpp"
#include "fsigal/scenario.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <locale>
#include <sstream>

namespace {

using namespace fsigal;

constexpr int kPass = 0;
constexpr int kUsage = 1;
constexpr int kFail = 2;

void add_tolerance_flags(CLI::App* cmd, Tolerances& tol) {
  cmd->add_option("--tol-energy", tol.energy, "energy inequality slack")->capture_default_str();
  cmd->add_option("--tol-constraint", tol.constraint, "constraint residual bound")->capture_default_str();
  cmd->add_option("--tol-split", tol.split, "solid split-equation residual bound")->capture_default_str();
  cmd->add_option("--tol-divfree", tol.divfree, "pressure residual bound on divergence-free fields")
      ->capture_default_str();
}

int print_report(const VerificationReport& rep) {
  for (const auto& c : rep.checks) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << std::left << std::setw(28) << c.name << " measured=" << std::setprecision(6)
              << c.measured << " threshold=" << c.threshold << "\n";
  }
  if (const auto* f = rep.first_failure()) {
    std::cerr << "verification failed: " << f->name << "\n";
    return kFail;
  }
  return kPass;
}

int cmd_run(const std::string& config, std::string out, const Tolerances& tol) {
  const auto scenario = load_scenario(config);
  if (out.empty()) out = scenario.output_dir.empty() ? "out/" + scenario.name : scenario.output_dir;
  const auto sim = build_simulation(scenario);
  const auto art = run_scenario(sim, tol);
  write_outputs(out, scenario, art);
  std::cout << "scenario " << scenario.name << " (" << scenario.hash_hex() << ") -> " << out << "\n";
  return print_report(art.report);
}

int cmd_verify(const std::string& dir, const Tolerances& tol, const std::string& report_path) {
  const auto rep = verify_directory(dir, tol);
  if (!report_path.empty()) {
    const auto scenario = load_scenario((std::filesystem::path(dir) / "scenario.json").string());
    std::ofstream(report_path, std::ios::binary) << report_json(scenario, rep);
  }
  return print_report(rep);
}

std::string fmt(double x) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(17) << x;
  return os.str();
}

int cmd_converge(const std::string& config, const std::vector<int>& m_list, const std::vector<double>& dt_list,
                 std::string out) {
  const auto scenario = load_scenario(config);
  if (out.empty()) out = (scenario.output_dir.empty() ? "out/" + scenario.name : scenario.output_dir) + "/converge";
  std::filesystem::create_directories(out);

  int max_m = scenario.m;
  for (int m : m_list) max_m = std::max(max_m, m);
  const auto sim = build_simulation(scenario, max_m);
  bool ok = true;

  if (!m_list.empty()) {
    std::vector<CauchyRow> rows;
    if (m_list.size() > 1)
      rows = convergence_study(sim.ctx, scenario.params, sim.data.u0, scenario.time, m_list, scenario.step);
    std::ostringstream csv;
    csv << "# scenario=" << scenario.name << " hash=" << scenario.hash_hex() << "\n";
    csv << "m,fluid_diff,elastic_diff,decreasing\n";
    std::cout << "m-list Cauchy table (terminal differences to the previous m)\n";
    for (std::size_t k = 0; k < m_list.size(); ++k) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      const double f = k ? rows[k - 1].fluid : nan;
      const double e = k ? rows[k - 1].elastic : nan;
      int dec = -1;
      if (k >= 2) {
        dec = rows[k - 1].fluid < rows[k - 2].fluid && rows[k - 1].elastic < rows[k - 2].elastic;
        ok = ok && dec;
      }
      csv << m_list[k] << "," << fmt(f) << "," << fmt(e) << "," << dec << "\n";
      std::cout << "  m=" << std::setw(3) << m_list[k] << "  fluid=" << std::setw(12) << f << "  elastic=" << std::setw(12)
                << e << (dec == 0 ? "  NOT DECREASING" : "") << "\n";
    }
    std::ofstream(std::filesystem::path(out) / "convergence_m.csv", std::ios::binary) << csv.str();
  }

  if (!dt_list.empty()) {
    const auto ctx = sim.ctx.truncated(scenario.m, sim.ctx.R());
    const auto init = project_initial_data(compatible_initial_data(ctx, sim.data.u0), ctx);
    const auto rows = dt_self_convergence(ctx, scenario.params, init, scenario.time.final_time, dt_list, scenario.step);
    std::ostringstream csv;
    csv << "# scenario=" << scenario.name << " hash=" << scenario.hash_hex() << "\n";
    csv << "dt,difference,ratio,in_band\n";
    std::cout << "dt self-convergence (difference to the next dt, ratio of consecutive differences)\n";
    for (const auto& r : rows) {
      int band = -1;
      if (std::isfinite(r.ratio)) {
        band = r.ratio >= 3.5 && r.ratio <= 4.5;
        ok = ok && band;
      }
      csv << fmt(r.dt) << "," << fmt(r.difference) << "," << fmt(r.ratio) << "," << band << "\n";
      std::cout << "  dt=" << std::setw(10) << r.dt << "  diff=" << std::setw(12) << r.difference
                << "  ratio=" << std::setw(8) << r.ratio << (band == 0 ? "  OUT OF [3.5, 4.5]" : "") << "\n";
    }
    std::ofstream(std::filesystem::path(out) / "convergence_dt.csv", std::ios::binary) << csv.str();
  }
  std::cout << "tables written to " << out << "\n";
  return ok ? kPass : kFail;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  ss.imbue(std::locale::classic());
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    is.imbue(std::locale::classic());
    T v{};
    if (!(is >> v) || !(is >> std::ws).eof()) throw ConfigError(std::string("bad ") + what + " entry '" + item + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral Galerkin solver for linearized fictitious-domain fluid-structure interaction"};
  app.require_subcommand(1);

  Tolerances tol;
  std::string config, dir, out, report_path, m_text, dt_text;

  auto* run_cmd = app.add_subcommand("run", "integrate a scenario and write trajectory, energy, recovery, report");
  run_cmd->add_option("config", config, "scenario JSON")->required();
  run_cmd->add_option("-o,--out", out, "output directory (default: scenario 'output' or out/<name>)");
  add_tolerance_flags(run_cmd, tol);

  auto* verify_cmd = app.add_subcommand("verify", "re-run diagnostics against a stored run directory");
  verify_cmd->add_option("dir", dir, "run directory")->required();
  verify_cmd->add_option("--report", report_path, "also write the verification JSON here");
  add_tolerance_flags(verify_cmd, tol);

  auto* conv_cmd = app.add_subcommand("converge", "Galerkin (m) and time-step self-convergence tables");
  conv_cmd->add_option("config", config, "scenario JSON")->required();
  conv_cmd->add_option("--m-list", m_text, "comma-separated increasing m values, e.g. 4,8,16");
  conv_cmd->add_option("--dt-list", dt_text, "comma-separated time steps, e.g. 1e-3,5e-4,2.5e-4");
  conv_cmd->add_option("-o,--out", out, "directory for the CSV tables");

  auto* plot_cmd = app.add_subcommand("plotdata", "long-format plot series from a run directory");
  plot_cmd->add_option("dir", dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  }

  try {
    if (*run_cmd) return cmd_run(config, out, tol);
    if (*verify_cmd) return cmd_verify(dir, tol, report_path);
    if (*conv_cmd) {
      const auto m_list = m_text.empty() ? std::vector<int>{} : parse_list<int>(m_text, "--m-list");
      const auto dt_list = dt_text.empty() ? std::vector<double>{} : parse_list<double>(dt_text, "--dt-list");
      if (m_list.empty() && dt_list.empty()) throw ConfigError("converge needs --m-list and/or --dt-list");
      return cmd_converge(config, m_list, dt_list, out);
    }
    if (*plot_cmd) {
      write_plotdata(dir);
      std::cout << "wrote " << (std::filesystem::path(dir) / "plotdata.csv").string() << "\n";
      return kPass;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const GeometryError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const SpectralError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const DiagnosticsError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return kFail;
  }
  return kUsage;
}
