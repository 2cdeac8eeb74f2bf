#include "fsigal/output.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <locale>
#include <sstream>

namespace fsigal {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::ostringstream csv_stream() {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(17);
  return os;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void comment_line(std::ostringstream& os, const Scenario& s) {
  os << "# scenario=" << s.name << " hash=" << s.hash_hex() << "\n";
}

std::string trajectory_csv(const Scenario& s, const Trajectory& traj) {
  auto os = csv_stream();
  comment_line(os, s);
  const int m = traj.samples.empty() ? 0 : static_cast<int>(traj.samples.front().state.alpha.size());
  os << "t";
  for (int j = 1; j <= m; ++j) os << ",alpha_" << j;
  for (int j = 1; j <= m; ++j) os << ",beta_" << j;
  os << "\n";
  for (const auto& smp : traj.samples) {
    os << smp.state.t;
    for (int j = 0; j < m; ++j) os << "," << smp.state.alpha(j);
    for (int j = 0; j < m; ++j) os << "," << smp.state.beta(j);
    os << "\n";
  }
  return os.str();
}

std::string energy_csv(const Scenario& s, const EnergyReport& en, const ConstraintReport& cr) {
  auto os = csv_stream();
  comment_line(os, s);
  os << "t,kinetic,solid_excess,elastic,total,dissipation,dissipation_trapezoid,excess,constraint_residual\n";
  for (std::size_t k = 0; k < en.points.size(); ++k) {
    const auto& p = en.points[k];
    os << p.t << "," << p.terms.kinetic << "," << p.terms.solid_excess << "," << p.terms.elastic << "," << p.total
       << "," << p.dissipation << "," << p.dissipation_trapezoid << "," << p.excess << ","
       << (k < cr.per_sample.size() ? cr.per_sample[k] : std::numeric_limits<double>::quiet_NaN()) << "\n";
  }
  return os.str();
}

std::string recovery_csv(const Scenario& s, const std::vector<RecoveryFields>& rec) {
  auto os = csv_stream();
  comment_line(os, s);
  os << "t,lambda_h1,pressure_l2,solid_residual,divfree_residual,dual_residual,beta_h,beta_h_reduced,"
        "pressure_mean,continuity_ratio\n";
  for (const auto& r : rec) {
    os << r.t << "," << r.lambda_norm << "," << r.pressure_norm << "," << r.solid_residual << ","
       << r.divfree_residual << "," << r.dual_residual << "," << r.beta_h << "," << r.beta_h_reduced << ","
       << r.pressure_mean << "," << r.continuity_ratio << "\n";
  }
  return os.str();
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// JSON numbers cannot be NaN/inf; those become null.
json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

RunArtifacts run_scenario(const Simulation& sim, const Tolerances& tol) {
  const auto& sc = sim.scenario;
  RunArtifacts out;
  out.trajectory = run(sim.ctx, sc.params, sim.initial, sc.time, sc.step);
  out.energy = energy(out.trajectory, sim.ctx);
  out.constraint = constraint_residual(out.trajectory, sim.ctx);
  const PressureSolver pressure(sim.ctx.fluid().operators);
  for (const auto& s : out.trajectory.samples) out.recovery.push_back(recover(s.state, sc.params, sim.ctx, pressure));
  out.report = verify_trajectory(out.trajectory, sim.ctx, out.recovery, tol);
  const bool assumption = sim.assumption.passed;
  out.report.checks.insert(out.report.checks.begin(),
                           Check{"motion_assumption", assumption, sim.assumption.max_det_defect, 1e-10});
  return out;
}

std::string report_json(const Scenario& scenario, const VerificationReport& report) {
  json j;
  j["scenario"] = scenario.name;
  j["hash"] = scenario.hash_hex();
  j["passed"] = report.passed();
  json checks = json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"pass", c.pass},
                      {"measured", number_or_null(c.measured)},
                      {"threshold", number_or_null(c.threshold)}});
  }
  j["checks"] = checks;
  return j.dump(2) + "\n";
}

void write_outputs(const std::string& dir, const Scenario& scenario, const RunArtifacts& run) {
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  write_file(root / "scenario.json", json::parse(scenario.canonical).dump(2) + "\n");
  write_file(root / "trajectory.csv", trajectory_csv(scenario, run.trajectory));
  write_file(root / "energy.csv", energy_csv(scenario, run.energy, run.constraint));
  write_file(root / "recovery.csv", recovery_csv(scenario, run.recovery));
  write_file(root / "report.json", report_json(scenario, run.report));
  json meta = {{"created", timestamp_utc()}, {"scenario", scenario.name}, {"hash", scenario.hash_hex()}};
  write_file(root / "metadata.json", meta.dump(2) + "\n");
  write_plotdata(dir);
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return static_cast<int>(k);
  return -1;
}

CsvTable read_csv(const std::string& path) {
  const std::string text = read_file(path);
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.comments.push_back(line.substr(1));
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (t.header.empty()) {
      t.header = cells;
      continue;
    }
    if (cells.size() != t.header.size())
      throw IoError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                    " columns, found " + std::to_string(cells.size()));
    std::vector<double> row;
    for (const auto& c : cells) {
      std::istringstream cs(c);
      cs.imbue(std::locale::classic());
      double x = 0.0;
      if (c == "nan" || c == "-nan") {
        x = std::numeric_limits<double>::quiet_NaN();
      } else if (!(cs >> x) || !cs.eof()) {
        throw IoError(path + ":" + std::to_string(lineno) + ": not a number: '" + c + "'");
      }
      row.push_back(x);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw IoError(path + ": no header row");
  return t;
}

std::vector<GalerkinState> read_trajectory(const std::string& path, int m) {
  const auto t = read_csv(path);
  if (static_cast<int>(t.header.size()) != 1 + 2 * m)
    throw IoError(path + ": expected " + std::to_string(1 + 2 * m) + " columns for m=" + std::to_string(m));
  std::vector<GalerkinState> out;
  for (const auto& r : t.rows) {
    GalerkinState s;
    s.t = r[0];
    s.alpha = Eigen::Map<const Eigen::VectorXd>(r.data() + 1, m);
    s.beta = Eigen::Map<const Eigen::VectorXd>(r.data() + 1 + m, m);
    out.push_back(std::move(s));
  }
  return out;
}

void write_plotdata(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw IoError("no such run directory: " + dir);
  const auto energy_table = read_csv((root / "energy.csv").string());
  const auto recovery_table = read_csv((root / "recovery.csv").string());
  auto os = csv_stream();
  if (!energy_table.comments.empty()) os << "#" << energy_table.comments.front() << "\n";
  os << "series,t,value\n";
  auto emit = [&](const CsvTable& table, const std::string& column, const std::string& series) {
    const int c = table.column(column);
    const int tc = table.column("t");
    if (c < 0 || tc < 0) throw IoError("column '" + column + "' missing in " + dir);
    for (const auto& r : table.rows) os << series << "," << r[static_cast<std::size_t>(tc)] << "," << r[static_cast<std::size_t>(c)] << "\n";
  };
  for (const char* c : {"kinetic", "solid_excess", "elastic", "total", "dissipation", "excess", "constraint_residual"})
    emit(energy_table, c, std::string("energy.") + c);
  for (const char* c : {"lambda_h1", "pressure_l2", "solid_residual", "divfree_residual", "dual_residual"})
    emit(recovery_table, c, std::string("recovery.") + c);
  write_file(root / "plotdata.csv", os.str());
}

VerificationReport verify_directory(const std::string& dir, const Tolerances& tol) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw IoError("no such run directory: " + dir);
  for (const char* f : {"scenario.json", "trajectory.csv", "energy.csv"})
    if (!fs::exists(root / f)) throw IoError("missing " + (root / f).string());

  const auto scenario = load_scenario((root / "scenario.json").string());
  const auto sim = build_simulation(scenario);
  const auto fresh_traj = run(sim.ctx, scenario.params, sim.initial, scenario.time, scenario.step);

  const auto stored = read_trajectory((root / "trajectory.csv").string(), scenario.m);
  VerificationReport rep;
  auto add = [&](std::string name, double measured, double threshold, bool pass) {
    rep.checks.push_back({std::move(name), pass, measured, threshold});
  };

  const auto traj_table = read_csv((root / "trajectory.csv").string());
  const bool hash_ok = !traj_table.comments.empty() &&
                       traj_table.comments.front().find("hash=" + scenario.hash_hex()) != std::string::npos;
  add("scenario_hash", hash_ok ? 0.0 : 1.0, 0.0, hash_ok);

  if (stored.size() != fresh_traj.samples.size()) {
    add("trajectory_length", static_cast<double>(stored.size()),
        static_cast<double>(fresh_traj.samples.size()), false);
    return rep;
  }

  // Replace the recomputed states by the stored ones; w and the coupling
  // matrices depend only on t and the run, so the checks see the file.
  Trajectory traj = fresh_traj;
  double repro = 0.0;
  for (std::size_t k = 0; k < stored.size(); ++k) {
    auto& smp = traj.samples[k];
    const double scale = std::max(1.0, std::max(smp.state.alpha.cwiseAbs().maxCoeff(), smp.state.beta.cwiseAbs().maxCoeff()));
    repro = std::max(repro, std::abs(stored[k].t - smp.state.t));
    repro = std::max(repro, (stored[k].alpha - smp.state.alpha).cwiseAbs().maxCoeff() / scale);
    repro = std::max(repro, (stored[k].beta - smp.state.beta).cwiseAbs().maxCoeff() / scale);
    if (!stored[k].alpha.allFinite() || !stored[k].beta.allFinite() || !std::isfinite(stored[k].t))
      repro = std::numeric_limits<double>::infinity();
    smp.state.alpha = stored[k].alpha;
    smp.state.beta = stored[k].beta;
  }
  add("trajectory_reproduction", repro, 1e-12, repro <= 1e-12);

  const PressureSolver pressure(sim.ctx.fluid().operators);
  std::vector<RecoveryFields> recovery;
  for (const auto& s : traj.samples) recovery.push_back(recover(s.state, scenario.params, sim.ctx, pressure));
  const auto base = verify_trajectory(traj, sim.ctx, recovery, tol);
  rep.checks.insert(rep.checks.end(), base.checks.begin(), base.checks.end());

  const auto energy_table = read_csv((root / "energy.csv").string());
  const int total_col = energy_table.column("total");
  const auto en = energy(traj, sim.ctx);
  double gap = total_col < 0 || energy_table.rows.size() != en.points.size() ? std::numeric_limits<double>::infinity() : 0.0;
  if (std::isfinite(gap)) {
    for (std::size_t k = 0; k < en.points.size(); ++k)
      gap = std::max(gap, std::abs(energy_table.rows[k][static_cast<std::size_t>(total_col)] - en.points[k].total) /
                              std::max(1.0, std::abs(en.points[k].total)));
  }
  add("energy_csv_consistency", gap, 1e-12, gap <= 1e-12);
  return rep;
}

}  // namespace fsigal
