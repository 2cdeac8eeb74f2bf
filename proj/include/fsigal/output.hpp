#pragma once

#include "fsigal/diagnostics.hpp"
#include "fsigal/recovery.hpp"
#include "fsigal/scenario.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace fsigal {

/// Missing or unreadable files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunArtifacts {
  Trajectory trajectory;
  EnergyReport energy;
  ConstraintReport constraint;
  std::vector<RecoveryFields> recovery;
  VerificationReport report;
};

/// Integrates, recovers lambda and p at every output time and runs the
/// default checks.
RunArtifacts run_scenario(const Simulation& sim, const Tolerances& tol = {});

/// trajectory.csv, energy.csv, recovery.csv, report.json, plotdata.csv,
/// scenario.json (canonical) and metadata.json (the only file with a
/// timestamp).
void write_outputs(const std::string& dir, const Scenario& scenario, const RunArtifacts& run);

/// Long-format (series,t,value) table built from energy.csv and recovery.csv.
void write_plotdata(const std::string& dir);

struct CsvTable {
  std::vector<std::string> comments;  ///< '#' lines, without the marker
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  ///< -1 when absent
};

CsvTable read_csv(const std::string& path);

/// States stored in trajectory.csv.
std::vector<GalerkinState> read_trajectory(const std::string& path, int m);

/// Rebuilds the scenario stored in `dir`, re-runs it, and checks the stored
/// files against the recomputation plus the default checks evaluated on the
/// stored states.
VerificationReport verify_directory(const std::string& dir, const Tolerances& tol = {});

std::string report_json(const Scenario& scenario, const VerificationReport& report);

}  // namespace fsigal
