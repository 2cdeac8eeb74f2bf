#pragma once

#include "fsigal/coupling.hpp"
#include "fsigal/evolution.hpp"
#include "fsigal/geometry.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fsigal {

/// Configuration problem; the message starts with "<origin>:<line>:" when the
/// offending entry could be located in the source text.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, int line = 0) : std::runtime_error(message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

inline constexpr const char* kScenarioSchema = "fsigal.scenario/1";

struct MotionSpec {
  MotionKind kind = MotionKind::identity;
  double final_time = 0.5;
  Point velocity = Point::Zero();  ///< translation
  Point center = Point(0.5, 0.5);  ///< rotation
  double angular_velocity = 0.0;   ///< rotation
  double shear_rate = 0.0;         ///< shear
};

PrescribedMotion make_motion(const MotionSpec& spec);

enum class InitialKind { zero, first_fluid_mode, custom };

struct InitialSpec {
  InitialKind kind = InitialKind::zero;
  double amplitude = 1.0;
  std::vector<double> coefficients;  ///< custom: u0 = sum_j coefficients[j] psi_j
};

struct Scenario {
  std::string name;
  GeometryConfig geometry;
  MotionSpec motion;
  PhysicalParams params;
  int m = 8;
  int R = 32;
  TimeGrid time;
  StepOptions step;
  InitialSpec initial;
  std::string output_dir;

  /// Canonical JSON text (sorted keys, defaults filled in).
  std::string canonical;
  std::uint64_t hash = 0;
  std::string hash_hex() const;
};

/// Parses and validates a scenario. `origin` prefixes error messages.
Scenario parse_scenario(const std::string& text, const std::string& origin = "scenario");
Scenario load_scenario(const std::string& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);

/// Grids, bases, coupling context and projected initial state of a scenario.
/// `m_override` builds a larger fluid basis (convergence studies).
struct Simulation {
  Scenario scenario;
  CouplingContext ctx;
  InitialData data;
  GalerkinState initial;
  AssumptionReport assumption;
};

Simulation build_simulation(const Scenario& scenario, std::optional<int> m_override = std::nullopt);

/// u0 on interior fluid dofs for the scenario's initial selector.
Eigen::VectorXd initial_velocity(const InitialSpec& spec, const FluidEigenBasis& fluid);

}  // namespace fsigal
