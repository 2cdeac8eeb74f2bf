#pragma once

#include "fsigal/coupling.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace fsigal {

class EvolutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PhysicalParams {
  double rho_f = 1.0;
  double rho_s = 1.0;
  double nu_f = 1.0;
  double nu_s = 1.0;
  double kappa = 1.0;

  double delta_rho() const { return rho_s - rho_f; }
  double nu_0() const { return std::min(nu_f, nu_s); }
  /// Throws std::invalid_argument unless every parameter is strictly positive.
  void validate() const;
};

/// Coefficients of u^m = sum alpha_j psi_j (and w^m = sum alpha_j phi_j(t)) and
/// X^m = sum beta_j chi_j.
struct GalerkinState {
  double t = 0.0;
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
};

struct StateRate {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
};

/// u0 on interior fluid dofs, u_s0 on solid nodal dofs. X0 is the identity.
struct InitialData {
  Eigen::VectorXd u0;
  Eigen::VectorXd us0;
};

/// Initial data whose solid velocity is the restriction of u0 to B, so the
/// compatibility condition holds by construction.
InitialData compatible_initial_data(const CouplingContext& ctx, const Eigen::VectorXd& u0);

/// ||u0 o X(0) - u_s0||_{0,B}
double compatibility_defect(const CouplingContext& ctx, const InitialData& data);

/// alpha_0j = (u0, psi_j), beta_0j = (s, chi_j)_B / c_j. Throws EvolutionError
/// when the data violate div u0 = 0 or u0|_B = u_s0 beyond 1e-10.
GalerkinState project_initial_data(const InitialData& data, const CouplingContext& ctx);

/// Smallest eigenvalue of rho_f I + delta_rho C.
double mass_correction_min_eigenvalue(const PhysicalParams& params, const CoupledMatrices& mats);

inline constexpr double kMassInvertibilityThreshold = 1e-10;

/// alpha' = -(rho_f I + drho C)^{-1} [(Lambda_f + drho D) alpha + kappa E beta],
/// beta'  = B^T alpha.
StateRate ode_rhs(const GalerkinState& state, const PhysicalParams& params, const CoupledMatrices& mats,
                  const Eigen::VectorXd& fluid_eigenvalues);

struct StepReport {
  GalerkinState state;
  Eigen::VectorXd alpha_mid;
  Eigen::VectorXd beta_mid;
  CoupledMatrices midpoint_matrices;
  /// 2 h alpha_mid^T Lambda_f alpha_mid, summed over substeps
  double dissipation = 0.0;
  double mass_min_eigenvalue = 0.0;
  int substeps = 1;
};

/// How the coupling matrices enter a step.
///  - `averaged`: one midpoint solve per step with B, C, D, E replaced by their
///    means over [t, t+dt], taken by two-point Gauss rules on the smooth pieces
///    between breakpoints. Second order for piecewise smooth coefficients
///    however densely the breakpoints fall.
///  - `midpoint`: matrices frozen at the midpoint of each substep, splitting the
///    step at breakpoints when `split_at_breakpoints` is set.
///  - `secant`: as `midpoint`, but sym D is replaced by (C(t+h) - C(t)) / (2h);
///    since C' = D + D^T this is the exact average of sym D over the substep.
enum class RateForm { averaged, midpoint, secant };

struct StepOptions {
  RateForm rate = RateForm::averaged;
  /// midpoint/secant: subdivide at times where a mapped solid Gauss point
  /// crosses a fluid grid line, so every solve sees smooth coefficients.
  bool split_at_breakpoints = true;
};

/// Means of B, C, D, E over [t0, t1] (two-point Gauss on each smooth piece).
CoupledMatrices averaged_matrices(const CouplingContext& ctx, double t0, double t1);

/// One implicit-midpoint step with the coupling matrices frozen at t + dt/2.
StepReport step(const GalerkinState& state, double dt, const PhysicalParams& params, const CoupledMatrices& mid,
                const Eigen::VectorXd& fluid_eigenvalues);

/// Midpoint step whose symmetric D is the secant of C over [t, t+dt].
StepReport step(const GalerkinState& state, double dt, const PhysicalParams& params, const CoupledMatrices& mid,
                const Eigen::MatrixXd& c_begin, const Eigen::MatrixXd& c_end,
                const Eigen::VectorXd& fluid_eigenvalues);

/// Advances over [t, t+dt] with the scheme selected by `options`. `c_begin`,
/// when given, must equal C(t) and saves one evaluation; C(t+dt) is written to
/// `c_end` when non-null.
StepReport step(const GalerkinState& state, double dt, const PhysicalParams& params, const CouplingContext& ctx,
                const StepOptions& options = {}, const Eigen::MatrixXd* c_begin = nullptr,
                Eigen::MatrixXd* c_end = nullptr);

struct TimeGrid {
  double final_time = 0.5;
  double dt = 5e-4;
  double dt_out = 0.01;

  int steps() const;
  int steps_per_output() const;
};

struct TrajectorySample {
  GalerkinState state;
  CouplingCoefficients coefficients;
  CoupledMatrices matrices;
  /// w^m(t) = sum alpha_j phi_j(t) on solid nodal dofs, as produced by the run.
  Eigen::VectorXd solid_velocity;
  /// Cumulative scheme dissipation 2 sum dt alpha_mid^T Lambda alpha_mid.
  double dissipation = 0.0;
  /// Smallest mass-correction eigenvalue seen since the previous sample.
  double mass_min_eigenvalue = 0.0;
};

struct Trajectory {
  PhysicalParams params;
  TimeGrid time;
  StepOptions options;
  std::vector<TrajectorySample> samples;

  const TrajectorySample& back() const { return samples.back(); }
};

/// Builds the sample record (matrices, w^m) for a state.
TrajectorySample make_sample(const GalerkinState& state, const CouplingContext& ctx);

Trajectory run(const CouplingContext& ctx, const PhysicalParams& params, const GalerkinState& initial,
               const TimeGrid& time, const StepOptions& options = {});

/// u^m on fluid interior dofs.
Eigen::VectorXd fluid_velocity(const CouplingContext& ctx, const Eigen::VectorXd& alpha);
/// X^m on solid nodal dofs.
Eigen::VectorXd solid_displacement_map(const CouplingContext& ctx, const Eigen::VectorXd& beta);

}  // namespace fsigal
