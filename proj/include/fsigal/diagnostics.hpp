#pragma once

#include "fsigal/coupling.hpp"
#include "fsigal/evolution.hpp"
#include "fsigal/recovery.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace fsigal {

class DiagnosticsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EnergyTerms {
  double kinetic = 0.0;       ///< rho_f |alpha|^2
  double solid_excess = 0.0;  ///< drho alpha^T C alpha
  double elastic = 0.0;       ///< kappa sum_{r<=m} beta_r^2 d_r
  double total() const { return kinetic + solid_excess + elastic; }
};

EnergyTerms energy_terms(const GalerkinState& state, const Eigen::MatrixXd& C, const Eigen::VectorXd& d,
                         const PhysicalParams& params);

struct EnergyPoint {
  double t = 0.0;
  EnergyTerms terms;
  double total = 0.0;
  /// Dissipation accumulated by the scheme, 2 sum h alpha_mid^T Lambda alpha_mid.
  double dissipation = 0.0;
  /// Trapezoid rule for 2 int alpha^T Lambda alpha on the output times; for
  /// comparison only, it is O(dt_out^2) off the scheme's value.
  double dissipation_trapezoid = 0.0;
  /// E(t) + dissipation(t) - E(0)
  double excess = 0.0;
};

struct EnergyReport {
  std::vector<EnergyPoint> points;
  double initial = 0.0;
  double max_excess = 0.0;
  /// max_t (|u(t)| + |grad X(t)|) / (|u0| + |u_s0|_B + |B|^{1/2})
  double apriori_ratio = 0.0;
};

EnergyReport energy(const Trajectory& traj, const CouplingContext& ctx);

/// max_i |c(phi_i(t), u o X(t) - w(t))| for every sample, with w(t) the
/// stored solid velocity of the run and u built from the stored alpha.
struct ConstraintReport {
  std::vector<double> per_sample;
  double max_abs = 0.0;
};

ConstraintReport constraint_residual(const Trajectory& traj, const CouplingContext& ctx);
double constraint_residual(const TrajectorySample& sample, const CouplingContext& ctx);

/// Partial sums of the Parseval-type series for fluid mode j.
struct SeriesTailRow {
  double t = 0.0;
  int R = 0;
  double weighted = 0.0;       ///< sum_{r<=R} delta_jr^2 c_r
  double plain = 0.0;          ///< sum_{r<=R} delta_jr^2
  double rate_weighted = 0.0;  ///< sum_{r<=R} delta'_jr^2 c_r
  double oracle = 0.0;         ///< ||psi_j o X(t)||^2_{0,B} by quadrature at mapped Gauss points
  double gap = 0.0;            ///< |oracle - weighted| / oracle
  double saturation = 0.0;     ///< last increment / weighted
};

/// j is zero-based. Every R in R_list must be <= ctx.R().
std::vector<SeriesTailRow> series_tail(const CouplingContext& ctx, int j, const std::vector<int>& R_list,
                                       const std::vector<double>& times);

/// ||psi_j o X(t)||^2_{0,B} from the fluid field evaluated at the mapped solid
/// Gauss points.
double composed_norm_squared(const CouplingContext& ctx, int j, double t);

struct DifferenceReport {
  std::vector<double> t;
  std::vector<double> energy;  ///< difference energy at each sample
  double max_increase = 0.0;   ///< max over consecutive samples of E_hat(n+1) - E_hat(n)
  double max_alpha = 0.0;
  double max_beta = 0.0;
};

DifferenceReport difference_decay(const Trajectory& a, const Trajectory& b, const CouplingContext& ctx);

struct CauchyRow {
  int m_coarse = 0;
  int m_fine = 0;
  double fluid = 0.0;    ///< |u^{m2}(T) - u^{m1}(T)|_{0,Omega}
  double elastic = 0.0;  ///< |grad (X^{m2}(T) - X^{m1}(T))|_{0,B}
};

/// Runs each m in `m_list` on ctx truncated to (m, R) with the same grids and
/// compares terminal states. `u0` is an interior fluid field compatible with
/// the t=0 solid velocity it induces.
std::vector<CauchyRow> convergence_study(const CouplingContext& ctx, const PhysicalParams& params,
                                         const Eigen::VectorXd& u0, const TimeGrid& time,
                                         const std::vector<int>& m_list, const StepOptions& options = {});

struct SelfConvergenceRow {
  double dt = 0.0;
  double difference = 0.0;  ///< |y_dt(T) - y_{next dt}(T)|; NaN on the last row
  double ratio = 0.0;       ///< difference / next difference; NaN when undefined
};

std::vector<SelfConvergenceRow> dt_self_convergence(const CouplingContext& ctx, const PhysicalParams& params,
                                                    const GalerkinState& initial, double final_time,
                                                    const std::vector<double>& dt_list,
                                                    const StepOptions& options = {});

/// Projected displacement consistency |P_m (X^m(t) - X^m(0) - int_0^t w^m)|_{0,B}
/// with the integral taken by the trapezoid rule on output samples.
double displacement_consistency(const Trajectory& traj, const CouplingContext& ctx);

struct Check {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double threshold = 0.0;
};

struct Tolerances {
  double energy = 1e-8;
  double constraint = 1e-9;
  double split = 1e-9;
  double divfree = 1e-8;
  double pressure_mean = 1e-10;
  double c_symmetry = 1e-12;
  double c_psd = 1e-10;
  double mass_invertibility = kMassInvertibilityThreshold;
  double apriori = 10.0;
};

struct VerificationReport {
  std::vector<Check> checks;
  bool passed() const;
  const Check* first_failure() const;
};

/// Default checks on a run: energy inequality (drho >= 0 only), constraint
/// residual, C symmetric PSD, mass-correction invertibility, a priori guard,
/// and the recovery residuals when `recovery` is non-empty.
VerificationReport verify_trajectory(const Trajectory& traj, const CouplingContext& ctx,
                                     const std::vector<RecoveryFields>& recovery, const Tolerances& tol = {});

}  // namespace fsigal
