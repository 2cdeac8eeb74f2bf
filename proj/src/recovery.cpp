#include "fsigal/recovery.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

namespace fsigal {

Eigen::VectorXd recover_multiplier(const GalerkinState& state, const Eigen::VectorXd& alpha_rate,
                                   const CouplingCoefficients& coeffs, const SolidEigenBasis& solid,
                                   const PhysicalParams& params) {
  const Eigen::Index m = state.alpha.size();
  const Eigen::Index R = solid.size();
  if (coeffs.delta.rows() != m || coeffs.delta.cols() != R)
    throw RecoveryError("recover_multiplier: coefficient shape does not match the bases");
  // (w', chi_r)_B = c_r sum_j (a'_j delta_jr + a_j delta'_jr)
  const Eigen::VectorXd inertia = coeffs.delta.transpose() * alpha_rate + coeffs.rate.transpose() * state.alpha;
  Eigen::VectorXd l = params.delta_rho() * inertia.cwiseProduct(solid.c);
  l.head(m) += params.kappa * state.beta.cwiseProduct(solid.d.head(m));
  return l;
}

SplitResidual verify_split(const GalerkinState& state, const Eigen::VectorXd& alpha_rate,
                           const Eigen::VectorXd& multiplier, const ComposedBasis& composed,
                           const SolidEigenBasis& solid, const PhysicalParams& params) {
  const auto& ops = *solid.operators;
  const Eigen::Index m = state.alpha.size();
  const Eigen::VectorXd w_rate = composed.values * alpha_rate + composed.rates * state.alpha;
  const Eigen::VectorXd x = solid.modes.leftCols(m) * state.beta;
  const Eigen::VectorXd lambda = solid.modes.leftCols(multiplier.size()) * multiplier;

  const Eigen::VectorXd lhs = params.delta_rho() * ops.apply_mass(w_rate) + params.kappa * ops.apply_stiffness(x);
  SplitResidual out;
  out.per_mode = solid.modes.transpose() * (lhs - ops.apply_c(lambda));
  out.max_abs = out.per_mode.size() ? out.per_mode.cwiseAbs().maxCoeff() : 0.0;
  return out;
}

PressureSolver::PressureSolver(std::shared_ptr<const FluidOperators> ops) : ops_(std::move(ops)) {
  if (!ops_) throw RecoveryError("pressure solver needs fluid operators");
  stiffness_.compute(ops_->stiffness);
  if (stiffness_.info() != Eigen::Success) throw RecoveryError("viscous stiffness factorization failed");

  const Eigen::MatrixXd dt = Eigen::MatrixXd(ops_->divergence.transpose());
  const Eigen::MatrixXd ainv_dt = stiffness_.solve(dt);
  Eigen::MatrixXd schur = ops_->divergence * ainv_dt;
  schur = 0.5 * (schur + schur.transpose()).eval();

  // Spectrum of S relative to M_p = diag(cell areas).
  const Eigen::VectorXd inv_sqrt = ops_->cell_areas.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd scaled = inv_sqrt.asDiagonal() * schur * inv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scaled);
  if (es.info() != Eigen::Success) throw RecoveryError("Schur complement eigensolve failed");
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  int k = 0;
  while (k < ev.size() && ev(k) < 1e-10 * top) ++k;
  if (k == 0) throw RecoveryError("pressure Schur complement has no constant kernel");
  if (k >= ev.size()) throw RecoveryError("pressure Schur complement vanishes");

  kernel_ = inv_sqrt.asDiagonal() * es.eigenvectors().leftCols(k);
  beta_h_ = std::sqrt(std::max(0.0, ev(1)));
  beta_h_reduced_ = std::sqrt(std::max(0.0, ev(k)));

  const double tau = top;
  const Eigen::MatrixXd mz = ops_->cell_areas.asDiagonal() * kernel_;
  stabilized_ = schur + tau * mz * mz.transpose();
  min_stabilized_ = std::min(ev(k), tau);
  factor_.compute(stabilized_);
  if (factor_.info() != Eigen::Success) throw RecoveryError("stabilized Schur complement is not positive definite");
}

double PressureSolver::dual_norm(const Eigen::VectorXd& functional) const {
  return std::sqrt(std::max(0.0, functional.dot(stiffness_.solve(functional))));
}

PressureSolver::Solution PressureSolver::solve(const Eigen::VectorXd& functional) const {
  if (functional.size() != ops_->stiffness.rows())
    throw RecoveryError("pressure functional has " + std::to_string(functional.size()) + " entries, expected " +
                        std::to_string(ops_->stiffness.rows()));
  const Eigen::VectorXd rhs = ops_->divergence * stiffness_.solve(functional);
  Solution out;
  out.pressure = factor_.solve(rhs);
  if (!out.pressure.allFinite()) throw RecoveryError("Schur solve failed");
  const Eigen::VectorXd residual = functional - ops_->divergence.transpose() * out.pressure;
  out.dual_residual = dual_norm(residual);
  return out;
}

Eigen::VectorXd pressure_functional(const GalerkinState& state, const Eigen::VectorXd& alpha_rate,
                                    const Eigen::VectorXd& multiplier, const CouplingContext& ctx,
                                    const PhysicalParams& params) {
  const auto& fluid = ctx.fluid();
  const auto& solid = ctx.solid();
  const Eigen::VectorXd u = fluid.modes * state.alpha;
  const Eigen::VectorXd u_rate = fluid.modes * alpha_rate;
  const Eigen::VectorXd lambda = solid.modes.leftCols(multiplier.size()) * multiplier;
  const auto map = ctx.composition(state.t);
  Eigen::VectorXd l = params.rho_f * (fluid.operators->mass * u_rate) + fluid.operators->stiffness * u;
  l += map.values_transpose(solid.operators->apply_c(lambda));
  return l;
}

RecoveryFields recover(const GalerkinState& state, const PhysicalParams& params, const CouplingContext& ctx,
                       const PressureSolver& pressure) {
  const auto composed = ctx.composed_basis(state.t);
  const auto coeffs = compute_delta(composed, ctx.solid());
  const auto mats = assemble_matrices(coeffs, ctx.solid());
  const auto rate = ode_rhs(state, params, mats, ctx.fluid().eigenvalues);

  RecoveryFields out;
  out.t = state.t;
  out.multiplier = recover_multiplier(state, rate.alpha, coeffs, ctx.solid(), params);
  out.lambda_norm = out.multiplier.norm();
  out.solid_residual = verify_split(state, rate.alpha, out.multiplier, composed, ctx.solid(), params).max_abs;

  const Eigen::VectorXd l = pressure_functional(state, rate.alpha, out.multiplier, ctx, params);
  const auto sol = pressure.solve(l);
  const auto& areas = ctx.fluid().operators->cell_areas;
  out.pressure = sol.pressure;
  out.pressure_norm = std::sqrt(sol.pressure.cwiseAbs2().dot(areas));
  out.pressure_mean = sol.pressure.dot(areas) / areas.sum();
  out.dual_residual = sol.dual_residual;
  const Eigen::VectorXd r = l - ctx.fluid().operators->divergence.transpose() * sol.pressure;
  out.divfree_residual = (ctx.fluid().modes.transpose() * r).cwiseAbs().maxCoeff();
  out.beta_h = pressure.beta_h();
  out.beta_h_reduced = pressure.beta_h_reduced();

  const auto& sops = *ctx.solid().operators;
  const Eigen::VectorXd w_rate = composed.values * rate.alpha + composed.rates * state.alpha;
  const Eigen::VectorXd x = ctx.solid().modes.leftCols(state.beta.size()) * state.beta;
  const double denom = std::sqrt(std::max(0.0, w_rate.dot(sops.apply_mass(w_rate).col(0)))) +
                       params.kappa * std::sqrt(std::max(0.0, x.dot(sops.apply_stiffness(x).col(0))));
  out.continuity_ratio = denom > 0.0 ? out.lambda_norm / denom : 0.0;
  return out;
}

}  // namespace fsigal
