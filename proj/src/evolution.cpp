#include "fsigal/evolution.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fsigal {

void PhysicalParams::validate() const {
  if (!(rho_f > 0.0) || !(rho_s > 0.0)) throw std::invalid_argument("densities must be positive");
  if (!(nu_f > 0.0) || !(nu_s > 0.0)) throw std::invalid_argument("viscosities must be positive");
  if (!(kappa > 0.0)) throw std::invalid_argument("elastic modulus kappa must be positive");
}

Eigen::VectorXd fluid_velocity(const CouplingContext& ctx, const Eigen::VectorXd& alpha) {
  return ctx.fluid().modes * alpha;
}

Eigen::VectorXd solid_displacement_map(const CouplingContext& ctx, const Eigen::VectorXd& beta) {
  return ctx.solid().modes.leftCols(beta.size()) * beta;
}

InitialData compatible_initial_data(const CouplingContext& ctx, const Eigen::VectorXd& u0) {
  InitialData data;
  data.u0 = u0;
  data.us0 = ctx.composition(0.0).values(u0);
  return data;
}

double compatibility_defect(const CouplingContext& ctx, const InitialData& data) {
  const Eigen::VectorXd diff = ctx.composition(0.0).values(data.u0) - data.us0;
  return std::sqrt(std::max(0.0, diff.dot(ctx.solid().operators->apply_mass(diff).col(0))));
}

GalerkinState project_initial_data(const InitialData& data, const CouplingContext& ctx) {
  const auto& fluid = ctx.fluid();
  if (data.u0.size() != fluid.modes.rows()) throw EvolutionError("initial fluid velocity has the wrong size");
  if (data.us0.size() != ctx.solid_grid().num_dofs()) throw EvolutionError("initial solid velocity has the wrong size");

  const double scale = std::max(1.0, std::sqrt(data.u0.dot(fluid.operators->mass * data.u0)));
  const double div = discrete_divergence_norm(*fluid.operators, data.u0);
  if (div > 1e-10 * scale)
    throw EvolutionError("incompatible initial data: div u0 = " + std::to_string(div) + " (need div u0 = 0)");
  const double defect = compatibility_defect(ctx, data);
  if (defect > 1e-10 * scale)
    throw EvolutionError("incompatible initial data: ||u0|_B - u_s0|| = " + std::to_string(defect) +
                         " (need u0 restricted to B equal to u_s0)");

  GalerkinState s;
  s.t = 0.0;
  s.alpha = fluid.modes.transpose() * (fluid.operators->mass * data.u0);

  const auto& solid = ctx.solid();
  const int m = ctx.m();
  const int nodes = ctx.solid_grid().num_nodes();
  Eigen::VectorXd identity(2 * nodes);
  identity.head(nodes) = ctx.solid_grid().mesh.nodes().row(0).transpose();
  identity.tail(nodes) = ctx.solid_grid().mesh.nodes().row(1).transpose();
  const Eigen::VectorXd moments = solid.modes.leftCols(m).transpose() * solid.operators->apply_mass(identity);
  s.beta = moments.cwiseQuotient(solid.c.head(m));
  return s;
}

double mass_correction_min_eigenvalue(const PhysicalParams& params, const CoupledMatrices& mats) {
  const Eigen::Index m = mats.C.rows();
  const Eigen::MatrixXd mass =
      params.rho_f * Eigen::MatrixXd::Identity(m, m) + params.delta_rho() * mats.C;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mass, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

namespace {

void require_invertible(double min_eig, double t) {
  if (!(min_eig >= kMassInvertibilityThreshold)) {
    throw EvolutionError("mass correction rho_f I + drho C(t) is not invertible at t=" + std::to_string(t) +
                         ": min eigenvalue " + std::to_string(min_eig));
  }
}

}  // namespace

StateRate ode_rhs(const GalerkinState& state, const PhysicalParams& params, const CoupledMatrices& mats,
                  const Eigen::VectorXd& fluid_eigenvalues) {
  const Eigen::Index m = state.alpha.size();
  const double drho = params.delta_rho();
  require_invertible(mass_correction_min_eigenvalue(params, mats), mats.t);

  const Eigen::MatrixXd mass = params.rho_f * Eigen::MatrixXd::Identity(m, m) + drho * mats.C;
  const Eigen::MatrixXd damping = Eigen::MatrixXd(fluid_eigenvalues.head(m).asDiagonal()) + drho * mats.D;
  const Eigen::VectorXd force = damping * state.alpha + params.kappa * (mats.E * state.beta);

  StateRate r;
  r.alpha = -mass.ldlt().solve(force);
  r.beta = mats.B.transpose() * state.alpha;
  return r;
}

namespace {

StepReport solve_midpoint(const GalerkinState& state, double dt, const PhysicalParams& params,
                          const CoupledMatrices& mid, const Eigen::MatrixXd& drift,
                          const Eigen::VectorXd& fluid_eigenvalues) {
  if (!(dt > 0.0)) throw EvolutionError("time step must be positive");
  const Eigen::Index m = state.alpha.size();
  const double drho = params.delta_rho();

  StepReport rep;
  rep.mass_min_eigenvalue = mass_correction_min_eigenvalue(params, mid);
  require_invertible(rep.mass_min_eigenvalue, mid.t);

  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(m, m);
  const Eigen::MatrixXd mass = params.rho_f * id + drho * mid.C;
  const Eigen::MatrixXd lambda = fluid_eigenvalues.head(m).asDiagonal();
  const Eigen::MatrixXd damping = lambda + drho * drift;
  const Eigen::MatrixXd elastic = params.kappa * mid.E;

  // [mass/dt + damping/2, elastic/2; -B^T/2, I/dt] [a1; b1] = rhs
  Eigen::MatrixXd sys(2 * m, 2 * m);
  sys.topLeftCorner(m, m) = mass / dt + 0.5 * damping;
  sys.topRightCorner(m, m) = 0.5 * elastic;
  sys.bottomLeftCorner(m, m) = -0.5 * mid.B.transpose();
  sys.bottomRightCorner(m, m) = id / dt;

  Eigen::VectorXd rhs(2 * m);
  rhs.head(m) = (mass / dt - 0.5 * damping) * state.alpha - 0.5 * elastic * state.beta;
  rhs.tail(m) = state.beta / dt + 0.5 * mid.B.transpose() * state.alpha;

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys);
  const Eigen::VectorXd next = lu.solve(rhs);
  if (!next.allFinite()) throw EvolutionError("midpoint linear solve failed at t=" + std::to_string(state.t));

  rep.state.t = state.t + dt;
  rep.state.alpha = next.head(m);
  rep.state.beta = next.tail(m);
  rep.alpha_mid = 0.5 * (state.alpha + rep.state.alpha);
  rep.beta_mid = 0.5 * (state.beta + rep.state.beta);
  rep.dissipation = 2.0 * dt * rep.alpha_mid.dot(lambda * rep.alpha_mid);
  rep.midpoint_matrices = mid;
  return rep;
}

}  // namespace

StepReport step(const GalerkinState& state, double dt, const PhysicalParams& params, const CoupledMatrices& mid,
                const Eigen::VectorXd& fluid_eigenvalues) {
  return solve_midpoint(state, dt, params, mid, mid.D, fluid_eigenvalues);
}

StepReport step(const GalerkinState& state, double dt, const PhysicalParams& params, const CoupledMatrices& mid,
                const Eigen::MatrixXd& c_begin, const Eigen::MatrixXd& c_end,
                const Eigen::VectorXd& fluid_eigenvalues) {
  if (!(dt > 0.0)) throw EvolutionError("time step must be positive");
  const Eigen::MatrixXd skew = 0.5 * (mid.D - mid.D.transpose());
  const Eigen::MatrixXd drift = skew + (0.5 / dt) * (c_end - c_begin);
  return solve_midpoint(state, dt, params, mid, drift, fluid_eigenvalues);
}

CoupledMatrices averaged_matrices(const CouplingContext& ctx, double t0, double t1) {
  if (!(t1 > t0)) throw EvolutionError("averaging interval must have positive length");
  std::vector<double> knots{t0};
  const auto inner = ctx.breakpoints(t0, t1);
  knots.insert(knots.end(), inner.begin(), inner.end());
  knots.push_back(t1);
  const double g = 0.5 / std::sqrt(3.0);
  CoupledMatrices avg;
  bool first = true;
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double h = knots[k + 1] - knots[k];
    const double w = 0.5 * h / (t1 - t0);
    for (double x : {0.5 - g, 0.5 + g}) {
      const auto mats = ctx.matrices(knots[k] + x * h);
      if (first) {
        avg.B = w * mats.B;
        avg.C = w * mats.C;
        avg.D = w * mats.D;
        avg.E = w * mats.E;
        first = false;
      } else {
        avg.B += w * mats.B;
        avg.C += w * mats.C;
        avg.D += w * mats.D;
        avg.E += w * mats.E;
      }
      avg.c_asymmetry = std::max(avg.c_asymmetry, mats.c_asymmetry);
      avg.tail = std::max(avg.tail, mats.tail);
    }
  }
  avg.t = 0.5 * (t0 + t1);
  return avg;
}

StepReport step(const GalerkinState& state, double dt, const PhysicalParams& params, const CouplingContext& ctx,
                const StepOptions& options, const Eigen::MatrixXd* c_begin, Eigen::MatrixXd* c_end) {
  if (!(dt > 0.0)) throw EvolutionError("time step must be positive");
  const double t0 = state.t, t1 = state.t + dt;
  if (options.rate == RateForm::averaged) {
    auto rep = step(state, dt, params, averaged_matrices(ctx, t0, t1), ctx.fluid().eigenvalues);
    rep.state.t = t1;
    rep.substeps = 1;
    if (c_end) *c_end = ctx.matrices(t1).C;
    return rep;
  }
  std::vector<double> knots{t0};
  if (options.split_at_breakpoints) {
    const auto inner = ctx.breakpoints(t0, t1);
    knots.insert(knots.end(), inner.begin(), inner.end());
  }
  knots.push_back(t1);

  const bool secant = options.rate == RateForm::secant;
  Eigen::MatrixXd c_prev;
  if (secant) c_prev = c_begin ? *c_begin : ctx.matrices(t0).C;

  StepReport total;
  total.state = state;
  total.mass_min_eigenvalue = std::numeric_limits<double>::infinity();
  total.substeps = static_cast<int>(knots.size()) - 1;
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double h = knots[k + 1] - knots[k];
    GalerkinState cur = total.state;
    cur.t = knots[k];
    const auto mid = ctx.matrices(knots[k] + 0.5 * h);
    StepReport rep;
    if (secant) {
      Eigen::MatrixXd c_next = ctx.matrices(knots[k + 1]).C;
      rep = step(cur, h, params, mid, c_prev, c_next, ctx.fluid().eigenvalues);
      c_prev = std::move(c_next);
    } else {
      rep = step(cur, h, params, mid, ctx.fluid().eigenvalues);
    }
    total.state = std::move(rep.state);
    total.alpha_mid = std::move(rep.alpha_mid);
    total.beta_mid = std::move(rep.beta_mid);
    total.midpoint_matrices = std::move(rep.midpoint_matrices);
    total.dissipation += rep.dissipation;
    total.mass_min_eigenvalue = std::min(total.mass_min_eigenvalue, rep.mass_min_eigenvalue);
  }
  total.state.t = t1;
  if (c_end) *c_end = secant ? c_prev : ctx.matrices(t1).C;
  return total;
}

int TimeGrid::steps() const {
  if (!(dt > 0.0) || !(final_time > 0.0)) throw EvolutionError("time grid needs positive dt and final time");
  const double n = final_time / dt;
  const long k = std::lround(n);
  if (k < 1 || std::abs(n - static_cast<double>(k)) > 1e-8 * n)
    throw EvolutionError("final time must be an integer multiple of dt");
  return static_cast<int>(k);
}

int TimeGrid::steps_per_output() const {
  if (!(dt_out > 0.0)) throw EvolutionError("output interval must be positive");
  const double n = dt_out / dt;
  const long k = std::lround(n);
  if (k < 1 || std::abs(n - static_cast<double>(k)) > 1e-8 * n)
    throw EvolutionError("output interval must be an integer multiple of dt");
  if (steps() % k != 0) throw EvolutionError("final time must be an integer multiple of the output interval");
  return static_cast<int>(k);
}

TrajectorySample make_sample(const GalerkinState& state, const CouplingContext& ctx) {
  TrajectorySample s;
  s.state = state;
  const auto composed = ctx.composed_basis(state.t);
  s.coefficients = compute_delta(composed, ctx.solid());
  s.matrices = assemble_matrices(s.coefficients, ctx.solid());
  s.solid_velocity = composed.values * state.alpha;
  return s;
}

Trajectory run(const CouplingContext& ctx, const PhysicalParams& params, const GalerkinState& initial,
               const TimeGrid& time, const StepOptions& options) {
  params.validate();
  const int steps = time.steps();
  const int every = time.steps_per_output();
  if (initial.alpha.size() != ctx.m() || initial.beta.size() != ctx.m())
    throw EvolutionError("initial state length does not match m");

  Trajectory traj;
  traj.params = params;
  traj.time = time;
  traj.options = options;
  traj.samples.reserve(static_cast<std::size_t>(steps / every + 1));

  auto first = make_sample(initial, ctx);
  first.mass_min_eigenvalue = mass_correction_min_eigenvalue(params, first.matrices);
  traj.samples.push_back(std::move(first));

  GalerkinState state = initial;
  // Only the secant form reuses C at the step ends.
  const bool secant = options.rate == RateForm::secant;
  Eigen::MatrixXd c_now = traj.samples.front().matrices.C;
  double dissipation = 0.0;
  double min_eig = std::numeric_limits<double>::infinity();
  for (int n = 0; n < steps; ++n) {
    // Time recomputed from the step index so outputs land on exact multiples.
    const double t0 = n * time.dt;
    state.t = t0;
    Eigen::MatrixXd c_next;
    auto rep = secant ? step(state, time.dt, params, ctx, options, &c_now, &c_next)
                      : step(state, time.dt, params, ctx, options);
    if (secant) c_now = std::move(c_next);
    state = std::move(rep.state);
    state.t = (n + 1) * time.dt;
    dissipation += rep.dissipation;
    min_eig = std::min(min_eig, rep.mass_min_eigenvalue);
    if ((n + 1) % every == 0) {
      auto sample = make_sample(state, ctx);
      sample.dissipation = dissipation;
      sample.mass_min_eigenvalue = min_eig;
      traj.samples.push_back(std::move(sample));
      min_eig = std::numeric_limits<double>::infinity();
    }
  }
  return traj;
}

}  // namespace fsigal
