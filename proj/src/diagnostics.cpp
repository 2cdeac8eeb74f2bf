#include "fsigal/diagnostics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fsigal {

namespace {

double c_min_eigenvalue(const Eigen::MatrixXd& C) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

Eigen::VectorXd padded(const Eigen::VectorXd& v, Eigen::Index n) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  out.head(v.size()) = v;
  return out;
}

double solid_l2(const SolidOperators& ops, const Eigen::VectorXd& v) {
  return std::sqrt(std::max(0.0, v.dot(ops.apply_mass(v).col(0))));
}

}  // namespace

EnergyTerms energy_terms(const GalerkinState& state, const Eigen::MatrixXd& C, const Eigen::VectorXd& d,
                         const PhysicalParams& params) {
  EnergyTerms e;
  e.kinetic = params.rho_f * state.alpha.squaredNorm();
  e.solid_excess = params.delta_rho() * state.alpha.dot(C * state.alpha);
  e.elastic = params.kappa * state.beta.cwiseAbs2().dot(d.head(state.beta.size()));
  return e;
}

EnergyReport energy(const Trajectory& traj, const CouplingContext& ctx) {
  if (traj.samples.empty()) throw DiagnosticsError("energy: empty trajectory");
  const auto& params = traj.params;
  const auto& d = ctx.solid().d;
  const Eigen::VectorXd& lambda = ctx.fluid().eigenvalues;
  EnergyReport rep;
  rep.max_excess = -std::numeric_limits<double>::infinity();

  const auto& first = traj.samples.front();
  const double denom = first.state.alpha.norm() + solid_l2(*ctx.solid().operators, first.solid_velocity) +
                       std::sqrt(ctx.solid_grid().measure);

  double trap = 0.0;
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const auto& s = traj.samples[k];
    EnergyPoint p;
    p.t = s.state.t;
    p.terms = energy_terms(s.state, s.matrices.C, d, params);
    p.total = p.terms.total();
    p.dissipation = s.dissipation;
    if (k > 0) {
      const auto& prev = traj.samples[k - 1];
      const double q0 = prev.state.alpha.dot(lambda.cwiseProduct(prev.state.alpha));
      const double q1 = s.state.alpha.dot(lambda.cwiseProduct(s.state.alpha));
      trap += (s.state.t - prev.state.t) * (q0 + q1);
    }
    p.dissipation_trapezoid = trap;
    if (k == 0) rep.initial = p.total;
    p.excess = p.total + p.dissipation - rep.initial;
    if (k > 0) rep.max_excess = std::max(rep.max_excess, p.excess);

    const double lhs = s.state.alpha.norm() + std::sqrt(std::max(0.0, s.state.beta.cwiseAbs2().dot(d.head(s.state.beta.size()))));
    rep.apriori_ratio = std::max(rep.apriori_ratio, denom > 0.0 ? lhs / denom : 0.0);
    rep.points.push_back(p);
  }
  if (traj.samples.size() == 1) rep.max_excess = 0.0;
  return rep;
}

double constraint_residual(const TrajectorySample& sample, const CouplingContext& ctx) {
  const auto map = ctx.composition(sample.state.t);
  const Eigen::VectorXd u = ctx.fluid().modes * sample.state.alpha;
  const Eigen::VectorXd diff = map.values(u) - sample.solid_velocity;
  const Eigen::MatrixXd phi = map.values(ctx.fluid().modes);
  const Eigen::VectorXd r = phi.transpose() * ctx.solid().operators->apply_c(diff);
  return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
}

ConstraintReport constraint_residual(const Trajectory& traj, const CouplingContext& ctx) {
  ConstraintReport rep;
  for (const auto& s : traj.samples) {
    rep.per_sample.push_back(constraint_residual(s, ctx));
    rep.max_abs = std::max(rep.max_abs, rep.per_sample.back());
  }
  return rep;
}

double composed_norm_squared(const CouplingContext& ctx, int j, double t) {
  const auto& grid = ctx.fluid_grid();
  if (j < 0 || j >= ctx.m()) throw DiagnosticsError("composed_norm_squared: mode index out of range");
  const int n = grid.num_interior();
  Eigen::Matrix2Xd full = Eigen::Matrix2Xd::Zero(2, grid.mesh.num_nodes());
  for (int i = 0; i < n; ++i) {
    const int node = grid.interior_nodes[static_cast<std::size_t>(i)];
    full(0, node) = ctx.fluid().modes(i, j);
    full(1, node) = ctx.fluid().modes(n + i, j);
  }
  const auto& mesh = ctx.solid_grid().mesh;
  const Eigen::Matrix2Xd samples = compose_field(grid, full, ctx.motion(), t, mesh.quad_points());
  return samples.colwise().squaredNorm().dot(mesh.quad_weights());
}

std::vector<SeriesTailRow> series_tail(const CouplingContext& ctx, int j, const std::vector<int>& R_list,
                                       const std::vector<double>& times) {
  if (j < 0 || j >= ctx.m()) throw DiagnosticsError("series_tail: mode index out of range");
  for (int R : R_list)
    if (R < 1 || R > ctx.R()) throw DiagnosticsError("series_tail: R=" + std::to_string(R) + " out of range");
  const auto& c = ctx.solid().c;
  std::vector<SeriesTailRow> rows;
  for (double t : times) {
    const auto coeffs = ctx.coefficients(t);
    const double oracle = composed_norm_squared(ctx, j, t);
    for (int R : R_list) {
      SeriesTailRow row;
      row.t = t;
      row.R = R;
      const Eigen::VectorXd dj = coeffs.delta.row(j).head(R).transpose();
      const Eigen::VectorXd rj = coeffs.rate.row(j).head(R).transpose();
      row.weighted = dj.cwiseAbs2().dot(c.head(R));
      row.plain = dj.squaredNorm();
      row.rate_weighted = rj.cwiseAbs2().dot(c.head(R));
      row.oracle = oracle;
      row.gap = oracle > 0.0 ? std::abs(oracle - row.weighted) / oracle : std::abs(row.weighted);
      const double last = dj(R - 1) * dj(R - 1) * c(R - 1);
      row.saturation = row.weighted > 0.0 ? last / row.weighted : 0.0;
      rows.push_back(row);
    }
  }
  return rows;
}

DifferenceReport difference_decay(const Trajectory& a, const Trajectory& b, const CouplingContext& ctx) {
  if (a.samples.size() != b.samples.size()) throw DiagnosticsError("difference_decay: sample counts differ");
  const auto& params = a.params;
  if (params.rho_f != b.params.rho_f || params.rho_s != b.params.rho_s || params.kappa != b.params.kappa ||
      params.nu_f != b.params.nu_f || params.nu_s != b.params.nu_s)
    throw DiagnosticsError("difference_decay: trajectories come from different scenarios");
  DifferenceReport rep;
  rep.max_increase = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    const auto& sa = a.samples[k];
    const auto& sb = b.samples[k];
    if (std::abs(sa.state.t - sb.state.t) > 1e-12) throw DiagnosticsError("difference_decay: sample times differ");
    if (sa.state.alpha.size() != sb.state.alpha.size())
      throw DiagnosticsError("difference_decay: trajectories have different m");
    GalerkinState diff;
    diff.t = sa.state.t;
    diff.alpha = sa.state.alpha - sb.state.alpha;
    diff.beta = sa.state.beta - sb.state.beta;
    rep.t.push_back(diff.t);
    rep.energy.push_back(energy_terms(diff, sa.matrices.C, ctx.solid().d, params).total());
    rep.max_alpha = std::max(rep.max_alpha, diff.alpha.cwiseAbs().maxCoeff());
    rep.max_beta = std::max(rep.max_beta, diff.beta.cwiseAbs().maxCoeff());
    if (k > 0) rep.max_increase = std::max(rep.max_increase, rep.energy[k] - rep.energy[k - 1]);
  }
  if (a.samples.size() < 2) rep.max_increase = 0.0;
  return rep;
}

std::vector<CauchyRow> convergence_study(const CouplingContext& ctx, const PhysicalParams& params,
                                         const Eigen::VectorXd& u0, const TimeGrid& time,
                                         const std::vector<int>& m_list, const StepOptions& options) {
  for (std::size_t k = 1; k < m_list.size(); ++k)
    if (m_list[k] <= m_list[k - 1]) throw DiagnosticsError("convergence_study: m list must be increasing");
  std::vector<GalerkinState> terminal;
  for (int m : m_list) {
    if (m > ctx.m())
      throw SpectralError("requested m=" + std::to_string(m) + " exceeds the " + std::to_string(ctx.m()) +
                          " computed fluid modes");
    const auto sub = ctx.truncated(m, ctx.R());
    const auto init = project_initial_data(compatible_initial_data(sub, u0), sub);
    terminal.push_back(run(sub, params, init, time, options).back().state);
  }
  const auto& d = ctx.solid().d;
  std::vector<CauchyRow> rows;
  for (std::size_t k = 1; k < terminal.size(); ++k) {
    const Eigen::Index n = terminal[k].alpha.size();
    CauchyRow row;
    row.m_coarse = m_list[k - 1];
    row.m_fine = m_list[k];
    row.fluid = (terminal[k].alpha - padded(terminal[k - 1].alpha, n)).norm();
    const Eigen::VectorXd db = terminal[k].beta - padded(terminal[k - 1].beta, n);
    row.elastic = std::sqrt(std::max(0.0, db.cwiseAbs2().dot(d.head(n))));
    rows.push_back(row);
  }
  return rows;
}

std::vector<SelfConvergenceRow> dt_self_convergence(const CouplingContext& ctx, const PhysicalParams& params,
                                                    const GalerkinState& initial, double final_time,
                                                    const std::vector<double>& dt_list,
                                                    const StepOptions& options) {
  std::vector<Eigen::VectorXd> ends;
  for (double dt : dt_list) {
    TimeGrid grid{final_time, dt, final_time};
    const auto s = run(ctx, params, initial, grid, options).back().state;
    Eigen::VectorXd y(s.alpha.size() + s.beta.size());
    y << s.alpha, s.beta;
    ends.push_back(std::move(y));
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<SelfConvergenceRow> rows(dt_list.size());
  for (std::size_t k = 0; k < dt_list.size(); ++k) {
    rows[k].dt = dt_list[k];
    rows[k].difference = k + 1 < ends.size() ? (ends[k] - ends[k + 1]).norm() : nan;
    rows[k].ratio = nan;
  }
  for (std::size_t k = 0; k + 2 < ends.size(); ++k) rows[k].ratio = rows[k].difference / rows[k + 1].difference;
  return rows;
}

double displacement_consistency(const Trajectory& traj, const CouplingContext& ctx) {
  if (traj.samples.empty()) return 0.0;
  const auto& solid = ctx.solid();
  const Eigen::Index m = traj.samples.front().state.beta.size();
  const Eigen::MatrixXd dual = solid.operators->apply_mass(solid.modes.leftCols(m));
  const Eigen::VectorXd c = solid.c.head(m);
  auto project = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd {
    return (dual.transpose() * w).cwiseQuotient(c);
  };
  Eigen::VectorXd integral = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd prev = project(traj.samples.front().solid_velocity);
  double worst = 0.0;
  for (std::size_t k = 1; k < traj.samples.size(); ++k) {
    const auto& s = traj.samples[k];
    const Eigen::VectorXd cur = project(s.solid_velocity);
    integral += 0.5 * (s.state.t - traj.samples[k - 1].state.t) * (prev + cur);
    prev = cur;
    const Eigen::VectorXd gap = s.state.beta - traj.samples.front().state.beta - integral;
    worst = std::max(worst, std::sqrt(gap.cwiseAbs2().dot(c)));
  }
  return worst;
}

bool VerificationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const Check* VerificationReport::first_failure() const {
  for (const auto& c : checks)
    if (!c.pass) return &c;
  return nullptr;
}

VerificationReport verify_trajectory(const Trajectory& traj, const CouplingContext& ctx,
                                     const std::vector<RecoveryFields>& recovery, const Tolerances& tol) {
  VerificationReport rep;
  const auto& params = traj.params;
  auto add = [&](std::string name, double measured, double threshold, bool pass) {
    rep.checks.push_back({std::move(name), pass, measured, threshold});
  };

  const auto en = energy(traj, ctx);
  if (params.delta_rho() >= 0.0) add("energy_inequality", en.max_excess, tol.energy, en.max_excess <= tol.energy);
  add("apriori_bound", en.apriori_ratio, tol.apriori, en.apriori_ratio <= tol.apriori);

  const auto cr = constraint_residual(traj, ctx);
  add("constraint_residual", cr.max_abs, tol.constraint, cr.max_abs <= tol.constraint);

  double asym = 0.0, min_c = std::numeric_limits<double>::infinity();
  double min_mass = std::numeric_limits<double>::infinity();
  for (const auto& s : traj.samples) {
    asym = std::max(asym, s.matrices.c_asymmetry);
    min_c = std::min(min_c, c_min_eigenvalue(s.matrices.C));
    min_mass = std::min(min_mass, s.mass_min_eigenvalue);
  }
  add("c_symmetry", asym, tol.c_symmetry, asym <= tol.c_symmetry);
  add("c_psd", min_c, -tol.c_psd, min_c >= -tol.c_psd);
  const double mass_floor = params.delta_rho() >= 0.0 ? params.rho_f - tol.c_psd : tol.mass_invertibility;
  add("mass_correction", min_mass, mass_floor, min_mass >= mass_floor);

  if (!recovery.empty()) {
    double split = 0.0, divfree = 0.0, mean = 0.0;
    for (const auto& r : recovery) {
      split = std::max(split, r.solid_residual);
      divfree = std::max(divfree, r.divfree_residual);
      mean = std::max(mean, std::abs(r.pressure_mean));
    }
    add("split_residual", split, tol.split, split <= tol.split);
    add("divfree_pressure_residual", divfree, tol.divfree, divfree <= tol.divfree);
    add("pressure_mean", mean, tol.pressure_mean, mean <= tol.pressure_mean);
  }
  return rep;
}

}  // namespace fsigal
