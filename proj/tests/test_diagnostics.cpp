#include "fsigal/diagnostics.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fsigal;
using fsigal::testing::context;

namespace {

PhysicalParams params(double rho_s = 2.0, double kappa = 1.0) {
  PhysicalParams p;
  p.rho_f = 1.0;
  p.rho_s = rho_s;
  p.nu_f = p.nu_s = 0.1;
  p.kappa = kappa;
  return p;
}

GalerkinState first_mode_state(const CouplingContext& ctx, double amplitude = 1.0) {
  return project_initial_data(compatible_initial_data(ctx, amplitude * ctx.fluid().modes.col(0)), ctx);
}

const Check* find(const VerificationReport& rep, const std::string& name) {
  for (const auto& c : rep.checks)
    if (c.name == name) return &c;
  return nullptr;
}

}  // namespace

TEST(Energy, ZeroStateHasZeroEnergy) {
  const auto ctx = context(PrescribedMotion::rotation(0.5, Point(0.5, 0.5), 1.0));
  GalerkinState s{0.0, Eigen::VectorXd::Zero(8), Eigen::VectorXd::Zero(8)};
  const auto rep = energy(run(ctx, params(), s, TimeGrid{0.05, 1e-3, 0.01}), ctx);
  for (const auto& p : rep.points) {
    EXPECT_EQ(p.total, 0.0);
    EXPECT_EQ(p.dissipation, 0.0);
    EXPECT_EQ(p.excess, 0.0);
  }
}

TEST(Energy, TermsMatchDefinitions) {
  const auto ctx = context(PrescribedMotion::shear(0.5, 0.5));
  const auto p = params(3.0, 2.0);
  GalerkinState s{0.1, Eigen::VectorXd::LinSpaced(8, 1.0, -1.0), Eigen::VectorXd::LinSpaced(8, 0.5, 0.1)};
  const auto mats = ctx.matrices(0.1);
  const auto e = energy_terms(s, mats.C, ctx.solid().d, p);
  EXPECT_DOUBLE_EQ(e.kinetic, s.alpha.squaredNorm());
  EXPECT_NEAR(e.solid_excess, 2.0 * s.alpha.dot(mats.C * s.alpha), 1e-14);
  EXPECT_GE(e.solid_excess, 0.0);
  double elastic = 0.0;
  for (int r = 0; r < 8; ++r) elastic += 2.0 * s.beta(r) * s.beta(r) * ctx.solid().d(r);
  EXPECT_NEAR(e.elastic, elastic, 1e-14);
  EXPECT_DOUBLE_EQ(e.total(), e.kinetic + e.solid_excess + e.elastic);
  // Kinetic + solid excess equals rho_f |u|^2 + drho |w|^2 up to the series truncation.
  const Eigen::VectorXd w = ctx.composed_basis(0.1).values * s.alpha;
  const double w2 = w.dot(ctx.solid().operators->apply_mass(w).col(0));
  EXPECT_NEAR(e.solid_excess / (2.0 * w2), 1.0, 0.02);
}

// Without density jump and elasticity the system is pure Stokes decay and the
// energy is rho_f |alpha|^2, strictly decreasing. kappa = 0 is outside the
// validated parameter range, so the trajectory is assembled step by step.
TEST(Energy, PureStokesDecayIsStrictlyDecreasing) {
  const auto ctx = context(PrescribedMotion::rotation(0.5, Point(0.5, 0.5), 1.0));
  auto p = params(1.0, 0.0);
  Trajectory traj;
  traj.params = p;
  GalerkinState s = first_mode_state(ctx);
  s.alpha.setLinSpaced(8, 1.0, 0.2);
  traj.samples.push_back(make_sample(s, ctx));
  double diss = 0.0;
  for (int n = 0; n < 20; ++n) {
    const auto rep = step(s, 5e-3, p, ctx);
    s = rep.state;
    diss += rep.dissipation;
    auto sample = make_sample(s, ctx);
    sample.dissipation = diss;
    traj.samples.push_back(sample);
  }
  const auto rep = energy(traj, ctx);
  for (std::size_t k = 1; k < rep.points.size(); ++k) {
    EXPECT_LT(rep.points[k].total, rep.points[k - 1].total);
    EXPECT_DOUBLE_EQ(rep.points[k].terms.total(), p.rho_f * traj.samples[k].state.alpha.squaredNorm());
  }
  // Exact discrete balance for a diagonal system.
  EXPECT_LE(std::abs(rep.max_excess), 1e-14);
}

TEST(Energy, PerStepIdentityForFrozenCoefficients) {
  const auto ctx = context(PrescribedMotion::identity(0.5));
  const auto traj = run(ctx, params(2.0, 1.0), first_mode_state(ctx), TimeGrid{0.05, 1e-3, 1e-3});
  const auto rep = energy(traj, ctx);
  for (std::size_t k = 1; k < rep.points.size(); ++k) {
    const double change = rep.points[k].total - rep.points[k - 1].total;
    const double dissipated = rep.points[k].dissipation - rep.points[k - 1].dissipation;
    EXPECT_LE(std::abs(change + dissipated), 1e-10 * rep.points[k - 1].total) << "step " << k;
  }
}

TEST(Energy, InequalityHoldsOnMovingSolids) {
  for (const auto& motion : fsigal::testing::shipped_motions(0.5)) {
    const auto ctx = context(motion);
    const auto traj = run(ctx, params(2.0, 1.0), first_mode_state(ctx), TimeGrid{0.1, 5e-4, 0.01});
    const auto rep = energy(traj, ctx);
    EXPECT_LE(rep.max_excess, 1e-8) << to_string(motion.kind());
    EXPECT_LE(rep.apriori_ratio, 10.0);
    // The trapezoid dissipation tracks the scheme's to O(dt_out^2).
    const auto& last = rep.points.back();
    EXPECT_NEAR(last.dissipation_trapezoid / last.dissipation, 1.0, 1e-2);
  }
}

TEST(Energy, EmptyTrajectoryIsAnError) {
  const auto ctx = context(PrescribedMotion::identity(0.5));
  EXPECT_THROW(energy(Trajectory{}, ctx), DiagnosticsError);
}

TEST(Constraint, HoldsOnRunsAndVanishesForZero) {
  const auto ctx = context(PrescribedMotion::translation(0.5, Point(0.4, 0.2)));
  const auto traj = run(ctx, params(), first_mode_state(ctx), TimeGrid{0.1, 1e-3, 0.02});
  EXPECT_LE(constraint_residual(traj, ctx).max_abs, 1e-9);
  EXPECT_EQ(constraint_residual(traj, ctx).per_sample.size(), traj.samples.size());
  GalerkinState zero{0.0, Eigen::VectorXd::Zero(8), Eigen::VectorXd::Zero(8)};
  EXPECT_EQ(constraint_residual(make_sample(zero, ctx), ctx), 0.0);
}

TEST(Constraint, CorruptedCoefficientIsDetected) {
  const auto ctx = context(PrescribedMotion::rotation(0.5, Point(0.5, 0.5), 1.0));
  auto traj = run(ctx, params(), first_mode_state(ctx), TimeGrid{0.1, 1e-3, 0.05});
  auto& sample = traj.samples[1];
  sample.state.alpha(0) += 1e-3;
  // Expected size: 1e-3 * max_i |c(phi_i, phi_1)|.
  const Eigen::MatrixXd phi = ctx.composed_basis(sample.state.t).values;
  const Eigen::VectorXd col = phi.transpose() * ctx.solid().operators->apply_c(phi.col(0));
  const double expected = 1e-3 * col.cwiseAbs().maxCoeff();
  const double got = constraint_residual(traj, ctx).max_abs;
  EXPECT_GE(got, 1e-5);
  EXPECT_NEAR(got, expected, 1e-6 * expected);
}

TEST(SeriesTail, MonotoneAndSaturating) {
  const auto ctx = context(PrescribedMotion::rotation(0.5, Point(0.5, 0.5), 1.0));
  const std::vector<int> R_list{2, 4, 8, 16, 32};
  for (int j = 0; j < ctx.m(); ++j) {
    const auto rows = series_tail(ctx, j, R_list, {0.0, 0.25, 0.5});
    ASSERT_EQ(rows.size(), 15u);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (k % R_list.size() == 0) continue;
      EXPECT_GE(rows[k].weighted, rows[k - 1].weighted);
      EXPECT_GE(rows[k].plain, rows[k - 1].plain);
      EXPECT_GE(rows[k].rate_weighted, rows[k - 1].rate_weighted);
      EXPECT_LE(rows[k].gap, rows[k - 1].gap + 1e-12);
    }
    for (std::size_t k = R_list.size() - 1; k < rows.size(); k += R_list.size()) {
      EXPECT_EQ(rows[k].R, 32);
      EXPECT_LE(rows[k].gap, 0.01) << "j=" << j << " t=" << rows[k].t;
      EXPECT_LE(rows[k].weighted, rows[k].oracle * (1 + 0.01));
    }
  }
}

TEST(SeriesTail, IdentityHasNoRateSeries) {
  const auto ctx = context(PrescribedMotion::identity(0.5));
  for (const auto& row : series_tail(ctx, 2, {8, 32}, {0.1, 0.4})) EXPECT_EQ(row.rate_weighted, 0.0);
  EXPECT_THROW(series_tail(ctx, 8, {8}, {0.1}), DiagnosticsError);
  EXPECT_THROW(series_tail(ctx, 0, {33}, {0.1}), DiagnosticsError);
}

TEST(SeriesTail, OracleMatchesIndependentQuadrature) {
  const auto ctx = context(PrescribedMotion::identity(0.5));
  const auto& qp = ctx.solid_grid().mesh.quad_points();
  const auto& qw = ctx.solid_grid().mesh.quad_weights();
  const auto [ux, uy] = fsigal::testing::full_nodal(ctx.fluid_grid(), ctx.fluid().modes.col(3));
  double sum = 0.0;
  for (int q = 0; q < qp.cols(); ++q) {
    const double a = fsigal::testing::interpolate(ctx.fluid_grid().mesh, ux, qp.col(q));
    const double b = fsigal::testing::interpolate(ctx.fluid_grid().mesh, uy, qp.col(q));
    sum += qw(q) * (a * a + b * b);
  }
  EXPECT_NEAR(composed_norm_squared(ctx, 3, 0.2), sum, 1e-12 * sum);
}

TEST(Difference, IdenticalAndZeroRunsGiveZero) {
  const auto ctx = context(PrescribedMotion::shear(0.5, 0.5));
  const TimeGrid grid{0.05, 1e-3, 0.01};
  const auto a = run(ctx, params(), first_mode_state(ctx), grid);
  const auto b = run(ctx, params(), first_mode_state(ctx), grid);
  const auto rep = difference_decay(a, b, ctx);
  EXPECT_EQ(rep.max_alpha, 0.0);
  EXPECT_EQ(rep.max_beta, 0.0);
  GalerkinState zero{0.0, Eigen::VectorXd::Zero(8), Eigen::VectorXd::Zero(8)};
  const auto z = run(ctx, params(), zero, grid);
  const auto zz = difference_decay(z, z, ctx);
  for (double e : zz.energy) EXPECT_EQ(e, 0.0);
}

TEST(Difference, PerturbedDataContract) {
  const auto ctx = context(PrescribedMotion::rotation(0.5, Point(0.5, 0.5), 1.0));
  const TimeGrid grid{0.1, 5e-4, 0.01};
  const auto s = first_mode_state(ctx);
  auto t = s;
  t.alpha(0) += 1e-3;
  const auto rep = difference_decay(run(ctx, params(), s, grid), run(ctx, params(), t, grid), ctx);
  EXPECT_LE(rep.max_increase, 1e-8);
  EXPECT_LE(rep.energy.back(), rep.energy.front());
  EXPECT_GT(rep.energy.front(), 0.0);
}

TEST(Difference, MismatchedRunsAreRejected) {
  const auto ctx = context(PrescribedMotion::identity(0.5));
  const auto s = first_mode_state(ctx);
  const auto a = run(ctx, params(2.0), s, TimeGrid{0.02, 1e-3, 0.01});
  EXPECT_THROW(difference_decay(a, run(ctx, params(3.0), s, TimeGrid{0.02, 1e-3, 0.01}), ctx), DiagnosticsError);
  EXPECT_THROW(difference_decay(a, run(ctx, params(2.0), s, TimeGrid{0.02, 1e-3, 0.02}), ctx), DiagnosticsError);
}

TEST(Convergence, ArgumentChecks) {
  const auto ctx = context(PrescribedMotion::identity(0.5));
  const Eigen::VectorXd u0 = ctx.fluid().modes.col(0);
  const TimeGrid grid{0.01, 1e-3, 0.01};
  EXPECT_THROW(convergence_study(ctx, params(), u0, grid, {4, 4}), DiagnosticsError);
  EXPECT_THROW(convergence_study(ctx, params(), u0, grid, {4, 16}), SpectralError);
  const auto rows = convergence_study(ctx, params(), u0, grid, {2, 4, 8});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].m_coarse, 2);
  EXPECT_EQ(rows[1].m_fine, 8);
  EXPECT_TRUE(convergence_study(ctx, params(), u0, grid, {8}).empty());
}

TEST(Convergence, SelfConvergenceRowLayout) {
  const auto ctx = context(PrescribedMotion::identity(0.5));
  const auto rows = dt_self_convergence(ctx, params(), first_mode_state(ctx), 0.02, {2e-3, 1e-3, 5e-4});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_TRUE(std::isfinite(rows[0].ratio));
  EXPECT_TRUE(std::isnan(rows[1].ratio));
  EXPECT_TRUE(std::isnan(rows[2].difference));
  EXPECT_NEAR(rows[0].ratio, 4.0, 0.05);
}

TEST(Verification, DefaultChecksOnAGoodRun) {
  const auto ctx = context(PrescribedMotion::rotation(0.5, Point(0.5, 0.5), 1.0));
  const auto traj = run(ctx, params(), first_mode_state(ctx), TimeGrid{0.05, 5e-4, 0.01});
  const auto rep = verify_trajectory(traj, ctx, {});
  EXPECT_TRUE(rep.passed());
  EXPECT_EQ(rep.first_failure(), nullptr);
  for (const char* name :
       {"energy_inequality", "apriori_bound", "constraint_residual", "c_symmetry", "c_psd", "mass_correction"})
    EXPECT_NE(find(rep, name), nullptr) << name;
  EXPECT_EQ(find(rep, "split_residual"), nullptr);
}

TEST(Verification, CorruptionNamesTheCheck) {
  const auto ctx = context(PrescribedMotion::rotation(0.5, Point(0.5, 0.5), 1.0));
  auto traj = run(ctx, params(), first_mode_state(ctx), TimeGrid{0.05, 5e-4, 0.01});
  traj.samples[2].state.alpha(3) += 1e-3;
  const auto rep = verify_trajectory(traj, ctx, {});
  EXPECT_FALSE(rep.passed());
  ASSERT_NE(rep.first_failure(), nullptr);
  EXPECT_FALSE(find(rep, "constraint_residual")->pass);
}

TEST(Verification, LighterSolidSkipsEnergyInequality) {
  const auto ctx = context(PrescribedMotion::identity(0.5));
  const auto traj = run(ctx, params(0.5), first_mode_state(ctx), TimeGrid{0.02, 1e-3, 0.01});
  const auto rep = verify_trajectory(traj, ctx, {});
  EXPECT_EQ(find(rep, "energy_inequality"), nullptr);
  const auto* mass = find(rep, "mass_correction");
  ASSERT_NE(mass, nullptr);
  EXPECT_TRUE(mass->pass);
  EXPECT_DOUBLE_EQ(mass->threshold, kMassInvertibilityThreshold);
  EXPECT_LT(mass->measured, 1.0);
}
