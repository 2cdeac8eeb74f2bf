#include "fsigal/coupling.hpp"

#include "support.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <random>

using namespace fsigal;
using fsigal::testing::context;

namespace {

Eigen::Matrix2Xd nodal_field(const RectGrid& mesh, double (*fx)(const Point&), double (*fy)(const Point&)) {
  Eigen::Matrix2Xd v(2, mesh.num_nodes());
  for (int n = 0; n < mesh.num_nodes(); ++n) v.col(n) = Point(fx(mesh.node(n)), fy(mesh.node(n)));
  return v;
}

std::vector<double> sample_times(double T, int count) {
  std::vector<double> t;
  for (int k = 0; k < count; ++k) t.push_back(T * k / (count - 1));
  return t;
}

double min_eigenvalue(const Eigen::MatrixXd& c) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// A time whose window [t - h, t + h] is free of breakpoints, scanning forward
// from `start`.
}  // namespace

TEST(Compose, IdentityReproducesInterpolation) {
  const auto& b = fsigal::testing::bases(32, 0.1, 0.1, 8, 32);
  const auto& mesh = b.fluid_grid.mesh;
  auto v = nodal_field(
      mesh, [](const Point& p) { return std::sin(3 * p.x()) * p.y(); },
      [](const Point& p) { return std::cos(2 * p.y()) + p.x() * p.x(); });
  const auto& targets = b.solid_grid.mesh.quad_points();
  const auto out = compose_field(b.fluid_grid, v, PrescribedMotion::identity(0.5), 0.3, targets);
  const Eigen::VectorXd vx = v.row(0).transpose(), vy = v.row(1).transpose();
  double err = 0.0;
  for (int q = 0; q < targets.cols(); ++q) {
    err = std::max(err, std::abs(out(0, q) - fsigal::testing::interpolate(mesh, vx, targets.col(q))));
    err = std::max(err, std::abs(out(1, q) - fsigal::testing::interpolate(mesh, vy, targets.col(q))));
  }
  EXPECT_LE(err, 1e-12);
}

TEST(Compose, LinearFieldsAreExactUnderEveryMotion) {
  const auto& b = fsigal::testing::bases(32, 0.1, 0.1, 8, 32);
  auto v = nodal_field(
      b.fluid_grid.mesh, [](const Point& p) { return p.x(); }, [](const Point& p) { return -p.y(); });
  const auto& targets = b.solid_grid.mesh.quad_points();
  for (const auto& motion : fsigal::testing::shipped_motions(0.5)) {
    for (double t : {0.0, 0.17, 0.5}) {
      const auto out = compose_field(b.fluid_grid, v, motion, t, targets);
      double err = 0.0;
      for (int q = 0; q < targets.cols(); ++q) {
        const Point x = motion(Point(targets.col(q)), t).position;
        err = std::max(err, (out.col(q) - Point(x.x(), -x.y())).norm());
      }
      EXPECT_LE(err, 1e-12) << to_string(motion.kind()) << " t=" << t;
    }
  }
}

TEST(Compose, EscapingSolidRaisesContainmentError) {
  const auto& b = fsigal::testing::bases(32, 0.1, 0.1, 8, 32);
  Eigen::Matrix2Xd v = Eigen::Matrix2Xd::Zero(2, b.fluid_grid.mesh.num_nodes());
  const auto motion = PrescribedMotion::translation(1.0, Point(0.5, 0.0));
  const auto& targets = b.solid_grid.mesh.quad_points();
  EXPECT_NO_THROW(compose_field(b.fluid_grid, v, motion, 0.3, targets));
  try {
    compose_field(b.fluid_grid, v, motion, 1.0, targets);
    FAIL() << "expected ContainmentError";
  } catch (const ContainmentError& e) {
    EXPECT_DOUBLE_EQ(e.time(), 1.0);
    EXPECT_GE(e.point(), 0);
    const Point s = targets.col(e.point());
    EXPECT_GT(s.x() + 0.5, 1.0);
    EXPECT_NE(std::string(e.what()).find("outside the fluid domain"), std::string::npos);
  }
}

TEST(Compose, ComposedBasisUnderIdentityIsL2Projection) {
  const auto ctx = context(PrescribedMotion::identity(0.5));
  const auto composed = ctx.composed_basis(0.2);
  const auto& fmesh = ctx.fluid_grid().mesh;
  const auto& smesh = ctx.solid_grid().mesh;
  const int N = smesh.num_nodes();
  double err = 0.0;
  for (int j = 0; j < ctx.m(); ++j) {
    const auto [ux, uy] = fsigal::testing::full_nodal(ctx.fluid_grid(), ctx.fluid().modes.col(j));
    const auto px = fsigal::testing::l2_project(smesh, [&](const Point& p) { return fsigal::testing::interpolate(fmesh, ux, p); });
    const auto py = fsigal::testing::l2_project(smesh, [&](const Point& p) { return fsigal::testing::interpolate(fmesh, uy, p); });
    err = std::max(err, (composed.values.col(j).head(N) - px).cwiseAbs().maxCoeff());
    err = std::max(err, (composed.values.col(j).tail(N) - py).cwiseAbs().maxCoeff());
  }
  EXPECT_LE(err, 1e-10);
  EXPECT_EQ(composed.rates.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Delta, IdentityMotionIsStatic) {
  const auto ctx = context(PrescribedMotion::identity(0.5));
  const auto c0 = ctx.coefficients(0.0);
  const auto cT = ctx.coefficients(0.5);
  EXPECT_EQ(c0.rate.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE((c0.delta - cT.delta).cwiseAbs().maxCoeff(), 1e-14);
  const auto mats = ctx.matrices(0.25);
  EXPECT_EQ(mats.D.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Delta, TwoRoutesAgree) {
  for (const auto& motion : fsigal::testing::shipped_motions(0.5)) {
    const auto ctx = context(motion);
    const auto composed = ctx.composed_basis(0.37);
    const auto dual = compute_delta(composed, ctx.solid()).delta;
    const auto direct = compute_delta_direct(composed, ctx.solid());
    EXPECT_LE((dual - direct).cwiseAbs().maxCoeff(), 1e-8) << to_string(motion.kind());
  }
}

// Central differences of delta against the chain-rule rate, inside the widest
// window near t = 0.2 that no mapped Gauss point crosses a grid line in.
// Translation and shear are affine in t, so there the samples are polynomials
// of degree <= 2 and the central difference is exact up to rounding, which is
// what both step sizes are held to.
TEST(Delta, RateMatchesCentralDifferences) {
  for (const auto& motion : fsigal::testing::shipped_motions(0.5)) {
    if (motion.kind() == MotionKind::identity) continue;
    const auto ctx = context(motion);
    const auto [t, half] = fsigal::testing::widest_smooth_window(ctx, 0.15, 0.25);
    ASSERT_GT(half, 0.0) << to_string(motion.kind());
    const Eigen::MatrixXd exact = ctx.coefficients(t).rate;
    const double scale = exact.cwiseAbs().maxCoeff();
    const double h0 = 0.5 * half;
    double err[2];
    int k = 0;
    for (double h : {h0, 0.1 * h0}) {
      const Eigen::MatrixXd fd = (ctx.coefficients(t + h).delta - ctx.coefficients(t - h).delta) / (2 * h);
      err[k++] = (fd - exact).cwiseAbs().maxCoeff();
    }
    const double floor = 1e-16 * ctx.coefficients(t).delta.cwiseAbs().maxCoeff() / (0.1 * h0) * 100;
    if (motion.kind() == MotionKind::rotation) {
      EXPECT_GT(err[0], 1e3 * floor);
      EXPECT_GE(fsigal::testing::observed_order(err[0], err[1]), 1.9) << err[0] << " " << err[1];
    } else {
      EXPECT_LE(err[0], floor) << to_string(motion.kind());
      EXPECT_LE(err[1], floor) << to_string(motion.kind());
    }
    EXPECT_GT(scale, 0.0);
  }
}

// Negative control: across a crossing the composed coefficients have a kink and
// the central difference degrades to first order.
TEST(Delta, DifferencesAcrossACrossingLoseAnOrder) {
  const auto ctx = context(PrescribedMotion::translation(0.5, Point(0.4, 0.2)));
  const auto bp = ctx.breakpoints(0.1, 0.3);
  ASSERT_FALSE(bp.empty());
  const double t = bp.front() + 1e-6;
  const Eigen::MatrixXd exact = ctx.coefficients(t).rate;
  double err[2];
  int k = 0;
  for (double h : {1e-3, 1e-4}) {
    const Eigen::MatrixXd fd = (ctx.coefficients(t + h).delta - ctx.coefficients(t - h).delta) / (2 * h);
    err[k++] = (fd - exact).cwiseAbs().maxCoeff();
  }
  EXPECT_GT(err[1], 1e-6);
  EXPECT_LT(fsigal::testing::observed_order(err[0], err[1]), 1.5);
}

TEST(Breakpoints, GaussPointsSitOnGridLines) {
  const auto ctx = context(PrescribedMotion::translation(0.5, Point(0.4, 0.2)));
  const auto bp = ctx.breakpoints(0.0, 0.5);
  ASSERT_FALSE(bp.empty());
  EXPECT_TRUE(std::is_sorted(bp.begin(), bp.end()));
  const double h = ctx.fluid_grid().mesh.hx();
  for (double t : bp) {
    EXPECT_GT(t, 0.0);
    EXPECT_LT(t, 0.5);
    const auto mapped = ctx.mapped_points(t);
    double best = 1.0;
    for (int n = 0; n < mapped.cols(); ++n)
      for (int a = 0; a < 2; ++a) {
        const double f = mapped(a, n) / h;
        best = std::min(best, std::abs(f - std::round(f)) * h);
      }
    EXPECT_LE(best, 1e-12) << "t=" << t;
  }
  EXPECT_TRUE(context(PrescribedMotion::identity(0.5)).breakpoints(0.0, 0.5).empty());
  // Subintervals split at a time where no point is on a line partition the set.
  const auto left = ctx.breakpoints(0.0, 0.2371), right = ctx.breakpoints(0.2371, 0.5);
  EXPECT_EQ(left.size() + right.size(), bp.size());
}

TEST(Matrices, CIsSymmetricPsdAtTwentyTimes) {
  for (const auto& motion : fsigal::testing::shipped_motions(0.5)) {
    const auto ctx = context(motion);
    for (double t : sample_times(0.5, 20)) {
      const auto mats = ctx.matrices(t);
      EXPECT_LE(mats.c_asymmetry, 1e-12);
      EXPECT_EQ((mats.C - mats.C.transpose()).cwiseAbs().maxCoeff(), 0.0);
      EXPECT_GE(min_eigenvalue(mats.C), -1e-10) << to_string(motion.kind()) << " t=" << t;
    }
  }
}

TEST(Matrices, QuadraticFormIsWeightedSumOfSquares) {
  const auto ctx = context(PrescribedMotion::rotation(0.5, Point(0.5, 0.5), 1.0));
  const auto coeffs = ctx.coefficients(0.33);
  const auto mats = assemble_matrices(coeffs, ctx.solid());
  std::mt19937 rng(11);
  std::normal_distribution<double> g;
  for (int k = 0; k < 20; ++k) {
    Eigen::VectorXd x(ctx.m());
    for (int i = 0; i < x.size(); ++i) x(i) = g(rng);
    double direct = 0.0;
    for (int r = 0; r < ctx.R(); ++r) {
      double s = 0.0;
      for (int i = 0; i < ctx.m(); ++i) s += x(i) * coeffs.delta(i, r);
      direct += ctx.solid().c(r) * s * s;
    }
    EXPECT_NEAR(x.dot(mats.C * x), direct, 1e-10 * std::max(1.0, direct));
  }
}

TEST(Matrices, DefinitionsOfBDE) {
  const auto ctx = context(PrescribedMotion::shear(0.5, 0.5));
  const auto coeffs = ctx.coefficients(0.21);
  const auto mats = assemble_matrices(coeffs, ctx.solid());
  const int m = ctx.m();
  const auto& c = ctx.solid().c;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      EXPECT_EQ(mats.B(j, i), coeffs.delta(j, i));
      double d = 0.0;
      for (int r = 0; r < ctx.R(); ++r) d += coeffs.rate(j, r) * coeffs.delta(i, r) * c(r);
      EXPECT_NEAR(mats.D(i, j), d, 1e-12 * std::max(1.0, std::abs(d)));
      EXPECT_EQ(mats.E(i, j), coeffs.delta(i, j) * ctx.solid().d(j));
    }
  EXPECT_GE(mats.tail, 0.0);
  EXPECT_TRUE(std::isfinite(mats.tail));
}

TEST(Matrices, ElasticBlockMatchesDirectQuadrature) {
  // E_ij = delta_ij d_j against (grad chi_j, grad phi_i)_B from the stiffness.
  const auto ctx = context(PrescribedMotion::rotation(0.5, Point(0.5, 0.5), 1.0));
  const auto composed = ctx.composed_basis(0.4);
  const auto mats = ctx.matrices(0.4);
  const int m = ctx.m();
  const Eigen::MatrixXd direct =
      composed.values.transpose() * ctx.solid().operators->apply_stiffness(ctx.solid().modes.leftCols(m));
  EXPECT_LE((mats.E - direct).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, direct.cwiseAbs().maxCoeff()));
}

TEST(Matrices, BesselAndNormBounds) {
  for (const auto& motion : fsigal::testing::shipped_motions(0.5)) {
    const auto ctx = context(motion);
    const auto composed = ctx.composed_basis(0.45);
    const auto mats = ctx.matrices(0.45);
    const Eigen::MatrixXd mphi = ctx.solid().operators->apply_mass(composed.values);
    double sum = 0.0;
    for (int j = 0; j < ctx.m(); ++j) {
      const double full = composed.values.col(j).dot(mphi.col(j));
      EXPECT_LE(mats.C(j, j), full * (1 + 1e-12)) << to_string(motion.kind());
      sum += full;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mats.C, Eigen::EigenvaluesOnly);
    const double norm = es.eigenvalues().maxCoeff();
    EXPECT_LE(norm, sum);
    // psi_j are orthonormal on Omega and X preserves volume, so |C| <= 1 up to
    // interpolation error.
    EXPECT_LE(norm, 1.01);
  }
}

TEST(Matrices, FullSolidSpectrumGivesParsevalEquality) {
  GeometryConfig g;
  g.solid_nx = g.solid_ny = 4;
  auto [f, s] = build_grids(g);
  const auto& b = fsigal::testing::bases(32, 0.1, 0.1, 8, 32);
  const auto solid = solve_solid_eigenproblem(s, s.num_dofs());
  CouplingContext ctx(b.fluid_grid, s, b.fluid, solid, PrescribedMotion::rotation(0.5, Point(0.5, 0.5), 1.0));
  const auto composed = ctx.composed_basis(0.3);
  const auto mats = ctx.matrices(0.3);
  const Eigen::MatrixXd gram = composed.values.transpose() * solid.operators->apply_mass(composed.values);
  EXPECT_LE((mats.C - gram).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Matrices, TruncationDifferencesShrinkWithR) {
  const auto full = context(PrescribedMotion::rotation(0.5, Point(0.5, 0.5), 1.0));
  const double t = 0.3;
  const Eigen::MatrixXd c8 = full.truncated(8, 8).matrices(t).C;
  const Eigen::MatrixXd c16 = full.truncated(8, 16).matrices(t).C;
  const Eigen::MatrixXd c32 = full.matrices(t).C;
  EXPECT_LT((c32 - c16).norm(), (c16 - c8).norm());
}

TEST(Context, RejectsFewerSolidThanFluidModes) {
  const auto& b = fsigal::testing::bases(32, 0.1, 0.1, 8, 32);
  EXPECT_THROW(CouplingContext(b.fluid_grid, b.solid_grid, b.fluid, b.solid.truncated(4),
                               PrescribedMotion::identity(0.5)),
               std::invalid_argument);
  const auto ctx = context(PrescribedMotion::identity(0.5)).truncated(4, 16);
  EXPECT_EQ(ctx.m(), 4);
  EXPECT_EQ(ctx.R(), 16);
}
