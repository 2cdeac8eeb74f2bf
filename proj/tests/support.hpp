#pragma once

// Shared fixtures and independent test oracles. Nothing here calls the code
// paths it is used to check.

#include "fsigal/coupling.hpp"
#include "fsigal/evolution.hpp"
#include "fsigal/geometry.hpp"
#include "fsigal/spectral_bases.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <tuple>
#include <utility>
#include <vector>

namespace fsigal::testing {

struct Bases {
  FluidDomainGrid fluid_grid;
  SolidReferenceGrid solid_grid;
  FluidEigenBasis fluid;
  SolidEigenBasis solid;
};

/// Bases on the reference geometry, cached per (n, nu_f, nu_s, m, R).
inline const Bases& bases(int n, double nu_f, double nu_s, int m, int R, int solid_n = 16) {
  using Key = std::tuple<int, double, double, int, int, int>;
  static std::map<Key, std::unique_ptr<Bases>> cache;
  auto& slot = cache[{n, nu_f, nu_s, m, R, solid_n}];
  if (!slot) {
    GeometryConfig g;
    g.nx = g.ny = n;
    g.solid_nx = g.solid_ny = solid_n;
    auto [f, s] = build_grids(g);
    auto fluid = solve_fluid_eigenproblem(f, ViscosityField{nu_f, nu_s, g.solid}, m);
    auto solid = solve_solid_eigenproblem(s, R);
    slot = std::make_unique<Bases>(Bases{std::move(f), std::move(s), std::move(fluid), std::move(solid)});
  }
  return *slot;
}

inline CouplingContext context(const PrescribedMotion& motion, int m = 8, int R = 32, double nu_f = 0.1,
                               double nu_s = 0.1, int n = 32) {
  const auto& b = bases(n, nu_f, nu_s, m, R);
  return CouplingContext(b.fluid_grid, b.solid_grid, b.fluid, b.solid, motion);
}

/// The four motion families at gentle amplitudes that stay immersed on [0, T].
inline std::vector<PrescribedMotion> shipped_motions(double T = 0.5) {
  return {PrescribedMotion::identity(T), PrescribedMotion::translation(T, Point(0.4, 0.2)),
          PrescribedMotion::rotation(T, Point(0.5, 0.5), 1.0), PrescribedMotion::shear(T, 0.5)};
}

/// exp(A) by scaling and squaring with a degree-18 Taylor polynomial.
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& a) {
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Eigen::MatrixXd x = a / std::ldexp(1.0, squarings);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  Eigen::MatrixXd sum = term;
  for (int k = 1; k <= 18; ++k) {
    term = (term * x / static_cast<double>(k)).eval();
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = (sum * sum).eval();
  return sum;
}

/// Neumann Laplacian on a square of side L, shifted by one: 1 + pi^2 (k^2 + l^2) / L^2,
/// sorted, without the constant mode.
inline std::vector<double> neumann_spectrum(double L, int count) {
  std::vector<double> out;
  for (int k = 0; k < 12; ++k)
    for (int l = 0; l < 12; ++l)
      if (k + l > 0) out.push_back(1.0 + M_PI * M_PI * (k * k + l * l) / (L * L));
  std::sort(out.begin(), out.end());
  out.resize(static_cast<std::size_t>(count));
  return out;
}

/// Exact Q1 element matrices on an hx x hy rectangle, node order
/// (0,0), (1,0), (1,1), (0,1).
inline Eigen::Matrix4d q1_mass(double hx, double hy) {
  Eigen::Matrix4d m;
  m << 4, 2, 1, 2, 2, 4, 2, 1, 1, 2, 4, 2, 2, 1, 2, 4;
  return m * (hx * hy / 36.0);
}

inline Eigen::Matrix4d q1_laplace(double hx, double hy) {
  // 1D stiffness x 1D mass products.
  Eigen::Matrix2d k1, m1;
  k1 << 1, -1, -1, 1;
  m1 << 2, 1, 1, 2;
  m1 /= 6.0;
  const int ix[4] = {0, 1, 1, 0}, iy[4] = {0, 0, 1, 1};
  Eigen::Matrix4d out;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      out(a, b) = k1(ix[a], ix[b]) / hx * m1(iy[a], iy[b]) * hy + m1(ix[a], ix[b]) * hx * k1(iy[a], iy[b]) / hy;
  return out;
}

/// Dense scalar mass and Laplace matrices of a RectGrid from the closed-form
/// element matrices.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> dense_q1_matrices(const RectGrid& mesh) {
  const int n = mesh.num_nodes();
  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(n, n), lap = Eigen::MatrixXd::Zero(n, n);
  const auto me = q1_mass(mesh.hx(), mesh.hy());
  const auto ke = q1_laplace(mesh.hx(), mesh.hy());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto& cell = mesh.cell(c);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        mass(cell[a], cell[b]) += me(a, b);
        lap(cell[a], cell[b]) += ke(a, b);
      }
  }
  return {mass, lap};
}

/// Bilinear interpolation of a full nodal scalar field on a uniform grid,
/// written independently of RectGrid::locate.
inline double interpolate(const RectGrid& mesh, const Eigen::VectorXd& nodal, const Point& p) {
  const Rect& e = mesh.extent();
  const int nx = mesh.nx(), ny = mesh.ny();
  const double fx = (p.x() - e.x0) / mesh.hx(), fy = (p.y() - e.y0) / mesh.hy();
  const int i = std::clamp(static_cast<int>(std::floor(fx)), 0, nx - 1);
  const int j = std::clamp(static_cast<int>(std::floor(fy)), 0, ny - 1);
  const double u = fx - i, v = fy - j;
  auto at = [&](int a, int b) { return nodal(b * (nx + 1) + a); };
  return (1 - u) * (1 - v) * at(i, j) + u * (1 - v) * at(i + 1, j) + u * v * at(i + 1, j + 1) +
         (1 - u) * v * at(i, j + 1);
}

/// Interior-dof vector field -> full nodal component vectors.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> full_nodal(const FluidDomainGrid& grid, const Eigen::VectorXd& v) {
  const int n = grid.num_interior();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(grid.mesh.num_nodes()), y = x;
  for (int i = 0; i < n; ++i) {
    x(grid.interior_nodes[static_cast<std::size_t>(i)]) = v(i);
    y(grid.interior_nodes[static_cast<std::size_t>(i)]) = v(n + i);
  }
  return {x, y};
}

/// L2(B) projection of a scalar function onto Q1 on `mesh`, with a tensor
/// 3-point Gauss rule per cell and the closed-form mass matrix.
template <class F>
Eigen::VectorXd l2_project(const RectGrid& mesh, F&& f) {
  const double g[3] = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
  const double w[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  const Rect& e = mesh.extent();
  const int nx = mesh.nx();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mesh.num_nodes());
  for (int j = 0; j < mesh.ny(); ++j)
    for (int i = 0; i < nx; ++i)
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          const double u = g[a], v = g[b];
          const double val = f(Point(e.x0 + (i + u) * mesh.hx(), e.y0 + (j + v) * mesh.hy())) * w[a] * w[b] *
                             mesh.hx() * mesh.hy();
          rhs(j * (nx + 1) + i) += (1 - u) * (1 - v) * val;
          rhs(j * (nx + 1) + i + 1) += u * (1 - v) * val;
          rhs((j + 1) * (nx + 1) + i + 1) += u * v * val;
          rhs((j + 1) * (nx + 1) + i) += (1 - u) * v * val;
        }
  return dense_q1_matrices(mesh).first.ldlt().solve(rhs);
}

/// Centre and half-width of the widest stretch of [a, b] free of grid-line
/// crossings; delta is smooth there.
inline std::pair<double, double> widest_smooth_window(const CouplingContext& ctx, double a, double b) {
  auto knots = ctx.breakpoints(a, b);
  knots.insert(knots.begin(), a);
  knots.push_back(b);
  std::pair<double, double> best{0.5 * (a + b), 0.0};
  for (std::size_t k = 1; k < knots.size(); ++k)
    if (0.5 * (knots[k] - knots[k - 1]) > best.second)
      best = {0.5 * (knots[k] + knots[k - 1]), 0.5 * (knots[k] - knots[k - 1])};
  return best;
}

/// Observed order from errors at h and h/10.
inline double observed_order(double coarse, double fine) { return std::log10(coarse / fine); }

}  // namespace fsigal::testing
