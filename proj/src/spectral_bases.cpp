#include "fsigal/spectral_bases.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <string>
#include <vector>

namespace fsigal {

namespace {

using Triplet = Eigen::Triplet<double>;

struct CellKernel {
  Eigen::Matrix<double, 4, 1> shape;
  Eigen::Matrix<double, 2, 4> grad;  // physical gradients
  double weight;
  Point x;
};

/// Shape data at every quadrature point of cell c.
std::vector<CellKernel> cell_kernels(const RectGrid& mesh, int c) {
  std::vector<CellKernel> out;
  const Point origin = mesh.node(mesh.cell(c)[0]);
  const double jac = mesh.hx() * mesh.hy();
  const auto [gx, gw] = gauss_legendre<double>(3);
  for (std::size_t b = 0; b < gx.size(); ++b) {
    for (std::size_t a = 0; a < gx.size(); ++a) {
      const double xi = 0.5 * (gx[a] + 1.0), eta = 0.5 * (gx[b] + 1.0);
      CellKernel k;
      k.shape = bilinear_shape(xi, eta);
      k.grad = bilinear_shape_gradient(xi, eta);
      k.grad.row(0) /= mesh.hx();
      k.grad.row(1) /= mesh.hy();
      k.weight = 0.25 * gw[a] * gw[b] * jac;
      k.x = origin + Point(xi * mesh.hx(), eta * mesh.hy());
      out.push_back(k);
    }
  }
  return out;
}

}  // namespace

SparseMatrix assemble_divergence(const FluidDomainGrid& grid) {
  const auto& mesh = grid.mesh;
  const int n = grid.num_interior();
  std::vector<Triplet> trip;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto& cell = mesh.cell(c);
    for (const auto& k : cell_kernels(mesh, c)) {
      for (int a = 0; a < 4; ++a) {
        const int ia = grid.interior_index[static_cast<std::size_t>(cell[a])];
        if (ia < 0) continue;
        trip.emplace_back(c, ia, k.weight * k.grad(0, a));
        trip.emplace_back(c, n + ia, k.weight * k.grad(1, a));
      }
    }
  }
  SparseMatrix div(mesh.num_cells(), 2 * n);
  div.setFromTriplets(trip.begin(), trip.end());
  return div;
}

FluidOperators assemble_fluid_operators(const FluidDomainGrid& grid, const ViscosityField& nu) {
  if (!(nu.nu_f > 0.0) || !(nu.nu_s > 0.0)) throw SpectralError("viscosities must be positive");
  const auto& mesh = grid.mesh;
  const int n = grid.num_interior();
  std::vector<Triplet> mass, stiff;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto& cell = mesh.cell(c);
    for (const auto& k : cell_kernels(mesh, c)) {
      const double nuq = nu(k.x);
      for (int a = 0; a < 4; ++a) {
        const int ia = grid.interior_index[static_cast<std::size_t>(cell[a])];
        if (ia < 0) continue;
        const double ax = k.grad(0, a), ay = k.grad(1, a);
        for (int b = 0; b < 4; ++b) {
          const int ib = grid.interior_index[static_cast<std::size_t>(cell[b])];
          if (ib < 0) continue;
          const double bx = k.grad(0, b), by = k.grad(1, b);
          const double m = k.weight * k.shape(a) * k.shape(b);
          mass.emplace_back(ia, ib, m);
          mass.emplace_back(n + ia, n + ib, m);
          // grad_s u : grad_s v with u = phi_a e_i, v = phi_b e_j.
          const double w = k.weight * nuq;
          stiff.emplace_back(ia, ib, w * (ax * bx + 0.5 * ay * by));
          stiff.emplace_back(n + ia, n + ib, w * (ay * by + 0.5 * ax * bx));
          stiff.emplace_back(ia, n + ib, w * 0.5 * ay * bx);
          stiff.emplace_back(n + ia, ib, w * 0.5 * ax * by);
        }
      }
    }
  }
  FluidOperators ops;
  ops.mass.resize(2 * n, 2 * n);
  ops.mass.setFromTriplets(mass.begin(), mass.end());
  ops.stiffness.resize(2 * n, 2 * n);
  ops.stiffness.setFromTriplets(stiff.begin(), stiff.end());
  ops.divergence = assemble_divergence(grid);
  ops.cell_areas = Eigen::VectorXd::Constant(mesh.num_cells(), mesh.hx() * mesh.hy());
  return ops;
}

double discrete_divergence_norm(const FluidOperators& ops, const Eigen::VectorXd& v) {
  const Eigen::VectorXd d = ops.divergence * v;
  return std::sqrt((d.array().square() / ops.cell_areas.array()).sum());
}

DivergenceFreeSubspace build_divfree_subspace(const FluidDomainGrid& grid) {
  return build_divfree_subspace(assemble_divergence(grid));
}

DivergenceFreeSubspace build_divfree_subspace(const SparseMatrix& divergence) {
  const Eigen::MatrixXd dt = Eigen::MatrixXd(divergence.transpose());
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(dt);
  qr.setThreshold(1e-10);
  const int n = static_cast<int>(dt.rows());
  const int rank = static_cast<int>(qr.rank());
  if (rank >= n) throw SpectralError("discrete divergence has an empty null space");

  Eigen::MatrixXd select = Eigen::MatrixXd::Zero(n, n - rank);
  select.bottomRows(n - rank).setIdentity();
  DivergenceFreeSubspace out;
  out.basis = qr.householderQ() * select;
  out.divergence_rank = rank;
  return out;
}

void fix_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    const double scale = vectors.col(j).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
      const double v = vectors(i, j);
      if (std::abs(v) > 1e-8 * scale) {
        if (v < 0.0) vectors.col(j) *= -1.0;
        break;
      }
    }
  }
}

FluidEigenBasis FluidEigenBasis::truncated(int m) const {
  if (m < 1 || m > size()) throw SpectralError("cannot truncate fluid basis to m=" + std::to_string(m));
  FluidEigenBasis out = *this;
  out.modes = modes.leftCols(m);
  out.eigenvalues = eigenvalues.head(m);
  return out;
}

FluidEigenBasis solve_fluid_eigenproblem(const FluidDomainGrid& grid, const ViscosityField& nu, int m) {
  return solve_fluid_eigenproblem(grid, nu, build_divfree_subspace(grid), m);
}

FluidEigenBasis solve_fluid_eigenproblem(const FluidDomainGrid& grid, const ViscosityField& nu,
                                         const DivergenceFreeSubspace& subspace, int m) {
  if (m < 1) throw SpectralError("fluid basis size must be positive");
  if (m > subspace.dimension()) {
    throw SpectralError("requested m=" + std::to_string(m) + " exceeds the divergence-free subspace dimension " +
                        std::to_string(subspace.dimension()));
  }
  auto ops = std::make_shared<FluidOperators>(assemble_fluid_operators(grid, nu));
  const Eigen::MatrixXd& basis = subspace.basis;
  Eigen::MatrixXd a = basis.transpose() * (ops->stiffness * basis);
  Eigen::MatrixXd mm = basis.transpose() * (ops->mass * basis);
  a = 0.5 * (a + a.transpose()).eval();
  mm = 0.5 * (mm + mm.transpose()).eval();

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(a, mm);
  if (es.info() != Eigen::Success) throw SpectralError("fluid eigensolver failed");

  FluidEigenBasis out;
  out.modes = basis * es.eigenvectors().leftCols(m);
  fix_signs(out.modes);
  out.eigenvalues = es.eigenvalues().head(m);
  out.subspace_dimension = subspace.dimension();
  out.operators = std::move(ops);
  return out;
}

Eigen::MatrixXd SolidOperators::apply_mass(const Eigen::MatrixXd& z) const {
  const int n = num_nodes();
  Eigen::MatrixXd out(z.rows(), z.cols());
  out.topRows(n).noalias() = mass * z.topRows(n);
  out.bottomRows(n).noalias() = mass * z.bottomRows(n);
  return out;
}

Eigen::MatrixXd SolidOperators::apply_stiffness(const Eigen::MatrixXd& z) const {
  const int n = num_nodes();
  Eigen::MatrixXd out(z.rows(), z.cols());
  out.topRows(n).noalias() = stiffness * z.topRows(n);
  out.bottomRows(n).noalias() = stiffness * z.bottomRows(n);
  return out;
}

SolidOperators assemble_solid_operators(const SolidReferenceGrid& grid) {
  const auto& mesh = grid.mesh;
  const int n = mesh.num_nodes();
  SolidOperators ops;
  ops.mass = Eigen::MatrixXd::Zero(n, n);
  ops.stiffness = Eigen::MatrixXd::Zero(n, n);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto& cell = mesh.cell(c);
    for (const auto& k : cell_kernels(mesh, c)) {
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          ops.mass(cell[a], cell[b]) += k.weight * k.shape(a) * k.shape(b);
          ops.stiffness(cell[a], cell[b]) += k.weight * k.grad.col(a).dot(k.grad.col(b));
        }
      }
    }
  }
  return ops;
}

SolidEigenBasis SolidEigenBasis::truncated(int r) const {
  if (r < 1 || r > size()) throw SpectralError("cannot truncate solid basis to R=" + std::to_string(r));
  SolidEigenBasis out = *this;
  out.modes = modes.leftCols(r);
  out.eigenvalues = eigenvalues.head(r);
  out.c = c.head(r);
  out.d = d.head(r);
  out.weighted_dual = weighted_dual.leftCols(r);
  return out;
}

SolidEigenBasis solve_solid_eigenproblem(const SolidReferenceGrid& grid, int R) {
  auto ops = std::make_shared<SolidOperators>(assemble_solid_operators(grid));
  const int n = ops->num_nodes();
  if (R < 1) throw SpectralError("solid basis size must be positive");
  if (R > 2 * n) {
    throw SpectralError("requested R=" + std::to_string(R) + " exceeds the " + std::to_string(2 * n) +
                        " solid velocity unknowns");
  }
  const Eigen::MatrixXd cform = ops->stiffness + ops->mass;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(cform, ops->mass);
  if (es.info() != Eigen::Success) throw SpectralError("solid eigensolver failed");

  const int scalar_count = (R + 1) / 2;
  Eigen::MatrixXd scalar = es.eigenvectors().leftCols(scalar_count);
  fix_signs(scalar);

  SolidEigenBasis out;
  out.modes = Eigen::MatrixXd::Zero(2 * n, R);
  out.eigenvalues.resize(R);
  for (int r = 0; r < R; ++r) {
    const int k = r / 2;
    const double lambda = es.eigenvalues()(k);
    // Eigen normalizes chi^T M chi = 1, so c(chi, chi) = lambda.
    const Eigen::VectorXd chi = scalar.col(k) / std::sqrt(lambda);
    if (r % 2 == 0)
      out.modes.col(r).head(n) = chi;
    else
      out.modes.col(r).tail(n) = chi;
    out.eigenvalues(r) = lambda;
  }
  out.c = out.eigenvalues.cwiseInverse();
  out.d = (Eigen::VectorXd::Ones(R) - out.c);
  out.weighted_dual = ops->apply_mass(out.modes) * out.eigenvalues.asDiagonal();
  out.operators = std::move(ops);
  return out;
}

}  // namespace fsigal
