#pragma once

#include "fsigal/geometry.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <memory>
#include <stdexcept>

namespace fsigal {

using SparseMatrix = Eigen::SparseMatrix<double>;

class SpectralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Piecewise-constant viscosity: nu_s on the reference solid, nu_f elsewhere.
struct ViscosityField {
  double nu_f = 1.0;
  double nu_s = 1.0;
  Rect solid;

  double operator()(const Point& x) const { return solid.contains(x) ? nu_s : nu_f; }
};

/// Discrete fluid forms on zero-trace Q1 velocity fields. Vector unknowns are
/// component blocked: [u_x at interior nodes, u_y at interior nodes].
struct FluidOperators {
  SparseMatrix mass;        ///< (u, v)
  SparseMatrix stiffness;   ///< a(u, v) = (nu grad_s u, grad_s v)
  SparseMatrix divergence;  ///< rows: cells; (q_K, div v) for the cell indicator q_K
  Eigen::VectorXd cell_areas;
};

SparseMatrix assemble_divergence(const FluidDomainGrid& grid);
FluidOperators assemble_fluid_operators(const FluidDomainGrid& grid, const ViscosityField& nu);

/// L2 norm of the piecewise-constant projection of div v.
double discrete_divergence_norm(const FluidOperators& ops, const Eigen::VectorXd& v);

struct DivergenceFreeSubspace {
  Eigen::MatrixXd basis;  ///< Euclidean-orthonormal columns spanning ker(div_h)
  int divergence_rank = 0;
  int dimension() const { return static_cast<int>(basis.cols()); }
};

/// Null space of the discrete divergence over zero-trace fields, from a
/// column-pivoted QR of div_h^T.
DivergenceFreeSubspace build_divfree_subspace(const FluidDomainGrid& grid);
DivergenceFreeSubspace build_divfree_subspace(const SparseMatrix& divergence);

struct FluidEigenBasis {
  Eigen::MatrixXd modes;        ///< psi_j as columns, L2-orthonormal
  Eigen::VectorXd eigenvalues;  ///< nondecreasing, a(psi_j, psi_j)
  int subspace_dimension = 0;
  std::shared_ptr<const FluidOperators> operators;

  int size() const { return static_cast<int>(modes.cols()); }
  /// Leading m modes; shares the operators.
  FluidEigenBasis truncated(int m) const;
};

/// First m eigenpairs of a(psi, v) = lambda (psi, v) over discretely
/// divergence-free fields. Requires m <= subspace dimension and nu >= nu_0 > 0.
FluidEigenBasis solve_fluid_eigenproblem(const FluidDomainGrid& grid, const ViscosityField& nu, int m);

/// Same, reusing an already computed subspace.
FluidEigenBasis solve_fluid_eigenproblem(const FluidDomainGrid& grid, const ViscosityField& nu,
                                         const DivergenceFreeSubspace& subspace, int m);

/// Scalar Q1 forms on the solid reference grid; vector fields apply them per
/// component on [z_x, z_y].
struct SolidOperators {
  Eigen::MatrixXd mass;
  Eigen::MatrixXd stiffness;

  int num_nodes() const { return static_cast<int>(mass.rows()); }
  /// (z, .)_B applied to a component-blocked vector field (or its columns).
  Eigen::MatrixXd apply_mass(const Eigen::MatrixXd& z) const;
  /// (grad_s z, grad_s .)_B
  Eigen::MatrixXd apply_stiffness(const Eigen::MatrixXd& z) const;
  /// c(z, .) = stiffness + mass
  Eigen::MatrixXd apply_c(const Eigen::MatrixXd& z) const { return apply_mass(z) + apply_stiffness(z); }
};

SolidOperators assemble_solid_operators(const SolidReferenceGrid& grid);

struct SolidEigenBasis {
  Eigen::MatrixXd modes;        ///< chi_r as columns, c-orthonormal, 2N rows
  Eigen::VectorXd eigenvalues;  ///< lambda_s >= 1, nondecreasing
  Eigen::VectorXd c;            ///< ||chi_r||^2_B = 1/lambda_s
  Eigen::VectorXd d;            ///< ||grad chi_r||^2_B = 1 - c_r
  Eigen::MatrixXd weighted_dual;  ///< columns lambda_r M chi_r; delta = phi^T * weighted_dual
  std::shared_ptr<const SolidOperators> operators;

  int size() const { return static_cast<int>(modes.cols()); }
  SolidEigenBasis truncated(int r) const;
};

/// First R eigenpairs of c(mu, chi) = lambda_s (chi, mu)_B. The vector problem
/// decouples by component: each scalar eigenpair yields an x-mode followed by a
/// y-mode.
SolidEigenBasis solve_solid_eigenproblem(const SolidReferenceGrid& grid, int R);

/// Flips each column so that its first entry above 1e-8 * max|col| is positive.
void fix_signs(Eigen::MatrixXd& vectors);

}  // namespace fsigal
