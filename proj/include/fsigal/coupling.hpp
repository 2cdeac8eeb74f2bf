#pragma once

#include "fsigal/geometry.hpp"
#include "fsigal/spectral_bases.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace fsigal {

/// Raised when X(s,t) leaves the fluid box.
class ContainmentError : public std::runtime_error {
 public:
  ContainmentError(int point, const Point& s, double t);
  int point() const { return point_; }
  double time() const { return time_; }

 private:
  int point_;
  double time_;
};

/// Bilinear interpolation of fluid nodal fields at arbitrary points, with the
/// gradient of the interpolant. Columns index fluid nodes (all nodes, or the
/// interior ones when built with `interior_only`).
struct InterpolationOperator {
  SparseMatrix values;
  SparseMatrix grad_x;
  SparseMatrix grad_y;
};

InterpolationOperator interpolation_operator(const FluidDomainGrid& grid, const Eigen::Matrix2Xd& points,
                                             bool interior_only, double t = 0.0);

/// Samples of v(X(s_q, t)) for a full nodal field v (2 x nodes). Throws
/// ContainmentError naming the first s_q mapped outside Omega.
Eigen::Matrix2Xd compose_field(const FluidDomainGrid& grid, const Eigen::Matrix2Xd& v,
                               const PrescribedMotion& motion, double t, const Eigen::Matrix2Xd& targets);

/// L2(B) projection onto the solid Q1 space of fields known at the solid Gauss
/// points: M^{-1} S^T W per component, with S the Q1 interpolation at the
/// Gauss points and W the quadrature weights.
class SolidProjection {
 public:
  SolidProjection(const SolidReferenceGrid& grid, const SolidOperators& ops);

  /// (2Q x k) component-blocked samples -> (2N x k) nodal coefficients.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& samples) const;
  /// Adjoint: (2N x k) -> (2Q x k), W S M^{-1} per component.
  Eigen::MatrixXd apply_transpose(const Eigen::MatrixXd& nodal) const;
  /// W S z: nodal fields evaluated at the Gauss points, times the weights.
  Eigen::MatrixXd weighted_values(const Eigen::MatrixXd& nodal) const;
  int num_points() const { return static_cast<int>(weighted_samples_.cols()); }

 private:
  SparseMatrix weighted_samples_;  ///< S^T W, N x Q
  Eigen::LLT<Eigen::MatrixXd> mass_;
};

/// phi_j(t): the L2(B) projection of psi_j o X(t) onto the solid Q1 space, from
/// samples at the mapped Gauss points, and the projection of its time
/// derivative (grad psi_j o X) dX/dt.
struct ComposedBasis {
  double t = 0.0;
  Eigen::MatrixXd values;  ///< 2N x m, component blocked
  Eigen::MatrixXd rates;   ///< 2N x m
};

/// Composition of fluid interior-dof vectors with X(t), sampled at the solid
/// Gauss points and projected onto solid nodal dofs.
struct CompositionMap {
  double t = 0.0;
  SparseMatrix samples;       ///< (2Q) x (2n_interior): v(X(s_q, t))
  SparseMatrix sample_rates;  ///< (2Q) x (2n_interior): (grad v o X) dX/dt at s_q
  std::shared_ptr<const SolidProjection> projection;

  Eigen::MatrixXd values(const Eigen::MatrixXd& v) const { return projection->apply(samples * v); }
  Eigen::MatrixXd rates(const Eigen::MatrixXd& v) const { return projection->apply(sample_rates * v); }
  /// Adjoint of values(): solid nodal dual vectors -> fluid interior dual vectors.
  Eigen::MatrixXd values_transpose(const Eigen::MatrixXd& z) const {
    return samples.transpose() * projection->apply_transpose(z);
  }
};

struct CouplingCoefficients {
  double t = 0.0;
  Eigen::MatrixXd delta;  ///< m x R, delta_jr = c(phi_j(t), chi_r)
  Eigen::MatrixXd rate;   ///< m x R, d delta_jr / dt
  std::string quadrature = "solid-gauss3x3/l2-projection";
};

struct CoupledMatrices {
  double t = 0.0;
  Eigen::MatrixXd B;  ///< B_ji = delta_ji
  Eigen::MatrixXd C;  ///< C_ij = sum_r delta_jr delta_ir c_r
  Eigen::MatrixXd D;  ///< D_ij = sum_r delta'_jr delta_ir c_r
  Eigen::MatrixXd E;  ///< E_ij = delta_ij d_j
  double c_asymmetry = 0.0;
  /// Largest contribution of the last decile of r to any C entry.
  double tail = 0.0;
};

CouplingCoefficients compute_delta(const ComposedBasis& composed, const SolidEigenBasis& solid);

/// delta by direct evaluation of the c-form, c(phi_j, chi_r); the alternative
/// route to compute_delta.
Eigen::MatrixXd compute_delta_direct(const ComposedBasis& composed, const SolidEigenBasis& solid);

CoupledMatrices assemble_matrices(const CouplingCoefficients& coeffs, const SolidEigenBasis& solid);

/// Everything needed to evaluate time-dependent coupling quantities.
class CouplingContext {
 public:
  CouplingContext(FluidDomainGrid fluid_grid, SolidReferenceGrid solid_grid, FluidEigenBasis fluid,
                  SolidEigenBasis solid, PrescribedMotion motion);

  const FluidDomainGrid& fluid_grid() const { return fluid_grid_; }
  const SolidReferenceGrid& solid_grid() const { return solid_grid_; }
  const FluidEigenBasis& fluid() const { return fluid_; }
  const SolidEigenBasis& solid() const { return solid_; }
  const PrescribedMotion& motion() const { return motion_; }
  int m() const { return fluid_.size(); }
  int R() const { return solid_.size(); }

  /// Mapped solid nodes X(s_n, t) as a 2 x N matrix.
  Eigen::Matrix2Xd mapped_nodes(double t) const;
  /// Mapped solid Gauss points X(s_q, t) as a 2 x Q matrix.
  Eigen::Matrix2Xd mapped_points(double t) const;
  const SolidProjection& projection() const { return *projection_; }
  CompositionMap composition(double t) const;
  /// psi_j o X(t) and its time derivative at the solid Gauss points, as
  /// (m x 2Q) component-blocked rows; the dense fast path behind
  /// coefficients() and composed_basis().
  void sample_modes(double t, Eigen::MatrixXd& values, Eigen::MatrixXd& rates) const;
  ComposedBasis composed_basis(double t) const;
  /// delta_jr = lambda_r (psi_j o X(t), chi_r)_B by Gauss quadrature, without
  /// forming phi; equal to compute_delta(composed_basis(t), solid()).
  CouplingCoefficients coefficients(double t) const;
  CoupledMatrices matrices(double t) const;

  /// Times in (t0, t1) at which some mapped solid Gauss point crosses a fluid
  /// grid line. Between consecutive breakpoints every composed quantity is smooth
  /// in t; across one it has a kink.
  std::vector<double> breakpoints(double t0, double t1) const;

  /// Copy with the leading m fluid modes and R solid modes.
  CouplingContext truncated(int m, int R) const;

 private:
  FluidDomainGrid fluid_grid_;
  SolidReferenceGrid solid_grid_;
  FluidEigenBasis fluid_;
  SolidEigenBasis solid_;
  PrescribedMotion motion_;
  std::shared_ptr<const SolidProjection> projection_;
  /// W S chi diag(lambda): delta = (samples psi)^T quad_dual.
  Eigen::MatrixXd quad_dual_;
  Eigen::MatrixXd modes_t_;  ///< psi^T, m x 2n_interior
};

}  // namespace fsigal
