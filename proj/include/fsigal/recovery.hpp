#pragma once

#include "fsigal/coupling.hpp"
#include "fsigal/evolution.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <memory>
#include <stdexcept>

namespace fsigal {

class RecoveryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Multiplier coefficients l_r with lambda = sum_r l_r chi_r, from the closed
/// form l_r = drho c_r sum_j (a'_j delta_jr + a_j delta'_jr) + kappa beta_r d_r.
Eigen::VectorXd recover_multiplier(const GalerkinState& state, const Eigen::VectorXd& alpha_rate,
                                   const CouplingCoefficients& coeffs, const SolidEigenBasis& solid,
                                   const PhysicalParams& params);

/// Solid-equation residual drho (w', chi_r)_B + kappa (grad X, grad chi_r)_B
/// - c(lambda, chi_r) for every r, evaluated on nodal fields rather than via
/// the closed form.
struct SplitResidual {
  Eigen::VectorXd per_mode;
  double max_abs = 0.0;
};

SplitResidual verify_split(const GalerkinState& state, const Eigen::VectorXd& alpha_rate,
                           const Eigen::VectorXd& multiplier, const ComposedBasis& composed,
                           const SolidEigenBasis& solid, const PhysicalParams& params);

/// Pressure solver for (p, div v) = l(v) with piecewise-constant p.
///
/// Normal equations S p = D A^{-1} l with S = D A^{-1} D^T and A the viscous
/// stiffness. Q1-P0 leaves S singular on {constant, checkerboard}; those modes
/// are removed by adding tau M_p Z Z^T M_p, so p is zero-mean and free of the
/// spurious mode.
class PressureSolver {
 public:
  explicit PressureSolver(std::shared_ptr<const FluidOperators> ops);

  struct Solution {
    Eigen::VectorXd pressure;  ///< per cell
    /// l - D^T p in the dual norm sqrt(r^T A^{-1} r)
    double dual_residual = 0.0;
  };

  Solution solve(const Eigen::VectorXd& functional) const;

  /// sqrt of the smallest eigenvalue of S relative to M_p on zero-mean
  /// pressures. ~0 for Q1-P0 because of the checkerboard.
  double beta_h() const { return beta_h_; }
  /// Same, with the checkerboard also removed.
  double beta_h_reduced() const { return beta_h_reduced_; }
  /// Dimension of ker S (2 for Q1-P0 on a rectangle).
  int kernel_dimension() const { return static_cast<int>(kernel_.cols()); }
  const Eigen::MatrixXd& kernel() const { return kernel_; }
  double min_stabilized_eigenvalue() const { return min_stabilized_; }
  bool stabilized() const { return beta_h_ < kInfSupThreshold; }
  double dual_norm(const Eigen::VectorXd& functional) const;

  static constexpr double kInfSupThreshold = 1e-3;

 private:
  std::shared_ptr<const FluidOperators> ops_;
  Eigen::SimplicialLDLT<SparseMatrix> stiffness_;
  Eigen::MatrixXd stabilized_;
  Eigen::LLT<Eigen::MatrixXd> factor_;
  Eigen::MatrixXd kernel_;  ///< M_p-orthonormal
  double beta_h_ = 0.0;
  double beta_h_reduced_ = 0.0;
  double min_stabilized_ = 0.0;
};

/// l(v) = rho_f (u_t, v) + a(u, v) + c(lambda, v o X(t)) for every interior
/// velocity dof v.
Eigen::VectorXd pressure_functional(const GalerkinState& state, const Eigen::VectorXd& alpha_rate,
                                    const Eigen::VectorXd& multiplier, const CouplingContext& ctx,
                                    const PhysicalParams& params);

struct RecoveryFields {
  double t = 0.0;
  Eigen::VectorXd multiplier;  ///< l_r
  Eigen::VectorXd pressure;    ///< cell values, zero mean
  double lambda_norm = 0.0;    ///< ||lambda||_{1,B} = |l| by c-orthonormality
  double pressure_norm = 0.0;  ///< ||p||_{0,Omega}
  double pressure_mean = 0.0;
  double solid_residual = 0.0;      ///< max_r |split residual|
  double divfree_residual = 0.0;    ///< max_{j<=m} |l(psi_j) - (p, div psi_j)|
  double dual_residual = 0.0;       ///< ||l - D^T p||_{A^{-1}}
  double beta_h = 0.0;
  double beta_h_reduced = 0.0;
  /// ||lambda|| / (||w'||_{0,B} + kappa ||grad X||_{0,B}); logged, not bounded.
  double continuity_ratio = 0.0;
};

RecoveryFields recover(const GalerkinState& state, const PhysicalParams& params, const CouplingContext& ctx,
                       const PressureSolver& pressure);

}  // namespace fsigal
