#include "fsigal/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace fsigal {

namespace {

std::string containment_message(int point, const Point& s, double t) {
  std::ostringstream os;
  os << "solid point #" << point << " s=(" << s.x() << ", " << s.y() << ") is mapped outside the fluid domain at t="
     << t;
  return os.str();
}

/// Two copies of a scalar operator acting on component-blocked fields.
SparseMatrix block_diagonal(const SparseMatrix& a) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(2 * a.nonZeros()));
  for (int k = 0; k < a.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
      trip.emplace_back(static_cast<int>(it.row() + a.rows()), static_cast<int>(it.col() + a.cols()), it.value());
    }
  }
  SparseMatrix out(2 * a.rows(), 2 * a.cols());
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

}  // namespace

ContainmentError::ContainmentError(int point, const Point& s, double t)
    : std::runtime_error(containment_message(point, s, t)), point_(point), time_(t) {}

InterpolationOperator interpolation_operator(const FluidDomainGrid& grid, const Eigen::Matrix2Xd& points,
                                             bool interior_only, double t) {
  const auto& mesh = grid.mesh;
  const int cols = interior_only ? grid.num_interior() : mesh.num_nodes();
  std::vector<Eigen::Triplet<double>> val, gx, gy;
  for (int k = 0; k < points.cols(); ++k) {
    const Point p = points.col(k);
    const int c = mesh.locate(p);
    if (c < 0) throw ContainmentError(k, p, t);
    const auto ref = mesh.to_reference(c, p);
    const auto shape = bilinear_shape(ref.x(), ref.y());
    const auto grad = bilinear_shape_gradient(ref.x(), ref.y());
    const auto& cell = mesh.cell(c);
    for (int a = 0; a < 4; ++a) {
      const int col = interior_only ? grid.interior_index[static_cast<std::size_t>(cell[a])] : cell[a];
      if (col < 0) continue;
      val.emplace_back(k, col, shape(a));
      gx.emplace_back(k, col, grad(0, a) / mesh.hx());
      gy.emplace_back(k, col, grad(1, a) / mesh.hy());
    }
  }
  InterpolationOperator op;
  op.values.resize(points.cols(), cols);
  op.values.setFromTriplets(val.begin(), val.end());
  op.grad_x.resize(points.cols(), cols);
  op.grad_x.setFromTriplets(gx.begin(), gx.end());
  op.grad_y.resize(points.cols(), cols);
  op.grad_y.setFromTriplets(gy.begin(), gy.end());
  return op;
}

Eigen::Matrix2Xd compose_field(const FluidDomainGrid& grid, const Eigen::Matrix2Xd& v,
                               const PrescribedMotion& motion, double t, const Eigen::Matrix2Xd& targets) {
  if (v.cols() != grid.mesh.num_nodes()) throw std::invalid_argument("compose_field: field size mismatch");
  Eigen::Matrix2Xd mapped(2, targets.cols());
  for (int q = 0; q < targets.cols(); ++q) mapped.col(q) = motion(Point(targets.col(q)), t).position;
  InterpolationOperator op;
  try {
    op = interpolation_operator(grid, mapped, false, t);
  } catch (const ContainmentError& e) {
    throw ContainmentError(e.point(), targets.col(e.point()), t);
  }
  Eigen::Matrix2Xd out(2, targets.cols());
  out.row(0) = (op.values * v.row(0).transpose()).transpose();
  out.row(1) = (op.values * v.row(1).transpose()).transpose();
  return out;
}

CouplingCoefficients compute_delta(const ComposedBasis& composed, const SolidEigenBasis& solid) {
  CouplingCoefficients out;
  out.t = composed.t;
  // c(phi, chi_r) = lambda_r (phi, chi_r)_B on the discrete solid space, and
  // (phi, chi_r)_B = (psi o X, chi_r)_B by Gauss quadrature since phi is the
  // L2 projection.
  out.delta = composed.values.transpose() * solid.weighted_dual;
  out.rate = composed.rates.transpose() * solid.weighted_dual;
  return out;
}

Eigen::MatrixXd compute_delta_direct(const ComposedBasis& composed, const SolidEigenBasis& solid) {
  return solid.operators->apply_c(composed.values).transpose() * solid.modes;
}

CoupledMatrices assemble_matrices(const CouplingCoefficients& coeffs, const SolidEigenBasis& solid) {
  const auto& delta = coeffs.delta;
  const auto& rate = coeffs.rate;
  const Eigen::Index m = delta.rows();
  const Eigen::Index R = delta.cols();
  if (R != solid.size()) throw std::invalid_argument("assemble_matrices: R mismatch");
  if (R < m) throw std::invalid_argument("assemble_matrices: need R >= m");

  CoupledMatrices out;
  out.t = coeffs.t;
  const auto c = solid.c.asDiagonal();
  out.B = delta.leftCols(m);
  const Eigen::MatrixXd raw_c = delta * c * delta.transpose();
  out.C = 0.5 * (raw_c + raw_c.transpose());
  out.c_asymmetry = (raw_c - raw_c.transpose()).cwiseAbs().maxCoeff();
  out.D = delta * c * rate.transpose();
  out.E = delta.leftCols(m) * solid.d.head(m).asDiagonal();

  const Eigen::Index first_tail = R - std::max<Eigen::Index>(1, R / 10);
  const Eigen::Index tail_count = R - first_tail;
  const Eigen::MatrixXd tail = delta.rightCols(tail_count).cwiseAbs() * solid.c.tail(tail_count).asDiagonal() *
                               delta.rightCols(tail_count).cwiseAbs().transpose();
  out.tail = tail.maxCoeff();
  return out;
}

SolidProjection::SolidProjection(const SolidReferenceGrid& grid, const SolidOperators& ops) {
  const auto& mesh = grid.mesh;
  const auto& qp = mesh.quad_points();
  const auto& qw = mesh.quad_weights();
  const int ppc = mesh.points_per_cell();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(4 * qp.cols()));
  for (int q = 0; q < qp.cols(); ++q) {
    const int c = q / ppc;
    const auto ref = mesh.to_reference(c, qp.col(q));
    const auto shape = bilinear_shape(ref.x(), ref.y());
    const auto& cell = mesh.cell(c);
    for (int k = 0; k < 4; ++k) trip.emplace_back(cell[k], q, shape(k) * qw(q));
  }
  weighted_samples_.resize(mesh.num_nodes(), qp.cols());
  weighted_samples_.setFromTriplets(trip.begin(), trip.end());
  mass_.compute(ops.mass);
  if (mass_.info() != Eigen::Success) throw std::runtime_error("solid mass matrix is not positive definite");
}

Eigen::MatrixXd SolidProjection::apply(const Eigen::MatrixXd& samples) const {
  const Eigen::Index Q = weighted_samples_.cols(), N = weighted_samples_.rows();
  if (samples.rows() != 2 * Q) throw std::invalid_argument("SolidProjection: sample count mismatch");
  Eigen::MatrixXd out(2 * N, samples.cols());
  out.topRows(N) = mass_.solve(weighted_samples_ * samples.topRows(Q));
  out.bottomRows(N) = mass_.solve(weighted_samples_ * samples.bottomRows(Q));
  return out;
}

Eigen::MatrixXd SolidProjection::apply_transpose(const Eigen::MatrixXd& nodal) const {
  const Eigen::Index Q = weighted_samples_.cols(), N = weighted_samples_.rows();
  if (nodal.rows() != 2 * N) throw std::invalid_argument("SolidProjection: nodal size mismatch");
  Eigen::MatrixXd out(2 * Q, nodal.cols());
  out.topRows(Q) = weighted_samples_.transpose() * mass_.solve(nodal.topRows(N));
  out.bottomRows(Q) = weighted_samples_.transpose() * mass_.solve(nodal.bottomRows(N));
  return out;
}

Eigen::MatrixXd SolidProjection::weighted_values(const Eigen::MatrixXd& nodal) const {
  const Eigen::Index Q = weighted_samples_.cols(), N = weighted_samples_.rows();
  if (nodal.rows() != 2 * N) throw std::invalid_argument("SolidProjection: nodal size mismatch");
  Eigen::MatrixXd out(2 * Q, nodal.cols());
  out.topRows(Q) = weighted_samples_.transpose() * nodal.topRows(N);
  out.bottomRows(Q) = weighted_samples_.transpose() * nodal.bottomRows(N);
  return out;
}

CouplingContext::CouplingContext(FluidDomainGrid fluid_grid, SolidReferenceGrid solid_grid, FluidEigenBasis fluid,
                                 SolidEigenBasis solid, PrescribedMotion motion)
    : fluid_grid_(std::move(fluid_grid)),
      solid_grid_(std::move(solid_grid)),
      fluid_(std::move(fluid)),
      solid_(std::move(solid)),
      motion_(std::move(motion)) {
  if (solid_.size() < fluid_.size()) throw std::invalid_argument("coupling needs R >= m");
  projection_ = std::make_shared<SolidProjection>(solid_grid_, *solid_.operators);
  quad_dual_ = projection_->weighted_values(solid_.modes) * solid_.eigenvalues.asDiagonal();
  modes_t_ = fluid_.modes.transpose();
}

Eigen::Matrix2Xd CouplingContext::mapped_nodes(double t) const {
  const auto& nodes = solid_grid_.mesh.nodes();
  Eigen::Matrix2Xd out(2, nodes.cols());
  for (int n = 0; n < nodes.cols(); ++n) out.col(n) = motion_(Point(nodes.col(n)), t).position;
  return out;
}

Eigen::Matrix2Xd CouplingContext::mapped_points(double t) const {
  const auto& qp = solid_grid_.mesh.quad_points();
  Eigen::Matrix2Xd out(2, qp.cols());
  for (int q = 0; q < qp.cols(); ++q) out.col(q) = motion_(Point(qp.col(q)), t).position;
  return out;
}

CompositionMap CouplingContext::composition(double t) const {
  const auto& qp = solid_grid_.mesh.quad_points();
  const int count = static_cast<int>(qp.cols());
  Eigen::Matrix2Xd mapped(2, count);
  Eigen::VectorXd vx(count), vy(count);
  for (int q = 0; q < count; ++q) {
    const auto s = motion_(Point(qp.col(q)), t);
    mapped.col(q) = s.position;
    vx(q) = s.velocity.x();
    vy(q) = s.velocity.y();
  }
  InterpolationOperator op;
  try {
    op = interpolation_operator(fluid_grid_, mapped, true, t);
  } catch (const ContainmentError& e) {
    throw ContainmentError(e.point(), qp.col(e.point()), t);
  }
  CompositionMap out;
  out.t = t;
  out.samples = block_diagonal(op.values);
  const SparseMatrix rate = vx.asDiagonal() * op.grad_x + vy.asDiagonal() * op.grad_y;
  out.sample_rates = block_diagonal(rate);
  out.projection = projection_;
  return out;
}

void CouplingContext::sample_modes(double t, Eigen::MatrixXd& values, Eigen::MatrixXd& rates) const {
  const auto& mesh = fluid_grid_.mesh;
  const auto& qp = solid_grid_.mesh.quad_points();
  const Eigen::Index Q = qp.cols(), n = fluid_grid_.num_interior(), m = modes_t_.rows();
  values.setZero(m, 2 * Q);
  rates.setZero(m, 2 * Q);
  for (Eigen::Index q = 0; q < Q; ++q) {
    const auto s = motion_(Point(qp.col(q)), t);
    const int c = mesh.locate(s.position);
    if (c < 0) throw ContainmentError(static_cast<int>(q), qp.col(q), t);
    const auto ref = mesh.to_reference(c, s.position);
    const auto shape = bilinear_shape(ref.x(), ref.y());
    const auto grad = bilinear_shape_gradient(ref.x(), ref.y());
    const auto& cell = mesh.cell(c);
    for (int a = 0; a < 4; ++a) {
      const int col = fluid_grid_.interior_index[static_cast<std::size_t>(cell[a])];
      if (col < 0) continue;
      const double rate = s.velocity.x() * grad(0, a) / mesh.hx() + s.velocity.y() * grad(1, a) / mesh.hy();
      values.col(q) += shape(a) * modes_t_.col(col);
      values.col(Q + q) += shape(a) * modes_t_.col(n + col);
      rates.col(q) += rate * modes_t_.col(col);
      rates.col(Q + q) += rate * modes_t_.col(n + col);
    }
  }
}

ComposedBasis CouplingContext::composed_basis(double t) const {
  Eigen::MatrixXd values, rates;
  sample_modes(t, values, rates);
  ComposedBasis out;
  out.t = t;
  out.values = projection_->apply(values.transpose());
  out.rates = projection_->apply(rates.transpose());
  return out;
}

CouplingCoefficients CouplingContext::coefficients(double t) const {
  Eigen::MatrixXd values, rates;
  sample_modes(t, values, rates);
  CouplingCoefficients out;
  out.t = t;
  out.delta = values * quad_dual_;
  out.rate = rates * quad_dual_;
  return out;
}

CoupledMatrices CouplingContext::matrices(double t) const { return assemble_matrices(coefficients(t), solid_); }

std::vector<double> CouplingContext::breakpoints(double t0, double t1) const {
  std::vector<double> out;
  if (motion_.kind() == MotionKind::identity || !(t1 > t0)) return out;
  const auto& mesh = fluid_grid_.mesh;
  const auto& points = solid_grid_.mesh.quad_points();
  const double origin[2] = {mesh.extent().x0, mesh.extent().y0};
  const double h[2] = {mesh.hx(), mesh.hy()};
  for (int n = 0; n < points.cols(); ++n) {
    const Point s = points.col(n);
    const Point p0 = motion_(s, t0).position;
    const Point p1 = motion_(s, t1).position;
    for (int axis = 0; axis < 2; ++axis) {
      const long i0 = static_cast<long>(std::floor((p0(axis) - origin[axis]) / h[axis]));
      const long i1 = static_cast<long>(std::floor((p1(axis) - origin[axis]) / h[axis]));
      for (long k = std::min(i0, i1) + 1; k <= std::max(i0, i1); ++k) {
        const double line = origin[axis] + static_cast<double>(k) * h[axis];
        // Bisection on the signed offset from the grid line.
        double a = t0, b = t1;
        double fa = p0(axis) - line;
        for (int it = 0; it < 60 && b - a > 1e-15 * std::max(1.0, t1); ++it) {
          const double c = 0.5 * (a + b);
          const double fc = motion_(s, c).position(axis) - line;
          if ((fa < 0.0) == (fc < 0.0)) {
            a = c;
            fa = fc;
          } else {
            b = c;
          }
        }
        out.push_back(0.5 * (a + b));
      }
    }
  }
  std::sort(out.begin(), out.end());
  const double merge = 1e-9 * (t1 - t0);
  std::vector<double> merged;
  for (double t : out) {
    if (t - t0 <= merge || t1 - t <= merge) continue;
    if (!merged.empty() && t - merged.back() <= merge) continue;
    merged.push_back(t);
  }
  return merged;
}

CouplingContext CouplingContext::truncated(int m, int R) const {
  return CouplingContext(fluid_grid_, solid_grid_, fluid_.truncated(m), solid_.truncated(R), motion_);
}

}  // namespace fsigal
