#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fsigal {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Matrix2 = Eigen::Matrix<Scalar, 2, 2>;

using Point = Vector2<double>;

/// Axis-aligned rectangle [x0,x1] x [y0,y1].
struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  bool contains(const Point& p, double tol = 0.0) const {
    return p.x() >= x0 - tol && p.x() <= x1 + tol && p.y() >= y0 - tol && p.y() <= y1 + tol;
  }
  /// Signed distance from p to the boundary, positive inside.
  double inner_distance(const Point& p) const {
    return std::min(std::min(p.x() - x0, x1 - p.x()), std::min(p.y() - y0, y1 - p.y()));
  }
};

/// Gauss-Legendre nodes and weights on [-1,1].
template <typename Scalar = double>
std::pair<std::vector<Scalar>, std::vector<Scalar>> gauss_legendre(int n) {
  switch (n) {
    case 2: {
      const Scalar a = Scalar(1) / std::sqrt(Scalar(3));
      return {{-a, a}, {Scalar(1), Scalar(1)}};
    }
    case 3: {
      const Scalar a = std::sqrt(Scalar(3) / Scalar(5));
      return {{-a, Scalar(0), a}, {Scalar(5) / 9, Scalar(8) / 9, Scalar(5) / 9}};
    }
    default:
      throw std::invalid_argument("gauss_legendre: supported orders are 2 and 3");
  }
}

/// Bilinear shape functions on the reference square [0,1]^2, node order
/// (0,0), (1,0), (1,1), (0,1).
template <typename Scalar>
Eigen::Matrix<Scalar, 4, 1> bilinear_shape(Scalar xi, Scalar eta) {
  Eigen::Matrix<Scalar, 4, 1> n;
  n << (1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta;
  return n;
}

/// Reference-coordinate derivatives of the bilinear shape functions; row 0 is
/// d/dxi, row 1 is d/deta.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 4> bilinear_shape_gradient(Scalar xi, Scalar eta) {
  Eigen::Matrix<Scalar, 2, 4> g;
  g << -(1 - eta), (1 - eta), eta, -eta,
       -(1 - xi), -xi, xi, (1 - xi);
  return g;
}

/// Uniform rectangular mesh with Q1 nodes and a tensor Gauss rule per cell.
/// Nodes are numbered x-fastest; cells likewise.
class RectGrid {
 public:
  RectGrid() = default;
  RectGrid(const Rect& extent, int nx, int ny, int gauss_order = 3);

  const Rect& extent() const { return extent_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  int num_nodes() const { return (nx_ + 1) * (ny_ + 1); }
  int num_cells() const { return nx_ * ny_; }
  int node_id(int i, int j) const { return j * (nx_ + 1) + i; }
  int cell_id(int i, int j) const { return j * nx_ + i; }

  const Eigen::Matrix2Xd& nodes() const { return nodes_; }
  Point node(int n) const { return nodes_.col(n); }
  const std::array<int, 4>& cell(int c) const { return cells_[static_cast<std::size_t>(c)]; }

  /// All quadrature points, grouped by cell (points_per_cell() consecutive).
  const Eigen::Matrix2Xd& quad_points() const { return quad_points_; }
  const Eigen::VectorXd& quad_weights() const { return quad_weights_; }
  int points_per_cell() const { return points_per_cell_; }

  /// Reference coordinates of the quadrature points in one cell.
  const std::vector<Eigen::Vector2d>& reference_points() const { return ref_points_; }

  /// Locate the cell containing p. Returns -1 when p lies outside the extent
  /// by more than tol. Points on shared edges go to the upper/right cell.
  int locate(const Point& p, double tol = 1e-12) const;

  /// Reference coordinates of p inside cell c.
  Eigen::Vector2d to_reference(int c, const Point& p) const;

 private:
  Rect extent_;
  int nx_ = 0, ny_ = 0;
  double hx_ = 0.0, hy_ = 0.0;
  int points_per_cell_ = 0;
  Eigen::Matrix2Xd nodes_;
  std::vector<std::array<int, 4>> cells_;
  Eigen::Matrix2Xd quad_points_;
  Eigen::VectorXd quad_weights_;
  std::vector<Eigen::Vector2d> ref_points_;
  std::vector<double> ref_weights_;
};

/// Fluid box Omega. Velocity unknowns live on interior nodes only (zero trace).
struct FluidDomainGrid {
  RectGrid mesh;
  std::vector<int> boundary_nodes;
  /// Maps a node to its interior index, -1 on the boundary.
  std::vector<int> interior_index;
  std::vector<int> interior_nodes;

  int num_interior() const { return static_cast<int>(interior_nodes.size()); }
  /// Velocity unknowns: two components per interior node, component-blocked.
  int num_velocity_dofs() const { return 2 * num_interior(); }
};

/// Solid reference body B.
struct SolidReferenceGrid {
  RectGrid mesh;
  double measure = 0.0;

  int num_nodes() const { return mesh.num_nodes(); }
  int num_dofs() const { return 2 * mesh.num_nodes(); }
};

struct GeometryConfig {
  Rect omega{0.0, 0.0, 1.0, 1.0};
  Rect solid{0.4, 0.4, 0.6, 0.6};
  int nx = 32, ny = 32;
  int solid_nx = 16, solid_ny = 16;
};

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Builds both grids. Rejects non-positive resolutions and solids closer than
/// one fluid cell plus max_displacement to the fluid boundary.
std::pair<FluidDomainGrid, SolidReferenceGrid> build_grids(const GeometryConfig& config,
                                                           double max_displacement = 0.0);

enum class MotionKind { identity, translation, rotation, shear };

std::string to_string(MotionKind kind);
MotionKind motion_kind_from_string(const std::string& name);

template <typename Scalar>
struct MotionSample {
  Vector2<Scalar> position;
  Matrix2<Scalar> gradient;
  Vector2<Scalar> velocity;
};

/// Closed-form volume-preserving prescribed motions X(s,t).
///
///   identity     X = s
///   translation  X = s + v t
///   rotation     X = c + Q(w t)(s - c)
///   shear        X = (s_x + a t s_y, s_y)
class PrescribedMotion {
 public:
  static PrescribedMotion identity(double final_time);
  static PrescribedMotion translation(double final_time, const Point& velocity);
  static PrescribedMotion rotation(double final_time, const Point& center, double angular_velocity);
  static PrescribedMotion shear(double final_time, double rate);

  MotionKind kind() const { return kind_; }
  double final_time() const { return final_time_; }
  const Point& velocity_parameter() const { return velocity_; }
  const Point& center() const { return center_; }
  double angular_velocity() const { return omega_; }
  double shear_rate() const { return shear_; }

  /// Throws std::domain_error for t outside [0, T].
  template <typename Scalar = double>
  MotionSample<Scalar> evaluate(const Vector2<Scalar>& s, Scalar t) const;

  MotionSample<double> operator()(const Point& s, double t) const { return evaluate<double>(s, t); }

  /// Upper bound on |X(s,t) - s| over s in `body` and t in [0,T].
  double max_displacement(const Rect& body) const;

 private:
  MotionKind kind_ = MotionKind::identity;
  double final_time_ = 1.0;
  Point velocity_ = Point::Zero();
  Point center_ = Point::Zero();
  double omega_ = 0.0;
  double shear_ = 0.0;
};

template <typename Scalar>
MotionSample<Scalar> PrescribedMotion::evaluate(const Vector2<Scalar>& s, Scalar t) const {
  const double slack = 1e-12 * std::max(1.0, final_time_);
  if (!(t >= -slack && t <= final_time_ + slack)) {
    throw std::domain_error("motion evaluated at t=" + std::to_string(double(t)) + " outside [0, " +
                            std::to_string(final_time_) + "]");
  }
  MotionSample<Scalar> out;
  switch (kind_) {
    case MotionKind::identity:
      out.position = s;
      out.gradient.setIdentity();
      out.velocity.setZero();
      break;
    case MotionKind::translation:
      out.position = s + velocity_.cast<Scalar>() * t;
      out.gradient.setIdentity();
      out.velocity = velocity_.cast<Scalar>();
      break;
    case MotionKind::rotation: {
      const Scalar theta = Scalar(omega_) * t;
      const Scalar c = std::cos(theta), sn = std::sin(theta);
      Matrix2<Scalar> q;
      q << c, -sn, sn, c;
      Matrix2<Scalar> dq;
      dq << -sn, -c, c, -sn;
      const Vector2<Scalar> r = s - center_.cast<Scalar>();
      out.position = center_.cast<Scalar>() + q * r;
      out.gradient = q;
      out.velocity = Scalar(omega_) * (dq * r);
      break;
    }
    case MotionKind::shear:
      out.position = Vector2<Scalar>(s.x() + Scalar(shear_) * t * s.y(), s.y());
      out.gradient << Scalar(1), Scalar(shear_) * t, Scalar(0), Scalar(1);
      out.velocity = Vector2<Scalar>(Scalar(shear_) * s.y(), Scalar(0));
      break;
  }
  return out;
}

struct AssumptionReport {
  double max_det_defect = 0.0;   ///< max |det grad X - 1|
  double lipschitz_lower = 0.0;  ///< sampled bi-Lipschitz lower bound gamma
  bool contained = true;
  double min_boundary_distance = 0.0;
  bool initial_identity = true;  ///< X(s,0) = s
  bool passed = false;
};

/// Checks det(grad X) = 1, X(.,0) = id, a sampled Lipschitz lower bound and
/// containment X(B,t) in Omega at the solid quadrature points and nodes.
/// Works for any motion type exposing operator()(s,t) and final_time().
template <typename Motion>
AssumptionReport verify_assumption(const Motion& motion, const SolidReferenceGrid& solid,
                                   const Rect& omega, const std::vector<double>& sample_times,
                                   double tol) {
  AssumptionReport rep;
  rep.min_boundary_distance = std::numeric_limits<double>::infinity();
  rep.lipschitz_lower = std::numeric_limits<double>::infinity();
  const auto& qp = solid.mesh.quad_points();
  const auto& nodes = solid.mesh.nodes();

  for (int n = 0; n < nodes.cols(); ++n) {
    const auto x0 = motion(Point(nodes.col(n)), 0.0);
    if ((x0.position - nodes.col(n)).norm() > 1e-12) rep.initial_identity = false;
  }

  for (double t : sample_times) {
    for (int q = 0; q < qp.cols(); ++q) {
      const auto ms = motion(Point(qp.col(q)), t);
      rep.max_det_defect = std::max(rep.max_det_defect, std::abs(ms.gradient.determinant() - 1.0));
    }
    Eigen::Matrix2Xd mapped(2, nodes.cols());
    for (int n = 0; n < nodes.cols(); ++n) {
      mapped.col(n) = motion(Point(nodes.col(n)), t).position;
      const double dist = omega.inner_distance(mapped.col(n));
      rep.min_boundary_distance = std::min(rep.min_boundary_distance, dist);
      if (dist <= 0.0) rep.contained = false;
    }
    // Pairs (n, n + stride) cover near and far separations deterministically.
    const int count = static_cast<int>(nodes.cols());
    for (int stride : {1, 7, count / 3, count / 2}) {
      if (stride <= 0) continue;
      for (int n = 0; n + stride < count; ++n) {
        const double ds = (nodes.col(n) - nodes.col(n + stride)).norm();
        if (ds <= 0.0) continue;
        const double dx = (mapped.col(n) - mapped.col(n + stride)).norm();
        rep.lipschitz_lower = std::min(rep.lipschitz_lower, dx / ds);
      }
    }
  }
  rep.passed = rep.max_det_defect <= tol && rep.lipschitz_lower > 0.0 && rep.contained &&
               rep.initial_identity;
  return rep;
}

}  // namespace fsigal
