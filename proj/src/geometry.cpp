#include "fsigal/geometry.hpp"

#include <algorithm>

namespace fsigal {

RectGrid::RectGrid(const Rect& extent, int nx, int ny, int gauss_order)
    : extent_(extent), nx_(nx), ny_(ny) {
  if (nx <= 0 || ny <= 0) throw GeometryError("grid resolution must be positive");
  if (!(extent.width() > 0.0) || !(extent.height() > 0.0))
    throw GeometryError("grid extent must have positive width and height");
  hx_ = extent.width() / nx;
  hy_ = extent.height() / ny;

  nodes_.resize(2, num_nodes());
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      // Last row/column pinned to the exact extent.
      const double x = i == nx ? extent.x1 : extent.x0 + i * hx_;
      const double y = j == ny ? extent.y1 : extent.y0 + j * hy_;
      nodes_.col(node_id(i, j)) = Point(x, y);
    }
  }
  cells_.resize(static_cast<std::size_t>(num_cells()));
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      cells_[static_cast<std::size_t>(cell_id(i, j))] = {node_id(i, j), node_id(i + 1, j),
                                                         node_id(i + 1, j + 1), node_id(i, j + 1)};

  const auto [gx, gw] = gauss_legendre<double>(gauss_order);
  for (std::size_t b = 0; b < gx.size(); ++b) {
    for (std::size_t a = 0; a < gx.size(); ++a) {
      ref_points_.emplace_back(0.5 * (gx[a] + 1.0), 0.5 * (gx[b] + 1.0));
      ref_weights_.push_back(0.25 * gw[a] * gw[b]);
    }
  }
  points_per_cell_ = static_cast<int>(ref_points_.size());
  quad_points_.resize(2, num_cells() * points_per_cell_);
  quad_weights_.resize(num_cells() * points_per_cell_);
  const double jac = hx_ * hy_;
  for (int c = 0; c < num_cells(); ++c) {
    const Point origin = nodes_.col(cells_[static_cast<std::size_t>(c)][0]);
    for (int q = 0; q < points_per_cell_; ++q) {
      const auto& r = ref_points_[static_cast<std::size_t>(q)];
      quad_points_.col(c * points_per_cell_ + q) = origin + Point(r.x() * hx_, r.y() * hy_);
      quad_weights_(c * points_per_cell_ + q) = ref_weights_[static_cast<std::size_t>(q)] * jac;
    }
  }
}

int RectGrid::locate(const Point& p, double tol) const {
  if (!extent_.contains(p, tol)) return -1;
  const int i = std::clamp(static_cast<int>(std::floor((p.x() - extent_.x0) / hx_)), 0, nx_ - 1);
  const int j = std::clamp(static_cast<int>(std::floor((p.y() - extent_.y0) / hy_)), 0, ny_ - 1);
  return cell_id(i, j);
}

Eigen::Vector2d RectGrid::to_reference(int c, const Point& p) const {
  const Point origin = nodes_.col(cells_[static_cast<std::size_t>(c)][0]);
  return {(p.x() - origin.x()) / hx_, (p.y() - origin.y()) / hy_};
}

std::pair<FluidDomainGrid, SolidReferenceGrid> build_grids(const GeometryConfig& config,
                                                           double max_displacement) {
  if (config.nx < 4 || config.ny < 4)
    throw GeometryError("fluid grid needs at least 4 cells per axis");
  if (config.solid_nx < 1 || config.solid_ny < 1)
    throw GeometryError("solid grid resolution must be positive");

  FluidDomainGrid fluid;
  fluid.mesh = RectGrid(config.omega, config.nx, config.ny);

  const Rect& omega = config.omega;
  const Rect& b = config.solid;
  if (!(b.width() > 0.0) || !(b.height() > 0.0)) throw GeometryError("solid extent is empty");
  const double margin = std::max(fluid.mesh.hx(), fluid.mesh.hy()) + max_displacement;
  const double gap = std::min(std::min(b.x0 - omega.x0, omega.x1 - b.x1),
                              std::min(b.y0 - omega.y0, omega.y1 - b.y1));
  if (gap <= 0.0) throw GeometryError("solid not immersed: B touches or crosses the fluid boundary");
  if (gap < margin) {
    throw GeometryError("solid not immersed: gap to the fluid boundary " + std::to_string(gap) +
                        " is below one fluid cell plus the maximal displacement (" +
                        std::to_string(margin) + ")");
  }

  fluid.interior_index.assign(static_cast<std::size_t>(fluid.mesh.num_nodes()), -1);
  for (int j = 0; j <= config.ny; ++j) {
    for (int i = 0; i <= config.nx; ++i) {
      const int n = fluid.mesh.node_id(i, j);
      if (i == 0 || j == 0 || i == config.nx || j == config.ny) {
        fluid.boundary_nodes.push_back(n);
      } else {
        fluid.interior_index[static_cast<std::size_t>(n)] = static_cast<int>(fluid.interior_nodes.size());
        fluid.interior_nodes.push_back(n);
      }
    }
  }

  SolidReferenceGrid solid;
  solid.mesh = RectGrid(b, config.solid_nx, config.solid_ny);
  solid.measure = b.area();
  return {std::move(fluid), std::move(solid)};
}

std::string to_string(MotionKind kind) {
  switch (kind) {
    case MotionKind::identity: return "identity";
    case MotionKind::translation: return "translation";
    case MotionKind::rotation: return "rotation";
    case MotionKind::shear: return "shear";
  }
  return "unknown";
}

MotionKind motion_kind_from_string(const std::string& name) {
  if (name == "identity") return MotionKind::identity;
  if (name == "translation") return MotionKind::translation;
  if (name == "rotation") return MotionKind::rotation;
  if (name == "shear") return MotionKind::shear;
  throw std::invalid_argument("unknown motion kind '" + name + "'");
}

namespace {
void require_final_time(double t) {
  if (!(t > 0.0)) throw std::invalid_argument("motion final time must be positive");
}
}  // namespace

PrescribedMotion PrescribedMotion::identity(double final_time) {
  require_final_time(final_time);
  PrescribedMotion m;
  m.final_time_ = final_time;
  return m;
}

PrescribedMotion PrescribedMotion::translation(double final_time, const Point& velocity) {
  auto m = identity(final_time);
  m.kind_ = MotionKind::translation;
  m.velocity_ = velocity;
  return m;
}

PrescribedMotion PrescribedMotion::rotation(double final_time, const Point& center,
                                            double angular_velocity) {
  auto m = identity(final_time);
  m.kind_ = MotionKind::rotation;
  m.center_ = center;
  m.omega_ = angular_velocity;
  return m;
}

PrescribedMotion PrescribedMotion::shear(double final_time, double rate) {
  auto m = identity(final_time);
  m.kind_ = MotionKind::shear;
  m.shear_ = rate;
  return m;
}

double PrescribedMotion::max_displacement(const Rect& body) const {
  switch (kind_) {
    case MotionKind::identity: return 0.0;
    case MotionKind::translation: return velocity_.norm() * final_time_;
    case MotionKind::rotation: {
      double r = 0.0;
      for (const Point& corner : {Point(body.x0, body.y0), Point(body.x1, body.y0),
                                  Point(body.x1, body.y1), Point(body.x0, body.y1)})
        r = std::max(r, (corner - center_).norm());
      const double angle = std::min(std::abs(omega_) * final_time_, M_PI);
      return 2.0 * r * std::sin(0.5 * angle);
    }
    case MotionKind::shear:
      return std::abs(shear_) * final_time_ * std::max(std::abs(body.y0), std::abs(body.y1));
  }
  return 0.0;
}

}  // namespace fsigal
