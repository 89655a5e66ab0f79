#pragma once

// Spherical conventions shared by every module.
//
// ERP pixel (x, y) with pixel centers at (x + 0.5, y + 0.5):
//   u = 2 (x + 0.5) / W - 1,   theta = u * pi          (longitude, [-pi, pi])
//   v = 2 (y + 0.5) / H - 1,   phi   = -v * pi / 2     (latitude, row 0 is up)
//
// Three Cartesian frames are in use:
//   Film     d = (cos phi cos theta, sin phi, cos phi sin theta)      spherical FiLM condition
//   PointMap r = (cos phi sin theta, sin phi, -cos phi cos theta)     metric point maps
//   Camera   c = (cos phi sin theta, -sin phi, cos phi cos theta)     projection frame; x right,
//                                                                      y down, z forward at
//                                                                      theta = phi = 0
// Pinhole cameras look down +z (k = (0, 0, 1)) in their local frame, and the rotation R maps
// local camera rays into the Camera frame. ERP normal maps are stored in the Camera frame.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mtpano/error.hpp"

namespace mtpano {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
inline constexpr Scalar kPi = std::numbers::pi_v<Scalar>;

template <typename Scalar>
Scalar wrap_longitude(Scalar theta) {
  if (theta >= -kPi<Scalar> && theta <= kPi<Scalar>) return theta;
  return std::remainder(theta, Scalar(2) * kPi<Scalar>);
}

template <typename Scalar>
Scalar clamp_latitude(Scalar phi) {
  return std::clamp(phi, -kPi<Scalar> / 2, kPi<Scalar> / 2);
}

/// Longitude/latitude pair. Construction wraps theta into [-pi, pi] and clamps phi to
/// [-pi/2, pi/2]; the fields stay public for aggregate-style access.
template <typename Scalar = double>
struct SphericalCoord {
  Scalar theta{0};
  Scalar phi{0};

  SphericalCoord() = default;
  SphericalCoord(Scalar t, Scalar p) : theta(wrap_longitude(t)), phi(clamp_latitude(p)) {}
};

enum class RayConvention { Film, PointMap, Camera };

template <typename Scalar>
Vec3<Scalar> ray_direction(const SphericalCoord<Scalar>& c, RayConvention convention) {
  using std::cos;
  using std::sin;
  const Scalar cp = cos(c.phi), sp = sin(c.phi), ct = cos(c.theta), st = sin(c.theta);
  switch (convention) {
    case RayConvention::Film:
      return {cp * ct, sp, cp * st};
    case RayConvention::PointMap:
      return {cp * st, sp, -cp * ct};
    case RayConvention::Camera:
      break;
  }
  return {cp * st, -sp, cp * ct};
}

/// Inverse of ray_direction; the input need not be normalized.
template <typename Scalar>
SphericalCoord<Scalar> spherical_from_direction(const Vec3<Scalar>& d, RayConvention convention) {
  using std::atan2;
  using std::hypot;
  switch (convention) {
    case RayConvention::Film:
      return {atan2(d.z(), d.x()), atan2(d.y(), hypot(d.x(), d.z()))};
    case RayConvention::PointMap:
      return {atan2(d.x(), -d.z()), atan2(d.y(), hypot(d.x(), d.z()))};
    case RayConvention::Camera:
      break;
  }
  return {atan2(d.x(), d.z()), atan2(-d.y(), hypot(d.x(), d.z()))};
}

template <typename Scalar>
SphericalCoord<Scalar> pixel_to_spherical(Scalar x, Scalar y, int width, int height) {
  if (width <= 0 || height <= 0 || !(x >= 0 && x < width) || !(y >= 0 && y < height)) {
    std::ostringstream msg;
    msg << "pixel (" << x << ", " << y << ") outside " << width << "x" << height << " raster";
    throw DomainError(msg.str());
  }
  const Scalar u = Scalar(2) * (x + Scalar(0.5)) / Scalar(width) - Scalar(1);
  const Scalar v = Scalar(2) * (y + Scalar(0.5)) / Scalar(height) - Scalar(1);
  SphericalCoord<Scalar> c;
  c.theta = u * kPi<Scalar>;
  c.phi = -v * kPi<Scalar> / Scalar(2);
  return c;
}

/// Continuous pixel position (pixel-center convention) of a spherical coordinate. The
/// result lies in [-0.5, W - 0.5] x [-0.5, H - 0.5].
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> spherical_to_pixel(const SphericalCoord<Scalar>& c, int width,
                                               int height) {
  const Scalar u = c.theta / kPi<Scalar>;
  const Scalar v = -c.phi * Scalar(2) / kPi<Scalar>;
  return {(u + Scalar(1)) * Scalar(width) / Scalar(2) - Scalar(0.5),
          (v + Scalar(1)) * Scalar(height) / Scalar(2) - Scalar(0.5)};
}

/// Virtual pinhole camera on the sphere. Angles in radians, fov is horizontal.
struct CameraPose {
  double yaw = 0;
  double pitch = 0;
  double fov = std::numbers::pi / 2;
  int width = 2;
  int height = 2;

  void validate() const {
    if (!(fov > 0 && fov < std::numbers::pi)) throw ContractError("camera fov must lie in (0, pi)");
    if (width < 2 || height < 2) throw ContractError("camera patch must be at least 2x2 pixels");
  }

  double focal() const { return 0.5 * width / std::tan(0.5 * fov); }
};

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Yaw about the global up axis (Camera-frame y), pitch about the camera-right axis (x).
/// Positive yaw increases longitude, positive pitch looks up.
template <typename Scalar>
Mat3<Scalar> yaw_rotation(Scalar yaw) {
  const Scalar c = std::cos(yaw), s = std::sin(yaw);
  Mat3<Scalar> r;
  r << c, 0, s,  //
      0, 1, 0,   //
      -s, 0, c;
  return r;
}

template <typename Scalar>
Mat3<Scalar> pitch_rotation(Scalar pitch) {
  const Scalar c = std::cos(pitch), s = std::sin(pitch);
  Mat3<Scalar> r;
  r << 1, 0, 0,  //
      0, c, -s,  //
      0, s, c;
  return r;
}

inline Mat3<double> rotation_matrix(const CameraPose& pose) {
  return yaw_rotation(pose.yaw) * pitch_rotation(pose.pitch);
}

/// Local camera ray through the continuous image-plane point (px, py), measured from the
/// top-left image corner (pixel centers at j + 0.5). Normalized; its z component is d_cam . k.
inline Vec3<double> camera_ray(const CameraPose& pose, double focal, double px, double py) {
  Vec3<double> d((px - 0.5 * pose.width) / focal, (py - 0.5 * pose.height) / focal, 1.0);
  return d.normalized();
}

inline Vec3<double> camera_ray(const CameraPose& pose, double px, double py) {
  return camera_ray(pose, pose.focal(), px, py);
}

/// Projects a local camera ray onto the image plane (same coordinates as camera_ray).
/// Returns false for rays at or behind the principal plane.
inline bool project_to_patch(const CameraPose& pose, const Vec3<double>& d_cam,
                             Eigen::Vector2d& plane_point) {
  if (!(d_cam.z() > 0)) return false;
  const double f = pose.focal();
  plane_point = {f * d_cam.x() / d_cam.z() + 0.5 * pose.width,
                 f * d_cam.y() / d_cam.z() + 0.5 * pose.height};
  return true;
}

/// Per-pixel sampling geometry of a perspective patch.
struct PerspectiveGrid {
  Plane<double> theta;
  Plane<double> phi;
  Plane<double> axis_cos;  // d_cam . k
  Mat3<double> rotation;

  int width() const { return static_cast<int>(theta.cols()); }
  int height() const { return static_cast<int>(theta.rows()); }
  SphericalCoord<double> coord(int row, int col) const {
    SphericalCoord<double> c;
    c.theta = theta(row, col);
    c.phi = phi(row, col);
    return c;
  }
};

inline PerspectiveGrid perspective_grid(const CameraPose& pose) {
  pose.validate();
  PerspectiveGrid grid;
  grid.rotation = rotation_matrix(pose);
  grid.theta.resize(pose.height, pose.width);
  grid.phi.resize(pose.height, pose.width);
  grid.axis_cos.resize(pose.height, pose.width);
  const double f = pose.focal();
  for (int row = 0; row < pose.height; ++row) {
    for (int col = 0; col < pose.width; ++col) {
      const Vec3<double> d_cam = camera_ray(pose, f, col + 0.5, row + 0.5);
      const auto c = spherical_from_direction<double>(grid.rotation * d_cam, RayConvention::Camera);
      grid.theta(row, col) = c.theta;
      grid.phi(row, col) = c.phi;
      grid.axis_cos(row, col) = d_cam.z();
    }
  }
  return grid;
}

}  // namespace mtpano
