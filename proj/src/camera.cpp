#include "fabsim/camera.hpp"

#include <cmath>

namespace fabsim {

namespace {
constexpr double kDegToRad = M_PI / 180.0;
}

Eigen::Matrix3d rotation_matrix(const CameraPose& pose) {
  const double ax = pose.rotation_deg.x() * kDegToRad;
  const double ay = pose.rotation_deg.y() * kDegToRad;
  const double az = pose.rotation_deg.z() * kDegToRad;
  Eigen::Matrix3d rx, ry, rz;
  rx << 1, 0, 0, 0, std::cos(ax), -std::sin(ax), 0, std::sin(ax), std::cos(ax);
  ry << std::cos(ay), 0, std::sin(ay), 0, 1, 0, -std::sin(ay), 0, std::cos(ay);
  rz << std::cos(az), -std::sin(az), 0, std::sin(az), std::cos(az), 0, 0, 0, 1;
  return rz * ry * rx;
}

Vec3 view_direction(const CameraPose& pose) {
  return rotation_matrix(pose) * Vec3(0.0, 0.0, -1.0);
}

CameraPose sample_camera_pose(Rng& rng) {
  CameraPose pose;
  pose.position = Vec3(rng.uniform(1.0, 6.0), 0.5, rng.uniform(-0.5, 0.3));
  pose.rotation_deg = Vec3(90.0, 0.0, rng.uniform(-260.0, 280.0));
  pose.vfov_deg = 60.0;
  return pose;
}

}  // namespace fabsim
