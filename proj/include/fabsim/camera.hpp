#pragma once

#include <Eigen/Core>

#include "fabsim/mesh.hpp"
#include "fabsim/rng.hpp"

namespace fabsim {

/// Pinhole camera: position in meters, orientation as Euler XYZ angles in
/// degrees (applied about x, then y, then z), vertical field of view in
/// degrees. The camera looks along its local -z axis with +y up.
struct CameraPose {
  Vec3 position{3.5, 0.5, -0.1};
  Vec3 rotation_deg{90.0, 0.0, 90.0};
  double vfov_deg = 60.0;
};

/// World-from-camera rotation, Rz * Ry * Rx.
Eigen::Matrix3d rotation_matrix(const CameraPose& pose);

/// Unit view direction, rotation applied to (0, 0, -1).
Vec3 view_direction(const CameraPose& pose);

/// Uniform pose draw: x in [1,6], y = 0.5, z in [-0.5, 0.3]; rotation
/// (90, 0, rz) with rz uniform in [-260, 280] degrees.
CameraPose sample_camera_pose(Rng& rng);

}  // namespace fabsim
