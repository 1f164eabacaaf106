#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>

#include "fabsim/mesh.hpp"

namespace fabsim {

/// Bending stiffness is a 3x5 matrix sampled at bend angles {0, 45, 90}
/// degrees (rows) and five curvature measurement points (columns), scaled
/// by a single dimensionless factor which is the estimated quantity.
struct MaterialParams {
  Eigen::Matrix<double, 3, 5> bend_matrix =
      Eigen::Matrix<double, 3, 5>::Constant(1e-5);  // N*m
  double stiffness_scale = 1.0;                     // dimensionless, [0.1, 10]
  double area_weight = 0.15;                        // kg/m^2
  double stretch_stiffness = 5000.0;                // N/m
  double damping = 0.5;                             // kg/s
  std::array<double, 2> curvature_range{0.0, 50.0};  // column axis, 1/m
};

struct WindSpec {
  double speed = 0.0;            // m/s
  Vec3 direction{1.0, 0.0, 0.0};  // unit vector
  double air_density = 1.225;    // kg/m^3
  bool quadratic = false;        // use v^2 instead of v in the force law
};

struct SimConfig {
  double dt = 5e-5;          // integrator substep, s
  double duration = 3.0;     // s
  double sample_rate = 20.0; // Hz
  Vec3 gravity{0.0, 0.0, -9.81};
  std::uint64_t seed = 0;
};

/// Throws ConfigError on violated ranges.
void validate(const MaterialParams& m);
void validate(const WindSpec& w);
void validate(const SimConfig& c);

/// Bilinear interpolation of stiffness_scale * bend_matrix. The row axis
/// is |theta| clamped to [0, 90] degrees with breakpoints {0, 45, 90};
/// the column axis is the curvature reparametrization on five uniform
/// breakpoints over curvature_range, clamped at both ends.
double bending_stiffness_lookup(const MaterialParams& material,
                                double theta_rad, double reparam);

}  // namespace fabsim
