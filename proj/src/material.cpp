#include "fabsim/material.hpp"

#include <cmath>

#include "fabsim/errors.hpp"

namespace fabsim {

void validate(const MaterialParams& m) {
  if ((m.bend_matrix.array() < 0.0).any()) {
    throw ConfigError("bend matrix entries must be non-negative");
  }
  if (m.stiffness_scale < 0.1 || m.stiffness_scale > 10.0) {
    throw ConfigError("stiffness scale outside [0.1, 10]");
  }
  if (m.area_weight <= 0.0) throw ConfigError("area weight must be positive");
  if (m.stretch_stiffness <= 0.0) {
    throw ConfigError("stretch stiffness must be positive");
  }
  if (m.damping < 0.0) throw ConfigError("damping must be non-negative");
  if (!(m.curvature_range[1] > m.curvature_range[0]) ||
      m.curvature_range[0] < 0.0) {
    throw ConfigError("curvature range must be non-negative and increasing");
  }
}

void validate(const WindSpec& w) {
  if (w.speed < 0.0) throw ConfigError("wind speed must be non-negative");
  if (std::abs(w.direction.norm() - 1.0) > 1e-9) {
    throw ConfigError("wind direction must be a unit vector");
  }
  if (w.air_density <= 0.0) throw ConfigError("air density must be positive");
}

void validate(const SimConfig& c) {
  if (c.dt <= 0.0) throw ConfigError("dt must be positive");
  if (c.duration <= 0.0) throw ConfigError("duration must be positive");
  if (c.sample_rate <= 0.0) throw ConfigError("sample rate must be positive");
  const double frames = c.duration * c.sample_rate;
  if (std::abs(frames - std::round(frames)) > 1e-9) {
    throw ConfigError("duration * sample_rate must be an integer frame count");
  }
}

double bending_stiffness_lookup(const MaterialParams& material,
                                double theta_rad, double reparam) {
  const double deg = std::abs(theta_rad) * 180.0 / M_PI;
  // Row coordinate on breakpoints {0, 45, 90} deg.
  double rrow = std::clamp(deg, 0.0, 90.0) / 45.0;  // in [0, 2]
  int r0 = std::min(1, static_cast<int>(rrow));
  double fr = rrow - r0;

  const double lo = material.curvature_range[0];
  const double hi = material.curvature_range[1];
  double rcol = (std::clamp(reparam, lo, hi) - lo) / (hi - lo) * 4.0;  // [0, 4]
  int c0 = std::min(3, static_cast<int>(rcol));
  double fc = rcol - c0;

  const auto& k = material.bend_matrix;
  const double v = (1.0 - fr) * ((1.0 - fc) * k(r0, c0) + fc * k(r0, c0 + 1)) +
                   fr * ((1.0 - fc) * k(r0 + 1, c0) + fc * k(r0 + 1, c0 + 1));
  return material.stiffness_scale * v;
}

}  // namespace fabsim
