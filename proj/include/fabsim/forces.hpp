#pragma once

#include <array>

#include "fabsim/material.hpp"
#include "fabsim/mesh.hpp"

namespace fabsim {

/// Bending force on the 4-vertex hinge stencil, ordered (v0, v1, opp0,
/// opp1). `magnitude` is the scalar k_e * |sin(dtheta/2)| * |E| / (h1+h2)
/// the four vectors are scaled by; net force and net torque over the
/// stencil are zero.
struct HingeForce {
  std::array<Vec3, 4> f;
  double magnitude = 0.0;
};

/// Discrete-hinge bending: the scalar restoring moment above distributed
/// along the analytic gradient of the dihedral angle.
/// Throws DegenerateGeometryError on ~zero-area hinge faces.
HingeForce bending_force(const TriMesh& mesh, const Hinge& hinge,
                         const MaterialParams& material);

/// Total force of the wind on a surface of area A: 0.5 * A * rho * v
/// (0.5 * A * rho * v^2 with the quadratic flag).
double wind_force_total(double area, const WindSpec& wind);

/// Per-face share: 0.5 * rho * area * v * |n.d| * d, n the unit face
/// normal and d the unit wind direction. Edge-on faces receive zero.
Vec3 face_wind_force(const TriMesh& mesh, int face, const WindSpec& wind);

// Force accumulators; `out` must hold vertex_count() entries.
void add_stretch_forces(const TriMesh& mesh, double stiffness,
                        std::vector<Vec3>& out);
void add_bending_forces(const TriMesh& mesh, const MaterialParams& material,
                        std::vector<Vec3>& out);
void add_wind_forces(const TriMesh& mesh, const WindSpec& wind,
                     std::vector<Vec3>& out);

}  // namespace fabsim
