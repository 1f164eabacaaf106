#pragma once

#include <vector>

#include "fabsim/forces.hpp"
#include "fabsim/material.hpp"
#include "fabsim/mesh.hpp"

namespace fabsim {

/// One semi-implicit Euler substep: velocities pick up dt * F/m, then
/// positions pick up dt * v. Pinned vertices keep position and zero
/// velocity. Throws InstabilityError (naming dt) if the state goes
/// non-finite.
void step(TriMesh& mesh, const MaterialParams& material, const WindSpec& wind,
          const SimConfig& config);

/// Run the full clip and emit a snapshot every 1/sample_rate seconds
/// (duration * sample_rate snapshots; 60 by default). Deterministic for
/// fixed inputs.
std::vector<TriMesh> simulate(const TriMesh& mesh,
                              const MaterialParams& material,
                              const WindSpec& wind, const SimConfig& config);

}  // namespace fabsim
