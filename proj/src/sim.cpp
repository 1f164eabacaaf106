#include "fabsim/sim.hpp"

#include <cmath>
#include <sstream>

#include "fabsim/errors.hpp"

namespace fabsim {

namespace {

bool finite(const Vec3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

}  // namespace

void step(TriMesh& mesh, const MaterialParams& material, const WindSpec& wind,
          const SimConfig& config) {
  const int nv = mesh.vertex_count();
  std::vector<Vec3> force(nv, Vec3::Zero());

  add_stretch_forces(mesh, material.stretch_stiffness, force);
  try {
    add_bending_forces(mesh, material, force);
  } catch (const DegenerateGeometryError&) {
    // A triangle collapsing mid-integration means the state is already
    // unphysical; report it the same way as a numeric blow-up.
    std::ostringstream msg;
    msg << "simulation unstable at dt=" << config.dt
        << " (degenerate hinge geometry)";
    throw InstabilityError(msg.str());
  }
  if (wind.speed != 0.0) add_wind_forces(mesh, wind, force);
  for (int v = 0; v < nv; ++v) {
    force[v] += mesh.masses[v] * config.gravity;
    force[v] -= material.damping * mesh.velocities[v];
  }

  std::vector<char> pinned(nv, 0);
  for (int v : mesh.pinned) pinned[v] = 1;

  for (int v = 0; v < nv; ++v) {
    if (pinned[v]) {
      mesh.velocities[v].setZero();
      continue;
    }
    mesh.velocities[v] += (config.dt / mesh.masses[v]) * force[v];
    mesh.positions[v] += config.dt * mesh.velocities[v];
    if (!finite(mesh.positions[v]) || !finite(mesh.velocities[v])) {
      std::ostringstream msg;
      msg << "simulation unstable at dt=" << config.dt
          << " (non-finite state at vertex " << v << ")";
      throw InstabilityError(msg.str());
    }
  }
}

std::vector<TriMesh> simulate(const TriMesh& mesh,
                              const MaterialParams& material,
                              const WindSpec& wind, const SimConfig& config) {
  validate(config);
  const int frames =
      static_cast<int>(std::llround(config.duration * config.sample_rate));
  const double frame_dt = 1.0 / config.sample_rate;
  const int substeps = std::max(
      1, static_cast<int>(std::llround(frame_dt / config.dt)));
  SimConfig cfg = config;
  cfg.dt = frame_dt / substeps;  // exact frame alignment

  std::vector<TriMesh> snapshots;
  snapshots.reserve(frames);
  TriMesh state = mesh;
  for (int f = 0; f < frames; ++f) {
    for (int s = 0; s < substeps; ++s) step(state, material, wind, cfg);
    snapshots.push_back(state);
  }
  return snapshots;
}

}  // namespace fabsim
