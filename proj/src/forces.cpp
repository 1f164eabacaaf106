#include "fabsim/forces.hpp"

#include <cmath>

#include "fabsim/errors.hpp"

namespace fabsim {

HingeForce bending_force(const TriMesh& mesh, const Hinge& hinge,
                         const MaterialParams& material) {
  const Vec3& x0 = mesh.positions[hinge.v0];
  const Vec3& x1 = mesh.positions[hinge.v1];
  const Vec3& xa = mesh.positions[hinge.opp0];
  const Vec3& xb = mesh.positions[hinge.opp1];

  const Vec3 e = x1 - x0;
  const double elen = e.norm();
  const Vec3 na = e.cross(xa - x0);
  const Vec3 nb = (xb - x0).cross(e);
  const double la2 = na.squaredNorm();
  const double lb2 = nb.squaredNorm();
  const double scale2 = elen * elen * elen * elen;
  if (elen <= 0.0 || la2 <= 1e-28 * scale2 || lb2 <= 1e-28 * scale2) {
    throw DegenerateGeometryError("bending force on degenerate hinge faces");
  }

  const double la = std::sqrt(la2);
  const double lb = std::sqrt(lb2);
  const double s = (na / la).cross(nb / lb).dot(e / elen);
  const double c = (na / la).dot(nb / lb);
  const double theta = std::atan2(s, c);

  // Triangle heights from the shared edge; |n| is twice the face area.
  const double h1 = la / elen;
  const double h2 = lb / elen;

  const double dtheta = theta - hinge.rest_angle;
  const double reparam = std::abs(std::sin(theta / 2.0)) / (h1 + h2);
  const double ke = bending_stiffness_lookup(material, theta, reparam);
  const double moment = ke * std::sin(dtheta / 2.0) * elen / (h1 + h2);

  // Dihedral-angle gradient over the stencil; scaled by -moment this
  // restores the rest angle while summing to zero force and torque.
  const Vec3 ga = na / la2;  // |grad_opp0 theta| = 1/h1
  const Vec3 gb = nb / lb2;
  const Vec3 eh = e / elen;
  const Vec3 u_opp0 = elen * ga;
  const Vec3 u_opp1 = elen * gb;
  const Vec3 u_v0 = ((xa - x1).dot(eh)) * ga + ((xb - x1).dot(eh)) * gb;
  const Vec3 u_v1 = -((xa - x0).dot(eh)) * ga - ((xb - x0).dot(eh)) * gb;

  HingeForce out;
  out.magnitude = std::abs(moment);
  out.f[0] = moment * u_v0;
  out.f[1] = moment * u_v1;
  out.f[2] = moment * u_opp0;
  out.f[3] = moment * u_opp1;
  return out;
}

double wind_force_total(double area, const WindSpec& wind) {
  const double v = wind.quadratic ? wind.speed * wind.speed : wind.speed;
  return 0.5 * area * wind.air_density * v;
}

Vec3 face_wind_force(const TriMesh& mesh, int face, const WindSpec& wind) {
  const Vec3 n = face_normal(mesh, face);
  const double n2 = n.norm();
  if (n2 <= 1e-300) return Vec3::Zero();
  const double area = 0.5 * n2;
  const double proj = std::abs((n / n2).dot(wind.direction));
  return wind_force_total(area, wind) * proj * wind.direction;
}

void add_stretch_forces(const TriMesh& mesh, double stiffness,
                        std::vector<Vec3>& out) {
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    const int a = mesh.edges[e][0];
    const int b = mesh.edges[e][1];
    const Vec3 d = mesh.positions[b] - mesh.positions[a];
    const double len = d.norm();
    if (len <= 1e-300) continue;
    const Vec3 f = stiffness * (len - mesh.edge_rest_lengths[e]) * (d / len);
    out[a] += f;
    out[b] -= f;
  }
}

void add_bending_forces(const TriMesh& mesh, const MaterialParams& material,
                        std::vector<Vec3>& out) {
  for (const Hinge& h : mesh.hinges) {
    const HingeForce hf = bending_force(mesh, h, material);
    out[h.v0] += hf.f[0];
    out[h.v1] += hf.f[1];
    out[h.opp0] += hf.f[2];
    out[h.opp1] += hf.f[3];
  }
}

void add_wind_forces(const TriMesh& mesh, const WindSpec& wind,
                     std::vector<Vec3>& out) {
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Vec3 fw = face_wind_force(mesh, f, wind) / 3.0;
    for (int k = 0; k < 3; ++k) out[mesh.faces[f][k]] += fw;
  }
}

}  // namespace fabsim
