#include "fabsim/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "fabsim/errors.hpp"

namespace fabsim {

PinnedEdge pinned_edge_from_string(const std::string& s) {
  if (s == "none") return PinnedEdge::None;
  if (s == "top") return PinnedEdge::Top;
  if (s == "bottom") return PinnedEdge::Bottom;
  if (s == "left") return PinnedEdge::Left;
  if (s == "right") return PinnedEdge::Right;
  throw ConfigError("unknown pinned edge '" + s + "'");
}

std::string to_string(PinnedEdge e) {
  switch (e) {
    case PinnedEdge::None: return "none";
    case PinnedEdge::Top: return "top";
    case PinnedEdge::Bottom: return "bottom";
    case PinnedEdge::Left: return "left";
    case PinnedEdge::Right: return "right";
  }
  return "none";
}

double TriMesh::total_mass() const {
  double m = 0.0;
  for (double v : masses) m += v;
  return m;
}

double TriMesh::total_area() const {
  double a = 0.0;
  for (int f = 0; f < face_count(); ++f) a += face_area(*this, f);
  return a;
}

bool TriMesh::is_pinned(int v) const {
  return std::binary_search(pinned.begin(), pinned.end(), v);
}

Vec3 face_normal(const TriMesh& mesh, int face) {
  const auto& f = mesh.faces[face];
  const Vec3& a = mesh.positions[f[0]];
  const Vec3& b = mesh.positions[f[1]];
  const Vec3& c = mesh.positions[f[2]];
  return (b - a).cross(c - a);
}

double face_area(const TriMesh& mesh, int face) {
  return 0.5 * face_normal(mesh, face).norm();
}

namespace {

// Normals of the two hinge triangles oriented consistently from the
// shared edge: nA for (v0, v1, opp0), nB for (v0, opp1, v1). Both point
// the same way when the stencil is coplanar.
void hinge_normals(const TriMesh& mesh, const Hinge& h, Vec3& e, Vec3& na,
                   Vec3& nb) {
  const Vec3& x0 = mesh.positions[h.v0];
  const Vec3& x1 = mesh.positions[h.v1];
  const Vec3& xa = mesh.positions[h.opp0];
  const Vec3& xb = mesh.positions[h.opp1];
  e = x1 - x0;
  na = e.cross(xa - x0);
  nb = (xb - x0).cross(e);
}

}  // namespace

double dihedral_angle(const TriMesh& mesh, const Hinge& hinge) {
  Vec3 e, na, nb;
  hinge_normals(mesh, hinge, e, na, nb);
  const double elen = e.norm();
  const double la = na.norm();
  const double lb = nb.norm();
  const double scale = elen * elen;
  if (elen <= 0.0 || la <= 1e-14 * scale || lb <= 1e-14 * scale) {
    throw DegenerateGeometryError("dihedral angle on degenerate hinge faces");
  }
  const Vec3 nah = na / la;
  const Vec3 nbh = nb / lb;
  const double s = nah.cross(nbh).dot(e / elen);
  const double c = nah.dot(nbh);
  return std::atan2(s, c);
}

void finalize_topology(TriMesh& mesh, double area_weight) {
  const int nv = mesh.vertex_count();
  if (nv == 0 || mesh.faces.empty()) {
    throw InvalidMeshError("mesh has no vertices or faces");
  }
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      if (f[k] < 0 || f[k] >= nv) throw InvalidMeshError("face index out of range");
    }
  }

  // Edge -> adjacent faces, with the local corner opposite the edge.
  std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> adj;
  for (int fi = 0; fi < mesh.face_count(); ++fi) {
    const auto& f = mesh.faces[fi];
    for (int k = 0; k < 3; ++k) {
      int a = f[k], b = f[(k + 1) % 3], opp = f[(k + 2) % 3];
      if (a > b) std::swap(a, b);
      adj[{a, b}].push_back({fi, opp});
    }
  }

  mesh.edges.clear();
  mesh.edge_rest_lengths.clear();
  mesh.hinges.clear();
  for (const auto& [key, faces] : adj) {
    if (faces.size() > 2) {
      throw InvalidMeshError("edge shared by more than two faces");
    }
    mesh.edges.push_back({key.first, key.second});
    const double len =
        (mesh.positions[key.second] - mesh.positions[key.first]).norm();
    if (len <= 0.0) throw InvalidMeshError("zero-length edge");
    mesh.edge_rest_lengths.push_back(len);
    if (faces.size() == 2) {
      Hinge h;
      h.v0 = key.first;
      h.v1 = key.second;
      h.f0 = faces[0].first;
      h.f1 = faces[1].first;
      h.opp0 = faces[0].second;
      h.opp1 = faces[1].second;
      h.rest_length = len;
      h.rest_angle = dihedral_angle(mesh, h);
      mesh.hinges.push_back(h);
    }
  }

  mesh.masses.assign(nv, 0.0);
  for (int fi = 0; fi < mesh.face_count(); ++fi) {
    const double a = face_area(mesh, fi);
    if (a <= 0.0) throw InvalidMeshError("zero-area face");
    const double share = a * area_weight / 3.0;
    for (int k = 0; k < 3; ++k) mesh.masses[mesh.faces[fi][k]] += share;
  }
  if (mesh.velocities.size() != static_cast<std::size_t>(nv)) {
    mesh.velocities.assign(nv, Vec3::Zero());
  }
  std::sort(mesh.pinned.begin(), mesh.pinned.end());
}

TriMesh build_grid_mesh(int n, double size, double area_weight,
                        PinnedEdge pinned_edge) {
  if (n < 2) throw InvalidMeshError("grid subdivisions must be >= 2");
  if (size <= 0.0) throw InvalidMeshError("grid size must be positive");
  if (area_weight <= 0.0) throw InvalidMeshError("area weight must be positive");

  TriMesh mesh;
  const double step = size / n;
  auto vid = [n](int r, int c) { return r * (n + 1) + c; };

  // Row r runs down in z, column c across in y; the sheet hangs below z=0.
  for (int r = 0; r <= n; ++r) {
    for (int c = 0; c <= n; ++c) {
      mesh.positions.emplace_back(0.0, -0.5 * size + c * step, -r * step);
    }
  }
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const int v00 = vid(r, c), v01 = vid(r, c + 1);
      const int v10 = vid(r + 1, c), v11 = vid(r + 1, c + 1);
      mesh.faces.emplace_back(v00, v10, v11);
      mesh.faces.emplace_back(v00, v11, v01);
    }
  }

  for (int i = 0; i <= n; ++i) {
    switch (pinned_edge) {
      case PinnedEdge::None: break;
      case PinnedEdge::Top: mesh.pinned.push_back(vid(0, i)); break;
      case PinnedEdge::Bottom: mesh.pinned.push_back(vid(n, i)); break;
      case PinnedEdge::Left: mesh.pinned.push_back(vid(i, 0)); break;
      case PinnedEdge::Right: mesh.pinned.push_back(vid(i, n)); break;
    }
    if (pinned_edge == PinnedEdge::None) break;
  }

  mesh.velocities.assign(mesh.positions.size(), Vec3::Zero());
  finalize_topology(mesh, area_weight);
  return mesh;
}

void write_mesh_text(std::ostream& os, const TriMesh& mesh) {
  os.precision(17);
  os << "verts " << mesh.vertex_count() << " faces " << mesh.face_count()
     << "\n";
  for (const auto& p : mesh.positions) {
    os << p.x() << " " << p.y() << " " << p.z() << "\n";
  }
  for (const auto& f : mesh.faces) {
    os << f[0] << " " << f[1] << " " << f[2] << "\n";
  }
}

TriMesh read_mesh_text(std::istream& is) {
  std::string kw1, kw2;
  int nv = 0, nf = 0;
  if (!(is >> kw1 >> nv >> kw2 >> nf) || kw1 != "verts" || kw2 != "faces") {
    throw IoError("bad mesh header (expected 'verts N faces M')");
  }
  if (nv <= 0 || nf < 0) throw IoError("bad mesh counts");
  TriMesh mesh;
  mesh.positions.resize(nv);
  for (int i = 0; i < nv; ++i) {
    if (!(is >> mesh.positions[i].x() >> mesh.positions[i].y() >>
          mesh.positions[i].z())) {
      throw IoError("truncated vertex block");
    }
  }
  mesh.faces.resize(nf);
  for (int i = 0; i < nf; ++i) {
    if (!(is >> mesh.faces[i][0] >> mesh.faces[i][1] >> mesh.faces[i][2])) {
      throw IoError("truncated face block");
    }
  }
  mesh.velocities.assign(nv, Vec3::Zero());
  return mesh;
}

}  // namespace fabsim
