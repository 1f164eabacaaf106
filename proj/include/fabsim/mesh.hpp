#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace fabsim {

using Vec3 = Eigen::Vector3d;

enum class PinnedEdge { None, Top, Bottom, Left, Right };

PinnedEdge pinned_edge_from_string(const std::string& s);
std::string to_string(PinnedEdge e);

/// Interior edge shared by exactly two faces, with the vertex opposite
/// the edge in each face. The bending stencil is (v0, v1, opp0, opp1).
struct Hinge {
  int v0 = -1, v1 = -1;
  int opp0 = -1, opp1 = -1;
  int f0 = -1, f1 = -1;
  double rest_length = 0.0;
  double rest_angle = 0.0;  // signed dihedral at rest, rad
};

/// Triangle-mesh cloth state. Vertex masses are lumped from adjacent
/// face areas, so total mass == area_weight * total rest area.
struct TriMesh {
  std::vector<Vec3> positions;   // m
  std::vector<Vec3> velocities;  // m/s
  std::vector<double> masses;    // kg
  std::vector<Eigen::Vector3i> faces;
  std::vector<Hinge> hinges;
  std::vector<std::array<int, 2>> edges;  // all unique edges, v0 < v1
  std::vector<double> edge_rest_lengths;
  std::vector<int> pinned;  // sorted vertex ids

  int vertex_count() const { return static_cast<int>(positions.size()); }
  int face_count() const { return static_cast<int>(faces.size()); }
  double total_mass() const;
  double total_area() const;
  bool is_pinned(int v) const;
};

/// Unnormalized face normal (cross of two edge vectors); its norm is
/// twice the face area.
Vec3 face_normal(const TriMesh& mesh, int face);
double face_area(const TriMesh& mesh, int face);

/// Signed dihedral angle in (-pi, pi] between the two face normals
/// about the shared edge; 0 for coplanar faces.
/// Throws DegenerateGeometryError if either adjacent face has ~zero area.
double dihedral_angle(const TriMesh& mesh, const Hinge& hinge);

/// Rebuild edges, hinges (rest lengths/angles from current positions)
/// and lumped vertex masses from faces. Every edge must border one or
/// two faces.
void finalize_topology(TriMesh& mesh, double area_weight);

/// Regular (n+1)^2-vertex grid of 2n^2 triangles hanging in the x=0
/// plane: y spans [-size/2, size/2], z spans [-size, 0]. The chosen
/// edge's vertices are pinned (Top = z=0 row).
/// Throws InvalidMeshError for n < 2.
TriMesh build_grid_mesh(int n, double size, double area_weight,
                        PinnedEdge pinned_edge);

// Snapshot text format: "verts N faces M", N lines "x y z", M lines "i j k".
void write_mesh_text(std::ostream& os, const TriMesh& mesh);
TriMesh read_mesh_text(std::istream& is);

}  // namespace fabsim
