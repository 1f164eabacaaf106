#pragma once

#include <filesystem>
#include <vector>

#include "fabsim/camera.hpp"
#include "fabsim/mesh.hpp"

namespace fabsim {

/// Single-channel depth image, row-major, row 0 at the top. Values are
/// Euclidean distances along the pixel's view ray in meters; 0.0 marks
/// background (no hit).
struct DepthFrame {
  int width = 256;
  int height = 256;
  std::vector<float> depth;  // width * height entries
  CameraPose camera;
  int frame_index = 0;

  float at(int row, int col) const { return depth[row * width + col]; }
};

/// Ray-cast the mesh from the camera: per pixel, the distance to the
/// nearest ray-triangle intersection, 0.0 on a miss.
/// Throws InvalidInputError if the mesh has no faces or the resolution is
/// not positive.
DepthFrame render_depth(const TriMesh& mesh, const CameraPose& camera,
                        int width = 256, int height = 256);

/// Foreground mapped affinely from [near, far] onto (0, 1], clamped at
/// both ends (values at or below `near` land on a small positive floor so
/// they stay distinct from background). Background stays exactly 0.
DepthFrame normalize_depth(const DepthFrame& frame, double near_bound = 0.2,
                           double far_bound = 8.0);

/// Raw little-endian float32 grid, row-major; extension ".d256".
void write_d256(const std::filesystem::path& path, const DepthFrame& frame);

/// Reads a raw depth grid of the given resolution. Throws IoError if the
/// file is missing or its size does not match width*height floats.
DepthFrame read_d256(const std::filesystem::path& path, int width = 256,
                     int height = 256);

/// Sidecar JSON: camera pose, frame index and resolution.
void write_depth_sidecar(const std::filesystem::path& path,
                         const DepthFrame& frame);

/// Fills camera, frame_index, width and height from a sidecar file (the
/// pixel payload is not touched). Throws IoError on missing/bad files.
void read_depth_sidecar(const std::filesystem::path& path, DepthFrame& frame);

}  // namespace fabsim
