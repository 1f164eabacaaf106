#include "fabsim/depth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <json.hpp>

#include "fabsim/errors.hpp"

namespace fabsim {

namespace {

using Json = nlohmann::ordered_json;

// Pixel-center camera-space ray direction (unnormalized): the camera
// looks along -z, +y up, square pixels.
inline Vec3 pixel_dir(int px, int py, int w, int h, double tanv,
                      double aspect) {
  const double ndc_x = (2.0 * (px + 0.5) / w - 1.0) * tanv * aspect;
  const double ndc_y = (1.0 - 2.0 * (py + 0.5) / h) * tanv;
  return Vec3(ndc_x, ndc_y, -1.0);
}

// Moller-Trumbore; returns the Euclidean hit distance for a unit-length
// direction, or +inf on a miss.
inline double ray_triangle(const Vec3& orig, const Vec3& dir, const Vec3& v0,
                           const Vec3& v1, const Vec3& v2) {
  constexpr double kMiss = std::numeric_limits<double>::infinity();
  const Vec3 e1 = v1 - v0;
  const Vec3 e2 = v2 - v0;
  const Vec3 p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-18) return kMiss;
  const double inv = 1.0 / det;
  const Vec3 s = orig - v0;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return kMiss;
  const Vec3 q = s.cross(e1);
  const double v = dir.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return kMiss;
  const double t = e2.dot(q) * inv;
  return t > 1e-9 ? t : kMiss;
}

void put_le32(std::ofstream& os, std::uint32_t bits) {
  const char bytes[4] = {static_cast<char>(bits & 0xff),
                         static_cast<char>((bits >> 8) & 0xff),
                         static_cast<char>((bits >> 16) & 0xff),
                         static_cast<char>((bits >> 24) & 0xff)};
  os.write(bytes, 4);
}

}  // namespace

DepthFrame render_depth(const TriMesh& mesh, const CameraPose& camera,
                        int width, int height) {
  if (width <= 0 || height <= 0)
    throw InvalidInputError("render_depth: resolution must be positive");
  if (mesh.face_count() == 0)
    throw InvalidInputError("render_depth: mesh has no faces");

  DepthFrame frame;
  frame.width = width;
  frame.height = height;
  frame.camera = camera;
  frame.depth.assign(static_cast<size_t>(width) * height, 0.0f);

  const Eigen::Matrix3d rot = rotation_matrix(camera);
  const Eigen::Matrix3d world_to_cam = rot.transpose();
  const double tanv = std::tan(camera.vfov_deg * M_PI / 360.0);
  const double aspect = static_cast<double>(width) / height;

  std::vector<double> best(frame.depth.size(),
                           std::numeric_limits<double>::infinity());

  for (int f = 0; f < mesh.face_count(); ++f) {
    const Vec3& a = mesh.positions[mesh.faces[f][0]];
    const Vec3& b = mesh.positions[mesh.faces[f][1]];
    const Vec3& c = mesh.positions[mesh.faces[f][2]];

    // Conservative screen bounding box. A triangle entirely on or behind
    // the camera plane cannot be hit; one that straddles it gets a
    // full-frame scan.
    int px0 = 0, px1 = width - 1, py0 = 0, py1 = height - 1;
    Vec3 cam[3] = {world_to_cam * (a - camera.position),
                   world_to_cam * (b - camera.position),
                   world_to_cam * (c - camera.position)};
    int in_front = 0;
    for (const Vec3& p : cam) in_front += p.z() < -1e-9 ? 1 : 0;
    if (in_front == 0) continue;
    if (in_front == 3) {
      double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
      for (const Vec3& p : cam) {
        const double invz = -1.0 / p.z();
        const double fx = (p.x() * invz / (tanv * aspect) + 1.0) * 0.5 * width;
        const double fy = (1.0 - p.y() * invz / tanv) * 0.5 * height;
        xmin = std::min(xmin, fx);
        xmax = std::max(xmax, fx);
        ymin = std::min(ymin, fy);
        ymax = std::max(ymax, fy);
      }
      px0 = std::max(0, static_cast<int>(std::floor(xmin)) - 1);
      px1 = std::min(width - 1, static_cast<int>(std::ceil(xmax)));
      py0 = std::max(0, static_cast<int>(std::floor(ymin)) - 1);
      py1 = std::min(height - 1, static_cast<int>(std::ceil(ymax)));
      if (px0 > px1 || py0 > py1) continue;
    }

    for (int py = py0; py <= py1; ++py)
      for (int px = px0; px <= px1; ++px) {
        const Vec3 dir = (rot * pixel_dir(px, py, width, height, tanv, aspect))
                             .normalized();
        const double t = ray_triangle(camera.position, dir, a, b, c);
        double& slot = best[static_cast<size_t>(py) * width + px];
        if (t < slot) slot = t;
      }
  }

  for (size_t i = 0; i < best.size(); ++i)
    if (std::isfinite(best[i])) frame.depth[i] = static_cast<float>(best[i]);
  return frame;
}

DepthFrame normalize_depth(const DepthFrame& frame, double near_bound,
                           double far_bound) {
  if (!(far_bound > near_bound))
    throw InvalidInputError("normalize_depth: far bound must exceed near");
  DepthFrame out = frame;
  const double span = far_bound - near_bound;
  for (float& d : out.depth) {
    if (d == 0.0f) continue;  // background sentinel
    const double u = (static_cast<double>(d) - near_bound) / span;
    d = static_cast<float>(std::clamp(u, 1e-6, 1.0));
  }
  return out;
}

void write_d256(const std::filesystem::path& path, const DepthFrame& frame) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  for (float d : frame.depth) put_le32(os, std::bit_cast<std::uint32_t>(d));
  if (!os) throw IoError("short write: " + path.string());
}

DepthFrame read_d256(const std::filesystem::path& path, int width,
                     int height) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw IoError("cannot open: " + path.string());
  const auto size = static_cast<std::uint64_t>(is.tellg());
  const std::uint64_t expect = static_cast<std::uint64_t>(width) * height * 4;
  if (size != expect)
    throw IoError("depth file size mismatch: " + path.string() + " holds " +
                  std::to_string(size) + " bytes, expected " +
                  std::to_string(expect));
  is.seekg(0);
  std::vector<unsigned char> raw(size);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<long>(size));
  if (!is) throw IoError("short read: " + path.string());

  DepthFrame frame;
  frame.width = width;
  frame.height = height;
  frame.depth.resize(static_cast<size_t>(width) * height);
  for (size_t i = 0; i < frame.depth.size(); ++i) {
    const std::uint32_t bits =
        static_cast<std::uint32_t>(raw[4 * i]) |
        (static_cast<std::uint32_t>(raw[4 * i + 1]) << 8) |
        (static_cast<std::uint32_t>(raw[4 * i + 2]) << 16) |
        (static_cast<std::uint32_t>(raw[4 * i + 3]) << 24);
    frame.depth[i] = std::bit_cast<float>(bits);
  }
  return frame;
}

void write_depth_sidecar(const std::filesystem::path& path,
                         const DepthFrame& frame) {
  Json j;
  j["frame_index"] = frame.frame_index;
  j["width"] = frame.width;
  j["height"] = frame.height;
  j["camera"]["position"] = {frame.camera.position.x(),
                             frame.camera.position.y(),
                             frame.camera.position.z()};
  j["camera"]["rotation_deg"] = {frame.camera.rotation_deg.x(),
                                 frame.camera.rotation_deg.y(),
                                 frame.camera.rotation_deg.z()};
  j["camera"]["vfov_deg"] = frame.camera.vfov_deg;
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw IoError("short write: " + path.string());
}

void read_depth_sidecar(const std::filesystem::path& path, DepthFrame& frame) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path.string());
  Json j;
  try {
    is >> j;
    frame.frame_index = j.at("frame_index").get<int>();
    frame.width = j.at("width").get<int>();
    frame.height = j.at("height").get<int>();
    const auto& cam = j.at("camera");
    for (int k = 0; k < 3; ++k) {
      frame.camera.position[k] = cam.at("position").at(k).get<double>();
      frame.camera.rotation_deg[k] =
          cam.at("rotation_deg").at(k).get<double>();
    }
    frame.camera.vfov_deg = cam.at("vfov_deg").get<double>();
  } catch (const Json::exception& e) {
    throw IoError("bad depth sidecar " + path.string() + ": " + e.what());
  }
}

}  // namespace fabsim
