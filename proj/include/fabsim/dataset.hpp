#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fabsim/camera.hpp"
#include "fabsim/material.hpp"
#include "fabsim/mesh.hpp"
#include "fabsim/rng.hpp"

namespace fabsim {

/// Physical search box shared by every material: stiffness scale and wind
/// speed ranges are global, the area-weight interval is material-specific.
struct MaterialSpec {
  std::string name;
  std::array<double, 2> area_weight_range;  // kg/m^2
  double bend_reference = 1e-5;             // constant reference matrix, N*m
};

constexpr std::array<double, 2> kStiffnessScaleRange{0.1, 10.0};
constexpr std::array<double, 2> kWindSpeedRange{1.0, 6.0};

/// The seven stocked fabrics with their area-weight search intervals.
const std::vector<MaterialSpec>& material_table();
/// Throws ConfigError for names not in the table.
const MaterialSpec& find_material(const std::string& name);

/// One sampled point of the 3D physics search box, the label unit of the
/// whole pipeline.
struct Combination {
  int id = 0;
  double stiffness_scale = 1.0;
  double wind_speed = 1.0;
  double area_weight = 0.15;
  std::string material;
};

/// n i.i.d. uniform draws over the material's search box, ids 0..n-1.
/// Draw order per combination: stiffness scale, wind speed, area weight.
/// Throws ConfigError for unknown materials, InvalidInputError for n < 2.
std::vector<Combination> sample_combinations(const std::string& material,
                                             int n, Rng& rng);

struct SampleRef {
  std::string path;  // relative to the manifest's directory
  int combo = 0;
  int frame = 0;
  int camera = 0;
};

struct Manifest {
  int format_version = 1;
  std::string material;
  std::string kind = "train";  // or "target"
  std::uint64_t seed = 0;
  std::string digest;  // of the generating settings
  int frames = 0;      // per combination
  int cameras = 0;
  int image_size = 256;
  std::vector<Combination> combinations;  // successfully generated
  std::vector<int> failed;                // combo ids dropped for instability
  std::vector<SampleRef> samples;         // ordered by (combo, frame, camera)
  std::filesystem::path dir;              // runtime only, not serialized
};

void write_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);

/// Everything generate_dataset needs. `frames` wins over sim.duration:
/// the clip length is frames / sim.sample_rate seconds.
struct DatasetJob {
  std::filesystem::path root;
  std::string material = "gray_interlock";
  std::string kind = "train";
  int n_combos = 30;
  int frames = 60;
  int cameras = 6;
  std::uint64_t seed = 0;
  int workers = 1;
  int grid_n = 12;
  double cloth_size = 1.0;
  PinnedEdge pinned = PinnedEdge::Top;
  SimConfig sim;
  MaterialParams base;   // stiffness_scale/area_weight overwritten per combo
  WindSpec wind_base;    // speed overwritten per combo
  int image_size = 256;
  /// When set, these poses replace the per-combination random draws
  /// (used for targets, whose camera must be pinned down, and controlled
  /// experiments). Size must equal `cameras`.
  std::optional<std::vector<CameraPose>> fixed_cameras;
};

/// Simulates and renders every combination x camera, writes
/// <root>/<material>/<combo>/<camera>/<frame>.d256 (+ sidecar JSON) and
/// <root>/<material>/manifest.json, and returns the manifest. Unstable
/// combinations are skipped and reported in `failed`. Output is
/// byte-identical for fixed (job, seed) regardless of worker count.
/// When `explicit_combos` is non-empty it overrides sampling (targets).
Manifest generate_dataset(const DatasetJob& job,
                          const std::vector<Combination>& explicit_combos = {});

struct Triplet {
  int anchor = 0;  // indices into manifest.samples
  int positive = 0;
  int negative = 0;
};

/// Uniform triplet draws against a fixed manifest: anchor uniform over
/// samples, positive uniform over the anchor's combination minus the
/// anchor, negative uniform over all other combinations. An optional
/// held-out camera index removes that camera's samples entirely.
class TripletSampler {
 public:
  explicit TripletSampler(const Manifest& manifest, int exclude_camera = -1);
  Triplet sample(Rng& rng) const;
  const std::vector<int>& pool() const { return pool_; }  // manifest indices

 private:
  struct Group {
    int start = 0;  // offset into pool_
    int count = 0;
  };
  std::vector<int> pool_;
  std::vector<Group> groups_;
  std::vector<int> group_of_;  // pool index -> group index
};

/// One-shot convenience draw; throws SamplingError when fewer
/// than two combinations or a singleton combination makes a draw
/// impossible.
Triplet sample_triplet(const Manifest& manifest, Rng& rng);

}  // namespace fabsim
