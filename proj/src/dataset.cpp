#include "fabsim/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <thread>

#include "fabsim/depth.hpp"
#include "fabsim/digest.hpp"
#include "fabsim/errors.hpp"
#include "fabsim/sim.hpp"

namespace fabsim {

namespace {

using Json = nlohmann::ordered_json;

Json combination_to_json(const Combination& c) {
  Json j;
  j["id"] = c.id;
  j["stiffness_scale"] = c.stiffness_scale;
  j["wind_speed"] = c.wind_speed;
  j["area_weight"] = c.area_weight;
  return j;
}

Combination combination_from_json(const Json& j, const std::string& material) {
  Combination c;
  c.id = j.at("id").get<int>();
  c.stiffness_scale = j.at("stiffness_scale").get<double>();
  c.wind_speed = j.at("wind_speed").get<double>();
  c.area_weight = j.at("area_weight").get<double>();
  c.material = material;
  return c;
}

Json job_settings_json(const DatasetJob& job) {
  Json j;
  j["material"] = job.material;
  j["kind"] = job.kind;
  j["n_combos"] = job.n_combos;
  j["frames"] = job.frames;
  j["cameras"] = job.cameras;
  j["seed"] = job.seed;
  j["grid_n"] = job.grid_n;
  j["cloth_size"] = job.cloth_size;
  j["pinned"] = to_string(job.pinned);
  j["dt"] = job.sim.dt;
  j["sample_rate"] = job.sim.sample_rate;
  j["gravity"] = {job.sim.gravity.x(), job.sim.gravity.y(),
                  job.sim.gravity.z()};
  std::vector<double> bend(job.base.bend_matrix.data(),
                           job.base.bend_matrix.data() + 15);
  j["bend_matrix"] = bend;
  j["curvature_range"] = job.base.curvature_range;
  j["stretch_stiffness"] = job.base.stretch_stiffness;
  j["damping"] = job.base.damping;
  j["wind_direction"] = {job.wind_base.direction.x(),
                         job.wind_base.direction.y(),
                         job.wind_base.direction.z()};
  j["air_density"] = job.wind_base.air_density;
  j["quadratic_wind"] = job.wind_base.quadratic;
  j["image_size"] = job.image_size;
  if (job.fixed_cameras) {
    Json cams = Json::array();
    for (const CameraPose& p : *job.fixed_cameras) {
      Json c;
      c["position"] = {p.position.x(), p.position.y(), p.position.z()};
      c["rotation_deg"] = {p.rotation_deg.x(), p.rotation_deg.y(),
                           p.rotation_deg.z()};
      c["vfov_deg"] = p.vfov_deg;
      cams.push_back(c);
    }
    j["fixed_cameras"] = cams;
  }
  return j;
}

}  // namespace

const std::vector<MaterialSpec>& material_table() {
  static const std::vector<MaterialSpec> table = {
      {"white_tablecloth", {0.10, 0.17}, 1e-5},
      {"gray_interlock", {0.15, 0.22}, 1e-5},
      {"black_denim", {0.30, 0.37}, 1e-5},
      {"sparkle_fleece", {0.23, 0.30}, 1e-5},
      {"pink_nylon", {0.16, 0.23}, 1e-5},
      {"ponte_roma", {0.23, 0.30}, 1e-5},
      {"red_violet", {0.10, 0.17}, 1e-5},
  };
  return table;
}

const MaterialSpec& find_material(const std::string& name) {
  for (const MaterialSpec& spec : material_table())
    if (spec.name == name) return spec;
  throw ConfigError("unknown material: " + name);
}

std::vector<Combination> sample_combinations(const std::string& material,
                                             int n, Rng& rng) {
  const MaterialSpec& spec = find_material(material);
  if (n < 2)
    throw InvalidInputError("sample_combinations: need at least 2 draws");
  std::vector<Combination> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Combination c;
    c.id = i;
    c.stiffness_scale =
        rng.uniform(kStiffnessScaleRange[0], kStiffnessScaleRange[1]);
    c.wind_speed = rng.uniform(kWindSpeedRange[0], kWindSpeedRange[1]);
    c.area_weight =
        rng.uniform(spec.area_weight_range[0], spec.area_weight_range[1]);
    c.material = material;
    out.push_back(c);
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  Json j;
  j["format_version"] = m.format_version;
  j["material"] = m.material;
  j["kind"] = m.kind;
  j["seed"] = m.seed;
  j["digest"] = m.digest;
  j["frames"] = m.frames;
  j["cameras"] = m.cameras;
  j["image_size"] = m.image_size;
  Json combos = Json::array();
  for (const Combination& c : m.combinations)
    combos.push_back(combination_to_json(c));
  j["combinations"] = combos;
  j["failed"] = m.failed;
  Json samples = Json::array();
  for (const SampleRef& s : m.samples) {
    Json e;
    e["path"] = s.path;
    e["combo"] = s.combo;
    e["frame"] = s.frame;
    e["camera"] = s.camera;
    samples.push_back(e);
  }
  j["samples"] = samples;
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << j.dump(1) << '\n';
  if (!os) throw IoError("short write: " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path.string());
  Json j;
  Manifest m;
  try {
    is >> j;
    m.format_version = j.at("format_version").get<int>();
    m.material = j.at("material").get<std::string>();
    m.kind = j.at("kind").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.digest = j.at("digest").get<std::string>();
    m.frames = j.at("frames").get<int>();
    m.cameras = j.at("cameras").get<int>();
    m.image_size = j.at("image_size").get<int>();
    for (const Json& c : j.at("combinations"))
      m.combinations.push_back(combination_from_json(c, m.material));
    m.failed = j.at("failed").get<std::vector<int>>();
    for (const Json& e : j.at("samples")) {
      SampleRef s;
      s.path = e.at("path").get<std::string>();
      s.combo = e.at("combo").get<int>();
      s.frame = e.at("frame").get<int>();
      s.camera = e.at("camera").get<int>();
      m.samples.push_back(s);
    }
  } catch (const Json::exception& e) {
    throw IoError("bad manifest " + path.string() + ": " + e.what());
  }
  m.dir = path.parent_path();
  return m;
}

Manifest generate_dataset(const DatasetJob& job,
                          const std::vector<Combination>& explicit_combos) {
  find_material(job.material);
  if (job.frames < 1 || job.cameras < 1)
    throw InvalidInputError("generate_dataset: frames and cameras must be >= 1");
  if (job.fixed_cameras &&
      static_cast<int>(job.fixed_cameras->size()) != job.cameras)
    throw InvalidInputError(
        "generate_dataset: fixed camera list must match the camera count");

  std::vector<Combination> combos = explicit_combos;
  if (combos.empty()) {
    Rng rng(job.seed);
    combos = sample_combinations(job.material, job.n_combos, rng);
  }

  const std::filesystem::path dir = job.root / job.material;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  SimConfig sim = job.sim;
  sim.duration = job.frames / sim.sample_rate;

  const int ncombos = static_cast<int>(combos.size());
  std::vector<char> failed(ncombos, 0);

  auto run_combo = [&](int ci) {
    const Combination& combo = combos[ci];
    Rng combo_rng = Rng(job.seed).derive(0x9E00 + combo.id);
    std::vector<CameraPose> poses;
    if (job.fixed_cameras) {
      poses = *job.fixed_cameras;
    } else {
      poses.reserve(job.cameras);
      for (int c = 0; c < job.cameras; ++c)
        poses.push_back(sample_camera_pose(combo_rng));
    }

    TriMesh mesh = build_grid_mesh(job.grid_n, job.cloth_size,
                                   combo.area_weight, job.pinned);
    MaterialParams mp = job.base;
    mp.stiffness_scale = combo.stiffness_scale;
    mp.area_weight = combo.area_weight;
    WindSpec wind = job.wind_base;
    wind.speed = combo.wind_speed;

    std::vector<TriMesh> snaps;
    try {
      snaps = simulate(mesh, mp, wind, sim);
    } catch (const InstabilityError&) {
      failed[ci] = 1;
      return;
    }

    for (int cam = 0; cam < job.cameras; ++cam) {
      const std::filesystem::path cam_dir =
          dir / std::to_string(combo.id) / std::to_string(cam);
      std::filesystem::create_directories(cam_dir);
      for (int f = 0; f < job.frames; ++f) {
        DepthFrame frame =
            render_depth(snaps[f], poses[cam], job.image_size, job.image_size);
        frame.frame_index = f;
        char name[16];
        std::snprintf(name, sizeof(name), "%03d", f);
        write_d256(cam_dir / (std::string(name) + ".d256"), frame);
        write_depth_sidecar(cam_dir / (std::string(name) + ".json"), frame);
      }
    }
  };

  const int workers = std::max(1, job.workers);
  if (workers == 1 || ncombos <= 1) {
    for (int ci = 0; ci < ncombos; ++ci) run_combo(ci);
  } else {
    std::atomic<int> next{0};
    auto drain = [&] {
      for (int ci = next.fetch_add(1); ci < ncombos; ci = next.fetch_add(1))
        run_combo(ci);
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min(workers, ncombos); ++w)
      pool.emplace_back(drain);
    for (std::thread& t : pool) t.join();
  }

  Manifest m;
  m.material = job.material;
  m.kind = job.kind;
  m.seed = job.seed;
  m.digest = hex64(fnv1a(job_settings_json(job).dump()));
  m.frames = job.frames;
  m.cameras = job.cameras;
  m.image_size = job.image_size;
  m.dir = dir;
  for (int ci = 0; ci < ncombos; ++ci) {
    if (failed[ci]) {
      m.failed.push_back(combos[ci].id);
      continue;
    }
    m.combinations.push_back(combos[ci]);
    for (int f = 0; f < job.frames; ++f)
      for (int cam = 0; cam < job.cameras; ++cam) {
        SampleRef s;
        char name[16];
        std::snprintf(name, sizeof(name), "%03d", f);
        s.path = std::to_string(combos[ci].id) + "/" + std::to_string(cam) +
                 "/" + name + ".d256";
        s.combo = combos[ci].id;
        s.frame = f;
        s.camera = cam;
        m.samples.push_back(s);
      }
  }
  write_manifest(dir / "manifest.json", m);
  return m;
}

TripletSampler::TripletSampler(const Manifest& manifest, int exclude_camera) {
  int prev_combo = -1;
  for (int i = 0; i < static_cast<int>(manifest.samples.size()); ++i) {
    const SampleRef& s = manifest.samples[i];
    if (s.camera == exclude_camera) continue;
    if (s.combo != prev_combo) {
      groups_.push_back({static_cast<int>(pool_.size()), 0});
      prev_combo = s.combo;
    }
    pool_.push_back(i);
    group_of_.push_back(static_cast<int>(groups_.size()) - 1);
    ++groups_.back().count;
  }
}

Triplet TripletSampler::sample(Rng& rng) const {
  if (groups_.size() < 2)
    throw SamplingError("triplet sampling needs at least 2 combinations");
  const int anchor_pos = static_cast<int>(rng.index(pool_.size()));
  const Group& g = groups_[group_of_[anchor_pos]];
  if (g.count < 2)
    throw SamplingError("combination with a single sample cannot host a positive");

  const int anchor_local = anchor_pos - g.start;
  int pos_local = static_cast<int>(rng.index(g.count - 1));
  if (pos_local >= anchor_local) ++pos_local;

  int neg = static_cast<int>(rng.index(pool_.size() - g.count));
  if (neg >= g.start) neg += g.count;

  return Triplet{pool_[anchor_pos], pool_[g.start + pos_local], pool_[neg]};
}

Triplet sample_triplet(const Manifest& manifest, Rng& rng) {
  return TripletSampler(manifest).sample(rng);
}

}  // namespace fabsim
