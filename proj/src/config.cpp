#include "fabsim/config.hpp"

#include <array>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "fabsim/digest.hpp"
#include "fabsim/errors.hpp"
#include "fabsim/material.hpp"

namespace fabsim {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3)
    throw ConfigError("config: expected a 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json bend_matrix_json(const Eigen::Matrix<double, 3, 5>& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) {
    json row = json::array();
    for (int c = 0; c < 5; ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::Matrix<double, 3, 5> bend_matrix_from(const json& j) {
  if (!j.is_array() || j.size() != 3)
    throw ConfigError("config: bend_matrix must have 3 rows");
  Eigen::Matrix<double, 3, 5> m;
  for (int r = 0; r < 3; ++r) {
    if (!j[r].is_array() || j[r].size() != 5)
      throw ConfigError("config: bend_matrix rows must have 5 columns");
    for (int c = 0; c < 5; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

template <typename T>
void read_into(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void read_vec3(const json& j, const char* key, Vec3& out) {
  if (auto it = j.find(key); it != j.end()) out = vec3_from(*it);
}

void read_range(const json& j, const char* key, std::array<double, 2>& out) {
  if (auto it = j.find(key); it != j.end()) {
    if (!it->is_array() || it->size() != 2)
      throw ConfigError(std::string("config: ") + key + " must be [lo, hi]");
    out = {(*it)[0].get<double>(), (*it)[1].get<double>()};
  }
}

RunConfig from_json(const json& j) {
  RunConfig c;
  read_into(j, "seed", c.seed);
  read_into(j, "material", c.material);
  if (auto it = j.find("out_dir"); it != j.end())
    c.out_dir = it->get<std::string>();

  if (auto it = j.find("dataset"); it != j.end()) {
    const json& d = *it;
    read_into(d, "combos", c.n_combos);
    read_into(d, "frames", c.frames);
    read_into(d, "cameras", c.cameras);
    read_into(d, "workers", c.workers);
    read_into(d, "grid_n", c.grid_n);
    read_into(d, "cloth_size", c.cloth_size);
    read_into(d, "image_size", c.image_size);
    if (auto p = d.find("pinned"); p != d.end())
      c.pinned = pinned_edge_from_string(p->get<std::string>());
  }

  if (auto it = j.find("sim"); it != j.end()) {
    const json& s = *it;
    read_into(s, "dt", c.sim.dt);
    read_into(s, "duration", c.sim.duration);
    read_into(s, "sample_rate", c.sim.sample_rate);
    read_vec3(s, "gravity", c.sim.gravity);
  }

  if (auto it = j.find("cloth"); it != j.end()) {
    const json& m = *it;
    if (auto b = m.find("bend_matrix"); b != m.end())
      c.base.bend_matrix = bend_matrix_from(*b);
    read_into(m, "stiffness_scale", c.base.stiffness_scale);
    read_into(m, "area_weight", c.base.area_weight);
    read_into(m, "stretch_stiffness", c.base.stretch_stiffness);
    read_into(m, "damping", c.base.damping);
    read_range(m, "curvature_range", c.base.curvature_range);
  }

  if (auto it = j.find("wind"); it != j.end()) {
    const json& w = *it;
    read_into(w, "speed", c.wind_base.speed);
    read_vec3(w, "direction", c.wind_base.direction);
    read_into(w, "air_density", c.wind_base.air_density);
    read_into(w, "quadratic", c.wind_base.quadratic);
  }

  if (auto it = j.find("net"); it != j.end()) {
    const json& n = *it;
    read_into(n, "input_size", c.net.input_size);
    read_into(n, "conv_channels", c.net.conv_channels);
    read_into(n, "kernel", c.net.kernel);
    read_into(n, "pool", c.net.pool);
    read_into(n, "fc_widths", c.net.fc_widths);
    read_into(n, "margin", c.net.margin);
    read_into(n, "batch_size", c.net.batch_size);
    read_into(n, "lr", c.net.lr);
    read_into(n, "lr_step", c.net.lr_step);
    read_into(n, "lr_decay", c.net.lr_decay);
    read_into(n, "epochs", c.net.epochs);
    read_into(n, "triplets_per_epoch", c.net.triplets_per_epoch);
    read_into(n, "depth_near", c.net.depth_near);
    read_into(n, "depth_far", c.net.depth_far);
  }

  if (auto it = j.find("gp"); it != j.end()) {
    const json& g = *it;
    if (auto ls = g.find("length_scales"); ls != g.end()) {
      if (!ls->is_array()) throw ConfigError("config: gp.length_scales must be an array");
      c.gp.length_scales.resize(static_cast<Eigen::Index>(ls->size()));
      for (Eigen::Index i = 0; i < c.gp.length_scales.size(); ++i)
        c.gp.length_scales[i] = (*ls)[static_cast<std::size_t>(i)].get<double>();
    }
    read_into(g, "signal_variance", c.gp.signal_variance);
    read_into(g, "noise_variance", c.gp.noise_variance);
    read_into(g, "refit_hyperparams", c.gp.refit_hyperparams);
    read_into(g, "refit_starts", c.gp.refit_starts);
    read_into(g, "refit_iters", c.gp.refit_iters);
  }

  if (auto it = j.find("bo"); it != j.end()) {
    const json& b = *it;
    read_into(b, "budget", c.bo.budget);
    read_into(b, "failure_penalty", c.bo.failure_penalty);
  }

  // A single seed drives every stage.
  c.sim.seed = c.seed;
  c.net.seed = c.seed;
  return c;
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["material"] = c.material;
  j["out_dir"] = c.out_dir.string();
  j["dataset"] = {{"combos", c.n_combos},       {"frames", c.frames},
                  {"cameras", c.cameras},       {"workers", c.workers},
                  {"grid_n", c.grid_n},         {"cloth_size", c.cloth_size},
                  {"image_size", c.image_size}, {"pinned", to_string(c.pinned)}};
  j["sim"] = {{"dt", c.sim.dt},
              {"duration", c.sim.duration},
              {"sample_rate", c.sim.sample_rate},
              {"gravity", vec3_json(c.sim.gravity)}};
  j["cloth"] = {{"bend_matrix", bend_matrix_json(c.base.bend_matrix)},
                {"stiffness_scale", c.base.stiffness_scale},
                {"area_weight", c.base.area_weight},
                {"stretch_stiffness", c.base.stretch_stiffness},
                {"damping", c.base.damping},
                {"curvature_range", {c.base.curvature_range[0], c.base.curvature_range[1]}}};
  j["wind"] = {{"speed", c.wind_base.speed},
               {"direction", vec3_json(c.wind_base.direction)},
               {"air_density", c.wind_base.air_density},
               {"quadratic", c.wind_base.quadratic}};
  j["net"] = {{"input_size", c.net.input_size},
              {"conv_channels", c.net.conv_channels},
              {"kernel", c.net.kernel},
              {"pool", c.net.pool},
              {"fc_widths", c.net.fc_widths},
              {"margin", c.net.margin},
              {"batch_size", c.net.batch_size},
              {"lr", c.net.lr},
              {"lr_step", c.net.lr_step},
              {"lr_decay", c.net.lr_decay},
              {"epochs", c.net.epochs},
              {"triplets_per_epoch", c.net.triplets_per_epoch},
              {"depth_near", c.net.depth_near},
              {"depth_far", c.net.depth_far}};
  json ls = json::array();
  for (Eigen::Index i = 0; i < c.gp.length_scales.size(); ++i)
    ls.push_back(c.gp.length_scales[i]);
  j["gp"] = {{"length_scales", ls},
             {"signal_variance", c.gp.signal_variance},
             {"noise_variance", c.gp.noise_variance},
             {"refit_hyperparams", c.gp.refit_hyperparams},
             {"refit_starts", c.gp.refit_starts},
             {"refit_iters", c.gp.refit_iters}};
  j["bo"] = {{"budget", c.bo.budget}, {"failure_penalty", c.bo.failure_penalty}};
  return j;
}

void check(const RunConfig& c) {
  find_material(c.material);  // throws ConfigError for unknown names
  if (c.n_combos < 1) throw ConfigError("config: dataset.combos must be >= 1");
  if (c.frames < 1) throw ConfigError("config: dataset.frames must be >= 1");
  if (c.cameras < 1) throw ConfigError("config: dataset.cameras must be >= 1");
  if (c.workers < 1) throw ConfigError("config: dataset.workers must be >= 1");
  if (c.grid_n < 2) throw ConfigError("config: dataset.grid_n must be >= 2");
  if (c.cloth_size <= 0.0)
    throw ConfigError("config: dataset.cloth_size must be positive");
  if (c.image_size < 1)
    throw ConfigError("config: dataset.image_size must be >= 1");
  if (c.bo.budget < 4) throw ConfigError("config: bo.budget must be >= 4");
  validate(c.sim);
  validate(c.base);
  validate(c.wind_base);
  validate(c.net);
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  RunConfig c;
  try {
    c = from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  check(c);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string run_config_text(const RunConfig& config) {
  return to_json(config).dump(1) + "\n";
}

void save_run_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw IoError("config: cannot write " + path.string());
  out << run_config_text(config);
  if (!out) throw IoError("config: failed writing " + path.string());
}

std::uint64_t run_config_digest(const RunConfig& config) {
  return fnv1a(to_json(config).dump());
}

DatasetJob dataset_job(const RunConfig& config, const std::filesystem::path& root,
                       const std::string& kind) {
  DatasetJob job;
  job.root = root;
  job.material = config.material;
  job.kind = kind;
  job.n_combos = config.n_combos;
  job.frames = config.frames;
  job.cameras = config.cameras;
  job.seed = config.seed;
  job.workers = config.workers;
  job.grid_n = config.grid_n;
  job.cloth_size = config.cloth_size;
  job.pinned = config.pinned;
  job.sim = config.sim;
  job.base = config.base;
  job.wind_base = config.wind_base;
  job.image_size = config.image_size;
  return job;
}

}  // namespace fabsim
