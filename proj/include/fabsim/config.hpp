#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "bo.hpp"
#include "dataset.hpp"
#include "gp.hpp"
#include "net.hpp"

namespace fabsim {

/// Bayesian-optimisation knobs exposed through the run configuration.
struct BoSettings {
  int budget = 50;
  double failure_penalty = -1e6;
};

/// One configuration drives the whole pipeline: dataset generation,
/// training, evaluation and parameter estimation all read from here so a
/// single digest pins down every artifact an invocation produces.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string material = "gray_interlock";
  std::filesystem::path out_dir = "out";

  // dataset scale
  int n_combos = 30;
  int frames = 60;
  int cameras = 6;
  int workers = 1;
  int grid_n = 12;
  double cloth_size = 1.0;
  int image_size = 256;
  PinnedEdge pinned = PinnedEdge::Top;

  SimConfig sim;        // seed mirrors the top-level seed
  MaterialParams base;  // stiffness_scale/area_weight replaced per combination
  WindSpec wind_base;   // speed replaced per combination
  NetConfig net;        // seed mirrors the top-level seed
  GpConfig gp;
  BoSettings bo;
};

/// Parses a configuration from JSON text. Missing keys keep their defaults;
/// malformed JSON, wrong types or out-of-range values throw ConfigError.
RunConfig parse_run_config(const std::string& text);

/// Reads and parses a configuration file. Throws ConfigError when the file
/// cannot be read or fails to parse.
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical pretty-printed JSON form (stable key order).
std::string run_config_text(const RunConfig& config);

void save_run_config(const std::filesystem::path& path, const RunConfig& config);

/// 64-bit digest of the canonical serialization; recorded in artifacts so
/// outputs can be traced back to the exact configuration that made them.
std::uint64_t run_config_digest(const RunConfig& config);

/// Assembles the dataset job for this configuration rooted at `root`.
DatasetJob dataset_job(const RunConfig& config, const std::filesystem::path& root,
                       const std::string& kind);

}  // namespace fabsim
