#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

#include "fabsim/camera.hpp"
#include "fabsim/dataset.hpp"
#include "fabsim/depth.hpp"
#include "fabsim/gp.hpp"
#include "fabsim/material.hpp"
#include "fabsim/mesh.hpp"
#include "fabsim/net.hpp"

namespace fabsim {

/// The physical parameter triple searched by the optimizer.
struct ParamVector {
  double stiffness_scale = 1.0;
  double wind_speed = 1.0;
  double area_weight = 0.15;
};

/// Affine map of each physical search interval (stiffness scale, wind
/// speed, the material's area-weight interval) onto [-1,1].
Eigen::Vector3d normalize_params(const ParamVector& p,
                                 const MaterialSpec& mat);
ParamVector denormalize_params(const Eigen::Vector3d& z,
                               const MaterialSpec& mat);

/// Distances are costs; the optimizer maximizes, so y = -psd.
double negate_objective(double psd_value);

struct BOIteration {
  int iteration = 0;
  ParamVector proposal;
  Eigen::Vector3d proposal_normalized = Eigen::Vector3d::Zero();
  double objective = 0.0;  // negated sequence distance, or the penalty
  bool failed = false;
  ParamVector incumbent;
  Eigen::Vector3d incumbent_normalized = Eigen::Vector3d::Zero();
  double incumbent_objective = 0.0;
};

struct BOTrace {
  std::vector<BOIteration> iterations;
  std::string stop_reason;  // "converged" or "budget"
};

/// Convergence rule: at least 4 incumbents, and over the last 3
/// consecutive incumbent pairs every normalized dimension satisfies
/// |delta| / max(|previous|, 0.05) <= 0.10.
bool stop_check(const BOTrace& trace);

struct EstimateJob {
  std::vector<DepthFrame> target_frames;  // raw target depth sequence
  CameraPose camera;                      // target's camera pose
  std::string material = "gray_interlock";
  NetParams net;
  int budget = 50;
  double failure_penalty = -1e6;
  std::uint64_t seed = 0;
  // candidate simulation scale (must match the training corpus)
  int grid_n = 12;
  double cloth_size = 1.0;
  PinnedEdge pinned = PinnedEdge::Top;
  SimConfig sim;
  MaterialParams base;
  WindSpec wind_base;
  int image_size = 256;
  GpConfig gp;
  std::filesystem::path trace_path;  // JSONL sink when non-empty
};

struct EstimateResult {
  ParamVector params;  // incumbent at halt
  double objective = 0.0;
  BOTrace trace;
  PSMPoint target_embedding;
};

/// Simulates one candidate triple, renders it with the job camera and
/// returns its sequence embedding. Shared by target synthesis and the
/// optimization loop. Throws InstabilityError when the simulation blows
/// up.
PSMPoint embed_candidate(const EstimateJob& job, const ParamVector& p);

/// The optimization loop: starts at normalized (0,0,0), evaluates,
/// updates the surrogate and proposes until the convergence rule fires or
/// the budget is exhausted. Unstable candidates score the failure
/// penalty. Deterministic per seed.
EstimateResult estimate(const EstimateJob& job);

std::string bo_iteration_json(const BOIteration& it);

}  // namespace fabsim
