#include "fabsim/bo.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>

#include "fabsim/errors.hpp"
#include "fabsim/sim.hpp"

namespace fabsim {

namespace {

double to_unit(double x, const std::array<double, 2>& range) {
  return 2.0 * (x - range[0]) / (range[1] - range[0]) - 1.0;
}

double from_unit(double z, const std::array<double, 2>& range) {
  return range[0] + 0.5 * (z + 1.0) * (range[1] - range[0]);
}

}  // namespace

Eigen::Vector3d normalize_params(const ParamVector& p,
                                 const MaterialSpec& mat) {
  return {to_unit(p.stiffness_scale, kStiffnessScaleRange),
          to_unit(p.wind_speed, kWindSpeedRange),
          to_unit(p.area_weight, mat.area_weight_range)};
}

ParamVector denormalize_params(const Eigen::Vector3d& z,
                               const MaterialSpec& mat) {
  ParamVector p;
  p.stiffness_scale = from_unit(z[0], kStiffnessScaleRange);
  p.wind_speed = from_unit(z[1], kWindSpeedRange);
  p.area_weight = from_unit(z[2], mat.area_weight_range);
  return p;
}

double negate_objective(double psd_value) { return -psd_value; }

bool stop_check(const BOTrace& trace) {
  const auto& its = trace.iterations;
  if (its.size() < 4) return false;
  for (size_t k = its.size() - 3; k < its.size(); ++k) {
    const Eigen::Vector3d& prev = its[k - 1].incumbent_normalized;
    const Eigen::Vector3d& cur = its[k].incumbent_normalized;
    for (int d = 0; d < 3; ++d) {
      const double denom = std::max(std::abs(prev[d]), 0.05);
      if (std::abs(cur[d] - prev[d]) / denom > 0.10) return false;
    }
  }
  return true;
}

PSMPoint embed_candidate(const EstimateJob& job, const ParamVector& p) {
  TriMesh mesh =
      build_grid_mesh(job.grid_n, job.cloth_size, p.area_weight, job.pinned);
  MaterialParams mp = job.base;
  mp.stiffness_scale = p.stiffness_scale;
  mp.area_weight = p.area_weight;
  WindSpec wind = job.wind_base;
  wind.speed = p.wind_speed;
  SimConfig sim = job.sim;
  sim.duration =
      static_cast<double>(job.target_frames.size()) / sim.sample_rate;

  const std::vector<TriMesh> snaps = simulate(mesh, mp, wind, sim);
  std::vector<DepthFrame> frames;
  frames.reserve(snaps.size());
  for (size_t f = 0; f < snaps.size(); ++f) {
    DepthFrame frame =
        render_depth(snaps[f], job.camera, job.image_size, job.image_size);
    frame.frame_index = static_cast<int>(f);
    frames.push_back(std::move(frame));
  }
  return embed_sequence(job.net, frames);
}

std::string bo_iteration_json(const BOIteration& it) {
  nlohmann::ordered_json j;
  j["iteration"] = it.iteration;
  j["proposal"] = {{"stiffness_scale", it.proposal.stiffness_scale},
                   {"wind_speed", it.proposal.wind_speed},
                   {"area_weight", it.proposal.area_weight}};
  j["proposal_normalized"] = {it.proposal_normalized[0],
                              it.proposal_normalized[1],
                              it.proposal_normalized[2]};
  j["objective"] = it.objective;
  j["failed"] = it.failed;
  j["incumbent"] = {{"stiffness_scale", it.incumbent.stiffness_scale},
                    {"wind_speed", it.incumbent.wind_speed},
                    {"area_weight", it.incumbent.area_weight}};
  j["incumbent_objective"] = it.incumbent_objective;
  return j.dump();
}

EstimateResult estimate(const EstimateJob& job) {
  if (job.budget < 4)
    throw InvalidInputError("estimate: budget must be at least 4");
  if (job.target_frames.empty())
    throw InvalidInputError("estimate: empty target sequence");
  const MaterialSpec mat = find_material(job.material);

  EstimateResult result;
  result.target_embedding = embed_sequence(job.net, job.target_frames);

  std::ofstream trace_os;
  if (!job.trace_path.empty()) {
    trace_os.open(job.trace_path, std::ios::binary);
    if (!trace_os)
      throw IoError("cannot open for writing: " + job.trace_path.string());
  }

  Rng rng = Rng(job.seed).derive(0xB0);
  Eigen::MatrixXd xs(0, 3);
  Eigen::VectorXd ys(0);
  Eigen::Vector3d z = Eigen::Vector3d::Zero();

  for (int iter = 0; iter < job.budget; ++iter) {
    BOIteration it;
    it.iteration = iter;
    it.proposal_normalized = z;
    it.proposal = denormalize_params(z, mat);
    try {
      const PSMPoint emb = embed_candidate(job, it.proposal);
      it.objective = negate_objective(psd(emb, result.target_embedding));
    } catch (const InstabilityError&) {
      it.objective = job.failure_penalty;
      it.failed = true;
    }

    xs.conservativeResize(xs.rows() + 1, 3);
    xs.row(xs.rows() - 1) = z.transpose();
    ys.conservativeResize(ys.size() + 1);
    ys[ys.size() - 1] = it.objective;

    if (iter == 0 || it.objective > result.objective) {
      result.objective = it.objective;
      result.params = it.proposal;
    }
    it.incumbent = result.params;
    it.incumbent_normalized = normalize_params(result.params, mat);
    it.incumbent_objective = result.objective;
    result.trace.iterations.push_back(it);
    if (trace_os) trace_os << bo_iteration_json(it) << "\n";

    if (stop_check(result.trace)) {
      result.trace.stop_reason = "converged";
      break;
    }
    if (iter + 1 == job.budget) {
      result.trace.stop_reason = "budget";
      break;
    }
    const GpState state = gp_fit(xs, ys, job.gp);
    z = propose_next(state, rng);
  }

  if (trace_os) {
    nlohmann::ordered_json tail;
    tail["stop_reason"] = result.trace.stop_reason;
    trace_os << tail.dump() << "\n";
    if (!trace_os) throw IoError("short write: " + job.trace_path.string());
  }
  return result;
}

}  // namespace fabsim
