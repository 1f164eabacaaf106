#include <doctest.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <vector>

#include "fabsim/bo.hpp"
#include "fabsim/errors.hpp"

using namespace fabsim;

namespace {

BOTrace trace_of(const std::vector<Eigen::Vector3d>& incumbents) {
  BOTrace t;
  for (size_t i = 0; i < incumbents.size(); ++i) {
    BOIteration it;
    it.iteration = static_cast<int>(i);
    it.incumbent_normalized = incumbents[i];
    t.iterations.push_back(it);
  }
  return t;
}

NetConfig tiny_net_config() {
  NetConfig c;
  c.input_size = 16;
  c.conv_channels = {2};
  c.fc_widths = {4, 2};
  c.seed = 5;
  return c;
}

EstimateJob tiny_job() {
  EstimateJob job;
  job.material = "gray_interlock";
  job.net = init_params(tiny_net_config());
  job.grid_n = 4;
  job.cloth_size = 0.5;
  job.image_size = 16;
  job.sim.dt = 1e-3;
  job.sim.sample_rate = 20.0;
  job.base.stretch_stiffness = 100.0;
  job.camera.position = Vec3(0.9, 0.0, -0.25);
  job.camera.rotation_deg = Vec3(90.0, 0.0, 90.0);
  DepthFrame blank;
  blank.width = 16;
  blank.height = 16;
  blank.depth.assign(16 * 16, 0.0f);
  job.target_frames = {blank, blank};
  return job;
}

}  // namespace

TEST_CASE("normalization round-trips and hits the interval anchors") {
  const MaterialSpec mat = find_material("black_denim");

  ParamVector lo{0.1, 1.0, mat.area_weight_range[0]};
  ParamVector hi{10.0, 6.0, mat.area_weight_range[1]};
  CHECK((normalize_params(lo, mat) - Eigen::Vector3d(-1, -1, -1)).norm() <=
        1e-12);
  CHECK((normalize_params(hi, mat) - Eigen::Vector3d(1, 1, 1)).norm() <=
        1e-12);

  const ParamVector mid = denormalize_params(Eigen::Vector3d::Zero(), mat);
  CHECK(std::abs(mid.stiffness_scale - 5.05) <= 1e-12);
  CHECK(std::abs(mid.wind_speed - 3.5) <= 1e-12);
  CHECK(std::abs(mid.area_weight -
                 0.5 * (mat.area_weight_range[0] + mat.area_weight_range[1])) <=
        1e-12);

  Rng rng(17);
  for (int i = 0; i < 10000; ++i) {
    Eigen::Vector3d z;
    for (int d = 0; d < 3; ++d) z[d] = rng.uniform(-1.0, 1.0);
    const ParamVector p = denormalize_params(z, mat);
    CHECK((normalize_params(p, mat) - z).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(p.stiffness_scale >= 0.1);
    CHECK(p.stiffness_scale <= 10.0);
    CHECK(p.wind_speed >= 1.0);
    CHECK(p.wind_speed <= 6.0);
    CHECK(p.area_weight >= mat.area_weight_range[0]);
    CHECK(p.area_weight <= mat.area_weight_range[1]);
  }
}

TEST_CASE("objective negation") {
  CHECK(negate_objective(100.0) == -100.0);
  CHECK(negate_objective(0.0) == 0.0);
  CHECK(negate_objective(2.0) > negate_objective(3.0));  // order reversal
}

TEST_CASE("stop rule fires on small incumbent drift") {
  auto vec = [](double v) { return Eigen::Vector3d(v, 0.2, -0.3); };
  CHECK(stop_check(trace_of({vec(0.50), vec(0.52), vec(0.51), vec(0.515)})));
  // a 50% move in one dimension blocks the halt
  CHECK_FALSE(
      stop_check(trace_of({vec(0.50), vec(0.75), vec(0.74), vec(0.745)})));
  CHECK_FALSE(stop_check(trace_of({vec(0.5), vec(0.5)})));
  CHECK_FALSE(stop_check(trace_of({vec(0.5), vec(0.5), vec(0.5)})));
  CHECK(stop_check(trace_of({vec(0.5), vec(0.5), vec(0.5), vec(0.5)})));
  // near zero the 0.05 floor takes over: |0.004| / 0.05 = 8% passes
  auto nz = [](double v) { return Eigen::Vector3d(v, 0.0, 0.0); };
  CHECK(stop_check(trace_of({nz(0.000), nz(0.004), nz(0.000), nz(0.004)})));
  CHECK_FALSE(stop_check(trace_of({nz(0.000), nz(0.006), nz(0.000), nz(0.004)})));
  // drift in a different dimension also blocks
  BOTrace t = trace_of({vec(0.5), vec(0.5), vec(0.5), vec(0.5)});
  t.iterations[2].incumbent_normalized[1] = 0.5;
  CHECK_FALSE(stop_check(t));
}

TEST_CASE("estimate halts once the incumbent settles") {
  EstimateJob job = tiny_job();
  job.net = zeros_like(job.net);  // every sequence embeds to the origin
  job.budget = 10;
  const EstimateResult r = estimate(job);
  // all objectives are 0, the incumbent never moves: converged at 4
  CHECK(r.trace.stop_reason == "converged");
  CHECK(r.trace.iterations.size() == 4);
  CHECK(r.objective == 0.0);
  // the loop starts at normalized zero = interval midpoints
  CHECK(std::abs(r.params.stiffness_scale - 5.05) <= 1e-12);
  CHECK(std::abs(r.params.wind_speed - 3.5) <= 1e-12);
  for (const BOIteration& it : r.trace.iterations) {
    CHECK(it.objective == 0.0);
    CHECK_FALSE(it.failed);
  }
}

TEST_CASE("estimate respects the budget and keeps the incumbent monotone") {
  EstimateJob job = tiny_job();
  job.budget = 4;
  job.seed = 31;
  const EstimateResult r = estimate(job);
  CHECK(r.trace.iterations.size() <= 4);
  CHECK_FALSE(r.trace.stop_reason.empty());
  double prev = -std::numeric_limits<double>::infinity();
  for (const BOIteration& it : r.trace.iterations) {
    CHECK(it.incumbent_objective >= prev);
    prev = it.incumbent_objective;
    CHECK(it.objective <= 0.0);  // negated distances never exceed zero
    // proposals stay in the physical search boxes
    CHECK(it.proposal.stiffness_scale >= 0.1);
    CHECK(it.proposal.stiffness_scale <= 10.0);
    CHECK(it.proposal.wind_speed >= 1.0);
    CHECK(it.proposal.wind_speed <= 6.0);
  }
  CHECK(r.objective == r.trace.iterations.back().incumbent_objective);
}

TEST_CASE("estimate is deterministic for a fixed seed") {
  EstimateJob job = tiny_job();
  job.budget = 5;
  job.seed = 77;
  const EstimateResult a = estimate(job);
  const EstimateResult b = estimate(job);
  REQUIRE(a.trace.iterations.size() == b.trace.iterations.size());
  for (size_t i = 0; i < a.trace.iterations.size(); ++i)
    CHECK(bo_iteration_json(a.trace.iterations[i]) ==
          bo_iteration_json(b.trace.iterations[i]));
  CHECK(a.trace.stop_reason == b.trace.stop_reason);
}

TEST_CASE("unstable candidates take the failure penalty and the loop continues") {
  EstimateJob job = tiny_job();
  job.budget = 4;
  // stiff enough that the explicit step diverges within the first frames
  job.base.stretch_stiffness = 5e7;
  const EstimateResult r = estimate(job);
  CHECK(r.trace.iterations.size() == 4);
  for (const BOIteration& it : r.trace.iterations) {
    CHECK(it.failed);
    CHECK(it.objective == -1e6);
  }
  CHECK(r.objective == -1e6);
}

TEST_CASE("estimate writes a JSONL trace") {
  EstimateJob job = tiny_job();
  job.net = zeros_like(job.net);
  job.budget = 10;
  job.trace_path =
      std::filesystem::temp_directory_path() / "fabsim_bo_trace.jsonl";
  std::filesystem::remove(job.trace_path);
  const EstimateResult r = estimate(job);

  std::ifstream is(job.trace_path);
  REQUIRE(is.good());
  std::vector<std::string> lines;
  for (std::string line; std::getline(is, line);)
    if (!line.empty()) lines.push_back(line);
  REQUIRE(lines.size() == r.trace.iterations.size() + 1);
  for (size_t i = 0; i < r.trace.iterations.size(); ++i) {
    const auto j = nlohmann::json::parse(lines[i]);
    CHECK(j["iteration"] == static_cast<int>(i));
    CHECK(j.contains("proposal"));
    CHECK(j.contains("incumbent_objective"));
  }
  const auto tail = nlohmann::json::parse(lines.back());
  CHECK(tail["stop_reason"] == "converged");
  std::filesystem::remove(job.trace_path);
}

TEST_CASE("estimate validates its inputs") {
  EstimateJob job = tiny_job();
  job.budget = 3;
  CHECK_THROWS_AS(estimate(job), InvalidInputError);
  job = tiny_job();
  job.target_frames.clear();
  CHECK_THROWS_AS(estimate(job), InvalidInputError);
  job = tiny_job();
  job.material = "velvet";
  CHECK_THROWS_AS(estimate(job), ConfigError);
}

TEST_CASE("surrogate optimization recovers a synthetic 3d optimum") {
  // pure GP/EI loop on -(x - x*)^2, the sim pipeline bypassed
  const Eigen::Vector3d target(0.3, -0.5, 0.7);
  auto objective = [&](const Eigen::Vector3d& z) {
    return -(z - target).squaredNorm();
  };

  Eigen::MatrixXd xs(1, 3);
  xs.setZero();
  Eigen::VectorXd ys(1);
  ys[0] = objective(Eigen::Vector3d::Zero());

  Rng rng(4242);
  GpConfig gc;
  gc.noise_variance = 1e-10;
  for (int iter = 0; iter < 30; ++iter) {
    const GpState state = gp_fit(xs, ys, gc);
    const Eigen::VectorXd next = propose_next(state, rng);
    xs.conservativeResize(xs.rows() + 1, 3);
    xs.row(xs.rows() - 1) = next.transpose();
    ys.conservativeResize(ys.size() + 1);
    ys[ys.size() - 1] = objective(next);
  }
  int best_i = 0;
  ys.maxCoeff(&best_i);
  for (int d = 0; d < 3; ++d)
    CHECK(std::abs(xs(best_i, d) - target[d]) <= 0.05);
}
