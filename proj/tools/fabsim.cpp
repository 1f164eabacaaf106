#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fabsim/bo.hpp"
#include "fabsim/config.hpp"
#include "fabsim/dataset.hpp"
#include "fabsim/depth.hpp"
#include "fabsim/digest.hpp"
#include "fabsim/errors.hpp"
#include "fabsim/eval.hpp"
#include "fabsim/mesh.hpp"
#include "fabsim/net.hpp"
#include "fabsim/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace fabsim;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

/// Options shared by every subcommand; the config file is resolved lazily so
/// `--help` never touches the filesystem.
struct GlobalOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    if (seed_set) {
      cfg.seed = seed;
      cfg.sim.seed = seed;
      cfg.net.seed = seed;
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    return cfg;
  }
};

void write_obj(const fs::path& path, const TriMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& p : mesh.positions)
    out << "v " << fmt(p.x()) << ' ' << fmt(p.y()) << ' ' << fmt(p.z()) << '\n';
  for (const auto& f : mesh.faces)
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOpts {
  double stiffness_scale = 1.0;
  double wind = 3.5;
  double area_weight = -1.0;  // <0 -> material range midpoint
  int frames = -1;            // <0 -> config value
};

int cmd_simulate(const GlobalOpts& g, const SimulateOpts& o) {
  RunConfig cfg = g.resolve();
  const MaterialSpec& spec = find_material(cfg.material);

  MaterialParams mp = cfg.base;
  mp.stiffness_scale = o.stiffness_scale;
  mp.area_weight = o.area_weight >= 0.0
                       ? o.area_weight
                       : 0.5 * (spec.area_weight_range[0] + spec.area_weight_range[1]);
  WindSpec wind = cfg.wind_base;
  wind.speed = o.wind;
  SimConfig sim = cfg.sim;
  const int frames = o.frames > 0 ? o.frames : cfg.frames;
  sim.duration = frames / sim.sample_rate;

  TriMesh mesh = build_grid_mesh(cfg.grid_n, cfg.cloth_size, mp.area_weight, cfg.pinned);
  std::vector<TriMesh> clip = simulate(mesh, mp, wind, sim);

  fs::path dir = cfg.out_dir / "sim";
  fs::create_directories(dir);
  for (std::size_t i = 0; i < clip.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04zu.obj", i);
    write_obj(dir / name, clip[i]);
  }

  std::cout << "simulate material=" << cfg.material
            << " stiffness_scale=" << fmt6(mp.stiffness_scale)
            << " wind_speed=" << fmt6(wind.speed)
            << " area_weight=" << fmt6(mp.area_weight)
            << " frames=" << clip.size() << " vertices=" << mesh.vertex_count()
            << " faces=" << mesh.face_count() << " out=" << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gen-dataset

struct GenDatasetOpts {
  std::string material;
  std::string kind = "train";
  int combos = -1;
  int frames = -1;
  int cameras = -1;
  int workers = -1;
  std::string root;
  double stiffness_scale = 1.0;  // target-kind combination
  double wind = 3.5;
  double area_weight = -1.0;
};

int cmd_gen_dataset(const GlobalOpts& g, const GenDatasetOpts& o) {
  RunConfig cfg = g.resolve();
  if (!o.material.empty()) cfg.material = o.material;
  if (o.combos > 0) cfg.n_combos = o.combos;
  if (o.frames > 0) cfg.frames = o.frames;
  if (o.cameras > 0) cfg.cameras = o.cameras;
  if (o.workers > 0) cfg.workers = o.workers;

  fs::path root = o.root.empty() ? cfg.out_dir / ("dataset-" + o.kind) : fs::path(o.root);
  DatasetJob job = dataset_job(cfg, root, o.kind);

  std::vector<Combination> explicit_combos;
  if (o.kind == "target") {
    const MaterialSpec& spec = find_material(cfg.material);
    Combination c;
    c.id = 0;
    c.stiffness_scale = o.stiffness_scale;
    c.wind_speed = o.wind;
    c.area_weight = o.area_weight >= 0.0
                        ? o.area_weight
                        : 0.5 * (spec.area_weight_range[0] + spec.area_weight_range[1]);
    c.material = cfg.material;
    explicit_combos.push_back(c);
    job.n_combos = 1;
  }

  Manifest m = generate_dataset(job, explicit_combos);

  std::cout << "gen-dataset material=" << m.material << " kind=" << m.kind
            << " combos=" << m.combinations.size() << " frames=" << m.frames
            << " cameras=" << m.cameras << " image_size=" << m.image_size
            << " samples=" << m.samples.size() << " failed=" << m.failed.size()
            << " digest=" << m.digest
            << " manifest=" << (m.dir / "manifest.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string dataset;
  std::string net_out;
  int epochs = -1;
};

int cmd_train(const GlobalOpts& g, const TrainOpts& o) {
  RunConfig cfg = g.resolve();
  if (o.epochs > 0) cfg.net.epochs = o.epochs;

  Manifest m = read_manifest(o.dataset);
  TrainResult result = train(cfg.net, m);

  fs::create_directories(cfg.out_dir);
  fs::path net_path = o.net_out.empty() ? cfg.out_dir / "net.fsnp" : fs::path(o.net_out);
  save_net(net_path, result.params);

  ordered_json hist;
  hist["config_digest"] = hex64(run_config_digest(cfg));
  hist["net_digest"] = hex64(net_config_digest(cfg.net));
  hist["dataset_digest"] = m.digest;
  hist["epochs"] = cfg.net.epochs;
  hist["loss_history"] = result.loss_history;
  write_text(cfg.out_dir / "train_history.json", hist.dump(1) + "\n");

  const double final_loss =
      result.loss_history.empty() ? 0.0 : result.loss_history.back();
  std::cout << "train dataset=" << o.dataset << " samples=" << m.samples.size()
            << " epochs=" << cfg.net.epochs
            << " lr_epoch0=" << fmt6(lr_at_epoch(cfg.net, 0))
            << " lr_epoch" << cfg.net.lr_step << "="
            << fmt6(lr_at_epoch(cfg.net, cfg.net.lr_step))
            << " final_loss=" << fmt6(final_loss)
            << " net=" << net_path.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
  std::string dataset;
  std::string net;
  std::string report;
};

int cmd_eval(const GlobalOpts& g, const EvalOpts& o) {
  RunConfig cfg = g.resolve();
  Manifest m = read_manifest(o.dataset);
  if (m.image_size != cfg.net.input_size)
    throw InvalidInputError("eval: dataset image size " + std::to_string(m.image_size) +
                            " does not match net input " +
                            std::to_string(cfg.net.input_size));
  NetParams net = load_net(o.net, cfg.net);

  // Embed every frame of the camera that training held out, one labeled
  // point per image, so the report measures generalization to a new view.
  const int held_out = m.cameras >= 2 ? m.cameras - 1 : 0;
  std::vector<LabeledPoint> points;
  for (const SampleRef& s : m.samples) {
    if (s.camera != held_out) continue;
    Eigen::MatrixXd img = load_normalized_image(m, s, cfg.net);
    points.push_back({forward(net, img), s.combo});
  }

  EvalReport report = clustering_accuracy(points, m.material);

  fs::create_directories(cfg.out_dir);
  fs::path report_path =
      o.report.empty() ? cfg.out_dir / "eval_report.json" : fs::path(o.report);
  ordered_json j = ordered_json::parse(eval_report_json(report));
  j["config_digest"] = hex64(run_config_digest(cfg));
  write_text(report_path, j.dump(1) + "\n");

  std::cout << eval_report_table(report);
  std::cout << "eval dataset=" << o.dataset << " net=" << o.net
            << " camera=" << held_out << " samples=" << report.n_samples
            << " labels=" << report.label_ids.size()
            << " accuracy=" << fmt6(report.accuracy)
            << " report=" << report_path.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateOpts {
  std::string target;
  std::string net;
  int budget = -1;
  std::string trace;
  std::string result;
};

int cmd_estimate(const GlobalOpts& g, const EstimateOpts& o) {
  RunConfig cfg = g.resolve();
  Manifest m = read_manifest(o.target);
  if (m.samples.empty()) throw InvalidInputError("estimate: target manifest has no samples");
  if (m.image_size != cfg.net.input_size)
    throw InvalidInputError("estimate: target image size " + std::to_string(m.image_size) +
                            " does not match net input " +
                            std::to_string(cfg.net.input_size));

  fs::create_directories(cfg.out_dir);

  EstimateJob job;
  job.material = m.material;
  job.net = load_net(o.net, cfg.net);
  job.budget = o.budget > 0 ? o.budget : cfg.bo.budget;
  job.failure_penalty = cfg.bo.failure_penalty;
  job.seed = cfg.seed;
  job.grid_n = cfg.grid_n;
  job.cloth_size = cfg.cloth_size;
  job.pinned = cfg.pinned;
  job.sim = cfg.sim;
  job.base = cfg.base;
  job.wind_base = cfg.wind_base;
  job.image_size = m.image_size;
  job.gp = cfg.gp;
  job.trace_path =
      o.trace.empty() ? cfg.out_dir / "estimate_trace.jsonl" : fs::path(o.trace);

  // The target clip: first combination, camera 0, frames in manifest order.
  const int combo = m.combinations.empty() ? 0 : m.combinations.front().id;
  std::string first_path;
  for (const SampleRef& s : m.samples) {
    if (s.combo != combo || s.camera != 0) continue;
    if (first_path.empty()) first_path = s.path;
    job.target_frames.push_back(
        read_d256(m.dir / s.path, m.image_size, m.image_size));
  }
  if (job.target_frames.empty())
    throw InvalidInputError("estimate: target manifest has no camera-0 clip");
  fs::path sidecar = m.dir / first_path;
  sidecar.replace_extension(".json");
  DepthFrame pose_probe;
  read_depth_sidecar(sidecar, pose_probe);
  job.camera = pose_probe.camera;

  EstimateResult r = estimate(job);

  fs::path result_path =
      o.result.empty() ? cfg.out_dir / "estimate_result.json" : fs::path(o.result);
  ordered_json j;
  j["config_digest"] = hex64(run_config_digest(cfg));
  j["material"] = m.material;
  j["target"] = o.target;
  j["iterations"] = r.trace.iterations.size();
  j["stop_reason"] = r.trace.stop_reason;
  j["stiffness_scale"] = r.params.stiffness_scale;
  j["wind_speed"] = r.params.wind_speed;
  j["area_weight"] = r.params.area_weight;
  j["objective"] = r.objective;
  j["target_embedding"] = {r.target_embedding.x, r.target_embedding.y};
  write_text(result_path, j.dump(1) + "\n");

  std::cout << "estimate target=" << o.target
            << " iterations=" << r.trace.iterations.size()
            << " stop_reason=" << r.trace.stop_reason
            << " stiffness_scale=" << fmt6(r.params.stiffness_scale)
            << " wind_speed=" << fmt6(r.params.wind_speed)
            << " area_weight=" << fmt6(r.params.area_weight)
            << " objective=" << fmt6(r.objective)
            << " result=" << result_path.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// plot-stiffness

struct PlotOpts {
  std::string result;
  double scale = 0.0;
  bool scale_set = false;
  std::string csv;
  std::string svg;
};

std::string stiffness_csv(const Eigen::Matrix<double, 3, 5>& m) {
  std::string out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 5; ++c) {
      out += fmt(m(r, c));
      out += c + 1 < 5 ? "," : "\n";
    }
  }
  return out;
}

std::string stiffness_svg(const Eigen::Matrix<double, 3, 5>& m, double scale,
                          const std::array<double, 2>& curvature_range,
                          std::uint64_t digest) {
  static const std::array<double, 3> kAngles{0.0, 45.0, 90.0};
  const double lo = m.minCoeff(), hi = m.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;

  const int cell = 90, left = 110, top = 60, bottom = 70;
  const int width = left + 5 * cell + 30, height = top + 3 * cell + bottom;
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
       "\" height=\"" + std::to_string(height) + "\" font-family=\"sans-serif\">\n";
  s += "<!-- config digest " + hex64(digest) + " -->\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + std::to_string(width / 2) + "\" y=\"28\" text-anchor=\"middle\" "
       "font-size=\"16\">Bending stiffness (N·m), scale " + fmt6(scale) + "</text>\n";
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 5; ++c) {
      const double t = (m(r, c) - lo) / span;  // 0 light -> 1 dark
      const int red = static_cast<int>(245 - 190 * t);
      const int green = static_cast<int>(247 - 130 * t);
      const int x = left + c * cell, y = top + r * cell;
      s += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
           "\" width=\"" + std::to_string(cell) + "\" height=\"" + std::to_string(cell) +
           "\" fill=\"rgb(" + std::to_string(red) + "," + std::to_string(green) +
           ",250)\" stroke=\"#444\"/>\n";
      s += "<text x=\"" + std::to_string(x + cell / 2) + "\" y=\"" +
           std::to_string(y + cell / 2 + 5) + "\" text-anchor=\"middle\" font-size=\"12\">" +
           fmt6(m(r, c)) + "</text>\n";
    }
  }
  for (int r = 0; r < 3; ++r)
    s += "<text x=\"" + std::to_string(left - 10) + "\" y=\"" +
         std::to_string(top + r * cell + cell / 2 + 5) +
         "\" text-anchor=\"end\" font-size=\"13\">" + fmt6(kAngles[r]) + "°</text>\n";
  for (int c = 0; c < 5; ++c) {
    const double curv =
        curvature_range[0] + c * (curvature_range[1] - curvature_range[0]) / 4.0;
    s += "<text x=\"" + std::to_string(left + c * cell + cell / 2) + "\" y=\"" +
         std::to_string(top + 3 * cell + 24) +
         "\" text-anchor=\"middle\" font-size=\"13\">" + fmt6(curv) + "</text>\n";
  }
  s += "<text x=\"" + std::to_string(left + 5 * cell / 2) + "\" y=\"" +
       std::to_string(height - 20) + "\" text-anchor=\"middle\" font-size=\"14\">"
       "curvature (1/m)</text>\n";
  s += "<text x=\"26\" y=\"" + std::to_string(top + 3 * cell / 2) +
       "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 26 " +
       std::to_string(top + 3 * cell / 2) + ")\">bend angle (deg)</text>\n";
  s += "</svg>\n";
  return s;
}

int cmd_plot_stiffness(const GlobalOpts& g, const PlotOpts& o) {
  RunConfig cfg = g.resolve();

  double scale = o.scale;
  if (!o.scale_set) {
    if (o.result.empty())
      throw InvalidInputError("plot-stiffness: pass --result or --scale");
    std::ifstream in(o.result);
    if (!in) throw IoError("plot-stiffness: cannot read " + o.result);
    nlohmann::json j;
    try {
      in >> j;
      scale = j.at("stiffness_scale").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError("plot-stiffness: bad estimate result " + o.result + ": " + e.what());
    }
  }

  const Eigen::Matrix<double, 3, 5> effective = scale * cfg.base.bend_matrix;

  fs::create_directories(cfg.out_dir);
  fs::path csv_path = o.csv.empty() ? cfg.out_dir / "stiffness.csv" : fs::path(o.csv);
  fs::path svg_path = o.svg.empty() ? cfg.out_dir / "stiffness.svg" : fs::path(o.svg);
  write_text(csv_path, stiffness_csv(effective));
  write_text(svg_path, stiffness_svg(effective, scale, cfg.base.curvature_range,
                                     run_config_digest(cfg)));

  std::cout << "plot-stiffness scale=" << fmt6(scale) << " rows=3 cols=5 csv="
            << csv_path.string() << " svg=" << svg_path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fabsim: cloth simulation, depth rendering, physics-similarity "
               "embedding and parameter estimation"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "JSON run configuration")
      ->envname("FABSIM_CONFIG");
  auto* seed_opt = app.add_option("--seed", g.seed, "override the configured seed");
  app.add_option("--out", g.out_dir, "override the configured output directory");

  SimulateOpts so;
  auto* sim_cmd = app.add_subcommand("simulate", "run one cloth clip, write OBJ frames");
  sim_cmd->add_option("--stiffness-scale", so.stiffness_scale, "bend stiffness multiplier");
  sim_cmd->add_option("--wind", so.wind, "wind speed, m/s");
  sim_cmd->add_option("--area-weight", so.area_weight, "area weight, kg/m^2");
  sim_cmd->add_option("--frames", so.frames, "snapshots to emit");

  GenDatasetOpts go;
  auto* gen_cmd = app.add_subcommand("gen-dataset", "simulate + render a labeled corpus");
  gen_cmd->add_option("--material", go.material, "material name");
  gen_cmd->add_option("--kind", go.kind, "corpus kind")
      ->check(CLI::IsMember({"train", "target"}));
  gen_cmd->add_option("--combos", go.combos, "parameter combinations");
  gen_cmd->add_option("--frames", go.frames, "frames per combination");
  gen_cmd->add_option("--cameras", go.cameras, "camera poses per combination");
  gen_cmd->add_option("--workers", go.workers, "worker threads");
  gen_cmd->add_option("--root", go.root, "corpus root directory");
  gen_cmd->add_option("--stiffness-scale", go.stiffness_scale,
                      "target-kind bend stiffness multiplier");
  gen_cmd->add_option("--wind", go.wind, "target-kind wind speed, m/s");
  gen_cmd->add_option("--area-weight", go.area_weight, "target-kind area weight, kg/m^2");

  TrainOpts to;
  auto* train_cmd = app.add_subcommand("train", "fit the embedding net with triplet loss");
  train_cmd->add_option("--dataset", to.dataset, "training manifest path")->required();
  train_cmd->add_option("--net-out", to.net_out, "output net file");
  train_cmd->add_option("--epochs", to.epochs, "training epochs");

  EvalOpts eo;
  auto* eval_cmd = app.add_subcommand("eval", "held-out clustering accuracy of a net");
  eval_cmd->add_option("--dataset", eo.dataset, "manifest path")->required();
  eval_cmd->add_option("--net", eo.net, "net file")->required();
  eval_cmd->add_option("--report", eo.report, "output report path");

  EstimateOpts po;
  auto* est_cmd = app.add_subcommand("estimate", "recover physics parameters for a target");
  est_cmd->add_option("--target", po.target, "target manifest path")->required();
  est_cmd->add_option("--net", po.net, "net file")->required();
  est_cmd->add_option("--budget", po.budget, "max optimisation iterations");
  est_cmd->add_option("--trace", po.trace, "output trace path (JSON lines)");
  est_cmd->add_option("--result", po.result, "output result path");

  PlotOpts plo;
  auto* plot_cmd =
      app.add_subcommand("plot-stiffness", "effective 3x5 stiffness surface, CSV + SVG");
  plot_cmd->add_option("--result", plo.result, "estimate result JSON");
  auto* scale_opt = plot_cmd->add_option("--scale", plo.scale, "explicit stiffness scale");
  plot_cmd->add_option("--csv", plo.csv, "output CSV path");
  plot_cmd->add_option("--svg", plo.svg, "output SVG path");

  try {
    app.parse(argc, argv);
    g.seed_set = seed_opt->count() > 0;
    plo.scale_set = scale_opt->count() > 0;

    if (sim_cmd->parsed()) return cmd_simulate(g, so);
    if (gen_cmd->parsed()) return cmd_gen_dataset(g, go);
    if (train_cmd->parsed()) return cmd_train(g, to);
    if (eval_cmd->parsed()) return cmd_eval(g, eo);
    if (est_cmd->parsed()) return cmd_estimate(g, po);
    if (plot_cmd->parsed()) return cmd_plot_stiffness(g, plo);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
