// Experiment runner: deterministic dataset generation, pose recovery,
// self-supervised training, evaluation, and bias reports over the
// voxelview library. Exit codes: 0 success, 1 check failure, 2 usage
// error, 3 I/O error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "voxelview/dataset.hpp"
#include "voxelview/estimator.hpp"
#include "voxelview/evalkit.hpp"
#include "voxelview/gradcheck.hpp"
#include "voxelview/parallel.hpp"
#include "voxelview/renderer.hpp"
#include "voxelview/volume.hpp"

namespace fs = std::filesystem;
using namespace voxelview;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

CameraModel camera_from_distance(double distance) {
  return std::isinf(distance) ? CameraModel::orthographic()
                              : CameraModel::perspective(distance);
}

// Full experiment description consumed by `train`.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  int resolution = 32;
  double camera_distance = 2.5;
  std::string object = "car";
  int n_images = 500;
  double elev_min_deg = -20.0;
  double elev_max_deg = 40.0;
  int heads = 3;
  int epochs = 200;
  double learning_rate = 0.05;
  double cycle_weight = 0.0;
  std::string target_mode = "rgb";  // or "silhouette"
  std::string output_dir = ".";
  int hidden = 64;
  int feature_side = 16;
};

nlohmann::ordered_json experiment_to_json(const ExperimentConfig& c) {
  return {{"seed", c.seed},
          {"resolution", c.resolution},
          {"camera_distance", c.camera_distance},
          {"object", c.object},
          {"n_images", c.n_images},
          {"elev_min_deg", c.elev_min_deg},
          {"elev_max_deg", c.elev_max_deg},
          {"heads", c.heads},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"cycle_weight", c.cycle_weight},
          {"target_mode", c.target_mode},
          {"output_dir", c.output_dir},
          {"hidden", c.hidden},
          {"feature_side", c.feature_side}};
}

ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.seed = j.value("seed", c.seed);
  c.resolution = j.value("resolution", c.resolution);
  c.camera_distance = j.value("camera_distance", c.camera_distance);
  c.object = j.value("object", c.object);
  c.n_images = j.value("n_images", c.n_images);
  c.elev_min_deg = j.value("elev_min_deg", c.elev_min_deg);
  c.elev_max_deg = j.value("elev_max_deg", c.elev_max_deg);
  c.heads = j.value("heads", c.heads);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.cycle_weight = j.value("cycle_weight", c.cycle_weight);
  c.target_mode = j.value("target_mode", c.target_mode);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.hidden = j.value("hidden", c.hidden);
  c.feature_side = j.value("feature_side", c.feature_side);
  if (c.target_mode != "rgb" && c.target_mode != "silhouette") {
    throw ConfigError("target_mode must be rgb or silhouette");
  }
  if (c.n_images < 1) throw ConfigError("n_images must be >= 1");
  if (c.resolution < 16) throw ConfigError("resolution must be >= 16");
  return c;
}

ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw IoError(std::string("malformed config JSON: ") + e.what());
  }
  return experiment_from_json(doc);
}

std::string image_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img_%05zu.ppm", index);
  return buf;
}

// ---------------------------------------------------------------------------

struct GenObjectArgs {
  std::string kind = "car";
  int res = 32;
  std::string out;
  bool silhouette = false;
  double prior_sigma = 0.25;
  double prior_amplitude = 0.5;
};

int cmd_gen_object(const GenObjectArgs& args) {
  VoxelVolume volume;
  if (args.kind == "blob") {
    // Gaussian shape prior rendered as a gray object; sigma/amplitude in
    // half-extent units.
    const ScalarGrid prior =
        shape_prior(args.res, args.prior_sigma, args.prior_amplitude);
    volume = VoxelVolume::empty(args.res);
    volume.occupancy = prior.values;
    for (std::size_t c = 0; c < 3; ++c) {
      std::copy(prior.values.begin(), prior.values.end(),
                volume.colors.begin() + c * volume.n_voxels());
    }
  } else {
    volume = make_test_object(parse_object_kind(args.kind), args.res);
  }
  if (args.silhouette) volume = silhouette_of(volume);
  write_volume(volume, args.out);
  std::printf("wrote %s (%s, resolution %d)\n", args.out.c_str(), args.kind.c_str(),
              args.res);
  return kExitOk;
}

struct RenderDatasetArgs {
  std::string volume;
  int n = 100;
  std::uint64_t seed = 1;
  double elev_min = -20.0;
  double elev_max = 40.0;
  double camera_distance = 2.5;
  std::string out_dir;
  bool alpha = false;
};

int cmd_render_dataset(const RenderDatasetArgs& args) {
  if (args.n < 1) throw InvalidParam("--n must be >= 1");
  if (args.elev_min > args.elev_max) throw InvalidParam("empty elevation band");
  const VoxelVolume volume = read_volume(args.volume);
  const CameraModel camera = camera_from_distance(args.camera_distance);
  const Viewpoint up = default_up();

  Rng rng(args.seed);
  std::vector<Viewpoint> views;
  views.reserve(args.n);
  for (int i = 0; i < args.n; ++i) {
    views.push_back(sample_band_viewpoint(rng, args.elev_min, args.elev_max));
  }

  fs::create_directories(args.out_dir);
  std::vector<RenderedImage> images(args.n);
  parallel_for(args.n, [&](std::size_t i) {
    images[i] = render(volume, vector_to_rotation(views[i], up), camera);
  });

  DatasetManifest manifest;
  manifest.volume = args.volume;
  manifest.camera_distance = args.camera_distance;
  for (int i = 0; i < args.n; ++i) {
    const std::string name = image_name(i);
    write_ppm(images[i], (fs::path(args.out_dir) / name).string());
    if (args.alpha) {
      fs::path alpha_name = fs::path(name);
      alpha_name.replace_extension(".alpha.pgm");
      write_pgm_alpha(images[i], (fs::path(args.out_dir) / alpha_name).string());
    }
    manifest.items.push_back({name, views[i].azimuth() * 180.0 / M_PI,
                              views[i].elevation() * 180.0 / M_PI});
  }
  write_manifest(manifest, (fs::path(args.out_dir) / "manifest.json").string());
  std::printf("wrote %d images + manifest to %s\n", args.n, args.out_dir.c_str());
  return kExitOk;
}

struct RecoverArgs {
  std::string volume;  // optional; defaults to the manifest entry
  std::string dataset;
  int starts = 8;
  std::string report;
  std::string scatter;
};

int cmd_recover(const RecoverArgs& args) {
  if (args.starts < 1) throw InvalidParam("--starts must be >= 1");
  const fs::path dataset_dir(args.dataset);
  const DatasetManifest manifest =
      read_manifest((dataset_dir / "manifest.json").string());
  std::string volume_path = args.volume;
  if (volume_path.empty()) {
    const fs::path from_manifest(manifest.volume);
    volume_path = from_manifest.is_absolute()
                      ? from_manifest.string()
                      : fs::absolute(dataset_dir / from_manifest).string();
    if (!fs::exists(volume_path)) volume_path = manifest.volume;
  }
  const VoxelVolume volume = read_volume(volume_path);
  const CameraModel camera = camera_from_distance(manifest.camera_distance);

  const std::size_t n = manifest.items.size();
  if (n == 0) throw IoError("dataset manifest lists no items");
  std::vector<RenderedImage> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    targets[i] = read_ppm((dataset_dir / manifest.items[i].image).string());
  }

  std::vector<Viewpoint> preds(n), gts(n);
  parallel_for(n, [&](std::size_t i) {
    preds[i] = estimate_by_optimization(targets[i], volume, camera, args.starts).first;
    gts[i] = manifest.viewpoint(i);
  });

  const MetricsReport report =
      compute_metrics(preds, gts, AlignmentTransform::identity());
  write_metrics_report(report, args.report);
  const std::string scatter_path =
      args.scatter.empty() ? args.report + ".scatter.csv" : args.scatter;
  write_scatter_csv(scatter_data(preds, gts, {}), scatter_path);
  std::printf("recover: accuracy@30 %.3f median %.2f deg over %d targets\n",
              report.accuracy_at_30, report.median_error_deg, report.n_samples);
  return kExitOk;
}

struct TrainArgs {
  std::string config;
  std::string out;
  std::string loss_curve;
};

int cmd_train(const TrainArgs& args) {
  const ExperimentConfig exp = load_experiment(args.config);
  const VoxelVolume object = make_test_object(parse_object_kind(exp.object),
                                              exp.resolution);
  const VoxelVolume target_volume =
      exp.target_mode == "silhouette" ? silhouette_of(object) : object;
  const CameraModel camera = camera_from_distance(exp.camera_distance);
  const Viewpoint up = default_up();

  Rng rng(exp.seed);
  std::vector<TrainingSample> dataset;
  dataset.reserve(exp.n_images);
  for (int i = 0; i < exp.n_images; ++i) {
    const Viewpoint v = sample_band_viewpoint(rng, exp.elev_min_deg, exp.elev_max_deg);
    dataset.push_back(
        {render(target_volume, vector_to_rotation(v, up), camera), exp.object});
  }
  std::map<std::string, VoxelVolume> volumes;
  volumes.emplace(exp.object, target_volume);

  TrainConfig cfg;
  cfg.seed = exp.seed;
  cfg.heads = exp.heads;
  cfg.epochs = exp.epochs;
  cfg.learning_rate = exp.learning_rate;
  cfg.cycle_weight = exp.cycle_weight;
  cfg.elev_min_deg = exp.elev_min_deg;
  cfg.elev_max_deg = exp.elev_max_deg;
  cfg.camera_distance = exp.camera_distance;
  cfg.hidden = exp.hidden;
  cfg.feature_side = exp.feature_side;

  const TrainedEstimator estimator = train_multihead(dataset, volumes, cfg);

  std::string out_path = args.out;
  if (out_path.empty()) {
    fs::create_directories(exp.output_dir);
    out_path = (fs::path(exp.output_dir) / "model.json").string();
  }
  save_estimator(estimator, out_path);

  std::string curve_path = args.loss_curve;
  if (curve_path.empty()) {
    fs::path p(out_path);
    p.replace_extension(".loss.csv");
    curve_path = p.string();
  }
  {
    std::ofstream out(curve_path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + curve_path);
    out << "epoch,recon_loss,selection_loss,cycle_loss\n";
    char buf[128];
    for (std::size_t e = 0; e < estimator.history.size(); ++e) {
      std::snprintf(buf, sizeof(buf), "%zu,%.9e,%.9e,%.9e\n", e,
                    estimator.history[e].recon_loss,
                    estimator.history[e].selection_loss,
                    estimator.history[e].cycle_loss);
      out << buf;
    }
  }
  std::printf("trained %d-head estimator on %d %s images; wrote %s\n", exp.heads,
              exp.n_images, exp.object.c_str(), out_path.c_str());
  return kExitOk;
}

struct EvaluateArgs {
  std::string model;
  std::string dataset;
  std::string align = "procrustes";
  std::string report;
  std::string scatter;
  int calib = 8;
  std::string metric = "geodesic";
};

int cmd_evaluate(const EvaluateArgs& args) {
  if (args.align != "procrustes" && args.align != "linear" && args.align != "none") {
    throw InvalidParam("--align must be procrustes, linear, or none");
  }
  if (args.metric != "geodesic" && args.metric != "azimuth") {
    throw InvalidParam("--metric must be geodesic or azimuth");
  }
  if (args.calib < 0) throw InvalidParam("--calib must be >= 0");
  const TrainedEstimator estimator = load_estimator(args.model);
  const fs::path dataset_dir(args.dataset);
  const DatasetManifest manifest =
      read_manifest((dataset_dir / "manifest.json").string());
  const std::size_t n = manifest.items.size();
  if (n == 0) throw IoError("dataset manifest lists no items");

  std::vector<Viewpoint> preds(n), gts(n);
  std::vector<int> heads(n);
  for (std::size_t i = 0; i < n; ++i) {
    const RenderedImage image =
        read_ppm((dataset_dir / manifest.items[i].image).string());
    const auto [v, head] = predict_with_head(estimator, image);
    preds[i] = v;
    heads[i] = head;
    gts[i] = manifest.viewpoint(i);
  }

  // Fit the alignment on the leading calibration batch, score the rest.
  std::size_t calib = std::min<std::size_t>(args.calib, n);
  AlignmentTransform alignment = AlignmentTransform::identity();
  if (args.align != "none") {
    if (calib < 4) throw InvalidParam("calibration batch too small for alignment");
    const std::vector<Viewpoint> cp(preds.begin(), preds.begin() + calib);
    const std::vector<Viewpoint> cg(gts.begin(), gts.begin() + calib);
    alignment = args.align == "procrustes" ? procrustes_align(cp, cg)
                                           : linear_align(cp, cg);
  }
  std::vector<Viewpoint> eval_preds(preds.begin() + calib, preds.end());
  std::vector<Viewpoint> eval_gts(gts.begin() + calib, gts.end());
  std::vector<int> eval_heads(heads.begin() + calib, heads.end());
  if (eval_preds.empty()) {  // degenerate tiny dataset: score everything
    eval_preds = preds;
    eval_gts = gts;
    eval_heads = heads;
  }
  MetricsReport report = compute_metrics(
      eval_preds, eval_gts, alignment, 30.0, 10,
      args.metric == "geodesic" ? ErrorMetric::geodesic : ErrorMetric::azimuth_only);
  if (args.align == "none") report.alignment = "none";
  write_metrics_report(report, args.report);

  std::vector<Viewpoint> aligned;
  aligned.reserve(eval_preds.size());
  for (const Viewpoint& p : eval_preds) aligned.push_back(alignment.apply(p));
  const std::string scatter_path =
      args.scatter.empty() ? args.report + ".scatter.csv" : args.scatter;
  write_scatter_csv(scatter_data(aligned, eval_gts, eval_heads), scatter_path);
  std::printf("evaluate: accuracy@30 %.3f median %.2f deg dva %.3f ci %.2f (%s)\n",
              report.accuracy_at_30, report.median_error_deg, report.dva,
              report.confidence_index, report.alignment.c_str());
  return kExitOk;
}

struct BiasArgs {
  std::string gts;
  std::string report;
  int calib = 8;
};

std::vector<Viewpoint> load_gts_any(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
    return read_pose_csv(path);
  }
  // Either a dataset manifest or a bare pose array.
  std::ifstream probe(path);
  if (!probe) throw IoError("cannot open: " + path);
  nlohmann::json doc;
  try {
    probe >> doc;
  } catch (const std::exception& e) {
    throw IoError(std::string("malformed JSON: ") + e.what());
  }
  if (doc.is_array()) return read_pose_json(path);
  std::vector<Viewpoint> gts;
  const DatasetManifest manifest = read_manifest(path);
  for (std::size_t i = 0; i < manifest.items.size(); ++i) {
    gts.push_back(manifest.viewpoint(i));
  }
  return gts;
}

int cmd_bias_report(const BiasArgs& args) {
  if (args.calib < 1) throw InvalidParam("--calib must be >= 1");
  const std::vector<Viewpoint> gts = load_gts_any(args.gts);
  if (gts.empty()) throw IoError("no ground-truth viewpoints in " + args.gts);

  const std::size_t calib = std::min<std::size_t>(args.calib, gts.size());
  const std::vector<Viewpoint> calib_set(gts.begin(), gts.begin() + calib);
  std::vector<Viewpoint> eval_set(gts.begin() + calib, gts.end());
  if (eval_set.empty()) eval_set = gts;  // tiny input: score the whole set

  nlohmann::ordered_json doc;
  try {
    const Viewpoint constant = constant_predictor(calib_set);
    const std::vector<Viewpoint> preds(eval_set.size(), constant);
    const MetricsReport report =
        compute_metrics(preds, eval_set, AlignmentTransform::identity());
    doc = nlohmann::ordered_json::parse(metrics_to_json(report));
    doc["degenerate_mean"] = false;
    doc["constant_azimuth_deg"] = constant.azimuth() * 180.0 / M_PI;
    doc["constant_elevation_deg"] = constant.elevation() * 180.0 / M_PI;
  } catch (const DegenerateMean&) {
    doc["degenerate_mean"] = true;
    doc["n_samples"] = static_cast<int>(eval_set.size());
  }
  std::ofstream out(args.report, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + args.report);
  out << doc.dump(2) << "\n";
  if (doc["degenerate_mean"].get<bool>()) {
    std::printf("bias-report: calibration mean is degenerate (report written)\n");
  } else {
    std::printf("bias-report: accuracy@30 %.3f dva %.3f ci %.2f\n",
                doc["accuracy_at_30"].get<double>(), doc["dva"].get<double>(),
                doc["confidence_index"].get<double>());
  }
  return kExitOk;
}

struct GradcheckArgs {
  int res = 32;
  int trials = 50;
  std::uint64_t seed = 1;
  double tol = 1e-3;
};

int cmd_gradcheck(const GradcheckArgs& args) {
  const GradCheckResult result =
      gradcheck(args.res, args.trials, args.seed, args.tol, /*verbose=*/true);
  std::printf("gradcheck: %d/%d trials passed, worst relative error %.3e\n",
              result.trials - result.failures, result.trials, result.worst_rel_error);
  return result.pass() ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxelview: differentiable occupancy-volume rendering and "
               "self-supervised viewpoint estimation"};
  app.require_subcommand(1);
  std::function<int()> run;

  GenObjectArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-object", "write a procedural VXV1 volume");
  gen_cmd->add_option("--kind", gen.kind, "car|chair|plane|cube|blob")->required();
  gen_cmd->add_option("--res", gen.res, "grid resolution")->required();
  gen_cmd->add_option("--out", gen.out, "output .vxv path")->required();
  gen_cmd->add_flag("--silhouette", gen.silhouette, "whiten colors (mask volume)");
  gen_cmd->add_option("--prior-sigma", gen.prior_sigma, "blob sigma, half-extents");
  gen_cmd->add_option("--prior-amplitude", gen.prior_amplitude, "blob peak occupancy");
  gen_cmd->callback([&] { run = [&] { return cmd_gen_object(gen); }; });

  RenderDatasetArgs rd;
  CLI::App* rd_cmd =
      app.add_subcommand("render-dataset", "render views with a ground-truth manifest");
  rd_cmd->add_option("--volume", rd.volume, "VXV1 volume path")->required();
  rd_cmd->add_option("--n", rd.n, "number of images")->required();
  rd_cmd->add_option("--seed", rd.seed, "RNG seed");
  rd_cmd->add_option("--elev-min", rd.elev_min, "band lower edge, degrees");
  rd_cmd->add_option("--elev-max", rd.elev_max, "band upper edge, degrees");
  rd_cmd->add_option("--camera-distance", rd.camera_distance,
                     "half-extent units; inf = orthographic");
  rd_cmd->add_option("--out-dir", rd.out_dir, "output directory")->required();
  rd_cmd->add_flag("--alpha", rd.alpha, "also write PGM alpha images");
  rd_cmd->callback([&] { run = [&] { return cmd_render_dataset(rd); }; });

  RecoverArgs rc;
  CLI::App* rc_cmd =
      app.add_subcommand("recover", "viewpoint recovery by multi-start descent");
  rc_cmd->add_option("--volume", rc.volume, "VXV1 volume (default: manifest entry)");
  rc_cmd->add_option("--dataset", rc.dataset, "dataset directory")->required();
  rc_cmd->add_option("--starts", rc.starts, "descent starts per image");
  rc_cmd->add_option("--report", rc.report, "metrics JSON path")->required();
  rc_cmd->add_option("--scatter", rc.scatter, "scatter CSV path");
  rc_cmd->callback([&] { run = [&] { return cmd_recover(rc); }; });

  TrainArgs tr;
  CLI::App* tr_cmd =
      app.add_subcommand("train", "self-supervised multi-head training");
  tr_cmd->add_option("--config", tr.config, "experiment config JSON")->required();
  tr_cmd->add_option("--out", tr.out, "model JSON path");
  tr_cmd->add_option("--loss-curve", tr.loss_curve, "loss curve CSV path");
  tr_cmd->callback([&] { run = [&] { return cmd_train(tr); }; });

  EvaluateArgs ev;
  CLI::App* ev_cmd = app.add_subcommand("evaluate", "score a trained estimator");
  ev_cmd->add_option("--model", ev.model, "model JSON")->required();
  ev_cmd->add_option("--dataset", ev.dataset, "dataset directory")->required();
  ev_cmd->add_option("--align", ev.align, "procrustes|linear|none");
  ev_cmd->add_option("--report", ev.report, "metrics JSON path")->required();
  ev_cmd->add_option("--scatter", ev.scatter, "scatter CSV path");
  ev_cmd->add_option("--calib", ev.calib, "calibration batch size");
  ev_cmd->add_option("--metric", ev.metric, "geodesic|azimuth");
  ev_cmd->callback([&] { run = [&] { return cmd_evaluate(ev); }; });

  BiasArgs bias;
  CLI::App* bias_cmd =
      app.add_subcommand("bias-report", "constant-predictor bias demonstration");
  bias_cmd->add_option("--gts", bias.gts, "manifest JSON, pose CSV, or pose JSON")
      ->required();
  bias_cmd->add_option("--report", bias.report, "report JSON path")->required();
  bias_cmd->add_option("--calib", bias.calib, "calibration split size");
  bias_cmd->callback([&] { run = [&] { return cmd_bias_report(bias); }; });

  GradcheckArgs gc;
  CLI::App* gc_cmd =
      app.add_subcommand("gradcheck", "finite-difference check of the renderer gradient");
  gc_cmd->add_option("--res", gc.res, "volume resolution");
  gc_cmd->add_option("--trials", gc.trials, "random configurations");
  gc_cmd->add_option("--seed", gc.seed, "RNG seed");
  gc_cmd->add_option("--tol", gc.tol, "relative error tolerance");
  gc_cmd->callback([&] { run = [&] { return cmd_gradcheck(gc); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return run();
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
