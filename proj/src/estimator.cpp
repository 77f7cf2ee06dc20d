#include "voxelview/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

namespace voxelview {

Viewpoint sample_band_viewpoint(Rng& rng, double elev_min_deg, double elev_max_deg) {
  if (elev_min_deg > elev_max_deg) {
    throw InvalidParam("elevation band is empty");
  }
  const double lo = std::sin(elev_min_deg * M_PI / 180.0);
  const double hi = std::sin(elev_max_deg * M_PI / 180.0);
  const double azimuth = rng.uniform(0.0, 2.0 * M_PI);
  const double elevation = std::asin(rng.uniform(lo, hi));
  return euler_to_vector(azimuth, elevation);
}

std::vector<Viewpoint> fibonacci_sphere(int count) {
  if (count < 1) throw InvalidParam("fibonacci_sphere: count must be >= 1");
  std::vector<Viewpoint> points;
  points.reserve(count);
  const double golden_angle = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / count;
    const double radius = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double a = golden_angle * i;
    points.emplace_back(Vec3(radius * std::cos(a), radius * std::sin(a), z));
  }
  return points;
}

namespace {

double render_error(const VoxelVolume& volume, const Viewpoint& v,
                    const CameraModel& camera, const RenderedImage& target) {
  const Viewpoint safe = nudge_from_pole(v, default_up());
  const Mat3 r = vector_to_rotation(safe, default_up());
  return mse_rgb(render(volume, r, camera), target);
}

}  // namespace

HypothesisSet select_best_head(const std::vector<Viewpoint>& hypotheses,
                               const VoxelVolume& volume, const CameraModel& camera,
                               const RenderedImage& target) {
  if (hypotheses.empty()) throw EmptyHypotheses("select_best_head: no hypotheses");
  HypothesisSet set;
  set.hypotheses = hypotheses;
  set.recon_errors.reserve(hypotheses.size());
  for (const Viewpoint& h : hypotheses) {
    set.recon_errors.push_back(render_error(volume, h, camera, target));
  }
  set.selected = 0;
  for (std::size_t m = 1; m < set.recon_errors.size(); ++m) {
    if (set.recon_errors[m] < set.recon_errors[set.selected]) {
      set.selected = static_cast<int>(m);
    }
  }
  return set;
}

std::pair<Viewpoint, double> estimate_by_optimization(const RenderedImage& target,
                                                      const VoxelVolume& volume,
                                                      const CameraModel& camera,
                                                      int starts,
                                                      const OptimizerConfig& cfg) {
  if (starts < 1) throw InvalidParam("estimate_by_optimization: starts must be >= 1");
  return estimate_by_optimization(target, volume, camera, fibonacci_sphere(starts), cfg);
}

std::pair<Viewpoint, double> estimate_by_optimization(
    const RenderedImage& target, const VoxelVolume& volume, const CameraModel& camera,
    const std::vector<Viewpoint>& starts, const OptimizerConfig& cfg) {
  if (starts.empty()) throw InvalidParam("estimate_by_optimization: starts must be >= 1");
  const Viewpoint up = default_up();
  Viewpoint best_v;
  double best_loss = std::numeric_limits<double>::infinity();
  for (const Viewpoint& seed : starts) {
    Viewpoint v = nudge_from_pole(seed, up);
    LossGrad lg = render_loss_grad(volume, v, up, camera, target);
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
      if (lg.loss < cfg.loss_tol) break;
      if (lg.grad.norm() < cfg.grad_tol) break;
      double eta = cfg.step0;
      bool accepted = false;
      for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
        const Viewpoint trial =
            nudge_from_pole(Viewpoint::from_vector(v.v - eta * lg.grad), up);
        const double trial_loss = render_error(volume, trial, camera, target);
        if (trial_loss < lg.loss) {
          const double improvement = lg.loss - trial_loss;
          v = trial;
          lg = render_loss_grad(volume, v, up, camera, target);
          accepted = true;
          if (improvement < cfg.min_improvement) iter = cfg.max_iters;
          break;
        }
        eta *= 0.5;
      }
      if (!accepted) break;  // local minimum at the backtracking floor
    }
    if (lg.loss < best_loss) {
      best_loss = lg.loss;
      best_v = v;
    }
  }
  return {best_v, best_loss};
}

// ---------------------------------------------------------------------------
// Multi-head perceptron estimator.

std::vector<double> image_features(const RenderedImage& image, int side) {
  if (image.width < side || image.height < side) {
    throw InvalidParam("image smaller than the feature grid");
  }
  std::vector<double> features(static_cast<std::size_t>(side) * side, 0.0);
  std::vector<int> counts(features.size(), 0);
  const std::size_t npix = image.n_pixels();
  for (int r = 0; r < image.height; ++r) {
    const int br = r * side / image.height;
    for (int c = 0; c < image.width; ++c) {
      const int bc = c * side / image.width;
      const std::size_t pix = image.index(r, c);
      const double gray =
          (image.rgb[pix] + image.rgb[npix + pix] + image.rgb[2 * npix + pix]) / 3.0;
      features[static_cast<std::size_t>(br) * side + bc] += gray;
      counts[static_cast<std::size_t>(br) * side + bc] += 1;
    }
  }
  for (std::size_t i = 0; i < features.size(); ++i) {
    features[i] = features[i] / counts[i] - 0.5;
  }
  return features;
}

namespace {

struct HeadActivations {
  std::vector<double> hidden;  // tanh activations
  Vec3 raw = Vec3::Zero();     // pre-normalization output
  double raw_norm = 0.0;
  Viewpoint v;
};

MlpHead make_head(Rng& rng, int in, int hidden, int out, double output_bias_scale) {
  MlpHead h;
  h.in = in;
  h.hidden = hidden;
  h.out = out;
  h.w1.resize(static_cast<std::size_t>(hidden) * in);
  h.b1.assign(hidden, 0.0);
  h.w2.resize(static_cast<std::size_t>(out) * hidden);
  h.b2.resize(out);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (double& w : h.w1) w = rng.normal() * s1;
  for (double& w : h.w2) w = rng.normal() * s2;
  for (double& b : h.b2) b = rng.normal() * output_bias_scale;
  return h;
}

std::vector<double> layer_forward(const MlpHead& h, const std::vector<double>& x,
                                  std::vector<double>* hidden_out) {
  std::vector<double> hidden(h.hidden);
  for (int u = 0; u < h.hidden; ++u) {
    double acc = h.b1[u];
    const double* row = h.w1.data() + static_cast<std::size_t>(u) * h.in;
    for (int i = 0; i < h.in; ++i) acc += row[i] * x[i];
    hidden[u] = std::tanh(acc);
  }
  std::vector<double> out(h.out);
  for (int o = 0; o < h.out; ++o) {
    double acc = h.b2[o];
    const double* row = h.w2.data() + static_cast<std::size_t>(o) * h.hidden;
    for (int u = 0; u < h.hidden; ++u) acc += row[u] * hidden[u];
    out[o] = acc;
  }
  if (hidden_out) *hidden_out = std::move(hidden);
  return out;
}

HeadActivations head_forward(const MlpHead& h, const std::vector<double>& x) {
  HeadActivations act;
  const std::vector<double> out = layer_forward(h, x, &act.hidden);
  act.raw = Vec3(out[0], out[1], out[2]);
  act.raw_norm = std::max(act.raw.norm(), 1e-9);
  act.v = Viewpoint(act.raw / act.raw_norm);
  return act;
}

// Applies dL/d(output) through the layers; clips the full parameter
// gradient to unit norm before the fixed-size step.
void head_sgd_step(MlpHead& h, const std::vector<double>& x,
                   const std::vector<double>& hidden, const std::vector<double>& g_out,
                   double lr) {
  std::vector<double> g_w2(h.w2.size());
  std::vector<double> g_b2(g_out);
  std::vector<double> g_hidden(h.hidden, 0.0);
  for (int o = 0; o < h.out; ++o) {
    const std::size_t base = static_cast<std::size_t>(o) * h.hidden;
    for (int u = 0; u < h.hidden; ++u) {
      g_w2[base + u] = g_out[o] * hidden[u];
      g_hidden[u] += g_out[o] * h.w2[base + u];
    }
  }
  std::vector<double> g_b1(h.hidden);
  for (int u = 0; u < h.hidden; ++u) {
    g_b1[u] = g_hidden[u] * (1.0 - hidden[u] * hidden[u]);
  }
  std::vector<double> g_w1(h.w1.size());
  for (int u = 0; u < h.hidden; ++u) {
    const std::size_t base = static_cast<std::size_t>(u) * h.in;
    for (int i = 0; i < h.in; ++i) g_w1[base + i] = g_b1[u] * x[i];
  }
  double sq = 0.0;
  for (double g : g_w1) sq += g * g;
  for (double g : g_b1) sq += g * g;
  for (double g : g_w2) sq += g * g;
  for (double g : g_b2) sq += g * g;
  const double norm = std::sqrt(sq);
  const double scale = norm > 1.0 ? lr / norm : lr;
  for (std::size_t i = 0; i < h.w1.size(); ++i) h.w1[i] -= scale * g_w1[i];
  for (std::size_t i = 0; i < h.b1.size(); ++i) h.b1[i] -= scale * g_b1[i];
  for (std::size_t i = 0; i < h.w2.size(); ++i) h.w2[i] -= scale * g_w2[i];
  for (std::size_t i = 0; i < h.b2.size(); ++i) h.b2[i] -= scale * g_b2[i];
}

int argmax_index(const std::vector<double>& values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = static_cast<int>(i);
  }
  return best;
}

CameraModel camera_from_config(const TrainConfig& cfg) {
  return std::isinf(cfg.camera_distance) ? CameraModel::orthographic()
                                         : CameraModel::perspective(cfg.camera_distance);
}

void validate_config(const TrainConfig& cfg) {
  if (cfg.heads < 1) throw ConfigError("head count must be >= 1");
  if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (cfg.hidden < 1) throw ConfigError("hidden width must be >= 1");
  if (cfg.feature_side < 2) throw ConfigError("feature side must be >= 2");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (cfg.cycle_weight < 0.0) throw ConfigError("cycle weight must be >= 0");
  if (cfg.elev_min_deg > cfg.elev_max_deg) throw ConfigError("empty elevation band");
}

}  // namespace

TrainedEstimator init_estimator(const TrainConfig& cfg) {
  validate_config(cfg);
  Rng rng(cfg.seed);
  TrainedEstimator est;
  est.config = cfg;
  const int in = cfg.feature_side * cfg.feature_side;
  for (int m = 0; m < cfg.heads; ++m) {
    est.heads.push_back(make_head(rng, in, cfg.hidden, 3, 0.5));
  }
  est.selection = make_head(rng, in, cfg.hidden, cfg.heads, 0.0);
  return est;
}

std::vector<Viewpoint> forward_heads(const TrainedEstimator& estimator,
                                     const RenderedImage& image) {
  const std::vector<double> x = image_features(image, estimator.config.feature_side);
  std::vector<Viewpoint> out;
  out.reserve(estimator.heads.size());
  for (const MlpHead& h : estimator.heads) out.push_back(head_forward(h, x).v);
  return out;
}

std::vector<double> selection_logits(const TrainedEstimator& estimator,
                                     const RenderedImage& image) {
  const std::vector<double> x = image_features(image, estimator.config.feature_side);
  return layer_forward(estimator.selection, x, nullptr);
}

Viewpoint predict(const TrainedEstimator& estimator, const RenderedImage& image) {
  return predict_with_head(estimator, image).first;
}

std::pair<Viewpoint, int> predict_with_head(const TrainedEstimator& estimator,
                                            const RenderedImage& image) {
  const std::vector<double> x = image_features(image, estimator.config.feature_side);
  const std::vector<double> logits = layer_forward(estimator.selection, x, nullptr);
  const int chosen = argmax_index(logits);
  return {head_forward(estimator.heads[chosen], x).v, chosen};
}

double cycle_loss(const TrainedEstimator& estimator, const VoxelVolume& volume,
                  const CameraModel& camera, const Viewpoint& sampled) {
  const Viewpoint safe = nudge_from_pole(sampled, default_up());
  const Mat3 r = vector_to_rotation(safe, default_up());
  const RenderedImage image = render(volume, r, camera);
  const Viewpoint predicted = predict(estimator, image);
  return (predicted.v - sampled.v).norm();
}

TrainedEstimator train_multihead(const std::vector<TrainingSample>& dataset,
                                 const std::map<std::string, VoxelVolume>& volumes,
                                 const TrainConfig& cfg) {
  validate_config(cfg);
  if (dataset.empty()) throw ConfigError("training dataset is empty");
  for (const TrainingSample& s : dataset) {
    if (volumes.find(s.volume_id) == volumes.end()) {
      throw ConfigError("dataset references unknown volume id: " + s.volume_id);
    }
  }
  TrainedEstimator est = init_estimator(cfg);
  const CameraModel camera = camera_from_config(cfg);
  const Viewpoint up = default_up();
  Rng rng(cfg.seed ^ 0x5eed5eed5eed5eedULL);

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> features;
  std::vector<HeadActivations> acts(cfg.heads);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    EpochStats stats;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const TrainingSample& sample = dataset[order[pos]];
      const VoxelVolume& volume = volumes.at(sample.volume_id);
      features = image_features(sample.image, cfg.feature_side);

      for (int m = 0; m < cfg.heads; ++m) {
        acts[m] = head_forward(est.heads[m], features);
      }
      int winner = 0;
      double winner_error = std::numeric_limits<double>::infinity();
      for (int m = 0; m < cfg.heads; ++m) {
        const double err = render_error(volume, acts[m].v, camera, sample.image);
        if (err < winner_error) {
          winner_error = err;
          winner = m;
        }
      }

      // Reconstruction gradient through the winning head only.
      const Viewpoint safe = nudge_from_pole(acts[winner].v, up);
      const LossGrad lg = render_loss_grad(volume, safe, up, camera, sample.image);
      stats.recon_loss += lg.loss;
      {
        const Vec3 g_raw = lg.grad / acts[winner].raw_norm;  // grad is tangent
        const std::vector<double> g_out{g_raw.x(), g_raw.y(), g_raw.z()};
        head_sgd_step(est.heads[winner], features, acts[winner].hidden, g_out,
                      cfg.learning_rate);
      }

      // Selection head: cross-entropy toward one-hot(winner).
      {
        std::vector<double> sel_hidden;
        std::vector<double> logits = layer_forward(est.selection, features, &sel_hidden);
        double max_logit = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (double l : logits) z += std::exp(l - max_logit);
        std::vector<double> g_logits(logits.size());
        for (std::size_t m = 0; m < logits.size(); ++m) {
          const double p = std::exp(logits[m] - max_logit) / z;
          g_logits[m] = p - (static_cast<int>(m) == winner ? 1.0 : 0.0);
          if (static_cast<int>(m) == winner) {
            stats.selection_loss += -std::log(std::max(p, 1e-300));
          }
        }
        head_sgd_step(est.selection, features, sel_hidden, g_logits, cfg.learning_rate);
      }

      // Optional cycle step: render a sampled viewpoint and pull the
      // selection-chosen head toward it.
      if (cfg.cycle_weight > 0.0) {
        const Viewpoint sampled =
            sample_band_viewpoint(rng, cfg.elev_min_deg, cfg.elev_max_deg);
        const Mat3 r = vector_to_rotation(nudge_from_pole(sampled, up), up);
        const RenderedImage novel = render(volume, r, camera);
        const std::vector<double> novel_features =
            image_features(novel, cfg.feature_side);
        const std::vector<double> logits =
            layer_forward(est.selection, novel_features, nullptr);
        const int chosen = argmax_index(logits);
        const HeadActivations act = head_forward(est.heads[chosen], novel_features);
        const double dist = (act.v.v - sampled.v).norm();
        stats.cycle_loss += dist;
        if (dist > 1e-12) {
          const Vec3 dv = (act.v.v - sampled.v) / dist * cfg.cycle_weight;
          const Vec3 g_raw =
              (dv - act.v.v * act.v.v.dot(dv)) / act.raw_norm;  // through normalize
          const std::vector<double> g_out{g_raw.x(), g_raw.y(), g_raw.z()};
          head_sgd_step(est.heads[chosen], novel_features, act.hidden, g_out,
                        cfg.learning_rate);
        }
      }
    }
    const double inv_n = 1.0 / static_cast<double>(dataset.size());
    stats.recon_loss *= inv_n;
    stats.selection_loss *= inv_n;
    stats.cycle_loss *= inv_n;
    est.history.push_back(stats);
  }
  return est;
}

// ---------------------------------------------------------------------------
// JSON serialization.

namespace {

nlohmann::ordered_json head_to_json(const MlpHead& h) {
  return {{"in", h.in},     {"hidden", h.hidden}, {"out", h.out}, {"w1", h.w1},
          {"b1", h.b1},     {"w2", h.w2},         {"b2", h.b2}};
}

MlpHead head_from_json(const nlohmann::json& j) {
  MlpHead h;
  h.in = j.at("in").get<int>();
  h.hidden = j.at("hidden").get<int>();
  h.out = j.at("out").get<int>();
  h.w1 = j.at("w1").get<std::vector<double>>();
  h.b1 = j.at("b1").get<std::vector<double>>();
  h.w2 = j.at("w2").get<std::vector<double>>();
  h.b2 = j.at("b2").get<std::vector<double>>();
  const auto expect = [](std::size_t got, std::size_t want) {
    if (got != want) throw IoError("estimator JSON has inconsistent layer shapes");
  };
  expect(h.w1.size(), static_cast<std::size_t>(h.hidden) * h.in);
  expect(h.b1.size(), static_cast<std::size_t>(h.hidden));
  expect(h.w2.size(), static_cast<std::size_t>(h.out) * h.hidden);
  expect(h.b2.size(), static_cast<std::size_t>(h.out));
  return h;
}

nlohmann::ordered_json config_to_json(const TrainConfig& cfg) {
  return {{"seed", cfg.seed},
          {"heads", cfg.heads},
          {"epochs", cfg.epochs},
          {"learning_rate", cfg.learning_rate},
          {"cycle_weight", cfg.cycle_weight},
          {"elev_min_deg", cfg.elev_min_deg},
          {"elev_max_deg", cfg.elev_max_deg},
          {"camera_distance", cfg.camera_distance},
          {"hidden", cfg.hidden},
          {"feature_side", cfg.feature_side}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.heads = j.at("heads").get<int>();
  cfg.epochs = j.at("epochs").get<int>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.cycle_weight = j.at("cycle_weight").get<double>();
  cfg.elev_min_deg = j.at("elev_min_deg").get<double>();
  cfg.elev_max_deg = j.at("elev_max_deg").get<double>();
  cfg.camera_distance = j.at("camera_distance").get<double>();
  cfg.hidden = j.at("hidden").get<int>();
  cfg.feature_side = j.at("feature_side").get<int>();
  return cfg;
}

}  // namespace

std::string estimator_to_json(const TrainedEstimator& estimator) {
  nlohmann::ordered_json doc;
  doc["format"] = "voxelview-estimator-v1";
  doc["config"] = config_to_json(estimator.config);
  doc["selection"] = head_to_json(estimator.selection);
  nlohmann::ordered_json heads = nlohmann::ordered_json::array();
  for (const MlpHead& h : estimator.heads) heads.push_back(head_to_json(h));
  doc["heads"] = std::move(heads);
  nlohmann::ordered_json history = nlohmann::ordered_json::array();
  for (const EpochStats& s : estimator.history) {
    history.push_back({s.recon_loss, s.selection_loss, s.cycle_loss});
  }
  doc["history"] = std::move(history);
  return doc.dump(2) + "\n";
}

void save_estimator(const TrainedEstimator& estimator, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << estimator_to_json(estimator);
  if (!out) throw IoError("write failed: " + path);
}

TrainedEstimator load_estimator(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw IoError(std::string("malformed estimator JSON: ") + e.what());
  }
  if (doc.value("format", "") != "voxelview-estimator-v1") {
    throw BadMagic("not a voxelview estimator file: " + path);
  }
  TrainedEstimator est;
  est.config = config_from_json(doc.at("config"));
  est.selection = head_from_json(doc.at("selection"));
  for (const auto& h : doc.at("heads")) est.heads.push_back(head_from_json(h));
  if (static_cast<int>(est.heads.size()) != est.config.heads) {
    throw IoError("estimator JSON head count mismatch");
  }
  for (const auto& s : doc.at("history")) {
    est.history.push_back({s.at(0).get<double>(), s.at(1).get<double>(),
                           s.at(2).get<double>()});
  }
  return est;
}

}  // namespace voxelview
