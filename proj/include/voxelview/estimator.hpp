#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "voxelview/geometry.hpp"
#include "voxelview/renderer.hpp"
#include "voxelview/rng.hpp"

namespace voxelview {

// Uniform viewpoint on the azimuth circle and the given elevation band
// (uniform in sin-elevation, so uniform in sphere area).
Viewpoint sample_band_viewpoint(Rng& rng, double elev_min_deg, double elev_max_deg);

// Deterministic, roughly even sphere covering; start seeds for recovery.
std::vector<Viewpoint> fibonacci_sphere(int count);

struct OptimizerConfig {
  int max_iters = 60;
  double step0 = 1.0;
  int max_backtracks = 20;
  double grad_tol = 1e-8;
  double loss_tol = 1e-12;
  double min_improvement = 1e-14;
};

struct HypothesisSet {
  std::vector<Viewpoint> hypotheses;
  std::vector<double> recon_errors;
  int selected = 0;
};

// Renders every hypothesis against the target and selects the argmin
// reconstruction error, lowest index on ties.
HypothesisSet select_best_head(const std::vector<Viewpoint>& hypotheses,
                               const VoxelVolume& volume, const CameraModel& camera,
                               const RenderedImage& target);

// Multi-start projected gradient descent on the sphere with backtracking
// line search; accepted-step losses are non-increasing per start. Returns
// the lowest-loss viewpoint across starts (lowest start index on ties).
// The int overload seeds from the Fibonacci sphere.
std::pair<Viewpoint, double> estimate_by_optimization(const RenderedImage& target,
                                                      const VoxelVolume& volume,
                                                      const CameraModel& camera,
                                                      int starts,
                                                      const OptimizerConfig& cfg = {});
std::pair<Viewpoint, double> estimate_by_optimization(
    const RenderedImage& target, const VoxelVolume& volume, const CameraModel& camera,
    const std::vector<Viewpoint>& starts, const OptimizerConfig& cfg = {});

struct TrainConfig {
  std::uint64_t seed = 1;
  int heads = 3;
  int epochs = 100;
  double learning_rate = 0.05;
  double cycle_weight = 0.0;
  double elev_min_deg = -20.0;
  double elev_max_deg = 40.0;
  double camera_distance = 2.5;
  int hidden = 64;
  int feature_side = 16;
};

// One fully-connected layer pair with tanh hidden activation.
struct MlpHead {
  int in = 0, hidden = 0, out = 0;
  std::vector<double> w1, b1, w2, b2;
};

struct EpochStats {
  double recon_loss = 0.0;
  double selection_loss = 0.0;
  double cycle_loss = 0.0;
};

struct TrainedEstimator {
  TrainConfig config;
  std::vector<MlpHead> heads;  // out = 3, normalized to the sphere
  MlpHead selection;           // out = config.heads logits
  std::vector<EpochStats> history;
};

struct TrainingSample {
  RenderedImage image;
  std::string volume_id;
};

// Grayscale (rgb mean) box-averaged to side x side, centered at zero.
std::vector<double> image_features(const RenderedImage& image, int side);

// Head forward passes on an image: unit viewpoints and selection logits.
std::vector<Viewpoint> forward_heads(const TrainedEstimator& estimator,
                                     const RenderedImage& image);
std::vector<double> selection_logits(const TrainedEstimator& estimator,
                                     const RenderedImage& image);

// Self-supervised training: each sample routes its reconstruction gradient
// through the head with the lowest rendered error only; the selection head
// learns that choice by cross-entropy. Deterministic for a fixed config.
TrainedEstimator train_multihead(const std::vector<TrainingSample>& dataset,
                                 const std::map<std::string, VoxelVolume>& volumes,
                                 const TrainConfig& cfg);

// Untrained estimator with the training-time random initialization; the
// reference point for cycle-loss improvement measurements.
TrainedEstimator init_estimator(const TrainConfig& cfg);

// Selection-head argmax, no rendering or volume access.
Viewpoint predict(const TrainedEstimator& estimator, const RenderedImage& image);
std::pair<Viewpoint, int> predict_with_head(const TrainedEstimator& estimator,
                                            const RenderedImage& image);

// Renders the sampled viewpoint and returns the Euclidean distance between
// the selection-chosen head output on that image and the sampled viewpoint.
double cycle_loss(const TrainedEstimator& estimator, const VoxelVolume& volume,
                  const CameraModel& camera, const Viewpoint& sampled);

void save_estimator(const TrainedEstimator& estimator, const std::string& path);
TrainedEstimator load_estimator(const std::string& path);
std::string estimator_to_json(const TrainedEstimator& estimator);

}  // namespace voxelview
