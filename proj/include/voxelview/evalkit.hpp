#pragma once

#include <string>
#include <vector>

#include "voxelview/geometry.hpp"

namespace voxelview {

// Calibration map from predicted viewpoints to the ground-truth frame:
// either a proper rotation or a renormalized linear map.
struct AlignmentTransform {
  enum class Kind { rotation, linear };
  Kind kind = Kind::rotation;
  Mat3 rotation = Mat3::Identity();
  Mat3 weights = Mat3::Identity();  // kind == linear
  Vec3 bias = Vec3::Zero();

  static AlignmentTransform identity() { return {}; }
  Viewpoint apply(const Viewpoint& v) const;
  std::string kind_name() const {
    return kind == Kind::rotation ? "rotation" : "linear";
  }
};

// Proper rotation minimizing sum |R pred_i - gt_i|^2 (SVD with reflection
// exclusion). Throws DegenerateCloud when the cross-covariance has rank
// below 2.
AlignmentTransform procrustes_align(const std::vector<Viewpoint>& preds,
                                    const std::vector<Viewpoint>& gts);

// Ridge least-squares fit of W pred + b to gt (lambda = 1e-6); applied
// predictions are renormalized to the sphere.
AlignmentTransform linear_align(const std::vector<Viewpoint>& preds,
                                const std::vector<Viewpoint>& gts);

enum class ErrorMetric { geodesic, azimuth_only };

struct BinStats {
  double bin_start_deg = 0.0;
  int count = 0;
  double accuracy = 0.0;
};

struct MetricsReport {
  double accuracy_at_30 = 0.0;
  double median_error_deg = 0.0;
  double dva = 0.0;               // mean accuracy over nonempty azimuth bins
  double confidence_index = 0.0;  // fraction of bins with count > min_bin
  std::vector<BinStats> per_bin;
  std::string alignment = "none";
  int n_samples = 0;
  ErrorMetric metric = ErrorMetric::geodesic;
  // Always reported alongside the primary metric for comparison.
  double accuracy_at_30_azimuth = 0.0;
  double median_azimuth_error_deg = 0.0;
};

// Applies the alignment, scores errors (geodesic by default, azimuth-only
// on request), and aggregates plain, binned, and debiased accuracies.
// Bins partition the ground-truth azimuth into ceil(360 / bin_width)
// intervals; the median is the lower median.
MetricsReport compute_metrics(const std::vector<Viewpoint>& preds,
                              const std::vector<Viewpoint>& gts,
                              const AlignmentTransform& alignment,
                              double bin_width_deg = 30.0, int min_bin = 10,
                              ErrorMetric metric = ErrorMetric::geodesic);

// Normalized mean of the validation viewpoints; the bias baseline.
// Throws DegenerateMean when the mean vector vanishes.
Viewpoint constant_predictor(const std::vector<Viewpoint>& validation_gts);

struct ScatterRow {
  double gt_azimuth_deg = 0.0;
  double pred_azimuth_deg = 0.0;
  int head = 0;
};

std::vector<ScatterRow> scatter_data(const std::vector<Viewpoint>& preds,
                                     const std::vector<Viewpoint>& gts,
                                     const std::vector<int>& heads);

void write_scatter_csv(const std::vector<ScatterRow>& rows, const std::string& path);

std::string metrics_to_json(const MetricsReport& report);
void write_metrics_report(const MetricsReport& report, const std::string& path);

}  // namespace voxelview
