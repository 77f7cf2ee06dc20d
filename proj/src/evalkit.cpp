#include "voxelview/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace voxelview {

Viewpoint AlignmentTransform::apply(const Viewpoint& v) const {
  if (kind == Kind::rotation) return Viewpoint(rotation * v.v);
  return Viewpoint::from_vector(weights * v.v + bias);
}

AlignmentTransform procrustes_align(const std::vector<Viewpoint>& preds,
                                    const std::vector<Viewpoint>& gts) {
  if (preds.size() != gts.size()) throw LengthMismatch("procrustes_align: length mismatch");
  if (preds.size() < 3) throw InvalidParam("procrustes_align: need at least 3 pairs");
  Mat3 cross = Mat3::Zero();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    cross += gts[i].v * preds[i].v.transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (sv(1) < 1e-9 * std::max(sv(0), 1e-30) || sv(0) < 1e-12) {
    throw DegenerateCloud("procrustes_align: cross-covariance rank below 2");
  }
  const double det = (svd.matrixU() * svd.matrixV().transpose()).determinant();
  Mat3 fix = Mat3::Identity();
  fix(2, 2) = det < 0.0 ? -1.0 : 1.0;
  AlignmentTransform t;
  t.kind = AlignmentTransform::Kind::rotation;
  t.rotation = svd.matrixU() * fix * svd.matrixV().transpose();
  return t;
}

AlignmentTransform linear_align(const std::vector<Viewpoint>& preds,
                                const std::vector<Viewpoint>& gts) {
  if (preds.size() != gts.size()) throw LengthMismatch("linear_align: length mismatch");
  if (preds.size() < 4) throw InvalidParam("linear_align: need at least 4 pairs");
  const double lambda = 1e-6;
  Eigen::Matrix4d normal = lambda * Eigen::Matrix4d::Identity();
  Eigen::Matrix<double, 4, 3> rhs = Eigen::Matrix<double, 4, 3>::Zero();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    Eigen::Vector4d x;
    x << preds[i].v, 1.0;
    normal += x * x.transpose();
    rhs += x * gts[i].v.transpose();
  }
  const Eigen::Matrix<double, 4, 3> theta = normal.ldlt().solve(rhs);
  AlignmentTransform t;
  t.kind = AlignmentTransform::Kind::linear;
  t.weights = theta.topRows<3>().transpose();
  t.bias = theta.row(3).transpose();
  return t;
}

namespace {

double to_deg(double rad) { return rad * 180.0 / M_PI; }

}  // namespace

MetricsReport compute_metrics(const std::vector<Viewpoint>& preds,
                              const std::vector<Viewpoint>& gts,
                              const AlignmentTransform& alignment,
                              double bin_width_deg, int min_bin, ErrorMetric metric) {
  if (preds.size() != gts.size()) throw LengthMismatch("compute_metrics: length mismatch");
  if (preds.empty()) throw InvalidParam("compute_metrics: need at least one sample");
  if (!(bin_width_deg > 0.0 && bin_width_deg <= 360.0)) {
    throw InvalidParam("compute_metrics: bin width must be in (0, 360]");
  }
  const Viewpoint up = default_up();
  const std::size_t n = preds.size();

  std::vector<double> err_deg(n), az_err_deg(n), gt_az_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Viewpoint aligned = alignment.apply(preds[i]);
    az_err_deg[i] = to_deg(azimuth_error(aligned.azimuth(), gts[i].azimuth()));
    err_deg[i] = to_deg(viewpoint_geodesic_error(aligned, gts[i], up));
    gt_az_deg[i] = to_deg(gts[i].azimuth());
  }
  const std::vector<double>& primary =
      metric == ErrorMetric::geodesic ? err_deg : az_err_deg;

  MetricsReport report;
  report.metric = metric;
  report.alignment = alignment.kind_name();
  report.n_samples = static_cast<int>(n);

  const auto lower_median = [](std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return values[(values.size() - 1) / 2];
  };
  const auto accuracy30 = [](const std::vector<double>& values) {
    std::size_t hits = 0;
    for (double e : values) hits += e <= 30.0 ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(values.size());
  };
  report.accuracy_at_30 = accuracy30(primary);
  report.median_error_deg = lower_median(primary);
  report.accuracy_at_30_azimuth = accuracy30(az_err_deg);
  report.median_azimuth_error_deg = lower_median(az_err_deg);

  const int n_bins = static_cast<int>(std::ceil(360.0 / bin_width_deg));
  std::vector<int> counts(n_bins, 0), hits(n_bins, 0);
  for (std::size_t i = 0; i < n; ++i) {
    int b = static_cast<int>(gt_az_deg[i] / bin_width_deg);
    b = std::clamp(b, 0, n_bins - 1);
    counts[b] += 1;
    hits[b] += primary[i] <= 30.0 ? 1 : 0;
  }
  double dva_sum = 0.0;
  int nonempty = 0, confident = 0;
  for (int b = 0; b < n_bins; ++b) {
    BinStats bs;
    bs.bin_start_deg = b * bin_width_deg;
    bs.count = counts[b];
    bs.accuracy = counts[b] > 0 ? static_cast<double>(hits[b]) / counts[b] : 0.0;
    report.per_bin.push_back(bs);
    if (counts[b] > 0) {
      dva_sum += bs.accuracy;
      nonempty += 1;
    }
    if (counts[b] > min_bin) confident += 1;
  }
  report.dva = nonempty > 0 ? dva_sum / nonempty : 0.0;
  report.confidence_index = static_cast<double>(confident) / n_bins;
  return report;
}

Viewpoint constant_predictor(const std::vector<Viewpoint>& validation_gts) {
  if (validation_gts.empty()) throw InvalidParam("constant_predictor: empty input");
  Vec3 mean = Vec3::Zero();
  for (const Viewpoint& v : validation_gts) mean += v.v;
  mean /= static_cast<double>(validation_gts.size());
  if (mean.norm() <= 1e-6) {
    throw DegenerateMean("constant_predictor: the mean viewpoint vanishes");
  }
  return Viewpoint(mean.normalized());
}

std::vector<ScatterRow> scatter_data(const std::vector<Viewpoint>& preds,
                                     const std::vector<Viewpoint>& gts,
                                     const std::vector<int>& heads) {
  if (preds.size() != gts.size() || (!heads.empty() && heads.size() != preds.size())) {
    throw LengthMismatch("scatter_data: length mismatch");
  }
  std::vector<ScatterRow> rows;
  rows.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    rows.push_back({to_deg(gts[i].azimuth()), to_deg(preds[i].azimuth()),
                    heads.empty() ? 0 : heads[i]});
  }
  return rows;
}

void write_scatter_csv(const std::vector<ScatterRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "gt_azimuth_deg,pred_azimuth_deg,head\n";
  char buf[96];
  for (const ScatterRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%d\n", r.gt_azimuth_deg,
                  r.pred_azimuth_deg, r.head);
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path);
}

std::string metrics_to_json(const MetricsReport& report) {
  nlohmann::ordered_json doc;
  doc["accuracy_at_30"] = report.accuracy_at_30;
  doc["median_error_deg"] = report.median_error_deg;
  doc["dva"] = report.dva;
  doc["confidence_index"] = report.confidence_index;
  doc["metric"] = report.metric == ErrorMetric::geodesic ? "geodesic" : "azimuth_only";
  doc["alignment"] = report.alignment;
  doc["n_samples"] = report.n_samples;
  doc["accuracy_at_30_azimuth"] = report.accuracy_at_30_azimuth;
  doc["median_azimuth_error_deg"] = report.median_azimuth_error_deg;
  nlohmann::ordered_json bins = nlohmann::ordered_json::array();
  for (const BinStats& b : report.per_bin) {
    bins.push_back({{"bin_start_deg", b.bin_start_deg},
                    {"count", b.count},
                    {"accuracy", b.accuracy}});
  }
  doc["per_bin"] = std::move(bins);
  return doc.dump(2) + "\n";
}

void write_metrics_report(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << metrics_to_json(report);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace voxelview
