#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "voxelview/evalkit.hpp"
#include "voxelview/rng.hpp"

using namespace voxelview;

namespace {

const Viewpoint kUp = default_up();

std::vector<Viewpoint> random_cloud(Rng& rng, int count) {
  std::vector<Viewpoint> cloud;
  for (int i = 0; i < count; ++i) cloud.emplace_back(rng.unit_vector());
  return cloud;
}

std::vector<Viewpoint> rotate_cloud(const std::vector<Viewpoint>& cloud, const Mat3& r) {
  std::vector<Viewpoint> out;
  for (const Viewpoint& v : cloud) out.emplace_back(r * v.v);
  return out;
}

double deg(double rad) { return rad * 180.0 / M_PI; }

}  // namespace

TEST_CASE("procrustes on identical clouds returns the identity") {
  Rng rng(1);
  const auto gts = random_cloud(rng, 20);
  const AlignmentTransform t = procrustes_align(gts, gts);
  CHECK(deg(geodesic_error(t.rotation, Mat3::Identity())) < 1e-6 * 180 / M_PI * 60);
  CHECK(geodesic_error(t.rotation, Mat3::Identity()) < 1e-6);
}

TEST_CASE("procrustes recovers a planted rotation") {
  Rng rng(2);
  const auto gts = random_cloud(rng, 50);
  const Mat3 r0 = rotation_about_axis(rng.unit_vector(), 1.1);
  const auto preds = rotate_cloud(gts, r0.transpose());
  const AlignmentTransform t = procrustes_align(preds, gts);
  CHECK(deg(geodesic_error(t.rotation, r0)) < 0.1);
}

TEST_CASE("procrustes excludes reflections") {
  Rng rng(3);
  const auto gts = random_cloud(rng, 30);
  std::vector<Viewpoint> mirrored;
  for (const Viewpoint& v : gts) {
    mirrored.emplace_back(Vec3(-v.v.x(), v.v.y(), v.v.z()));
  }
  const AlignmentTransform t = procrustes_align(mirrored, gts);
  CHECK(t.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("procrustes objective beats identity and random rotations") {
  Rng rng(4);
  const auto gts = random_cloud(rng, 40);
  std::vector<Viewpoint> preds;
  const Mat3 r0 = rotation_about_axis(Vec3(0, 1, 0), 0.8);
  for (const Viewpoint& v : gts) {
    preds.emplace_back(Viewpoint::from_vector(r0.transpose() * v.v + 0.05 * rng.unit_vector()));
  }
  const AlignmentTransform t = procrustes_align(preds, gts);
  const auto objective = [&](const Mat3& r) {
    double acc = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      acc += (r * preds[i].v - gts[i].v).squaredNorm();
    }
    return acc;
  };
  const double best = objective(t.rotation);
  CHECK(best <= objective(Mat3::Identity()) + 1e-9);
  for (int i = 0; i < 100; ++i) {
    const Mat3 random = rotation_about_axis(rng.unit_vector(), rng.uniform(0, M_PI));
    REQUIRE(best <= objective(random) + 1e-9);
  }
}

TEST_CASE("procrustes degenerate inputs") {
  Rng rng(5);
  const auto gts = random_cloud(rng, 2);
  CHECK_THROWS_AS(procrustes_align(gts, gts), InvalidParam);
  // Collinear cloud: cross-covariance rank 1.
  std::vector<Viewpoint> line(5, Viewpoint(Vec3(1, 0, 0)));
  CHECK_THROWS_AS(procrustes_align(line, line), DegenerateCloud);
}

TEST_CASE("linear align on identical clouds is near identity") {
  Rng rng(6);
  const auto gts = random_cloud(rng, 40);
  const AlignmentTransform t = linear_align(gts, gts);
  CHECK((t.weights - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-3);
  CHECK(t.bias.norm() < 1e-3);
}

TEST_CASE("linear align maps constant predictions to the mean direction") {
  Rng rng(7);
  const Viewpoint c = euler_to_vector(0.4, 0.1);
  std::vector<Viewpoint> preds(40, c);
  std::vector<Viewpoint> gts;
  Vec3 mean = Vec3::Zero();
  for (int i = 0; i < 40; ++i) {
    const Viewpoint g = euler_to_vector(rng.uniform(0.5, 1.5), rng.uniform(-0.2, 0.4));
    gts.push_back(g);
    mean += g.v;
  }
  mean /= 40.0;
  const AlignmentTransform t = linear_align(preds, gts);
  CHECK((t.weights * c.v + t.bias - mean).norm() < 1e-6);
  const Viewpoint mapped = t.apply(c);
  CHECK((mapped.v - mean.normalized()).norm() < 1e-6);
}

TEST_CASE("linear alignment flatters collapsed predictions") {
  Rng rng(8);
  std::vector<Viewpoint> preds, gts;
  const Viewpoint c = euler_to_vector(2.0, 0.05);
  for (int i = 0; i < 60; ++i) {
    gts.push_back(Viewpoint(Vec3(std::cos(i * 0.105), std::sin(i * 0.105),
                                 0.2 * std::sin(i * 0.41))
                                .normalized()));
    preds.push_back(Viewpoint::from_vector(c.v + 1e-3 * rng.unit_vector()));
  }
  const AlignmentTransform lin = linear_align(preds, gts);
  const AlignmentTransform rot = procrustes_align(preds, gts);
  const MetricsReport lin_report = compute_metrics(preds, gts, lin);
  const MetricsReport rot_report = compute_metrics(preds, gts, rot);
  CHECK(lin_report.median_error_deg < rot_report.median_error_deg);
}

TEST_CASE("metrics arithmetic on a hand-built example") {
  // Errors 10, 29, 31 degrees at nearby azimuths: accuracy 2/3, lower
  // median 29, single nonempty bin so dva equals the accuracy.
  std::vector<Viewpoint> gts, preds;
  const double base = 10.0 * M_PI / 180.0;
  for (double err_deg : {10.0, 29.0, 31.0}) {
    gts.push_back(euler_to_vector(base, 0.0));
    preds.push_back(euler_to_vector(base + err_deg * M_PI / 180.0, 0.0));
  }
  const MetricsReport report =
      compute_metrics(preds, gts, AlignmentTransform::identity());
  CHECK(report.accuracy_at_30 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(report.median_error_deg == doctest::Approx(29.0).epsilon(1e-6));
  CHECK(report.dva == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(report.n_samples == 3);
  int nonempty = 0, total_count = 0;
  for (const BinStats& b : report.per_bin) {
    nonempty += b.count > 0 ? 1 : 0;
    total_count += b.count;
  }
  CHECK(nonempty == 1);
  CHECK(total_count == 3);
}

TEST_CASE("dva and confidence index decouple from plain accuracy") {
  // Bin A: 100 of 100 correct; bin B: 0 of 12 correct.
  std::vector<Viewpoint> gts, preds;
  for (int i = 0; i < 100; ++i) {
    gts.push_back(euler_to_vector(0.1 + i * 1e-4, 0.0));
    preds.push_back(gts.back());
  }
  for (int i = 0; i < 12; ++i) {
    const double az = (45.0 + i * 0.1) * M_PI / 180.0;
    gts.push_back(euler_to_vector(az, 0.0));
    preds.push_back(euler_to_vector(az + M_PI, 0.0));
  }
  const MetricsReport report =
      compute_metrics(preds, gts, AlignmentTransform::identity());
  CHECK(report.accuracy_at_30 == doctest::Approx(100.0 / 112.0).epsilon(1e-9));
  CHECK(report.dva == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(report.confidence_index == doctest::Approx(2.0 / 12.0).epsilon(1e-12));
  CHECK(report.per_bin.size() == 12);
}

TEST_CASE("single-bin dva equals plain accuracy") {
  Rng rng(9);
  std::vector<Viewpoint> gts, preds;
  for (int i = 0; i < 50; ++i) {
    gts.push_back(euler_to_vector(rng.uniform(0.0, 25.0 * M_PI / 180.0), 0.0));
    preds.push_back(euler_to_vector(gts.back().azimuth() + rng.uniform(0, 0.9), 0.0));
  }
  const MetricsReport report =
      compute_metrics(preds, gts, AlignmentTransform::identity());
  CHECK(report.dva == doctest::Approx(report.accuracy_at_30).epsilon(1e-12));
}

TEST_CASE("metrics are invariant to a common rotation under procrustes") {
  Rng rng(10);
  std::vector<Viewpoint> gts, preds;
  for (int i = 0; i < 60; ++i) {
    const Viewpoint g(rng.unit_vector());
    gts.push_back(g);
    preds.push_back(Viewpoint::from_vector(g.v + 0.1 * rng.unit_vector()));
  }
  const MetricsReport base =
      compute_metrics(preds, gts, procrustes_align(preds, gts));
  const Mat3 r = rotation_about_axis(rng.unit_vector(), 0.9);
  const auto preds_r = rotate_cloud(preds, r);
  const auto gts_r = rotate_cloud(gts, r);
  const MetricsReport moved =
      compute_metrics(preds_r, gts_r, procrustes_align(preds_r, gts_r));
  CHECK(std::abs(base.accuracy_at_30 - moved.accuracy_at_30) <= 1e-6);
  CHECK(std::abs(base.median_error_deg - moved.median_error_deg) <= 1e-5);
}

TEST_CASE("constant predictor basics") {
  const Viewpoint v0 = euler_to_vector(1.0, 0.2);
  std::vector<Viewpoint> same(5, v0);
  CHECK((constant_predictor(same).v - v0.v).norm() < 1e-12);

  std::vector<Viewpoint> antipodal = {Viewpoint(Vec3(1, 0, 0)), Viewpoint(Vec3(-1, 0, 0))};
  CHECK_THROWS_AS(constant_predictor(antipodal), DegenerateMean);

  Rng rng(11);
  std::vector<Viewpoint> cone;
  for (int i = 0; i < 100; ++i) {
    const double az = 1.0 + rng.uniform(-0.33, 0.33);
    const double el = 0.2 + rng.uniform(-0.33, 0.33);
    cone.push_back(euler_to_vector(az, el));
  }
  const Viewpoint mean = constant_predictor(cone);
  CHECK(std::acos(std::clamp(mean.v.dot(v0.v), -1.0, 1.0)) <= 20.0 * M_PI / 180.0);
}

TEST_CASE("bias phenomenon: concentrated ground truth flatters the constant") {
  Rng rng(12);
  std::vector<Viewpoint> gts;
  for (int i = 0; i < 360; ++i) {
    // 90% in the 30-60 degree bin at modest elevations, 10% spread out.
    const double az = (i % 10 != 0) ? rng.uniform(30.0, 60.0) : rng.uniform(0.0, 360.0);
    gts.push_back(euler_to_vector(az * M_PI / 180.0, rng.uniform(0.0, 0.35)));
  }
  const Viewpoint constant = constant_predictor(gts);
  std::vector<Viewpoint> preds(gts.size(), constant);
  const MetricsReport report =
      compute_metrics(preds, gts, AlignmentTransform::identity());
  CHECK(report.accuracy_at_30 >= 0.9);
  CHECK(report.dva <= 0.6);
}

TEST_CASE("scatter rows preserve order and detect the shifted diagonal") {
  std::vector<Viewpoint> gts, preds;
  std::vector<int> heads;
  for (int i = 0; i < 8; ++i) {
    const double az = i * 0.7;
    gts.push_back(euler_to_vector(az, 0.1));
    preds.push_back(euler_to_vector(az + M_PI, 0.1));
    heads.push_back(i % 3);
  }
  const auto rows = scatter_data(preds, gts, heads);
  REQUIRE(rows.size() == 8);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double shift =
        azimuth_error((rows[i].pred_azimuth_deg - 180.0) * M_PI / 180.0,
                      rows[i].gt_azimuth_deg * M_PI / 180.0);
    REQUIRE(shift <= 1e-9);
    REQUIRE(rows[i].head == static_cast<int>(i % 3));
  }
  CHECK(scatter_data({}, {}, {}).empty());
  CHECK_THROWS_AS(scatter_data(preds, {}, {}), LengthMismatch);

  const std::string path =
      (std::filesystem::temp_directory_path() / "voxelview_scatter.csv").string();
  write_scatter_csv(rows, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "gt_azimuth_deg,pred_azimuth_deg,head");
}

TEST_CASE("metrics JSON has the stable field set") {
  std::vector<Viewpoint> gts = {euler_to_vector(0.2, 0.1), euler_to_vector(1.0, 0.0),
                                euler_to_vector(2.0, 0.2)};
  const MetricsReport report = compute_metrics(gts, gts, AlignmentTransform::identity());
  const std::string json = metrics_to_json(report);
  for (const char* key :
       {"accuracy_at_30", "median_error_deg", "dva", "confidence_index", "per_bin",
        "alignment", "n_samples", "accuracy_at_30_azimuth"}) {
    INFO(key);
    CHECK(json.find(key) != std::string::npos);
  }
  CHECK(metrics_to_json(report) == json);
}
