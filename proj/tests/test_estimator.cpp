#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "voxelview/estimator.hpp"
#include "voxelview/volume.hpp"

using namespace voxelview;

namespace {

const Viewpoint kUp = default_up();

RenderedImage render_at(const VoxelVolume& vol, const Viewpoint& v,
                        const CameraModel& camera) {
  return render(vol, vector_to_rotation(v, kUp), camera);
}

std::vector<TrainingSample> make_dataset(const VoxelVolume& vol, int count,
                                         std::uint64_t seed,
                                         const CameraModel& camera,
                                         std::vector<Viewpoint>* gts = nullptr) {
  Rng rng(seed);
  std::vector<TrainingSample> dataset;
  for (int i = 0; i < count; ++i) {
    const Viewpoint v = sample_band_viewpoint(rng, -20.0, 40.0);
    if (gts) gts->push_back(v);
    dataset.push_back({render_at(vol, v, camera), "obj"});
  }
  return dataset;
}

// Constant-output estimator: W2 = 0 so every head emits normalize(b2).
TrainedEstimator constant_estimator(const std::vector<Vec3>& outputs) {
  TrainConfig cfg;
  cfg.heads = static_cast<int>(outputs.size());
  cfg.epochs = 0;
  TrainedEstimator est = init_estimator(cfg);
  for (std::size_t m = 0; m < outputs.size(); ++m) {
    std::fill(est.heads[m].w2.begin(), est.heads[m].w2.end(), 0.0);
    for (int o = 0; o < 3; ++o) est.heads[m].b2[o] = outputs[m][o];
  }
  std::fill(est.selection.w2.begin(), est.selection.w2.end(), 0.0);
  std::fill(est.selection.b2.begin(), est.selection.b2.end(), 0.0);
  return est;
}

}  // namespace

TEST_CASE("band sampling is area-uniform in azimuth") {
  Rng rng(17);
  const int n = 10000;
  std::array<int, 12> bins{};
  for (int i = 0; i < n; ++i) {
    const Viewpoint v = sample_band_viewpoint(rng, -20, 40);
    const double el_deg = v.elevation() * 180.0 / M_PI;
    REQUIRE(el_deg >= -20.0 - 1e-9);
    REQUIRE(el_deg <= 40.0 + 1e-9);
    bins[static_cast<int>(v.azimuth() / (2 * M_PI) * 12) % 12] += 1;
  }
  for (int count : bins) {
    const double frac = static_cast<double>(count) / n;
    REQUIRE(std::abs(frac - 1.0 / 12.0) <= 0.01);
  }
}

TEST_CASE("fibonacci seeds cover both hemispheres away from the poles") {
  const auto seeds = fibonacci_sphere(8);
  REQUIRE(seeds.size() == 8);
  int north = 0;
  for (const Viewpoint& s : seeds) {
    REQUIRE(s.v.norm() == doctest::Approx(1.0).epsilon(1e-12));
    REQUIRE(std::abs(s.v.z()) < 0.95);
    north += s.v.z() > 0 ? 1 : 0;
  }
  CHECK(north == 4);
}

TEST_CASE("select_best_head picks the argmin with low-index ties") {
  const VoxelVolume car = make_test_object(ObjectKind::car, 16);
  const CameraModel camera{2.5};
  const Viewpoint truth = euler_to_vector(1.0, 0.2);
  const RenderedImage target = render_at(car, truth, camera);

  SUBCASE("hypothesis at the true pose wins") {
    const std::vector<Viewpoint> hyp = {euler_to_vector(2.5, -0.1), truth,
                                        euler_to_vector(4.0, 0.4)};
    const HypothesisSet set = select_best_head(hyp, car, camera, target);
    CHECK(set.selected == 1);
    CHECK(set.recon_errors[1] <= 1e-12);
    CHECK(set.recon_errors[0] > set.recon_errors[1]);
  }
  SUBCASE("identical hypotheses tie-break to index 0") {
    const Viewpoint v = euler_to_vector(2.0, 0.0);
    const HypothesisSet set = select_best_head({v, v}, car, camera, target);
    CHECK(set.selected == 0);
    CHECK(set.recon_errors[0] == set.recon_errors[1]);
  }
  SUBCASE("single hypothesis selects index 0") {
    const HypothesisSet set = select_best_head({truth}, car, camera, target);
    CHECK(set.selected == 0);
  }
  CHECK_THROWS_AS(select_best_head({}, car, camera, target), EmptyHypotheses);
}

TEST_CASE("optimization from the true pose converges immediately") {
  const VoxelVolume car = make_test_object(ObjectKind::car, 16);
  const CameraModel camera{2.5};
  const Viewpoint truth = euler_to_vector(0.7, 0.1);
  const RenderedImage target = render_at(car, truth, camera);
  const auto [recovered, loss] =
      estimate_by_optimization(target, car, camera, std::vector<Viewpoint>{truth});
  CHECK(loss < 1e-6);
  CHECK((recovered.v - truth.v).norm() < 1e-9);
}

TEST_CASE("optimization recovers poses on the car at resolution 32") {
  const VoxelVolume car = make_test_object(ObjectKind::car, 32);
  const CameraModel camera{2.5};
  Rng rng(2077);
  int good = 0;
  const int trials = 10;
  for (int t = 0; t < trials; ++t) {
    const Viewpoint truth = sample_band_viewpoint(rng, -20, 40);
    const RenderedImage target = render_at(car, truth, camera);
    const auto [recovered, loss] = estimate_by_optimization(target, car, camera, 8);
    const double err_deg =
        viewpoint_geodesic_error(recovered, truth, kUp) * 180.0 / M_PI;
    if (err_deg < 5.0) ++good;
  }
  CHECK(good >= 9);
}

TEST_CASE("silhouette targets plateau at the symmetric azimuth") {
  const VoxelVolume sil = silhouette_of(make_test_object(ObjectKind::car, 32));
  const CameraModel camera{2.5};
  const Viewpoint v0 = euler_to_vector(0.8, 0.15);
  const Viewpoint flipped = euler_to_vector(0.8 + M_PI, 0.15);
  const RenderedImage target = render_at(sil, v0, camera);
  const double loss_v0 = mse_rgb(render_at(sil, v0, camera), target);
  const double loss_flip = mse_rgb(render_at(sil, flipped, camera), target);
  CHECK(std::abs(loss_v0 - loss_flip) < 1e-3);
}

TEST_CASE("estimate_by_optimization validates starts") {
  const VoxelVolume car = make_test_object(ObjectKind::car, 16);
  const RenderedImage target = render_at(car, euler_to_vector(1, 0), CameraModel{2.5});
  CHECK_THROWS_AS(estimate_by_optimization(target, car, CameraModel{2.5}, 0),
                  InvalidParam);
}

TEST_CASE("training config validation") {
  const VoxelVolume car = make_test_object(ObjectKind::car, 16);
  const CameraModel camera{2.5};
  std::vector<TrainingSample> dataset = make_dataset(car, 2, 1, camera);
  std::map<std::string, VoxelVolume> volumes;
  volumes.emplace("obj", car);
  TrainConfig cfg;
  cfg.heads = 0;
  CHECK_THROWS_AS(train_multihead(dataset, volumes, cfg), ConfigError);
  cfg.heads = 2;
  CHECK_THROWS_AS(train_multihead({}, volumes, cfg), ConfigError);
  dataset[0].volume_id = "missing";
  CHECK_THROWS_AS(train_multihead(dataset, volumes, cfg), ConfigError);
}

TEST_CASE("one training step leaves losing heads bit-identical") {
  const VoxelVolume car = make_test_object(ObjectKind::car, 16);
  const CameraModel camera{2.5};
  std::vector<TrainingSample> dataset = make_dataset(car, 1, 5, camera);
  std::map<std::string, VoxelVolume> volumes;
  volumes.emplace("obj", car);
  TrainConfig cfg;
  cfg.heads = 3;
  cfg.epochs = 1;
  cfg.camera_distance = 2.5;
  const TrainedEstimator before = init_estimator(cfg);
  const TrainedEstimator after = train_multihead(dataset, volumes, cfg);
  // Find the winner the same way training does.
  const std::vector<Viewpoint> hyp = forward_heads(before, dataset[0].image);
  const HypothesisSet set = select_best_head(hyp, car, camera, dataset[0].image);
  int changed = 0;
  for (int m = 0; m < cfg.heads; ++m) {
    const bool same = before.heads[m].w1 == after.heads[m].w1 &&
                      before.heads[m].b1 == after.heads[m].b1 &&
                      before.heads[m].w2 == after.heads[m].w2 &&
                      before.heads[m].b2 == after.heads[m].b2;
    if (!same) {
      ++changed;
      CHECK(m == set.selected);
    }
  }
  CHECK(changed <= 1);
}

TEST_CASE("training is deterministic and serialization round-trips") {
  const VoxelVolume car = make_test_object(ObjectKind::car, 16);
  const CameraModel camera{2.5};
  std::vector<TrainingSample> dataset = make_dataset(car, 6, 9, camera);
  std::map<std::string, VoxelVolume> volumes;
  volumes.emplace("obj", car);
  TrainConfig cfg;
  cfg.heads = 2;
  cfg.epochs = 2;
  cfg.cycle_weight = 0.1;
  const TrainedEstimator a = train_multihead(dataset, volumes, cfg);
  const TrainedEstimator b = train_multihead(dataset, volumes, cfg);
  const std::string ja = estimator_to_json(a);
  CHECK(ja == estimator_to_json(b));

  const std::string path =
      (std::filesystem::temp_directory_path() / "voxelview_model.json").string();
  save_estimator(a, path);
  const TrainedEstimator loaded = load_estimator(path);
  CHECK(estimator_to_json(loaded) == ja);
}

TEST_CASE("predictions are deterministic unit vectors") {
  const VoxelVolume car = make_test_object(ObjectKind::car, 16);
  const CameraModel camera{2.5};
  std::vector<TrainingSample> dataset = make_dataset(car, 4, 21, camera);
  std::map<std::string, VoxelVolume> volumes;
  volumes.emplace("obj", car);
  TrainConfig cfg;
  cfg.heads = 2;
  cfg.epochs = 1;
  const TrainedEstimator est = train_multihead(dataset, volumes, cfg);
  const RenderedImage probe = render_at(car, euler_to_vector(2.2, 0.1), camera);
  const Viewpoint p1 = predict(est, probe);
  const Viewpoint p2 = predict(est, probe);
  CHECK(p1.v == p2.v);
  CHECK(p1.v.norm() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("cycle loss hand values") {
  const VoxelVolume car = make_test_object(ObjectKind::car, 16);
  const CameraModel camera{2.5};
  const Viewpoint sampled = euler_to_vector(1.3, 0.2);
  // Selection picks head 0 (all logits equal -> lowest index).
  const TrainedEstimator exact = constant_estimator({sampled.v, Vec3(0, 1, 0)});
  CHECK(cycle_loss(exact, car, camera, sampled) == doctest::Approx(0.0).epsilon(1e-12));
  const TrainedEstimator opposite = constant_estimator({-sampled.v});
  CHECK(cycle_loss(opposite, car, camera, sampled) ==
        doctest::Approx(2.0).epsilon(1e-12));
}
