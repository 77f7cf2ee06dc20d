#include "voxelview/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace voxelview {

VoxelVolume random_smooth_volume(Rng& rng, int resolution) {
  VoxelVolume vol = VoxelVolume::empty(resolution);
  const int n = resolution;
  struct Blob {
    double cx, cy, cz, inv_two_var, amp;
  };
  const auto draw_blobs = [&](int count, double amp_lo, double amp_hi) {
    std::vector<Blob> blobs;
    for (int b = 0; b < count; ++b) {
      const double sigma = rng.uniform(0.15, 0.35);
      blobs.push_back({rng.uniform(-0.45, 0.45), rng.uniform(-0.45, 0.45),
                       rng.uniform(-0.45, 0.45), 1.0 / (2.0 * sigma * sigma),
                       rng.uniform(amp_lo, amp_hi)});
    }
    return blobs;
  };
  const auto eval = [&](const std::vector<Blob>& blobs, double x, double y, double z) {
    double acc = 0.0;
    for (const Blob& b : blobs) {
      const double dx = x - b.cx, dy = y - b.cy, dz = z - b.cz;
      acc += b.amp * std::exp(-(dx * dx + dy * dy + dz * dz) * b.inv_two_var);
    }
    return acc;
  };
  const std::vector<Blob> occupancy_blobs = draw_blobs(4, 0.3, 0.9);
  std::vector<std::vector<Blob>> color_blobs;
  for (int c = 0; c < 3; ++c) color_blobs.push_back(draw_blobs(3, 0.2, 1.0));
  for (int k = 0; k < n; ++k) {
    const double z = vol.center_coord(k);
    for (int j = 0; j < n; ++j) {
      const double y = vol.center_coord(j);
      for (int i = 0; i < n; ++i) {
        const double x = vol.center_coord(i);
        vol.occ(i, j, k) = std::clamp(eval(occupancy_blobs, x, y, z), 0.0, 0.95);
        for (int c = 0; c < 3; ++c) {
          vol.color(c, i, j, k) = std::clamp(eval(color_blobs[c], x, y, z), 0.0, 1.0);
        }
      }
    }
  }
  return vol;
}

GradCheckTrial gradcheck_single(const VoxelVolume& volume, const Viewpoint& v,
                                const Viewpoint& up, const CameraModel& camera,
                                const RenderedImage& target, double eps) {
  const LossGrad analytic = render_loss_grad(volume, v, up, camera, target);
  Vec3 fd = Vec3::Zero();
  for (int m = 0; m < 3; ++m) {
    Vec3 em = Vec3::Zero();
    em[m] = 1.0;
    const Viewpoint plus = Viewpoint::from_vector(v.v + eps * em);
    const Viewpoint minus = Viewpoint::from_vector(v.v - eps * em);
    const double lp =
        mse_rgb(render(volume, vector_to_rotation(plus, up), camera), target);
    const double lm =
        mse_rgb(render(volume, vector_to_rotation(minus, up), camera), target);
    fd[m] = (lp - lm) / (2.0 * eps);
  }
  fd -= v.v * fd.dot(v.v);
  GradCheckTrial trial;
  trial.loss = analytic.loss;
  const double denom = std::max(fd.norm(), 1e-12);
  trial.rel_error = (analytic.grad - fd).norm() / denom;
  return trial;
}

GradCheckResult gradcheck(int resolution, int trials, std::uint64_t seed, double tol,
                          bool verbose) {
  if (resolution < 4) throw InvalidParam("gradcheck: resolution must be >= 4");
  if (trials < 1) throw InvalidParam("gradcheck: trials must be >= 1");
  Rng rng(seed);
  const Viewpoint up = default_up();
  GradCheckResult result;
  result.trials = trials;
  for (int t = 0; t < trials; ++t) {
    const VoxelVolume volume = random_smooth_volume(rng, resolution);
    const Viewpoint v = euler_to_vector(rng.uniform(0.0, 2.0 * M_PI),
                                        rng.uniform(-1.0, 1.0));
    const Viewpoint target_v = euler_to_vector(rng.uniform(0.0, 2.0 * M_PI),
                                               rng.uniform(-1.0, 1.0));
    const CameraModel camera = CameraModel::perspective(rng.uniform(2.0, 4.0));
    const RenderedImage target =
        render(volume, vector_to_rotation(target_v, up), camera);
    const GradCheckTrial trial = gradcheck_single(volume, v, up, camera, target);
    result.worst_rel_error = std::max(result.worst_rel_error, trial.rel_error);
    if (!(trial.rel_error < tol)) result.failures += 1;
    if (verbose) {
      std::printf("trial %2d: rel_error %.3e loss %.3e %s\n", t, trial.rel_error,
                  trial.loss, trial.rel_error < tol ? "ok" : "FAIL");
    }
  }
  return result;
}

}  // namespace voxelview
