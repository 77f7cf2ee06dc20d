#pragma once

#include <cstdint>

#include "voxelview/renderer.hpp"
#include "voxelview/rng.hpp"

namespace voxelview {

struct GradCheckTrial {
  double rel_error = 0.0;
  double loss = 0.0;
};

struct GradCheckResult {
  int trials = 0;
  double worst_rel_error = 0.0;
  int failures = 0;
  bool pass() const { return failures == 0; }
};

// Random smooth volume (a few Gaussian blobs per channel); the fields have
// negligible slope jumps across trilinear cells, which keeps the secant
// comparison below meaningful.
VoxelVolume random_smooth_volume(Rng& rng, int resolution);

// Compares the analytic viewpoint gradient against central finite
// differences of the sphere-restricted loss (step eps on each ambient
// coordinate, renormalized, then tangent-projected).
GradCheckTrial gradcheck_single(const VoxelVolume& volume, const Viewpoint& v,
                                const Viewpoint& up, const CameraModel& camera,
                                const RenderedImage& target, double eps = 1e-4);

// Runs `trials` random configurations at the given resolution; a trial
// fails if the relative error reaches `tol`.
GradCheckResult gradcheck(int resolution, int trials, std::uint64_t seed,
                          double tol = 1e-3, bool verbose = false);

}  // namespace voxelview
