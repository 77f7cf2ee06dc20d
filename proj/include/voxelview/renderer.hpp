#pragma once

#include <limits>

#include "voxelview/geometry.hpp"
#include "voxelview/image.hpp"
#include "voxelview/volume.hpp"

namespace voxelview {

// Pinhole camera on the +v side of the volume, looking at its center.
// Distance is measured from the volume center in half-extent units;
// infinity selects the orthographic (parallel ray) model.
struct CameraModel {
  double distance = 2.5;

  static CameraModel orthographic() {
    return CameraModel{std::numeric_limits<double>::infinity()};
  }
  static CameraModel perspective(double distance) {
    if (!(distance > 1.0)) {
      throw InvalidParam("camera distance must exceed 1 half-extent");
    }
    return CameraModel{distance};
  }
  bool is_orthographic() const { return std::isinf(distance); }
};

// Actively rotates the volume: the output voxel at normalized coordinate x
// samples the input at r^-1 x, trilinear, zero-padded outside [-1,1]^3.
// All four channels are resampled identically.
VoxelVolume rotate_volume(const VoxelVolume& volume, const Mat3& r);

// Frustum-to-box warp. Output voxel (x, y, z) samples (x*s, y, z*s) with
// s(y) = (d + y) / d, y being the depth coordinate; the near face (y = -1)
// is dilated and the far face contracted. After the warp all rays are
// parallel to the depth axis. Identity for an orthographic camera.
VoxelVolume apply_perspective(const VoxelVolume& volume, const CameraModel& camera);

// Front-to-back compositing along the depth axis (y, front = smallest
// index): per ray, Q'_k = Q_k * prod_{l<k}(1 - Q_l), rgb = sum C_k Q'_k,
// alpha = sum Q'_k.
RenderedImage composite(const VoxelVolume& volume);

// Maps a viewpoint rotation r = (v, u', w) to the resampling rotation that
// places the camera on the +v side: image right = -w, depth direction = -v,
// image up = u'. rotate_volume with this rotation brings the volume into
// the camera frame.
Mat3 camera_frame_rotation(const Mat3& r);

// composite(apply_perspective(rotate_volume(volume, camera_frame_rotation(r)), camera)).
RenderedImage render(const VoxelVolume& volume, const Mat3& r, const CameraModel& camera);

struct LossGrad {
  double loss = 0.0;
  Vec3 grad = Vec3::Zero();  // tangent to the sphere at v
};

// Mean squared rgb error between render(volume, vector_to_rotation(v, up),
// camera) and target, with its analytic gradient with respect to v,
// projected onto the tangent plane at v. Differentiates the full chain:
// orthogonalization, both trilinear resampling stages, and compositing.
LossGrad render_loss_grad(const VoxelVolume& volume, const Viewpoint& v,
                          const Viewpoint& up, const CameraModel& camera,
                          const RenderedImage& target);

}  // namespace voxelview
