#include "voxelview/renderer.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <vector>

namespace voxelview {

namespace {

// Camera axes in the viewpoint frame (v, u', w): image right = -w,
// depth = -v, image up = u'. Columns are the camera axes expressed in
// that frame, so the resample matrix is S = R * kCameraAxes.
const Mat3 kCameraAxes = [] {
  Mat3 k;
  k << 0, -1, 0,
       0, 0, 1,
      -1, 0, 0;
  return k;
}();

struct Planes {
  const double* p[4];
  static Planes of(const VoxelVolume& v) {
    const std::size_t n3 = v.n_voxels();
    return {{v.colors.data(), v.colors.data() + n3, v.colors.data() + 2 * n3,
             v.occupancy.data()}};
  }
};

struct MutPlanes {
  double* p[4];
  static MutPlanes of(VoxelVolume& v) {
    const std::size_t n3 = v.n_voxels();
    return {{v.colors.data(), v.colors.data() + n3, v.colors.data() + 2 * n3,
             v.occupancy.data()}};
  }
};

// Continuous voxel index for a normalized coordinate.
inline double to_index(double p, int n) { return (p + 1.0) * n * 0.5 - 0.5; }

// Trilinear gather of all four channels, zero outside the grid.
inline void sample4(const Planes& src, int n, double fx, double fy, double fz,
                    double out[4]) {
  out[0] = out[1] = out[2] = out[3] = 0.0;
  if (fx <= -1.0 || fy <= -1.0 || fz <= -1.0) return;
  if (fx >= n || fy >= n || fz >= n) return;
  const double flx = std::floor(fx), fly = std::floor(fy), flz = std::floor(fz);
  const int ix = static_cast<int>(flx), iy = static_cast<int>(fly),
            iz = static_cast<int>(flz);
  const double tx = fx - flx, ty = fy - fly, tz = fz - flz;
  const double wx[2] = {1.0 - tx, tx}, wy[2] = {1.0 - ty, ty}, wz[2] = {1.0 - tz, tz};
  for (int d = 0; d < 2; ++d) {
    const int k = iz + d;
    if (k < 0 || k >= n || wz[d] == 0.0) continue;
    for (int b = 0; b < 2; ++b) {
      const int j = iy + b;
      if (j < 0 || j >= n || wy[b] == 0.0) continue;
      const double wzy = wz[d] * wy[b];
      const std::size_t base = (static_cast<std::size_t>(k) * n + j) * n;
      for (int a = 0; a < 2; ++a) {
        const int i = ix + a;
        if (i < 0 || i >= n) continue;
        const double w = wzy * wx[a];
        if (w == 0.0) continue;
        const std::size_t idx = base + i;
        out[0] += w * src.p[0][idx];
        out[1] += w * src.p[1][idx];
        out[2] += w * src.p[2][idx];
        out[3] += w * src.p[3][idx];
      }
    }
  }
}

// Gather plus the spatial gradient of the interpolant, in index units.
// The derivative is one-sided at cell boundaries (the containing cell).
inline void sample4_grad(const Planes& src, int n, double fx, double fy, double fz,
                         double out[4], double grad[4][3]) {
  for (int c = 0; c < 4; ++c) {
    out[c] = 0.0;
    grad[c][0] = grad[c][1] = grad[c][2] = 0.0;
  }
  if (fx <= -1.0 || fy <= -1.0 || fz <= -1.0) return;
  if (fx >= n || fy >= n || fz >= n) return;
  const double flx = std::floor(fx), fly = std::floor(fy), flz = std::floor(fz);
  const int ix = static_cast<int>(flx), iy = static_cast<int>(fly),
            iz = static_cast<int>(flz);
  const double tx = fx - flx, ty = fy - fly, tz = fz - flz;
  double corner[4][2][2][2];
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int d = 0; d < 2; ++d) {
        const int i = ix + a, j = iy + b, k = iz + d;
        const bool in = i >= 0 && i < n && j >= 0 && j < n && k >= 0 && k < n;
        const std::size_t idx =
            in ? (static_cast<std::size_t>(k) * n + j) * n + i : 0;
        for (int c = 0; c < 4; ++c) corner[c][a][b][d] = in ? src.p[c][idx] : 0.0;
      }
    }
  }
  const double wx[2] = {1.0 - tx, tx}, wy[2] = {1.0 - ty, ty}, wz[2] = {1.0 - tz, tz};
  for (int c = 0; c < 4; ++c) {
    for (int b = 0; b < 2; ++b) {
      for (int d = 0; d < 2; ++d) {
        const double w = wy[b] * wz[d];
        out[c] += w * (wx[0] * corner[c][0][b][d] + wx[1] * corner[c][1][b][d]);
        grad[c][0] += w * (corner[c][1][b][d] - corner[c][0][b][d]);
      }
    }
    for (int a = 0; a < 2; ++a) {
      for (int d = 0; d < 2; ++d) {
        grad[c][1] += wx[a] * wz[d] * (corner[c][a][1][d] - corner[c][a][0][d]);
      }
      for (int b = 0; b < 2; ++b) {
        grad[c][2] += wx[a] * wy[b] * (corner[c][a][b][1] - corner[c][a][b][0]);
      }
    }
  }
}

// Output voxel at normalized x samples the input at S x.
VoxelVolume resample_by_matrix(const VoxelVolume& vol, const Mat3& sample) {
  const int n = vol.resolution;
  VoxelVolume out = VoxelVolume::empty(n);
  const Planes src = Planes::of(vol);
  MutPlanes dst = MutPlanes::of(out);
  const double scale = n * 0.5;
  double val[4];
  for (int k = 0; k < n; ++k) {
    const double z = vol.center_coord(k);
    for (int j = 0; j < n; ++j) {
      const double y = vol.center_coord(j);
      // Base point and per-i step of the continuous sample index.
      const double bx = sample(0, 1) * y + sample(0, 2) * z;
      const double by = sample(1, 1) * y + sample(1, 2) * z;
      const double bz = sample(2, 1) * y + sample(2, 2) * z;
      std::size_t idx = (static_cast<std::size_t>(k) * n + j) * n;
      for (int i = 0; i < n; ++i, ++idx) {
        const double x = vol.center_coord(i);
        const double fx = to_index(sample(0, 0) * x + bx, n) ;
        const double fy = to_index(sample(1, 0) * x + by, n);
        const double fz = to_index(sample(2, 0) * x + bz, n);
        sample4(src, n, fx, fy, fz, val);
        dst.p[0][idx] = val[0];
        dst.p[1][idx] = val[1];
        dst.p[2][idx] = val[2];
        dst.p[3][idx] = val[3];
      }
    }
  }
  return out;
}

}  // namespace

VoxelVolume rotate_volume(const VoxelVolume& volume, const Mat3& r) {
  if (r.isApprox(Mat3::Identity(), 0.0)) return volume;  // grid-aligned copy
  return resample_by_matrix(volume, r.transpose());
}

VoxelVolume apply_perspective(const VoxelVolume& volume, const CameraModel& camera) {
  if (camera.is_orthographic()) return volume;  // s(y) == 1 exactly
  if (!(camera.distance > 1.0)) {
    throw InvalidParam("camera distance must exceed 1 half-extent");
  }
  const int n = volume.resolution;
  const double d = camera.distance;
  VoxelVolume out = VoxelVolume::empty(n);
  const Planes src = Planes::of(volume);
  MutPlanes dst = MutPlanes::of(out);
  double val[4];
  for (int k = 0; k < n; ++k) {
    const double z = volume.center_coord(k);
    for (int j = 0; j < n; ++j) {
      const double s = (d + volume.center_coord(j)) / d;
      const double fz = to_index(z * s, n);
      const double fy = static_cast<double>(j);  // depth stays grid-aligned
      std::size_t idx = (static_cast<std::size_t>(k) * n + j) * n;
      for (int i = 0; i < n; ++i, ++idx) {
        const double fx = to_index(volume.center_coord(i) * s, n);
        sample4(src, n, fx, fy, fz, val);
        dst.p[0][idx] = val[0];
        dst.p[1][idx] = val[1];
        dst.p[2][idx] = val[2];
        dst.p[3][idx] = val[3];
      }
    }
  }
  return out;
}

RenderedImage composite(const VoxelVolume& volume) {
  const int n = volume.resolution;
  RenderedImage img = RenderedImage::black(n, n);
  const Planes src = Planes::of(volume);
  const std::size_t npix = img.n_pixels();
  for (int k = 0; k < n; ++k) {
    const int row = n - 1 - k;  // +z renders at the top of the image
    for (int i = 0; i < n; ++i) {
      double transmittance = 1.0;
      double acc[4] = {0.0, 0.0, 0.0, 0.0};
      for (int j = 0; j < n; ++j) {
        const std::size_t idx = (static_cast<std::size_t>(k) * n + j) * n + i;
        const double q = src.p[3][idx];
        const double w = q * transmittance;
        acc[0] += w * src.p[0][idx];
        acc[1] += w * src.p[1][idx];
        acc[2] += w * src.p[2][idx];
        acc[3] += w;
        transmittance *= 1.0 - q;
      }
      const std::size_t pix = img.index(row, i);
      img.rgb[pix] = acc[0];
      img.rgb[npix + pix] = acc[1];
      img.rgb[2 * npix + pix] = acc[2];
      img.alpha[pix] = acc[3];
    }
  }
  return img;
}

Mat3 camera_frame_rotation(const Mat3& r) { return (r * kCameraAxes).transpose(); }

RenderedImage render(const VoxelVolume& volume, const Mat3& r, const CameraModel& camera) {
  return composite(
      apply_perspective(rotate_volume(volume, camera_frame_rotation(r)), camera));
}

LossGrad render_loss_grad(const VoxelVolume& volume, const Viewpoint& v,
                          const Viewpoint& up, const CameraModel& camera,
                          const RenderedImage& target) {
  const int n = volume.resolution;
  if (target.width != n || target.height != n) {
    throw LengthMismatch("render_loss_grad: target dimensions must match the volume");
  }
  const Mat3 r = vector_to_rotation(v, up);
  const Mat3 sample = r * kCameraAxes;

  const VoxelVolume rotated = resample_by_matrix(volume, sample);
  const VoxelVolume warped = apply_perspective(rotated, camera);
  const RenderedImage img = composite(warped);

  const std::size_t n3 = volume.n_voxels();
  const std::size_t npix = img.n_pixels();
  const double inv_count = 1.0 / static_cast<double>(3 * npix);

  LossGrad result;
  std::vector<double> g_img(3 * npix);
  for (std::size_t i = 0; i < g_img.size(); ++i) {
    const double d = img.rgb[i] - target.rgb[i];
    result.loss += d * d * inv_count;
    g_img[i] = 2.0 * d * inv_count;
  }

  // Compositing backward: per-ray prefix transmittances and suffix
  // accumulations give d(pixel)/dQ without dividing by (1 - Q).
  std::vector<double> g_warp(4 * n3, 0.0);
  {
    const Planes src = Planes::of(warped);
    std::vector<double> trans(n + 1);
    std::vector<std::array<double, 3>> suffix(n + 1);
    for (int k = 0; k < n; ++k) {
      const int row = n - 1 - k;
      for (int i = 0; i < n; ++i) {
        const std::size_t pix = static_cast<std::size_t>(row) * n + i;
        const double gI[3] = {g_img[pix], g_img[npix + pix], g_img[2 * npix + pix]};
        trans[0] = 1.0;
        for (int j = 0; j < n; ++j) {
          const std::size_t idx = (static_cast<std::size_t>(k) * n + j) * n + i;
          trans[j + 1] = trans[j] * (1.0 - src.p[3][idx]);
        }
        suffix[n] = {0.0, 0.0, 0.0};
        for (int j = n - 1; j >= 0; --j) {
          const std::size_t idx = (static_cast<std::size_t>(k) * n + j) * n + i;
          const double q = src.p[3][idx];
          for (int c = 0; c < 3; ++c) {
            suffix[j][c] = src.p[c][idx] * q + (1.0 - q) * suffix[j + 1][c];
          }
        }
        for (int j = 0; j < n; ++j) {
          const std::size_t idx = (static_cast<std::size_t>(k) * n + j) * n + i;
          const double q = src.p[3][idx];
          const double t = trans[j];
          double gq = 0.0;
          for (int c = 0; c < 3; ++c) {
            g_warp[c * n3 + idx] = gI[c] * q * t;
            gq += gI[c] * t * (src.p[c][idx] - suffix[j + 1][c]);
          }
          g_warp[3 * n3 + idx] = gq;
        }
      }
    }
  }

  // Perspective backward: scatter through the same bilinear taps the
  // forward warp used (identity when orthographic).
  std::vector<double> g_rot;
  if (camera.is_orthographic()) {
    g_rot = std::move(g_warp);
  } else {
    g_rot.assign(4 * n3, 0.0);
    const double d = camera.distance;
    for (int k = 0; k < n; ++k) {
      const double z = volume.center_coord(k);
      for (int j = 0; j < n; ++j) {
        const double s = (d + volume.center_coord(j)) / d;
        const double fz = to_index(z * s, n);
        for (int i = 0; i < n; ++i) {
          const double fx = to_index(volume.center_coord(i) * s, n);
          if (fx <= -1.0 || fz <= -1.0 || fx >= n || fz >= n) continue;
          const double flx = std::floor(fx), flz = std::floor(fz);
          const int ix = static_cast<int>(flx), iz = static_cast<int>(flz);
          const double tx = fx - flx, tz = fz - flz;
          const double wx[2] = {1.0 - tx, tx}, wz[2] = {1.0 - tz, tz};
          const std::size_t idx = (static_cast<std::size_t>(k) * n + j) * n + i;
          for (int dzi = 0; dzi < 2; ++dzi) {
            const int kk = iz + dzi;
            if (kk < 0 || kk >= n || wz[dzi] == 0.0) continue;
            for (int dxi = 0; dxi < 2; ++dxi) {
              const int ii = ix + dxi;
              if (ii < 0 || ii >= n) continue;
              const double w = wz[dzi] * wx[dxi];
              if (w == 0.0) continue;
              const std::size_t dst = (static_cast<std::size_t>(kk) * n + j) * n + ii;
              for (int c = 0; c < 4; ++c) {
                g_rot[c * n3 + dst] += w * g_warp[c * n3 + idx];
              }
            }
          }
        }
      }
    }
  }

  // Rotation backward: accumulate the 3x3 pairing of output coordinates
  // with input interpolant gradients, then contract with dS/dv.
  Mat3 pairing = Mat3::Zero();
  {
    const Planes src = Planes::of(volume);
    double val[4];
    double grad[4][3];
    for (int k = 0; k < n; ++k) {
      const double z = volume.center_coord(k);
      for (int j = 0; j < n; ++j) {
        const double y = volume.center_coord(j);
        for (int i = 0; i < n; ++i) {
          const std::size_t idx = (static_cast<std::size_t>(k) * n + j) * n + i;
          const double g0 = g_rot[idx], g1 = g_rot[n3 + idx],
                       g2 = g_rot[2 * n3 + idx], g3 = g_rot[3 * n3 + idx];
          if (g0 == 0.0 && g1 == 0.0 && g2 == 0.0 && g3 == 0.0) continue;
          const double x = volume.center_coord(i);
          const double px = sample(0, 0) * x + sample(0, 1) * y + sample(0, 2) * z;
          const double py = sample(1, 0) * x + sample(1, 1) * y + sample(1, 2) * z;
          const double pz = sample(2, 0) * x + sample(2, 1) * y + sample(2, 2) * z;
          sample4_grad(src, n, to_index(px, n), to_index(py, n), to_index(pz, n),
                       val, grad);
          const double gch[4] = {g0, g1, g2, g3};
          double gv[3] = {0.0, 0.0, 0.0};
          for (int c = 0; c < 4; ++c) {
            gv[0] += gch[c] * grad[c][0];
            gv[1] += gch[c] * grad[c][1];
            gv[2] += gch[c] * grad[c][2];
          }
          for (int q = 0; q < 3; ++q) {
            pairing(q, 0) += gv[q] * x;
            pairing(q, 1) += gv[q] * y;
            pairing(q, 2) += gv[q] * z;
          }
        }
      }
    }
    pairing *= n * 0.5;  // index-space gradient -> normalized coordinates
  }

  // dS/dv_m: S columns are (-w, -v, u') with w = normalize(v x u),
  // u' = w x v.
  const Vec3 w_raw = v.v.cross(up.v);
  const double w_norm = w_raw.norm();
  const Vec3 w = w_raw / w_norm;
  Vec3 grad_v = Vec3::Zero();
  for (int m = 0; m < 3; ++m) {
    Vec3 em = Vec3::Zero();
    em[m] = 1.0;
    const Vec3 dw_raw = em.cross(up.v);
    const Vec3 dw = (dw_raw - w * w.dot(dw_raw)) / w_norm;
    const Vec3 du_prime = dw.cross(v.v) + w.cross(em);
    Mat3 dr;
    dr.col(0) = em;
    dr.col(1) = du_prime;
    dr.col(2) = dw;
    const Mat3 ds = dr * kCameraAxes;
    grad_v[m] = (ds.array() * pairing.array()).sum();
  }
  result.grad = grad_v - v.v * grad_v.dot(v.v);
  return result;
}

}  // namespace voxelview
