#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "voxelview/errors.hpp"

namespace voxelview {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Two viewpoints closer than this (in |dot| with the up vector) cannot be
// orthogonalized against it.
inline constexpr double kDegenerateUpDot = 1.0 - 1e-6;

// A camera direction: a point on the unit sphere. The Euler view uses a
// z-up convention with azimuth measured about +z from +x and elevation
// toward +z; tilt is always zero.
struct Viewpoint {
  Vec3 v{1.0, 0.0, 0.0};

  Viewpoint() = default;
  explicit Viewpoint(const Vec3& unit) : v(unit) {}

  // Normalizes; throws InvalidParam on a near-zero vector.
  static Viewpoint from_vector(const Vec3& raw);

  double azimuth() const;    // [0, 2*pi)
  double elevation() const;  // [-pi/2, pi/2]
};

// Global default up direction (tilt == 0).
Viewpoint default_up();

// Proper rotation with columns (v, u', w) where w = normalize(v x u) and
// u' = w x v. Column 0 is exactly v. Throws DegenerateUp when v and u are
// within 1e-6 of parallel.
Mat3 vector_to_rotation(const Viewpoint& v, const Viewpoint& up);

// v = (cos e cos a, cos e sin a, sin e). Azimuth wraps mod 2*pi.
Viewpoint euler_to_vector(double azimuth, double elevation);

// Inverse of euler_to_vector; azimuth in [0, 2*pi), elevation in
// [-pi/2, pi/2]. At the poles (|v_z| > 1 - 1e-9) azimuth is 0.
std::pair<double, double> vector_to_euler(const Viewpoint& v);

// SO(3) geodesic distance: arccos(clamp((trace(r1^T r2) - 1) / 2, -1, 1)).
double geodesic_error(const Mat3& r1, const Mat3& r2);

// Rodrigues formula; axis must be unit.
Mat3 rotation_about_axis(const Vec3& axis, double angle);

// Wrapped absolute azimuth difference, in [0, pi].
double azimuth_error(double a1, double a2);

// Geodesic error between the view rotations of two viewpoints under the
// global up; inputs in the pole region are nudged 1e-3 off it first.
double viewpoint_geodesic_error(const Viewpoint& a, const Viewpoint& b,
                                const Viewpoint& up);

// Moves a viewpoint 1e-3 off the pole region so orthogonalization against
// `up` is well defined. No-op away from the poles.
Viewpoint nudge_from_pole(const Viewpoint& v, const Viewpoint& up);

// Pose file parsers: CSV with one `azimuth_deg,elevation_deg` record per
// line, or a JSON array of unit 3-vectors.
std::vector<Viewpoint> read_pose_csv(const std::string& path);
std::vector<Viewpoint> read_pose_json(const std::string& path);

}  // namespace voxelview
