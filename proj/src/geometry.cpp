#include "voxelview/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace voxelview {

namespace {

double wrap_two_pi(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a < 0.0) a += 2.0 * M_PI;
  return a;
}

}  // namespace

Viewpoint Viewpoint::from_vector(const Vec3& raw) {
  const double n = raw.norm();
  if (n < 1e-12) throw InvalidParam("viewpoint vector has near-zero norm");
  return Viewpoint(raw / n);
}

double Viewpoint::azimuth() const { return vector_to_euler(*this).first; }

double Viewpoint::elevation() const { return vector_to_euler(*this).second; }

Viewpoint default_up() { return Viewpoint(Vec3(0.0, 0.0, 1.0)); }

Mat3 vector_to_rotation(const Viewpoint& v, const Viewpoint& up) {
  if (std::abs(v.v.dot(up.v)) > kDegenerateUpDot) {
    throw DegenerateUp("viewpoint is parallel to the up direction");
  }
  const Vec3 w = v.v.cross(up.v).normalized();
  const Vec3 u_prime = w.cross(v.v);  // unit: w is unit and orthogonal to v
  Mat3 r;
  r.col(0) = v.v;
  r.col(1) = u_prime;
  r.col(2) = w;
  return r;
}

Viewpoint euler_to_vector(double azimuth, double elevation) {
  const double a = wrap_two_pi(azimuth);
  const double ce = std::cos(elevation);
  return Viewpoint(Vec3(ce * std::cos(a), ce * std::sin(a), std::sin(elevation)));
}

std::pair<double, double> vector_to_euler(const Viewpoint& vp) {
  const Vec3& v = vp.v;
  const double z = std::clamp(v.z(), -1.0, 1.0);
  if (std::abs(z) > 1.0 - 1e-9) {
    return {0.0, std::copysign(M_PI / 2.0, z)};
  }
  const double azimuth = wrap_two_pi(std::atan2(v.y(), v.x()));
  return {azimuth, std::asin(z)};
}

double geodesic_error(const Mat3& r1, const Mat3& r2) {
  const double tr = (r1.transpose() * r2).trace();
  return std::acos(std::clamp((tr - 1.0) / 2.0, -1.0, 1.0));
}

Mat3 rotation_about_axis(const Vec3& axis, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const Vec3& a = axis;
  Mat3 k;
  k << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
  return Mat3::Identity() * c + k * s + a * a.transpose() * (1.0 - c);
}

double azimuth_error(double a1, double a2) {
  const double d = wrap_two_pi(a1 - a2);
  return std::min(d, 2.0 * M_PI - d);
}

Viewpoint nudge_from_pole(const Viewpoint& v, const Viewpoint& up) {
  if (std::abs(v.v.dot(up.v)) <= kDegenerateUpDot) return v;
  // Any fixed horizontal direction works; derive one from +x (or +y when
  // up is x-like) so the result is deterministic.
  Vec3 h = Vec3(1.0, 0.0, 0.0) - up.v * up.v.x();
  if (h.norm() < 1e-6) h = Vec3(0.0, 1.0, 0.0) - up.v * up.v.y();
  h.normalize();
  return Viewpoint::from_vector(v.v + 1e-3 * h);
}

double viewpoint_geodesic_error(const Viewpoint& a, const Viewpoint& b,
                                const Viewpoint& up) {
  const Mat3 ra = vector_to_rotation(nudge_from_pole(a, up), up);
  const Mat3 rb = vector_to_rotation(nudge_from_pole(b, up), up);
  return geodesic_error(ra, rb);
}

std::vector<Viewpoint> read_pose_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pose file: " + path);
  std::vector<Viewpoint> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string az_text, el_text;
    if (!std::getline(row, az_text, ',') || !std::getline(row, el_text)) {
      throw IoError("malformed pose CSV line: " + line);
    }
    // Skip a header row if present.
    if (out.empty() && az_text.find_first_not_of("+-.0123456789eE \t") != std::string::npos) {
      continue;
    }
    try {
      const double az = std::stod(az_text);
      const double el = std::stod(el_text);
      out.push_back(euler_to_vector(az * M_PI / 180.0, el * M_PI / 180.0));
    } catch (const std::exception&) {
      throw IoError("malformed pose CSV line: " + line);
    }
  }
  return out;
}

std::vector<Viewpoint> read_pose_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pose file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw IoError(std::string("malformed pose JSON: ") + e.what());
  }
  if (!doc.is_array()) throw IoError("pose JSON must be an array of 3-vectors");
  std::vector<Viewpoint> out;
  for (const auto& item : doc) {
    if (!item.is_array() || item.size() != 3) {
      throw IoError("pose JSON entries must be 3-vectors");
    }
    out.push_back(Viewpoint::from_vector(
        Vec3(item[0].get<double>(), item[1].get<double>(), item[2].get<double>())));
  }
  return out;
}

}  // namespace voxelview
