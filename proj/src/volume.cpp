#include "voxelview/volume.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace voxelview {

ScalarGrid ScalarGrid::zeros(int resolution) {
  if (resolution < 2) throw InvalidParam("grid resolution must be >= 2");
  ScalarGrid g;
  g.resolution = resolution;
  g.values.assign(static_cast<std::size_t>(resolution) * resolution * resolution, 0.0);
  return g;
}

VoxelVolume VoxelVolume::empty(int resolution) {
  if (resolution < 2) throw InvalidParam("volume resolution must be >= 2");
  VoxelVolume v;
  v.resolution = resolution;
  v.colors.assign(3 * v.n_voxels(), 0.0);
  v.occupancy.assign(v.n_voxels(), 0.0);
  return v;
}

ScalarGrid shape_prior(int resolution, double sigma, double amplitude) {
  if (resolution < 2) throw InvalidParam("shape_prior: resolution must be >= 2");
  if (sigma <= 0.0) throw InvalidParam("shape_prior: sigma must be positive");
  if (amplitude <= 0.0 || amplitude > 1.0) {
    throw InvalidParam("shape_prior: amplitude must be in (0, 1]");
  }
  ScalarGrid g = ScalarGrid::zeros(resolution);
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);  // half-extent h = 1
  for (int k = 0; k < resolution; ++k) {
    for (int j = 0; j < resolution; ++j) {
      for (int i = 0; i < resolution; ++i) {
        const double x = (i + 0.5) * 2.0 / resolution - 1.0;
        const double y = (j + 0.5) * 2.0 / resolution - 1.0;
        const double z = (k + 0.5) * 2.0 / resolution - 1.0;
        const double r2 = x * x + y * y + z * z;
        g.at(i, j, k) = amplitude * std::exp(-r2 * inv_two_var);
      }
    }
  }
  return g;
}

ScalarGrid apply_prior(const ScalarGrid& residual, const ScalarGrid& prior) {
  if (residual.resolution != prior.resolution) {
    throw ResolutionMismatch("apply_prior: residual and prior resolutions differ");
  }
  ScalarGrid out = ScalarGrid::zeros(residual.resolution);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = std::clamp(prior.values[i] + residual.values[i], 0.0, 1.0);
  }
  return out;
}

ObjectKind parse_object_kind(const std::string& name) {
  if (name == "car") return ObjectKind::car;
  if (name == "chair") return ObjectKind::chair;
  if (name == "plane") return ObjectKind::plane;
  if (name == "cube") return ObjectKind::cube;
  throw InvalidParam("unknown object kind: " + name);
}

std::string object_kind_name(ObjectKind kind) {
  switch (kind) {
    case ObjectKind::car: return "car";
    case ObjectKind::chair: return "chair";
    case ObjectKind::plane: return "plane";
    case ObjectKind::cube: return "cube";
  }
  throw InvalidParam("bad object kind value");
}

namespace {

using Color = std::array<double, 3>;

struct Box {
  double x0, x1, y0, y1, z0, z1;
  bool contains(double x, double y, double z) const {
    return x >= x0 && x <= x1 && y >= y0 && y <= y1 && z >= z0 && z <= z1;
  }
};

// Rasterize by voxel center; later boxes overwrite earlier colors.
void fill_box(VoxelVolume& v, const Box& b, const Color& c) {
  const int n = v.resolution;
  for (int k = 0; k < n; ++k) {
    const double z = v.center_coord(k);
    if (z < b.z0 || z > b.z1) continue;
    for (int j = 0; j < n; ++j) {
      const double y = v.center_coord(j);
      if (y < b.y0 || y > b.y1) continue;
      for (int i = 0; i < n; ++i) {
        const double x = v.center_coord(i);
        if (!b.contains(x, y, z)) continue;
        v.occ(i, j, k) = 1.0;
        for (int ch = 0; ch < 3; ++ch) v.color(ch, i, j, k) = c[ch];
      }
    }
  }
}

// Recolor (without changing occupancy) the voxels of `b` that are occupied.
void paint_box(VoxelVolume& v, const Box& b, const Color& c) {
  const int n = v.resolution;
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        if (v.occ(i, j, k) <= 0.0) continue;
        if (!b.contains(v.center_coord(i), v.center_coord(j), v.center_coord(k))) continue;
        for (int ch = 0; ch < 3; ++ch) v.color(ch, i, j, k) = c[ch];
      }
    }
  }
}

VoxelVolume make_car(int n) {
  VoxelVolume v = VoxelVolume::empty(n);
  const Color body{0.25, 0.25, 0.75};
  const Color cabin{0.5, 0.5, 0.625};
  const Color headlight{1.0, 1.0, 1.0};
  const Color taillight{1.0, 0.0, 0.0};
  // Long axis = y (forward). Occupancy is mirror-symmetric in x and y;
  // only the light colors break the front/back symmetry.
  fill_box(v, {-0.22, 0.22, -0.55, 0.55, -0.28, 0.02}, body);
  fill_box(v, {-0.16, 0.16, -0.22, 0.22, 0.02, 0.26}, cabin);
  const double face = 0.55;  // reaches the outermost body layer
  paint_box(v, {0.08, 0.22, face - 0.06, face, -0.12, 0.02}, headlight);
  paint_box(v, {-0.22, -0.08, face - 0.06, face, -0.12, 0.02}, headlight);
  paint_box(v, {0.08, 0.22, -face, -(face - 0.06), -0.12, 0.02}, taillight);
  paint_box(v, {-0.22, -0.08, -face, -(face - 0.06), -0.12, 0.02}, taillight);
  return v;
}

VoxelVolume make_chair(int n) {
  VoxelVolume v = VoxelVolume::empty(n);
  const Color wood{0.5, 0.25, 0.125};
  const Color seat{0.625, 0.375, 0.25};
  const Color back{0.375, 0.1875, 0.125};
  for (double sx : {-1.0, 1.0}) {
    for (double sy : {-1.0, 1.0}) {
      fill_box(v, {sx * 0.3 - 0.05, sx * 0.3 + 0.05, sy * 0.25 - 0.05, sy * 0.25 + 0.05,
                   -0.55, 0.0},
               wood);
    }
  }
  fill_box(v, {-0.35, 0.35, -0.3, 0.3, 0.0, 0.1}, seat);
  fill_box(v, {-0.35, 0.35, 0.22, 0.3, 0.1, 0.55}, back);
  return v;
}

VoxelVolume make_plane(int n) {
  VoxelVolume v = VoxelVolume::empty(n);
  const Color hull{0.75, 0.75, 0.75};
  const Color wing{0.5, 0.5, 0.5};
  const Color fin{1.0, 0.125, 0.125};
  fill_box(v, {-0.1, 0.1, -0.55, 0.55, -0.1, 0.1}, hull);      // fuselage, nose at +y
  fill_box(v, {-0.55, 0.55, -0.08, 0.12, -0.04, 0.04}, wing);  // main wings
  fill_box(v, {-0.3, 0.3, -0.55, -0.45, -0.02, 0.04}, wing);   // tailplane
  fill_box(v, {-0.04, 0.04, -0.55, -0.42, 0.1, 0.35}, fin);    // vertical fin, rear
  return v;
}

VoxelVolume make_cube(int n) {
  VoxelVolume v = VoxelVolume::empty(n);
  const double h = 0.5;
  const double shell = 2.0 / n;  // one voxel layer
  fill_box(v, {-h, h, -h, h, -h, h}, {0.25, 0.25, 0.25});
  paint_box(v, {h - shell, h, -h, h, -h, h}, {1.0, 0.0, 0.0});    // +x red
  paint_box(v, {-h, -h + shell, -h, h, -h, h}, {0.0, 1.0, 0.0});  // -x green
  paint_box(v, {-h, h, h - shell, h, -h, h}, {0.0, 0.0, 1.0});    // +y blue
  paint_box(v, {-h, h, -h, -h + shell, -h, h}, {1.0, 1.0, 0.0});  // -y yellow
  paint_box(v, {-h, h, -h, h, h - shell, h}, {1.0, 0.0, 1.0});    // +z magenta
  paint_box(v, {-h, h, -h, h, -h, -h + shell}, {0.0, 1.0, 1.0});  // -z cyan
  return v;
}

}  // namespace

VoxelVolume make_test_object(ObjectKind kind, int resolution) {
  if (resolution < 16) throw InvalidParam("make_test_object: resolution must be >= 16");
  switch (kind) {
    case ObjectKind::car: return make_car(resolution);
    case ObjectKind::chair: return make_chair(resolution);
    case ObjectKind::plane: return make_plane(resolution);
    case ObjectKind::cube: return make_cube(resolution);
  }
  throw InvalidParam("bad object kind value");
}

VoxelVolume silhouette_of(const VoxelVolume& volume) {
  VoxelVolume out = volume;
  const std::size_t n3 = out.n_voxels();
  for (std::size_t idx = 0; idx < n3; ++idx) {
    if (out.occupancy[idx] > 0.0) {
      out.colors[idx] = 1.0;
      out.colors[n3 + idx] = 1.0;
      out.colors[2 * n3 + idx] = 1.0;
    }
  }
  return out;
}

namespace {

constexpr char kMagic[4] = {'V', 'X', 'V', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

bool get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

void put_f32(std::ostream& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

bool get_f32(std::istream& in, float& f) {
  std::uint32_t bits;
  if (!get_u32(in, bits)) return false;
  std::memcpy(&f, &bits, 4);
  return true;
}

double read_checked_value(std::istream& in, const std::string& path) {
  float f;
  if (!get_f32(in, f)) throw TruncatedFile("voxel file ends early: " + path);
  if (!std::isfinite(f) || f < 0.0f || f > 1.0f) {
    throw ValueOutOfRange("voxel value outside [0, 1] in " + path);
  }
  return static_cast<double>(f);
}

}  // namespace

void write_volume(const VoxelVolume& volume, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(volume.resolution));
  put_u32(out, 4);
  for (double c : volume.colors) put_f32(out, static_cast<float>(c));
  for (double q : volume.occupancy) put_f32(out, static_cast<float>(q));
  if (!out) throw IoError("write failed: " + path);
}

VoxelVolume read_volume(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char magic[4];
  if (!in.read(magic, 4)) throw TruncatedFile("voxel file shorter than header: " + path);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw BadMagic("not a VXV1 file: " + path);
  }
  std::uint32_t resolution = 0, channels = 0;
  if (!get_u32(in, resolution) || !get_u32(in, channels)) {
    throw TruncatedFile("voxel file shorter than header: " + path);
  }
  if (channels != 4) throw BadMagic("VXV1 channel count must be 4");
  if (resolution < 2 || resolution > 4096) {
    throw ValueOutOfRange("VXV1 resolution out of supported range");
  }
  VoxelVolume v = VoxelVolume::empty(static_cast<int>(resolution));
  for (double& c : v.colors) c = read_checked_value(in, path);
  for (double& q : v.occupancy) q = read_checked_value(in, path);
  return v;
}

}  // namespace voxelview
