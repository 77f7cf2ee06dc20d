#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "voxelview/errors.hpp"

namespace voxelview {

// Scalar field on a cubic grid; shape priors and occupancy residuals.
struct ScalarGrid {
  int resolution = 0;
  std::vector<double> values;  // x fastest, then y, then z

  static ScalarGrid zeros(int resolution);
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * resolution + j) * resolution + i;
  }
  double at(int i, int j, int k) const { return values[index(i, j, k)]; }
  double& at(int i, int j, int k) { return values[index(i, j, k)]; }
};

// Textured occupancy grid. Channel-planar storage (R, G, B planes then Q),
// x fastest, then y, then z. Canonical frame: x right, y forward (depth),
// z up.
struct VoxelVolume {
  int resolution = 0;
  std::vector<double> colors;     // 3 * n^3
  std::vector<double> occupancy;  // n^3

  static VoxelVolume empty(int resolution);

  std::size_t n_voxels() const {
    return static_cast<std::size_t>(resolution) * resolution * resolution;
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * resolution + j) * resolution + i;
  }
  double color(int c, int i, int j, int k) const {
    return colors[c * n_voxels() + index(i, j, k)];
  }
  double& color(int c, int i, int j, int k) {
    return colors[c * n_voxels() + index(i, j, k)];
  }
  double occ(int i, int j, int k) const { return occupancy[index(i, j, k)]; }
  double& occ(int i, int j, int k) { return occupancy[index(i, j, k)]; }

  // Normalized coordinate of a voxel center along one axis, in (-1, 1).
  double center_coord(int i) const { return (i + 0.5) * 2.0 / resolution - 1.0; }
};

// Gaussian shape prior S(x) = amplitude * exp(-|x - c|^2 / (2 (sigma h)^2))
// evaluated at voxel centers; sigma in units of the grid half-extent.
ScalarGrid shape_prior(int resolution, double sigma, double amplitude);

// Q = clamp(S + Q', 0, 1), per voxel.
ScalarGrid apply_prior(const ScalarGrid& residual, const ScalarGrid& prior);

enum class ObjectKind { car, chair, plane, cube };

ObjectKind parse_object_kind(const std::string& name);
std::string object_kind_name(ObjectKind kind);

// Deterministic procedural objects, centered, each axis extent <= 60% of
// the grid. All constants are dyadic so f32 serialization is exact.
VoxelVolume make_test_object(ObjectKind kind, int resolution);

// Same occupancy, all colors forced to 1 where occupied (white mask).
VoxelVolume silhouette_of(const VoxelVolume& volume);

// VXV1 container: magic "VXV1", LE u32 resolution, LE u32 channel count
// (always 4), then 4 channel planes of resolution^3 LE f32 (R, G, B, Q).
VoxelVolume read_volume(const std::string& path);
void write_volume(const VoxelVolume& volume, const std::string& path);

}  // namespace voxelview
