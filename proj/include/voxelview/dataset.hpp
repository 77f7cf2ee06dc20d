#pragma once

#include <string>
#include <vector>

#include "voxelview/geometry.hpp"

namespace voxelview {

struct ManifestItem {
  std::string image;
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
};

// Ground-truth record for a rendered dataset directory.
struct DatasetManifest {
  std::string volume;
  double camera_distance = 2.5;
  std::vector<ManifestItem> items;

  Viewpoint viewpoint(std::size_t i) const {
    return euler_to_vector(items[i].azimuth_deg * M_PI / 180.0,
                           items[i].elevation_deg * M_PI / 180.0);
  }
};

void write_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

}  // namespace voxelview
