#include "voxelview/dataset.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace voxelview {

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  nlohmann::ordered_json doc;
  doc["volume"] = manifest.volume;
  doc["camera_distance"] = manifest.camera_distance;
  nlohmann::ordered_json items = nlohmann::ordered_json::array();
  for (const ManifestItem& item : manifest.items) {
    items.push_back({{"image", item.image},
                     {"azimuth_deg", item.azimuth_deg},
                     {"elevation_deg", item.elevation_deg}});
  }
  doc["items"] = std::move(items);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw IoError(std::string("malformed manifest JSON: ") + e.what());
  }
  DatasetManifest m;
  try {
    m.volume = doc.at("volume").get<std::string>();
    m.camera_distance = doc.at("camera_distance").get<double>();
    for (const auto& item : doc.at("items")) {
      m.items.push_back({item.at("image").get<std::string>(),
                         item.at("azimuth_deg").get<double>(),
                         item.at("elevation_deg").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("manifest missing fields: ") + e.what());
  }
  return m;
}

}  // namespace voxelview
