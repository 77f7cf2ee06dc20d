#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "voxelview/dataset.hpp"
#include "voxelview/image.hpp"
#include "voxelview/rng.hpp"

using namespace voxelview;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "voxelview_image_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("PPM round trip within quantization") {
  Rng rng(3);
  RenderedImage img = RenderedImage::black(17, 9);
  for (double& v : img.rgb) v = rng.uniform01();
  for (double& a : img.alpha) a = rng.uniform01();
  const fs::path path = temp_file("img.ppm");
  write_ppm(img, path.string());
  const RenderedImage back = read_ppm(path.string());
  REQUIRE(back.width == img.width);
  REQUIRE(back.height == img.height);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) {
    REQUIRE(std::abs(back.rgb[i] - img.rgb[i]) <= 0.5 / 255.0 + 1e-12);
  }
}

TEST_CASE("byte quantization rounds half to even") {
  RenderedImage img = RenderedImage::black(2, 1);
  // 0.5 * 255 = 127.5 is the one exact tie in [0, 1]; even neighbor is 128.
  img.channel(0, 0, 0) = 0.5;
  img.channel(0, 0, 1) = 0.25;  // 63.75 rounds up to 64
  const fs::path path = temp_file("round.ppm");
  write_ppm(img, path.string());
  std::ifstream in(path, std::ios::binary);
  std::string header;
  std::getline(in, header);  // P6
  std::getline(in, header);  // dims
  std::getline(in, header);  // maxval
  unsigned char bytes[6];
  in.read(reinterpret_cast<char*>(bytes), 6);
  CHECK(bytes[0] == 128);
  CHECK(bytes[3] == 64);
}

TEST_CASE("PGM alpha output has the right header and size") {
  RenderedImage img = RenderedImage::black(5, 4);
  for (std::size_t i = 0; i < img.alpha.size(); ++i) img.alpha[i] = 1.0;
  const fs::path path = temp_file("alpha.pgm");
  write_pgm_alpha(img, path.string());
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  in >> magic;
  CHECK(magic == "P5");
  int w, h, maxval;
  in >> w >> h >> maxval;
  CHECK(w == 5);
  CHECK(h == 4);
  CHECK(maxval == 255);
  CHECK(fs::file_size(path) >= 5 * 4);
}

TEST_CASE("PPM reader rejects other formats and short files") {
  const fs::path bad = temp_file("bad.ppm");
  std::ofstream(bad) << "P3\n2 2\n255\n0 0 0";
  CHECK_THROWS_AS(read_ppm(bad.string()), BadMagic);
  const fs::path cut = temp_file("cut.ppm");
  std::ofstream(cut, std::ios::binary) << "P6\n4 4\n255\nxx";
  CHECK_THROWS_AS(read_ppm(cut.string()), TruncatedFile);
}

TEST_CASE("manifest round trip") {
  DatasetManifest m;
  m.volume = "car.vxv";
  m.camera_distance = 2.5;
  m.items = {{"img_000.ppm", 12.5, -4.0}, {"img_001.ppm", 270.0, 33.0}};
  const fs::path path = temp_file("manifest.json");
  write_manifest(m, path.string());
  const DatasetManifest back = read_manifest(path.string());
  REQUIRE(back.items.size() == 2);
  CHECK(back.volume == m.volume);
  CHECK(back.camera_distance == m.camera_distance);
  CHECK(back.items[1].image == "img_001.ppm");
  CHECK(back.items[1].azimuth_deg == 270.0);
  CHECK(back.items[0].elevation_deg == -4.0);
  const Viewpoint v = back.viewpoint(1);
  CHECK(v.azimuth() == doctest::Approx(270.0 * M_PI / 180.0).epsilon(1e-9));
}

TEST_CASE("pose file parsers") {
  const fs::path csv = temp_file("poses.csv");
  std::ofstream(csv) << "azimuth_deg,elevation_deg\n30,10\n180,-20\n";
  const auto from_csv = read_pose_csv(csv.string());
  REQUIRE(from_csv.size() == 2);
  CHECK(from_csv[0].azimuth() == doctest::Approx(30.0 * M_PI / 180.0).epsilon(1e-9));
  CHECK(from_csv[1].elevation() == doctest::Approx(-20.0 * M_PI / 180.0).epsilon(1e-9));

  const fs::path json = temp_file("poses.json");
  std::ofstream(json) << "[[1,0,0],[0,0.6,0.8]]";
  const auto from_json = read_pose_json(json.string());
  REQUIRE(from_json.size() == 2);
  CHECK(from_json[1].v.z() == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(from_json[1].v.norm() == doctest::Approx(1.0).epsilon(1e-9));

  std::ofstream(json) << "{\"not\": \"an array\"}";
  CHECK_THROWS_AS(read_pose_json(json.string()), IoError);
}
