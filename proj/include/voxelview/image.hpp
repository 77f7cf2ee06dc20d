#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "voxelview/errors.hpp"

namespace voxelview {

// 2D raster produced by compositing. Planar rgb (R, G, B), row-major with
// row 0 at the top; alpha is the accumulated per-pixel opacity.
struct RenderedImage {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;    // 3 * width * height
  std::vector<double> alpha;  // width * height

  static RenderedImage black(int width, int height);

  std::size_t n_pixels() const {
    return static_cast<std::size_t>(width) * height;
  }
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * width + col;
  }
  double channel(int c, int row, int col) const {
    return rgb[c * n_pixels() + index(row, col)];
  }
  double& channel(int c, int row, int col) {
    return rgb[c * n_pixels() + index(row, col)];
  }
};

// Mean squared error over the rgb planes.
double mse_rgb(const RenderedImage& a, const RenderedImage& b);

// Binary PPM (P6, maxval 255); values scaled by 255 and rounded
// half-to-even. Alpha goes to a separate PGM (P5).
void write_ppm(const RenderedImage& image, const std::string& path);
void write_pgm_alpha(const RenderedImage& image, const std::string& path);
RenderedImage read_ppm(const std::string& path);  // alpha comes back zeroed

}  // namespace voxelview
