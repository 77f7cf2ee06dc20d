#include "voxelview/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace voxelview {

RenderedImage RenderedImage::black(int width, int height) {
  if (width < 1 || height < 1) throw InvalidParam("image dimensions must be positive");
  RenderedImage img;
  img.width = width;
  img.height = height;
  img.rgb.assign(3 * img.n_pixels(), 0.0);
  img.alpha.assign(img.n_pixels(), 0.0);
  return img;
}

double mse_rgb(const RenderedImage& a, const RenderedImage& b) {
  if (a.width != b.width || a.height != b.height) {
    throw LengthMismatch("mse_rgb: image dimensions differ");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = a.rgb[i] - b.rgb[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.rgb.size());
}

namespace {

// Round half to even, the default FP rounding mode.
unsigned char to_byte(double v) {
  const double scaled = std::clamp(v, 0.0, 1.0) * 255.0;
  return static_cast<unsigned char>(std::nearbyint(scaled));
}

void skip_ppm_whitespace(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      in.get();
    } else {
      return;
    }
  }
}

int read_ppm_int(std::istream& in, const std::string& path) {
  skip_ppm_whitespace(in);
  int value = 0;
  if (!(in >> value)) throw TruncatedFile("PPM header ends early: " + path);
  return value;
}

}  // namespace

void write_ppm(const RenderedImage& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(image.width) * 3);
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      row[3 * c + 0] = to_byte(image.channel(0, r, c));
      row[3 * c + 1] = to_byte(image.channel(1, r, c));
      row[3 * c + 2] = to_byte(image.channel(2, r, c));
    }
    out.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!out) throw IoError("write failed: " + path);
}

void write_pgm_alpha(const RenderedImage& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "P5\n" << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(image.width));
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      row[c] = to_byte(image.alpha[image.index(r, c)]);
    }
    out.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!out) throw IoError("write failed: " + path);
}

RenderedImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (!in || m0 != 'P' || m1 != '6') throw BadMagic("not a binary PPM: " + path);
  const int width = read_ppm_int(in, path);
  const int height = read_ppm_int(in, path);
  const int maxval = read_ppm_int(in, path);
  if (width < 1 || height < 1 || maxval != 255) {
    throw ValueOutOfRange("unsupported PPM geometry in " + path);
  }
  in.get();  // single whitespace after maxval
  RenderedImage img = RenderedImage::black(width, height);
  std::vector<unsigned char> row(static_cast<std::size_t>(width) * 3);
  for (int r = 0; r < height; ++r) {
    if (!in.read(reinterpret_cast<char*>(row.data()), row.size())) {
      throw TruncatedFile("PPM pixel data ends early: " + path);
    }
    for (int c = 0; c < width; ++c) {
      img.channel(0, r, c) = row[3 * c + 0] / 255.0;
      img.channel(1, r, c) = row[3 * c + 1] / 255.0;
      img.channel(2, r, c) = row[3 * c + 2] / 255.0;
    }
  }
  return img;
}

}  // namespace voxelview
