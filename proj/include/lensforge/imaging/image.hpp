#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace lensforge {

// Planar float image: data[(c * height + y) * width + x].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(width) * height; }
  double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

double mse(const Image& a, const Image& b);

// 8- or 16-bit PNG in, values scaled to [0, 1]; gray and alpha are folded to RGB.
Image read_png(const std::string& path);
// Values are clamped to [0, 1] and rounded.
void write_png(const std::string& path, const Image& img, int bit_depth = 8);

// Single-channel portable float map.
void write_pfm(const std::string& path, int width, int height, const std::vector<double>& values);
std::vector<double> read_pfm(const std::string& path, int& width, int& height);

}  // namespace lensforge
