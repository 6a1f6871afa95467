#include "lensforge/imaging/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "lensforge/error.hpp"

namespace lensforge {

double mse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw StructuralError("mse: image shapes differ");
  if (a.data.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return s / static_cast<double>(a.data.size());
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image read_png(const std::string& path) {
  File f(std::fopen(path.c_str(), "rb"));
  if (!f) throw ConfigError("cannot open image '" + path + "'");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) throw Error("libpng initialization failed");
  Image img;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ConfigError("'" + path + "' is not a readable PNG");
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  depth = png_get_bit_depth(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const std::size_t stride = png_get_rowbytes(png, info);
  buffer.resize(stride * h);
  rows.resize(h);
  for (int y = 0; y < h; ++y) rows[y] = buffer.data() + stride * y;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  img = Image(w, h, 3);
  const double scale = depth == 16 ? 65535.0 : 255.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double v;
        if (depth == 16) {
          std::uint16_t s;
          std::memcpy(&s, rows[y] + (x * 3 + c) * 2, 2);
          v = s;
        } else {
          v = rows[y][x * 3 + c];
        }
        img.at(c, y, x) = v / scale;
      }
  return img;
}

void write_png(const std::string& path, const Image& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ConfigError("PNG bit depth must be 8 or 16");
  if (img.channels != 3 && img.channels != 1) throw StructuralError("PNG output needs 1 or 3 channels");
  File f(std::fopen(path.c_str(), "wb"));
  if (!f) throw Error("cannot write '" + path + "'");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) throw Error("libpng initialization failed");
  const int bytes = bit_depth / 8;
  const std::size_t stride = static_cast<std::size_t>(img.width) * 3 * bytes;
  std::vector<png_byte> buffer(stride * img.height);
  const double scale = bit_depth == 16 ? 65535.0 : 255.0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(img.at(img.channels == 1 ? 0 : c, y, x), 0.0, 1.0);
        const auto q = static_cast<unsigned>(std::lround(v * scale));
        png_bytep p = buffer.data() + y * stride + (static_cast<std::size_t>(x) * 3 + c) * bytes;
        if (bytes == 2) {
          p[0] = static_cast<png_byte>(q >> 8);
          p[1] = static_cast<png_byte>(q & 0xff);
        } else {
          p[0] = static_cast<png_byte>(q);
        }
      }
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y) rows[y] = buffer.data() + y * stride;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG encoding failed for '" + path + "'");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.width, img.height, bit_depth, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_pfm(const std::string& path, int width, int height, const std::vector<double>& values) {
  if (values.size() != static_cast<std::size_t>(width) * height)
    throw StructuralError("PFM: value count does not match dimensions");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << "Pf\n" << width << " " << height << "\n-1.0\n";
  // Rows run bottom to top; -1 scale marks little-endian floats.
  for (int y = height - 1; y >= 0; --y)
    for (int x = 0; x < width; ++x) {
      const float v = static_cast<float>(values[static_cast<std::size_t>(y) * width + x]);
      unsigned char b[4];
      std::memcpy(b, &v, 4);
      out.write(reinterpret_cast<const char*>(b), 4);
    }
}

std::vector<double> read_pfm(const std::string& path, int& width, int& height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::string magic;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  in.get();
  if (magic != "Pf" || width <= 0 || height <= 0 || scale >= 0.0)
    throw ConfigError("'" + path + "' is not a little-endian grayscale PFM");
  std::vector<double> values(static_cast<std::size_t>(width) * height);
  for (int y = height - 1; y >= 0; --y)
    for (int x = 0; x < width; ++x) {
      float v;
      in.read(reinterpret_cast<char*>(&v), 4);
      values[static_cast<std::size_t>(y) * width + x] = v;
    }
  if (!in) throw ConfigError("'" + path + "' is truncated");
  return values;
}

}  // namespace lensforge
