#include "lensforge/imaging/isp.hpp"

#include <algorithm>
#include <cmath>

#include "lensforge/error.hpp"
#include "lensforge/optifusion/rng.hpp"

namespace lensforge {

namespace {

constexpr double kToeLinear = 0.0031308;
constexpr double kToeSlope = 12.92;

using Mat3 = std::array<double, 9>;

Mat3 inverse(const Mat3& m) {
  const double det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
                     m[2] * (m[3] * m[7] - m[4] * m[6]);
  if (std::abs(det) < 1e-12) throw ConfigError("sensor.ccm must be invertible");
  const double k = 1.0 / det;
  return {(m[4] * m[8] - m[5] * m[7]) * k, (m[2] * m[7] - m[1] * m[8]) * k, (m[1] * m[5] - m[2] * m[4]) * k,
          (m[5] * m[6] - m[3] * m[8]) * k, (m[0] * m[8] - m[2] * m[6]) * k, (m[2] * m[3] - m[0] * m[5]) * k,
          (m[3] * m[7] - m[4] * m[6]) * k, (m[1] * m[6] - m[0] * m[7]) * k, (m[0] * m[4] - m[1] * m[3]) * k};
}

std::array<double, 3> mat_mul(const Mat3& m, const std::array<double, 3>& v) {
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

std::array<double, 3> mat_mul_t(const Mat3& m, const std::array<double, 3>& v) {
  return {m[0] * v[0] + m[3] * v[1] + m[6] * v[2], m[1] * v[0] + m[4] * v[1] + m[7] * v[2],
          m[2] * v[0] + m[5] * v[1] + m[8] * v[2]};
}

void require_rgb(const Image& img, const char* what) {
  if (img.channels != 3) throw StructuralError(std::string(what) + " needs a 3-channel image");
}

struct Tap {
  int idx;
  double w;
};

// Linear interpolation of position p on the lattice {off, off+2, ...} < n.
int lattice(int p, int n, int off, Tap* out) {
  if (((p - off) & 1) == 0) {
    out[0] = {p, 1.0};
    return 1;
  }
  if (p - 1 >= 0 && p + 1 < n) {
    out[0] = {p - 1, 0.5};
    out[1] = {p + 1, 0.5};
    return 2;
  }
  if (p + 1 >= n) {
    out[0] = {p - 1, 1.5};
    out[1] = {p - 3, -0.5};
  } else {
    out[0] = {p + 1, 1.5};
    out[1] = {p + 3, -0.5};
  }
  return 2;
}

// Calls emit(row, col, weight) for each mosaic sample feeding (ch, y, x).
template <class F>
void demosaic_taps(int w, int h, int ch, int y, int x, F&& emit) {
  Tap ty[2], tx[2];
  if (ch == 1) {
    if (bayer_channel(y, x) == 1) {
      emit(y, x, 1.0);
    } else if (y > 0 && y < h - 1 && x > 0 && x < w - 1) {
      emit(y - 1, x, 0.25);
      emit(y + 1, x, 0.25);
      emit(y, x - 1, 0.25);
      emit(y, x + 1, 0.25);
    } else {
      const int nx = lattice(x, w, (y + 1) & 1, tx);
      for (int j = 0; j < nx; ++j) emit(y, tx[j].idx, tx[j].w);
    }
    return;
  }
  const int off = ch == 0 ? 0 : 1;
  const int ny = lattice(y, h, off, ty);
  const int nx = lattice(x, w, off, tx);
  for (int i = 0; i < ny; ++i)
    for (int j = 0; j < nx; ++j) emit(ty[i].idx, tx[j].idx, ty[i].w * tx[j].w);
}

void require_demosaic_size(const Image& img) {
  if (img.width < 4 || img.height < 4) throw StructuralError("demosaic needs at least a 4x4 image");
}

}  // namespace

double srgb_encode(double v, double gamma) {
  return v <= kToeLinear ? kToeSlope * v : 1.055 * std::pow(v, 1.0 / gamma) - 0.055;
}

double srgb_decode(double e, double gamma) {
  return e <= kToeSlope * kToeLinear ? e / kToeSlope : std::pow((e + 0.055) / 1.055, gamma);
}

double srgb_encode_slope(double v, double gamma) {
  return v <= kToeLinear ? kToeSlope : 1.055 / gamma * std::pow(v, 1.0 / gamma - 1.0);
}

double srgb_decode_slope(double e, double gamma) {
  return e <= kToeSlope * kToeLinear ? 1.0 / kToeSlope
                                     : gamma / 1.055 * std::pow((e + 0.055) / 1.055, gamma - 1.0);
}

Image isp_forward(const Image& raw, const SensorModel& sensor) {
  require_rgb(raw, "isp_forward");
  Image out(raw.width, raw.height, 3);
  const std::size_t n = raw.plane();
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 3> v{};
    for (int c = 0; c < 3; ++c) v[c] = sensor.wb_gains[c] * raw.data[c * n + i];
    const auto u = mat_mul(sensor.ccm, v);
    for (int c = 0; c < 3; ++c) out.data[c * n + i] = srgb_encode(std::clamp(u[c], 0.0, 1.0), sensor.gamma);
  }
  return out;
}

Image isp_inverse(const Image& srgb, const SensorModel& sensor) {
  require_rgb(srgb, "isp_inverse");
  const Mat3 inv = inverse(sensor.ccm);
  Image out(srgb.width, srgb.height, 3);
  const std::size_t n = srgb.plane();
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 3> u{};
    for (int c = 0; c < 3; ++c) u[c] = srgb_decode(srgb.data[c * n + i], sensor.gamma);
    const auto v = mat_mul(inv, u);
    for (int c = 0; c < 3; ++c) out.data[c * n + i] = v[c] / sensor.wb_gains[c];
  }
  return out;
}

Image isp_forward_adjoint(const Image& raw, const Image& grad_out, const SensorModel& sensor) {
  require_rgb(raw, "isp_forward_adjoint");
  if (!raw.same_shape(grad_out)) throw StructuralError("isp_forward_adjoint: shapes differ");
  Image out(raw.width, raw.height, 3);
  const std::size_t n = raw.plane();
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 3> v{};
    for (int c = 0; c < 3; ++c) v[c] = sensor.wb_gains[c] * raw.data[c * n + i];
    const auto u = mat_mul(sensor.ccm, v);
    std::array<double, 3> gu{};
    for (int c = 0; c < 3; ++c)
      gu[c] = (u[c] < 0.0 || u[c] > 1.0) ? 0.0 : grad_out.data[c * n + i] * srgb_encode_slope(u[c], sensor.gamma);
    const auto gv = mat_mul_t(sensor.ccm, gu);
    for (int c = 0; c < 3; ++c) out.data[c * n + i] = sensor.wb_gains[c] * gv[c];
  }
  return out;
}

Image isp_inverse_adjoint(const Image& srgb, const Image& grad_out, const SensorModel& sensor) {
  require_rgb(srgb, "isp_inverse_adjoint");
  if (!srgb.same_shape(grad_out)) throw StructuralError("isp_inverse_adjoint: shapes differ");
  const Mat3 inv = inverse(sensor.ccm);
  Image out(srgb.width, srgb.height, 3);
  const std::size_t n = srgb.plane();
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 3> gv{};
    for (int c = 0; c < 3; ++c) gv[c] = grad_out.data[c * n + i] / sensor.wb_gains[c];
    const auto gu = mat_mul_t(inv, gv);
    for (int c = 0; c < 3; ++c)
      out.data[c * n + i] = gu[c] * srgb_decode_slope(srgb.data[c * n + i], sensor.gamma);
  }
  return out;
}

Image mosaic(const Image& rgb) {
  require_rgb(rgb, "mosaic");
  Image out(rgb.width, rgb.height, 1);
  for (int y = 0; y < rgb.height; ++y)
    for (int x = 0; x < rgb.width; ++x) out.at(0, y, x) = rgb.at(bayer_channel(y, x), y, x);
  return out;
}

Image mosaic_adjoint(const Image& g) {
  if (g.channels != 1) throw StructuralError("mosaic_adjoint needs a 1-channel gradient");
  Image out(g.width, g.height, 3);
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) out.at(bayer_channel(y, x), y, x) = g.at(0, y, x);
  return out;
}

Image demosaic(const Image& bayer) {
  if (bayer.channels != 1) throw StructuralError("demosaic needs a 1-channel mosaic");
  require_demosaic_size(bayer);
  Image out(bayer.width, bayer.height, 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < bayer.height; ++y)
      for (int x = 0; x < bayer.width; ++x) {
        double acc = 0.0;
        demosaic_taps(bayer.width, bayer.height, c, y, x,
                      [&](int r, int q, double w) { acc += w * bayer.at(0, r, q); });
        out.at(c, y, x) = acc;
      }
  return out;
}

Image demosaic_adjoint(const Image& g) {
  require_rgb(g, "demosaic_adjoint");
  require_demosaic_size(g);
  Image out(g.width, g.height, 1);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < g.height; ++y)
      for (int x = 0; x < g.width; ++x) {
        const double v = g.at(c, y, x);
        demosaic_taps(g.width, g.height, c, y, x, [&](int r, int q, double w) { out.at(0, r, q) += w * v; });
      }
  return out;
}

void add_sensor_noise(Image& bayer, const SensorModel& sensor, std::uint64_t seed) {
  Stream rng(seed, 0, 0, StreamPhase::Misc);
  const double s2 = sensor.read_sigma * sensor.read_sigma;
  for (double& v : bayer.data) v += std::sqrt(s2 + sensor.shot_gain * std::max(v, 0.0)) * rng.normal();
}

Image degrade_raw(const Image& raw, const PatchLayout& layout,
                  const std::vector<std::array<std::vector<double>, 3>>& kernels, int t,
                  const SensorModel& sensor, const DegradeOptions& opts) {
  Image m = mosaic(patch_convolve(raw, layout, kernels, t, opts.jobs));
  if (opts.noise) add_sensor_noise(m, sensor, opts.seed);
  return demosaic(m);
}

std::vector<std::array<std::vector<double>, 3>> layout_kernels(const PsfGrid& grid, const PatchLayout& layout) {
  std::vector<std::array<std::vector<double>, 3>> out;
  out.reserve(layout.patches.size());
  for (const auto& p : layout.patches) out.push_back(patch_psf(grid, p));
  return out;
}

Image degrade(const Image& srgb, const PsfGrid& grid, const PatchLayout& layout, const SensorModel& sensor,
              const DegradeOptions& opts) {
  if (srgb.width != layout.width || srgb.height != layout.height || srgb.channels != 3)
    throw StructuralError("image is " + std::to_string(srgb.width) + "x" + std::to_string(srgb.height) +
                          ", layout expects " + std::to_string(layout.width) + "x" +
                          std::to_string(layout.height));
  const auto kernels = layout_kernels(grid, layout);
  return isp_forward(degrade_raw(isp_inverse(srgb, sensor), layout, kernels, grid.size, sensor, opts), sensor);
}

}  // namespace lensforge
