#include "lensforge/imaging/patch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lensforge/error.hpp"
#include "lensforge/parallel.hpp"

namespace lensforge {

namespace {

constexpr double kSnapRadius = 1e-6;

// Replicate-padded copy of one channel, border c on every side.
std::vector<double> pad_channel(const Image& img, int ch, int c) {
  const int pw = img.width + 2 * c, ph = img.height + 2 * c;
  std::vector<double> out(static_cast<std::size_t>(pw) * ph);
  for (int i = 0; i < ph; ++i) {
    const int y = std::clamp(i - c, 0, img.height - 1);
    double* row = out.data() + static_cast<std::size_t>(i) * pw;
    for (int j = 0; j < pw; ++j) row[j] = img.at(ch, y, std::clamp(j - c, 0, img.width - 1));
  }
  return out;
}

struct Splat {
  int r0, c0;
  double fr, fc;
};

// Destination of source pixel (i, j) under rotation by (cs, sn).
Splat rotated(int i, int j, int c, double cs, double sn) {
  const double u = j - c, v = i - c;
  const double col = c + u * cs - v * sn;
  const double row = c + u * sn + v * cs;
  const double r0 = std::floor(row), c0 = std::floor(col);
  return {static_cast<int>(r0), static_cast<int>(c0), row - r0, col - c0};
}

}  // namespace

std::vector<double> interpolation_weights(double radius, std::span<const double> radii) {
  std::vector<double> w(radii.size(), 0.0);
  if (radii.empty()) throw StructuralError("no sampled fields to interpolate");
  for (std::size_t k = 0; k < radii.size(); ++k)
    if (std::abs(radius - radii[k]) <= kSnapRadius) {
      w[k] = 1.0;
      return w;
    }
  double total = 0.0;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const double d = radius - radii[k];
    w[k] = 1.0 / (d * d);
    total += w[k];
  }
  for (double& v : w) v /= total;
  return w;
}

PatchLayout PatchLayout::make(int width, int height, int size, std::span<const double> field_radii_px) {
  if (size <= 0 || width <= 0 || height <= 0 || width % size != 0 || height % size != 0)
    throw StructuralError("patch size " + std::to_string(size) + " does not tile a " + std::to_string(width) +
                          "x" + std::to_string(height) + " image");
  PatchLayout l;
  l.width = width;
  l.height = height;
  l.size = size;
  l.n_w = width / size;
  l.n_h = height / size;
  l.radii.assign(field_radii_px.begin(), field_radii_px.end());
  for (int r = 0; r < l.n_h; ++r)
    for (int c = 0; c < l.n_w; ++c) {
      PatchInfo p;
      p.row = r;
      p.col = c;
      p.dx = (c + 0.5) * size - 0.5 * width;
      p.dy = (r + 0.5) * size - 0.5 * height;
      p.radius = std::sqrt(p.dx * p.dx + p.dy * p.dy);
      p.beta = std::atan2(p.dy, p.dx);
      p.weights = interpolation_weights(p.radius, l.radii);
      l.patches.push_back(std::move(p));
    }
  return l;
}

std::vector<double> rotate_map(std::span<const double> map, int t, double beta) {
  if (beta == 0.0) return {map.begin(), map.end()};
  std::vector<double> out(static_cast<std::size_t>(t) * t, 0.0);
  const int c = t / 2;
  const double cs = std::cos(beta), sn = std::sin(beta);
  auto add = [&](int r, int q, double v) {
    if (r >= 0 && r < t && q >= 0 && q < t) out[static_cast<std::size_t>(r) * t + q] += v;
  };
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < t; ++j) {
      const double v = map[static_cast<std::size_t>(i) * t + j];
      if (v == 0.0) continue;
      const Splat s = rotated(i, j, c, cs, sn);
      add(s.r0, s.c0, v * (1 - s.fr) * (1 - s.fc));
      add(s.r0, s.c0 + 1, v * (1 - s.fr) * s.fc);
      add(s.r0 + 1, s.c0, v * s.fr * (1 - s.fc));
      add(s.r0 + 1, s.c0 + 1, v * s.fr * s.fc);
    }
  return out;
}

std::vector<double> rotate_map_adjoint(std::span<const double> grad, int t, double beta) {
  if (beta == 0.0) return {grad.begin(), grad.end()};
  std::vector<double> out(static_cast<std::size_t>(t) * t, 0.0);
  const int c = t / 2;
  const double cs = std::cos(beta), sn = std::sin(beta);
  auto get = [&](int r, int q) {
    return (r >= 0 && r < t && q >= 0 && q < t) ? grad[static_cast<std::size_t>(r) * t + q] : 0.0;
  };
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < t; ++j) {
      const Splat s = rotated(i, j, c, cs, sn);
      out[static_cast<std::size_t>(i) * t + j] =
          (1 - s.fr) * (1 - s.fc) * get(s.r0, s.c0) + (1 - s.fr) * s.fc * get(s.r0, s.c0 + 1) +
          s.fr * (1 - s.fc) * get(s.r0 + 1, s.c0) + s.fr * s.fc * get(s.r0 + 1, s.c0 + 1);
    }
  return out;
}

namespace {

std::vector<double> blend(const PsfGrid& grid, const PatchInfo& patch, int ch) {
  std::vector<double> out(static_cast<std::size_t>(grid.size) * grid.size, 0.0);
  for (std::size_t k = 0; k < grid.psf.size(); ++k) {
    const double w = patch.weights[k];
    if (w == 0.0) continue;
    const auto& d = grid.psf[k][ch].data;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * d[i];
  }
  return out;
}

}  // namespace

std::array<std::vector<double>, 3> patch_psf(const PsfGrid& grid, const PatchInfo& patch) {
  if (patch.weights.size() != grid.psf.size()) throw StructuralError("patch weights do not match the PSF grid");
  std::array<std::vector<double>, 3> out;
  for (int ch = 0; ch < 3; ++ch) {
    auto r = rotate_map(blend(grid, patch, ch), grid.size, patch.beta);
    const double s = std::accumulate(r.begin(), r.end(), 0.0);
    if (!(s > 0.0)) throw UnphysicalError("patch PSF rotated outside its support");
    for (double& v : r) v /= s;
    out[ch] = std::move(r);
  }
  return out;
}

void patch_psf_adjoint(const PsfGrid& grid, const PatchInfo& patch,
                       const std::array<std::vector<double>, 3>& grad, std::span<double> grid_grad) {
  const std::size_t n = static_cast<std::size_t>(grid.size) * grid.size;
  if (grid_grad.size() != grid.value_count()) throw StructuralError("gradient buffer does not match the PSF grid");
  for (int ch = 0; ch < 3; ++ch) {
    const auto r = rotate_map(blend(grid, patch, ch), grid.size, patch.beta);
    const double s = std::accumulate(r.begin(), r.end(), 0.0);
    // d(r/s)/dr: g/s - <g, r>/s²
    double gr = 0.0;
    for (std::size_t i = 0; i < n; ++i) gr += grad[ch][i] * r[i];
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = grad[ch][i] / s - gr / (s * s);
    const auto gb = rotate_map_adjoint(g, grid.size, patch.beta);
    for (std::size_t k = 0; k < grid.psf.size(); ++k) {
      const double w = patch.weights[k];
      if (w == 0.0) continue;
      double* dst = grid_grad.data() + (k * 3 + ch) * n;
      for (std::size_t i = 0; i < n; ++i) dst[i] += w * gb[i];
    }
  }
}

Image patch_convolve(const Image& img, const PatchLayout& layout,
                     const std::vector<std::array<std::vector<double>, 3>>& kernels, int t, std::size_t jobs) {
  if (img.width != layout.width || img.height != layout.height || img.channels != 3)
    throw StructuralError("image does not match the patch layout");
  if (kernels.size() != layout.patches.size()) throw StructuralError("one kernel set per patch is required");
  const int c = t / 2, s = layout.size;
  Image out(img.width, img.height, 3);
  for (int ch = 0; ch < 3; ++ch) {
    const auto pad = pad_channel(img, ch, c);
    const std::size_t pw = static_cast<std::size_t>(img.width) + 2 * c;
    parallel_for(layout.patches.size(), jobs, [&](std::size_t p) {
      const PatchInfo& info = layout.patches[p];
      const auto& k = kernels[p][ch];
      const int y0 = info.row * s, x0 = info.col * s;
      for (int ka = 0; ka < t; ++ka)
        for (int kb = 0; kb < t; ++kb) {
          const double w = k[static_cast<std::size_t>(ka) * t + kb];
          if (w == 0.0) continue;
          for (int y = y0; y < y0 + s; ++y) {
            const double* src = pad.data() + static_cast<std::size_t>(y + 2 * c - ka) * pw + (x0 + 2 * c - kb);
            double* dst = &out.at(ch, y, x0);
            for (int x = 0; x < s; ++x) dst[x] += w * src[x];
          }
        }
    });
  }
  return out;
}

std::vector<std::array<std::vector<double>, 3>> patch_convolve_kernel_adjoint(const Image& img,
                                                                             const PatchLayout& layout,
                                                                             const Image& grad_out, int t,
                                                                             std::size_t jobs) {
  if (!img.same_shape(grad_out) || img.width != layout.width || img.height != layout.height)
    throw StructuralError("gradient image does not match the patch layout");
  const int c = t / 2, s = layout.size;
  const std::size_t n = static_cast<std::size_t>(t) * t;
  std::vector<std::array<std::vector<double>, 3>> out(layout.patches.size());
  for (auto& k : out)
    for (auto& ch : k) ch.assign(n, 0.0);
  for (int ch = 0; ch < 3; ++ch) {
    const auto pad = pad_channel(img, ch, c);
    const std::size_t pw = static_cast<std::size_t>(img.width) + 2 * c;
    parallel_for(layout.patches.size(), jobs, [&](std::size_t p) {
      const PatchInfo& info = layout.patches[p];
      const int y0 = info.row * s, x0 = info.col * s;
      auto& dk = out[p][ch];
      for (int ka = 0; ka < t; ++ka)
        for (int kb = 0; kb < t; ++kb) {
          double acc = 0.0;
          for (int y = y0; y < y0 + s; ++y) {
            const double* src = pad.data() + static_cast<std::size_t>(y + 2 * c - ka) * pw + (x0 + 2 * c - kb);
            const double* g = grad_out.data.data() + (static_cast<std::size_t>(ch) * img.height + y) * img.width + x0;
            for (int x = 0; x < s; ++x) acc += g[x] * src[x];
          }
          dk[static_cast<std::size_t>(ka) * t + kb] = acc;
        }
    });
  }
  return out;
}

}  // namespace lensforge
