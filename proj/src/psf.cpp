#include "lensforge/imaging/psf.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "lensforge/error.hpp"
#include "lensforge/parallel.hpp"
#include "lensforge/raytrace/aim.hpp"
#include "lensforge/raytrace/paraxial.hpp"

namespace lensforge {

double Psf::sum() const { return std::accumulate(data.begin(), data.end(), 0.0); }

Psf splat_psf(std::span<const ImageHit> hits, double center_x, double center_y, int t, double pitch_mm,
              double sigma_mm) {
  Psf out;
  out.size = t;
  out.chief_x = center_x;
  out.chief_y = center_y;
  out.data.assign(static_cast<std::size_t>(t) * t, 0.0);
  const int c = t / 2;
  const double inv = 1.0 / (2.0 * sigma_mm * sigma_mm);
  std::vector<double> gx(t), gy(t);
  std::size_t used = 0;
  for (const auto& h : hits) {
    if (!h.valid) continue;
    ++used;
    // The 2-D Gaussian factors into a row profile times a column profile.
    for (int k = 0; k < t; ++k) {
      const double dx = h.x - center_x - (k - c) * pitch_mm;
      const double dy = h.y - center_y - (k - c) * pitch_mm;
      gx[k] = std::exp(-dx * dx * inv);
      gy[k] = std::exp(-dy * dy * inv);
    }
    for (int i = 0; i < t; ++i) {
      double* row = out.data.data() + static_cast<std::size_t>(i) * t;
      for (int j = 0; j < t; ++j) row[j] += gy[i] * gx[j];
    }
  }
  if (used == 0) throw UnphysicalError("PSF has no valid rays");
  const double total = out.sum();
  if (!(total > 0.0) || !std::isfinite(total))
    throw UnphysicalError("PSF energy falls entirely outside the support");
  for (double& v : out.data) v /= total;
  return out;
}

Psf compute_psf(const LensSystem& lens, double field_deg, double wavelength, double depth,
                const SensorModel& sensor) {
  LensSystem open = lens;
  for (auto& s : open.surfaces) s.semi_diameter = std::numeric_limits<double>::infinity();
  const PreparedLens prepared = PreparedLens::make(open, wavelength);
  const auto grid = hexapolar_grid(sensor.pupil_rings);
  AimedBundle bundle;
  try {
    bundle = aim_rays(prepared, stop_radius(open), field_deg, depth, grid);
  } catch (const FieldUnreachableError& e) {
    throw UnphysicalError(e.what());
  }
  std::vector<ImageHit> hits;
  hits.reserve(grid.size());
  for (const Ray& r : bundle.rays) {
    const Ray img = trace_to_image(prepared, r, {false, {}});
    hits.push_back({img.origin.x, img.origin.y, img.valid});
  }
  const Ray chief = trace_to_image(prepared, bundle.chief, {false, {}});
  if (!chief.valid) throw UnphysicalError("chief ray lost while computing PSF");
  return splat_psf(hits, chief.origin.x, chief.origin.y, sensor.psf_size, sensor.pitch_mm(),
                   sensor.psf_sigma_mm());
}

std::vector<double> shift_map(std::span<const double> map, int t, double dx, double dy) {
  std::vector<double> out(static_cast<std::size_t>(t) * t, 0.0);
  const double fx = std::floor(dx), fy = std::floor(dy);
  const double ax = dx - fx, ay = dy - fy;
  const int ix = static_cast<int>(fx), iy = static_cast<int>(fy);
  // Output (i, j) samples the input at (i - dy, j - dx).
  auto in = [&](int r, int c) -> double {
    if (r < 0 || r >= t || c < 0 || c >= t) return 0.0;
    return map[static_cast<std::size_t>(r) * t + c];
  };
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < t; ++j) {
      const int r0 = i - iy, c0 = j - ix;
      out[static_cast<std::size_t>(i) * t + j] =
          (1 - ay) * ((1 - ax) * in(r0, c0) + ax * in(r0, c0 - 1)) +
          ay * ((1 - ax) * in(r0 - 1, c0) + ax * in(r0 - 1, c0 - 1));
    }
  return out;
}

std::array<ChannelPsf, 3> rgb_psf(const std::array<std::vector<Psf>, 3>& per_channel,
                                  const SensorModel& sensor) {
  std::array<ChannelPsf, 3> out;
  for (int c = 0; c < 3; ++c) {
    if (per_channel[c].size() != sensor.channel_response[c].size())
      throw ConfigError("channel PSF count does not match the spectral response table");
    double total = 0.0;
    for (const auto& s : sensor.channel_response[c]) total += s.weight;
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("spectral weights must sum to 1");
  }
  const int t = per_channel[1].front().size;
  double anchor = 0.0;
  for (std::size_t k = 0; k < per_channel[1].size(); ++k)
    anchor += sensor.channel_response[1][k].weight * per_channel[1][k].chief_x;

  const double pitch = sensor.pitch_mm();
  for (int c = 0; c < 3; ++c) {
    auto& ch = out[c];
    ch.anchor_x = anchor;
    ch.data.assign(static_cast<std::size_t>(t) * t, 0.0);
    double centroid = 0.0;
    for (std::size_t k = 0; k < per_channel[c].size(); ++k) {
      const Psf& p = per_channel[c][k];
      if (p.size != t) throw StructuralError("PSF sizes differ between wavelengths");
      const double w = sensor.channel_response[c][k].weight;
      if (w == 0.0) continue;
      const double sx = (p.chief_x - anchor) / pitch;
      const double sy = p.chief_y / pitch;
      centroid += w * p.chief_x;
      const auto shifted = (sx == 0.0 && sy == 0.0) ? p.data : shift_map(p.data, t, sx, sy);
      for (std::size_t i = 0; i < ch.data.size(); ++i) ch.data[i] += w * shifted[i];
    }
    const double s = std::accumulate(ch.data.begin(), ch.data.end(), 0.0);
    if (!(s > 0.0)) throw UnphysicalError("channel PSF shifted outside its support");
    for (double& v : ch.data) v /= s;
    ch.offset_px = (centroid - anchor) / pitch;
  }
  return out;
}

std::vector<double> PsfGrid::flatten() const {
  std::vector<double> out;
  out.reserve(value_count());
  for (const auto& f : psf)
    for (const auto& ch : f) out.insert(out.end(), ch.data.begin(), ch.data.end());
  return out;
}

void PsfGrid::assign(std::span<const double> values) {
  if (values.size() != value_count()) throw StructuralError("PSF grid size mismatch");
  std::size_t k = 0;
  for (auto& f : psf)
    for (auto& ch : f)
      for (double& v : ch.data) v = values[k++];
}

std::vector<double> uniform_fields(double hfov_deg, int fields) {
  std::vector<double> out;
  if (fields <= 1) return {0.0};
  for (int k = 0; k < fields; ++k) out.push_back(hfov_deg * k / (fields - 1));
  return out;
}

PsfGrid build_psf_grid(const LensSystem& lens, std::span<const double> fields_deg, double depth,
                       const SensorModel& sensor, std::size_t jobs) {
  PsfGrid grid;
  grid.size = sensor.psf_size;
  grid.depth = depth;
  grid.fields_deg.assign(fields_deg.begin(), fields_deg.end());
  const std::size_t nf = fields_deg.size();

  struct Job {
    std::size_t field;
    int channel;
    std::size_t sample;
  };
  std::vector<Job> work;
  for (std::size_t f = 0; f < nf; ++f)
    for (int c = 0; c < 3; ++c)
      for (std::size_t k = 0; k < sensor.channel_response[c].size(); ++k) work.push_back({f, c, k});
  std::vector<Psf> maps(work.size());
  parallel_for(work.size(), jobs, [&](std::size_t i) {
    const Job& j = work[i];
    maps[i] = compute_psf(lens, fields_deg[j.field], sensor.channel_response[j.channel][j.sample].wavelength,
                          depth, sensor);
  });

  std::size_t i = 0;
  for (std::size_t f = 0; f < nf; ++f) {
    std::array<std::vector<Psf>, 3> per_channel;
    for (int c = 0; c < 3; ++c)
      for (std::size_t k = 0; k < sensor.channel_response[c].size(); ++k) per_channel[c].push_back(std::move(maps[i++]));
    grid.psf.push_back(rgb_psf(per_channel, sensor));
    grid.radius_px.push_back(std::abs(grid.psf.back()[1].anchor_x) / sensor.pitch_mm());
  }
  return grid;
}

}  // namespace lensforge
