#include "lensforge/raytrace/aim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "lensforge/error.hpp"
#include "lensforge/raytrace/paraxial.hpp"

namespace lensforge {

namespace {

struct Vec2 {
  double x = 0.0, y = 0.0;
  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double norm() const { return std::sqrt(x * x + y * y); }
  double norm2() const { return x * x + y * y; }
};

struct Mat2 {
  double a = 1.0, b = 0.0, c = 0.0, d = 1.0;  // [[a b] [c d]]

  Vec2 operator*(const Vec2& v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
  std::optional<Vec2> solve(const Vec2& r) const {
    const double det = a * d - b * c;
    if (det == 0.0 || !std::isfinite(det)) return std::nullopt;
    return Vec2{(d * r.x - b * r.y) / det, (a * r.y - c * r.x) / det};
  }
};

class StopMap {
 public:
  StopMap(const PreparedLens& lens, const Vec3& object) : lens_(lens), object_(object) {}

  // Stop-plane hit of the ray launched through p; nullopt for a lost ray.
  std::optional<Vec2> operator()(const Vec2& p) const {
    const Ray r = trace_to_surface(lens_, launch_ray(object_, p.x, p.y, lens_.wavelength),
                                   lens_.stop_index, {false, {}});
    if (!r.valid) return std::nullopt;
    return Vec2{r.origin.x, r.origin.y};
  }

  std::optional<Mat2> jacobian(const Vec2& p, double h) const {
    const auto xp = (*this)({p.x + h, p.y}), xm = (*this)({p.x - h, p.y});
    const auto yp = (*this)({p.x, p.y + h}), ym = (*this)({p.x, p.y - h});
    if (!xp || !xm || !yp || !ym) return std::nullopt;
    const double s = 0.5 / h;
    return Mat2{(xp->x - xm->x) * s, (yp->x - ym->x) * s, (xp->y - xm->y) * s, (yp->y - ym->y) * s};
  }

 private:
  const PreparedLens& lens_;
  Vec3 object_;
};

// Newton with a fresh finite-difference Jacobian each step.
std::optional<Vec2> newton_aim(const StopMap& map, Vec2 p, const Vec2& target, double h,
                               const AimOptions& o, Mat2* jacobian_out) {
  auto g = map(p);
  if (!g) return std::nullopt;
  Vec2 r = *g - target;
  for (int it = 0; it <= o.max_iterations; ++it) {
    if (r.norm() <= o.tolerance) {
      if (jacobian_out) {
        if (auto j = map.jacobian(p, h)) *jacobian_out = *j;
        else return std::nullopt;
      }
      return p;
    }
    if (it == o.max_iterations) break;
    const auto j = map.jacobian(p, h);
    if (!j) return std::nullopt;
    const auto step = j->solve(r * -1.0);
    if (!step) return std::nullopt;
    double scale = 1.0;
    bool moved = false;
    for (int k = 0; k < 8 && !moved; ++k, scale *= 0.5) {
      const Vec2 cand = p + *step * scale;
      if (auto gc = map(cand)) {
        p = cand;
        r = *gc - target;
        moved = true;
      }
    }
    if (!moved) return std::nullopt;
  }
  return std::nullopt;
}

// Broyden secant iteration seeded with a Jacobian estimate.
std::optional<Vec2> broyden_aim(const StopMap& map, Vec2 p, const Vec2& target, Mat2& b,
                                const AimOptions& o) {
  auto g = map(p);
  if (!g) return std::nullopt;
  Vec2 r = *g - target;
  for (int it = 0; it < o.max_iterations; ++it) {
    if (r.norm() <= o.tolerance) return p;
    const auto step = b.solve(r * -1.0);
    if (!step) return std::nullopt;
    Vec2 dp = *step;
    std::optional<Vec2> gn;
    for (int k = 0; k < 8; ++k) {
      gn = map(p + dp);
      if (gn) break;
      dp = dp * 0.5;
    }
    if (!gn) return std::nullopt;
    const Vec2 rn = *gn - target;
    const Vec2 dr = rn - r;
    const double dd = dp.x * dp.x + dp.y * dp.y;
    if (dd == 0.0) return r.norm() <= o.tolerance ? std::optional<Vec2>(p) : std::nullopt;
    const Vec2 u = (dr - b * dp) * (1.0 / dd);
    b.a += u.x * dp.x;
    b.b += u.x * dp.y;
    b.c += u.y * dp.x;
    b.d += u.y * dp.y;
    p = p + dp;
    r = rn;
  }
  return r.norm() <= o.tolerance ? std::optional<Vec2>(p) : std::nullopt;
}

}  // namespace

std::vector<PupilPoint> hexapolar_grid(int rings) {
  std::vector<PupilPoint> grid{{0.0, 0.0}};
  for (int k = 1; k <= rings; ++k) {
    const double rho = static_cast<double>(k) / rings;
    const int count = 6 * k;
    for (int j = 0; j < count; ++j) {
      const double phi = 2.0 * std::numbers::pi * j / count;
      grid.push_back({rho * std::cos(phi), rho * std::sin(phi)});
    }
  }
  return grid;
}

Vec3 object_point(double field_deg, double object_distance) {
  const double d = std::min(object_distance, kInfiniteDistance);
  return {-d * std::tan(field_deg * std::numbers::pi / 180.0), 0.0, -d};
}

Ray launch_ray(const Vec3& object, double px, double py, double wavelength) {
  Ray r;
  r.origin = {px, py, 0.0};
  r.direction = Vec3{px - object.x, py - object.y, -object.z}.normalized();
  r.wavelength = wavelength;
  return r;
}

AimedBundle aim_rays(const PreparedLens& lens, double stop_radius, double field_deg,
                     double object_distance, std::span<const PupilPoint> grid,
                     const AimOptions& options, const AimedBundle* hint) {
  if (hint && hint->rays.size() != grid.size()) hint = nullptr;
  const Vec3 object = object_point(field_deg, object_distance);
  const StopMap map(lens, object);
  const double h = 1e-6 * std::max(1.0, stop_radius);

  Mat2 jac;
  const Vec2 chief_start = hint ? Vec2{hint->chief.origin.x, hint->chief.origin.y} : Vec2{};
  auto chief_p = newton_aim(map, chief_start, {0.0, 0.0}, h, options, &jac);
  if (!chief_p && hint) chief_p = newton_aim(map, {0.0, 0.0}, {0.0, 0.0}, h, options, &jac);
  if (!chief_p)
    throw FieldUnreachableError("chief ray cannot be aimed at field " + std::to_string(field_deg) +
                                " deg, wavelength " + std::to_string(lens.wavelength) + " nm");

  AimedBundle out;
  out.chief = launch_ray(object, chief_p->x, chief_p->y, lens.wavelength);

  // The stop map is mirror-symmetric in y for fields along +x, so only the
  // upper half of the pupil is solved; lower points reuse their mirror image.
  std::vector<std::optional<Vec2>> solved(grid.size());
  std::vector<Mat2> secant(grid.size(), jac);
  const bool hint_jac = hint && hint->jacobians.size() == grid.size();
  // Start each ray from its hint, or else from the chief ray or the
  // previously aimed point, whichever is closer on the stop.
  std::optional<std::size_t> last;
  auto solve = [&](std::size_t i) -> std::optional<Vec2> {
    const PupilPoint& g = grid[i];
    const Vec2 target{g.x * stop_radius, std::abs(g.y) * stop_radius};
    if (target.norm() == 0.0) return chief_p;
    Vec2 base = *chief_p;
    Vec2 base_target{0.0, 0.0};
    Mat2 b = jac;
    if (hint && hint->rays[i].valid) {
      base = {hint->rays[i].origin.x, std::abs(hint->rays[i].origin.y)};
      base_target = target;
      if (hint_jac) {
        const auto& m = hint->jacobians[i];
        b = {m[0], g.y < 0.0 ? -m[1] : m[1], g.y < 0.0 ? -m[2] : m[2], m[3]};
      }
    } else if (last && solved[*last]) {
      const Vec2 tj{grid[*last].x * stop_radius, std::abs(grid[*last].y) * stop_radius};
      if ((target - tj).norm2() < target.norm2()) {
        base = *solved[*last];
        base_target = tj;
        b = secant[*last];
      }
    }
    last = i;
    const auto guess = b.solve(target - base_target);
    if (!guess) return std::nullopt;
    auto p = broyden_aim(map, base + *guess, target, b, options);
    if (p) {
      secant[i] = b;
      return p;
    }
    b = jac;
    return newton_aim(map, *chief_p + *jac.solve(target), target, h, options, nullptr);
  };
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid[i].y >= 0.0) solved[i] = solve(i);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i].y >= 0.0) continue;
    bool mirrored = false;
    for (std::size_t j = 0; j < grid.size() && !mirrored; ++j) {
      if (grid[j].y < 0.0 || std::abs(grid[j].x - grid[i].x) > 1e-12 ||
          std::abs(grid[j].y + grid[i].y) > 1e-12)
        continue;
      solved[i] = solved[j];
      secant[i] = secant[j];
      mirrored = true;
    }
    if (!mirrored) solved[i] = solve(i);
  }

  out.rays.reserve(grid.size());
  out.jacobians.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& p = solved[i];
    const double sign = grid[i].y < 0.0 ? -1.0 : 1.0;
    // Solves run in the mirrored upper half; flip the off-diagonal terms back.
    const Mat2& b = secant[i];
    out.jacobians.push_back({b.a, sign * b.b, sign * b.c, b.d});
    if (p) {
      out.rays.push_back(launch_ray(object, p->x, sign * p->y, lens.wavelength));
    } else {
      Ray lost = launch_ray(object, 0.0, 0.0, lens.wavelength);
      lost.valid = false;
      out.rays.push_back(lost);
    }
  }
  return out;
}

AimedBundle aim_rays(const LensSystem& lens, double field_deg, double wavelength,
                     double object_distance, std::span<const PupilPoint> grid,
                     const AimOptions& options) {
  PreparedLens prepared = PreparedLens::make(lens, wavelength);
  return aim_rays(prepared, stop_radius(lens), field_deg, object_distance, grid, options);
}

}  // namespace lensforge
