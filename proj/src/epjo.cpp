#include "lensforge/epjo/epjo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "lensforge/error.hpp"
#include "lensforge/merit/losses.hpp"
#include "lensforge/merit/optifusion_loss.hpp"
#include "lensforge/parallel.hpp"

namespace lensforge {

double LearningRates::of(ParamRole role) const {
  switch (role) {
    case ParamRole::Curvature: return curvature;
    case ParamRole::Spacing: return spacing;
    case ParamRole::IndexD: return index;
    case ParamRole::AbbeD: return abbe;
  }
  return 0.0;
}

void EpjoConfig::validate() const {
  if (!(alpha_iq >= 0.0) || !(alpha1 >= 0.0) || !(alpha2 >= 0.0))
    throw ConfigError("epjo: loss weights must be non-negative");
  if (n_o < 1) throw ConfigError("epjo.n_o must be at least 1");
  if (depths.size() != 3) throw ConfigError("epjo.depths must list exactly 3 object distances");
  for (double d : depths)
    if (!(d > 0.0)) throw ConfigError("epjo.depths must be positive");
  if (fields < 1) throw ConfigError("epjo.fields must be at least 1");
  if (!(fd_step > 0.0)) throw ConfigError("epjo.fd_step must be positive");
  if (!(rates.curvature > 0.0 && rates.spacing > 0.0 && rates.index > 0.0 && rates.abbe > 0.0))
    throw ConfigError("epjo learning rates must be positive");
}

double image_quality_loss(std::span<const Image> recon, const Image& truth, double alpha2,
                          std::vector<Image>* grads) {
  if (recon.size() != 3) throw StructuralError("image_quality_loss needs three depth renders");
  for (const auto& r : recon)
    if (!r.same_shape(truth)) throw StructuralError("image_quality_loss: render and ground truth differ in shape");
  double loss = 0.0;
  for (int j = 0; j < 3; ++j) loss += mse(recon[j], truth) / 3.0;
  for (int j : {0, 2}) loss += alpha2 * mse(recon[j], recon[1]);
  if (grads) {
    const double n = static_cast<double>(truth.data.size());
    grads->assign(3, Image(truth.width, truth.height, truth.channels));
    for (int j = 0; j < 3; ++j)
      for (std::size_t i = 0; i < truth.data.size(); ++i)
        (*grads)[j].data[i] = 2.0 / 3.0 * (recon[j].data[i] - truth.data[i]) / n;
    for (int j : {0, 2})
      for (std::size_t i = 0; i < truth.data.size(); ++i) {
        const double g = 2.0 * alpha2 * (recon[j].data[i] - recon[1].data[i]) / n;
        (*grads)[j].data[i] += g;
        (*grads)[1].data[i] -= g;
      }
  }
  return loss;
}

AdjointState adjoint_stage1(const PsfFunction& psfs, std::span<const double> xi, std::span<const double> steps,
                            std::span<const double> lo, std::span<const double> hi, const std::vector<bool>& free,
                            std::size_t jobs) {
  const std::size_t p = xi.size();
  std::vector<std::size_t> coords;
  for (std::size_t k = 0; k < p; ++k)
    if (free[k]) coords.push_back(k);
  // slot 0: center; then (plus, minus) per free coordinate
  std::vector<double> at(1 + 2 * coords.size());
  for (std::size_t j = 0; j < coords.size(); ++j) {
    const std::size_t k = coords[j];
    at[1 + 2 * j] = std::min(xi[k] + steps[k], hi[k]);
    at[2 + 2 * j] = std::max(xi[k] - steps[k], lo[k]);
  }
  std::vector<std::optional<std::vector<double>>> out(at.size());
  parallel_for(at.size(), jobs, [&](std::size_t s) {
    std::vector<double> x(xi.begin(), xi.end());
    if (s > 0) x[coords[(s - 1) / 2]] = at[s];
    try {
      out[s] = psfs(x);
    } catch (const Error&) {
      if (s == 0) throw;
    }
  });

  AdjointState st;
  st.params = p;
  st.f = std::move(*out[0]);
  const std::size_t n = st.f.size();
  st.jacobian.assign(n * p, 0.0);
  for (std::size_t j = 0; j < coords.size(); ++j) {
    const std::size_t k = coords[j];
    auto& plus = out[1 + 2 * j];
    auto& minus = out[2 + 2 * j];
    const std::vector<double>* a = plus ? &*plus : &st.f;
    const std::vector<double>* b = minus ? &*minus : &st.f;
    const double da = plus ? at[1 + 2 * j] : xi[k];
    const double db = minus ? at[2 + 2 * j] : xi[k];
    if (da == db) continue;
    if (a->size() != n || b->size() != n) throw StructuralError("PSF vector length changed under perturbation");
    double* col = st.jacobian.data() + k * n;
    for (std::size_t i = 0; i < n; ++i) col[i] = ((*a)[i] - (*b)[i]) / (da - db);
    plus.reset();
    minus.reset();
  }
  return st;
}

std::vector<double> adjoint_product(const AdjointState& state, std::span<const double> grad_f) {
  const std::size_t n = state.f.size();
  if (grad_f.size() != n) throw StructuralError("dL/dF does not match the PSF vector");
  std::vector<double> g(state.params, 0.0);
  for (std::size_t k = 0; k < state.params; ++k) {
    const double* col = state.jacobian.data() + k * n;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += col[i] * grad_f[i];
    g[k] = acc;
  }
  return g;
}

AdjointGradient adjoint_gradient(const PsfFunction& psfs, const Stage2Function& stage2, std::span<const double> xi,
                                 std::span<const double> steps, std::span<const double> lo,
                                 std::span<const double> hi, const std::vector<bool>& free, std::size_t jobs) {
  const AdjointState state = adjoint_stage1(psfs, xi, steps, lo, hi, free, jobs);
  const Stage2 s2 = stage2(state.f);
  if (!std::isfinite(s2.loss)) throw Error("image-space loss is not finite");
  return {s2.loss, adjoint_product(state, s2.grad_f)};
}

// ---------------------------------------------------------------------------

namespace {

PsfGrid grid_shell(const EpjoProblem& pr, std::span<const double> values) {
  PsfGrid g;
  g.size = pr.sensor.psf_size;
  g.fields_deg = pr.fields_deg;
  g.radius_px = pr.layout.radii;
  g.psf.resize(pr.fields_deg.size());
  const std::size_t n = static_cast<std::size_t>(g.size) * g.size;
  for (auto& f : g.psf)
    for (auto& ch : f) ch.data.assign(n, 0.0);
  g.assign(values);
  return g;
}

// Central differences of a scalar function, clamped like adjoint_stage1.
std::vector<double> scalar_gradient(const std::function<double(std::span<const double>)>& fn,
                                    std::span<const double> xi, std::span<const double> steps,
                                    std::span<const double> lo, std::span<const double> hi,
                                    const std::vector<bool>& free, double center) {
  std::vector<double> g(xi.size(), 0.0);
  std::vector<double> x(xi.begin(), xi.end());
  for (std::size_t k = 0; k < xi.size(); ++k) {
    if (!free[k]) continue;
    const double a = std::min(xi[k] + steps[k], hi[k]);
    const double b = std::max(xi[k] - steps[k], lo[k]);
    x[k] = a;
    double fa = fn(x);
    x[k] = b;
    double fb = fn(x);
    x[k] = xi[k];
    double da = a, db = b;
    if (!std::isfinite(fa)) fa = center, da = xi[k];
    if (!std::isfinite(fb)) fb = center, db = xi[k];
    if (da != db) g[k] = (fa - fb) / (da - db);
  }
  return g;
}

}  // namespace

EpjoProblem EpjoProblem::make(const LensSystem& start, const DesignSpec& spec, const GlassCatalog& catalog,
                              const EpjoConfig& config, const SensorModel& sensor, const ReconOperator& recon,
                              std::vector<Image> images) {
  config.validate();
  sensor.validate();
  catalog.validate();
  EpjoProblem pr;
  pr.spec = spec;
  pr.catalog = catalog;
  pr.config = config;
  pr.sensor = sensor;
  pr.recon = recon;
  pr.schema = ParamSchema::build(FormLayout::parse(start.design_form), spec.ranges, start.entrance_pupil_diameter);
  pr.fields_deg = uniform_fields(spec.hfov_deg, config.fields);
  const PsfGrid g = build_psf_grid(start, pr.fields_deg, config.depths[0], sensor, config.jobs);
  pr.layout = PatchLayout::make(sensor.width, sensor.height, sensor.patch_size, g.radius_px);
  if (images.empty()) throw ConfigError("epjo needs at least one image");
  for (const auto& img : images)
    if (img.width != sensor.width || img.height != sensor.height || img.channels != 3)
      throw StructuralError("image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                            ", sensor expects " + std::to_string(sensor.width) + "x" +
                            std::to_string(sensor.height));
  if (images.size() < 2) {
    pr.train = images;
    pr.validation = images;
  } else {
    const std::size_t nv = std::min<std::size_t>(8, images.size() / 2);
    pr.validation.assign(images.end() - static_cast<std::ptrdiff_t>(nv), images.end());
    images.resize(images.size() - nv);
    pr.train = std::move(images);
  }
  return pr;
}

std::vector<double> EpjoProblem::xi(const LensSystem& lens) const {
  const auto x = normalize(lens, schema).x.values;
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = physical_value(schema->entries[k], x[k]);
  return out;
}

LensSystem EpjoProblem::lens(std::span<const double> xi) const {
  std::vector<double> x(xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k) {
    const Range& r = schema->entries[k].range;
    x[k] = r.width() > 0.0 ? (xi[k] - r.lo) / r.width() : 0.0;
  }
  return denormalize(*schema, x);
}

std::vector<double> EpjoProblem::lower() const {
  std::vector<double> v;
  for (const auto& e : schema->entries) v.push_back(e.range.lo);
  return v;
}

std::vector<double> EpjoProblem::upper() const {
  std::vector<double> v;
  for (const auto& e : schema->entries) v.push_back(e.range.hi);
  return v;
}

std::vector<double> EpjoProblem::steps() const {
  std::vector<double> v;
  for (const auto& e : schema->entries) v.push_back(config.fd_step * e.range.width());
  return v;
}

std::vector<bool> EpjoProblem::free() const { return schema->free_mask(); }

std::size_t EpjoProblem::psf_value_count() const {
  return config.depths.size() * fields_deg.size() * 3 * static_cast<std::size_t>(sensor.psf_size) * sensor.psf_size;
}

std::vector<double> EpjoProblem::psf_values(std::span<const double> x) const {
  const LensSystem l = lens(x);
  std::vector<double> out;
  out.reserve(psf_value_count());
  for (double d : config.depths) {
    const auto g = build_psf_grid(l, fields_deg, d, sensor, 1).flatten();
    out.insert(out.end(), g.begin(), g.end());
  }
  return out;
}

std::vector<Image> EpjoProblem::render(std::span<const double> f, const Image& truth) const {
  if (f.size() != psf_value_count()) throw StructuralError("PSF vector does not match the problem");
  const std::size_t per = f.size() / 3;
  const Image raw = isp_inverse(truth, sensor);
  std::vector<Image> out;
  for (std::size_t j = 0; j < 3; ++j) {
    const PsfGrid g = grid_shell(*this, f.subspan(j * per, per));
    const auto k = layout_kernels(g, layout);
    const Image d = isp_forward(degrade_raw(raw, layout, k, g.size, sensor, {false, 0, config.jobs}), sensor);
    out.push_back(recon.apply(d, layout, k, g.size, sensor));
  }
  return out;
}

Stage2 EpjoProblem::image_stage(std::span<const double> f, const std::vector<Image>& images) const {
  if (f.size() != psf_value_count()) throw StructuralError("PSF vector does not match the problem");
  if (images.empty()) throw ConfigError("image set is empty");
  const std::size_t per = f.size() / 3;
  const int t = sensor.psf_size;
  std::vector<PsfGrid> grids;
  std::vector<PatchKernels> kernels;
  for (std::size_t j = 0; j < 3; ++j) {
    grids.push_back(grid_shell(*this, f.subspan(j * per, per)));
    kernels.push_back(layout_kernels(grids.back(), layout));
  }
  Stage2 out;
  out.grad_f.assign(f.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(images.size());
  for (const Image& truth : images) {
    const Image raw = isp_inverse(truth, sensor);
    std::vector<Image> pre(3), rendered(3), restored(3);
    for (std::size_t j = 0; j < 3; ++j) {
      pre[j] = demosaic(mosaic(patch_convolve(raw, layout, kernels[j], t, config.jobs)));
      rendered[j] = isp_forward(pre[j], sensor);
      restored[j] = recon.apply(rendered[j], layout, kernels[j], t, sensor);
    }
    std::vector<Image> g;
    out.loss += inv_n * image_quality_loss(restored, truth, config.alpha2, &g);
    for (std::size_t j = 0; j < 3; ++j) {
      for (double& v : g[j].data) v *= inv_n;
      Image gr = recon.adjoint(rendered[j], g[j], layout, kernels[j], t, sensor);
      gr = isp_forward_adjoint(pre[j], gr, sensor);
      const Image gc = mosaic_adjoint(demosaic_adjoint(gr));
      const auto gk = patch_convolve_kernel_adjoint(raw, layout, gc, t, config.jobs);
      std::span<double> dst(out.grad_f.data() + j * per, per);
      for (std::size_t p = 0; p < layout.patches.size(); ++p) patch_psf_adjoint(grids[j], layout.patches[p], gk[p], dst);
    }
  }
  return out;
}

double EpjoProblem::image_loss(std::span<const double> f, const std::vector<Image>& images) const {
  double loss = 0.0;
  for (const Image& truth : images) loss += image_quality_loss(render(f, truth), truth, config.alpha2);
  return loss / static_cast<double>(images.size());
}

double EpjoProblem::constraint_loss(std::span<const double> x) const {
  const SampledSystem s = sample_system(lens(x), SampleConfig::from_spec(spec));
  double pc = 0.0;
  for (double d : spec.working_distances) pc += quadratic_constraint_loss(constraint_inputs(s.lens, spec, d)).total;
  pc /= static_cast<double>(spec.working_distances.size());
  std::vector<Glass> glasses;
  for (std::size_t k = 0; k < s.lens.glass_count(); ++k) glasses.push_back(s.lens.glass(k));
  return pc + (glasses.empty() ? 0.0 : glass_variable_loss(glasses, catalog));
}

double EpjoProblem::loss(std::span<const double> x, const std::vector<Image>& images) const {
  return constraint_loss(x) + config.alpha_iq * image_loss(psf_values(x), images);
}

AdjointGradient EpjoProblem::gradient(std::span<const double> x, const std::vector<Image>& images) const {
  const auto lo = lower(), hi = upper(), h = steps();
  const auto mask = free();
  AdjointGradient iq = adjoint_gradient([this](std::span<const double> v) { return psf_values(v); },
                                        [&](std::span<const double> f) { return image_stage(f, images); }, x, h, lo,
                                        hi, mask, config.jobs);
  const double pc = constraint_loss(x);
  auto pc_fn = [this](std::span<const double> v) {
    try {
      return constraint_loss(v);
    } catch (const Error&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  const auto gpc = scalar_gradient(pc_fn, x, h, lo, hi, mask, pc);
  AdjointGradient out;
  out.loss = pc + config.alpha_iq * iq.loss;
  out.gradient.resize(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out.gradient[k] = gpc[k] + config.alpha_iq * iq.gradient[k];
  return out;
}

// ---------------------------------------------------------------------------

JointResult joint_optimize(const EpjoProblem& pr, const LensSystem& start) {
  const auto lo = pr.lower(), hi = pr.upper();
  const auto mask = pr.free();
  std::vector<double> x = pr.xi(start);
  const std::size_t n = x.size();
  auto validate = [&](std::span<const double> v) {
    try {
      return pr.loss(v, pr.validation);
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  JointResult r;
  r.start_loss = validate(x);
  if (!std::isfinite(r.start_loss)) throw UnphysicalError("starting lens cannot be evaluated");
  double best = r.start_loss;
  std::vector<double> best_x = x;
  std::vector<double> m(n, 0.0), v(n, 0.0);
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < pr.config.max_epochs && !r.diverged; ++epoch) {
    double epoch_best = std::numeric_limits<double>::infinity();
    std::vector<double> epoch_x;
    for (std::size_t s = 0; s < pr.config.n_o; ++s) {
      AdjointGradient g;
      try {
        g = pr.gradient(x, pr.train);
      } catch (const Error&) {
        r.diverged = true;
        break;
      }
      ++step;
      const double b1 = pr.config.beta1, b2 = pr.config.beta2;
      for (std::size_t k = 0; k < n; ++k) {
        if (!mask[k]) continue;
        m[k] = b1 * m[k] + (1 - b1) * g.gradient[k];
        v[k] = b2 * v[k] + (1 - b2) * g.gradient[k] * g.gradient[k];
        const double mh = m[k] / (1 - std::pow(b1, static_cast<double>(step)));
        const double vh = v[k] / (1 - std::pow(b2, static_cast<double>(step)));
        const double lr = pr.config.rates.of(pr.schema->entries[k].role);
        x[k] = std::clamp(x[k] - lr * mh / (std::sqrt(vh) + pr.config.epsilon), lo[k], hi[k]);
      }
      const double l = validate(x);
      r.trajectory.push_back(l);
      if (!std::isfinite(l)) {
        r.diverged = true;
        break;
      }
      if (l < epoch_best) {
        epoch_best = l;
        epoch_x = x;
      }
    }
    ++r.epochs;
    if (epoch_best >= best) break;
    best = epoch_best;
    best_x = epoch_x;
    x = epoch_x;
  }
  r.best_loss = best;
  r.lens = sample_system(pr.lens(best_x), SampleConfig::from_spec(pr.spec)).lens;
  return r;
}

QuantizeResult quantize_glass(const LensSystem& lens, std::shared_ptr<const ParamSchema> schema,
                              const GlassCatalog& catalog, const JointStep& joint_step,
                              const std::function<double(const LensSystem&)>& loss_of) {
  catalog.validate();
  QuantizeResult r;
  r.lens = lens;
  auto sch = std::move(schema);
  if (sch->fixed_glass.size() != lens.glass_count()) throw StructuralError("schema and lens disagree on glass count");
  for (;;) {
    std::optional<std::size_t> pick;
    GlassCatalog::Match match;
    for (std::size_t k = 0; k < lens.glass_count(); ++k) {
      if (sch->fixed_glass[k]) continue;
      const Glass& g = r.lens.glass(k);
      const auto mk = catalog.nearest(g.n_d, g.v_d);
      if (!pick || mk.distance < match.distance) {
        pick = k;
        match = mk;
      }
    }
    if (!pick) break;
    SubstitutionRound round;
    round.element = *pick;
    round.glass = catalog.entries[match.index].name;
    round.distance = match.distance;
    round.loss_before = loss_of && !r.aborted ? loss_of(r.lens) : std::numeric_limits<double>::quiet_NaN();
    const Glass chosen = catalog.entries[match.index];
    sch = sch->with_fixed_glass(*pick, chosen);
    r.lens.glass(*pick) = chosen;
    round.loss_after = std::numeric_limits<double>::quiet_NaN();
    if (!r.aborted) {
      try {
        auto [next, loss] = joint_step(r.lens, sch);
        if (std::isfinite(loss)) {
          r.lens = std::move(next);
          round.loss_after = loss;
        } else {
          r.aborted = true;
        }
      } catch (const Error&) {
        r.aborted = true;
      }
    }
    // Pinned glasses stay exactly on their catalog entries.
    for (std::size_t k = 0; k < lens.glass_count(); ++k)
      if (sch->fixed_glass[k]) r.lens.glass(k) = *sch->fixed_glass[k];
    r.rounds.push_back(std::move(round));
  }
  return r;
}

}  // namespace lensforge
