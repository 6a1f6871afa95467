// lensforge: lens search, evaluation, imaging simulation and joint refinement.
//
// Exit status: 0 success, 1 bad input (config, structure, flags),
// 2 infeasible design or no result.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lensforge/epjo/epjo.hpp"
#include "lensforge/error.hpp"
#include "lensforge/imaging/image.hpp"
#include "lensforge/imaging/isp.hpp"
#include "lensforge/imaging/psf.hpp"
#include "lensforge/io/files.hpp"
#include "lensforge/io/manifest.hpp"
#include "lensforge/io/plot.hpp"
#include "lensforge/merit/optifusion_loss.hpp"
#include "lensforge/optifusion/search.hpp"
#include "lensforge/parallel.hpp"
#include "lensforge/raytrace/paraxial.hpp"

namespace fs = std::filesystem;
using namespace lensforge;

namespace {

// Result that is well-formed but not acceptable (no feasible design etc).
struct Infeasible : Error {
  using Error::Error;
};

std::string sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9e", v);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + sci(v[i]);
  return s;
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::vector<std::string> raw_args(int argc, char** argv) { return {argv + 1, argv + argc}; }

SensorModel sensor_or_default(const std::string& path) { return path.empty() ? SensorModel{} : load_sensor(path); }

std::size_t jobs_or_default(std::size_t jobs) { return jobs == 0 ? default_jobs() : jobs; }

// ---- search ---------------------------------------------------------------

struct SearchArgs {
  std::string spec, out;
  std::uint64_t seed = 0;
  std::size_t m = 0, generations = 0, jobs = 0;
};

int cmd_search(const SearchArgs& a, const std::vector<std::string>& argv) {
  RunManifest manifest("search", argv);
  manifest.add_input(a.spec);
  manifest.set_seed(a.seed);
  SpecFile sf = load_spec(a.spec);
  if (a.m) sf.spec.search.population = a.m;
  if (a.generations) sf.spec.search.generations = a.generations;
  sf.spec.validate();
  fs::create_directories(a.out);

  SearchOptions opt;
  opt.jobs = jobs_or_default(a.jobs);
  opt.log = [](const std::string& s) { std::cerr << s << "\n"; };
  const SearchResult r = run_search(sf.spec, a.seed, opt);

  // The log is a pure function of the inputs; timings go to the manifest.
  std::ostringstream log;
  for (const auto& f : r.forms) {
    log << "form " << f.design_form << "\n";
    for (const auto& g : f.generations) {
      log << "generation " << g.generation << " population " << g.population << " sa_iterations "
          << g.anneal.iterations << " converged " << (g.anneal.converged ? 1 : 0) << "\n";
      log << "  l_mean " << join(g.anneal.l_mean.empty() ? std::vector<double>{} : std::vector<double>{g.anneal.l_mean.back()}) << "\n";
      log << "  parents " << join(g.parent_losses) << "\n";
      log << "  elites " << join(g.elite_losses) << "\n";
      log << "  min_loss " << sci(g.min_loss) << " mutation_skips " << g.mutation_skips << "\n";
      for (const auto& d : g.diagnostics) log << "  note " << d << "\n";
      manifest.stage(f.design_form + " generation " + std::to_string(g.generation),
                     "l_mean " + sci(g.anneal.l_mean.empty() ? 0.0 : g.anneal.l_mean.back()) + " min_loss " +
                         sci(g.min_loss) + " seconds " + sci(g.seconds));
    }
  }
  if (!r.diagnostic.empty()) log << "note " << r.diagnostic << "\n";

  for (std::size_t i = 0; i < r.outputs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "design_%02zu.json", i);
    const std::string p = path_in(a.out, name);
    save_lens(p, r.outputs[i].lens);
    manifest.add_output(p);
    log << "output " << name << " form " << r.outputs[i].design_form << " l_of " << sci(r.outputs[i].loss) << "\n";
    std::cout << p << " " << r.outputs[i].design_form << " l_of " << sci(r.outputs[i].loss) << "\n";
  }
  const std::string log_path = path_in(a.out, "search_log.txt");
  write_text(log_path, log.str());
  manifest.add_output(log_path);
  manifest.write(path_in(a.out, "manifest.json"));
  if (r.outputs.empty()) throw Infeasible("no design below the loss ceiling" + (r.diagnostic.empty() ? "" : ": " + r.diagnostic));
  return 0;
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateArgs {
  std::string lens, spec, manifest;
};

int cmd_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv) {
  const LensSystem lens = load_lens(a.lens);
  const DesignSpec spec = load_spec(a.spec).spec;
  spec.validate();
  const LossBreakdown b = optifusion_loss(lens, spec);
  std::ostringstream o;
  o << "lens " << a.lens << "\n";
  o << "design_form " << lens.design_form << "\n";
  try {
    const auto p = paraxial_analysis(lens, spec.working_distances.front(), spec.hfov_deg);
    o << "paraxial efl " << sci(p.efl) << " bfl " << sci(p.bfl) << " ttl " << sci(p.ttl) << " image_height "
      << sci(p.image_height) << " distortion_pct " << sci(p.distortion) << "\n";
  } catch (const Error& e) {
    o << "paraxial unavailable: " << e.what() << "\n";
  }
  o << "feasible " << (b.feasible ? 1 : 0) << "\n";
  o << "invalid_fraction " << sci(b.invalid_fraction) << "\n";
  if (!b.failure.empty()) o << "failure " << b.failure << "\n";
  o << "l_s " << sci(b.l_s) << "\n";
  o << "l_lc " << sci(b.l_lc) << "\n";
  o << "l_pc " << sci(b.l_pc) << "\n";
  o << "l_of " << sci(b.l_of) << "\n";
  for (const auto& d : b.per_distance) {
    o << "distance " << sci(d.distance) << " l_s " << sci(d.l_s) << " l_lc " << sci(d.l_lc) << " l_pc "
      << sci(d.l_pc) << " l_of " << sci(d.l_of) << "\n";
    for (const auto& t : d.constraints.terms)
      o << "  " << quantity_name(t.quantity) << " value " << sci(t.value) << " min " << sci(t.bounds.lo) << " max "
        << sci(t.bounds.hi) << " violation " << sci(t.violation) << " penalty " << sci(t.penalty) << "\n";
  }
  std::cout << o.str();
  if (!a.manifest.empty()) {
    RunManifest m("evaluate", argv);
    m.add_input(a.lens);
    m.add_input(a.spec);
    m.stage("loss", "l_of " + sci(b.l_of));
    m.write(a.manifest);
  }
  if (!b.feasible) throw Infeasible("lens is infeasible" + (b.failure.empty() ? "" : ": " + b.failure));
  return 0;
}

// ---- psf ------------------------------------------------------------------

struct PsfArgs {
  std::string lens, spec, sensor, out;
  double depth = kInfiniteDistance;
  std::size_t jobs = 0;
};

// RMS radius about the centroid, pixels.
double rms_px(const std::vector<double>& map, int t) {
  double s = 0, cx = 0, cy = 0;
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < t; ++j) {
      const double v = map[static_cast<std::size_t>(i) * t + j];
      s += v, cx += v * j, cy += v * i;
    }
  cx /= s, cy /= s;
  double r2 = 0;
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < t; ++j)
      r2 += map[static_cast<std::size_t>(i) * t + j] * ((j - cx) * (j - cx) + (i - cy) * (i - cy));
  return std::sqrt(r2 / s);
}

int cmd_psf(const PsfArgs& a, const std::vector<std::string>& argv) {
  RunManifest manifest("psf", argv);
  manifest.add_input(a.lens);
  manifest.add_input(a.spec);
  if (!a.sensor.empty()) manifest.add_input(a.sensor);
  const LensSystem lens = load_lens(a.lens);
  const DesignSpec spec = load_spec(a.spec).spec;
  spec.validate();
  const SensorModel sensor = sensor_or_default(a.sensor);
  sensor.validate();
  const auto fields = spec.sampled_fields_deg();
  PsfGrid grid;
  try {
    grid = build_psf_grid(lens, fields, a.depth, sensor, jobs_or_default(a.jobs));
  } catch (const UnphysicalError& e) {
    throw Infeasible(e.what());
  } catch (const FieldUnreachableError& e) {
    throw Infeasible(e.what());
  }
  fs::create_directories(a.out);
  const char* names = "RGB";
  std::ostringstream table;
  for (std::size_t f = 0; f < fields.size(); ++f)
    for (int c = 0; c < 3; ++c) {
      char name[48];
      std::snprintf(name, sizeof name, "psf_f%02zu_%c.pfm", f, names[c]);
      const std::string p = path_in(a.out, name);
      write_pfm(p, grid.size, grid.size, grid.psf[f][c].data);
      manifest.add_output(p);
      const double rms = rms_px(grid.psf[f][c].data, grid.size);
      const std::string line = std::string("field_deg ") + sci(fields[f]) + " channel " + names[c] + " rms_px " +
                               sci(rms) + " offset_px " + sci(grid.psf[f][c].offset_px);
      manifest.stage(name, line);
      table << name << " " << line << "\n";
    }
  std::cout << table.str();
  manifest.write(path_in(a.out, "manifest.json"));
  return 0;
}

// ---- render ---------------------------------------------------------------

struct RenderArgs {
  std::string lens, image, out, spec, sensor;
  double depth = kInfiniteDistance;
  double hfov = 0.0;
  bool noise = false, delta = false;
  std::uint64_t seed = 0;
  int bits = 8;
  std::size_t jobs = 0;
};

PsfGrid delta_grid(int t) {
  PsfGrid g;
  g.size = t;
  g.fields_deg = {0.0};
  g.radius_px = {0.0};
  std::array<ChannelPsf, 3> ch;
  for (auto& c : ch) {
    c.data.assign(static_cast<std::size_t>(t) * t, 0.0);
    c.data[static_cast<std::size_t>(t / 2) * t + t / 2] = 1.0;
  }
  g.psf.push_back(ch);
  return g;
}

int cmd_render(const RenderArgs& a, const std::vector<std::string>& argv) {
  RunManifest manifest("render", argv);
  manifest.add_input(a.image);
  if (!a.delta) manifest.add_input(a.lens);
  if (!a.spec.empty()) manifest.add_input(a.spec);
  if (!a.sensor.empty()) manifest.add_input(a.sensor);
  if (a.noise) manifest.set_seed(a.seed);
  if (a.bits != 8 && a.bits != 16) throw ConfigError("--bits: must be 8 or 16");

  const Image img = read_png(a.image);
  SensorModel sensor = sensor_or_default(a.sensor);
  // The image is the sensor: its size overrides the configured one.
  sensor.width = img.width;
  sensor.height = img.height;
  sensor.validate();

  PsfGrid grid;
  if (a.delta) {
    grid = delta_grid(sensor.psf_size);
  } else {
    const LensSystem lens = load_lens(a.lens);
    double hfov = a.hfov;
    int nf = EpjoConfig{}.fields;
    if (!a.spec.empty()) {
      const SpecFile sf = load_spec(a.spec);
      hfov = sf.spec.hfov_deg;
      nf = sf.epjo.fields;
    }
    if (!(hfov > 0)) throw ConfigError("render: --spec or a positive --hfov is required unless --delta-psf is set");
    try {
      grid = build_psf_grid(lens, uniform_fields(hfov, nf), a.depth, sensor, jobs_or_default(a.jobs));
    } catch (const UnphysicalError& e) {
      throw Infeasible(e.what());
    } catch (const FieldUnreachableError& e) {
      throw Infeasible(e.what());
    }
  }
  const PatchLayout layout = PatchLayout::make(img.width, img.height, sensor.patch_size, grid.radius_px);
  DegradeOptions opt;
  opt.noise = a.noise;
  opt.seed = a.seed;
  opt.jobs = jobs_or_default(a.jobs);
  const Image out = degrade(img, grid, layout, sensor, opt);
  const fs::path op(a.out);
  if (op.has_parent_path()) fs::create_directories(op.parent_path());
  write_png(a.out, out, a.bits);
  manifest.add_output(a.out);
  manifest.stage("render", std::string("patches ") + std::to_string(layout.patches.size()) + " fields " +
                               std::to_string(grid.fields_deg.size()) + " mse " + sci(mse(out, img)));
  manifest.write(a.out + ".manifest.json");
  return 0;
}

// ---- optimize -------------------------------------------------------------

struct OptimizeArgs {
  std::string lens, spec, catalog, images, recon = "identity", out, sensor;
  double epsilon = 1e-3;
  std::size_t jobs = 0, check = 4;
};

std::vector<Image> load_images(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("--images: '" + dir + "' is not a directory");
  std::vector<std::string> paths;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") paths.push_back(e.path().string());
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw ConfigError("--images: no .png files in '" + dir + "'");
  std::vector<Image> out;
  for (const auto& p : paths) out.push_back(read_png(p));
  for (const auto& im : out)
    if (im.width != out[0].width || im.height != out[0].height)
      throw StructuralError("--images: all images must share one size");
  return out;
}

int cmd_optimize(const OptimizeArgs& a, const std::vector<std::string>& argv) {
  RunManifest manifest("optimize", argv);
  std::string catalog_path = a.catalog;
  if (catalog_path.empty())
    if (const char* env = std::getenv("LENSFORGE_CATALOG")) catalog_path = env;
  if (catalog_path.empty()) throw ConfigError("--catalog: not given and LENSFORGE_CATALOG is unset");
  manifest.add_input(a.lens);
  manifest.add_input(a.spec);
  manifest.add_input(catalog_path);
  if (!a.sensor.empty()) manifest.add_input(a.sensor);

  const LensSystem start = load_lens(a.lens);
  SpecFile sf = load_spec(a.spec);
  sf.spec.validate();
  sf.epjo.jobs = jobs_or_default(a.jobs);
  sf.epjo.validate();
  const GlassCatalog catalog = load_catalog(catalog_path);
  std::vector<Image> images = load_images(a.images);
  SensorModel sensor = sensor_or_default(a.sensor);
  sensor.width = images[0].width;
  sensor.height = images[0].height;
  sensor.validate();
  ReconOperator recon{parse_recon(a.recon), a.epsilon};
  fs::create_directories(a.out);

  EpjoProblem problem;
  try {
    problem = EpjoProblem::make(start, sf.spec, catalog, sf.epjo, sensor, recon, std::move(images));
  } catch (const UnphysicalError& e) {
    throw Infeasible(e.what());
  } catch (const FieldUnreachableError& e) {
    throw Infeasible(e.what());
  }

  // Gradient check at the starting point: adjoint vs central differences on
  // the first few free coordinates.
  std::ostringstream check;
  {
    const auto x = problem.xi(start);
    const auto g = problem.gradient(x, problem.train);
    const auto mask = problem.free();
    const auto steps = problem.steps();
    const auto lo = problem.lower(), hi = problem.upper();
    check << "loss " << sci(g.loss) << "\n";
    std::size_t done = 0;
    double worst = 0.0;
    for (std::size_t k = 0; k < x.size() && done < a.check; ++k) {
      if (!mask[k]) continue;
      auto xp = x, xm = x;
      xp[k] = std::min(x[k] + steps[k], hi[k]);
      xm[k] = std::max(x[k] - steps[k], lo[k]);
      const double fd = (problem.loss(xp, problem.train) - problem.loss(xm, problem.train)) / (xp[k] - xm[k]);
      const double rel = std::abs(g.gradient[k] - fd) / std::max(std::abs(fd), 1e-6);
      worst = std::max(worst, rel);
      check << "coordinate " << k << " adjoint " << sci(g.gradient[k]) << " central_difference " << sci(fd)
            << " relative_error " << sci(rel) << "\n";
      ++done;
    }
    check << "max_relative_error " << sci(worst) << "\n";
    manifest.stage("gradient check", "max_relative_error " + sci(worst));
  }
  const std::string check_path = path_in(a.out, "gradient_check.txt");
  write_text(check_path, check.str());
  manifest.add_output(check_path);

  std::ostringstream log;
  const JointResult cont = joint_optimize(problem, start);
  log << "continuous start_loss " << sci(cont.start_loss) << " best_loss " << sci(cont.best_loss) << " epochs "
      << cont.epochs << " diverged " << (cont.diverged ? 1 : 0) << "\n";
  log << "  trajectory " << join(cont.trajectory) << "\n";
  manifest.stage("continuous", "best_loss " + sci(cont.best_loss) + " epochs " + std::to_string(cont.epochs));
  std::cerr << "continuous refinement: " << sci(cont.start_loss) << " -> " << sci(cont.best_loss) << "\n";

  std::vector<std::vector<double>> trajectories;
  const JointStep step = [&](const LensSystem& l, std::shared_ptr<const ParamSchema> schema) {
    EpjoProblem p = problem;
    p.schema = std::move(schema);
    try {
      const JointResult r = joint_optimize(p, l);
      trajectories.push_back(r.trajectory);
      return std::pair{r.lens, r.best_loss};
    } catch (const Error&) {
      trajectories.emplace_back();
      return std::pair{l, std::numeric_limits<double>::infinity()};
    }
  };
  const auto loss_of = [&](const LensSystem& l) {
    try {
      return problem.loss(problem.xi(l), problem.validation);
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const QuantizeResult q = quantize_glass(cont.lens, problem.schema, catalog, step, loss_of);
  for (std::size_t i = 0; i < q.rounds.size(); ++i) {
    const auto& r = q.rounds[i];
    log << "round " << i + 1 << " element " << r.element << " glass " << r.glass << " distance " << sci(r.distance)
        << " loss_before " << sci(r.loss_before) << " loss_after " << sci(r.loss_after) << "\n";
    if (i < trajectories.size()) log << "  trajectory " << join(trajectories[i]) << "\n";
    manifest.stage("round " + std::to_string(i + 1), r.glass + " loss_after " + sci(r.loss_after));
  }
  if (q.aborted) log << "aborted: remaining glasses snapped without re-optimization\n";
  for (std::size_t k = 0; k < q.lens.glass_count(); ++k)
    log << "final element " << k << " " << q.lens.glass(k).name << " n_d " << sci(q.lens.glass(k).n_d) << " v_d "
        << sci(q.lens.glass(k).v_d) << "\n";

  const std::string log_path = path_in(a.out, "substitution_log.txt");
  write_text(log_path, log.str());
  manifest.add_output(log_path);
  const std::string lens_path = path_in(a.out, "refined_lens.json");
  save_lens(lens_path, q.lens);
  manifest.add_output(lens_path);
  manifest.write(path_in(a.out, "manifest.json"));
  std::cout << lens_path << "\n";
  if (q.aborted) throw Infeasible("glass substitution aborted on a non-finite loss");
  return 0;
}

// ---- plot -----------------------------------------------------------------

struct PlotArgs {
  std::string lens, out, spots, spec;
};

int cmd_plot(const PlotArgs& a, const std::vector<std::string>& argv) {
  RunManifest manifest("plot", argv);
  manifest.add_input(a.lens);
  const LensSystem lens = load_lens(a.lens);
  DesignSpec spec;
  if (!a.spec.empty()) {
    manifest.add_input(a.spec);
    spec = load_spec(a.spec).spec;
    spec.validate();
  }
  const auto fields = spec.sampled_fields_deg();
  const CrossSection cs = cross_section_svg(lens, fields);
  for (const auto& w : cs.warnings) std::cerr << "warning: " << w << "\n";
  const fs::path op(a.out);
  if (op.has_parent_path()) fs::create_directories(op.parent_path());
  write_text(a.out, cs.svg);
  manifest.add_output(a.out);
  manifest.stage("cross-section", "rays " + std::to_string(cs.rays) + " scale " + sci(cs.scale));

  std::string spots = a.spots;
  if (spots.empty()) spots = (op.parent_path() / (op.stem().string() + "_spots.svg")).string();
  const SpotDiagram sd =
      spot_diagram_svg(lens, fields, spec.wavelengths, spec.working_distances.front(), spec.pupil_rings);
  for (const auto& w : sd.warnings) std::cerr << "warning: " << w << "\n";
  write_text(spots, sd.svg);
  manifest.add_output(spots);
  std::string counts;
  for (auto c : sd.points_per_field) counts += (counts.empty() ? "" : " ") + std::to_string(c);
  manifest.stage("spots", "points per field " + counts);
  manifest.write(a.out + ".manifest.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lensforge: spherical lens search, imaging simulation and joint refinement"};
  app.require_subcommand(1);
  const auto args = raw_args(argc, argv);
  int status = 0;

  SearchArgs sa;
  auto* search = app.add_subcommand("search", "global search for starting designs");
  search->add_option("--spec", sa.spec, "design spec file")->required()->check(CLI::ExistingFile);
  search->add_option("--seed", sa.seed, "random seed");
  search->add_option("--out", sa.out, "output directory")->required();
  search->add_option("--m", sa.m, "population size (overrides the spec)");
  search->add_option("--generations", sa.generations, "generations (overrides the spec)");
  search->add_option("--jobs", sa.jobs, "worker threads, 0 = all cores");
  search->callback([&] { status = cmd_search(sa, args); });

  EvaluateArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "score a lens against a spec");
  evaluate->add_option("--lens", ea.lens)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--spec", ea.spec)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--manifest", ea.manifest, "optional run manifest path");
  evaluate->callback([&] { status = cmd_evaluate(ea, args); });

  PsfArgs pa;
  auto* psf = app.add_subcommand("psf", "per-field RGB PSFs as PFM files");
  psf->add_option("--lens", pa.lens)->required()->check(CLI::ExistingFile);
  psf->add_option("--spec", pa.spec)->required()->check(CLI::ExistingFile);
  psf->add_option("--depth", pa.depth, "object distance in mm")->required();
  psf->add_option("--out", pa.out)->required();
  psf->add_option("--sensor", pa.sensor)->check(CLI::ExistingFile);
  psf->add_option("--jobs", pa.jobs);
  psf->callback([&] { status = cmd_psf(pa, args); });

  RenderArgs ra;
  auto* render = app.add_subcommand("render", "simulate a capture through the lens and ISP");
  render->add_option("--lens", ra.lens)->check(CLI::ExistingFile);
  render->add_option("--image", ra.image)->required()->check(CLI::ExistingFile);
  render->add_option("--depth", ra.depth, "object distance in mm");
  render->add_option("--out", ra.out)->required();
  render->add_option("--spec", ra.spec)->check(CLI::ExistingFile);
  render->add_option("--hfov", ra.hfov, "half field of view in degrees when no spec is given");
  render->add_option("--sensor", ra.sensor)->check(CLI::ExistingFile);
  render->add_flag("--noise", ra.noise, "add read and shot noise");
  render->add_option("--seed", ra.seed);
  render->add_flag("--delta-psf", ra.delta, "use identity kernels instead of the lens");
  render->add_option("--bits", ra.bits, "output bit depth, 8 or 16");
  render->add_option("--jobs", ra.jobs);
  render->callback([&] {
    if (!ra.delta && ra.lens.empty()) throw CLI::RequiredError("--lens");
    status = cmd_render(ra, args);
  });

  OptimizeArgs oa;
  auto* optimize = app.add_subcommand("optimize", "joint lens refinement and glass substitution");
  optimize->add_option("--lens", oa.lens)->required()->check(CLI::ExistingFile);
  optimize->add_option("--spec", oa.spec)->required()->check(CLI::ExistingFile);
  optimize->add_option("--catalog", oa.catalog, "glass catalog (default: $LENSFORGE_CATALOG)");
  optimize->add_option("--images", oa.images, "directory of training PNGs")->required();
  optimize->add_option("--recon", oa.recon, "identity or wiener");
  optimize->add_option("--epsilon", oa.epsilon, "Wiener regularization");
  optimize->add_option("--out", oa.out)->required();
  optimize->add_option("--sensor", oa.sensor)->check(CLI::ExistingFile);
  optimize->add_option("--jobs", oa.jobs);
  optimize->add_option("--check", oa.check, "coordinates in the gradient check");
  optimize->callback([&] { status = cmd_optimize(oa, args); });

  PlotArgs pl;
  auto* plot = app.add_subcommand("plot", "cross-section and spot diagram SVGs");
  plot->add_option("--lens", pl.lens)->required()->check(CLI::ExistingFile);
  plot->add_option("--out", pl.out, "cross-section SVG")->required();
  plot->add_option("--spots", pl.spots, "spot diagram SVG (default: <out>_spots.svg)");
  plot->add_option("--spec", pl.spec, "spec for fields and wavelengths")->check(CLI::ExistingFile);
  plot->callback([&] { status = cmd_plot(pl, args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const Infeasible& e) {
    std::cerr << "lensforge: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "lensforge: " << e.what() << "\n";
    return 1;
  } catch (const StructuralError& e) {
    std::cerr << "lensforge: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    // Anything else the library raises is a property of the design.
    std::cerr << "lensforge: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "lensforge: " << e.what() << "\n";
    return 1;
  }
  return status;
}
