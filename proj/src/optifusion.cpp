#include "lensforge/optifusion/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "lensforge/error.hpp"
#include "lensforge/merit/optifusion_loss.hpp"
#include "lensforge/parallel.hpp"

namespace lensforge {

namespace {

bool is_free(const Objective& obj, std::size_t i) { return obj.free.empty() || obj.free[i]; }

// Losses at or above this mark an untraceable lens.
constexpr double kInfeasibleThreshold = 0.5 * kInfeasibleLoss;

std::string format_loss(double v) {
  std::ostringstream s;
  s.precision(6);
  s << std::scientific << v;
  return s.str();
}

}  // namespace

Objective make_lens_objective(const DesignSpec& spec, std::shared_ptr<const ParamSchema> schema) {
  Objective obj;
  obj.dimension = schema->size();
  obj.free = schema->free_mask();
  obj.material.assign(obj.dimension, false);
  for (std::size_t i = 0; i < obj.dimension; ++i) {
    const auto& e = schema->entries[i];
    if (e.role == ParamRole::IndexD || e.role == ParamRole::AbbeD) obj.material[i] = true;
    if (e.role == ParamRole::Spacing) {
      obj.spacing.push_back(i);
      obj.spacing_lo.push_back(e.range.lo);
      obj.spacing_width.push_back(e.range.width());
    }
  }
  obj.evaluate = [spec, schema](std::span<const double> x) {
    return optifusion_loss(denormalize(*schema, x), spec).l_of;
  };
  obj.track = [schema](std::span<const double> x) { return total_track(*schema, x); };
  return obj;
}

Population init_population(const Objective& obj, std::size_t m, std::uint64_t seed) {
  if (m == 0) throw ConfigError("population size must be at least 1");
  Population pop;
  pop.individuals.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    Stream rng(seed, 0, i, StreamPhase::Init);
    auto& ind = pop.individuals[i];
    ind.rng_seed = rng.next();
    ind.x.resize(obj.dimension);
    for (std::size_t k = 0; k < obj.dimension; ++k) {
      const bool mat = !obj.material.empty() && obj.material[k];
      ind.x[k] = mat ? (rng.coin() ? 1.0 : 0.0) : rng.uniform();
    }
    ind.best_x = ind.x;
  }
  return pop;
}

void evaluate_population(Population& pop, const Objective& obj, std::size_t jobs) {
  parallel_for(pop.individuals.size(), jobs, [&](std::size_t i) {
    auto& ind = pop.individuals[i];
    ind.loss = obj.evaluate(ind.x);
    ind.best_x = ind.x;
    ind.best_loss = ind.loss;
  });
}

double acceptance_probability(double delta_loss, double temperature) {
  if (delta_loss <= 0.0) return 1.0;
  if (!(temperature > 0.0)) return 0.0;
  return std::min(std::exp(-delta_loss / temperature), 1.0);
}

double decrease_rate(std::span<const double> series, std::size_t window) {
  if (window == 0 || series.size() <= window) return std::numeric_limits<double>::infinity();
  const double then = series[series.size() - 1 - window];
  const double now = series.back();
  if (then == 0.0) return 0.0;
  return (then - now) / std::abs(then);
}

AnnealReport sa_run(Population& pop, const Objective& obj, const SearchParams& params,
                    std::uint64_t seed, std::size_t jobs) {
  AnnealReport report;
  const std::size_t m = pop.individuals.size();
  auto l_mean = [&] {
    double s = 0.0;
    for (const auto& ind : pop.individuals) s += ind.best_loss;
    return m ? s / static_cast<double>(m) : 0.0;
  };
  report.l_mean.push_back(l_mean());

  std::vector<Stream> streams;
  streams.reserve(m);
  for (std::size_t i = 0; i < m; ++i)
    streams.emplace_back(seed ^ pop.individuals[i].rng_seed, pop.generation, i, StreamPhase::Anneal);

  for (std::size_t it = 0; it < params.sa_max_iterations; ++it) {
    parallel_for(m, jobs, [&](std::size_t i) {
      auto& ind = pop.individuals[i];
      Stream& rng = streams[i];
      std::vector<double> cand = ind.x;
      for (std::size_t k = 0; k < cand.size(); ++k) {
        if (!is_free(obj, k)) continue;
        cand[k] = std::clamp(cand[k] + rng.uniform(-params.sa_step, params.sa_step), 0.0, 1.0);
      }
      const double loss = obj.evaluate(cand);
      const double p = acceptance_probability(loss - ind.loss, params.alpha_sa * ind.loss);
      if (rng.uniform() < p) {
        ind.x = std::move(cand);
        ind.loss = loss;
      }
      if (ind.loss < ind.best_loss) {
        ind.best_loss = ind.loss;
        ind.best_x = ind.x;
      }
    });
    report.l_mean.push_back(l_mean());
    report.iterations = it + 1;
    if (decrease_rate(report.l_mean, params.convergence_window) < params.convergence_threshold) {
      report.converged = true;
      break;
    }
  }
  return report;
}

Selection select_diverse(std::span<const std::vector<double>> xs, std::span<const double> losses,
                         std::size_t count, double min_distance) {
  Selection out;
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });
  for (std::size_t idx : order) {
    if (out.picked.size() >= count) break;
    bool close = false;
    for (std::size_t p : out.picked)
      if (euclidean_distance(xs[idx], xs[p]) <= min_distance) {
        close = true;
        break;
      }
    if (!close) out.picked.push_back(idx);
  }
  if (out.picked.size() < count)
    out.diagnostic = "only " + std::to_string(out.picked.size()) + " of " + std::to_string(count) +
                     " requested candidates are mutually farther than " +
                     format_loss(min_distance);
  return out;
}

std::size_t rounded_count(double fraction, std::size_t m) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(m)));
}

double cosine_learning_rate(const AdamParams& p, std::size_t step) {
  const double lo = p.learning_rate * p.floor_ratio;
  const double t = p.budget ? std::min(1.0, static_cast<double>(step) / static_cast<double>(p.budget)) : 1.0;
  return lo + 0.5 * (p.learning_rate - lo) * (1.0 + std::cos(std::numbers::pi * t));
}

std::vector<double> fd_gradient(const Objective& obj, std::span<const double> x, double fx,
                                double h, double infeasible_threshold) {
  std::vector<double> g(x.size(), 0.0);
  std::vector<double> probe(x.begin(), x.end());
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!is_free(obj, k)) continue;
    const double hi = std::min(x[k] + h, 1.0);
    const double lo = std::max(x[k] - h, 0.0);
    probe[k] = hi;
    const double fh = hi > x[k] ? obj.evaluate(probe) : fx;
    probe[k] = lo;
    const double fl = lo < x[k] ? obj.evaluate(probe) : fx;
    probe[k] = x[k];
    const bool ok_h = fh < infeasible_threshold, ok_l = fl < infeasible_threshold;
    if (ok_h && ok_l) {
      if (hi > lo) g[k] = (fh - fl) / (hi - lo);
    } else if (ok_h && hi > x[k]) {
      g[k] = (fh - fx) / (hi - x[k]);
    } else if (ok_l && lo < x[k]) {
      g[k] = (fx - fl) / (x[k] - lo);
    }
  }
  return g;
}

AdamReport adam_local(const Objective& obj, std::span<const double> x0, double loss0,
                      const SearchParams& params) {
  const AdamParams& a = params.adam;
  AdamReport r;
  r.x.assign(x0.begin(), x0.end());
  r.loss = loss0;
  r.initial_loss = loss0;
  if (!(loss0 < kInfeasibleThreshold)) return r;

  std::vector<double> x(r.x), m(x.size(), 0.0), v(x.size(), 0.0);
  double fx = loss0;
  r.trajectory.push_back(loss0);
  for (std::size_t t = 1; t <= a.budget; ++t) {
    const auto g = fd_gradient(obj, x, fx, a.fd_step, kInfeasibleThreshold);
    const double lr = cosine_learning_rate(a, t - 1);
    const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(t));
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (!is_free(obj, k)) continue;
      m[k] = a.beta1 * m[k] + (1.0 - a.beta1) * g[k];
      v[k] = a.beta2 * v[k] + (1.0 - a.beta2) * g[k] * g[k];
      const double step = lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + a.epsilon);
      x[k] = std::clamp(x[k] - step, 0.0, 1.0);
    }
    fx = obj.evaluate(x);
    if (fx < r.loss) {
      r.loss = fx;
      r.x = x;
    }
    r.trajectory.push_back(r.loss);
    r.iterations = t;
    // Early on the steps are large and the best loss sits flat while the
    // iterate wanders, so the plateau test only counts in the second half.
    if (2 * t > a.budget &&
        decrease_rate(r.trajectory, params.convergence_window) < params.convergence_threshold)
      break;
  }
  r.improved = r.loss < loss0;
  return r;
}

MutationReport mutate(const Objective& obj, std::span<const double> x, double fraction,
                      std::size_t retries, Stream& rng) {
  MutationReport rep;
  std::vector<std::size_t> candidates;
  for (std::size_t k = 0; k < x.size(); ++k)
    if (is_free(obj, k)) candidates.push_back(k);
  const std::size_t n_mut = std::min(rounded_count(fraction, x.size()), candidates.size());
  const bool keep_track = obj.track && !obj.spacing.empty();
  const double ttl0 = keep_track ? obj.track(x) : 0.0;

  for (rep.attempts = 1; rep.attempts <= retries + 1; ++rep.attempts) {
    std::vector<std::size_t> pool = candidates;
    std::vector<double> y(x.begin(), x.end());
    rep.mutated.clear();
    for (std::size_t j = 0; j < n_mut; ++j) {
      const std::size_t pick = j + static_cast<std::size_t>(rng.below(pool.size() - j));
      std::swap(pool[j], pool[pick]);
      rep.mutated.push_back(pool[j]);
      y[pool[j]] = rng.uniform();
    }
    std::sort(rep.mutated.begin(), rep.mutated.end());
    rep.pre_repair = y;
    if (!keep_track) {
      rep.x = std::move(y);
      rep.ok = true;
      return rep;
    }

    // Shift every spacing toward the side with room, in proportion to that
    // room, so the sum of spacings returns to its old value.
    const double delta = ttl0 - obj.track(y);
    std::vector<double> room(obj.spacing.size());
    double total_room = 0.0;
    for (std::size_t j = 0; j < obj.spacing.size(); ++j) {
      const double v = y[obj.spacing[j]];
      room[j] = obj.spacing_width[j] * (delta > 0.0 ? 1.0 - v : v);
      total_room += room[j];
    }
    if (std::abs(delta) > total_room) continue;
    if (delta != 0.0 && total_room > 0.0) {
      for (std::size_t j = 0; j < obj.spacing.size(); ++j) {
        if (obj.spacing_width[j] <= 0.0) continue;
        const double shift = delta * room[j] / total_room;
        double& v = y[obj.spacing[j]];
        v = std::clamp(v + shift / obj.spacing_width[j], 0.0, 1.0);
      }
    }
    if (std::abs(obj.track(y) - ttl0) >= 1e-9) continue;
    rep.x = std::move(y);
    rep.ok = true;
    return rep;
  }
  rep.attempts = retries + 1;
  rep.x.assign(x.begin(), x.end());
  return rep;
}

FormResult run_form(const Objective& obj, const SearchParams& params, std::uint64_t seed,
                    const SearchOptions& options) {
  if (params.population == 0) throw ConfigError("search.population must be at least 1");
  if (params.generations == 0) throw ConfigError("search.generations must be at least 1");
  auto log = [&](const std::string& s) {
    if (options.log) options.log(s);
  };
  FormResult result;
  const std::size_t m = params.population;
  const std::size_t n_parent = std::max<std::size_t>(1, rounded_count(params.parent_fraction, m));
  const std::size_t n_elite = std::max<std::size_t>(1, rounded_count(params.elite_fraction, m));

  Population pop = init_population(obj, m, seed);
  evaluate_population(pop, obj, options.jobs);

  for (std::size_t g = 1; g <= params.generations; ++g) {
    const auto t0 = std::chrono::steady_clock::now();
    GenerationRecord rec;
    rec.generation = g;
    pop.generation = g;
    rec.population = pop.individuals.size();

    rec.anneal = sa_run(pop, obj, params, seed, options.jobs);

    std::vector<std::vector<double>> xs;
    std::vector<double> losses;
    for (const auto& ind : pop.individuals) {
      xs.push_back(ind.best_x);
      losses.push_back(ind.best_loss);
    }
    const Selection parents = select_diverse(xs, losses, n_parent, params.similarity_distance);
    if (!parents.diagnostic.empty()) rec.diagnostics.push_back("parents: " + parents.diagnostic);
    rec.parents = parents.picked.size();

    std::vector<AdamReport> refined(parents.picked.size());
    parallel_for(refined.size(), options.jobs, [&](std::size_t j) {
      const std::size_t i = parents.picked[j];
      refined[j] = adam_local(obj, xs[i], losses[i], params);
    });
    std::vector<std::vector<double>> yx;
    std::vector<double> yl;
    for (std::size_t j = 0; j < refined.size(); ++j) {
      if (!refined[j].improved)
        rec.diagnostics.push_back("parent " + std::to_string(j) + " not improved by local search");
      yx.push_back(refined[j].x);
      yl.push_back(refined[j].loss);
    }
    rec.parent_losses = yl;

    const Selection elite_sel = select_diverse(yx, yl, n_elite, params.similarity_distance);
    if (!elite_sel.diagnostic.empty()) rec.diagnostics.push_back("elite: " + elite_sel.diagnostic);
    std::vector<Individual> elites;
    for (std::size_t j : elite_sel.picked) {
      Individual e;
      e.x = yx[j];
      e.best_x = yx[j];
      e.loss = e.best_loss = yl[j];
      elites.push_back(std::move(e));
      rec.elite_losses.push_back(yl[j]);
    }
    rec.min_loss = rec.elite_losses.empty() ? kInfeasibleLoss : rec.elite_losses.front();

    if (g == params.generations) {
      result.elites = std::move(elites);
    } else {
      // Mutants cycle through the refined parents until the population is
      // back to m together with the elites.
      Population next;
      next.generation = g + 1;
      next.individuals = elites;
      const std::size_t n_mutants = m > elites.size() ? m - elites.size() : 0;
      std::vector<Individual> mutants(n_mutants);
      std::vector<char> skipped(n_mutants, 0);
      parallel_for(n_mutants, options.jobs, [&](std::size_t j) {
        Stream rng(seed, g, j, StreamPhase::Mutate);
        const auto& src = yx[j % yx.size()];
        MutationReport mr = mutate(obj, src, params.mutation_fraction, params.mutation_retries, rng);
        if (!mr.ok) skipped[j] = 1;
        Individual& ind = mutants[j];
        ind.x = std::move(mr.x);
        ind.rng_seed = rng.next();
        ind.loss = obj.evaluate(ind.x);
        ind.best_x = ind.x;
        ind.best_loss = ind.loss;
      });
      rec.mutation_skips = static_cast<std::size_t>(std::count(skipped.begin(), skipped.end(), 1));
      if (rec.mutation_skips)
        rec.diagnostics.push_back(std::to_string(rec.mutation_skips) +
                                  " mutations kept the parent unchanged after retries");
      for (std::size_t i = 0; i < next.individuals.size(); ++i)
        next.individuals[i].rng_seed = mix64(seed ^ (g << 32) ^ i);
      for (auto& mu : mutants) next.individuals.push_back(std::move(mu));
      pop = std::move(next);
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log("generation " + std::to_string(g) + ": SA " + std::to_string(rec.anneal.iterations) +
        " iterations, L_mean " + format_loss(rec.anneal.l_mean.back()) + ", best elite " +
        format_loss(rec.min_loss) + ", " + format_loss(rec.seconds) + " s");
    result.generations.push_back(std::move(rec));
  }
  return result;
}

SearchResult run_search(const DesignSpec& spec, std::uint64_t seed, const SearchOptions& options) {
  spec.validate();
  SearchResult out;
  struct Candidate {
    std::size_t form;
    std::size_t elite;
  };
  std::vector<Candidate> cands;
  std::vector<std::vector<double>> xs;
  std::vector<double> losses;
  for (std::size_t f = 0; f < spec.design_forms.size(); ++f) {
    const auto layout = FormLayout::parse(spec.design_forms[f]);
    auto schema = ParamSchema::build(layout, spec.ranges, spec.entrance_pupil_diameter());
    const Objective obj = make_lens_objective(spec, schema);
    if (options.log) options.log("searching design form " + layout.form);
    FormResult fr = run_form(obj, spec.search, mix64(seed ^ mix64(f)), options);
    fr.design_form = layout.form;
    fr.schema = schema;
    for (std::size_t e = 0; e < fr.elites.size(); ++e) {
      if (!(fr.elites[e].loss < spec.search.output_loss_ceiling)) continue;
      cands.push_back({f, e});
      // Distances are only meaningful within one form; offset other forms so
      // they never collide in the diversity check.
      std::vector<double> x = fr.elites[e].x;
      x.push_back(static_cast<double>(f) * 1e3);
      xs.push_back(std::move(x));
      losses.push_back(fr.elites[e].loss);
    }
    out.forms.push_back(std::move(fr));
  }
  // Pad vectors from forms of different dimension to a common length.
  std::size_t width = 0;
  for (const auto& x : xs) width = std::max(width, x.size());
  for (auto& x : xs) {
    const double tag = x.back();
    x.pop_back();
    x.resize(width - 1, 0.0);
    x.push_back(tag);
  }

  const Selection sel =
      select_diverse(xs, losses, xs.size(), std::nextafter(spec.search.output_diversity_distance, 0.0));
  for (std::size_t idx : sel.picked) {
    const auto& c = cands[idx];
    const auto& fr = out.forms[c.form];
    Design d;
    d.design_form = fr.design_form;
    d.x = fr.elites[c.elite].x;
    d.loss = fr.elites[c.elite].loss;
    d.lens = sample_system(denormalize(*fr.schema, d.x), SampleConfig::from_spec(spec)).lens;
    out.outputs.push_back(std::move(d));
  }
  if (out.outputs.empty()) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& fr : out.forms)
      for (const auto& e : fr.elites) best = std::min(best, e.loss);
    out.diagnostic = "no feasible design below the output loss ceiling " +
                     format_loss(spec.search.output_loss_ceiling) + "; best elite loss " +
                     format_loss(best);
  }
  return out;
}

}  // namespace lensforge
