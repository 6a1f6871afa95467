#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lensforge/lens/design_spec.hpp"
#include "lensforge/lens/lens_system.hpp"
#include "lensforge/lens/param_vector.hpp"
#include "lensforge/optifusion/rng.hpp"

namespace lensforge {

struct Individual {
  std::vector<double> x;
  double loss = 0.0;
  std::vector<double> best_x;
  double best_loss = 0.0;
  std::uint64_t rng_seed = 0;
};

struct Population {
  std::vector<Individual> individuals;
  std::size_t generation = 0;
};

// Objective over a normalized vector, with the mask of coordinates an
// optimizer may move. Evaluation must be thread-safe.
struct Objective {
  std::size_t dimension = 0;
  std::function<double(std::span<const double>)> evaluate;
  std::vector<bool> free;                         // empty = all free
  std::vector<bool> material;                     // coordinates initialized to {0, 1}
  std::vector<std::size_t> spacing;               // coordinates that carry physical length
  std::function<double(std::span<const double>)> track;  // physical TTL, for mutation
  std::vector<double> spacing_lo, spacing_width;  // physical box per spacing coordinate
};

// Objective for one design form: L_OF of the denormalized lens.
Objective make_lens_objective(const DesignSpec& spec, std::shared_ptr<const ParamSchema> schema);

// Materials ∈ {0,1} with probability 1/2 each, everything else U[0,1].
Population init_population(const Objective& obj, std::size_t m, std::uint64_t seed);

// Evaluates loss for every individual and resets the historical best.
void evaluate_population(Population& pop, const Objective& obj, std::size_t jobs);

// min(exp(-ΔL / T), 1); T <= 0 accepts only non-increasing moves.
double acceptance_probability(double delta_loss, double temperature);

struct AnnealReport {
  std::vector<double> l_mean;  // before the first step, then after every step
  std::size_t iterations = 0;
  bool converged = false;
};

// Relative drop of `series` over the trailing window; +inf when too short.
double decrease_rate(std::span<const double> series, std::size_t window);

AnnealReport sa_run(Population& pop, const Objective& obj, const SearchParams& params,
                    std::uint64_t seed, std::size_t jobs);

struct Selection {
  std::vector<std::size_t> picked;  // indices into the candidate list
  std::string diagnostic;           // non-empty when fewer than requested
};

// Greedy by ascending loss; skips candidates within min_distance of a pick.
Selection select_diverse(std::span<const std::vector<double>> xs, std::span<const double> losses,
                         std::size_t count, double min_distance);

std::size_t rounded_count(double fraction, std::size_t m);

// Cosine annealing from lr to lr * floor_ratio over `budget` steps.
double cosine_learning_rate(const AdamParams& p, std::size_t step);

// Central difference quotients; at the box edges the step is one-sided and
// divided by the actual spacing. Infeasible sides fall back to the other
// side, or to 0 when both are infeasible.
std::vector<double> fd_gradient(const Objective& obj, std::span<const double> x, double fx,
                                double h, double infeasible_threshold);

struct AdamReport {
  std::vector<double> x;  // best iterate
  double loss = 0.0;
  double initial_loss = 0.0;
  std::size_t iterations = 0;
  bool improved = false;
  std::vector<double> trajectory;  // best-so-far per iteration
};

AdamReport adam_local(const Objective& obj, std::span<const double> x0, double loss0,
                      const SearchParams& params);

struct MutationReport {
  std::vector<double> x;
  std::vector<std::size_t> mutated;  // coordinates resampled (before TTL repair)
  std::vector<double> pre_repair;
  std::size_t attempts = 0;
  bool ok = false;
};

// Resamples round(fraction * n) free coordinates, then shifts spacings so the
// physical TTL is unchanged. Retries with fresh draws up to `retries` times.
MutationReport mutate(const Objective& obj, std::span<const double> x, double fraction,
                      std::size_t retries, Stream& rng);

struct GenerationRecord {
  std::size_t generation = 0;
  std::size_t population = 0;
  AnnealReport anneal;
  std::size_t parents = 0;
  std::vector<double> parent_losses;
  std::vector<double> elite_losses;
  double min_loss = 0.0;
  std::size_t mutation_skips = 0;
  std::vector<std::string> diagnostics;
  double seconds = 0.0;
};

struct FormResult {
  std::string design_form;
  std::shared_ptr<const ParamSchema> schema;
  std::vector<Individual> elites;   // Z_N
  std::vector<GenerationRecord> generations;
};

struct Design {
  std::string design_form;
  std::vector<double> x;
  double loss = 0.0;
  LensSystem lens;
};

struct SearchResult {
  std::vector<FormResult> forms;
  std::vector<Design> outputs;  // below the loss ceiling and mutually diverse
  std::string diagnostic;
};

struct SearchOptions {
  std::size_t jobs = 0;
  std::function<void(const std::string&)> log;
};

// Full generation loop for one form, using a caller-supplied objective.
FormResult run_form(const Objective& obj, const SearchParams& params, std::uint64_t seed,
                    const SearchOptions& options);

// Every design form in the spec; outputs merged across forms.
SearchResult run_search(const DesignSpec& spec, std::uint64_t seed, const SearchOptions& options);

}  // namespace lensforge
