#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lensforge/epjo/recon.hpp"
#include "lensforge/imaging/isp.hpp"
#include "lensforge/imaging/psf.hpp"
#include "lensforge/lens/design_spec.hpp"
#include "lensforge/lens/glass.hpp"
#include "lensforge/lens/param_vector.hpp"

namespace lensforge {

struct LearningRates {
  double curvature = 2e-4;  // 1/mm per step
  double spacing = 0.02;    // mm
  double index = 1e-3;
  double abbe = 0.2;

  double of(ParamRole role) const;
};

struct EpjoConfig {
  double alpha_iq = 100.0;
  double alpha1 = 0.01;  // perceptual weight; kept for completeness, no perceptual term is computed
  double alpha2 = 0.1;
  LearningRates rates;
  std::size_t n_o = 5;
  std::size_t n_r = 1000;  // inner restoration-model steps; vacuous for a fixed operator
  std::size_t max_epochs = 20;
  std::vector<double> depths{1e5, 1e4, 5e3};  // mm; index 1 is the reference depth
  int fields = 7;
  double fd_step = 1e-6;  // normalized units; 1e-4 is visibly nonlinear on curvatures
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  std::size_t jobs = 1;

  void validate() const;
};

// (1/3) Σ_j MSE(R_j, S) + α₂ Σ_{j≠1} MSE(R_j, R_1) for three depth renders.
// When grads is non-null it receives dL/dR_j.
double image_quality_loss(std::span<const Image> recon, const Image& truth, double alpha2,
                          std::vector<Image>* grads = nullptr);

// Two-stage gradient of L(F(ξ)).
//
// Stage 1 keeps only F and the finite-difference Jacobian dF/dξ (one column
// per parameter); every ray-trace intermediate dies inside the callback.
// Stage 2 sees nothing but F and returns (L, dL/dF).
struct AdjointState {
  std::vector<double> f;
  std::vector<double> jacobian;  // column-major: jacobian[k * f.size() + i] = dF_i/dξ_k
  std::size_t params = 0;
};

struct Stage2 {
  double loss = 0.0;
  std::vector<double> grad_f;
};

using PsfFunction = std::function<std::vector<double>(std::span<const double>)>;
using Stage2Function = std::function<Stage2(std::span<const double>)>;

// Central differences, ξ ± step clamped into [lo, hi] and divided by the
// actual spacing. Coordinates with free[k] == false get a zero column.
AdjointState adjoint_stage1(const PsfFunction& psfs, std::span<const double> xi, std::span<const double> steps,
                            std::span<const double> lo, std::span<const double> hi, const std::vector<bool>& free,
                            std::size_t jobs = 1);
// Jᵀ · dL/dF
std::vector<double> adjoint_product(const AdjointState& state, std::span<const double> grad_f);

struct AdjointGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

AdjointGradient adjoint_gradient(const PsfFunction& psfs, const Stage2Function& stage2, std::span<const double> xi,
                                 std::span<const double> steps, std::span<const double> lo,
                                 std::span<const double> hi, const std::vector<bool>& free, std::size_t jobs = 1);

// A lens under joint optimization together with its imaging setup.
//
// ξ is the physical parameter vector (curvatures, spacings, n_d, v_d) laid
// out by the schema. The patch layout, and therefore each patch's field
// weights and rotation, is fixed from the starting lens so that the
// pipeline is a smooth function of the PSFs alone.
struct EpjoProblem {
  DesignSpec spec;
  GlassCatalog catalog;
  EpjoConfig config;
  SensorModel sensor;
  ReconOperator recon;
  std::shared_ptr<const ParamSchema> schema;
  std::vector<double> fields_deg;
  PatchLayout layout;
  std::vector<Image> train;
  std::vector<Image> validation;

  // Builds schema, fields and layout from a starting lens. Images must all
  // match the sensor size; up to 8 trailing images go to validation and the
  // rest to training (both sets are the same when there are fewer than 2).
  static EpjoProblem make(const LensSystem& start, const DesignSpec& spec, const GlassCatalog& catalog,
                          const EpjoConfig& config, const SensorModel& sensor, const ReconOperator& recon,
                          std::vector<Image> images);

  std::vector<double> xi(const LensSystem& lens) const;
  LensSystem lens(std::span<const double> xi) const;
  std::vector<double> lower() const;
  std::vector<double> upper() const;
  std::vector<double> steps() const;
  std::vector<bool> free() const;

  // PSF grids at every depth, flattened [depth][field][channel][row][col].
  std::vector<double> psf_values(std::span<const double> xi) const;
  std::size_t psf_value_count() const;

  // Image-space part of the loss as a function of F: mean over images of
  // image_quality_loss, with its analytic gradient.
  Stage2 image_stage(std::span<const double> f, const std::vector<Image>& images) const;
  double image_loss(std::span<const double> f, const std::vector<Image>& images) const;

  // Quadratic constraint loss plus glass-variable loss.
  double constraint_loss(std::span<const double> xi) const;

  // L_PC + α_IQ · L_IQ on an image set.
  double loss(std::span<const double> xi, const std::vector<Image>& images) const;
  AdjointGradient gradient(std::span<const double> xi, const std::vector<Image>& images) const;

  // Renders one image through the chain at one depth, noise off.
  std::vector<Image> render(std::span<const double> f, const Image& truth) const;
};

struct JointResult {
  LensSystem lens;
  double start_loss = 0.0;
  double best_loss = 0.0;
  std::size_t epochs = 0;
  std::vector<double> trajectory;  // validation loss after every lens step
  bool diverged = false;
};

// Epochs of n_o ADAM steps on the training images; validation after each
// step keeps the best state of the epoch. Stops once an epoch does not
// improve on the previous best (or after max_epochs).
JointResult joint_optimize(const EpjoProblem& problem, const LensSystem& start);

struct SubstitutionRound {
  std::size_t element = 0;
  std::string glass;
  double distance = 0.0;
  double loss_before = 0.0;  // continuous glass still in place
  double loss_after = 0.0;   // after substitution and re-optimization
};

struct QuantizeResult {
  LensSystem lens;
  std::vector<SubstitutionRound> rounds;
  bool aborted = false;
};

// Re-optimization callback: given the lens with one more glass pinned and
// the matching schema, returns the re-optimized lens and its loss.
using JointStep = std::function<std::pair<LensSystem, double>(const LensSystem&, std::shared_ptr<const ParamSchema>)>;

// One round per continuous glass, nearest-first under the catalog metric.
// On a non-finite loss the remaining glasses are snapped without
// re-optimization and `aborted` is set.
QuantizeResult quantize_glass(const LensSystem& lens, std::shared_ptr<const ParamSchema> schema,
                              const GlassCatalog& catalog, const JointStep& joint_step,
                              const std::function<double(const LensSystem&)>& loss_of = {});

}  // namespace lensforge
