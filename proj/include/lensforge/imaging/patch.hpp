#pragma once

#include <array>
#include <span>
#include <vector>

#include "lensforge/imaging/image.hpp"
#include "lensforge/imaging/psf.hpp"

namespace lensforge {

struct PatchInfo {
  int row = 0, col = 0;       // patch indices
  double dx = 0.0, dy = 0.0;  // patch center minus image center, pixels
  double radius = 0.0;        // hypot(dx, dy)
  double beta = 0.0;          // atan2(dy, dx), from the +x sampling axis
  std::vector<double> weights;  // one per sampled field, sums to 1
};

// n_h x n_w tiling of an image into s x s patches.
//
// Field radii are in pixels; the PSF for field k is taken to lie on the +x
// axis at radius radii[k], and each patch borrows a blend of them rotated
// into its own direction.
struct PatchLayout {
  int width = 0, height = 0, size = 0;
  int n_w = 0, n_h = 0;
  std::vector<double> radii;
  std::vector<PatchInfo> patches;  // row-major

  // Throws StructuralError unless size divides both dimensions.
  static PatchLayout make(int width, int height, int size, std::span<const double> field_radii_px);
  const PatchInfo& at(int row, int col) const { return patches[static_cast<std::size_t>(row) * n_w + col]; }
};

// Normalized inverse-square weights; a radius within 1e-6 of a sample snaps to it.
std::vector<double> interpolation_weights(double radius, std::span<const double> radii);

// Rotates a t x t map counterclockwise by beta (radians) about the center
// pixel. Each source pixel is splatted bilinearly; mass leaving the support
// is dropped.
std::vector<double> rotate_map(std::span<const double> map, int t, double beta);
// Transpose of rotate_map as a linear operator.
std::vector<double> rotate_map_adjoint(std::span<const double> grad, int t, double beta);

// Blend, rotate and renormalize the channel PSFs of one patch.
std::array<std::vector<double>, 3> patch_psf(const PsfGrid& grid, const PatchInfo& patch);

// Gradient of a loss through patch_psf back onto the grid PSFs. `grad` holds
// dL/d(patch kernel) per channel; results are accumulated into grid_grad,
// laid out as PsfGrid::flatten.
void patch_psf_adjoint(const PsfGrid& grid, const PatchInfo& patch,
                       const std::array<std::vector<double>, 3>& grad, std::span<double> grid_grad);

// Spatially varying convolution: each pixel uses the kernel of the patch it
// belongs to; reads outside the image replicate the border.
// kernels[patch][channel] are t x t.
Image patch_convolve(const Image& img, const PatchLayout& layout,
                     const std::vector<std::array<std::vector<double>, 3>>& kernels, int t,
                     std::size_t jobs = 1);

// dL/dK for every kernel given dL/d(output).
std::vector<std::array<std::vector<double>, 3>> patch_convolve_kernel_adjoint(
    const Image& img, const PatchLayout& layout, const Image& grad_out, int t, std::size_t jobs = 1);

}  // namespace lensforge
