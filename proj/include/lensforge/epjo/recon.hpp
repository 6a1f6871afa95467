#pragma once

#include <array>
#include <string_view>
#include <vector>

#include "lensforge/imaging/image.hpp"
#include "lensforge/imaging/patch.hpp"
#include "lensforge/imaging/sensor.hpp"

namespace lensforge {

enum class ReconKind { Identity, Wiener };

// Throws ConfigError for anything but "identity" or "wiener".
ReconKind parse_recon(std::string_view name);

using PatchKernels = std::vector<std::array<std::vector<double>, 3>>;

// Parameter-free restoration applied to the rendered sRGB image.
//
// Wiener works in the camera-linear domain: undo the ISP, deconvolve each
// patch with its own kernel, H*/(|H|² + ε), and re-apply the ISP. Each
// patch is processed on a block padded by the kernel half-width so the
// circular FFT does not wrap its own content.
struct ReconOperator {
  ReconKind kind = ReconKind::Identity;
  double epsilon = 1e-3;

  Image apply(const Image& rendered, const PatchLayout& layout, const PatchKernels& kernels, int t,
              const SensorModel& sensor) const;
  // Vector-Jacobian product with respect to the rendered image. Kernels are
  // treated as constants.
  Image adjoint(const Image& rendered, const Image& grad_out, const PatchLayout& layout,
                const PatchKernels& kernels, int t, const SensorModel& sensor) const;
};

// Per-patch Wiener deconvolution of a camera-linear image and its transpose.
Image wiener_deconvolve(const Image& raw, const PatchLayout& layout, const PatchKernels& kernels, int t,
                        double epsilon);
Image wiener_deconvolve_adjoint(const Image& grad, const PatchLayout& layout, const PatchKernels& kernels, int t,
                                double epsilon);

}  // namespace lensforge
