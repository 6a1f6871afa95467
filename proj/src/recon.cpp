#include "lensforge/epjo/recon.hpp"

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <memory>
#include <mutex>

#include "lensforge/error.hpp"
#include "lensforge/imaging/isp.hpp"

namespace lensforge {

ReconKind parse_recon(std::string_view name) {
  if (name == "identity") return ReconKind::Identity;
  if (name == "wiener") return ReconKind::Wiener;
  throw ConfigError("recon must be 'identity' or 'wiener', got '" + std::string(name) + "'");
}

namespace {

// The FFTW planner is not thread-safe.
std::mutex planner_mutex;

template <class T>
struct FftwFree {
  void operator()(T* p) const { fftw_free(p); }
};
template <class T>
using FftwBuf = std::unique_ptr<T, FftwFree<T>>;

// Workspace for one block size; filters every patch of a channel in turn.
class BlockFilter {
 public:
  explicit BlockFilter(int n) : n_(n), nc_(n / 2 + 1) {
    const std::size_t real = static_cast<std::size_t>(n) * n;
    const std::size_t cplx = static_cast<std::size_t>(n) * nc_;
    block_.reset(static_cast<double*>(fftw_malloc(sizeof(double) * real)));
    kern_.reset(static_cast<double*>(fftw_malloc(sizeof(double) * real)));
    spec_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * cplx)));
    kspec_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * cplx)));
    std::lock_guard lock(planner_mutex);
    fwd_ = fftw_plan_dft_r2c_2d(n, n, block_.get(), spec_.get(), FFTW_ESTIMATE);
    kfwd_ = fftw_plan_dft_r2c_2d(n, n, kern_.get(), kspec_.get(), FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_2d(n, n, spec_.get(), block_.get(), FFTW_ESTIMATE);
  }
  ~BlockFilter() {
    std::lock_guard lock(planner_mutex);
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(kfwd_);
    fftw_destroy_plan(inv_);
  }
  BlockFilter(const BlockFilter&) = delete;
  BlockFilter& operator=(const BlockFilter&) = delete;

  double* block() { return block_.get(); }

  // Filters block() in place with H*/(|H|²+ε), or its transpose H/(|H|²+ε).
  void run(const std::vector<double>& kernel, int t, double eps, bool transpose) {
    const int c = t / 2;
    std::fill(kern_.get(), kern_.get() + static_cast<std::size_t>(n_) * n_, 0.0);
    for (int a = -c; a <= c; ++a)
      for (int b = -c; b <= c; ++b) {
        const int r = (a + n_) % n_, q = (b + n_) % n_;
        kern_.get()[static_cast<std::size_t>(r) * n_ + q] += kernel[static_cast<std::size_t>(a + c) * t + (b + c)];
      }
    fftw_execute(kfwd_);
    fftw_execute(fwd_);
    const double scale = 1.0 / (static_cast<double>(n_) * n_);
    const std::size_t cplx = static_cast<std::size_t>(n_) * nc_;
    for (std::size_t i = 0; i < cplx; ++i) {
      const std::complex<double> h(kspec_.get()[i][0], kspec_.get()[i][1]);
      const std::complex<double> x(spec_.get()[i][0], spec_.get()[i][1]);
      const std::complex<double> w = (transpose ? h : std::conj(h)) / (std::norm(h) + eps);
      const std::complex<double> y = w * x * scale;
      spec_.get()[i][0] = y.real();
      spec_.get()[i][1] = y.imag();
    }
    fftw_execute(inv_);
  }

 private:
  int n_, nc_;
  FftwBuf<double> block_, kern_;
  FftwBuf<fftw_complex> spec_, kspec_;
  fftw_plan fwd_ = nullptr, kfwd_ = nullptr, inv_ = nullptr;
};

void check(const Image& img, const PatchLayout& layout, const PatchKernels& kernels, int t) {
  if (img.width != layout.width || img.height != layout.height || img.channels != 3)
    throw StructuralError("image does not match the patch layout");
  if (kernels.size() != layout.patches.size()) throw StructuralError("one kernel set per patch is required");
  if (t <= 0 || t % 2 == 0) throw StructuralError("kernel size must be odd");
}

}  // namespace

Image wiener_deconvolve(const Image& raw, const PatchLayout& layout, const PatchKernels& kernels, int t,
                        double epsilon) {
  check(raw, layout, kernels, t);
  const int c = t / 2, s = layout.size, n = s + 2 * c;
  BlockFilter f(n);
  Image out(raw.width, raw.height, 3);
  for (std::size_t p = 0; p < layout.patches.size(); ++p) {
    const int y0 = layout.patches[p].row * s - c, x0 = layout.patches[p].col * s - c;
    for (int ch = 0; ch < 3; ++ch) {
      double* b = f.block();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          b[static_cast<std::size_t>(i) * n + j] =
              raw.at(ch, std::clamp(y0 + i, 0, raw.height - 1), std::clamp(x0 + j, 0, raw.width - 1));
      f.run(kernels[p][ch], t, epsilon, false);
      for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j) out.at(ch, y0 + c + i, x0 + c + j) = b[static_cast<std::size_t>(i + c) * n + j + c];
    }
  }
  return out;
}

Image wiener_deconvolve_adjoint(const Image& grad, const PatchLayout& layout, const PatchKernels& kernels, int t,
                                double epsilon) {
  check(grad, layout, kernels, t);
  const int c = t / 2, s = layout.size, n = s + 2 * c;
  BlockFilter f(n);
  Image out(grad.width, grad.height, 3);
  for (std::size_t p = 0; p < layout.patches.size(); ++p) {
    const int y0 = layout.patches[p].row * s - c, x0 = layout.patches[p].col * s - c;
    for (int ch = 0; ch < 3; ++ch) {
      double* b = f.block();
      std::fill(b, b + static_cast<std::size_t>(n) * n, 0.0);
      for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j) b[static_cast<std::size_t>(i + c) * n + j + c] = grad.at(ch, y0 + c + i, x0 + c + j);
      f.run(kernels[p][ch], t, epsilon, true);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          out.at(ch, std::clamp(y0 + i, 0, grad.height - 1), std::clamp(x0 + j, 0, grad.width - 1)) +=
              b[static_cast<std::size_t>(i) * n + j];
    }
  }
  return out;
}

Image ReconOperator::apply(const Image& rendered, const PatchLayout& layout, const PatchKernels& kernels, int t,
                           const SensorModel& sensor) const {
  if (kind == ReconKind::Identity) return rendered;
  return isp_forward(wiener_deconvolve(isp_inverse(rendered, sensor), layout, kernels, t, epsilon), sensor);
}

Image ReconOperator::adjoint(const Image& rendered, const Image& grad_out, const PatchLayout& layout,
                             const PatchKernels& kernels, int t, const SensorModel& sensor) const {
  if (kind == ReconKind::Identity) return grad_out;
  const Image raw = isp_inverse(rendered, sensor);
  const Image restored = wiener_deconvolve(raw, layout, kernels, t, epsilon);
  const Image g1 = isp_forward_adjoint(restored, grad_out, sensor);
  const Image g2 = wiener_deconvolve_adjoint(g1, layout, kernels, t, epsilon);
  return isp_inverse_adjoint(rendered, g2, sensor);
}

}  // namespace lensforge
