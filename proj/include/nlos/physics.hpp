#pragma once

#include <cstddef>

#include "nlos/tensor.hpp"

namespace nlos {

constexpr double kLightSpeed = 299792458.0;

/// Confocal acquisition geometry. The hidden volume shares the wall's lateral
/// grid (H == T_h, W == T_w, lateral voxel pitch == ds) and starts at depth
/// z_min in front of the wall.
struct SceneGrid {
  std::size_t T = 64, Th = 16, Tw = 16;
  std::size_t D = 16, H = 16, W = 16;
  double dt = 33e-12;  // s
  double ds = 0.008;   // m, wall and lateral voxel pitch
  double dz = 0.01;    // m
  double z_min = 0.1;  // m
  double c = kLightSpeed;
  /// Scales every rendered photon count.
  double gain = 5.0e3;

  void validate() const;
  Shape transient_shape() const { return {T, Th, Tw}; }
  Shape volume_shape() const { return {D, H, W}; }
  double voxel_volume() const { return ds * ds * dz; }
  double wall_x(std::size_t j) const;
  double wall_y(std::size_t i) const;
  double depth(std::size_t k) const { return z_min + static_cast<double>(k) * dz; }
  /// Round-trip time bin position of distance r.
  double bin_of(double r) const { return 2.0 * r / (c * dt); }
};

struct RenderStats {
  std::size_t clipped = 0;  // voxel/scan-point pairs whose arrival fell outside the bins
};

/// Direct sum over voxels: each voxel deposits gain * u * Vvox / r^4 at bin
/// position 2r/(c dt), split linearly between the two straddling bins.
Tensor render_confocal_oracle(const Tensor& u, const SceneGrid& g, RenderStats* stats = nullptr);

/// Discrete light-cone transform model A = R_t^-1 H R_z on a v = (tc/2)^2 grid
/// of N_v bins of width dv = (T dt c / 2)^2 / N_v.
class LightTransport {
 public:
  LightTransport(const SceneGrid& g, std::size_t n_v = 0);

  const SceneGrid& grid() const { return g_; }
  std::size_t n_v() const { return nv_; }
  double dv() const { return dv_; }
  Shape v_shape() const { return {nv_, g_.Th, g_.Tw}; }
  Shape padded_shape() const { return {2 * nv_, 2 * g_.Th, 2 * g_.Tw}; }

  /// Spatial kernel K[dv, dy, dx] on the padded grid, negative lateral offsets
  /// wrapped. Real and nonnegative.
  const Tensor& kernel() const { return kernel_; }
  /// FFT of kernel() (padded grid).
  const ComplexVolume& kernel_fft() const { return kernel_fft_; }

  /// rho(v) = v^{3/2} tau(t(v)) / (c dt), linear interpolation in t.
  Tensor apply_R_t(const Tensor& tau) const;
  Tensor apply_R_t_adjoint(const Tensor& rho) const;
  /// tau(t) = c dt v_t^{-3/2} rho(v_t), linear interpolation in v.
  Tensor apply_R_t_inv(const Tensor& rho) const;
  Tensor apply_R_t_inv_adjoint(const Tensor& tau) const;

  /// w-domain field u(sqrt(w)) / (2 sqrt(w)), zero outside the depth range.
  Tensor apply_R_z(const Tensor& u) const;
  Tensor apply_R_z_adjoint(const Tensor& w) const;
  /// u(z) = 2 z w(z^2), linear interpolation in v.
  Tensor apply_R_z_inv(const Tensor& w) const;

  /// Dense (D, N_v) matrix of apply_R_z_inv along the depth axis.
  Tensor R_z_inv_matrix() const;

  /// Linear convolution with K restricted to the v-grid (zero-pad, FFT, crop).
  Tensor convolve(const Tensor& rho) const;
  Tensor convolve_adjoint(const Tensor& rho) const;
  /// The same map by direct summation over kernel taps.
  Tensor convolve_direct(const Tensor& rho) const;

  Tensor apply_A(const Tensor& u) const;
  Tensor apply_A_adjoint(const Tensor& tau) const;

  /// Zero-pads a v-grid volume to the padded grid, and crops back.
  Tensor pad(const Tensor& v) const;
  Tensor crop(const Tensor& padded) const;

 private:
  SceneGrid g_;
  std::size_t nv_;
  double dv_;
  Tensor kernel_;
  ComplexVolume kernel_fft_;
};

/// R_t^-1 applied to a direct (FFT-free) light-cone sum of R_z u.
Tensor render_resampled_oracle(const Tensor& u, const LightTransport& lt);

}  // namespace nlos
