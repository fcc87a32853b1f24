#pragma once

#include <optional>

#include "nlos/conv.hpp"
#include "nlos/tensor.hpp"

namespace nlos {

/// Complex kernel W = M + iN.
///
/// Forward kernels are laid out (out, in, k0, k1, k2); transposed kernels
/// follow the usual deconvolution layout (in, out, k0, k1, k2), so a
/// transposed kernel with the same tensors is the adjoint of the strided one.
struct ComplexKernel {
  Tensor re;
  Tensor im;
  std::optional<ComplexVolume> bias;  // shape (out)
  Index3 stride{1, 1, 1};
  bool transpose = false;

  static ComplexKernel zeros(std::size_t out, std::size_t in, Index3 k, Index3 stride = {1, 1, 1},
                             bool transpose = false);
  /// Centered delta with the given complex weight on every (o == i) pair.
  static ComplexKernel delta(std::size_t channels, double w_re, double w_im,
                             Index3 k = {3, 3, 3});

  std::size_t out_channels() const { return transpose ? re.dim(1) : re.dim(0); }
  std::size_t in_channels() const { return transpose ? re.dim(0) : re.dim(1); }
  void validate() const;
};

/// (M*x - N*y) + i(M*y + N*x) plus optional bias. Rank-3 volumes are treated
/// as a single channel and returned as rank 3 when the kernel has one output
/// channel. For transposed kernels `out_extent` gives the target spatial
/// shape; by default each strided axis doubles.
ComplexVolume conv_c(const ComplexKernel& w, const ComplexVolume& h,
                     std::optional<Index3> out_extent = std::nullopt);

/// Real activations that are 1-Lipschitz and odd through the origin.
struct Activation {
  enum class Kind { Tanh, PRelu };
  Kind kind = Kind::Tanh;
  double slope = 0.25;  // PReLU negative slope, must lie in (0, 1]

  static Activation tanh() { return {Kind::Tanh, 0.0}; }
  static Activation prelu(double a);
  double apply(double x) const;
  double derivative(double x) const;
};

/// sigma(Re h) + i sigma(Im h), componentwise.
ComplexVolume act_c(const ComplexVolume& h, const Activation& act);

}  // namespace nlos
