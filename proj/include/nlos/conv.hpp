#pragma once

#include <array>

#include "nlos/tensor.hpp"

namespace nlos {

using Index3 = std::array<std::size_t, 3>;

/// Real 3D cross-correlation kernels shared by the plain complex convolution
/// and the differentiable layers.
///
/// Layout: activations (C, d0, d1, d2), weights (O, C, k0, k1, k2) with odd
/// k, zero padding (k-1)/2 and per-axis stride in {1, 2}. Output extent is
/// ceil(d / stride), i.e. "same" at stride 1.
///
/// The transposed convolution is the adjoint of the strided one; since the
/// forward map is many-to-one in shape, the caller passes the target extent
/// (the recorded pre-restriction shape).
namespace conv {

Shape output_shape(const Shape& in, std::size_t out_channels, const Index3& stride);

Tensor forward(const Tensor& x, const Tensor& w, const Index3& stride);

/// Adjoint of forward() with respect to x; `in_shape` is x's shape.
Tensor backward_input(const Tensor& gy, const Tensor& w, const Index3& stride,
                      const Shape& in_shape);

/// Adjoint of forward() with respect to w.
Tensor backward_weight(const Tensor& x, const Tensor& gy, const Index3& stride,
                       const Shape& w_shape);

/// Adds bias[o] to every element of channel o.
void add_bias(Tensor& y, const Tensor& bias);
/// Per-channel sum of gy (gradient of add_bias).
Tensor bias_grad(const Tensor& gy);

}  // namespace conv
}  // namespace nlos
