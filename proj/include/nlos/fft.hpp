#pragma once

#include "nlos/tensor.hpp"

namespace nlos {

/// Unnormalized forward 3D DFT over the last three axes. Rank-4 input is
/// transformed channel by channel. Any positive sizes are supported.
ComplexVolume fft3(const ComplexVolume& v);

/// Inverse 3D DFT with the 1/N factor, so ifft3(fft3(v)) == v.
ComplexVolume ifft3(const ComplexVolume& v);

/// FFT of a real volume (imaginary part zero).
ComplexVolume fft3(const Tensor& real);

}  // namespace nlos
