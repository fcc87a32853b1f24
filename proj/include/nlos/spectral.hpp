#pragma once

#include <cstdint>
#include <functional>

#include "nlos/tensor.hpp"

namespace nlos {

/// Linear map on complex volumes given as an apply/adjoint pair.
struct LinearOp {
  Shape shape;  // domain (and range) shape
  std::function<ComplexVolume(const ComplexVolume&)> apply;
  std::function<ComplexVolume(const ComplexVolume&)> adjoint;
};

struct SpectralEstimate {
  double value = 0.0;
  int iterations = 0;
};

/// Largest singular value by power iteration on A^H A from a seeded start.
SpectralEstimate spectral_norm_estimate(const LinearOp& op, int iters, std::uint64_t seed = 7);

/// I - dt * S for a square operator S.
LinearOp step_operator(const LinearOp& s, double dt);

struct ClampResult {
  double dt = 0.0;
  double factor = 1.0;
  double norm_before = 0.0;
  double norm_after = 0.0;
  bool clamped = false;
};

/// If the estimate of ||I - dt S|| exceeds `bound`, replaces dt by
/// (1 + bound) / (2 ||S||), the midpoint of the admissible interval for the
/// top of the spectrum. Weights are untouched.
ClampResult clamp_to_contraction(const LinearOp& s, double dt, double bound, int iters = 100);

}  // namespace nlos
