#include "nlos/spectral.hpp"

#include <cmath>
#include <random>

#include "nlos/error.hpp"

namespace nlos {

SpectralEstimate spectral_norm_estimate(const LinearOp& op, int iters, std::uint64_t seed) {
  if (iters < 1) throw ParameterError("power iteration needs at least one step");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  ComplexVolume x(op.shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x.re[i] = nd(rng);
    x.im[i] = nd(rng);
  }
  x *= 1.0 / x.norm();
  SpectralEstimate est;
  for (int k = 0; k < iters; ++k) {
    ComplexVolume ax = op.apply(x);
    est.value = ax.norm();
    est.iterations = k + 1;
    ComplexVolume y = op.adjoint(ax);
    const double ny = y.norm();
    if (ny == 0.0) {
      est.value = 0.0;
      break;
    }
    x = (1.0 / ny) * std::move(y);
  }
  est.value = op.apply(x).norm();
  return est;
}

LinearOp step_operator(const LinearOp& s, double dt) {
  LinearOp j;
  j.shape = s.shape;
  j.apply = [s, dt](const ComplexVolume& x) { return x - dt * s.apply(x); };
  j.adjoint = [s, dt](const ComplexVolume& x) { return x - dt * s.adjoint(x); };
  return j;
}

ClampResult clamp_to_contraction(const LinearOp& s, double dt, double bound, int iters) {
  if (!(bound > 0.0 && bound < 1.0)) throw ParameterError("contraction bound must lie in (0, 1)");
  ClampResult r;
  r.dt = dt;
  r.norm_before = spectral_norm_estimate(step_operator(s, dt), iters).value;
  r.norm_after = r.norm_before;
  if (r.norm_before <= bound) return r;
  const double s_norm = spectral_norm_estimate(s, iters).value;
  if (!(s_norm > 0.0) || !std::isfinite(s_norm))
    throw NumericalError("cannot restore contraction: operator norm estimate is " +
                         std::to_string(s_norm));
  r.dt = (1.0 + bound) / (2.0 * s_norm);
  r.factor = dt != 0.0 ? r.dt / dt : INFINITY;
  r.clamped = true;
  r.norm_after = spectral_norm_estimate(step_operator(s, r.dt), iters).value;
  return r;
}

}  // namespace nlos
