#pragma once

#include <vector>

#include "nlos/physics.hpp"
#include "nlos/tensor.hpp"

namespace nlos {

/// mean |H|^2 over all bins.
double mean_power(const ComplexVolume& h);
/// 0.1 * mean |H|^2.
double default_alpha(const ComplexVolume& h);
/// 1 / (max |H|^2 + alpha).
double default_step(const ComplexVolume& h, double alpha);

/// conj(H) tau / (|H|^2 + alpha), bin by bin. Throws NumericalError naming the
/// number of singular bins when alpha == 0 meets |H| == 0.
ComplexVolume wiener(const ComplexVolume& tau_f, const ComplexVolume& h, double alpha);

/// conj(H) tau.
ComplexVolume backproject(const ComplexVolume& tau_f, const ComplexVolume& h);

/// max over bins of |1 - dt (|H|^2 + alpha)|.
double contraction_factor(const ComplexVolume& h, double alpha, double dt);

struct SolveReport {
  std::vector<double> residuals;  // ||u^{k+1} - u^k||
  std::vector<double> errors;     // ||u^k - u*||, k = 0..K
  double contraction = 0.0;
  double dt = 0.0;
  std::size_t iterations = 0;
};

/// u^{k+1} = u^k + dt (conj(H) tau - (|H|^2 + alpha) u^k) from u^0 = `start`
/// (zero when empty), for K steps or until the step falls below
/// tol * ||u^{k+1}||. Errors are measured against the Wiener solution.
/// Refuses a step size whose contraction factor is not below 1.
ComplexVolume fixed_point_solve(const ComplexVolume& tau_f, const ComplexVolume& h, double alpha,
                                double dt, std::size_t K, SolveReport* report = nullptr,
                                double tol = 1e-10, const ComplexVolume* start = nullptr);

/// Full LCT baseline: R_t, pad, Wiener in frequency space with the padded
/// kernel, crop, R_z^-1. `alpha_rel` multiplies mean |H|^2. The v-grid
/// solution is returned through `v_solution` when given.
Tensor wiener_reconstruct(const Tensor& tau, const LightTransport& lt, double alpha_rel = 0.1,
                          Tensor* v_solution = nullptr);

/// The same pipeline with K fixed-point steps instead of the closed form.
Tensor fixedpoint_reconstruct(const Tensor& tau, const LightTransport& lt, std::size_t K,
                              double alpha_rel = 0.1, SolveReport* report = nullptr);

}  // namespace nlos
