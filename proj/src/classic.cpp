#include "nlos/classic.hpp"

#include <algorithm>
#include <cmath>

#include "nlos/error.hpp"
#include "nlos/fft.hpp"

namespace nlos {
namespace {

double abs2(const ComplexVolume& h, std::size_t i) { return h.re[i] * h.re[i] + h.im[i] * h.im[i]; }

void require_match(const ComplexVolume& a, const ComplexVolume& h) {
  if (a.shape() != h.shape())
    throw ShapeError("spectrum shape " + shape_str(a.shape()) + " does not match kernel " +
                     shape_str(h.shape()));
}

}  // namespace

double mean_power(const ComplexVolume& h) {
  double s = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) s += abs2(h, i);
  return s / static_cast<double>(h.size());
}

double default_alpha(const ComplexVolume& h) { return 0.1 * mean_power(h); }

double default_step(const ComplexVolume& h, double alpha) {
  double m = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) m = std::max(m, abs2(h, i));
  return 1.0 / (m + alpha);
}

ComplexVolume backproject(const ComplexVolume& tau_f, const ComplexVolume& h) {
  require_match(tau_f, h);
  ComplexVolume b(h.shape());
  for (std::size_t i = 0; i < h.size(); ++i) {
    b.re[i] = h.re[i] * tau_f.re[i] + h.im[i] * tau_f.im[i];
    b.im[i] = h.re[i] * tau_f.im[i] - h.im[i] * tau_f.re[i];
  }
  return b;
}

ComplexVolume wiener(const ComplexVolume& tau_f, const ComplexVolume& h, double alpha) {
  if (!(alpha >= 0.0)) throw ParameterError("alpha must be nonnegative");
  require_match(tau_f, h);
  std::size_t singular = 0;
  for (std::size_t i = 0; i < h.size(); ++i)
    if (abs2(h, i) + alpha == 0.0) ++singular;
  if (singular > 0)
    throw NumericalError("Wiener filter singular: " + std::to_string(singular) +
                         " frequency bins have |H| = 0 with alpha = 0");
  ComplexVolume u = backproject(tau_f, h);
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double d = abs2(h, i) + alpha;
    u.re[i] /= d;
    u.im[i] /= d;
  }
  return u;
}

double contraction_factor(const ComplexVolume& h, double alpha, double dt) {
  double b = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i)
    b = std::max(b, std::abs(1.0 - dt * (abs2(h, i) + alpha)));
  return b;
}

ComplexVolume fixed_point_solve(const ComplexVolume& tau_f, const ComplexVolume& h, double alpha,
                                double dt, std::size_t K, SolveReport* report, double tol,
                                const ComplexVolume* start) {
  const double b_hat = contraction_factor(h, alpha, dt);
  if (!(b_hat < 1.0))
    throw NumericalError("step size " + std::to_string(dt) + " is not contractive (factor " +
                         std::to_string(b_hat) + "); try dt = " +
                         std::to_string(default_step(h, alpha)));
  const ComplexVolume src = backproject(tau_f, h);
  ComplexVolume u = start && start->size() ? *start : ComplexVolume(h.shape());
  require_match(u, h);
  ComplexVolume fixed;
  if (report) {
    fixed = wiener(tau_f, h, alpha);
    *report = SolveReport{};
    report->contraction = b_hat;
    report->dt = dt;
    report->errors.push_back((u - fixed).norm());
  }
  for (std::size_t k = 0; k < K; ++k) {
    ComplexVolume next(h.shape());
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double s = abs2(h, i) + alpha;
      next.re[i] = u.re[i] + dt * (src.re[i] - s * u.re[i]);
      next.im[i] = u.im[i] + dt * (src.im[i] - s * u.im[i]);
    }
    const double step = (next - u).norm();
    u = std::move(next);
    if (!u.all_finite()) throw NumericalError("fixed-point iterate became non-finite at step " +
                                              std::to_string(k + 1));
    if (report) {
      report->residuals.push_back(step);
      report->errors.push_back((u - fixed).norm());
      report->iterations = k + 1;
    }
    if (step <= tol * u.norm()) break;
  }
  return u;
}

namespace {

ComplexVolume measurement_spectrum(const Tensor& tau, const LightTransport& lt) {
  if (tau.shape() != lt.grid().transient_shape())
    throw ShapeError("transient shape " + shape_str(tau.shape()) + " does not match grid " +
                     shape_str(lt.grid().transient_shape()));
  return fft3(lt.pad(lt.apply_R_t(tau)));
}

}  // namespace

Tensor wiener_reconstruct(const Tensor& tau, const LightTransport& lt, double alpha_rel,
                          Tensor* v_solution) {
  const ComplexVolume& h = lt.kernel_fft();
  const double alpha = alpha_rel * mean_power(h);
  Tensor v = lt.crop(ifft3(wiener(measurement_spectrum(tau, lt), h, alpha)).re);
  if (v_solution) *v_solution = v;
  return lt.apply_R_z_inv(v);
}

Tensor fixedpoint_reconstruct(const Tensor& tau, const LightTransport& lt, std::size_t K,
                              double alpha_rel, SolveReport* report) {
  const ComplexVolume& h = lt.kernel_fft();
  const double alpha = alpha_rel * mean_power(h);
  ComplexVolume uf =
      fixed_point_solve(measurement_spectrum(tau, lt), h, alpha, default_step(h, alpha), K, report);
  return lt.apply_R_z_inv(lt.crop(ifft3(uf).re));
}

}  // namespace nlos
