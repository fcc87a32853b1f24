#include "nlos/physics.hpp"

#include <cmath>
#include <vector>

#include "nlos/error.hpp"
#include "nlos/fft.hpp"

namespace nlos {

void SceneGrid::validate() const {
  if (T < 2 || Th < 2 || Tw < 2 || D < 2 || H < 2 || W < 2)
    throw ShapeError("scene grid dimensions must all be at least 2");
  if (H != Th || W != Tw)
    throw ShapeError("hidden volume lateral grid must match the wall grid");
  if (!(dt > 0.0) || !(ds > 0.0) || !(dz > 0.0) || !(c > 0.0))
    throw ParameterError("dt, ds, dz and c must be positive");
  if (!(z_min >= 0.0)) throw ParameterError("z_min must be nonnegative");
  if (!(gain > 0.0)) throw ParameterError("gain must be positive");
}

double SceneGrid::wall_x(std::size_t j) const {
  return (static_cast<double>(j) - 0.5 * static_cast<double>(Tw - 1)) * ds;
}

double SceneGrid::wall_y(std::size_t i) const {
  return (static_cast<double>(i) - 0.5 * static_cast<double>(Th - 1)) * ds;
}

Tensor render_confocal_oracle(const Tensor& u, const SceneGrid& g, RenderStats* stats) {
  g.validate();
  if (u.shape() != g.volume_shape())
    throw ShapeError("volume shape " + shape_str(u.shape()) + " does not match grid " +
                     shape_str(g.volume_shape()));
  for (double a : u.vec())
    if (a < 0.0 || !std::isfinite(a)) throw DomainError("albedo must be finite and nonnegative");
  Tensor tau(g.transient_shape());
  const double scale = g.gain * g.voxel_volume();
  const std::ptrdiff_t points = static_cast<std::ptrdiff_t>(g.Th * g.Tw);
  std::size_t clipped = 0;
#pragma omp parallel for schedule(static) reduction(+ : clipped)
  for (std::ptrdiff_t p = 0; p < points; ++p) {
    const std::size_t i = static_cast<std::size_t>(p) / g.Tw, j = static_cast<std::size_t>(p) % g.Tw;
    const double px = g.wall_x(j), py = g.wall_y(i);
    for (std::size_t k = 0; k < g.D; ++k) {
      const double z = g.depth(k);
      for (std::size_t y = 0; y < g.H; ++y)
        for (std::size_t x = 0; x < g.W; ++x) {
          const double a = u.at(k, y, x);
          if (a == 0.0) continue;
          const double dx = g.wall_x(x) - px, dy = g.wall_y(y) - py;
          const double r2 = dx * dx + dy * dy + z * z;
          const double r = std::sqrt(r2);
          const double amount = scale * a / (r2 * r2);
          const double pos = g.bin_of(r);
          const auto b0 = static_cast<std::size_t>(std::floor(pos));
          const double w1 = pos - static_cast<double>(b0);
          bool lost = false;
          if (b0 < g.T) tau.at(b0, i, j) += (1.0 - w1) * amount;
          else lost = true;
          if (b0 + 1 < g.T) tau.at(b0 + 1, i, j) += w1 * amount;
          else if (w1 > 0.0) lost = true;
          if (lost) ++clipped;
        }
    }
  }
  if (stats) stats->clipped = clipped;
  return tau;
}

namespace {

struct Tap {
  std::size_t in;
  double w;
};

// Sparse resampling along axis 0: row o of the table lists the input taps.
using Table = std::vector<std::vector<Tap>>;

void add_linear_taps(std::vector<Tap>& row, double pos, std::size_t n, double scale) {
  if (!(pos >= 0.0) || pos > static_cast<double>(n - 1)) return;
  const auto i0 = static_cast<std::size_t>(std::floor(pos));
  const double w = pos - static_cast<double>(i0);
  row.push_back({i0, (1.0 - w) * scale});
  if (w > 0.0 && i0 + 1 < n) row.push_back({i0 + 1, w * scale});
}

Tensor resample(const Tensor& x, const Table& table, std::size_t n_in) {
  if (x.ndim() != 3 || x.dim(0) != n_in)
    throw ShapeError("resample: input " + shape_str(x.shape()) + " expects leading extent " +
                     std::to_string(n_in));
  const std::size_t plane = x.dim(1) * x.dim(2);
  Tensor y({table.size(), x.dim(1), x.dim(2)});
  for (std::size_t o = 0; o < table.size(); ++o)
    for (const Tap& t : table[o]) {
      const double* src = x.data() + t.in * plane;
      double* dst = y.data() + o * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] += t.w * src[p];
    }
  return y;
}

Tensor resample_adjoint(const Tensor& y, const Table& table, std::size_t n_in) {
  if (y.ndim() != 3 || y.dim(0) != table.size())
    throw ShapeError("resample adjoint: input " + shape_str(y.shape()) + " expects leading extent " +
                     std::to_string(table.size()));
  const std::size_t plane = y.dim(1) * y.dim(2);
  Tensor x({n_in, y.dim(1), y.dim(2)});
  for (std::size_t o = 0; o < table.size(); ++o)
    for (const Tap& t : table[o]) {
      const double* src = y.data() + o * plane;
      double* dst = x.data() + t.in * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] += t.w * src[p];
    }
  return x;
}

Table table_R_t(const SceneGrid& g, std::size_t nv, double dv) {
  Table tb(nv);
  for (std::size_t n = 0; n < nv; ++n) {
    const double v = static_cast<double>(n) * dv;
    const double pos = 2.0 * std::sqrt(v) / (g.c * g.dt);
    add_linear_taps(tb[n], pos, g.T, v * std::sqrt(v) / (g.c * g.dt));
  }
  return tb;
}

Table table_R_t_inv(const SceneGrid& g, std::size_t nv, double dv) {
  Table tb(g.T);
  for (std::size_t t = 1; t < g.T; ++t) {
    const double r = 0.5 * static_cast<double>(t) * g.dt * g.c;
    const double v = r * r;
    add_linear_taps(tb[t], v / dv, nv, g.c * g.dt / (v * std::sqrt(v)));
  }
  return tb;
}

Table table_R_z(const SceneGrid& g, std::size_t nv, double dv) {
  Table tb(nv);
  for (std::size_t m = 1; m < nv; ++m) {
    const double w = static_cast<double>(m) * dv;
    const double z = std::sqrt(w);
    add_linear_taps(tb[m], (z - g.z_min) / g.dz, g.D, 1.0 / (2.0 * z));
  }
  return tb;
}

Table table_R_z_inv(const SceneGrid& g, std::size_t nv, double dv) {
  Table tb(g.D);
  for (std::size_t k = 0; k < g.D; ++k) {
    const double z = g.depth(k);
    add_linear_taps(tb[k], z * z / dv, nv, 2.0 * z);
  }
  return tb;
}

}  // namespace

LightTransport::LightTransport(const SceneGrid& g, std::size_t n_v) : g_(g) {
  g_.validate();
  nv_ = n_v == 0 ? g.T : n_v;
  if (nv_ < 2) throw ParameterError("resampled depth must be at least 2");
  const double r_max = 0.5 * static_cast<double>(g.T) * g.dt * g.c;
  dv_ = r_max * r_max / static_cast<double>(nv_);

  kernel_ = Tensor(padded_shape());
  const std::ptrdiff_t th = static_cast<std::ptrdiff_t>(g.Th), tw = static_cast<std::ptrdiff_t>(g.Tw);
  const double mass = g.gain * g.ds * g.ds;
  for (std::ptrdiff_t dy = -(th - 1); dy < th; ++dy)
    for (std::ptrdiff_t dx = -(tw - 1); dx < tw; ++dx) {
      const double q = static_cast<double>(dx * dx + dy * dy) * g.ds * g.ds / dv_;
      const auto i0 = static_cast<std::size_t>(std::floor(q));
      const double w = q - static_cast<double>(i0);
      const std::size_t yy = static_cast<std::size_t>((dy + 2 * th) % (2 * th));
      const std::size_t xx = static_cast<std::size_t>((dx + 2 * tw) % (2 * tw));
      if (i0 < nv_) kernel_.at(i0, yy, xx) += (1.0 - w) * mass;
      if (w > 0.0 && i0 + 1 < nv_) kernel_.at(i0 + 1, yy, xx) += w * mass;
    }
  kernel_fft_ = fft3(kernel_);
}

Tensor LightTransport::apply_R_t(const Tensor& tau) const {
  return resample(tau, table_R_t(g_, nv_, dv_), g_.T);
}
Tensor LightTransport::apply_R_t_adjoint(const Tensor& rho) const {
  return resample_adjoint(rho, table_R_t(g_, nv_, dv_), g_.T);
}
Tensor LightTransport::apply_R_t_inv(const Tensor& rho) const {
  return resample(rho, table_R_t_inv(g_, nv_, dv_), nv_);
}
Tensor LightTransport::apply_R_t_inv_adjoint(const Tensor& tau) const {
  return resample_adjoint(tau, table_R_t_inv(g_, nv_, dv_), nv_);
}
Tensor LightTransport::apply_R_z(const Tensor& u) const {
  return resample(u, table_R_z(g_, nv_, dv_), g_.D);
}
Tensor LightTransport::apply_R_z_adjoint(const Tensor& w) const {
  return resample_adjoint(w, table_R_z(g_, nv_, dv_), g_.D);
}
Tensor LightTransport::apply_R_z_inv(const Tensor& w) const {
  return resample(w, table_R_z_inv(g_, nv_, dv_), nv_);
}

Tensor LightTransport::R_z_inv_matrix() const {
  const Table tb = table_R_z_inv(g_, nv_, dv_);
  Tensor m({g_.D, nv_});
  for (std::size_t k = 0; k < g_.D; ++k)
    for (const Tap& t : tb[k]) m[k * nv_ + t.in] += t.w;
  return m;
}

Tensor LightTransport::pad(const Tensor& v) const {
  if (v.shape() != v_shape())
    throw ShapeError("expected v-grid volume " + shape_str(v_shape()) + ", got " +
                     shape_str(v.shape()));
  Tensor p(padded_shape());
  for (std::size_t a = 0; a < nv_; ++a)
    for (std::size_t b = 0; b < g_.Th; ++b)
      for (std::size_t c = 0; c < g_.Tw; ++c) p.at(a, b, c) = v.at(a, b, c);
  return p;
}

Tensor LightTransport::crop(const Tensor& padded) const {
  if (padded.shape() != padded_shape()) throw ShapeError("expected padded volume");
  Tensor v(v_shape());
  for (std::size_t a = 0; a < nv_; ++a)
    for (std::size_t b = 0; b < g_.Th; ++b)
      for (std::size_t c = 0; c < g_.Tw; ++c) v.at(a, b, c) = padded.at(a, b, c);
  return v;
}

namespace {

Tensor multiply_real_part(const ComplexVolume& x, const ComplexVolume& h, bool conjugate) {
  ComplexVolume y(x.shape());
  const double sgn = conjugate ? -1.0 : 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double hr = h.re[i], hi = sgn * h.im[i];
    y.re[i] = hr * x.re[i] - hi * x.im[i];
    y.im[i] = hr * x.im[i] + hi * x.re[i];
  }
  return ifft3(y).re;
}

}  // namespace

Tensor LightTransport::convolve(const Tensor& rho) const {
  return crop(multiply_real_part(fft3(pad(rho)), kernel_fft_, false));
}

Tensor LightTransport::convolve_adjoint(const Tensor& rho) const {
  return crop(multiply_real_part(fft3(pad(rho)), kernel_fft_, true));
}

Tensor LightTransport::convolve_direct(const Tensor& rho) const {
  if (rho.shape() != v_shape()) throw ShapeError("convolve_direct: bad v-grid shape");
  const std::size_t th = g_.Th, tw = g_.Tw;
  Tensor out(v_shape());
  for (std::size_t v = 0; v < nv_; ++v)
    for (std::size_t y = 0; y < th; ++y)
      for (std::size_t x = 0; x < tw; ++x) {
        double acc = 0.0;
        for (std::size_t dv = 0; dv <= v; ++dv)
          for (std::size_t y2 = 0; y2 < th; ++y2)
            for (std::size_t x2 = 0; x2 < tw; ++x2) {
              const std::size_t ky = (y + 2 * th - y2) % (2 * th);
              const std::size_t kx = (x + 2 * tw - x2) % (2 * tw);
              const double k = kernel_.at(dv, ky, kx);
              if (k != 0.0) acc += k * rho.at(v - dv, y2, x2);
            }
        out.at(v, y, x) = acc;
      }
  return out;
}

Tensor LightTransport::apply_A(const Tensor& u) const {
  if (u.shape() != g_.volume_shape()) throw ShapeError("apply_A: volume shape mismatch");
  return apply_R_t_inv(convolve(apply_R_z(u)));
}

Tensor LightTransport::apply_A_adjoint(const Tensor& tau) const {
  if (tau.shape() != g_.transient_shape()) throw ShapeError("apply_A_adjoint: transient shape mismatch");
  return apply_R_z_adjoint(convolve_adjoint(apply_R_t_inv_adjoint(tau)));
}

Tensor render_resampled_oracle(const Tensor& u, const LightTransport& lt) {
  return lt.apply_R_t_inv(lt.convolve_direct(lt.apply_R_z(u)));
}

}  // namespace nlos
