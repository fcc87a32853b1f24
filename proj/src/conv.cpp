#include "nlos/conv.hpp"

#include <algorithm>

#include "nlos/error.hpp"

namespace nlos::conv {
namespace {

struct Range {
  std::ptrdiff_t lo, hi;  // half-open
};

// Output positions o with 0 <= o*s + off < in.
Range valid(std::ptrdiff_t out, std::ptrdiff_t in, std::ptrdiff_t s, std::ptrdiff_t off) {
  std::ptrdiff_t lo = off >= 0 ? 0 : (-off + s - 1) / s;
  std::ptrdiff_t hi_num = in - 1 - off;
  std::ptrdiff_t hi = hi_num < 0 ? 0 : hi_num / s + 1;
  return {lo, std::min(hi, out)};
}

struct Geometry {
  std::ptrdiff_t in[3], out[3], k[3], s[3], p[3];
  std::size_t in_n, out_n, k_n;
};

Geometry geometry(const Shape& xs, const Shape& ws, const Index3& stride) {
  if (xs.size() != 4 || ws.size() != 5)
    throw ShapeError("conv3d expects x (C,d0,d1,d2) and w (O,C,k0,k1,k2); got " +
                     shape_str(xs) + " and " + shape_str(ws));
  if (xs[0] != ws[1])
    throw ShapeError("conv3d channel mismatch: input has " + std::to_string(xs[0]) +
                     ", kernel expects " + std::to_string(ws[1]));
  Geometry g{};
  g.in_n = g.out_n = g.k_n = 1;
  for (int a = 0; a < 3; ++a) {
    if (ws[2 + a] % 2 == 0) throw ShapeError("conv3d kernel extents must be odd");
    if (stride[a] != 1 && stride[a] != 2) throw ParameterError("conv3d stride must be 1 or 2");
    g.in[a] = static_cast<std::ptrdiff_t>(xs[1 + a]);
    g.s[a] = static_cast<std::ptrdiff_t>(stride[a]);
    g.k[a] = static_cast<std::ptrdiff_t>(ws[2 + a]);
    g.p[a] = (g.k[a] - 1) / 2;
    g.out[a] = (g.in[a] + g.s[a] - 1) / g.s[a];
    g.in_n *= static_cast<std::size_t>(g.in[a]);
    g.out_n *= static_cast<std::size_t>(g.out[a]);
    g.k_n *= static_cast<std::size_t>(g.k[a]);
  }
  return g;
}

// Visits every (output row, input row) pair touched by kernel tap (k0,k1,k2)
// and calls fn(out_row_ptr_offset, in_row_ptr_offset, x_lo, x_hi, x_in_start).
template <typename Fn>
void for_tap_rows(const Geometry& g, std::ptrdiff_t k0, std::ptrdiff_t k1, std::ptrdiff_t k2,
                  Fn&& fn) {
  const Range r0 = valid(g.out[0], g.in[0], g.s[0], k0 - g.p[0]);
  const Range r1 = valid(g.out[1], g.in[1], g.s[1], k1 - g.p[1]);
  const Range r2 = valid(g.out[2], g.in[2], g.s[2], k2 - g.p[2]);
  if (r2.lo >= r2.hi) return;
  for (std::ptrdiff_t z = r0.lo; z < r0.hi; ++z) {
    const std::ptrdiff_t iz = z * g.s[0] + k0 - g.p[0];
    for (std::ptrdiff_t y = r1.lo; y < r1.hi; ++y) {
      const std::ptrdiff_t iy = y * g.s[1] + k1 - g.p[1];
      const std::size_t orow = static_cast<std::size_t>((z * g.out[1] + y) * g.out[2]);
      const std::size_t irow = static_cast<std::size_t>((iz * g.in[1] + iy) * g.in[2]);
      fn(orow, irow, r2.lo, r2.hi, r2.lo * g.s[2] + k2 - g.p[2]);
    }
  }
}

}  // namespace

Shape output_shape(const Shape& in, std::size_t out_channels, const Index3& stride) {
  if (in.size() != 4) throw ShapeError("conv3d expects rank-4 input, got " + shape_str(in));
  return {out_channels, (in[1] + stride[0] - 1) / stride[0], (in[2] + stride[1] - 1) / stride[1],
          (in[3] + stride[2] - 1) / stride[2]};
}

Tensor forward(const Tensor& x, const Tensor& w, const Index3& stride) {
  const Geometry g = geometry(x.shape(), w.shape(), stride);
  const std::size_t O = w.dim(0), C = w.dim(1);
  Tensor y(output_shape(x.shape(), O, stride));
  const std::ptrdiff_t s2 = g.s[2];
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < static_cast<std::ptrdiff_t>(O); ++o) {
    double* yo = y.data() + static_cast<std::size_t>(o) * g.out_n;
    for (std::size_t c = 0; c < C; ++c) {
      const double* xc = x.data() + c * g.in_n;
      const double* wk = w.data() + (static_cast<std::size_t>(o) * C + c) * g.k_n;
      for (std::ptrdiff_t k0 = 0; k0 < g.k[0]; ++k0)
        for (std::ptrdiff_t k1 = 0; k1 < g.k[1]; ++k1)
          for (std::ptrdiff_t k2 = 0; k2 < g.k[2]; ++k2) {
            const double wv = wk[(k0 * g.k[1] + k1) * g.k[2] + k2];
            if (wv == 0.0) continue;
            for_tap_rows(g, k0, k1, k2,
                         [&](std::size_t orow, std::size_t irow, std::ptrdiff_t lo,
                             std::ptrdiff_t hi, std::ptrdiff_t ix0) {
                           double* yr = yo + orow;
                           const double* xr = xc + irow + ix0;
                           if (s2 == 1) {
                             for (std::ptrdiff_t i = lo; i < hi; ++i) yr[i] += wv * xr[i - lo];
                           } else {
                             for (std::ptrdiff_t i = lo; i < hi; ++i)
                               yr[i] += wv * xr[(i - lo) * s2];
                           }
                         });
          }
    }
  }
  return y;
}

Tensor backward_input(const Tensor& gy, const Tensor& w, const Index3& stride,
                      const Shape& in_shape) {
  const Geometry g = geometry(in_shape, w.shape(), stride);
  const std::size_t O = w.dim(0), C = w.dim(1);
  if (gy.shape() != output_shape(in_shape, O, stride))
    throw ShapeError("conv3d adjoint: gradient shape " + shape_str(gy.shape()) +
                     " inconsistent with input shape " + shape_str(in_shape));
  Tensor gx(in_shape);
  const std::ptrdiff_t s2 = g.s[2];
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(C); ++c) {
    double* gxc = gx.data() + static_cast<std::size_t>(c) * g.in_n;
    for (std::size_t o = 0; o < O; ++o) {
      const double* gyo = gy.data() + o * g.out_n;
      const double* wk = w.data() + (o * C + static_cast<std::size_t>(c)) * g.k_n;
      for (std::ptrdiff_t k0 = 0; k0 < g.k[0]; ++k0)
        for (std::ptrdiff_t k1 = 0; k1 < g.k[1]; ++k1)
          for (std::ptrdiff_t k2 = 0; k2 < g.k[2]; ++k2) {
            const double wv = wk[(k0 * g.k[1] + k1) * g.k[2] + k2];
            if (wv == 0.0) continue;
            for_tap_rows(g, k0, k1, k2,
                         [&](std::size_t orow, std::size_t irow, std::ptrdiff_t lo,
                             std::ptrdiff_t hi, std::ptrdiff_t ix0) {
                           const double* gr = gyo + orow;
                           double* xr = gxc + irow + ix0;
                           if (s2 == 1) {
                             for (std::ptrdiff_t i = lo; i < hi; ++i) xr[i - lo] += wv * gr[i];
                           } else {
                             for (std::ptrdiff_t i = lo; i < hi; ++i)
                               xr[(i - lo) * s2] += wv * gr[i];
                           }
                         });
          }
    }
  }
  return gx;
}

Tensor backward_weight(const Tensor& x, const Tensor& gy, const Index3& stride,
                       const Shape& w_shape) {
  const Geometry g = geometry(x.shape(), w_shape, stride);
  const std::size_t O = w_shape[0], C = w_shape[1];
  if (gy.shape() != output_shape(x.shape(), O, stride))
    throw ShapeError("conv3d weight gradient: bad gradient shape " + shape_str(gy.shape()));
  Tensor gw(w_shape);
  const std::ptrdiff_t s2 = g.s[2];
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < static_cast<std::ptrdiff_t>(O); ++o) {
    const double* gyo = gy.data() + static_cast<std::size_t>(o) * g.out_n;
    for (std::size_t c = 0; c < C; ++c) {
      const double* xc = x.data() + c * g.in_n;
      double* gk = gw.data() + (static_cast<std::size_t>(o) * C + c) * g.k_n;
      for (std::ptrdiff_t k0 = 0; k0 < g.k[0]; ++k0)
        for (std::ptrdiff_t k1 = 0; k1 < g.k[1]; ++k1)
          for (std::ptrdiff_t k2 = 0; k2 < g.k[2]; ++k2) {
            double acc = 0.0;
            for_tap_rows(g, k0, k1, k2,
                         [&](std::size_t orow, std::size_t irow, std::ptrdiff_t lo,
                             std::ptrdiff_t hi, std::ptrdiff_t ix0) {
                           const double* gr = gyo + orow;
                           const double* xr = xc + irow + ix0;
                           double a = 0.0;
                           if (s2 == 1) {
                             for (std::ptrdiff_t i = lo; i < hi; ++i) a += gr[i] * xr[i - lo];
                           } else {
                             for (std::ptrdiff_t i = lo; i < hi; ++i)
                               a += gr[i] * xr[(i - lo) * s2];
                           }
                           acc += a;
                         });
            gk[(k0 * g.k[1] + k1) * g.k[2] + k2] = acc;
          }
    }
  }
  return gw;
}

void add_bias(Tensor& y, const Tensor& bias) {
  const std::size_t O = y.dim(0);
  if (bias.size() != O) throw ShapeError("conv3d bias length does not match output channels");
  const std::size_t n = y.size() / O;
  for (std::size_t o = 0; o < O; ++o) {
    double* yo = y.data() + o * n;
    for (std::size_t i = 0; i < n; ++i) yo[i] += bias[o];
  }
}

Tensor bias_grad(const Tensor& gy) {
  const std::size_t O = gy.dim(0);
  const std::size_t n = gy.size() / O;
  Tensor g({O});
  for (std::size_t o = 0; o < O; ++o) {
    double s = 0.0;
    const double* p = gy.data() + o * n;
    for (std::size_t i = 0; i < n; ++i) s += p[i];
    g[o] = s;
  }
  return g;
}

}  // namespace nlos::conv
