#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "nlos/autodiff.hpp"
#include "nlos/tensor.hpp"

namespace testing {

using nlos::ComplexVolume;
using nlos::Shape;
using nlos::Tensor;

inline Tensor randn(const Shape& s, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Tensor t(s);
  for (auto& v : t.vec()) v = nd(rng);
  return t;
}

inline Tensor randu(const Shape& s, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ud(lo, hi);
  Tensor t(s);
  for (auto& v : t.vec()) v = ud(rng);
  return t;
}

inline ComplexVolume crandn(const Shape& s, std::uint64_t seed) {
  return {randn(s, seed), randn(s, seed + 7919)};
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double rel_err(const Tensor& a, const Tensor& ref) {
  const double n = ref.norm();
  return (a - ref).norm() / (n > 0 ? n : 1.0);
}

inline double rel_err(const ComplexVolume& a, const ComplexVolume& ref) {
  const double n = ref.norm();
  return (a - ref).norm() / (n > 0 ? n : 1.0);
}

/// Direct O(N^2) DFT over the last three axes of a rank-3 volume.
inline ComplexVolume naive_dft(const ComplexVolume& v, int sign) {
  const Shape& s = v.shape();
  ComplexVolume out(s);
  const double pi = 3.14159265358979323846;
  for (std::size_t a = 0; a < s[0]; ++a)
    for (std::size_t b = 0; b < s[1]; ++b)
      for (std::size_t c = 0; c < s[2]; ++c) {
        std::complex<double> acc = 0.0;
        for (std::size_t x = 0; x < s[0]; ++x)
          for (std::size_t y = 0; y < s[1]; ++y)
            for (std::size_t z = 0; z < s[2]; ++z) {
              const double ph = sign * 2.0 * pi *
                                (double(a * x) / s[0] + double(b * y) / s[1] + double(c * z) / s[2]);
              acc += std::complex<double>(v.re.at(x, y, z), v.im.at(x, y, z)) *
                     std::complex<double>(std::cos(ph), std::sin(ph));
            }
        out.re.at(a, b, c) = acc.real();
        out.im.at(a, b, c) = acc.imag();
      }
  return out;
}

/// Nested-loop zero-padded cross-correlation, (C, d0, d1, d2) by (O, C, k0, k1, k2).
inline Tensor naive_conv(const Tensor& x, const Tensor& w, std::array<std::size_t, 3> stride) {
  const std::size_t C = x.dim(0), O = w.dim(0);
  const std::size_t k0 = w.dim(2), k1 = w.dim(3), k2 = w.dim(4);
  const std::size_t o0 = (x.dim(1) + stride[0] - 1) / stride[0];
  const std::size_t o1 = (x.dim(2) + stride[1] - 1) / stride[1];
  const std::size_t o2 = (x.dim(3) + stride[2] - 1) / stride[2];
  Tensor y({O, o0, o1, o2});
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t i = 0; i < o0; ++i)
      for (std::size_t j = 0; j < o1; ++j)
        for (std::size_t l = 0; l < o2; ++l) {
          double acc = 0.0;
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t a = 0; a < k0; ++a)
              for (std::size_t b = 0; b < k1; ++b)
                for (std::size_t e = 0; e < k2; ++e) {
                  const long p = long(i * stride[0] + a) - long(k0 / 2);
                  const long q = long(j * stride[1] + b) - long(k1 / 2);
                  const long r = long(l * stride[2] + e) - long(k2 / 2);
                  if (p < 0 || q < 0 || r < 0 || p >= long(x.dim(1)) || q >= long(x.dim(2)) ||
                      r >= long(x.dim(3)))
                    continue;
                  acc += x.at(c, p, q, r) * w[(((o * C + c) * k0 + a) * k1 + b) * k2 + e];
                }
          y.at(o, i, j, l) = acc;
        }
  return y;
}

using GradFn = std::function<nlos::ad::Var(nlos::ad::Tape&, const std::vector<nlos::ad::Var>&)>;

/// Central finite differences of <f(x), r> with a fixed random probe r against
/// reverse mode. Returns max_i |g_ad - g_fd| / max(max_i |g_fd|, 1e-12).
inline double gradcheck(const GradFn& f, const std::vector<Tensor>& inputs, double h = 1e-5,
                        std::uint64_t seed = 99) {
  using namespace nlos;
  Tensor probe;
  auto scalar_of = [&](ad::Tape& t, ad::Var y) {
    if (probe.empty()) probe = randn(y.shape(), seed);
    return ad::sum(ad::mul(y, t.constant(probe)));
  };
  std::vector<Tensor> g_ad;
  {
    ad::Tape t;
    std::vector<ad::Var> xs;
    for (std::size_t i = 0; i < inputs.size(); ++i)
      xs.push_back(t.leaf(inputs[i], "x" + std::to_string(i)));
    ad::Var loss = scalar_of(t, f(t, xs));
    t.backward(loss);
    auto grads = t.gradients();
    for (std::size_t i = 0; i < inputs.size(); ++i) g_ad.push_back(grads.at("x" + std::to_string(i)));
  }
  auto eval = [&](const std::vector<Tensor>& in) {
    ad::Tape t;
    std::vector<ad::Var> xs;
    for (const auto& v : in) xs.push_back(t.constant(v));
    return scalar_of(t, f(t, xs)).value()[0];
  };
  double worst = 0.0, scale = 1e-12;
  std::vector<Tensor> work = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    for (std::size_t k = 0; k < inputs[i].size(); ++k) {
      const double x0 = work[i][k];
      work[i][k] = x0 + h;
      const double fp = eval(work);
      work[i][k] = x0 - h;
      const double fm = eval(work);
      work[i][k] = x0;
      const double fd = (fp - fm) / (2.0 * h);
      scale = std::max(scale, std::abs(fd));
      worst = std::max(worst, std::abs(fd - g_ad[i][k]));
    }
  return worst / scale;
}

}  // namespace testing
