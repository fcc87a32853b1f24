#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "nlos/layers.hpp"
#include "nlos/nano.hpp"
#include "support.hpp"

namespace testing {

struct GradCase {
  std::string name;
  GradFn fn;
  std::vector<Tensor> inputs;
};

/// One finite-difference case per differentiable primitive.
inline std::vector<GradCase> primitive_cases() {
  using namespace nlos;
  namespace ad = nlos::ad;
  const Shape s{2, 3, 4};
  auto r = [](const Shape& sh, std::uint64_t seed) { return randn(sh, seed); };
  // values kept away from the kinks of abs, prelu and relu
  auto away = [](Tensor t) {
    for (auto& v : t.vec()) v = v >= 0 ? v + 0.1 : v - 0.1;
    return t;
  };
  Tensor positive = randu(s, 5, 0.2, 2.0);
  Tensor distinct = randn({4, 3, 3}, 6);
  for (std::size_t i = 0; i < distinct.size(); ++i) distinct[i] += 0.05 * double(i % 4);
  Tensor m = randn({3, 4}, 8);
  std::vector<std::ptrdiff_t> idx{0, 5, -1, 7, 7, 2, 23, -1};

  std::vector<GradCase> c;
  c.push_back({"add", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::add(x[0], x[1]); }, {r(s, 1), r(s, 2)}});
  c.push_back({"sub", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::sub(x[0], x[1]); }, {r(s, 1), r(s, 2)}});
  c.push_back({"mul", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::mul(x[0], x[1]); }, {r(s, 1), r(s, 2)}});
  c.push_back({"scale", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::scale(x[0], -1.7); }, {r(s, 1)}});
  c.push_back({"add_scalar", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::add_scalar(x[0], 0.3); }, {r(s, 1)}});
  c.push_back({"neg", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::neg(x[0]); }, {r(s, 1)}});
  c.push_back({"mul_scalar", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::mul_scalar(x[0], x[1]); }, {r(s, 1), r({1}, 3)}});
  c.push_back({"tanh", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::tanh(x[0]); }, {r(s, 1)}});
  c.push_back({"prelu", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::prelu(x[0], 0.25); }, {away(r(s, 1))}});
  c.push_back({"relu", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::relu(x[0]); }, {away(r(s, 1))}});
  c.push_back({"softplus", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::softplus(x[0]); }, {r(s, 1)}});
  c.push_back({"square", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::square(x[0]); }, {r(s, 1)}});
  c.push_back({"abs", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::abs(x[0]); }, {away(r(s, 1))}});
  c.push_back({"saturate", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::saturate(x[0], 2.5); }, {positive}});
  c.push_back({"sum", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::sum(x[0]); }, {r(s, 1)}});
  c.push_back({"mean", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::mean(x[0]); }, {r(s, 1)}});
  c.push_back({"channel_mean", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::channel_mean(x[0]); }, {r(s, 1)}});
  c.push_back({"reshape", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::reshape(x[0], {4, 6}); }, {r(s, 1)}});
  c.push_back({"concat_channels", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::concat_channels({x[0], x[1]}); }, {r({1, 2, 2, 2}, 1), r({2, 2, 2, 2}, 2)}});
  c.push_back({"slice_channels", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::slice_channels(x[0], 1, 2); }, {r({4, 2, 2, 2}, 1)}});
  c.push_back({"repeat_channels", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::repeat_channels(x[0], 3); }, {r({1, 2, 2, 2}, 1)}});
  c.push_back({"stack2", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::stack2(x[0], x[1]); }, {r(s, 1), r(s, 2)}});
  c.push_back({"take", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::take(x[0], 1); }, {r(s, 1)}});
  c.push_back({"conv3d", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::conv3d(x[0], x[1], x[2], {1, 1, 1}); },
               {r({2, 3, 4, 3}, 1), r({3, 2, 3, 3, 3}, 2), r({3}, 3)}});
  c.push_back({"conv3d_stride2", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::conv3d(x[0], x[1], x[2], {2, 2, 2}); },
               {r({2, 5, 4, 3}, 1), r({2, 2, 3, 3, 3}, 2), r({2}, 3)}});
  c.push_back({"conv3d_transpose", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::conv3d_transpose(x[0], x[1], x[2], {2, 2, 2}, {5, 4, 3}); },
               {r({2, 3, 2, 2}, 1), r({2, 3, 3, 3, 3}, 2), r({3}, 3)}});
  c.push_back({"fft3", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::fft3(x[0]); }, {r({2, 1, 3, 4, 2}, 1)}});
  c.push_back({"ifft3", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::ifft3(x[0]); }, {r({2, 2, 3, 2, 3}, 1)}});
  c.push_back({"linear", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::linear(x[0], x[1], x[2]); }, {r({5}, 1), r({3, 5}, 2), r({3}, 3)}});
  c.push_back({"apply_axis0", [m](ad::Tape&, const std::vector<ad::Var>& x) { return ad::apply_axis0(x[0], m); }, {r({4, 2, 3}, 1)}});
  c.push_back({"max_axis0", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::max_axis0(x[0]); }, {distinct}});
  c.push_back({"upsample_xy2", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::upsample_xy2(x[0]); }, {r({2, 2, 2, 3}, 1)}});
  c.push_back({"diff_axis0", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::diff_axis(x[0], 0); }, {r({3, 3, 4}, 1)}});
  c.push_back({"diff_axis1", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::diff_axis(x[0], 1); }, {r({3, 3, 4}, 1)}});
  c.push_back({"diff_axis2", [](ad::Tape&, const std::vector<ad::Var>& x) { return ad::diff_axis(x[0], 2); }, {r({3, 3, 4}, 1)}});
  c.push_back({"gather", [idx](ad::Tape&, const std::vector<ad::Var>& x) { return ad::gather(x[0], idx, {2, 4}); }, {r(s, 1)}});
  return c;
}

/// Finite differences over named parameters of a model for a scalar-valued
/// function of the bound parameters.
inline double gradcheck_params(const std::function<nlos::ad::Var(const nlos::Bound&)>& f,
                               nlos::ModelParams p, const std::vector<std::string>& names,
                               double h = 1e-5) {
  using namespace nlos;
  std::map<std::string, Tensor> g_ad;
  {
    ad::Tape t;
    Bound b(t, p);
    ad::Var loss = f(b);
    t.backward(loss);
    g_ad = t.gradients();
  }
  auto eval = [&] {
    ad::Tape t;
    Bound b(t, p, true);
    return f(b).value()[0];
  };
  double worst = 0.0, scale = 1e-12;
  for (const auto& name : names) {
    Tensor& w = p.get(name);
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double x0 = w[k];
      w[k] = x0 + h;
      const double fp = eval();
      w[k] = x0 - h;
      const double fm = eval();
      w[k] = x0;
      const double fd = (fp - fm) / (2.0 * h);
      scale = std::max(scale, std::abs(fd));
      worst = std::max(worst, std::abs(fd - g_ad.at(name)[k]));
    }
  }
  return worst / scale;
}

/// Small single-scale operator used by the composed-block checks.
inline nlos::NanoConfig tiny_nano_config() {
  nlos::NanoConfig cfg;
  cfg.J = 1;
  cfg.n = {2};
  cfg.K = 2;
  cfg.Cu = 2;
  cfg.Cf = 2;
  cfg.Ch = 3;
  cfg.B_bw = 2;
  cfg.clamp = false;
  return cfg;
}

inline nlos::ScaleState tiny_state(nlos::ad::Tape& t, const std::vector<nlos::ad::Var>& x,
                                   double eta) {
  nlos::ScaleState s;
  s.j = 1;
  s.eta = eta;
  s.feat = {x[0], x[1]};
  s.u = {x[2], x[3]};
  s.ug = {t.constant(randn({1, 3, 2, 2}, 41)), t.constant(randn({1, 3, 2, 2}, 42))};
  return s;
}

/// Composed CCO block, G(F, eta) u, checked against inputs and weights.
inline double cco_block_gradcheck(std::uint64_t seed = 3) {
  using namespace nlos;
  const NanoConfig cfg = tiny_nano_config();
  ModelParams p;
  std::mt19937_64 rng(seed);
  init_nano(p, rng, cfg);
  const std::vector<Tensor> inputs{randn({2, 3, 2, 2}, seed + 1), randn({2, 3, 2, 2}, seed + 2),
                                   randn({2, 3, 2, 2}, seed + 3), randn({2, 3, 2, 2}, seed + 4)};
  double worst = gradcheck(
      [&](ad::Tape& t, const std::vector<ad::Var>& x) {
        Bound b(t, p, true);
        ScaleState s = tiny_state(t, x, 1.3);
        nn::CVar y = cco_apply(b, s, s.u, 0, cfg);
        return ad::stack2(y.re, y.im);
      },
      inputs);
  const std::string pre = layer_prefix(1, 0);
  worst = std::max(worst, gradcheck_params(
                              [&](const Bound& b) {
                                ad::Tape& t = b.tape();
                                std::vector<ad::Var> x;
                                for (const auto& v : inputs) x.push_back(t.constant(v));
                                ScaleState s = tiny_state(t, x, 1.3);
                                nn::CVar y = cco_apply(b, s, s.u, 0, cfg);
                                Tensor probe = randn(y.re.shape(), 77);
                                return ad::add(ad::sum(ad::mul(y.re, t.constant(probe))),
                                               ad::sum(ad::mul(y.im, t.constant(probe))));
                              },
                              p,
                              {pre + ".cco1.re.w", pre + ".cco1.im.w", pre + ".cco1.re.b",
                               pre + ".cco1.im.b", pre + ".cco2.re.w", pre + ".cco2.im.w",
                               pre + ".cco2.re.b", pre + ".cco2.im.b"}));
  // one full unrolled layer, including alpha and the step
  worst = std::max(worst, gradcheck_params(
                              [&](const Bound& b) {
                                ad::Tape& t = b.tape();
                                std::vector<ad::Var> x;
                                for (const auto& v : inputs) x.push_back(t.constant(v));
                                ScaleState s = tiny_state(t, x, 0.7);
                                NanoConfig one = cfg;
                                iterate_scale(b, s, one);
                                return ad::add(ad::sum(ad::square(s.u.re)), ad::sum(s.u.im));
                              },
                              p, {pre + ".alpha", pre + ".step", pre + ".cco2.re.w"}));
  return worst;
}

}  // namespace testing
