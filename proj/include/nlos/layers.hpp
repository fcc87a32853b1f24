#pragma once

#include <random>
#include <string>

#include "nlos/autodiff.hpp"
#include "nlos/params.hpp"

/// Differentiable building blocks over named parameters. A real conv layer
/// `name` owns `name.w` (and `name.b`); a complex one owns `name.re.w`,
/// `name.im.w` (and `name.re.b`, `name.im.b`).
namespace nlos::nn {

struct LayerSpec {
  std::size_t out = 1, in = 1;
  Index3 k{3, 3, 3};
  bool bias = true;
  bool transpose = false;
};

void add_conv(ModelParams& p, std::mt19937_64& rng, const std::string& name, const LayerSpec& s,
              ParamMeta meta = {});
ad::Var conv(const Bound& b, const std::string& name, ad::Var x, Index3 stride = {1, 1, 1});
ad::Var conv_t(const Bound& b, const std::string& name, ad::Var x, Index3 stride,
               Index3 out_extent);

/// Complex activation tensor as its real and imaginary planes, each (C, d0, d1, d2).
struct CVar {
  ad::Var re, im;
};

void add_cconv(ModelParams& p, std::mt19937_64& rng, const std::string& name, const LayerSpec& s,
               ParamMeta meta = {});
/// (M*x - N*y) + i(M*y + N*x) plus complex bias.
CVar cconv(const Bound& b, const std::string& name, CVar h, Index3 stride = {1, 1, 1});
CVar cconv_t(const Bound& b, const std::string& name, CVar h, Index3 stride, Index3 out_extent);

CVar cadd(CVar a, CVar b);
CVar csub(CVar a, CVar b);
CVar cscale(CVar a, double s);
CVar cprelu(CVar h, double slope);
CVar cconcat(const std::vector<CVar>& parts);
CVar cfft(CVar h);
CVar cifft(CVar h);
/// Elementwise product with a real field of identical shape.
CVar cmul_real(CVar h, ad::Var r);
/// Re^2 + Im^2.
ad::Var cabs2(CVar h);

}  // namespace nlos::nn
