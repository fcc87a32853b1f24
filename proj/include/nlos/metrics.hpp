#pragma once

#include <random>

#include "nlos/autodiff.hpp"
#include "nlos/params.hpp"
#include "nlos/tensor.hpp"

namespace nlos {

struct Projection {
  Tensor albedo;  // (H, W), max over depth
  Tensor depth;   // (H, W), first argmax index
};

Projection project(const Tensor& u);

/// Residual 2D head I = A + c2(prelu(c1(A))) with 3x3 kernels, parameters
/// under "enh.".
void init_enhance(ModelParams& p, std::mt19937_64& rng, std::size_t width = 8);
/// Albedo as (H, W).
ad::Var enhance2d(const Bound& b, ad::Var albedo, double slope = 0.25);
Tensor enhance2d(const Tensor& albedo, const ModelParams& p);

/// Anisotropic TV: sum of absolute forward differences along each axis.
double tv3(const Tensor& u);
ad::Var tv3(ad::Var u);

/// ||I - I_gt||_1 + lambda * TV(u).
double loss_total(const Tensor& I, const Tensor& I_gt, const Tensor& u, double lambda);
ad::Var loss_total(ad::Var I, const Tensor& I_gt, ad::Var u, double lambda);

constexpr double kPsnrCap = 100.0;

/// 10 log10(peak^2 / mse), capped.
double psnr_from_mse(double mse, double peak = 1.0);
/// Images divided by their own maximum and clipped to [0, 1].
Tensor normalize_image(const Tensor& img);
/// PSNR of the normalized images.
double psnr(const Tensor& img, const Tensor& ref);
/// Mean SSIM over the valid region of an 11x11 Gaussian window (sigma 1.5)
/// with C1 = (0.01 L)^2, C2 = (0.03 L)^2. Inputs are used as given.
double ssim(const Tensor& a, const Tensor& b, double L = 1.0);

struct MetricSet {
  double psnr = 0.0;
  double ssim = 0.0;
  double depth_rmse = 0.0;
  double depth_mad = 0.0;
};

/// Intensity metrics on normalized images; depth errors in units of the
/// depth extent (index / (D - 1)) over pixels where the reference albedo
/// exceeds 0.05 of its maximum.
MetricSet metrics(const Tensor& I, const Tensor& I_gt, const Tensor& depth, const Tensor& depth_gt,
                  std::size_t D);

}  // namespace nlos
