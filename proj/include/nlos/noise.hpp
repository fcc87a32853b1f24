#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "nlos/autodiff.hpp"
#include "nlos/optimizer.hpp"
#include "nlos/params.hpp"
#include "nlos/tensor.hpp"

namespace nlos {

/// tau + eta * xi with xi standard normal.
Tensor add_gaussian(const Tensor& tau, double eta, std::uint64_t seed);

/// Poisson(scale * tau + dark) / scale.
Tensor add_poisson(const Tensor& tau, double exposure_scale, double dark_rate, std::uint64_t seed);

/// H * (1 + eta * gamma * zeta) with zeta complex standard normal per bin
/// (E|zeta|^2 = 1). eta == 0 returns H unchanged.
ComplexVolume degrade_kernel(const ComplexVolume& h, double eta, std::uint64_t seed,
                             double gamma = 0.01);

struct NoiseEstimate {
  double eta = 0.0;
  Tensor dist_map;
};

/// Noise-level estimator: two-level 3D encoder-decoder (width 8, PReLU) with
/// a per-voxel map head and a pooled scalar head. Parameters live under
/// "nle.".
struct NleConfig {
  std::size_t width = 8;
  double slope = 0.25;
};

void init_nle(ModelParams& p, std::mt19937_64& rng, const NleConfig& cfg = {});

struct NleOutput {
  ad::Var eta_raw;  // (1), before clamping
  ad::Var map;      // tau's shape
};

NleOutput nle_forward(const Bound& b, ad::Var tau, const NleConfig& cfg = {});

/// Frozen evaluation; eta clamped at zero.
NoiseEstimate estimate_noise(const Tensor& tau, const ModelParams& p, const NleConfig& cfg = {});

struct NleSample {
  Tensor noisy;
  double eta = 0.0;
  Tensor noise;  // realized additive field, noisy - clean
};

/// |eta_raw - eta| + beta * mean |D_n - noise|.
ad::Var nle_loss(const Bound& b, const NleSample& s, double beta, const NleConfig& cfg = {});

/// Noisy copies of clean transients with eta ~ U[0, eta_max].
std::vector<NleSample> make_nle_samples(const std::vector<Tensor>& clean, std::size_t count,
                                        double eta_max, std::uint64_t seed);

struct NleTrainConfig {
  std::size_t steps = 200;
  double beta = 1.0;
  AdamWConfig adam{1e-3, 0.9, 0.999, 1e-8, 1e-4, 1e-4};
};

struct NleTrainReport {
  std::vector<double> step_loss;
  double initial_loss = 0.0;  // mean over the set before training
  double final_loss = 0.0;    // mean over the set after training
};

/// Cycles through `samples` in order; all "nle." parameters are marked frozen
/// on return.
NleTrainReport train_nle(ModelParams& p, const std::vector<NleSample>& samples,
                         const NleTrainConfig& cfg, const NleConfig& net = {});

double nle_set_loss(const ModelParams& p, const std::vector<NleSample>& samples, double beta,
                    const NleConfig& net = {});

}  // namespace nlos
