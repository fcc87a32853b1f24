#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nlos/layers.hpp"
#include "nlos/noise.hpp"
#include "nlos/physics.hpp"
#include "nlos/stfe.hpp"

namespace nlos {

/// Noise-adapted neural operator. Works on the frequency grid of the
/// resampled volume (N_v, Th, Tw) with N_v == T.
///
/// Each unrolled layer k at scale j computes
///   g  = cco2(prelu_C(cco1([F_j, eta])))          (C_u complex channels)
///   G  = |g|^2 h / (h + |g|^2)                     (h = h_max2)
///   S  = G + alpha_k,  alpha_k = alpha_min + softplus(a_k)
///   u <- u + dt_k (u_g - S u)
/// so the layer Jacobian is the real diagonal I - dt_k S with
/// alpha_min <= S <= alpha_k + h_max2.
struct NanoConfig {
  std::size_t J = 5;
  std::vector<std::size_t> n{2, 2, 2, 2, 2};
  std::size_t K = 10;
  std::size_t Cu = 4;  // iterate channels
  std::size_t Cf = 4;  // lifted feature channels
  std::size_t Ch = 8;  // CCO hidden width
  std::size_t B_bw = 4;
  bool sfe_normalize = false;  // divide the encoding sum by B_bw
  bool sfe_trainable = false;
  double alpha_min = 0.5;
  double h_max2 = 25.0;
  double step_init = 0.05;
  double slope = 0.25;
  bool clamp = true;
  double B_target = 0.99;
  int power_iters = 100;
  double wiener_alpha_rel = 0.1;
  double feature_scale = 0.02;  // tau is multiplied by this before feature extraction
  bool proj_average_init = true;
  std::uint64_t seed = 1;
  StfeConfig stfe;
  NleConfig nle;

  void validate() const;
};

/// Parameter names of layer k (global index) at scale j (1-based).
std::string layer_prefix(std::size_t j, std::size_t k);

/// Registers NANO parameters ("nano."), plus STFE, NLE and the 2D head.
void init_model(ModelParams& p, const NanoConfig& cfg);
void init_nano(ModelParams& p, std::mt19937_64& rng, const NanoConfig& cfg);

struct LayerReport {
  std::size_t scale = 0, layer = 0;
  double dt = 0.0;
  double clamp_factor = 1.0;
  double norm = 0.0;  // estimated ||I - dt S|| after clamping (0 when clamping is off)
  double residual = 0.0;
};

struct NanoDiagnostics {
  double eta = 0.0;
  std::vector<LayerReport> layers;
  std::vector<std::string> trace;
};

struct ScaleState {
  std::size_t j = 1;
  nn::CVar u;     // (Cu, ...)
  nn::CVar feat;  // (Cf, ...)
  nn::CVar ug;    // (1, ...)
  double eta = 0.0;
  std::size_t next_layer = 0;
  std::vector<Shape> pre_shapes;  // spatial shape before each restriction
  std::vector<nn::CVar> skips;
};

/// Test hooks for a layer: replace S by a fixed real field, u_g by a fixed
/// source, and dt by a constant.
struct LayerOverride {
  std::optional<Tensor> S;
  std::optional<ComplexVolume> source;
  std::optional<double> dt;
};

/// Lifts F_st (4C, N_v, Th/2, Tw/2) and starts from u^{1,0} = u_g.
ScaleState lift(const Bound& b, ad::Var f_st, double eta, const ComplexVolume& ug,
                const NanoConfig& cfg, NanoDiagnostics* diag = nullptr);
/// Same with u_g = Wiener(tau_f, H, alpha) on the iterate grid.
ScaleState lift(const Bound& b, ad::Var f_st, double eta, const ComplexVolume& tau_f,
                const ComplexVolume& h, double alpha, const NanoConfig& cfg);

/// The learned Gram part G of layer k, (Cu, ...).
ad::Var cco_gram(const Bound& b, const ScaleState& s, std::size_t k, const NanoConfig& cfg);
/// G u for layer k: the feature-derived operator applied channelwise.
nn::CVar cco_apply(const Bound& b, const ScaleState& s, nn::CVar u, std::size_t k,
                   const NanoConfig& cfg);

/// n_j update steps at the state's scale.
void iterate_scale(const Bound& b, ScaleState& s, const NanoConfig& cfg,
                   NanoDiagnostics* diag = nullptr, const LayerOverride* ov = nullptr);

void restrict_scale(const Bound& b, ScaleState& s, const NanoConfig& cfg,
                    NanoDiagnostics* diag = nullptr);
/// Transposed strided conv to `extent` plus the skip tensor.
nn::CVar prolong(const Bound& b, std::size_t j, nn::CVar coarse, nn::CVar skip, const Shape& extent);

nn::CVar sfe_encode(const Bound& b, nn::CVar u, const NanoConfig& cfg);

/// Projection conv, inverse FFT, real part, R_z^-1: (D, H, W).
ad::Var project_volume(const Bound& b, nn::CVar u, const LightTransport& lt);

struct NanoOutput {
  ad::Var u;       // (D, H, W)
  ad::Var albedo;  // enhanced (H, W)
};

/// Full forward on a tape: NLE (frozen), STFE, lift, iterate/restrict,
/// SFE, prolong chain, projection, 2D head.
NanoOutput nano_forward(const Bound& b, const Tensor& tau, const LightTransport& lt,
                        const NanoConfig& cfg, NanoDiagnostics* diag = nullptr);

struct Reconstruction {
  Tensor u;
  Tensor albedo;
  NanoDiagnostics diag;
};

Reconstruction reconstruct(const Tensor& tau, const ModelParams& p, const LightTransport& lt,
                           const NanoConfig& cfg);

}  // namespace nlos
