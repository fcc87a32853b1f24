#pragma once

#include <random>
#include <vector>

#include "nlos/autodiff.hpp"
#include "nlos/params.hpp"
#include "nlos/tensor.hpp"

namespace nlos {

/// Global-local spatiotemporal features. With base width C the feature
/// volumes have 4C channels over (T, Th/2, Tw/2). Parameters live under
/// "stfe.".
struct StfeConfig {
  std::size_t C = 2;
  double slope = 0.25;
};

void init_stfe(ModelParams& p, std::mt19937_64& rng, const StfeConfig& cfg = {});

/// Patch layout: centers (i, j) with 0 <= i <= gh-2, 0 <= j <= gw-2 on the
/// downsampled grid, neighbors (k, l) in {-1, 0, 1}^2 outside the grid read as
/// zero. Output (9 C, T', N_p, 1) with channel (3(k+1) + (l+1)) * C + c and
/// patch index i * (gw-1) + j.
struct PatchSet {
  Tensor data;
  std::size_t gh = 0, gw = 0;
  std::size_t count() const { return (gh - 1) * (gw - 1); }
};

PatchSet extract_patches(const Tensor& down);
ad::Var extract_patches(ad::Var down);
/// Inverse placement (C, T, N_p, 1) -> (C, T, gh, gw); the last row and column
/// reuse the nearest patch.
ad::Var remap_patches(ad::Var per_patch, std::size_t gh, std::size_t gw);

/// tau (T, Th, Tw) -> (4C, T, Th/2, Tw/2).
ad::Var extract_global(const Bound& b, ad::Var tau, const StfeConfig& cfg = {});
/// tau -> temporally and spatially downsampled (4C, T/4, Th/2, Tw/2).
ad::Var downsample(const Bound& b, ad::Var tau, const StfeConfig& cfg = {});
/// Patches -> (4C, T, Th/2, Tw/2).
ad::Var extract_local(const Bound& b, ad::Var patches, std::size_t T, std::size_t gh,
                      std::size_t gw, const StfeConfig& cfg = {});
ad::Var fuse(const Bound& b, ad::Var local, ad::Var global, const StfeConfig& cfg = {});

/// Full STFE: F_st = fuse(F_l, F_g).
ad::Var stfe_forward(const Bound& b, ad::Var tau, const StfeConfig& cfg = {});

}  // namespace nlos
