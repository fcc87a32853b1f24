#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nlos/physics.hpp"

namespace nlos {

struct Sample {
  std::string id;
  Tensor u;    // (D, H, W) hidden albedo
  Tensor tau;  // (T, Th, Tw) clean transient
};

struct Dataset {
  SceneGrid grid;
  std::uint64_t seed = 0;
  std::vector<Sample> train, test;
};

/// Random scene of one to three primitives (box shells, sphere caps facing
/// the wall, planar letters), albedo in [0.4, 1], kept off the first and last depth slices.
Tensor generate_scene(const SceneGrid& g, std::uint64_t seed);

/// Mixes a base seed with a stream index.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Renders scenes with the confocal oracle; ids "train_0000", "test_0000".
Dataset synth_dataset(const SceneGrid& g, std::size_t n_train, std::size_t n_test,
                      std::uint64_t seed);

/// One container per sample (entries "u", "tau") plus manifest.json.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// Transient from a container: "tau" stored as f32 or f64.
Tensor load_transient(const std::filesystem::path& path);

}  // namespace nlos
