#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "nlos/nano.hpp"
#include "nlos/physics.hpp"

namespace nlos {

struct TrainingConfig {
  std::size_t epochs = 30;
  std::size_t batch = 1;
  std::size_t steps = 0;  // 0: epochs * training samples
  double lr = 1e-4;
  double decay = 1e-4;         // exponential lr schedule coefficient
  double weight_decay = 1e-4;
  double lambda = 1e-4;        // TV weight
  double beta = 1.0;           // noise-map weight of the estimator loss
  std::size_t nle_steps = 200;
  double nle_lr = 1e-3;
  std::size_t nle_samples = 50;
};

struct NoiseConfig {
  double eta_min = 0.0;
  double eta_max = 10.0;
  std::string kind = "gaussian";  // or "poisson"
  double exposure = 1.0;
  double dark = 0.0;
};

struct RunConfig {
  SceneGrid grid;
  NanoConfig model;
  TrainingConfig training;
  NoiseConfig noise;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Desk defaults, or the full 128 x 128 x 512 geometry for "paper".
RunConfig preset(const std::string& name);

std::string to_json(const RunConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

std::string nano_to_json(const NanoConfig& c);
NanoConfig nano_from_json(const std::string& text);
std::string grid_to_json(const SceneGrid& g);
SceneGrid grid_from_json(const std::string& text);

}  // namespace nlos
