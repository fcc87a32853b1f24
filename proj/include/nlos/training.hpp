#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "nlos/config.hpp"
#include "nlos/dataset.hpp"
#include "nlos/metrics.hpp"
#include "nlos/nano.hpp"
#include "nlos/optimizer.hpp"
#include "nlos/params.hpp"

namespace nlos {

/// Noise level and realization seed for training step `step`.
struct NoiseDraw {
  double eta = 0.0;
  std::uint64_t seed = 0;
};
NoiseDraw draw_noise(const NoiseConfig& n, std::uint64_t seed, std::uint64_t step);

/// Gaussian: tau + eta xi. Poisson: shot noise at the configured exposure
/// followed by Gaussian read noise of level eta.
Tensor apply_noise(const Tensor& tau, const NoiseConfig& n, double eta, std::uint64_t seed);

/// Model parameters plus optional optimizer state, with the architecture and
/// grid they were built for.
struct Checkpoint {
  NanoConfig model;
  SceneGrid grid;
  ModelParams params;
  OptimState opt;
  bool has_opt = false;
};

/// Writes `path` (container: parameters and "adam.m/<name>", "adam.v/<name>"),
/// `path`.arch.json and `path`.optim.json.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
/// Rebuilds the parameter set from the architecture descriptor and checks every
/// stored tensor against it.
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint fresh_checkpoint(const NanoConfig& model, const SceneGrid& grid);

/// L_total of one noisy measurement against the ground-truth albedo image.
double sample_loss(const ModelParams& p, const Tensor& tau_noisy, const Tensor& u_gt,
                   const LightTransport& lt, const NanoConfig& cfg, double lambda);

struct StepLog {
  long step = 0;
  double loss = 0.0;
  double eta = 0.0;
  double lr = 0.0;
};

struct TrainOptions {
  long total_steps = 0;  // absolute step count to reach
  std::filesystem::path checkpoint;  // saved every `checkpoint_every` steps and at the end
  long checkpoint_every = 0;
  std::function<void(const StepLog&)> on_step;
};

/// End-to-end training from ck.opt.step to opts.total_steps. Step s uses
/// sample s mod n and a noise draw seeded by (seed, s), so resuming from a
/// saved checkpoint continues bit for bit. The noise estimator stays frozen.
std::vector<StepLog> train_nano(Checkpoint& ck, const std::vector<Sample>& samples,
                                const LightTransport& lt, const RunConfig& cfg,
                                const TrainOptions& opts);

/// Mean loss over `samples`, each with a fixed noise draw derived from `seed`.
double evaluation_loss(const ModelParams& p, const std::vector<Sample>& samples,
                       const LightTransport& lt, const RunConfig& cfg, std::uint64_t seed);

enum class Method { Nano, Wiener, FixedPoint, Truth };
Method parse_method(const std::string& s);
std::string method_name(Method m);

struct MethodOutput {
  Tensor u;
  Tensor albedo;
  Tensor depth;
  NanoDiagnostics diag;
  std::vector<double> residuals;
};

/// Runs one reconstruction method. Truth returns the ground truth `u_gt`.
MethodOutput run_method(Method m, const Tensor& tau, const LightTransport& lt,
                        const Checkpoint* ck, const Tensor* u_gt = nullptr,
                        std::size_t fixedpoint_steps = 50);

struct EvalRow {
  std::string id;
  double eta = 0.0;
  MetricSet m;
};

struct EvalTable {
  std::vector<EvalRow> rows;        // per sample and noise level
  std::vector<EvalRow> aggregates;  // one per noise level, id "mean"
};

/// Metrics against the projected ground truth at each noise level.
EvalTable evaluate(Method m, const std::vector<Sample>& samples, const LightTransport& lt,
                   const Checkpoint* ck, const std::vector<double>& etas, std::uint64_t seed,
                   const NoiseConfig& noise);

std::string eval_json(const EvalTable& t, const std::string& method);
std::string eval_text(const EvalTable& t);

}  // namespace nlos
