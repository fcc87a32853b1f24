#include "nlos/training.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "nlos/classic.hpp"
#include "nlos/container.hpp"
#include "nlos/error.hpp"
#include "nlos/noise.hpp"

namespace nlos {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path sidecar(const fs::path& p, const char* suffix) {
  fs::path s = p;
  s += suffix;
  return s;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write " + p.string());
  f << text;
  if (!f) throw IoError("write failed for " + p.string());
}

std::string read_text(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot read " + p.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json parse(const std::string& text, const fs::path& where) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParameterError("invalid JSON in " + where.string() + ": " + e.what());
  }
}

}  // namespace

NoiseDraw draw_noise(const NoiseConfig& n, std::uint64_t seed, std::uint64_t step) {
  std::mt19937_64 rng(mix_seed(seed, step));
  NoiseDraw d;
  d.eta = std::uniform_real_distribution<double>(n.eta_min, n.eta_max)(rng);
  if (n.eta_max == n.eta_min) d.eta = n.eta_min;
  d.seed = rng();
  return d;
}

Tensor apply_noise(const Tensor& tau, const NoiseConfig& n, double eta, std::uint64_t seed) {
  if (n.kind == "gaussian") return add_gaussian(tau, eta, seed);
  if (n.kind == "poisson") {
    Tensor shot = add_poisson(tau, n.exposure, n.dark, seed);
    return add_gaussian(shot, eta, mix_seed(seed, 1));
  }
  throw ParameterError("unknown noise kind '" + n.kind + "'");
}

Checkpoint fresh_checkpoint(const NanoConfig& model, const SceneGrid& grid) {
  model.validate();
  grid.validate();
  Checkpoint ck;
  ck.model = model;
  ck.grid = grid;
  init_model(ck.params, model);
  return ck;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ck) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  TensorContainer c;
  json params = json::object();
  for (const std::string& name : ck.params.names()) {
    c.put(name, ck.params.get(name));
    params[name] = {{"shape", ck.params.get(name).shape()},
                    {"trainable", ck.params.meta(name).trainable}};
  }
  if (ck.has_opt) {
    for (const auto& [name, t] : ck.opt.m) c.put("adam.m/" + name, t);
    for (const auto& [name, t] : ck.opt.v) c.put("adam.v/" + name, t);
  }
  c.save(path);

  json arch;
  arch["format"] = "nlos-checkpoint";
  arch["model"] = json::parse(nano_to_json(ck.model));
  arch["grid"] = json::parse(grid_to_json(ck.grid));
  arch["params"] = params;
  write_text(sidecar(path, ".arch.json"), arch.dump(2) + "\n");

  if (ck.has_opt) {
    const AdamWConfig& a = ck.opt.config;
    json o = {{"step", ck.opt.step},          {"lr", a.lr},
              {"beta1", a.beta1},             {"beta2", a.beta2},
              {"eps", a.eps},                 {"weight_decay", a.weight_decay},
              {"decay_gamma", a.decay_gamma}, {"current_lr", ck.opt.current_lr()}};
    write_text(sidecar(path, ".optim.json"), o.dump(2) + "\n");
  } else {
    std::error_code ec;
    fs::remove(sidecar(path, ".optim.json"), ec);
  }
}

Checkpoint load_checkpoint(const fs::path& path) {
  const fs::path ap = sidecar(path, ".arch.json");
  const json arch = parse(read_text(ap), ap);
  if (arch.value("format", std::string()) != "nlos-checkpoint")
    throw ParameterError(ap.string() + " is not a checkpoint architecture descriptor");
  Checkpoint ck;
  ck.model = nano_from_json(arch.at("model").dump());
  ck.grid = grid_from_json(arch.at("grid").dump());
  ck.model.validate();
  init_model(ck.params, ck.model);

  const TensorContainer c = TensorContainer::load(path);
  const json& listed = arch.at("params");
  for (const std::string& name : ck.params.names()) {
    if (!c.contains(name))
      throw ParameterError("checkpoint " + path.string() + " lacks parameter '" + name +
                           "' required by its architecture");
    const Tensor& stored = c.get(name);
    if (stored.shape() != ck.params.get(name).shape())
      throw ShapeError("checkpoint parameter '" + name + "' has shape " +
                       shape_str(stored.shape()) + ", architecture expects " +
                       shape_str(ck.params.get(name).shape()));
    ck.params.assign(name, stored);
    if (listed.contains(name)) ck.params.set_trainable(name, listed.at(name).at("trainable").get<bool>());
  }
  for (const auto& [name, e] : c.entries) {
    if (name.rfind("adam.", 0) == 0) continue;
    if (!ck.params.contains(name))
      throw ParameterError("checkpoint parameter '" + name + "' does not belong to the architecture");
  }

  const fs::path op = sidecar(path, ".optim.json");
  if (fs::exists(op)) {
    const json o = parse(read_text(op), op);
    ck.has_opt = true;
    ck.opt.step = o.at("step").get<long>();
    AdamWConfig& a = ck.opt.config;
    a.lr = o.at("lr").get<double>();
    a.beta1 = o.at("beta1").get<double>();
    a.beta2 = o.at("beta2").get<double>();
    a.eps = o.at("eps").get<double>();
    a.weight_decay = o.at("weight_decay").get<double>();
    a.decay_gamma = o.at("decay_gamma").get<double>();
    for (const auto& [name, e] : c.entries) {
      if (name.rfind("adam.m/", 0) == 0) ck.opt.m[name.substr(7)] = e.value;
      if (name.rfind("adam.v/", 0) == 0) ck.opt.v[name.substr(7)] = e.value;
    }
  }
  return ck;
}

namespace {

ad::Var forward_loss(const Bound& b, const Tensor& tau, const Tensor& u_gt, const LightTransport& lt,
                     const NanoConfig& cfg, double lambda) {
  NanoOutput o = nano_forward(b, tau, lt, cfg);
  return loss_total(o.albedo, project(u_gt).albedo, o.u, lambda);
}

}  // namespace

double sample_loss(const ModelParams& p, const Tensor& tau_noisy, const Tensor& u_gt,
                   const LightTransport& lt, const NanoConfig& cfg, double lambda) {
  ad::Tape t;
  Bound b(t, p, true);
  return forward_loss(b, tau_noisy, u_gt, lt, cfg, lambda).value()[0];
}

std::vector<StepLog> train_nano(Checkpoint& ck, const std::vector<Sample>& samples,
                                const LightTransport& lt, const RunConfig& cfg,
                                const TrainOptions& opts) {
  if (samples.empty()) throw ParameterError("empty training set");
  for (const Sample& s : samples)
    if (s.u.empty()) throw ParameterError("training sample " + s.id + " has no ground truth volume");
  if (!ck.has_opt) {
    ck.opt = OptimState{};
    ck.opt.config = AdamWConfig{cfg.training.lr, 0.9, 0.999, 1e-8, cfg.training.weight_decay,
                                cfg.training.decay};
    ck.has_opt = true;
  }
  ck.params.set_trainable("nle.", false);

  std::string last_good = "none";
  std::vector<StepLog> log;
  while (ck.opt.step < opts.total_steps) {
    const long s = ck.opt.step;
    const Sample& smp = samples[static_cast<std::size_t>(s) % samples.size()];
    const NoiseDraw nd = draw_noise(cfg.noise, cfg.seed, static_cast<std::uint64_t>(s));
    const Tensor tau = apply_noise(smp.tau, cfg.noise, nd.eta, nd.seed);

    ad::Tape tape;
    Bound b(tape, ck.params);
    ad::Var loss = forward_loss(b, tau, smp.u, lt, ck.model, cfg.training.lambda);
    const double lv = loss.value()[0];
    if (!std::isfinite(lv))
      throw NumericalError("training loss is not finite at step " + std::to_string(s) +
                           "; last good checkpoint: " + last_good);
    StepLog entry{s, lv, nd.eta, ck.opt.current_lr()};
    tape.backward(loss);
    optimizer_step(ck.params, tape.gradients(), ck.opt);
    log.push_back(entry);
    if (opts.on_step) opts.on_step(entry);

    const bool periodic = opts.checkpoint_every > 0 && ck.opt.step % opts.checkpoint_every == 0;
    if (!opts.checkpoint.empty() && (periodic || ck.opt.step == opts.total_steps)) {
      save_checkpoint(opts.checkpoint, ck);
      last_good = opts.checkpoint.string() + " (step " + std::to_string(ck.opt.step) + ")";
    }
  }
  return log;
}

double evaluation_loss(const ModelParams& p, const std::vector<Sample>& samples,
                       const LightTransport& lt, const RunConfig& cfg, std::uint64_t seed) {
  if (samples.empty()) throw ParameterError("empty evaluation set");
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const NoiseDraw nd = draw_noise(cfg.noise, seed, i);
    const Tensor tau = apply_noise(samples[i].tau, cfg.noise, nd.eta, nd.seed);
    total += sample_loss(p, tau, samples[i].u, lt, cfg.model, cfg.training.lambda);
  }
  return total / static_cast<double>(samples.size());
}

Method parse_method(const std::string& s) {
  if (s == "nano") return Method::Nano;
  if (s == "wiener") return Method::Wiener;
  if (s == "fixedpoint") return Method::FixedPoint;
  if (s == "truth") return Method::Truth;
  throw ParameterError("unknown method '" + s + "' (expected nano, wiener or fixedpoint)");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Nano: return "nano";
    case Method::Wiener: return "wiener";
    case Method::FixedPoint: return "fixedpoint";
    case Method::Truth: return "truth";
  }
  return "?";
}

MethodOutput run_method(Method m, const Tensor& tau, const LightTransport& lt, const Checkpoint* ck,
                        const Tensor* u_gt, std::size_t fixedpoint_steps) {
  const double alpha_rel = ck ? ck->model.wiener_alpha_rel : 0.1;
  MethodOutput out;
  switch (m) {
    case Method::Nano: {
      if (!ck) throw ParameterError("method nano needs a checkpoint");
      if (ck->grid.transient_shape() != lt.grid().transient_shape() ||
          ck->grid.volume_shape() != lt.grid().volume_shape())
        throw ParameterError("checkpoint grid " + shape_str(ck->grid.transient_shape()) +
                             " does not match the measurement grid " +
                             shape_str(lt.grid().transient_shape()));
      Reconstruction r = reconstruct(tau, ck->params, lt, ck->model);
      out.u = std::move(r.u);
      out.albedo = std::move(r.albedo);
      out.diag = std::move(r.diag);
      for (const LayerReport& l : out.diag.layers) out.residuals.push_back(l.residual);
      out.depth = project(out.u).depth;
      return out;
    }
    case Method::Wiener: out.u = wiener_reconstruct(tau, lt, alpha_rel); break;
    case Method::FixedPoint: {
      SolveReport rep;
      out.u = fixedpoint_reconstruct(tau, lt, fixedpoint_steps, alpha_rel, &rep);
      out.residuals = rep.residuals;
      break;
    }
    case Method::Truth:
      if (!u_gt || u_gt->empty()) throw ParameterError("method truth needs the ground truth volume");
      out.u = *u_gt;
      break;
  }
  Projection pr = project(out.u);
  out.albedo = std::move(pr.albedo);
  out.depth = std::move(pr.depth);
  return out;
}

EvalTable evaluate(Method m, const std::vector<Sample>& samples, const LightTransport& lt,
                   const Checkpoint* ck, const std::vector<double>& etas, std::uint64_t seed,
                   const NoiseConfig& noise) {
  if (samples.empty()) throw ParameterError("empty dataset");
  if (etas.empty()) throw ParameterError("no noise levels to evaluate");
  const std::size_t D = lt.grid().D;
  EvalTable t;
  for (const Sample& s : samples)
    if (s.u.empty()) throw ParameterError("sample " + s.id + " has no ground truth volume");
  t.rows.resize(samples.size() * etas.size());
  std::vector<std::exception_ptr> failures(t.rows.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t idx = 0; idx < t.rows.size(); ++idx) {
    try {
      const std::size_t e = idx / samples.size(), i = idx % samples.size();
      const Sample& s = samples[i];
      const Tensor tau =
          apply_noise(s.tau, noise, etas[e], mix_seed(seed, e * samples.size() + i));
      const MethodOutput out = run_method(m, tau, lt, ck, &s.u);
      const Projection gt = project(s.u);
      t.rows[idx] = {s.id, etas[e], metrics(out.albedo, gt.albedo, out.depth, gt.depth, D)};
    } catch (...) {
      failures[idx] = std::current_exception();
    }
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  for (std::size_t e = 0; e < etas.size(); ++e) {
    EvalRow agg{"mean", etas[e], {}};
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const MetricSet& r = t.rows[e * samples.size() + i].m;
      agg.m.psnr += r.psnr;
      agg.m.ssim += r.ssim;
      agg.m.depth_rmse += r.depth_rmse;
      agg.m.depth_mad += r.depth_mad;
    }
    const double n = static_cast<double>(samples.size());
    agg.m.psnr /= n;
    agg.m.ssim /= n;
    agg.m.depth_rmse /= n;
    agg.m.depth_mad /= n;
    t.aggregates.push_back(agg);
  }
  return t;
}

std::string eval_json(const EvalTable& t, const std::string& method) {
  auto row = [](const EvalRow& r) {
    return json{{"id", r.id},
                {"eta", r.eta},
                {"psnr", r.m.psnr},
                {"ssim", r.m.ssim},
                {"rmse", r.m.depth_rmse},
                {"mad", r.m.depth_mad}};
  };
  json j;
  j["method"] = method;
  j["samples"] = json::array();
  for (const EvalRow& r : t.rows) j["samples"].push_back(row(r));
  j["aggregate"] = json::array();
  for (const EvalRow& r : t.aggregates) j["aggregate"].push_back(row(r));
  return j.dump(2);
}

std::string eval_text(const EvalTable& t) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %6s %9s %7s %7s %7s\n", "sample", "eta", "PSNR", "SSIM",
                "RMSE", "MAD");
  out += line;
  auto emit = [&](const EvalRow& r) {
    std::snprintf(line, sizeof line, "%-12s %6.2f %9.3f %7.4f %7.4f %7.4f\n", r.id.c_str(), r.eta,
                  r.m.psnr, r.m.ssim, r.m.depth_rmse, r.m.depth_mad);
    out += line;
  };
  for (const EvalRow& r : t.rows) emit(r);
  for (const EvalRow& r : t.aggregates) emit(r);
  return out;
}

}  // namespace nlos
