#include "nlos/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "nlos/error.hpp"

namespace nlos {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw ParameterError(std::string("unknown key '") + it.key() + "' in " + where);
  }
}

json grid_json(const SceneGrid& g) {
  return {{"T", g.T},   {"Th", g.Th}, {"Tw", g.Tw},       {"D", g.D},
          {"H", g.H},   {"W", g.W},   {"dt", g.dt},       {"ds", g.ds},
          {"dz", g.dz}, {"z_min", g.z_min}, {"c", g.c}, {"gain", g.gain}};
}

SceneGrid grid_parse(const json& j) {
  reject_unknown(j, {"T", "Th", "Tw", "D", "H", "W", "dt", "ds", "dz", "z_min", "c", "gain"}, "grid");
  SceneGrid g;
  read(j, "T", g.T);
  read(j, "Th", g.Th);
  read(j, "Tw", g.Tw);
  read(j, "D", g.D);
  read(j, "H", g.H);
  read(j, "W", g.W);
  read(j, "dt", g.dt);
  read(j, "ds", g.ds);
  read(j, "dz", g.dz);
  read(j, "z_min", g.z_min);
  read(j, "c", g.c);
  read(j, "gain", g.gain);
  return g;
}

json nano_json(const NanoConfig& m) {
  return {{"J", m.J},
          {"n", m.n},
          {"K", m.K},
          {"Cu", m.Cu},
          {"Cf", m.Cf},
          {"Ch", m.Ch},
          {"B_bw", m.B_bw},
          {"sfe_normalize", m.sfe_normalize},
          {"sfe_trainable", m.sfe_trainable},
          {"alpha_min", m.alpha_min},
          {"h_max2", m.h_max2},
          {"step_init", m.step_init},
          {"slope", m.slope},
          {"clamp", m.clamp},
          {"B_target", m.B_target},
          {"power_iters", m.power_iters},
          {"wiener_alpha_rel", m.wiener_alpha_rel},
          {"feature_scale", m.feature_scale},
          {"proj_average_init", m.proj_average_init},
          {"seed", m.seed},
          {"stfe_C", m.stfe.C},
          {"nle_width", m.nle.width}};
}

NanoConfig nano_parse(const json& j) {
  reject_unknown(j,
                 {"J", "n", "K", "Cu", "Cf", "Ch", "B_bw", "sfe_normalize", "sfe_trainable",
                  "alpha_min", "h_max2", "step_init", "slope", "clamp", "B_target", "power_iters",
                  "wiener_alpha_rel", "feature_scale", "proj_average_init", "seed", "stfe_C",
                  "nle_width"},
                 "model");
  NanoConfig m;
  read(j, "J", m.J);
  if (j.contains("J") && !j.contains("n")) m.n.assign(m.J, 2);
  read(j, "n", m.n);
  if (!j.contains("K")) {
    m.K = 0;
    for (auto v : m.n) m.K += v;
  }
  read(j, "K", m.K);
  read(j, "Cu", m.Cu);
  read(j, "Cf", m.Cf);
  read(j, "Ch", m.Ch);
  read(j, "B_bw", m.B_bw);
  read(j, "sfe_normalize", m.sfe_normalize);
  read(j, "sfe_trainable", m.sfe_trainable);
  read(j, "alpha_min", m.alpha_min);
  read(j, "h_max2", m.h_max2);
  read(j, "step_init", m.step_init);
  read(j, "slope", m.slope);
  read(j, "clamp", m.clamp);
  read(j, "B_target", m.B_target);
  read(j, "power_iters", m.power_iters);
  read(j, "wiener_alpha_rel", m.wiener_alpha_rel);
  read(j, "feature_scale", m.feature_scale);
  read(j, "proj_average_init", m.proj_average_init);
  read(j, "seed", m.seed);
  read(j, "stfe_C", m.stfe.C);
  read(j, "nle_width", m.nle.width);
  return m;
}

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  grid.validate();
  model.validate();
  if (training.epochs < 1) throw ParameterError("epochs must be at least 1");
  if (training.batch != 1) throw ParameterError("only batch size 1 is supported");
  if (!(training.lr > 0.0)) throw ParameterError("learning rate must be positive");
  if (!(training.lambda >= 0.0)) throw ParameterError("TV weight must be nonnegative");
  if (!(noise.eta_min >= 0.0 && noise.eta_max >= noise.eta_min))
    throw ParameterError("noise range must satisfy 0 <= eta_min <= eta_max");
  if (noise.kind != "gaussian" && noise.kind != "poisson")
    throw ParameterError("noise kind must be gaussian or poisson");
}

RunConfig preset(const std::string& name) {
  RunConfig c;
  if (name == "desk" || name.empty()) return c;
  if (name == "paper") {
    c.grid.T = 512;
    c.grid.Th = c.grid.Tw = 128;
    c.grid.D = 128;
    c.grid.H = c.grid.W = 128;
    c.grid.ds = 0.002;
    c.grid.dz = 0.015;
    c.grid.z_min = 0.1;
    return c;
  }
  throw ParameterError("unknown preset '" + name + "' (expected desk or paper)");
}

std::string to_json(const RunConfig& c) {
  json j;
  j["grid"] = grid_json(c.grid);
  j["model"] = nano_json(c.model);
  const TrainingConfig& t = c.training;
  j["training"] = {{"epochs", t.epochs},       {"batch", t.batch},
                   {"steps", t.steps},         {"lr", t.lr},
                   {"decay", t.decay},         {"weight_decay", t.weight_decay},
                   {"lambda", t.lambda},       {"beta", t.beta},
                   {"nle_steps", t.nle_steps}, {"nle_lr", t.nle_lr},
                   {"nle_samples", t.nle_samples}};
  j["noise"] = {{"eta_min", c.noise.eta_min},
                {"eta_max", c.noise.eta_max},
                {"kind", c.noise.kind},
                {"exposure", c.noise.exposure},
                {"dark", c.noise.dark}};
  j["seed"] = c.seed;
  return j.dump(2);
}

RunConfig config_from_json(const std::string& text) {
  const json j = parse_text(text);
  reject_unknown(j, {"preset", "grid", "model", "training", "noise", "seed"}, "config");
  RunConfig c = preset(j.value("preset", std::string("desk")));
  try {
    if (j.contains("grid")) {
      json g = grid_json(c.grid);
      g.update(j.at("grid"));
      c.grid = grid_parse(g);
    }
    if (j.contains("model")) c.model = nano_parse(j.at("model"));
    if (j.contains("training")) {
      const json& t = j.at("training");
      reject_unknown(t,
                     {"epochs", "batch", "steps", "lr", "decay", "weight_decay", "lambda", "beta",
                      "nle_steps", "nle_lr", "nle_samples"},
                     "training");
      read(t, "epochs", c.training.epochs);
      read(t, "batch", c.training.batch);
      read(t, "steps", c.training.steps);
      read(t, "lr", c.training.lr);
      read(t, "decay", c.training.decay);
      read(t, "weight_decay", c.training.weight_decay);
      read(t, "lambda", c.training.lambda);
      read(t, "beta", c.training.beta);
      read(t, "nle_steps", c.training.nle_steps);
      read(t, "nle_lr", c.training.nle_lr);
      read(t, "nle_samples", c.training.nle_samples);
    }
    if (j.contains("noise")) {
      const json& n = j.at("noise");
      reject_unknown(n, {"eta_min", "eta_max", "kind", "exposure", "dark"}, "noise");
      read(n, "eta_min", c.noise.eta_min);
      read(n, "eta_max", c.noise.eta_max);
      read(n, "kind", c.noise.kind);
      read(n, "exposure", c.noise.exposure);
      read(n, "dark", c.noise.dark);
    }
    read(j, "seed", c.seed);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return config_from_json(ss.str());
}

std::string nano_to_json(const NanoConfig& c) { return nano_json(c).dump(2); }

NanoConfig nano_from_json(const std::string& text) {
  try {
    return nano_parse(parse_text(text));
  } catch (const json::exception& e) {
    throw ParameterError(std::string("bad architecture descriptor: ") + e.what());
  }
}

std::string grid_to_json(const SceneGrid& g) { return grid_json(g).dump(2); }

SceneGrid grid_from_json(const std::string& text) {
  try {
    return grid_parse(parse_text(text));
  } catch (const json::exception& e) {
    throw ParameterError(std::string("bad grid description: ") + e.what());
  }
}

}  // namespace nlos
