// nlos: dataset synthesis, training, reconstruction and evaluation.

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "nlos/classic.hpp"
#include "nlos/config.hpp"
#include "nlos/container.hpp"
#include "nlos/dataset.hpp"
#include "nlos/error.hpp"
#include "nlos/metrics.hpp"
#include "nlos/noise.hpp"
#include "nlos/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nlos;

namespace {

struct Global {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
};

RunConfig run_config(const Global& g) {
  RunConfig c = g.config.empty() ? preset(g.preset) : load_config(g.config);
  if (!g.config.empty() && !g.preset.empty())
    throw ParameterError("--config and --preset are mutually exclusive");
  if (g.seed) c.seed = *g.seed;
  c.validate();
  return c;
}

void write_pgm(const fs::path& path, const Tensor& img) {
  if (img.ndim() != 2) throw ShapeError("image export expects a rank-2 tensor");
  const Tensor n = normalize_image(img);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << "P5\n" << img.dim(1) << " " << img.dim(0) << "\n255\n";
  for (std::size_t i = 0; i < n.size(); ++i)
    f.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * n[i]))));
  if (!f) throw IoError("write failed for " + path.string());
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << text << "\n";
}

Tensor scalar(double v) { return Tensor({1}, {v}); }

SceneGrid grid_for(const RunConfig& c, const Tensor& tau) {
  if (tau.shape() != c.grid.transient_shape())
    throw ShapeError("measurement shape " + shape_str(tau.shape()) +
                     " does not match the configured grid " + shape_str(c.grid.transient_shape()));
  return c.grid;
}

std::vector<double> sweep_levels() { return {0.0, 2.0, 5.0, 10.0}; }

}  // namespace

int main(int argc, char** argv) {
  if (const char* t = std::getenv("NLOS_THREADS")) {
    const int n = std::atoi(t);
    if (n > 0) omp_set_num_threads(n);
  }

  CLI::App app{"Noise-adapted NLOS reconstruction"};
  app.require_subcommand(1);
  Global g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--preset", g.preset, "desk (default) or paper");
  auto* seed_opt = app.add_option("--seed", seed_value, "Seed for every random draw");
  app.add_flag("--deterministic", g.deterministic, "Single-threaded execution");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Render a synthetic dataset");
  std::string sim_out;
  std::size_t n_train = 20, n_test = 5;
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim->add_option("--n-train", n_train);
  sim->add_option("--n-test", n_test);

  // add-noise
  auto* noise = app.add_subcommand("add-noise", "Corrupt a transient");
  std::string nz_in, nz_out, nz_kind;
  double nz_eta = 5.0;
  noise->add_option("--in", nz_in)->required()->check(CLI::ExistingFile);
  noise->add_option("--out", nz_out)->required();
  noise->add_option("--eta", nz_eta, "Noise level")->check(CLI::NonNegativeNumber);
  noise->add_option("--kind", nz_kind, "gaussian or poisson");

  // train-nle
  auto* tnle = app.add_subcommand("train-nle", "Pretrain the noise-level estimator");
  std::string tn_data, tn_out;
  std::optional<std::size_t> tn_steps, tn_samples;
  tnle->add_option("--data", tn_data)->required();
  tnle->add_option("--out", tn_out, "Checkpoint path")->required();
  tnle->add_option("--steps", tn_steps);
  tnle->add_option("--samples", tn_samples);

  // train
  auto* train = app.add_subcommand("train", "Train the neural operator end to end");
  std::string tr_data, tr_init, tr_out, tr_log;
  std::optional<long> tr_steps;
  long tr_every = 0;
  bool tr_resume = false, tr_fresh = false;
  train->add_option("--data", tr_data)->required();
  train->add_option("--init", tr_init, "Checkpoint with a pretrained noise estimator");
  train->add_option("--out", tr_out, "Checkpoint path")->required();
  train->add_option("--steps", tr_steps, "Total steps (default epochs x samples)");
  train->add_option("--checkpoint-every", tr_every);
  train->add_option("--log", tr_log, "Per-step loss log (JSON lines)");
  train->add_flag("--resume", tr_resume, "Continue from --out");
  train->add_flag("--fresh", tr_fresh, "Start from random weights, noise estimator included");

  // reconstruct
  auto* rec = app.add_subcommand("reconstruct", "Reconstruct a hidden volume");
  std::string rc_in, rc_ckpt, rc_out, rc_method = "nano";
  std::size_t rc_fp = 50;
  rec->add_option("--in", rc_in, "Container with 'tau'")->required()->check(CLI::ExistingFile);
  rec->add_option("--checkpoint", rc_ckpt);
  rec->add_option("--method", rc_method)->check(CLI::IsMember({"nano", "wiener", "fixedpoint"}));
  rec->add_option("--out", rc_out, "Output directory")->required();
  rec->add_option("--fp-steps", rc_fp, "Fixed-point iterations");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate on a dataset split");
  std::string ev_data, ev_ckpt, ev_method = "nano", ev_split = "test", ev_out;
  std::vector<double> ev_etas;
  bool ev_sweep = false;
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--checkpoint", ev_ckpt);
  ev->add_option("--method", ev_method)
      ->check(CLI::IsMember({"nano", "wiener", "fixedpoint", "truth"}));
  ev->add_option("--split", ev_split)->check(CLI::IsMember({"train", "test"}));
  ev->add_option("--eta", ev_etas, "Noise levels");
  ev->add_flag("--sweep", ev_sweep, "Noise levels 0, 2, 5, 10");
  ev->add_option("--out", ev_out, "Metrics JSON");

  // export
  auto* ex = app.add_subcommand("export", "Write a container entry as an 8-bit PGM");
  std::string ex_in, ex_entry = "u", ex_out;
  ex->add_option("--in", ex_in)->required()->check(CLI::ExistingFile);
  ex->add_option("--entry", ex_entry);
  ex->add_option("--out", ex_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  if (*seed_opt) g.seed = seed_value;
  if (g.deterministic) omp_set_num_threads(1);

  try {
    if (*sim) {
      const RunConfig c = run_config(g);
      Dataset ds = synth_dataset(c.grid, n_train, n_test, c.seed);
      save_dataset(ds, sim_out);
      std::cout << "wrote " << ds.train.size() << " training and " << ds.test.size()
                << " test samples to " << sim_out << "\n";
    } else if (*noise) {
      RunConfig c = run_config(g);
      if (!nz_kind.empty()) c.noise.kind = nz_kind;
      c.validate();
      TensorContainer in = TensorContainer::load(nz_in);
      const Tensor tau = load_transient(nz_in);
      TensorContainer out;
      out.put("tau", apply_noise(tau, c.noise, nz_eta, c.seed), in.entries.at("tau").dtype);
      if (in.contains("u")) out.put("u", in.get("u"));
      out.put("eta", scalar(nz_eta));
      out.save(nz_out);
      std::cout << "wrote " << nz_out << " (" << c.noise.kind << ", eta " << nz_eta << ")\n";
    } else if (*tnle) {
      const RunConfig c = run_config(g);
      const Dataset ds = load_dataset(tn_data);
      std::vector<Tensor> clean;
      for (const Sample& s : ds.train) clean.push_back(s.tau);
      const auto samples =
          make_nle_samples(clean, tn_samples.value_or(c.training.nle_samples), c.noise.eta_max, c.seed);
      Checkpoint ck = fresh_checkpoint(c.model, ds.grid);
      NleTrainConfig tc;
      tc.steps = tn_steps.value_or(c.training.nle_steps);
      tc.beta = c.training.beta;
      tc.adam.lr = c.training.nle_lr;
      const NleTrainReport rep = train_nle(ck.params, samples, tc, c.model.nle);
      save_checkpoint(tn_out, ck);
      std::cout << "noise estimator loss " << rep.initial_loss << " -> " << rep.final_loss
                << "; saved " << tn_out << "\n";
    } else if (*train) {
      const RunConfig c = run_config(g);
      const Dataset ds = load_dataset(tr_data);
      if (ds.train.empty()) throw ParameterError("dataset " + tr_data + " has no training samples");
      Checkpoint ck;
      if (tr_resume) {
        ck = load_checkpoint(tr_out);
        if (!ck.has_opt) throw ParameterError(tr_out + " has no optimizer state to resume from");
      } else if (!tr_init.empty()) {
        ck = load_checkpoint(tr_init);
        ck.has_opt = false;
      } else if (tr_fresh) {
        ck = fresh_checkpoint(c.model, ds.grid);
      } else {
        throw ParameterError("train needs --init <noise-estimator checkpoint>, --resume or --fresh");
      }
      if (ck.grid.transient_shape() != ds.grid.transient_shape())
        throw ParameterError("checkpoint grid does not match the dataset grid");
      const LightTransport lt(ds.grid);
      TrainOptions opts;
      opts.total_steps = tr_steps.value_or(static_cast<long>(c.training.epochs * ds.train.size()));
      opts.checkpoint = tr_out;
      opts.checkpoint_every = tr_every;
      std::ofstream log;
      if (!tr_log.empty()) {
        log.open(tr_log, tr_resume ? std::ios::app : std::ios::trunc);
        if (!log) throw IoError("cannot write " + tr_log);
      }
      opts.on_step = [&](const StepLog& s) {
        const json j = {{"step", s.step}, {"loss", s.loss}, {"eta", s.eta}, {"lr", s.lr}};
        if (log) log << j.dump() << "\n" << std::flush;
        std::cout << "step " << s.step << " loss " << s.loss << " eta " << s.eta << "\n";
      };
      train_nano(ck, ds.train, lt, c, opts);
      save_checkpoint(tr_out, ck);
      std::cout << "saved " << tr_out << " at step " << ck.opt.step << "\n";
    } else if (*rec) {
      const RunConfig c = run_config(g);
      const Tensor tau = load_transient(rc_in);
      const Method m = parse_method(rc_method);
      std::optional<Checkpoint> ck;
      if (!rc_ckpt.empty()) ck = load_checkpoint(rc_ckpt);
      if (m == Method::Nano && !ck) throw ParameterError("--method nano needs --checkpoint");
      const SceneGrid grid = ck ? ck->grid : grid_for(c, tau);
      if (tau.shape() != grid.transient_shape())
        throw ParameterError("measurement shape " + shape_str(tau.shape()) +
                             " does not match checkpoint grid " + shape_str(grid.transient_shape()));
      const LightTransport lt(grid);
      const auto t0 = std::chrono::steady_clock::now();
      const MethodOutput out = run_method(m, tau, lt, ck ? &*ck : nullptr, nullptr, rc_fp);
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      fs::create_directories(rc_out);
      TensorContainer vol;
      vol.put("u", out.u);
      vol.put("albedo", out.albedo);
      vol.put("depth", out.depth);
      vol.save(fs::path(rc_out) / "u.ntc");
      write_pgm(fs::path(rc_out) / "albedo.pgm", out.albedo);
      write_pgm(fs::path(rc_out) / "depth.pgm", out.depth);
      json d = {{"method", rc_method},
                {"eta_hat", out.diag.eta},
                {"residuals", out.residuals},
                {"wall_time_s", wall},
                {"image_normalization", "per-image max, clipped to [0, 1], scaled to 255"}};
      if (m == Method::Nano) {
        json layers = json::array();
        for (const LayerReport& l : out.diag.layers)
          layers.push_back({{"scale", l.scale},
                            {"layer", l.layer},
                            {"dt", l.dt},
                            {"clamp_factor", l.clamp_factor},
                            {"norm", l.norm},
                            {"residual", l.residual}});
        d["layers"] = layers;
      }
      write_file(fs::path(rc_out) / "diagnostics.json", d.dump(2));
      std::cout << "wrote " << rc_out << " (" << rc_method << ", " << wall << " s)\n";
    } else if (*ev) {
      const RunConfig c = run_config(g);
      const Dataset ds = load_dataset(ev_data);
      const Method m = parse_method(ev_method);
      std::optional<Checkpoint> ck;
      if (!ev_ckpt.empty()) ck = load_checkpoint(ev_ckpt);
      if (m == Method::Nano && !ck) throw ParameterError("--method nano needs --checkpoint");
      std::vector<double> etas = ev_sweep ? sweep_levels() : ev_etas;
      if (etas.empty()) etas = {0.0};
      const auto& set = ev_split == "train" ? ds.train : ds.test;
      const LightTransport lt(ds.grid);
      const EvalTable t = evaluate(m, set, lt, ck ? &*ck : nullptr, etas, c.seed, c.noise);
      std::cout << eval_text(t);
      if (!ev_out.empty()) write_file(ev_out, eval_json(t, ev_method));
    } else if (*ex) {
      const TensorContainer cont = TensorContainer::load(ex_in);
      Tensor t = cont.get(ex_entry);
      if (t.ndim() == 3) t = project(t).albedo;
      write_pgm(ex_out, t);
      std::cout << "wrote " << ex_out << " (per-image max normalization)\n";
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
