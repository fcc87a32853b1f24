// One PASS/FAIL line per acceptance criterion. Exit status is nonzero if any
// criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "grad_cases.hpp"
#include "nlos/classic.hpp"
#include "nlos/dataset.hpp"
#include "nlos/fft.hpp"
#include "nlos/metrics.hpp"
#include "nlos/noise.hpp"
#include "nlos/training.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace nlos;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double budget_s, const std::function<Outcome()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = f();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = s < budget_s;
  const bool ok = o.pass && in_time;
  failures += !ok;
  std::printf("%s  %-34s %s  [%.1f s / %.0f s%s]\n", ok ? "PASS" : "FAIL", name.c_str(),
              o.detail.c_str(), s, budget_s, in_time ? "" : ", over budget");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(NLOS_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// toy protocol shared by the training and noise-estimation criteria
struct Toy {
  RunConfig cfg;
  Dataset data;
  Checkpoint init;  // trained noise estimator, untrained operator
  NleTrainReport nle;
};

Toy& toy() {
  static Toy t = [] {
    Toy t;
    t.cfg.seed = 3;
    t.cfg.training.lr = 3e-3;
    t.data = synth_dataset(t.cfg.grid, 20, 5, t.cfg.seed);
    std::vector<Tensor> clean;
    for (const auto& s : t.data.train) clean.push_back(s.tau);
    const auto samples =
        make_nle_samples(clean, t.cfg.training.nle_samples, t.cfg.noise.eta_max, t.cfg.seed);
    t.init = fresh_checkpoint(t.cfg.model, t.cfg.grid);
    NleTrainConfig tc;
    tc.steps = t.cfg.training.nle_steps;
    tc.beta = t.cfg.training.beta;
    tc.adam.lr = t.cfg.training.nle_lr;
    t.nle = train_nle(t.init.params, samples, tc, t.cfg.model.nle);
    return t;
  }();
  return t;
}

}  // namespace

int main() {
  std::printf("acceptance suite (desk grid 16x16x64)\n");

  criterion("forward-model equivalence", 10, [] {
    auto [diff, scale] = testing::forward_equivalence(testing::tiny_grid());
    return Outcome{diff <= 1e-6 && scale > 0.0, fmt("max |A - A_oracle| = %.2e (entries up to %.2e)", diff, scale)};
  });

  criterion("adjoint test", 30, [] {
    SceneGrid g;
    LightTransport lt(g);
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 50; ++i) {
      Tensor u = testing::randn(g.volume_shape(), 1000 + i);
      Tensor w = testing::randn(g.transient_shape(), 2000 + i);
      Tensor Au = lt.apply_A(u);
      worst = std::max(worst, std::abs(Au.dot(w) - u.dot(lt.apply_A_adjoint(w))) / (Au.norm() * w.norm()));
    }
    return Outcome{worst <= 1e-8, fmt("worst relative mismatch %.2e over 50 pairs", worst)};
  });

  criterion("wiener normal equation", 5, [] {
    double worst = 0.0;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ua(0.0, 1.0);
    for (std::uint64_t i = 0; i < 100; ++i) {
      ComplexVolume tau = testing::crandn({16, 8, 8}, 3000 + i), h = testing::crandn({16, 8, 8}, 4000 + i);
      const double alpha = ua(rng);
      worst = std::max(worst, testing::normal_residual(wiener(tau, h, alpha), tau, h, alpha));
    }
    return Outcome{worst <= 1e-10, fmt("worst residual %.2e over 100 instances", worst)};
  });

  criterion("convergence theorem", 30, [] {
    bool bound_ok = true;
    double worst_final = 0.0, worst_ratio = 0.0;
    std::size_t maxK = 0;
    for (std::uint64_t i = 0; i < 20; ++i) {
      ComplexVolume tau = testing::crandn({16, 8, 8}, 5000 + i), h = testing::crandn({16, 8, 8}, 6000 + i);
      const double alpha = default_alpha(h), dt = default_step(h, alpha);
      const double B = contraction_factor(h, alpha, dt);
      const auto K = std::size_t(std::ceil(std::log(1e-8) / std::log(B)));
      maxK = std::max(maxK, K);
      SolveReport r;
      ComplexVolume u = fixed_point_solve(tau, h, alpha, dt, K, &r, 0.0);
      for (std::size_t k = 0; k < r.errors.size(); ++k) {
        const double ratio = r.errors[k] / (std::pow(B, double(k)) * r.errors[0]);
        worst_ratio = std::max(worst_ratio, ratio);
        if (ratio > 1.0 + 1e-10) bound_ok = false;
      }
      worst_final = std::max(worst_final, testing::rel_err(u, wiener(tau, h, alpha)));
    }
    return Outcome{bound_ok && worst_final <= 1e-8,
                   fmt("max |e^k|/(B^k |e^0|) = %.6f, final rel. error %.2e (K up to %.0f)", worst_ratio,
                       worst_final, double(maxK))};
  });

  criterion("gradient correctness", 300, [] {
    double worst = 0.0;
    std::string which;
    std::size_t n = 0;
    for (const auto& c : testing::primitive_cases()) {
      const double e = testing::gradcheck(c.fn, c.inputs);
      ++n;
      if (e > worst) worst = e, which = c.name;
    }
    const double cco = testing::cco_block_gradcheck();
    if (cco > worst) worst = cco, which = "cco block";
    return Outcome{worst <= 1e-4, fmt("%.0f primitives + CCO block, worst rel. error %.2e", double(n), worst) +
                                      " (" + which + ")"};
  });

  criterion("contraction clamping", 120, [] {
    SceneGrid g;
    LightTransport lt(g);
    Dataset d = synth_dataset(g, 0, 1, 21);
    const Tensor tau = add_gaussian(d.test[0].tau, 5.0, 22);
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> step(0.01, 3.0);
    double worst = 0.0;
    std::size_t clamped = 0, layers = 0;
    for (std::uint64_t i = 0; i < 100; ++i) {
      NanoConfig cfg;
      cfg.seed = 100 + i;
      ModelParams p;
      init_model(p, cfg);
      // random step sizes so that many layers start outside the contraction region
      for (const auto& n : p.names())
        if (n.size() > 5 && n.compare(n.size() - 5, 5, ".step") == 0) p.get(n)[0] = step(rng);
      Reconstruction r = reconstruct(tau, p, lt, cfg);
      for (const auto& l : r.diag.layers) {
        worst = std::max(worst, l.norm);
        clamped += l.clamp_factor != 1.0;
        ++layers;
      }
    }
    return Outcome{worst <= 0.99 && layers == 1000,
                   fmt("max ||I - dt S|| = %.6f over %.0f layers (%.0f clamped)", worst, double(layers),
                       double(clamped))};
  });

  criterion("classical-limit unification", 60, [] {
    double it = 0.0, res = 0.0;
    for (std::uint64_t s = 0; s < 5; ++s) {
      testing::ClassicalLimit c = testing::classical_limit(40 + s, 10);
      it = std::max(it, c.iterate_err);
      res = std::max(res, c.residual_err);
    }
    return Outcome{it <= 1e-10 && res <= 1e-10,
                   fmt("10-step iterate rel. error %.2e, residual rel. error %.2e", it, res)};
  });

  criterion("toy training efficacy", 1800, [] {
    Toy& t = toy();
    LightTransport lt(t.cfg.grid);
    Checkpoint ck = t.init;
    const double before = evaluation_loss(ck.params, t.data.train, lt, t.cfg, 77);
    TrainOptions opts;
    opts.total_steps = 200;
    train_nano(ck, t.data.train, lt, t.cfg, opts);
    const double after = evaluation_loss(ck.params, t.data.train, lt, t.cfg, 77);
    EvalTable n = evaluate(Method::Nano, t.data.test, lt, &ck, {5.0}, t.cfg.seed, t.cfg.noise);
    EvalTable w = evaluate(Method::Wiener, t.data.test, lt, nullptr, {5.0}, t.cfg.seed, t.cfg.noise);
    int wins = 0;
    std::string rows;
    for (std::size_t i = 0; i < n.rows.size(); ++i) {
      wins += n.rows[i].m.psnr > w.rows[i].m.psnr;
      rows += fmt(" %.1f/%.1f", n.rows[i].m.psnr, w.rows[i].m.psnr);
    }
    const double ratio = after / before;
    return Outcome{ratio <= 0.5 && wins >= 4,
                   fmt("L_total %.2f -> %.2f (x%.3f); ", before, after, ratio) +
                       "NANO beats Wiener at eta 5 on " + std::to_string(wins) + "/5 (dB nano/wiener:" + rows + ")"};
  });

  criterion("noise-level estimation", 900, [] {
    Toy& t = toy();
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> ue(0.0, 10.0);
    double err = 0.0;
    const std::size_t draws = 40;
    for (std::size_t i = 0; i < draws; ++i) {
      const double eta = ue(rng);
      const Tensor noisy = add_gaussian(t.data.test[i % t.data.test.size()].tau, eta, rng());
      err += std::abs(estimate_noise(noisy, t.init.params, t.cfg.model.nle).eta - eta);
    }
    err /= double(draws);
    return Outcome{err <= 1.0, fmt("mean |eta_hat - eta| = %.3f over %.0f held-out draws", err, double(draws)) +
                                   fmt(" (estimator loss %.2f -> %.2f)", t.nle.initial_loss, t.nle.final_loss)};
  });

  criterion("metrics sanity", 5, [] {
    Tensor a = testing::randu({16, 16}, 1);
    const double self = ssim(a, a);
    const double p20 = psnr_from_mse(0.01, 1.0);
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
      Tensor x = testing::randu({16, 16}, 50 + s), y = testing::randu({16, 16}, 70 + s);
      worst = std::max(worst, std::abs(ssim(x, y) - testing::ssim_oracle(x, y)));
    }
    return Outcome{self == 1.0 && std::abs(p20 - 20.0) < 1e-12 && worst <= 1e-10,
                   fmt("SSIM(a,a) = %.15f, PSNR(mse 0.01) = %.12f dB, |SSIM - oracle| <= %.2e", self, p20, worst)};
  });

  criterion("determinism", 600, [] {
    const fs::path root = fs::temp_directory_path() / ("nlos_accept_" + std::to_string(::getpid()));
    fs::remove_all(root);
    auto pipeline = [&](const fs::path& d) {
      const std::string s = d.string();
      const std::vector<std::string> cmds{
          "--seed 9 simulate --out " + s + "/ds --n-train 3 --n-test 2",
          "--seed 9 add-noise --in " + s + "/ds/test_0000.ntc --out " + s + "/noisy.ntc --eta 4",
          "--seed 9 add-noise --in " + s + "/ds/test_0001.ntc --out " + s + "/shot.ntc --eta 1 --kind poisson",
          "--seed 9 train-nle --data " + s + "/ds --out " + s + "/nle.ntc --steps 4 --samples 4",
          "--seed 9 train --data " + s + "/ds --init " + s + "/nle.ntc --out " + s + "/nano.ntc --steps 3",
          "--seed 9 reconstruct --in " + s + "/noisy.ntc --checkpoint " + s + "/nano.ntc --method nano --out " + s + "/rn",
          "--seed 9 reconstruct --in " + s + "/noisy.ntc --method wiener --out " + s + "/rw",
          "--seed 9 reconstruct --in " + s + "/noisy.ntc --method fixedpoint --out " + s + "/rf",
          "--seed 9 eval --data " + s + "/ds --checkpoint " + s + "/nano.ntc --method nano --sweep --out " + s + "/eval.json"};
      for (const auto& c : cmds)
        if (run_cli(c) != 0) throw std::runtime_error("command failed: nlos " + c);
    };
    pipeline(root / "a");
    pipeline(root / "b");
    std::size_t compared = 0, differ = 0;
    for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
      if (!e.is_regular_file()) continue;
      const auto rel = fs::relative(e.path(), root / "a");
      const auto ext = e.path().extension();
      if (ext != ".ntc" && ext != ".pgm" && rel.filename() != "eval.json" && rel.filename() != "manifest.json")
        continue;
      ++compared;
      differ += read_file(e.path()) != read_file(root / "b" / rel);
    }
    fs::remove_all(root);
    return Outcome{compared > 0 && differ == 0,
                   fmt("%.0f output files compared across two runs, %.0f differ", double(compared), double(differ))};
  });

  std::printf("%s: %d criterion(s) failed\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}
