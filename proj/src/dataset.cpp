#include "nlos/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "nlos/config.hpp"
#include "nlos/container.hpp"
#include "nlos/error.hpp"

namespace nlos {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// 5x5 glyphs, rows top to bottom.
constexpr std::array<const char*, 6> kGlyphs = {
    "#...#"
    "#...#"
    "#####"
    "#...#"
    "#...#",  // H
    "#####"
    "..#.."
    "..#.."
    "..#.."
    "..#..",  // T
    "#...."
    "#...."
    "#...."
    "#...."
    "#####",  // L
    "#...#"
    ".#.#."
    "..#.."
    ".#.#."
    "#...#",  // X
    ".###."
    "#...#"
    "#...#"
    "#...#"
    ".###.",  // O
    "#####"
    "#...."
    "####."
    "#...."
    "#####",  // E
};

struct Rng {
  std::mt19937_64 gen;
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(gen); }
  std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
    return std::uniform_int_distribution<std::size_t>(lo, hi)(gen);
  }
};

void put(Tensor& u, std::size_t d, std::size_t y, std::size_t x, double a) {
  double& v = u.at(d, y, x);
  v = std::max(v, a);
}

void add_box(Tensor& u, const SceneGrid& g, Rng& r) {
  const std::size_t h = r.index(std::max<std::size_t>(2, g.H / 5), std::max<std::size_t>(2, g.H / 2));
  const std::size_t w = r.index(std::max<std::size_t>(2, g.W / 5), std::max<std::size_t>(2, g.W / 2));
  const std::size_t d = r.index(1, std::max<std::size_t>(1, g.D / 4));
  if (d + 3 > g.D) throw ParameterError("grid too shallow for box primitives");
  const std::size_t y0 = r.index(0, g.H - h), x0 = r.index(0, g.W - w);
  const std::size_t z0 = r.index(1, g.D - d - 2);
  const double a = r.uniform(0.4, 1.0);
  for (std::size_t z = z0; z <= z0 + d; ++z)
    for (std::size_t y = y0; y < y0 + h; ++y)
      for (std::size_t x = x0; x < x0 + w; ++x) {
        const bool front = z == z0;
        const bool rim = y == y0 || y + 1 == y0 + h || x == x0 || x + 1 == x0 + w;
        if (front || rim) put(u, z, y, x, a);
      }
}

void add_sphere(Tensor& u, const SceneGrid& g, Rng& r) {
  const double rad = r.uniform(0.15, 0.3) * static_cast<double>(std::min(g.H, g.W));
  const double cy = r.uniform(rad, static_cast<double>(g.H) - 1 - rad);
  const double cx = r.uniform(rad, static_cast<double>(g.W) - 1 - rad);
  const double cz = r.uniform(rad + 1.0, static_cast<double>(g.D) - 2.0);
  const double a = r.uniform(0.4, 1.0);
  for (std::size_t z = 0; z < g.D; ++z)
    for (std::size_t y = 0; y < g.H; ++y)
      for (std::size_t x = 0; x < g.W; ++x) {
        const double dz = static_cast<double>(z) - cz;
        if (dz > 0.0) continue;
        const double dist = std::sqrt(dz * dz + std::pow(static_cast<double>(y) - cy, 2) +
                                      std::pow(static_cast<double>(x) - cx, 2));
        if (std::abs(dist - rad) <= 0.5) put(u, z, y, x, a);
      }
}

void add_letter(Tensor& u, const SceneGrid& g, Rng& r) {
  const char* glyph = kGlyphs[r.index(0, kGlyphs.size() - 1)];
  const std::size_t cell = std::max<std::size_t>(1, std::min(g.H, g.W) / 8);
  const std::size_t size = 5 * cell;
  if (size > g.H || size > g.W) throw ParameterError("grid too small for letter primitives");
  const std::size_t y0 = r.index(0, g.H - size), x0 = r.index(0, g.W - size);
  const std::size_t z = r.index(1, g.D - 2);
  const double a = r.uniform(0.4, 1.0);
  for (std::size_t gy = 0; gy < 5; ++gy)
    for (std::size_t gx = 0; gx < 5; ++gx) {
      if (glyph[gy * 5 + gx] != '#') continue;
      for (std::size_t sy = 0; sy < cell; ++sy)
        for (std::size_t sx = 0; sx < cell; ++sx)
          put(u, z, y0 + gy * cell + sy, x0 + gx * cell + sx, a);
    }
}

std::string sample_file(const std::string& id) { return id + ".ntc"; }

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 of the pair
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Tensor generate_scene(const SceneGrid& g, std::uint64_t seed) {
  g.validate();
  if (g.D < 8 || g.H < 5 || g.W < 5) throw ParameterError("scene grid too small");
  Rng r{std::mt19937_64(seed)};
  Tensor u(g.volume_shape());
  const std::size_t count = r.index(1, 3);
  for (std::size_t i = 0; i < count; ++i) {
    switch (r.index(0, 2)) {
      case 0: add_box(u, g, r); break;
      case 1: add_sphere(u, g, r); break;
      default: add_letter(u, g, r); break;
    }
  }
  if (u.max_abs() == 0.0) add_box(u, g, r);
  return u;
}

Dataset synth_dataset(const SceneGrid& g, std::size_t n_train, std::size_t n_test,
                      std::uint64_t seed) {
  g.validate();
  Dataset ds;
  ds.grid = g;
  ds.seed = seed;
  auto make = [&](const char* prefix, std::size_t n, std::uint64_t base, std::vector<Sample>& out) {
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "%s_%04zu", prefix, i);
      out[i].id = id;
      out[i].u = generate_scene(g, mix_seed(seed, base + i));
      out[i].tau = render_confocal_oracle(out[i].u, g);
    }
  };
  make("train", n_train, 0, ds.train);
  make("test", n_test, 1u << 20, ds.test);
  return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory " + dir.string() + ": " + ec.message());
  json files_train = json::array(), files_test = json::array();
  auto write = [&](const std::vector<Sample>& set, json& list) {
    for (const Sample& s : set) {
      TensorContainer c;
      c.put("u", s.u);
      c.put("tau", s.tau);
      c.save(dir / sample_file(s.id));
      list.push_back(sample_file(s.id));
    }
  };
  write(ds.train, files_train);
  write(ds.test, files_test);
  json m;
  m["format"] = "nlos-dataset";
  m["version"] = 1;
  m["seed"] = ds.seed;
  m["grid"] = json::parse(grid_to_json(ds.grid));
  m["train"] = files_train;
  m["test"] = files_test;
  const fs::path mp = dir / "manifest.json";
  std::ofstream f(mp);
  if (!f) throw IoError("cannot write " + mp.string());
  f << m.dump(2) << "\n";
  if (!f) throw IoError("write failed for " + mp.string());
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path mp = dir / "manifest.json";
  std::ifstream f(mp);
  if (!f) throw IoError("missing dataset manifest " + mp.string());
  std::stringstream ss;
  ss << f.rdbuf();
  json m;
  try {
    m = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw ParameterError("invalid manifest " + mp.string() + ": " + e.what());
  }
  if (m.value("format", std::string()) != "nlos-dataset")
    throw ParameterError("manifest " + mp.string() + " is not an nlos dataset manifest");
  Dataset ds;
  ds.grid = grid_from_json(m.at("grid").dump());
  ds.seed = m.value("seed", std::uint64_t{0});
  auto read = [&](const char* key, std::vector<Sample>& out) {
    if (!m.contains(key)) return;
    for (const auto& name : m.at(key)) {
      const std::string file = name.get<std::string>();
      TensorContainer c = TensorContainer::load(dir / file);
      Sample s;
      s.id = fs::path(file).stem().string();
      s.u = c.contains("u") ? c.get("u") : Tensor();
      s.tau = c.get("tau");
      if (s.tau.shape() != ds.grid.transient_shape())
        throw ShapeError("sample " + file + " has transient shape " + shape_str(s.tau.shape()) +
                         ", manifest grid expects " + shape_str(ds.grid.transient_shape()));
      if (!s.u.empty() && s.u.shape() != ds.grid.volume_shape())
        throw ShapeError("sample " + file + " has volume shape " + shape_str(s.u.shape()));
      out.push_back(std::move(s));
    }
  };
  read("train", ds.train);
  read("test", ds.test);
  if (ds.train.empty() && ds.test.empty()) throw ParameterError("dataset " + dir.string() + " is empty");
  return ds;
}

Tensor load_transient(const fs::path& path) {
  TensorContainer c = TensorContainer::load(path);
  if (!c.contains("tau")) throw IoError("container " + path.string() + " has no 'tau' entry");
  const Tensor& t = c.get("tau");
  if (t.ndim() != 3) throw ShapeError("'tau' in " + path.string() + " must be rank 3");
  return t;
}

}  // namespace nlos
