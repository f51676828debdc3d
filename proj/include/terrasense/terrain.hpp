// Procedural terrain: a cell grid of ground-truth physics (mu, roughness)
// plus a value-noise texture renderer. Appearance depends on the cell's
// CLASS and world position only — never on the per-cell sampled mu — so a
// vision model can only learn class→physics statistics, not read mu off
// the pixels.
#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "terrasense/common.hpp"
#include "terrasense/config.hpp"
#include "terrasense/image.hpp"

namespace terra {

struct TerrainClass {
  int id = 0;
  std::string name;
  double mu_lo = 1.0, mu_hi = 1.0;        // within [0.25, 3.0]
  double rough_lo = 0.0, rough_hi = 0.0;  // within [0, 1]
  Rgb palette[3] = {};
  double texture_scale = 1.0;  // noise cycles per meter

  void validate() const {
    if (mu_lo < 0.25 || mu_hi > 3.0 || mu_lo > mu_hi)
      throw ConfigError("class '" + name + "': mu_range must lie in [0.25, 3.0]");
    if (rough_lo < 0.0 || rough_hi > 1.0 || rough_lo > rough_hi)
      throw ConfigError("class '" + name + "': rough_range must lie in [0, 1]");
    if (texture_scale <= 0.0)
      throw ConfigError("class '" + name + "': texture_scale must be positive");
  }
};

struct Cell {
  int class_id = -1;
  float mu = 0.0f;
  float roughness = 0.0f;
};

// Axis-aligned rectangle in world meters, [x0,x1) x [y0,y1).
struct Region {
  int class_id = -1;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

class TerrainGrid {
 public:
  TerrainGrid() = default;
  TerrainGrid(int width, int height, double cell_size_m, std::uint64_t seed)
      : w_(width), h_(height), cs_(cell_size_m), seed_(seed),
        cells_(static_cast<std::size_t>(width) * height) {}

  int width() const { return w_; }
  int height() const { return h_; }
  double cell_size() const { return cs_; }
  std::uint64_t seed() const { return seed_; }
  double extent_x() const { return w_ * cs_; }
  double extent_y() const { return h_ * cs_; }

  // (ix, iy): ix counts east from x = 0, iy counts north from y = 0.
  Cell& cell(int ix, int iy) { return cells_[static_cast<std::size_t>(iy) * w_ + ix]; }
  const Cell& cell(int ix, int iy) const {
    return cells_[static_cast<std::size_t>(iy) * w_ + ix];
  }

  bool inside(const Vec2& p) const {
    return p.x >= 0.0 && p.y >= 0.0 && p.x < extent_x() && p.y < extent_y();
  }

  // Cell owning the half-open square [x, x+cs) x [y, y+cs).
  const Cell& cell_at(const Vec2& p) const {
    if (!inside(p))
      throw std::domain_error("terrain query outside world extent: (" +
                              fmt_num(p.x) + ", " + fmt_num(p.y) + ")");
    int ix = static_cast<int>(std::floor(p.x / cs_));
    int iy = static_cast<int>(std::floor(p.y / cs_));
    return cell(ix, iy);
  }

  std::pair<double, double> query_params(const Vec2& p) const {
    const Cell& c = cell_at(p);
    return {c.mu, c.roughness};
  }

  const std::vector<TerrainClass>& classes() const { return classes_; }

  const TerrainClass& class_by_id(int id) const {
    for (const auto& c : classes_)
      if (c.id == id) return c;
    throw ConfigError("unknown terrain class id " + std::to_string(id));
  }

  static TerrainGrid generate(const std::vector<TerrainClass>& classes,
                              const std::vector<Region>& regions, int width,
                              int height, double cell_size_m,
                              std::uint64_t seed) {
    if (classes.empty()) throw ConfigError("generate_world: no classes");
    if (width <= 0 || height <= 0 || cell_size_m <= 0.0)
      throw ConfigError("generate_world: non-positive grid dimensions");
    for (const auto& c : classes) c.validate();
    for (std::size_t i = 0; i < classes.size(); ++i)
      for (std::size_t j = i + 1; j < classes.size(); ++j)
        if (classes[i].id == classes[j].id)
          throw ConfigError("duplicate terrain class id " +
                            std::to_string(classes[i].id));

    TerrainGrid g(width, height, cell_size_m, seed);
    g.classes_ = classes;

    // Region → class assignment. Overlap with a different class is a
    // conflict, not a layering feature.
    for (int iy = 0; iy < height; ++iy) {
      for (int ix = 0; ix < width; ++ix) {
        double cx = (ix + 0.5) * cell_size_m;
        double cy = (iy + 0.5) * cell_size_m;
        int assigned = -1;
        for (const auto& r : regions) {
          if (cx >= r.x0 && cx < r.x1 && cy >= r.y0 && cy < r.y1) {
            if (assigned != -1 && assigned != r.class_id)
              throw ConfigError(
                  "overlapping regions assign conflicting classes at cell (" +
                  std::to_string(ix) + ", " + std::to_string(iy) + ")");
            assigned = r.class_id;
          }
        }
        if (assigned == -1)
          throw ConfigError("regions do not cover cell (" + std::to_string(ix) +
                            ", " + std::to_string(iy) + ")");
        g.class_by_id(assigned);  // validates the id
        g.cell(ix, iy).class_id = assigned;
      }
    }

    // Per-cell uniform draws keyed by (seed, cell) — iteration-order free.
    for (int iy = 0; iy < height; ++iy) {
      for (int ix = 0; ix < width; ++ix) {
        Cell& c = g.cell(ix, iy);
        const TerrainClass& tc = g.class_by_id(c.class_id);
        double u_mu = hash01(splitmix64(seed ^ 0x6d75ULL), ix, iy);
        double u_ro = hash01(splitmix64(seed ^ 0x726fULL), ix, iy);
        c.mu = static_cast<float>(tc.mu_lo + (tc.mu_hi - tc.mu_lo) * u_mu);
        c.roughness =
            static_cast<float>(tc.rough_lo + (tc.rough_hi - tc.rough_lo) * u_ro);
      }
    }

    g.smooth_within_class();
    return g;
  }

  // Diffusion among same-class 4-neighbors until adjacent same-class cells
  // differ by < 10% of the class range width. Convex combinations keep every
  // value inside its class range.
  void smooth_within_class() {
    auto pass = [&](auto&& get, auto&& set, auto&& width_of) {
      double worst = 0.0;
      std::vector<float> next(cells_.size());
      for (int iy = 0; iy < h_; ++iy) {
        for (int ix = 0; ix < w_; ++ix) {
          const Cell& c = cell(ix, iy);
          double acc = get(c);
          int n = 1;
          const int dx[4] = {1, -1, 0, 0};
          const int dy[4] = {0, 0, 1, -1};
          for (int k = 0; k < 4; ++k) {
            int jx = ix + dx[k], jy = iy + dy[k];
            if (jx < 0 || jy < 0 || jx >= w_ || jy >= h_) continue;
            const Cell& nb = cell(jx, jy);
            if (nb.class_id != c.class_id) continue;
            acc += get(nb);
            ++n;
            double wdt = width_of(c);
            if (wdt > 0.0)
              worst = std::max(worst,
                               std::abs(get(nb) - get(c)) / wdt);
          }
          next[static_cast<std::size_t>(iy) * w_ + ix] =
              static_cast<float>(acc / n);
        }
      }
      if (worst >= 0.1 - 1e-9) {
        for (int iy = 0; iy < h_; ++iy)
          for (int ix = 0; ix < w_; ++ix)
            set(cell(ix, iy), next[static_cast<std::size_t>(iy) * w_ + ix]);
        return false;  // not settled yet
      }
      return true;
    };

    for (int iter = 0; iter < 1000; ++iter) {
      bool mu_ok = pass([](const Cell& c) { return double(c.mu); },
                        [](Cell& c, float v) { c.mu = v; },
                        [&](const Cell& c) {
                          const auto& tc = class_by_id(c.class_id);
                          return tc.mu_hi - tc.mu_lo;
                        });
      bool ro_ok = pass([](const Cell& c) { return double(c.roughness); },
                        [](Cell& c, float v) { c.roughness = v; },
                        [&](const Cell& c) {
                          const auto& tc = class_by_id(c.class_id);
                          return tc.rough_hi - tc.rough_lo;
                        });
      if (mu_ok && ro_ok) return;
    }
    throw SimulationFault("terrain smoothing failed to settle");
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write grid: " + path);
    out.write("TSGR", 4);
    std::uint32_t v = 1;
    out.write(reinterpret_cast<const char*>(&v), 4);
    std::uint32_t w = static_cast<std::uint32_t>(w_), h = static_cast<std::uint32_t>(h_);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    out.write(reinterpret_cast<const char*>(&cs_), 8);
    out.write(reinterpret_cast<const char*>(&seed_), 8);
    std::uint32_t nc = static_cast<std::uint32_t>(classes_.size());
    out.write(reinterpret_cast<const char*>(&nc), 4);
    for (const auto& c : classes_) {
      std::uint32_t id = static_cast<std::uint32_t>(c.id);
      out.write(reinterpret_cast<const char*>(&id), 4);
      std::uint32_t nl = static_cast<std::uint32_t>(c.name.size());
      out.write(reinterpret_cast<const char*>(&nl), 4);
      out.write(c.name.data(), nl);
      double vals[5] = {c.mu_lo, c.mu_hi, c.rough_lo, c.rough_hi, c.texture_scale};
      out.write(reinterpret_cast<const char*>(vals), sizeof(vals));
      out.write(reinterpret_cast<const char*>(c.palette), 9);
    }
    for (const auto& c : cells_) {
      std::int32_t id = c.class_id;
      out.write(reinterpret_cast<const char*>(&id), 4);
      out.write(reinterpret_cast<const char*>(&c.mu), 4);
      out.write(reinterpret_cast<const char*>(&c.roughness), 4);
    }
    if (!out) throw ConfigError("short write on grid: " + path);
  }

  static TerrainGrid load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open grid: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "TSGR")
      throw ConfigError(path + ": not a TSGR grid file");
    std::uint32_t ver = 0, w = 0, h = 0, nc = 0;
    in.read(reinterpret_cast<char*>(&ver), 4);
    if (ver != 1) throw ConfigError(path + ": unsupported grid version");
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    double cs = 0;
    std::uint64_t seed = 0;
    in.read(reinterpret_cast<char*>(&cs), 8);
    in.read(reinterpret_cast<char*>(&seed), 8);
    TerrainGrid g(static_cast<int>(w), static_cast<int>(h), cs, seed);
    in.read(reinterpret_cast<char*>(&nc), 4);
    for (std::uint32_t i = 0; i < nc; ++i) {
      TerrainClass c;
      std::uint32_t id = 0, nl = 0;
      in.read(reinterpret_cast<char*>(&id), 4);
      in.read(reinterpret_cast<char*>(&nl), 4);
      if (nl > 1024) throw ConfigError(path + ": implausible class name");
      c.id = static_cast<int>(id);
      c.name.resize(nl);
      in.read(c.name.data(), nl);
      double vals[5];
      in.read(reinterpret_cast<char*>(vals), sizeof(vals));
      c.mu_lo = vals[0]; c.mu_hi = vals[1];
      c.rough_lo = vals[2]; c.rough_hi = vals[3];
      c.texture_scale = vals[4];
      in.read(reinterpret_cast<char*>(c.palette), 9);
      g.classes_.push_back(std::move(c));
    }
    for (auto& c : g.cells_) {
      std::int32_t id = 0;
      in.read(reinterpret_cast<char*>(&id), 4);
      in.read(reinterpret_cast<char*>(&c.mu), 4);
      in.read(reinterpret_cast<char*>(&c.roughness), 4);
      c.class_id = id;
    }
    if (!in) throw ConfigError(path + ": truncated grid file");
    return g;
  }

 private:
  int w_ = 0, h_ = 0;
  double cs_ = 0.25;
  std::uint64_t seed_ = 0;
  std::vector<TerrainClass> classes_;
  std::vector<Cell> cells_;
};

// Ground color at a world point: the class palette blended by value noise
// keyed on (class-derived seed, world position). Reads only the class id
// of the containing cell — never the sampled mu.
inline Rgb ground_color(const TerrainGrid& grid, const Vec2& p,
                        std::uint64_t render_seed) {
  const Cell& cell = grid.cell_at(p);
  const TerrainClass& tc = grid.class_by_id(cell.class_id);
  std::uint64_t cs = splitmix64(render_seed ^ (0x7465784ULL + cell.class_id));
  double s = tc.texture_scale;
  double n1 = value_noise(cs, p.x * s, p.y * s);
  double n2 = value_noise(splitmix64(cs), p.x * s * 3.1 + 17.0, p.y * s * 3.1);
  auto lerp = [](std::uint8_t a, std::uint8_t b, double t) {
    return a + (b - a) * t;
  };
  // Two-segment palette blend plus a fine-grain brightness ripple.
  double t = clamp(n1 * 1.15 - 0.075, 0.0, 1.0);
  double rr, gg, bb;
  if (t < 0.5) {
    double u = t * 2.0;
    rr = lerp(tc.palette[0].r, tc.palette[1].r, u);
    gg = lerp(tc.palette[0].g, tc.palette[1].g, u);
    bb = lerp(tc.palette[0].b, tc.palette[1].b, u);
  } else {
    double u = (t - 0.5) * 2.0;
    rr = lerp(tc.palette[1].r, tc.palette[2].r, u);
    gg = lerp(tc.palette[1].g, tc.palette[2].g, u);
    bb = lerp(tc.palette[1].b, tc.palette[2].b, u);
  }
  double gain = 0.90 + 0.20 * n2;
  auto q = [&](double v) {
    return static_cast<std::uint8_t>(clamp(v * gain, 0.0, 255.0) + 0.5);
  };
  return Rgb{q(rr), q(gg), q(bb)};
}

// Overhead orthographic render. Row 0 is the NORTH edge (largest y), so
// the image reads like a map.
inline Image render_texture(const TerrainGrid& grid, double res_px_per_m,
                            std::uint64_t render_seed) {
  if (res_px_per_m <= 0.0)
    throw ConfigError("render_texture: resolution must be positive");
  int wpx = static_cast<int>(std::lround(grid.extent_x() * res_px_per_m));
  int hpx = static_cast<int>(std::lround(grid.extent_y() * res_px_per_m));
  Image img(wpx, hpx);
  for (int r = 0; r < hpx; ++r) {
    for (int c = 0; c < wpx; ++c) {
      Vec2 p{(c + 0.5) / res_px_per_m,
             grid.extent_y() - (r + 0.5) / res_px_per_m};
      img.at(r, c) = ground_color(grid, p, render_seed);
    }
  }
  return img;
}

// The four stock classes. Centers echo a field-measured ordering
// (grass > pavement > dirt ≈ gravel); used by the demo configs.
inline std::vector<TerrainClass> default_classes() {
  std::vector<TerrainClass> v(4);
  v[0] = {0, "grass",    1.40, 2.40, 0.25, 0.45,
          {Rgb{56, 100, 44}, Rgb{72, 116, 52}, Rgb{88, 132, 60}}, 4.5};
  v[1] = {1, "pavement", 1.00, 1.70, 0.02, 0.12,
          {Rgb{116, 116, 120}, Rgb{128, 127, 129}, Rgb{140, 138, 138}}, 5.0};
  v[2] = {2, "dirt",     0.60, 1.20, 0.15, 0.35,
          {Rgb{122, 90, 56}, Rgb{138, 104, 66}, Rgb{154, 118, 78}}, 5.5};
  v[3] = {3, "gravel",   0.65, 1.15, 0.45, 0.75,
          {Rgb{92, 88, 82}, Rgb{134, 130, 122}, Rgb{176, 170, 158}}, 9.0};
  return v;
}

// --- world spec file ---------------------------------------------------
//
// [world]                       width/height in cells
//   width = 80
//   height = 80
//   cell_size_m = 0.25
//   seed = 42
// [class grass]                 one per class
//   id = 0
//   mu_range = 1.4 2.4
//   rough_range = 0.25 0.45
//   palette = 48 86 40  86 128 54  118 152 66
//   texture_scale = 2.8
// [region]                      one per rectangle, coords in meters
//   class = grass
//   rect_m = 0 0 10 20

inline TerrainGrid world_from_config(const Config& cfg) {
  const ConfigSection& w = cfg.section("world");
  int width = static_cast<int>(w.get_int("width"));
  int height = static_cast<int>(w.get_int("height"));
  double cell = w.get_num_or("cell_size_m", 0.25);
  std::uint64_t seed = static_cast<std::uint64_t>(w.get_int("seed"));

  std::vector<TerrainClass> classes;
  for (const ConfigSection* s : cfg.all("class")) {
    TerrainClass c;
    c.name = s->arg.empty() ? ("class" + std::to_string(classes.size())) : s->arg;
    c.id = static_cast<int>(s->get_int("id"));
    auto mu = s->get_nums("mu_range");
    auto ro = s->get_nums("rough_range");
    if (mu.size() != 2 || ro.size() != 2)
      throw ConfigError("class '" + c.name + "': ranges need exactly 2 numbers");
    c.mu_lo = mu[0]; c.mu_hi = mu[1];
    c.rough_lo = ro[0]; c.rough_hi = ro[1];
    auto pal = s->get_nums("palette");
    if (pal.size() != 9)
      throw ConfigError("class '" + c.name + "': palette needs 9 numbers");
    for (int i = 0; i < 3; ++i)
      c.palette[i] = Rgb{static_cast<std::uint8_t>(pal[i * 3]),
                         static_cast<std::uint8_t>(pal[i * 3 + 1]),
                         static_cast<std::uint8_t>(pal[i * 3 + 2])};
    c.texture_scale = s->get_num_or("texture_scale", 1.0);
    classes.push_back(std::move(c));
  }

  std::vector<Region> regions;
  for (const ConfigSection* s : cfg.all("region")) {
    Region r;
    const std::string& cname = s->get("class");
    r.class_id = -1;
    for (const auto& c : classes)
      if (c.name == cname) r.class_id = c.id;
    if (r.class_id == -1)
      throw ConfigError("region references unknown class '" + cname + "'");
    auto rect = s->get_nums("rect_m");
    if (rect.size() != 4)
      throw ConfigError("region rect_m needs exactly 4 numbers");
    r.x0 = rect[0]; r.y0 = rect[1]; r.x1 = rect[2]; r.y1 = rect[3];
    regions.push_back(r);
  }

  return TerrainGrid::generate(classes, regions, width, height, cell, seed);
}

inline TerrainGrid world_from_spec_file(const std::string& path) {
  return world_from_config(Config::load(path));
}

}  // namespace terra
