// Pipeline driver: one subcommand per stage plus a full-pipeline runner and
// figure emitters. Every stage writes into a content-addressed directory
// <out>/<label>-<hash12> where the hash covers the stage parameters and the
// hashes of all upstream artifacts; a stage whose directory already carries a
// manifest is reused instead of recomputed. Exit codes: 0 success, 1 usage or
// config error (including missing upstream artifacts), 2 runtime fault.
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "terrasense/common.hpp"
#include "terrasense/config.hpp"
#include "terrasense/costmap.hpp"
#include "terrasense/dataset.hpp"
#include "terrasense/manifest.hpp"
#include "terrasense/planner.hpp"
#include "terrasense/ppo.hpp"
#include "terrasense/svg.hpp"
#include "terrasense/terrain.hpp"
#include "terrasense/vision.hpp"

namespace fs = std::filesystem;
using namespace terra;

namespace {

// ---------------------------------------------------------------- utilities

std::uint64_t hash_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + p.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
  return h;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << text;
}

// Key/value lines that identify a stage; their hash names the directory.
struct StageSpec {
  std::string label;
  std::vector<std::pair<std::string, std::string>> kv;

  void add(const std::string& k, const std::string& v) { kv.emplace_back(k, v); }
  void add(const std::string& k, double v) { kv.emplace_back(k, fmt_num(v)); }
  void add(const std::string& k, long v) { kv.emplace_back(k, std::to_string(v)); }
  void add(const std::string& k, std::uint64_t v) { kv.emplace_back(k, std::to_string(v)); }

  std::string text() const {
    std::string s = "[" + label + "]\n";
    for (const auto& [k, v] : kv) s += k + " = " + v + "\n";
    return s;
  }
  std::uint64_t hash() const { return fnv1a64(text()); }
};

struct Stage {
  fs::path dir;
  std::uint64_t hash = 0;
  bool reused = false;
};

// Open (or reuse) the content-addressed directory for a stage.
Stage stage_begin(const fs::path& root, const StageSpec& spec) {
  Stage st;
  st.hash = spec.hash();
  st.dir = run_dir(root, spec.label, st.hash);
  if (fs::exists(st.dir / "manifest.txt")) {
    st.reused = true;
    std::printf("[reuse] %s\n", st.dir.string().c_str());
    return st;
  }
  fs::create_directories(st.dir);
  write_text(st.dir / "stage_config.txt", spec.text());
  return st;
}

// Write the stage manifest covering every regular file in the directory.
void stage_finish(const Stage& st, const StageSpec& spec) {
  Manifest m;
  m.tool = spec.label;
  m.config_hash = st.hash;
  m.params = spec.kv;
  std::vector<std::string> rels;
  for (const auto& e : fs::recursive_directory_iterator(st.dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.txt")
      rels.push_back(fs::relative(e.path(), st.dir).generic_string());
  std::sort(rels.begin(), rels.end());
  for (const auto& r : rels) m.add_file(st.dir, r);
  m.save(st.dir);
  std::printf("[done]  %s\n", st.dir.string().c_str());
}

// Hash of an upstream artifact: a stage directory (manifest hash) or a file.
std::uint64_t artifact_hash(const fs::path& p) {
  if (fs::is_directory(p)) {
    std::ifstream in(p / "manifest.txt");
    if (!in)
      throw ConfigError(p.string() +
                        ": no manifest.txt — not a finished stage directory");
    std::string line;
    while (std::getline(in, line))
      if (line.rfind("config_hash = ", 0) == 0)
        return std::stoull(line.substr(14), nullptr, 16);
    throw ConfigError(p.string() + ": manifest.txt lacks a config_hash line");
  }
  if (!fs::exists(p)) throw ConfigError("no such file: " + p.string());
  return hash_file(p);
}

// Worlds are accepted as a gen-world directory, a .tsgr grid, or a spec file.
TerrainGrid load_world_any(const fs::path& p) {
  if (fs::is_directory(p)) {
    fs::path g = p / "world.tsgr";
    if (!fs::exists(g))
      throw ConfigError(p.string() +
                        ": no world.tsgr inside — produce it with gen-world");
    return TerrainGrid::load(g.string());
  }
  if (!fs::exists(p)) throw ConfigError("no such world: " + p.string());
  if (p.extension() == ".tsgr") return TerrainGrid::load(p.string());
  return world_from_spec_file(p.string());
}

PolicyBundle load_policy_dir(const fs::path& dir) {
  if (!fs::exists(dir / "head.bin"))
    throw ConfigError(dir.string() +
                      ": no policy found — produce it with train-policy");
  return PolicyBundle::load(dir);
}

VisionModel load_vision_dir(const fs::path& dir) {
  if (!fs::exists(dir / "stats.bin"))
    throw ConfigError(dir.string() +
                      ": no vision model found — produce it with train-vision");
  return VisionModel::load(dir);
}

// Ordered fan-out: tasks write to disjoint outputs, joins preserve order.
void run_tasks(std::vector<std::function<void()>> tasks, int jobs) {
  if (jobs <= 1 || tasks.size() <= 1) {
    for (auto& t : tasks) t();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      std::size_t k = next.fetch_add(1);
      if (k >= tasks.size()) return;
      try {
        tasks[k]();
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  int n = std::min<int>(jobs, static_cast<int>(tasks.size()));
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

OperatingMode mode_from_name(const std::string& s, double payload_kg) {
  if (s == "free") return OperatingMode::free_walk();
  if (s == "drag" || s == "dragging") return OperatingMode::dragging(payload_kg);
  throw ConfigError("unknown mode '" + s + "' (expected free|drag)");
}

// ---------------------------------------------------------------- figures

std::string css_color(const Rgb& c) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

// Dense per-pixel heatmap of one predicted channel.
void save_heatmap_ppm(const DensePrediction& pred, bool mu_channel, double lo,
                      double hi, const fs::path& path) {
  Image img(pred.width, pred.height);
  for (int r = 0; r < pred.height; ++r)
    for (int c = 0; c < pred.width; ++c) {
      double v = mu_channel ? pred.mu_at(r, c) : pred.rough_at(r, c);
      img.at(r, c) = false_color((v - lo) / (hi - lo));
    }
  img.save_ppm(path.string());
}

struct Series {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> pts;
};

void save_line_chart(const fs::path& path, const std::string& title,
                     const std::string& xlabel, const std::string& ylabel,
                     const std::vector<Series>& series) {
  const double w = 640, h = 420, ml = 70, mr = 20, mt = 40, mb = 50;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series)
    for (auto [x, y] : s.pts) {
      x0 = std::min(x0, x); x1 = std::max(x1, x);
      y0 = std::min(y0, y); y1 = std::max(y1, y);
    }
  if (x0 > x1) { x0 = 0; x1 = 1; y0 = 0; y1 = 1; }
  if (x1 - x0 < 1e-12) { x0 -= 0.5; x1 += 0.5; }
  y0 = std::min(y0, 0.0);
  if (y1 - y0 < 1e-12) y1 = y0 + 1.0;
  y1 += 0.05 * (y1 - y0);
  auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (w - ml - mr); };
  auto py = [&](double y) { return h - mb - (y - y0) / (y1 - y0) * (h - mt - mb); };
  SvgWriter svg(w, h);
  svg.rect(0, 0, w, h, "#ffffff");
  svg.text(w / 2, mt - 16, title, 15, "#222", "middle");
  svg.line(ml, h - mb, w - mr, h - mb, "#444", 1.2);
  svg.line(ml, mt, ml, h - mb, "#444", 1.2);
  for (int i = 0; i <= 4; ++i) {
    double xv = x0 + i * (x1 - x0) / 4, yv = y0 + i * (y1 - y0) / 4;
    svg.line(px(xv), h - mb, px(xv), h - mb + 4, "#444", 1);
    svg.text(px(xv), h - mb + 18, fmt_num(std::round(xv * 1000) / 1000), 11,
             "#222", "middle");
    svg.line(ml - 4, py(yv), ml, py(yv), "#444", 1);
    svg.text(ml - 8, py(yv) + 4, fmt_num(std::round(yv * 1000) / 1000), 11,
             "#222", "end");
    svg.line(ml, py(yv), w - mr, py(yv), "#eee", 0.8);
  }
  svg.text(w / 2, h - 12, xlabel, 12, "#222", "middle");
  svg.text(16, mt - 16, ylabel, 12, "#222", "start");
  double ly = mt + 8;
  for (const auto& s : series) {
    std::vector<std::pair<double, double>> pts;
    for (auto [x, y] : s.pts) pts.emplace_back(px(x), py(y));
    svg.polyline(pts, s.color, 2.0);
    svg.line(w - mr - 150, ly, w - mr - 126, ly, s.color, 3);
    svg.text(w - mr - 120, ly + 4, s.label, 11);
    ly += 16;
  }
  svg.save(path.string());
}

void save_bar_chart(const fs::path& path, const std::string& title,
                    const std::string& ylabel,
                    const std::vector<std::pair<std::string, double>>& bars,
                    double baseline, const std::string& baseline_label) {
  const double w = 520, h = 380, ml = 70, mr = 20, mt = 46, mb = 60;
  double y1 = baseline;
  for (const auto& [_, v] : bars) y1 = std::max(y1, v);
  if (y1 <= 0) y1 = 1;
  y1 *= 1.1;
  auto py = [&](double y) { return h - mb - y / y1 * (h - mt - mb); };
  SvgWriter svg(w, h);
  svg.rect(0, 0, w, h, "#ffffff");
  svg.text(w / 2, mt - 18, title, 15, "#222", "middle");
  svg.line(ml, h - mb, w - mr, h - mb, "#444", 1.2);
  svg.line(ml, mt, ml, h - mb, "#444", 1.2);
  for (int i = 0; i <= 4; ++i) {
    double yv = i * y1 / 4;
    svg.line(ml - 4, py(yv), ml, py(yv), "#444", 1);
    svg.text(ml - 8, py(yv) + 4, fmt_num(std::round(yv * 1000) / 1000), 11,
             "#222", "end");
  }
  svg.text(16, mt - 18, ylabel, 12, "#222", "start");
  const char* palette[] = {"#4878d0", "#ee854a", "#6acc64", "#d65f5f"};
  double slot = (w - ml - mr) / bars.size();
  for (std::size_t i = 0; i < bars.size(); ++i) {
    double bx = ml + slot * (i + 0.2), bw = slot * 0.6;
    svg.rect(bx, py(bars[i].second), bw, h - mb - py(bars[i].second),
             palette[i % 4]);
    svg.text(bx + bw / 2, h - mb + 18, bars[i].first, 12, "#222", "middle");
    svg.text(bx + bw / 2, py(bars[i].second) - 6, fmt_num(std::round(bars[i].second * 1000) / 1000),
             11, "#222", "middle");
  }
  if (baseline > 0) {
    svg.line(ml, py(baseline), w - mr, py(baseline), "#888", 1.5);
    svg.text(w - mr - 4, py(baseline) - 6, baseline_label, 11, "#666", "end");
  }
  svg.save(path.string());
}

// Costmap heatmap with planned paths overlaid, one rect per map cell.
void save_route_svg(const fs::path& path, const CostMap& map,
                    const std::vector<std::pair<std::string, const Path*>>& paths,
                    GridCell start, GridCell goal) {
  const double cell = std::max(3.0, 560.0 / std::max(map.rows, map.cols));
  const double mt = 34, w = map.cols * cell, h = map.rows * cell + mt;
  double lo = 1e300, hi = -1e300;
  for (double v : map.cells)
    if (std::isfinite(v)) { lo = std::min(lo, v); hi = std::max(hi, v); }
  if (lo > hi) { lo = 0; hi = 1; }
  if (hi - lo < 1e-12) hi = lo + 1;
  SvgWriter svg(w, h);
  svg.rect(0, 0, w, h, "#ffffff");
  svg.text(6, 22, "cost map [" + fmt_num(lo) + ", " + fmt_num(hi) +
                      "] s/cell, mode " + map.mode_id, 13);
  for (int r = 0; r < map.rows; ++r)
    for (int c = 0; c < map.cols; ++c) {
      double v = map.at(r, c);
      std::string fill = std::isfinite(v)
                             ? css_color(false_color((v - lo) / (hi - lo)))
                             : std::string("#000000");
      svg.rect(c * cell, mt + r * cell, cell, cell, fill);
    }
  const char* stroke[] = {"#ffffff", "#ff3366"};
  const char* dash[] = {"", "6,4"};
  int k = 0;
  for (const auto& [label, p] : paths) {
    std::vector<std::pair<double, double>> pts;
    for (const GridCell& gc : p->cells)
      pts.emplace_back((gc.col + 0.5) * cell, mt + (gc.row + 0.5) * cell);
    svg.polyline(pts, stroke[k % 2], 2.5, dash[k % 2]);
    svg.text(6, 22 + 14 * (k + 1) - 2,
             label + ": total " + fmt_num(p->total) + " s", 11,
             k % 2 ? "#ff3366" : "#555555");
    ++k;
  }
  svg.circle((start.col + 0.5) * cell, mt + (start.row + 0.5) * cell, cell * 0.4,
             "#00d0ff");
  svg.circle((goal.col + 0.5) * cell, mt + (goal.row + 0.5) * cell, cell * 0.4,
             "#ffd000");
  svg.save(path.string());
}

// ---------------------------------------------------------------- stages

struct GenWorldArgs {
  std::string spec;
  double overhead_px_per_m = 10.0;
  std::uint64_t render_seed = 7;
};

Stage do_gen_world(const fs::path& root, const GenWorldArgs& a) {
  Config cfg = Config::load(a.spec);
  StageSpec sp;
  sp.label = "world";
  sp.add("spec_hash", std::to_string(fnv1a64(cfg.canonical())));
  sp.add("overhead_px_per_m", a.overhead_px_per_m);
  sp.add("render_seed", a.render_seed);
  Stage st = stage_begin(root, sp);
  if (st.reused) return st;
  TerrainGrid grid = world_from_config(cfg);
  grid.save((st.dir / "world.tsgr").string());
  Image overhead = render_texture(grid, a.overhead_px_per_m, a.render_seed);
  overhead.save_ppm((st.dir / "overhead.ppm").string());
  write_text(st.dir / "world_spec.txt", cfg.canonical());
  stage_finish(st, sp);
  return st;
}

struct TrainArgs {
  std::vector<std::string> worlds;
  std::string variant = "passive";
  std::uint64_t seed = 1;
  int iterations = 1500;
  int num_envs = 256;
  double sigma0 = 0.5;
  double sigma1 = 0.1;
  double anneal_frac = 0.35;
  std::string mode = "free";
  double payload_kg = 1.0;
};

Stage do_train_policy(const fs::path& root, const TrainArgs& a) {
  StageSpec sp;
  sp.label = "policy-" + a.variant;
  for (const auto& w : a.worlds)
    sp.add("world_hash", std::to_string(artifact_hash(w)));
  sp.add("variant", a.variant);
  sp.add("seed", a.seed);
  sp.add("iterations", static_cast<long>(a.iterations));
  sp.add("num_envs", static_cast<long>(a.num_envs));
  sp.add("sigma_floor_initial", a.sigma0);
  sp.add("sigma_floor_final", a.sigma1);
  sp.add("floor_anneal_frac", a.anneal_frac);
  sp.add("mode", a.mode);
  if (a.mode != "free") sp.add("payload_kg", a.payload_kg);
  Stage st = stage_begin(root, sp);
  if (st.reused) return st;

  std::vector<TerrainGrid> grids;
  for (const auto& w : a.worlds) grids.push_back(load_world_any(w));
  std::vector<const TerrainGrid*> gp;
  for (const auto& g : grids) gp.push_back(&g);

  TrainerConfig tc;
  tc.variant = variant_from_name(a.variant);
  tc.iterations = a.iterations;
  tc.seed = a.seed;
  tc.ppo.num_envs = a.num_envs;
  tc.ppo.log_std_min = std::log(a.sigma0);
  tc.ppo.log_std_min_final = std::log(a.sigma1);
  tc.ppo.floor_anneal_frac = a.anneal_frac;
  tc.mode = mode_from_name(a.mode, a.payload_kg);
  Trainer trainer(tc, gp);
  trainer.run();
  trainer.bundle().save(st.dir);
  save_curves(trainer.curves(), (st.dir / "curves.csv").string());
  write_text(st.dir / "faults.txt", std::to_string(trainer.fault_count()) + "\n");
  stage_finish(st, sp);
  return st;
}

struct EvalArgs {
  std::vector<std::string> policies;
  std::vector<std::string> worlds;
  int episodes = 12;
  std::uint64_t seed = 777;
};

Stage do_eval_estimator(const fs::path& root, const EvalArgs& a) {
  StageSpec sp;
  sp.label = "eval";
  for (const auto& p : a.policies)
    sp.add("policy_hash", std::to_string(artifact_hash(p)));
  for (const auto& w : a.worlds)
    sp.add("world_hash", std::to_string(artifact_hash(w)));
  sp.add("episodes", static_cast<long>(a.episodes));
  sp.add("seed", a.seed);
  Stage st = stage_begin(root, sp);
  if (st.reused) return st;

  std::vector<TerrainGrid> grids;
  for (const auto& w : a.worlds) grids.push_back(load_world_any(w));
  std::vector<const TerrainGrid*> gp;
  for (const auto& g : grids) gp.push_back(&g);

  std::ostringstream csv;
  csv << "variant,mse_mu,mse_rough,track_xy,energy,steps\n";
  double mu_var = 0, rough_var = 0;
  {  // constant-predictor baseline: per-cell parameter variance of the worlds
    double ms = 0, m2 = 0, rs = 0, r2 = 0;
    long n = 0;
    for (const auto& g : grids)
      for (int iy = 0; iy < g.height(); ++iy)
        for (int ix = 0; ix < g.width(); ++ix) {
          const Cell& c = g.cell(ix, iy);
          ms += c.mu; m2 += double(c.mu) * c.mu;
          rs += c.roughness; r2 += double(c.roughness) * c.roughness;
          ++n;
        }
    mu_var = m2 / n - (ms / n) * (ms / n);
    rough_var = r2 / n - (rs / n) * (rs / n);
  }
  for (const auto& p : a.policies) {
    PolicyBundle b = load_policy_dir(p);
    SimParams prm;
    EvalStats s = evaluate_policy(b, gp, a.episodes, prm,
                                  OperatingMode::free_walk(), {1.0, 0.0}, 0.0,
                                  a.seed);
    csv << variant_name(b.variant) << "," << fmt_num(s.mse_mu) << ","
        << fmt_num(s.mse_rough) << "," << fmt_num(s.track_xy) << ","
        << fmt_num(s.energy) << "," << s.steps << "\n";
  }
  csv << "baseline," << fmt_num(mu_var) << "," << fmt_num(rough_var)
      << ",0,0,0\n";
  write_text(st.dir / "est_mse.csv", csv.str());
  stage_finish(st, sp);
  return st;
}

struct CollectArgs {
  std::string policy;
  std::vector<std::string> worlds;
  double minutes = 1.0;
  std::uint64_t seed = 5;
  std::uint64_t render_seed = 7;
  bool oracle = false;
};

Stage do_collect_data(const fs::path& root, const CollectArgs& a) {
  StageSpec sp;
  sp.label = "dataset";
  sp.add("policy_hash", std::to_string(artifact_hash(a.policy)));
  for (const auto& w : a.worlds)
    sp.add("world_hash", std::to_string(artifact_hash(w)));
  sp.add("minutes", a.minutes);
  sp.add("seed", a.seed);
  sp.add("render_seed", a.render_seed);
  sp.add("oracle", a.oracle ? "1" : "0");
  Stage st = stage_begin(root, sp);
  if (st.reused) return st;

  std::vector<TerrainGrid> grids;
  for (const auto& w : a.worlds) grids.push_back(load_world_any(w));
  std::vector<const TerrainGrid*> gp;
  for (const auto& g : grids) gp.push_back(&g);
  PolicyBundle b = load_policy_dir(a.policy);
  DatasetConfig dc;
  dc.minutes = a.minutes;
  dc.seed = a.seed;
  dc.render_seed = a.render_seed;
  dc.oracle = a.oracle;
  PinholeCamera cam = PinholeCamera::mounted();
  std::vector<LabeledImage> frames = build_dataset(b, gp, cam, dc);
  save_dataset(frames, cam, st.dir.string());
  stage_finish(st, sp);
  return st;
}

struct TrainVisionArgs {
  std::string data;
  int epochs = 20;
  int batch = 64;
  double lr = 1e-3;
  std::uint64_t seed = 9;
};

Stage do_train_vision(const fs::path& root, const TrainVisionArgs& a) {
  StageSpec sp;
  sp.label = "vision";
  sp.add("dataset_hash", std::to_string(artifact_hash(a.data)));
  sp.add("epochs", static_cast<long>(a.epochs));
  sp.add("batch", static_cast<long>(a.batch));
  sp.add("lr", a.lr);
  sp.add("seed", a.seed);
  Stage st = stage_begin(root, sp);
  if (st.reused) return st;

  if (!fs::exists(fs::path(a.data) / "frames.csv"))
    throw ConfigError(a.data + ": no frames.csv — produce it with collect-data");
  std::vector<LabeledImage> frames = load_dataset(a.data);
  VisionTrainConfig vc;
  vc.epochs = a.epochs;
  vc.batch = a.batch;
  vc.lr = a.lr;
  vc.seed = a.seed;
  VisionCurves curves;
  VisionModel model = train_vision(frames, vc, &curves);
  model.save(st.dir);
  std::ostringstream csv;
  csv << "epoch,train_loss_mu,train_loss_rough\n";
  for (std::size_t e = 0; e < curves.mu.epoch_loss.size(); ++e)
    csv << e << "," << fmt_num(curves.mu.epoch_loss[e]) << ","
        << fmt_num(curves.rough.epoch_loss[e]) << "\n";
  write_text(st.dir / "train_curves.csv", csv.str());
  std::ostringstream sum;
  sum << "val_loss_mu = " << fmt_num(curves.mu.val_loss) << "\n"
      << "val_accuracy_mu = " << fmt_num(curves.mu.val_accuracy) << "\n"
      << "val_loss_rough = " << fmt_num(curves.rough.val_loss) << "\n"
      << "val_accuracy_rough = " << fmt_num(curves.rough.val_accuracy) << "\n"
      << "train_samples = " << curves.mu.train_samples << "\n"
      << "val_samples = " << curves.mu.val_samples << "\n";
  write_text(st.dir / "val_summary.txt", sum.str());
  stage_finish(st, sp);
  return st;
}

struct PredictArgs {
  std::string model;
  std::string image;
  std::string tag = "pred";
};

Stage do_predict(const fs::path& root, const PredictArgs& a) {
  StageSpec sp;
  sp.label = a.tag;
  sp.add("model_hash", std::to_string(artifact_hash(a.model)));
  sp.add("image_hash", std::to_string(artifact_hash(a.image)));
  Stage st = stage_begin(root, sp);
  if (st.reused) return st;

  VisionModel model = load_vision_dir(a.model);
  Image img = Image::load_ppm(a.image);
  DensePrediction pred = predict_dense(img, model);
  save_heatmap_ppm(pred, true, BinSpec::mu_bins().lo, BinSpec::mu_bins().hi,
                   st.dir / "pred_mu.ppm");
  save_heatmap_ppm(pred, false, BinSpec::rough_bins().lo,
                   BinSpec::rough_bins().hi, st.dir / "pred_rough.ppm");
  std::ostringstream mu_csv, rough_csv;
  mu_csv << "# patch-level predicted mu, " << pred.prows << " rows x "
         << pred.pcols << " cols (8 px patches)\n";
  rough_csv << "# patch-level predicted roughness, " << pred.prows
            << " rows x " << pred.pcols << " cols (8 px patches)\n";
  for (int r = 0; r < pred.prows; ++r) {
    for (int c = 0; c < pred.pcols; ++c) {
      mu_csv << (c ? "," : "") << fmt_num(pred.patch_mu[r * pred.pcols + c]);
      rough_csv << (c ? "," : "")
                << fmt_num(pred.patch_rough[r * pred.pcols + c]);
    }
    mu_csv << "\n";
    rough_csv << "\n";
  }
  write_text(st.dir / "pred_mu.csv", mu_csv.str());
  write_text(st.dir / "pred_rough.csv", rough_csv.str());
  stage_finish(st, sp);
  return st;
}

struct MeasureCostArgs {
  std::string policy;
  std::string mode = "free";
  double payload_kg = 1.0;
  int agents = 50;
  double horizon_s = 20.0;
  double rough = 0.3;
  std::uint64_t seed = 11;
};

Stage do_measure_cost(const fs::path& root, const MeasureCostArgs& a) {
  StageSpec sp;
  sp.label = "cost-" + a.mode;
  sp.add("policy_hash", std::to_string(artifact_hash(a.policy)));
  sp.add("mode", a.mode);
  if (a.mode != "free") sp.add("payload_kg", a.payload_kg);
  sp.add("agents", static_cast<long>(a.agents));
  sp.add("horizon_s", a.horizon_s);
  sp.add("rough", a.rough);
  sp.add("seed", a.seed);
  Stage st = stage_begin(root, sp);
  if (st.reused) return st;

  PolicyBundle b = load_policy_dir(a.policy);
  CostMeasureConfig cc;
  cc.n_agents = a.agents;
  cc.horizon_s = a.horizon_s;
  cc.rough = a.rough;
  cc.seed = a.seed;
  cc.policy_id = fs::path(a.policy).filename().string();
  OperatingMode mode = mode_from_name(a.mode, a.payload_kg);
  CostCurve curve =
      measure_cost_curve(b, mode, CostCurve::default_grid(), cc);
  save_curve(curve, (st.dir / "curve.csv").string());
  stage_finish(st, sp);
  return st;
}

struct PlanArgs {
  std::string map;    // direct costmap CSV; or build one from the trio below
  std::string model;
  std::string image;
  std::string curve;
  double meters_per_pixel = 0.1;
  int downsample = 4;
  std::vector<int> start{1, 1};
  std::vector<int> goal{-1, -1};  // -1 means "opposite corner"
  std::string tag = "plan";
};

Stage do_plan(const fs::path& root, const PlanArgs& a) {
  StageSpec sp;
  sp.label = a.tag;
  if (!a.map.empty()) {
    sp.add("map_hash", std::to_string(artifact_hash(a.map)));
  } else {
    if (a.model.empty() || a.image.empty() || a.curve.empty())
      throw ConfigError(
          "plan needs either --map, or all of --model/--image/--curve");
    sp.add("model_hash", std::to_string(artifact_hash(a.model)));
    sp.add("image_hash", std::to_string(artifact_hash(a.image)));
    sp.add("curve_hash", std::to_string(artifact_hash(a.curve)));
    sp.add("meters_per_pixel", a.meters_per_pixel);
    sp.add("downsample", static_cast<long>(a.downsample));
  }
  sp.add("start", std::to_string(a.start[0]) + " " + std::to_string(a.start[1]));
  sp.add("goal", std::to_string(a.goal[0]) + " " + std::to_string(a.goal[1]));
  Stage st = stage_begin(root, sp);
  if (st.reused) return st;

  CostMap map;
  if (!a.map.empty()) {
    map = load_cost_map(a.map);
  } else {
    VisionModel model = load_vision_dir(a.model);
    Image img = Image::load_ppm(a.image);
    DensePrediction pred = predict_dense(img, model);
    CostCurve curve = load_curve(a.curve);
    map = build_cost_map(pred, a.meters_per_pixel, curve, a.downsample);
    map.model_id = fs::path(a.model).filename().string();
    map.image_id = fs::path(a.image).filename().string();
    save_cost_map(map, (st.dir / "costmap.csv").string());
  }
  GridCell start{a.start[0], a.start[1]};
  GridCell goal{a.goal[0] < 0 ? map.rows - 2 : a.goal[0],
                a.goal[1] < 0 ? map.cols - 2 : a.goal[1]};
  Path path = astar(map, start, goal);
  if (!path.found)
    throw SimulationFault("no path between the requested cells");
  save_path(path, (st.dir / "path.csv").string());
  save_route_svg(st.dir / "route.svg", map, {{"astar", &path}}, start, goal);
  stage_finish(st, sp);
  return st;
}

// ---------------------------------------------------------------- run-all

// Locations of everything a full run produces, written to run_manifest.txt
// and consumed by emit-figures.
struct RunLayout {
  fs::path root;
  std::map<std::string, std::string> stages;  // logical name -> dir name

  fs::path dir(const std::string& name) const {
    auto it = stages.find(name);
    if (it == stages.end())
      throw ConfigError("run manifest lacks stage '" + name + "'");
    return root / it->second;
  }

  void save() const {
    std::ostringstream out;
    out << "tool = run-all\n";
    for (const auto& [k, v] : stages) out << "stage " << k << " = " << v << "\n";
    write_text(root / "run_manifest.txt", out.str());
  }

  static RunLayout load(const fs::path& root) {
    RunLayout lay;
    lay.root = root;
    std::ifstream in(root / "run_manifest.txt");
    if (!in)
      throw ConfigError(root.string() +
                        ": no run_manifest.txt — produce it with run-all");
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind("stage ", 0) != 0) continue;
      auto eq = line.find(" = ");
      if (eq == std::string::npos) continue;
      lay.stages[line.substr(6, eq - 6)] = line.substr(eq + 3);
    }
    return lay;
  }
};

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open " + p.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

void emit_figures(const RunLayout& lay) {
  struct Input {
    std::string name;
    fs::path path;
    std::string producer;
  };
  std::vector<Input> inputs = {
      {"est_mse", lay.dir("eval") / "est_mse.csv", "eval-estimator"},
      {"curve_free", lay.dir("cost-free") / "curve.csv", "measure-cost"},
      {"curve_drag", lay.dir("cost-drag") / "curve.csv", "measure-cost"},
      {"curves_nose", lay.dir("policy-nose") / "curves.csv", "train-policy"},
      {"curves_passive", lay.dir("policy-passive") / "curves.csv", "train-policy"},
      {"curves_active", lay.dir("policy-active") / "curves.csv", "train-policy"},
      {"pred_mu", lay.dir("pred-route") / "pred_mu.ppm", "predict"},
      {"pred_rough", lay.dir("pred-route") / "pred_rough.ppm", "predict"},
      {"costmap_free", lay.dir("plan-free") / "costmap.csv", "plan"},
      {"costmap_drag", lay.dir("plan-drag") / "costmap.csv", "plan"},
      {"path_free", lay.dir("plan-free") / "path.csv", "plan"},
      {"path_drag", lay.dir("plan-drag") / "path.csv", "plan"},
      {"route_overhead", lay.dir("route") / "overhead.ppm", "gen-world"},
  };
  std::string missing;
  for (const auto& i : inputs)
    if (!fs::exists(i.path))
      missing += "  " + i.path.string() + "  (produced by " + i.producer + ")\n";
  if (!missing.empty())
    throw ConfigError("emit-figures: missing inputs:\n" + missing);

  fs::path figs = lay.root / "figures";
  fs::create_directories(figs);

  {  // estimator MSE comparison
    std::vector<std::pair<std::string, double>> bars;
    double baseline = 0;
    for (const auto& row : read_csv(inputs[0].path)) {
      if (row[0] == "variant") continue;
      if (row[0] == "baseline") baseline = std::stod(row[1]);
      else bars.emplace_back(row[0], std::stod(row[1]));
    }
    save_bar_chart(figs / "est_mse.svg", "held-out friction estimation",
                   "mse", bars, baseline, "constant predictor");
  }
  {  // cost curves
    Series f{"free", "#4878d0", {}}, d{"dragging", "#d65f5f", {}};
    for (const auto& row : read_csv(inputs[1].path))
      if (row[0] != "mu") f.pts.emplace_back(std::stod(row[0]), std::stod(row[1]));
    for (const auto& row : read_csv(inputs[2].path))
      if (row[0] != "mu") d.pts.emplace_back(std::stod(row[0]), std::stod(row[1]));
    save_line_chart(figs / "cost_curves.svg", "traversal cost vs friction",
                    "friction coefficient", "seconds per meter", {f, d});
  }
  {  // training task-reward curves
    const char* colors[] = {"#4878d0", "#ee854a", "#6acc64"};
    const char* names[] = {"curves_nose", "curves_passive", "curves_active"};
    const char* labels[] = {"no-se", "passive-se", "active-se"};
    std::vector<Series> series;
    for (int v = 0; v < 3; ++v) {
      Series s{labels[v], colors[v], {}};
      for (const auto& row : read_csv(inputs[3 + v].path))
        if (row[0] != "iteration")
          s.pts.emplace_back(std::stod(row[0]), std::stod(row[1]));
      series.push_back(std::move(s));
    }
    save_line_chart(figs / "training_curves.svg", "velocity-tracking reward",
                    "iteration", "mean tracking term", series);
  }
  {  // route figure: dragging-mode map as background, both paths on top
    CostMap map = load_cost_map((lay.dir("plan-drag") / "costmap.csv").string());
    auto read_path = [](const fs::path& p) {
      Path out;
      out.found = true;
      for (const auto& row : read_csv(p)) {
        if (row[0] == "row") continue;
        out.cells.push_back(GridCell{std::stoi(row[0]), std::stoi(row[1])});
        out.total = std::stod(row[2]);
      }
      return out;
    };
    Path pf = read_path(inputs[10].path), pd = read_path(inputs[11].path);
    GridCell start = pf.cells.front(), goal = pf.cells.back();
    save_route_svg(figs / "route_plan.svg", map,
                   {{"free", &pf}, {"dragging", &pd}}, start, goal);
  }
  for (const char* n : {"pred_mu.ppm", "pred_rough.ppm"})
    fs::copy_file(lay.dir("pred-route") / n, figs / n,
                  fs::copy_options::overwrite_existing);
  std::printf("[done]  %s\n", figs.string().c_str());
}

void write_run_manifest_files(const fs::path& root) {
  // Append a deterministic inventory of every artifact to run_manifest.txt.
  std::vector<std::string> rels;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() != "run_manifest.txt")
      rels.push_back(fs::relative(e.path(), root).generic_string());
  std::sort(rels.begin(), rels.end());
  std::ofstream out(root / "run_manifest.txt", std::ios::app);
  for (const auto& r : rels) {
    std::uint64_t h = hash_file(root / r);
    out << "file " << hex12(h) << " " << r << "\n";
  }
}

void cmd_run_all(const std::string& config_path, const fs::path& root,
                 int jobs) {
  Config cfg = Config::load(config_path);
  fs::path base = fs::path(config_path).parent_path();
  fs::create_directories(root);
  RunLayout lay;
  lay.root = root;

  auto spec_path = [&](const ConfigSection& s) {
    fs::path p = s.get("spec");
    return (p.is_absolute() ? p : base / p).string();
  };

  // worlds
  const ConfigSection& ws = cfg.section("world");
  GenWorldArgs gw{spec_path(ws), ws.get_num_or("overhead_px_per_m", 10.0),
                  static_cast<std::uint64_t>(ws.get_int_or("render_seed", 7))};
  Stage world = do_gen_world(root, gw);
  lay.stages["world"] = world.dir.filename().string();

  const ConfigSection& rs = cfg.section("route");
  GenWorldArgs gr{spec_path(rs), rs.get_num_or("overhead_px_per_m", 10.0),
                  static_cast<std::uint64_t>(rs.get_int_or("render_seed", 7))};
  Stage route = do_gen_world(root, gr);
  lay.stages["route"] = route.dir.filename().string();

  // policies (three variants, identical hyperparameters)
  const ConfigSection& tr = cfg.section("train");
  TrainArgs base_train;
  base_train.worlds = {world.dir.string()};
  base_train.seed = static_cast<std::uint64_t>(tr.get_int_or("seed", 1));
  base_train.iterations = static_cast<int>(tr.get_int("iterations"));
  base_train.num_envs = static_cast<int>(tr.get_int_or("num_envs", 256));
  base_train.sigma0 = tr.get_num_or("sigma_floor_initial", 0.5);
  base_train.sigma1 = tr.get_num_or("sigma_floor_final", 0.1);
  base_train.anneal_frac = tr.get_num_or("floor_anneal_frac", 0.35);
  std::vector<Stage> pol(3);
  std::vector<std::function<void()>> tasks;
  const char* variants[] = {"nose", "passive", "active"};
  for (int v = 0; v < 3; ++v)
    tasks.push_back([&, v] {
      TrainArgs ta = base_train;
      ta.variant = variants[v];
      pol[v] = do_train_policy(root, ta);
    });
  run_tasks(std::move(tasks), jobs);
  for (int v = 0; v < 3; ++v)
    lay.stages[std::string("policy-") + variants[v]] =
        pol[v].dir.filename().string();

  // estimator comparison
  const ConfigSection& ev = cfg.section("eval");
  EvalArgs ea;
  for (const auto& p : pol) ea.policies.push_back(p.dir.string());
  ea.worlds = {world.dir.string()};
  ea.episodes = static_cast<int>(ev.get_int_or("episodes", 12));
  ea.seed = static_cast<std::uint64_t>(ev.get_int_or("seed", 777));
  Stage eval = do_eval_estimator(root, ea);
  lay.stages["eval"] = eval.dir.filename().string();

  // self-supervised data from the active policy, then the vision model
  const ConfigSection& ds = cfg.section("dataset");
  CollectArgs ca;
  ca.policy = pol[2].dir.string();
  ca.worlds = {world.dir.string()};
  ca.minutes = ds.get_num("minutes");
  ca.seed = static_cast<std::uint64_t>(ds.get_int_or("seed", 5));
  ca.render_seed = static_cast<std::uint64_t>(ds.get_int_or("render_seed", 7));
  Stage data = do_collect_data(root, ca);
  lay.stages["dataset"] = data.dir.filename().string();

  const ConfigSection& vi = cfg.section("vision");
  TrainVisionArgs va;
  va.data = data.dir.string();
  va.epochs = static_cast<int>(vi.get_int_or("epochs", 20));
  va.batch = static_cast<int>(vi.get_int_or("batch", 64));
  va.lr = vi.get_num_or("lr", 1e-3);
  va.seed = static_cast<std::uint64_t>(vi.get_int_or("seed", 9));
  Stage vision = do_train_vision(root, va);
  lay.stages["vision"] = vision.dir.filename().string();

  // dense predictions of both overheads (figures + planng input)
  PredictArgs pa;
  pa.model = vision.dir.string();
  pa.image = (world.dir / "overhead.ppm").string();
  pa.tag = "pred-world";
  Stage pw = do_predict(root, pa);
  lay.stages["pred-world"] = pw.dir.filename().string();
  pa.image = (route.dir / "overhead.ppm").string();
  pa.tag = "pred-route";
  Stage pr = do_predict(root, pa);
  lay.stages["pred-route"] = pr.dir.filename().string();

  // cost curves for the two modes (passive policy as the controller)
  const ConfigSection& co = cfg.section("cost");
  MeasureCostArgs mc;
  mc.policy = pol[1].dir.string();
  mc.agents = static_cast<int>(co.get_int_or("agents", 50));
  mc.horizon_s = co.get_num_or("horizon_s", 20.0);
  mc.rough = co.get_num_or("rough", 0.3);
  mc.payload_kg = co.get_num_or("payload_kg", 1.0);
  mc.seed = static_cast<std::uint64_t>(co.get_int_or("seed", 11));
  std::vector<Stage> costs(2);
  std::vector<std::function<void()>> ctasks;
  const char* modes[] = {"free", "drag"};
  for (int m = 0; m < 2; ++m)
    ctasks.push_back([&, m] {
      MeasureCostArgs ma = mc;
      ma.mode = modes[m];
      costs[m] = do_measure_cost(root, ma);
    });
  run_tasks(std::move(ctasks), jobs);
  lay.stages["cost-free"] = costs[0].dir.filename().string();
  lay.stages["cost-drag"] = costs[1].dir.filename().string();

  // mode-dependent routes over the route world
  const ConfigSection& pl = cfg.section("plan");
  double mpp = 1.0 / rs.get_num_or("overhead_px_per_m", 10.0);
  auto cell_nums = [&](const std::string& key, int dr, int dc) {
    std::vector<int> out{dr, dc};
    if (pl.has(key)) {
      auto v = pl.get_nums(key);
      if (v.size() != 2)
        throw ConfigError("plan " + key + " needs exactly 2 numbers");
      out = {static_cast<int>(v[0]), static_cast<int>(v[1])};
    }
    return out;
  };
  for (int m = 0; m < 2; ++m) {
    PlanArgs qa;
    qa.model = vision.dir.string();
    qa.image = (route.dir / "overhead.ppm").string();
    qa.curve = (costs[m].dir / "curve.csv").string();
    qa.meters_per_pixel = mpp;
    qa.downsample = static_cast<int>(pl.get_int_or("downsample", 4));
    qa.start = cell_nums("start", 1, 1);
    qa.goal = cell_nums("goal", -1, -1);
    qa.tag = std::string("plan-") + modes[m];
    Stage ps = do_plan(root, qa);
    lay.stages[qa.tag] = ps.dir.filename().string();
  }

  lay.save();
  emit_figures(lay);
  write_run_manifest_files(root);
  std::printf("[done]  %s\n", (root / "run_manifest.txt").string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"terrain-physics sensing pipeline"};
  app.require_subcommand(1);
  fs::path out_root = "out";
  int jobs = 1;
  app.add_option("--out", out_root, "output root directory")->capture_default_str();
  app.add_option("--jobs", jobs, "max concurrent stage workers")->capture_default_str();

  GenWorldArgs gw;
  auto* c_gw = app.add_subcommand("gen-world", "generate a terrain world from a spec");
  c_gw->fallthrough();
  c_gw->add_option("--spec", gw.spec, "world spec file")->required();
  c_gw->add_option("--overhead-px-per-m", gw.overhead_px_per_m)->capture_default_str();
  c_gw->add_option("--render-seed", gw.render_seed)->capture_default_str();

  TrainArgs ta;
  auto* c_tr = app.add_subcommand("train-policy", "train a locomotion policy variant");
  c_tr->fallthrough();
  c_tr->add_option("--world", ta.worlds, "world dir/.tsgr/spec (repeatable)")->required();
  c_tr->add_option("--variant", ta.variant, "nose|passive|active")->capture_default_str();
  c_tr->add_option("--seed", ta.seed)->capture_default_str();
  c_tr->add_option("--iterations", ta.iterations)->capture_default_str();
  c_tr->add_option("--num-envs", ta.num_envs)->capture_default_str();
  c_tr->add_option("--sigma-floor-initial", ta.sigma0)->capture_default_str();
  c_tr->add_option("--sigma-floor-final", ta.sigma1)->capture_default_str();
  c_tr->add_option("--floor-anneal-frac", ta.anneal_frac)->capture_default_str();
  c_tr->add_option("--mode", ta.mode, "free|drag")->capture_default_str();
  c_tr->add_option("--payload-kg", ta.payload_kg)->capture_default_str();

  EvalArgs ea;
  auto* c_ev = app.add_subcommand("eval-estimator", "held-out estimator comparison");
  c_ev->fallthrough();
  c_ev->add_option("--policy", ea.policies, "policy dir (repeatable)")->required();
  c_ev->add_option("--world", ea.worlds, "world dir/.tsgr/spec (repeatable)")->required();
  c_ev->add_option("--episodes", ea.episodes)->capture_default_str();
  c_ev->add_option("--seed", ea.seed)->capture_default_str();

  CollectArgs ca;
  auto* c_cd = app.add_subcommand("collect-data", "roll out a policy and project labels");
  c_cd->fallthrough();
  c_cd->add_option("--policy", ca.policy, "policy dir")->required();
  c_cd->add_option("--world", ca.worlds, "world dir/.tsgr/spec (repeatable)")->required();
  c_cd->add_option("--minutes", ca.minutes)->capture_default_str();
  c_cd->add_option("--seed", ca.seed)->capture_default_str();
  c_cd->add_option("--render-seed", ca.render_seed)->capture_default_str();
  c_cd->add_flag("--oracle", ca.oracle, "ground-truth labels and odometry");

  TrainVisionArgs va;
  auto* c_tv = app.add_subcommand("train-vision", "fit linear heads on projected labels");
  c_tv->fallthrough();
  c_tv->add_option("--data", va.data, "dataset dir")->required();
  c_tv->add_option("--epochs", va.epochs)->capture_default_str();
  c_tv->add_option("--batch", va.batch)->capture_default_str();
  c_tv->add_option("--lr", va.lr)->capture_default_str();
  c_tv->add_option("--seed", va.seed)->capture_default_str();

  PredictArgs pa;
  auto* c_pr = app.add_subcommand("predict", "dense per-pixel parameter prediction");
  c_pr->fallthrough();
  c_pr->add_option("--model", pa.model, "vision model dir")->required();
  c_pr->add_option("--image", pa.image, "PPM image")->required();

  MeasureCostArgs mc;
  auto* c_mc = app.add_subcommand("measure-cost", "rollout-measured cost curve");
  c_mc->fallthrough();
  c_mc->add_option("--policy", mc.policy, "policy dir")->required();
  c_mc->add_option("--mode", mc.mode, "free|drag")->capture_default_str();
  c_mc->add_option("--payload-kg", mc.payload_kg)->capture_default_str();
  c_mc->add_option("--agents", mc.agents)->capture_default_str();
  c_mc->add_option("--horizon-s", mc.horizon_s)->capture_default_str();
  c_mc->add_option("--rough", mc.rough)->capture_default_str();
  c_mc->add_option("--seed", mc.seed)->capture_default_str();

  PlanArgs qa;
  auto* c_pl = app.add_subcommand("plan", "build a cost map and plan a path");
  c_pl->fallthrough();
  c_pl->add_option("--map", qa.map, "existing costmap CSV");
  c_pl->add_option("--model", qa.model, "vision model dir");
  c_pl->add_option("--image", qa.image, "overhead PPM");
  c_pl->add_option("--curve", qa.curve, "cost curve CSV");
  c_pl->add_option("--mpp", qa.meters_per_pixel, "meters per pixel")->capture_default_str();
  c_pl->add_option("--downsample", qa.downsample)->capture_default_str();
  c_pl->add_option("--start", qa.start, "start row col")->expected(2);
  c_pl->add_option("--goal", qa.goal, "goal row col (-1 -1 = far corner)")->expected(2);

  std::string run_config, run_dir_opt;
  auto* c_ra = app.add_subcommand("run-all", "full pipeline from a config file");
  c_ra->fallthrough();
  c_ra->add_option("--config", run_config, "pipeline config")->required();

  auto* c_ef = app.add_subcommand("emit-figures", "render figures from a run-all directory");
  c_ef->fallthrough();
  c_ef->add_option("--run", run_dir_opt, "run-all output directory")->required();

  try {
    app.parse(argc, argv);
    if (c_gw->parsed()) do_gen_world(out_root, gw);
    else if (c_tr->parsed()) do_train_policy(out_root, ta);
    else if (c_ev->parsed()) do_eval_estimator(out_root, ea);
    else if (c_cd->parsed()) do_collect_data(out_root, ca);
    else if (c_tv->parsed()) do_train_vision(out_root, va);
    else if (c_pr->parsed()) do_predict(out_root, pa);
    else if (c_mc->parsed()) do_measure_cost(out_root, mc);
    else if (c_pl->parsed()) do_plan(out_root, qa);
    else if (c_ra->parsed()) cmd_run_all(run_config, out_root, jobs);
    else if (c_ef->parsed()) emit_figures(RunLayout::load(run_dir_opt));
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fault: %s\n", e.what());
    return 2;
  }
  return 0;
}
