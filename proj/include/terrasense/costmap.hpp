// Traversal cost: rollout-measured seconds-per-meter as a function of
// friction, one curve per operating mode, plus conversion of predicted
// friction maps into planner-ready cost grids.
#pragma once

#include <limits>
#include <sstream>

#include "terrasense/ppo.hpp"
#include "terrasense/vision.hpp"

namespace terra {

struct CostCurve {
  OperatingMode mode = OperatingMode::free_walk();
  std::vector<double> mu_grid;  // ascending
  std::vector<double> cost;     // seconds per meter at each grid value
  int n_agents = 0;
  double horizon_s = 0;
  std::string policy_id;

  // 12 uniform samples over the friction range: 0.25, 0.5, ..., 3.0
  static std::vector<double> default_grid() {
    std::vector<double> g(12);
    for (int i = 0; i < 12; ++i) g[i] = 0.25 + i * (3.0 - 0.25) / 11.0;
    return g;
  }

  void validate() const {
    if (mu_grid.size() < 2 || mu_grid.size() != cost.size())
      throw ConfigError("cost curve: need matching mu/cost arrays (>= 2)");
    for (std::size_t i = 1; i < mu_grid.size(); ++i)
      if (mu_grid[i] <= mu_grid[i - 1])
        throw ConfigError("cost curve: mu grid must be strictly ascending");
    for (double c : cost)
      if (!(c > 0) || !std::isfinite(c))
        throw ConfigError("cost curve: costs must be positive and finite");
  }
};

// Piecewise-linear interpolation, clamped to the end values outside the grid.
inline double cost_from_mu(double mu, const CostCurve& curve) {
  curve.validate();
  const auto& g = curve.mu_grid;
  if (mu <= g.front()) return curve.cost.front();
  if (mu >= g.back()) return curve.cost.back();
  auto hi = std::upper_bound(g.begin(), g.end(), mu);
  std::size_t k = static_cast<std::size_t>(hi - g.begin());
  double w = (mu - g[k - 1]) / (g[k] - g[k - 1]);
  return curve.cost[k - 1] * (1.0 - w) + curve.cost[k] * w;
}

struct CostMeasureConfig {
  int n_agents = 50;
  double horizon_s = 20.0;
  Vec2 v_cmd{1.0, 0.0};
  double rough = 0.3;        // measurement-world roughness (friction-only curves)
  double min_travel_m = 0.1; // below this an agent counts as stuck
  double cost_cap = 200.0;   // s/m ceiling for stuck agents
  double world_side_m = 24.0;
  SimParams sim;
  std::uint64_t seed = 1;
  std::string policy_id;
};

namespace detail {

inline TerrainGrid uniform_mu_world(double mu, double rough, double side_m,
                                    std::uint64_t seed) {
  TerrainClass c;
  c.id = 0;
  c.name = "measure";
  c.mu_lo = c.mu_hi = mu;
  c.rough_lo = c.rough_hi = rough;
  c.palette[0] = {90, 90, 90};
  c.palette[1] = {120, 120, 120};
  c.palette[2] = {150, 150, 150};
  c.texture_scale = 4.0;
  int n = std::max(4, static_cast<int>(side_m / 0.5));
  return TerrainGrid::generate({c}, {{0, 0, 0, side_m, side_m}}, n, n, 0.5,
                               seed);
}

// Net displacement of one deterministic (mean-action) rollout.
inline double rollout_displacement(const PolicyBundle& bundle,
                                   const TerrainGrid& grid,
                                   const CostMeasureConfig& cfg,
                                   OperatingMode mode, std::uint64_t env_id,
                                   bool* faulted) {
  Env env(&grid, mode, cfg.v_cmd, 0.0, cfg.sim, cfg.seed, env_id);
  const bool use_est = bundle.variant != PolicyVariant::NoSE;
  std::vector<float> hist(kEstIn);
  Vec2 start = env.state().p;
  *faulted = false;
  long steps = static_cast<long>(std::lround(cfg.horizon_s / cfg.sim.dt));
  for (long s = 0; s < steps && env.done() == Env::Done::Running; ++s) {
    env.history_flat(hist.data());
    MatX<float> pin(policy_input_dim(bundle.variant), 1);
    for (int k = 0; k < kObsDim; ++k)
      pin(k, 0) = static_cast<float>(env.obs().vec[k]);
    if (use_est) {
      EstimatorOutput eo = bundle.estimator_single(hist.data());
      EstimatorOutput ec = eo.clamped();
      pin(kObsDim + 0, 0) = static_cast<float>(ec.mu);
      pin(kObsDim + 1, 0) = static_cast<float>(ec.rough);
      pin(kObsDim + 2, 0) = static_cast<float>(eo.dx_dt.x);
      pin(kObsDim + 3, 0) = static_cast<float>(eo.dx_dt.y);
      pin(kObsDim + 4, 0) = static_cast<float>(eo.conf);
    }
    MatX<float> mean = bundle.policy.forward(pin);
    std::array<Vec2, kNumFeet> raw;
    for (int f = 0; f < kNumFeet; ++f)
      raw[f] = {mean(2 * f, 0), mean(2 * f + 1, 0)};
    auto out = env.step(Action::clamped(raw, cfg.sim.action_clamp));
    if (out.done == Env::Done::Fault) {
      *faulted = true;
      return 0.0;
    }
    if (out.done == Env::Done::OutOfBounds) break;
  }
  return (env.state().p - start).norm();
}

}  // namespace detail

// Mean seconds-per-meter at each friction grid value, measured by rolling
// the policy out on uniform-friction worlds. Stuck agents (< min_travel_m
// net displacement) contribute the cap instead of diverging.
inline CostCurve measure_cost_curve(const PolicyBundle& bundle,
                                    OperatingMode mode,
                                    const std::vector<double>& mu_grid,
                                    const CostMeasureConfig& cfg) {
  if (cfg.n_agents < 1) throw ConfigError("measure_cost_curve: n_agents < 1");
  if (cfg.horizon_s <= 0) throw ConfigError("measure_cost_curve: horizon <= 0");
  CostCurve curve;
  curve.mode = mode;
  curve.mu_grid = mu_grid;
  curve.n_agents = cfg.n_agents;
  curve.horizon_s = cfg.horizon_s;
  curve.policy_id = cfg.policy_id;
  const double floor_m = cfg.horizon_s / cfg.cost_cap;  // cap as a distance
  for (std::size_t gi = 0; gi < mu_grid.size(); ++gi) {
    TerrainGrid world = detail::uniform_mu_world(
        mu_grid[gi], cfg.rough, cfg.world_side_m, cfg.seed ^ (0xC0 + gi));
    double dist_sum = 0;
    for (int a = 0; a < cfg.n_agents; ++a) {
      double d = 0;
      bool faulted = true;
      for (int attempt = 0; attempt < 4 && faulted; ++attempt) {
        d = detail::rollout_displacement(
            bundle, world, cfg, mode,
            0x50000ULL + static_cast<std::uint64_t>(gi) * 1000 +
                static_cast<std::uint64_t>(a) +
                static_cast<std::uint64_t>(attempt) * 100000,
            &faulted);
      }
      if (faulted)
        throw SimulationFault("cost measurement kept faulting after 3 retries");
      dist_sum += std::max(d, floor_m);
    }
    curve.cost.push_back(cfg.horizon_s / (dist_sum / cfg.n_agents));
  }
  curve.validate();
  return curve;
}

inline const char* mode_name(const OperatingMode& m) {
  return m.kind == OperatingMode::FreeLocomotion ? "free" : "dragging";
}

inline void save_curve(const CostCurve& curve, const std::string& path) {
  curve.validate();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write cost curve: " + path);
  out << "# mode=" << mode_name(curve.mode)
      << " payload_kg=" << fmt_num(curve.mode.payload_mass)
      << " n_agents=" << curve.n_agents
      << " horizon_s=" << fmt_num(curve.horizon_s)
      << " policy=" << (curve.policy_id.empty() ? "-" : curve.policy_id)
      << "\n";
  out << "mu,seconds_per_meter\n";
  for (std::size_t i = 0; i < curve.mu_grid.size(); ++i)
    out << fmt_num(curve.mu_grid[i]) << "," << fmt_num(curve.cost[i]) << "\n";
}

inline CostCurve load_curve(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("missing cost curve: " + path +
                             " (produce it with measure-cost)");
  CostCurve curve;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string tok;
      while (meta >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
        if (k == "mode")
          curve.mode.kind = v == "dragging" ? OperatingMode::PayloadDragging
                                            : OperatingMode::FreeLocomotion;
        else if (k == "payload_kg")
          curve.mode.payload_mass = std::stod(v);
        else if (k == "n_agents")
          curve.n_agents = std::stoi(v);
        else if (k == "horizon_s")
          curve.horizon_s = std::stod(v);
        else if (k == "policy" && v != "-")
          curve.policy_id = v;
      }
      continue;
    }
    if (line.rfind("mu,", 0) == 0) continue;  // header
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ConfigError(path + ": malformed curve row: " + line);
    curve.mu_grid.push_back(std::stod(line.substr(0, comma)));
    curve.cost.push_back(std::stod(line.substr(comma + 1)));
  }
  curve.validate();
  return curve;
}

// --- cost maps -----------------------------------------------------------------

// Per-cell traversal cost in seconds (cost-per-meter times cell edge).
// +inf marks untraversable cells.
struct CostMap {
  int rows = 0, cols = 0;
  double cell_m = 1.0;
  std::vector<double> cells;  // row-major
  std::string model_id, image_id, mode_id;

  double at(int r, int c) const {
    return cells[static_cast<std::size_t>(r) * cols + c];
  }
  double& at(int r, int c) {
    return cells[static_cast<std::size_t>(r) * cols + c];
  }
  bool inside(int r, int c) const {
    return r >= 0 && r < rows && c >= 0 && c < cols;
  }
  void validate() const {
    if (rows <= 0 || cols <= 0 || cell_m <= 0)
      throw ConfigError("cost map: empty grid or non-positive cell size");
    if (cells.size() != static_cast<std::size_t>(rows) * cols)
      throw ConfigError("cost map: cell count mismatch");
    for (double c : cells)
      if (std::isnan(c) || c < 0)
        throw ConfigError("cost map: cells must be >= 0 or +inf");
  }
};

// Downsample a per-pixel friction map into a cost grid: each output cell
// averages the friction of the pixels it covers (partial edge blocks use
// the pixels present), then converts via the measured curve.
inline CostMap build_cost_map(const DensePrediction& pred,
                              double meters_per_pixel, const CostCurve& curve,
                              int downsample) {
  if (downsample < 1) throw ConfigError("build_cost_map: downsample < 1");
  if (meters_per_pixel <= 0)
    throw ConfigError("build_cost_map: meters_per_pixel must be positive");
  curve.validate();
  CostMap map;
  map.cell_m = meters_per_pixel * downsample;
  map.rows = (pred.height + downsample - 1) / downsample;
  map.cols = (pred.width + downsample - 1) / downsample;
  map.cells.resize(static_cast<std::size_t>(map.rows) * map.cols);
  map.mode_id = mode_name(curve.mode);
  for (int r = 0; r < map.rows; ++r)
    for (int c = 0; c < map.cols; ++c) {
      double mu_sum = 0;
      long n = 0;
      for (int pr = r * downsample;
           pr < std::min((r + 1) * downsample, pred.height); ++pr)
        for (int pc = c * downsample;
             pc < std::min((c + 1) * downsample, pred.width); ++pc) {
          mu_sum += pred.mu_at(pr, pc);
          ++n;
        }
      map.at(r, c) = cost_from_mu(mu_sum / n, curve) * map.cell_m;
    }
  map.validate();
  return map;
}

inline void save_cost_map(const CostMap& map, const std::string& path) {
  map.validate();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write cost map: " + path);
  out << "# rows=" << map.rows << " cols=" << map.cols
      << " cell_m=" << fmt_num(map.cell_m)
      << " mode=" << (map.mode_id.empty() ? "-" : map.mode_id)
      << " model=" << (map.model_id.empty() ? "-" : map.model_id)
      << " image=" << (map.image_id.empty() ? "-" : map.image_id) << "\n";
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      if (c) out << ",";
      double v = map.at(r, c);
      if (std::isinf(v))
        out << "inf";
      else
        out << fmt_num(v);
    }
    out << "\n";
  }
}

inline CostMap load_cost_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("missing cost map: " + path);
  CostMap map;
  std::string line;
  if (!std::getline(in, line) || line.empty() || line[0] != '#')
    throw ConfigError(path + ": cost map must start with a metadata line");
  {
    std::istringstream meta(line.substr(1));
    std::string tok;
    while (meta >> tok) {
      auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
      if (k == "rows") map.rows = std::stoi(v);
      else if (k == "cols") map.cols = std::stoi(v);
      else if (k == "cell_m") map.cell_m = std::stod(v);
      else if (k == "mode" && v != "-") map.mode_id = v;
      else if (k == "model" && v != "-") map.model_id = v;
      else if (k == "image" && v != "-") map.image_id = v;
    }
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    for (const std::string& f : split_csv_line(line))
      map.cells.push_back(f == "inf"
                              ? std::numeric_limits<double>::infinity()
                              : std::stod(f));
  }
  map.validate();
  return map;
}

}  // namespace terra
