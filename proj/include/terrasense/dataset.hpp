// Self-supervised data collection: run a trained policy, capture frames
// from the mounted camera at 5 fps, and label pixels along the traversal
// path with the robot's OWN estimates placed by its OWN odometry. Ground
// truth is carried alongside for evaluation only.
#pragma once

#include <cinttypes>
#include <cstdio>

#include "terrasense/camera.hpp"
#include "terrasense/config.hpp"
#include "terrasense/ppo.hpp"

namespace terra {

struct DatasetConfig {
  double minutes = 5.0;       // 5 fps -> 300 frames per minute
  int capture_every = 10;     // sim steps between frames (dt 0.02 -> 5 fps)
  double min_label_dist = 1.0;
  double max_label_dist = 5.0;
  bool oracle = false;        // ground-truth labels + odometry (diagnostics)
  std::uint64_t seed = 1;
  std::uint64_t render_seed = 1;
  SimParams sim;
  OperatingMode mode = OperatingMode::free_walk();
  Vec2 v_cmd{1.0, 0.0};
  double omega_cmd = 0.0;

  int target_frames() const {
    double fps = 1.0 / (sim.dt * capture_every);
    return static_cast<int>(std::lround(minutes * 60.0 * fps));
  }
};

// Deterministic (mean-action) rollouts; a faulting episode is dropped
// whole. Episodes round-robin over the given terrains until the frame
// budget is met.
inline std::vector<LabeledImage> build_dataset(
    const PolicyBundle& bundle, const std::vector<const TerrainGrid*>& grids,
    const PinholeCamera& cam, const DatasetConfig& cfg) {
  cam.validate();
  if (grids.empty()) throw ConfigError("build_dataset: no terrains");
  if (cfg.minutes <= 0 || cfg.capture_every <= 0)
    throw ConfigError("build_dataset: minutes and capture_every must be positive");
  const int want = cfg.target_frames();
  const bool use_est_input = bundle.variant != PolicyVariant::NoSE;
  std::vector<LabeledImage> out;
  out.reserve(want);
  std::vector<float> hist(kEstIn);

  for (int ep = 0; static_cast<int>(out.size()) < want; ++ep) {
    const TerrainGrid* grid = grids[ep % grids.size()];
    Env env(grid, cfg.mode, cfg.v_cmd, cfg.omega_cmd, cfg.sim, cfg.seed,
            0x30000ULL + static_cast<std::uint64_t>(ep));
    Pose2 start{env.state().p, env.state().psi};
    OdometryIntegrator odo(start);
    std::vector<TrackPoint> track;
    std::vector<std::size_t> captures;
    bool faulted = false;

    for (long j = 0; env.done() == Env::Done::Running; ++j) {
      env.history_flat(hist.data());
      EstimatorOutput eo = bundle.estimator_single(hist.data());
      EstimatorOutput ec = eo.clamped();

      if (j > 0)
        odo.advance(eo.dx_dt * cfg.sim.dt,
                    env.obs().vec[2] * cfg.sim.scale_omega, cfg.sim.dt);
      TrackPoint tp;
      tp.true_pose = {env.state().p, env.state().psi};
      tp.est_pose = j == 0 ? start : odo.pose();
      if (cfg.oracle) {
        auto [mu, rough] = env.true_params();
        tp.est_pose = tp.true_pose;
        tp.mu_hat = mu;
        tp.rough_hat = rough;
      } else {
        tp.mu_hat = ec.mu;
        tp.rough_hat = ec.rough;
      }
      tp.step = j;
      track.push_back(tp);
      if (j > 0 && j % cfg.capture_every == 0)
        captures.push_back(track.size() - 1);

      MatX<float> pin(policy_input_dim(bundle.variant), 1);
      for (int k = 0; k < kObsDim; ++k)
        pin(k, 0) = static_cast<float>(env.obs().vec[k]);
      if (use_est_input) {
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
      auto res = env.step(Action::clamped(raw, cfg.sim.action_clamp));
      if (res.done == Env::Done::Fault) {
        faulted = true;
        break;
      }
    }
    if (faulted) continue;  // drop the whole segment

    for (std::size_t c : captures) {
      if (static_cast<int>(out.size()) >= want) break;
      LabeledImage li;
      li.rgb = render_pinhole(*grid, cam, track[c].true_pose, cfg.render_seed);
      li.labels = project_traversal(track, c, cam, cfg.min_label_dist,
                                    cfg.max_label_dist);
      li.true_pose = track[c].true_pose;
      li.est_pose = track[c].est_pose;
      li.step = track[c].step;
      li.episode = ep;
      li.time_s = static_cast<double>(track[c].step) * cfg.sim.dt;
      out.push_back(std::move(li));
    }
  }
  return out;
}

// --- disk layout --------------------------------------------------------------
// <dir>/frames.csv                 one row per frame (poses, provenance)
// <dir>/frame_00000.ppm            P6 render
// <dir>/frame_00000_labels.csv     u,v,mu_hat,rough_hat,source_step
// <dir>/camera.cfg                 intrinsics + extrinsic

inline void save_camera(const PinholeCamera& cam, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write camera file: " + path);
  out << "[pinhole]\n";
  out << "fx = " << fmt_num(cam.fx) << "\nfy = " << fmt_num(cam.fy) << "\n";
  out << "cx = " << fmt_num(cam.cx) << "\ncy = " << fmt_num(cam.cy) << "\n";
  out << "width = " << cam.width << "\nheight = " << cam.height << "\n";
  auto line = [&](const char* k, const Vec3& v) {
    out << k << " = " << fmt_num(v.x) << " " << fmt_num(v.y) << " "
        << fmt_num(v.z) << "\n";
  };
  line("axis_right", cam.axis_right);
  line("axis_down", cam.axis_down);
  line("axis_optical", cam.axis_optical);
  line("center", cam.center);
}

inline PinholeCamera load_camera(const std::string& path) {
  Config cfg = Config::load(path);
  const ConfigSection& s = cfg.section("pinhole");
  PinholeCamera cam;
  cam.fx = s.get_num("fx");
  cam.fy = s.get_num("fy");
  cam.cx = s.get_num("cx");
  cam.cy = s.get_num("cy");
  cam.width = static_cast<int>(s.get_int("width"));
  cam.height = static_cast<int>(s.get_int("height"));
  auto vec3 = [&](const char* k) {
    std::vector<double> v = s.get_nums(k);
    if (v.size() != 3)
      throw ConfigError(path + ": " + k + " needs 3 numbers");
    return Vec3{v[0], v[1], v[2]};
  };
  cam.axis_right = vec3("axis_right");
  cam.axis_down = vec3("axis_down");
  cam.axis_optical = vec3("axis_optical");
  cam.center = vec3("center");
  cam.validate();
  return cam;
}

inline std::string frame_stem(int idx) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05d", idx);
  return buf;
}

inline void save_dataset(const std::vector<LabeledImage>& frames,
                         const PinholeCamera& cam, const std::string& dir) {
  std::filesystem::create_directories(dir);
  save_camera(cam, dir + "/camera.cfg");
  std::ofstream idx(dir + "/frames.csv");
  if (!idx) throw ConfigError("cannot write frames.csv in " + dir);
  idx << "frame,episode,step,time_s,true_x,true_y,true_yaw,est_x,est_y,"
         "est_yaw,labels\n";
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const LabeledImage& f = frames[i];
    std::string stem = frame_stem(static_cast<int>(i));
    f.rgb.save_ppm(dir + "/" + stem + ".ppm");
    std::ofstream lab(dir + "/" + stem + "_labels.csv");
    lab << "u,v,mu_hat,rough_hat,source_step\n";
    for (const PixelLabel& l : f.labels)
      lab << fmt_num(l.u) << "," << fmt_num(l.v) << "," << fmt_num(l.mu_hat)
          << "," << fmt_num(l.rough_hat) << "," << l.source_step << "\n";
    idx << i << "," << f.episode << "," << f.step << "," << fmt_num(f.time_s)
        << "," << fmt_num(f.true_pose.p.x) << "," << fmt_num(f.true_pose.p.y)
        << "," << fmt_num(f.true_pose.yaw) << "," << fmt_num(f.est_pose.p.x)
        << "," << fmt_num(f.est_pose.p.y) << "," << fmt_num(f.est_pose.yaw)
        << "," << f.labels.size() << "\n";
  }
}

inline std::vector<LabeledImage> load_dataset(const std::string& dir,
                                              PinholeCamera* cam_out = nullptr) {
  PinholeCamera cam = load_camera(dir + "/camera.cfg");
  if (cam_out) *cam_out = cam;
  std::ifstream idx(dir + "/frames.csv");
  if (!idx) throw ConfigError("missing frames.csv in " + dir +
                              " (produce it with collect-data)");
  std::string line;
  std::getline(idx, line);  // header
  std::vector<LabeledImage> out;
  while (std::getline(idx, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 11) throw ConfigError(dir + ": malformed frames.csv row");
    LabeledImage li;
    int frame = std::stoi(f[0]);
    li.episode = std::stoi(f[1]);
    li.step = std::stol(f[2]);
    li.time_s = std::stod(f[3]);
    li.true_pose = {{std::stod(f[4]), std::stod(f[5])}, std::stod(f[6])};
    li.est_pose = {{std::stod(f[7]), std::stod(f[8])}, std::stod(f[9])};
    std::string stem = frame_stem(frame);
    li.rgb = Image::load_ppm(dir + "/" + stem + ".ppm");
    std::ifstream lab(dir + "/" + stem + "_labels.csv");
    if (!lab) throw ConfigError(dir + ": missing labels for " + stem);
    std::string ll;
    std::getline(lab, ll);
    while (std::getline(lab, ll)) {
      if (ll.empty()) continue;
      auto g = split_csv_line(ll);
      if (g.size() != 5) throw ConfigError(dir + ": malformed label row");
      li.labels.push_back({std::stod(g[0]), std::stod(g[1]), std::stod(g[2]),
                           std::stod(g[3]), std::stol(g[4])});
    }
    out.push_back(std::move(li));
  }
  return out;
}

}  // namespace terra
