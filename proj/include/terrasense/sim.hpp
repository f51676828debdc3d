// Planar quadruped surrogate. Each foot is a force port governed by a
// Coulomb friction cone: commanding a tangential foot velocity u produces
// f_des = k_t (u - v_foot); the realized force is the cone projection of
// f_des, and the shortfall shows up as measurable slip. mu is observable
// ONLY through cone saturation — feet that track perfectly learn nothing.
// Roughness maps to per-foot disturbance-force intensity.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <string>
#include <vector>

#include "terrasense/common.hpp"
#include "terrasense/terrain.hpp"

namespace terra {

inline constexpr int kNumFeet = 4;
inline constexpr int kActionDim = 8;   // per-foot commanded velocity, xy
inline constexpr int kObsDim = 27;
inline constexpr int kHistory = 25;    // observation history given to the estimator

struct SimParams {
  double dt = 0.02;              // s
  double mass = 12.0;            // kg
  double k_t = 60.0;             // N·s/m, traction gain
  double c_d = 2.0;              // N·s/m, body drag
  double gait_freq = 2.0;        // Hz
  double gravity = 9.81;         // m/s^2
  double action_clamp = 1.5;     // m/s, per component
  double sigma_obs = 0.05;       // additive noise after normalization
  double rough_force_std = 20.0; // N per unit roughness, per foot axis
  double static_thresh = 0.01;   // m/s, payload sticks below this speed
  double inertia_z = 0.4;        // kg·m^2
  double c_yaw = 0.8;            // N·m·s, yaw damping
  double spawn_margin = 1.0;     // m
  int horizon_steps = 1000;      // 20 s at dt = 0.02

  // body-frame foot positions: FL, FR, RL, RR
  std::array<Vec2, kNumFeet> foot_offset = {
      Vec2{0.25, 0.15}, Vec2{0.25, -0.15}, Vec2{-0.25, 0.15},
      Vec2{-0.25, -0.15}};

  // fixed per-channel normalization applied before observation noise
  double scale_v = 1.0;
  double scale_omega = 1.0;
  double scale_accel = 5.0;
  double scale_action = 1.5;
  double scale_slip = 0.5;

  double stance_normal() const { return mass * gravity / 2.0; }  // N, trot: 2 feet down
};

struct RobotState {
  Vec2 p;                 // world position, m
  double psi = 0.0;       // yaw, rad
  Vec2 v;                 // body-frame velocity, m/s
  double omega = 0.0;     // yaw rate, rad/s
  double gait_phase = 0.0;
  long step_count = 0;

  bool finite() const {
    return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(psi) &&
           std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(omega) &&
           std::isfinite(gait_phase);
  }
};

struct Action {
  std::array<Vec2, kNumFeet> u{};  // body-frame commanded foot velocity

  static Action clamped(const std::array<Vec2, kNumFeet>& raw, double limit) {
    Action a;
    for (int i = 0; i < kNumFeet; ++i)
      a.u[i] = {clamp(raw[i].x, -limit, limit), clamp(raw[i].y, -limit, limit)};
    return a;
  }
};

struct ContactResult {
  std::array<Vec2, kNumFeet> force{};  // realized, body frame, N
  std::array<Vec2, kNumFeet> slip{};   // (f_des - f)/k_t, m/s
  std::array<bool, kNumFeet> stance{};
  std::array<bool, kNumFeet> saturated{};
  double energy = 0.0;                 // sum |f_i|^2 over stance feet this step
};

struct Observation {
  std::array<double, kObsDim> vec{};
};

struct OperatingMode {
  enum Kind { FreeLocomotion, PayloadDragging } kind = FreeLocomotion;
  double payload_mass = 1.0;  // kg, dragging only

  static OperatingMode free_walk() { return {FreeLocomotion, 0.0}; }
  static OperatingMode dragging(double mass_kg = 1.0) {
    return {PayloadDragging, mass_kg};
  }
};

// Trot schedule: diagonal pair {FL, RR} down in the first half of the
// cycle, {FR, RL} in the second.
inline std::array<bool, kNumFeet> stance_flags(double gait_phase) {
  bool first = gait_phase < 0.5;
  return {first, !first, !first, first};
}

// Body-frame velocity of foot i: v + omega x r
inline Vec2 foot_velocity(const RobotState& s, const SimParams& prm, int i) {
  const Vec2& r = prm.foot_offset[i];
  return {s.v.x - s.omega * r.y, s.v.y + s.omega * r.x};
}

struct StepResult {
  RobotState state;
  Observation obs;
  ContactResult contact;
  Vec2 accel;  // body-frame, this step (the g_xy observation channel)
};

// One dt of surrogate dynamics (semi-implicit Euler). Draw order from the
// stream is fixed — 8 disturbance draws, then 27 observation-noise draws —
// so paired comparisons across mu/mode variants stay aligned.
inline StepResult step(const RobotState& state, const Action& action,
                       const TerrainGrid& grid, const OperatingMode& mode,
                       const SimParams& prm, Pcg32& rng) {
  if (!state.finite())
    throw SimulationFault("step called with non-finite state");

  auto clamp_to_world = [&](Vec2 q) {
    return Vec2{clamp(q.x, 0.0, grid.extent_x() - 1e-9),
                clamp(q.y, 0.0, grid.extent_y() - 1e-9)};
  };

  std::array<Vec2, kNumFeet> rough_draw;
  for (auto& d : rough_draw) d = {rng.gaussian(), rng.gaussian()};

  ContactResult contact;
  contact.stance = stance_flags(state.gait_phase);

  const double n_load = prm.stance_normal();
  Vec2 force_sum{0, 0};
  double torque = 0.0;
  for (int i = 0; i < kNumFeet; ++i) {
    if (!contact.stance[i]) continue;
    Vec2 foot_world =
        clamp_to_world(state.p + rotate(prm.foot_offset[i], state.psi));
    auto [mu, rough] = grid.query_params(foot_world);

    Vec2 f_des = (action.u[i] - foot_velocity(state, prm, i)) * prm.k_t;
    double limit = mu * n_load;
    double mag = f_des.norm();
    Vec2 f = f_des;
    if (mag > limit) {
      f = f_des * (limit / mag);
      contact.saturated[i] = true;
    }
    contact.force[i] = f;
    contact.slip[i] = (f_des - f) * (1.0 / prm.k_t);
    contact.energy += f.dot(f);

    Vec2 noise = rough_draw[i] * (prm.rough_force_std * rough);
    Vec2 total = f + noise;
    force_sum += total;
    torque += prm.foot_offset[i].cross(total);
  }

  force_sum += state.v * -prm.c_d;

  if (mode.kind == OperatingMode::PayloadDragging) {
    auto [mu_body, rough_body] = grid.query_params(clamp_to_world(state.p));
    (void)rough_body;
    double limit = mu_body * mode.payload_mass * prm.gravity;
    double speed = state.v.norm();
    if (speed > prm.static_thresh) {
      force_sum += state.v * (-limit / speed);
    } else {
      // static friction: cancel the applied force up to the limit
      double applied = force_sum.norm();
      if (applied > 1e-12)
        force_sum += force_sum * (-std::min(limit, applied) / applied);
    }
  }

  Vec2 accel = force_sum * (1.0 / prm.mass);
  double alpha = (torque - prm.c_yaw * state.omega) / prm.inertia_z;

  RobotState next = state;
  next.v += accel * prm.dt;
  next.omega += alpha * prm.dt;
  next.psi += next.omega * prm.dt;
  next.p += rotate(next.v, state.psi) * prm.dt;
  next.gait_phase = std::fmod(state.gait_phase + prm.dt * prm.gait_freq, 1.0);
  next.step_count = state.step_count + 1;
  if (!next.finite())
    throw SimulationFault("non-finite state after step " +
                          std::to_string(state.step_count));

  // Observation: normalized channels + iid Gaussian noise on every channel.
  Observation obs;
  int k = 0;
  obs.vec[k++] = next.v.x / prm.scale_v;
  obs.vec[k++] = next.v.y / prm.scale_v;
  obs.vec[k++] = next.omega / prm.scale_omega;
  obs.vec[k++] = accel.x / prm.scale_accel;
  obs.vec[k++] = accel.y / prm.scale_accel;
  obs.vec[k++] = std::sin(2.0 * kPi * next.gait_phase);
  obs.vec[k++] = std::cos(2.0 * kPi * next.gait_phase);
  for (int i = 0; i < kNumFeet; ++i) {
    obs.vec[k++] = action.u[i].x / prm.scale_action;
    obs.vec[k++] = action.u[i].y / prm.scale_action;
  }
  for (int i = 0; i < kNumFeet; ++i) {
    obs.vec[k++] = contact.slip[i].x / prm.scale_slip;
    obs.vec[k++] = contact.slip[i].y / prm.scale_slip;
  }
  for (int i = 0; i < kNumFeet; ++i)
    obs.vec[k++] = contact.stance[i] ? 1.0 : 0.0;
  for (int i = 0; i < kObsDim; ++i) obs.vec[i] += prm.sigma_obs * rng.gaussian();

  return {next, obs, contact, accel};
}

// Scripted controllers used by tests and the cost-curve harness. -----------

// u = v_foot on every foot: zero desired force, zero slip, no information.
inline Action perfect_tracking_action(const RobotState& s, const SimParams& prm) {
  Action a;
  for (int i = 0; i < kNumFeet; ++i) a.u[i] = foot_velocity(s, prm, i);
  return a;
}

// Perfect tracking except one stance foot swiping at a constant command —
// the minimal probing behavior that makes mu observable.
inline Action swipe_action(const RobotState& s, const SimParams& prm,
                           Vec2 swipe_u = {1.5, 0.0}) {
  Action a = perfect_tracking_action(s, prm);
  auto st = stance_flags(s.gait_phase);
  for (int i = 0; i < kNumFeet; ++i)
    if (st[i]) {
      a.u[i] = swipe_u;
      break;
    }
  return a;
}

// Proportional velocity tracker: every stance foot commands its own
// velocity plus a correction toward the body command.
inline Action pd_tracking_action(const RobotState& s, const SimParams& prm,
                                 Vec2 v_cmd, double omega_cmd = 0.0,
                                 double gain = 1.0, double yaw_gain = 0.3) {
  Action raw;
  double yaw_corr = yaw_gain * (omega_cmd - s.omega);
  for (int i = 0; i < kNumFeet; ++i) {
    Vec2 vf = foot_velocity(s, prm, i);
    Vec2 u = vf + (v_cmd - s.v) * gain;
    // differential left/right command to steer yaw
    u.y += yaw_corr * prm.foot_offset[i].x;
    raw.u[i] = u;
  }
  return Action::clamped(raw.u, prm.action_clamp);
}

// Episodic wrapper owning the rng stream, observation history and
// bookkeeping. Instances are independent; stepping N envs in parallel is
// bit-identical to stepping them sequentially.
class Env {
 public:
  enum class Done { Running, Horizon, OutOfBounds, Fault };

  Env(const TerrainGrid* grid, OperatingMode mode, Vec2 v_cmd,
      double omega_cmd, const SimParams& prm, std::uint64_t seed,
      std::uint64_t env_id = 0)
      : grid_(grid), mode_(mode), v_cmd_(v_cmd), omega_cmd_(omega_cmd),
        prm_(prm), rng_(seed, env_id) {
    if (grid_->extent_x() < 2.0 || grid_->extent_y() < 2.0)
      throw ConfigError("env: world must be at least 2 m x 2 m");
    if (grid_->extent_x() <= 2.0 * prm_.spawn_margin ||
        grid_->extent_y() <= 2.0 * prm_.spawn_margin)
      throw ConfigError("env: world too small for spawn margin");
    reset();
  }

  const Observation& reset() {
    state_ = RobotState{};
    state_.p.x = rng_.uniform(prm_.spawn_margin,
                              grid_->extent_x() - prm_.spawn_margin);
    state_.p.y = rng_.uniform(prm_.spawn_margin,
                              grid_->extent_y() - prm_.spawn_margin);
    state_.psi = rng_.uniform(0.0, 2.0 * kPi);
    steps_ = 0;
    done_ = Done::Running;
    episode_energy_ = 0.0;
    obs_ = Observation{};
    last_contact_ = ContactResult{};
    last_accel_ = {0, 0};
    last_dx_body_ = {0, 0};
    history_.assign(kHistory, Observation{});
    spawn_ = state_;
    return obs_;
  }

  struct Out {
    const Observation* obs;
    const ContactResult* contact;
    Done done;
  };

  Out step(const Action& a) {
    if (done_ != Done::Running)
      throw SimulationFault("env stepped after episode end");
    Vec2 p_before = state_.p;
    double psi_before = state_.psi;
    StepResult r;
    try {
      r = terra::step(state_, a, *grid_, mode_, prm_, rng_);
    } catch (const SimulationFault&) {
      done_ = Done::Fault;
      return {&obs_, &last_contact_, done_};
    }
    state_ = r.state;
    obs_ = r.obs;
    last_contact_ = r.contact;
    last_accel_ = r.accel;
    episode_energy_ += r.contact.energy;
    // per-step displacement in the pre-step body frame (estimator target)
    last_dx_body_ = rotate(state_.p - p_before, -psi_before);
    history_.pop_front();
    history_.push_back(obs_);
    ++steps_;
    if (!grid_->inside(state_.p))
      done_ = Done::OutOfBounds;
    else if (steps_ >= prm_.horizon_steps)
      done_ = Done::Horizon;
    return {&obs_, &last_contact_, done_};
  }

  const RobotState& state() const { return state_; }
  const RobotState& spawn_state() const { return spawn_; }
  const Observation& obs() const { return obs_; }
  const ContactResult& last_contact() const { return last_contact_; }
  Vec2 last_accel() const { return last_accel_; }
  Vec2 last_dx_body() const { return last_dx_body_; }
  const OperatingMode& mode() const { return mode_; }
  Vec2 v_cmd() const { return v_cmd_; }
  double omega_cmd() const { return omega_cmd_; }
  const SimParams& params() const { return prm_; }
  const TerrainGrid& grid() const { return *grid_; }
  int steps() const { return steps_; }
  Done done() const { return done_; }
  double episode_energy() const { return episode_energy_; }

  // Ground truth e = (mu, roughness) under the body.
  std::pair<double, double> true_params() const {
    Vec2 q{clamp(state_.p.x, 0.0, grid_->extent_x() - 1e-9),
           clamp(state_.p.y, 0.0, grid_->extent_y() - 1e-9)};
    return grid_->query_params(q);
  }

  // Flattened 25-step observation history, oldest first (estimator input).
  void history_flat(float* out675) const {
    int k = 0;
    for (const Observation& o : history_)
      for (double v : o.vec) out675[k++] = static_cast<float>(v);
  }

 private:
  const TerrainGrid* grid_;
  OperatingMode mode_;
  Vec2 v_cmd_;
  double omega_cmd_;
  SimParams prm_;
  Pcg32 rng_;
  RobotState state_, spawn_;
  Observation obs_;
  ContactResult last_contact_;
  Vec2 last_accel_{0, 0};
  Vec2 last_dx_body_{0, 0};
  std::deque<Observation> history_;
  int steps_ = 0;
  Done done_ = Done::Running;
  double episode_energy_ = 0.0;
};

// --- trajectory log -------------------------------------------------------
// Fixed 280-byte little-endian records:
//   u32 step; f32 t; f32 state[7] (px py psi vx vy omega phase);
//   f32 action[8]; f32 obs[27]; f32 e[2] (mu rough);
//   f32 contact[24] (force xy ×4, slip xy ×4, stance ×4, saturated ×4)

struct TrajRecord {
  std::uint32_t step = 0;
  float t = 0;
  float state[7] = {};
  float action[8] = {};
  float obs[27] = {};
  float e[2] = {};
  float contact[24] = {};
};

class TrajectoryLog {
 public:
  void append(const Env& env, const Action& a) {
    TrajRecord r;
    const RobotState& s = env.state();
    r.step = static_cast<std::uint32_t>(s.step_count);
    r.t = static_cast<float>(s.step_count * env.params().dt);
    float st[7] = {float(s.p.x), float(s.p.y), float(s.psi), float(s.v.x),
                   float(s.v.y), float(s.omega), float(s.gait_phase)};
    std::copy(st, st + 7, r.state);
    for (int i = 0; i < kNumFeet; ++i) {
      r.action[2 * i] = static_cast<float>(a.u[i].x);
      r.action[2 * i + 1] = static_cast<float>(a.u[i].y);
    }
    for (int i = 0; i < kObsDim; ++i)
      r.obs[i] = static_cast<float>(env.obs().vec[i]);
    auto [mu, rough] = env.true_params();
    r.e[0] = static_cast<float>(mu);
    r.e[1] = static_cast<float>(rough);
    const ContactResult& c = env.last_contact();
    for (int i = 0; i < kNumFeet; ++i) {
      r.contact[2 * i] = static_cast<float>(c.force[i].x);
      r.contact[2 * i + 1] = static_cast<float>(c.force[i].y);
      r.contact[8 + 2 * i] = static_cast<float>(c.slip[i].x);
      r.contact[8 + 2 * i + 1] = static_cast<float>(c.slip[i].y);
      r.contact[16 + i] = c.stance[i] ? 1.0f : 0.0f;
      r.contact[20 + i] = c.saturated[i] ? 1.0f : 0.0f;
    }
    records.push_back(r);
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write trajectory log: " + path);
    out.write("TSLG", 4);
    std::uint32_t ver = 1;
    out.write(reinterpret_cast<const char*>(&ver), 4);
    std::uint64_t n = records.size();
    out.write(reinterpret_cast<const char*>(&n), 8);
    for (const auto& r : records) {
      out.write(reinterpret_cast<const char*>(&r.step), 4);
      out.write(reinterpret_cast<const char*>(&r.t), 4);
      out.write(reinterpret_cast<const char*>(r.state), 28);
      out.write(reinterpret_cast<const char*>(r.action), 32);
      out.write(reinterpret_cast<const char*>(r.obs), 108);
      out.write(reinterpret_cast<const char*>(r.e), 8);
      out.write(reinterpret_cast<const char*>(r.contact), 96);
    }
    if (!out) throw ConfigError("short write on trajectory log: " + path);
  }

  static TrajectoryLog load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open trajectory log: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "TSLG")
      throw ConfigError(path + ": not a TSLG log");
    std::uint32_t ver = 0;
    in.read(reinterpret_cast<char*>(&ver), 4);
    if (ver != 1) throw ConfigError(path + ": unsupported log version");
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    TrajectoryLog log;
    log.records.resize(n);
    for (auto& r : log.records) {
      in.read(reinterpret_cast<char*>(&r.step), 4);
      in.read(reinterpret_cast<char*>(&r.t), 4);
      in.read(reinterpret_cast<char*>(r.state), 28);
      in.read(reinterpret_cast<char*>(r.action), 32);
      in.read(reinterpret_cast<char*>(r.obs), 108);
      in.read(reinterpret_cast<char*>(r.e), 8);
      in.read(reinterpret_cast<char*>(r.contact), 96);
    }
    if (!in) throw ConfigError(path + ": truncated log");
    return log;
  }

  void export_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write csv: " + path);
    out << "step,t,px,py,psi,vx,vy,omega,gait_phase";
    for (int i = 0; i < 8; ++i) out << ",a" << i;
    for (int i = 0; i < kObsDim; ++i) out << ",obs" << i;
    out << ",mu,rough";
    for (int i = 0; i < kNumFeet; ++i)
      out << ",fx" << i << ",fy" << i;
    for (int i = 0; i < kNumFeet; ++i)
      out << ",sx" << i << ",sy" << i;
    for (int i = 0; i < kNumFeet; ++i) out << ",stance" << i;
    for (int i = 0; i < kNumFeet; ++i) out << ",sat" << i;
    out << "\n";
    for (const auto& r : records) {
      out << r.step << "," << fmt_num(r.t);
      for (float v : r.state) out << "," << fmt_num(v);
      for (float v : r.action) out << "," << fmt_num(v);
      for (float v : r.obs) out << "," << fmt_num(v);
      for (float v : r.e) out << "," << fmt_num(v);
      for (float v : r.contact) out << "," << fmt_num(v);
      out << "\n";
    }
  }

  std::vector<TrajRecord> records;
};

}  // namespace terra
