#include <catch2/catch_amalgamated.hpp>

#include <cstdio>

#include "terrasense/sim.hpp"

using terra::Action;
using terra::Env;
using terra::OperatingMode;
using terra::Pcg32;
using terra::RobotState;
using terra::SimParams;
using terra::StepResult;
using terra::TerrainClass;
using terra::TerrainGrid;
using terra::Vec2;

namespace {

TerrainGrid uniform_world(double mu, double rough, double side_m = 30.0,
                          double cell = 0.5, std::uint64_t seed = 1) {
  TerrainClass c;
  c.id = 0;
  c.name = "uniform";
  c.mu_lo = c.mu_hi = mu;
  c.rough_lo = c.rough_hi = rough;
  c.palette[0] = {90, 90, 90};
  c.palette[1] = {120, 120, 120};
  c.palette[2] = {150, 150, 150};
  c.texture_scale = 4.0;
  int n = static_cast<int>(side_m / cell);
  return TerrainGrid::generate({c}, {{0, 0, 0, side_m, side_m}}, n, n, cell, seed);
}

RobotState centered_state(const TerrainGrid& g) {
  RobotState s;
  s.p = {g.extent_x() / 2, g.extent_y() / 2};
  return s;
}

}  // namespace

TEST_CASE("cone projection: 40 N demand on mu=0.5 yields 29.43 N and slip") {
  SimParams prm;
  REQUIRE(prm.stance_normal() == Catch::Approx(58.86).margin(1e-12));
  TerrainGrid g = uniform_world(0.5, 0.0);
  RobotState s = centered_state(g);  // phase 0 -> feet {0,3} stance
  Action a;
  a.u[0] = {2.0 / 3.0, 0.0};  // f_des = 60 * 2/3 = 40 N
  Pcg32 rng(1);
  StepResult r = terra::step(s, a, g, OperatingMode::free_walk(), prm, rng);

  REQUIRE(r.contact.stance[0]);
  REQUIRE(r.contact.saturated[0]);
  REQUIRE(r.contact.force[0].norm() == Catch::Approx(29.43).margin(1e-9));
  double f_des = prm.k_t * (2.0 / 3.0);
  REQUIRE(r.contact.slip[0].x ==
          Catch::Approx((f_des - 29.43) / prm.k_t).margin(1e-9));
  REQUIRE(r.contact.slip[0].y == Catch::Approx(0.0).margin(1e-12));
  // the other stance foot was left at u = 0 = its own velocity: no force
  REQUIRE(r.contact.stance[3]);
  REQUIRE_FALSE(r.contact.saturated[3]);
  REQUIRE(r.contact.force[3].norm() == 0.0);
}

TEST_CASE("equilibrium: tracking feet on smooth ground change nothing but the clock") {
  SimParams prm;
  TerrainGrid g = uniform_world(1.0, 0.0);
  RobotState s = centered_state(g);
  Action a = terra::perfect_tracking_action(s, prm);
  Pcg32 rng(2);
  StepResult r = terra::step(s, a, g, OperatingMode::free_walk(), prm, rng);
  REQUIRE(r.state.p.x == s.p.x);
  REQUIRE(r.state.p.y == s.p.y);
  REQUIRE(r.state.psi == s.psi);
  REQUIRE(r.state.v.x == 0.0);
  REQUIRE(r.state.v.y == 0.0);
  REQUIRE(r.state.omega == 0.0);
  REQUIRE(r.state.gait_phase ==
          Catch::Approx(prm.dt * prm.gait_freq).margin(1e-15));
  REQUIRE(r.state.step_count == s.step_count + 1);
}

TEST_CASE("step is deterministic given state, action and stream") {
  SimParams prm;
  TerrainGrid g = uniform_world(1.2, 0.6);
  RobotState s = centered_state(g);
  s.v = {0.7, -0.2};
  s.omega = 0.4;
  s.gait_phase = 0.62;
  Action a;
  for (int i = 0; i < terra::kNumFeet; ++i) a.u[i] = {0.9, -0.3};
  Pcg32 r1(77, 3), r2(77, 3);
  StepResult x = terra::step(s, a, g, OperatingMode::dragging(1.0), prm, r1);
  StepResult y = terra::step(s, a, g, OperatingMode::dragging(1.0), prm, r2);
  REQUIRE(x.state.p.x == y.state.p.x);
  REQUIRE(x.state.v.x == y.state.v.x);
  REQUIRE(x.state.omega == y.state.omega);
  for (int i = 0; i < terra::kObsDim; ++i)
    REQUIRE(x.obs.vec[i] == y.obs.vec[i]);
  for (int i = 0; i < terra::kNumFeet; ++i) {
    REQUIRE(x.contact.force[i].x == y.contact.force[i].x);
    REQUIRE(x.contact.slip[i].x == y.contact.slip[i].x);
  }
}

TEST_CASE("friction cone and slip-saturation equivalence on random steps") {
  SimParams prm;
  auto classes = terra::default_classes();
  std::vector<terra::Region> regions = {
      {0, 0, 0, 15, 15}, {1, 15, 0, 30, 15}, {2, 0, 15, 15, 30}, {3, 15, 15, 30, 30}};
  TerrainGrid g = TerrainGrid::generate(classes, regions, 60, 60, 0.5, 9);
  Pcg32 rng(12345);
  const double n_load = prm.stance_normal();

  for (int it = 0; it < 200000; ++it) {
    RobotState s;
    s.p = {rng.uniform(0.5, 29.5), rng.uniform(0.5, 29.5)};
    s.psi = rng.uniform(0, 2 * terra::kPi);
    s.v = {rng.uniform(-3, 3), rng.uniform(-3, 3)};
    s.omega = rng.uniform(-3, 3);
    s.gait_phase = rng.uniform();
    Action a;
    for (int i = 0; i < terra::kNumFeet; ++i)
      a.u[i] = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
    StepResult r = terra::step(s, a, g, OperatingMode::free_walk(), prm, rng);
    for (int i = 0; i < terra::kNumFeet; ++i) {
      if (!r.contact.stance[i]) {
        REQUIRE(r.contact.force[i].norm() == 0.0);
        continue;
      }
      Vec2 foot_world = s.p + terra::rotate(prm.foot_offset[i], s.psi);
      foot_world.x = terra::clamp(foot_world.x, 0.0, g.extent_x() - 1e-9);
      foot_world.y = terra::clamp(foot_world.y, 0.0, g.extent_y() - 1e-9);
      double mu = g.query_params(foot_world).first;
      REQUIRE(r.contact.force[i].norm() <= mu * n_load + 1e-9);
      double slip_mag = r.contact.slip[i].norm();
      if (r.contact.saturated[i])
        REQUIRE(slip_mag > 0.0);
      else
        REQUIRE(slip_mag == 0.0);
    }
  }
}

TEST_CASE("information property: swiping separates mu, tracking is blind") {
  SimParams prm;
  const double mus[] = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  auto mean_slip = [&](double mu, bool swipe) {
    TerrainGrid g = uniform_world(mu, 0.0);
    RobotState s = centered_state(g);
    Pcg32 rng(5);
    double acc = 0.0;
    int n = 0;
    for (int t = 0; t < 200; ++t) {
      Action a = swipe ? terra::swipe_action(s, prm)
                       : terra::perfect_tracking_action(s, prm);
      StepResult r = terra::step(s, a, g, OperatingMode::free_walk(), prm, rng);
      for (int i = 0; i < terra::kNumFeet; ++i)
        acc += r.contact.slip[i].norm();
      ++n;
      s = r.state;
    }
    return acc / n;
  };

  auto variance_over_mu = [&](bool swipe) {
    double m[6], mean = 0;
    for (int i = 0; i < 6; ++i) {
      m[i] = mean_slip(mus[i], swipe);
      mean += m[i] / 6.0;
    }
    double var = 0;
    for (double v : m) var += (v - mean) * (v - mean) / 6.0;
    return var;
  };

  REQUIRE(variance_over_mu(true) > 0.0);
  REQUIRE(variance_over_mu(false) < 1e-12);
}

TEST_CASE("energy analog: probing costs force, tracking is free") {
  SimParams prm;
  TerrainGrid g = uniform_world(1.0, 0.0);
  auto episode_energy = [&](bool swipe) {
    RobotState s = centered_state(g);
    Pcg32 rng(6);
    double e = 0;
    for (int t = 0; t < 500; ++t) {
      Action a = swipe ? terra::swipe_action(s, prm)
                       : terra::perfect_tracking_action(s, prm);
      StepResult r = terra::step(s, a, g, OperatingMode::free_walk(), prm, rng);
      e += r.contact.energy;
      s = r.state;
    }
    return e;
  };
  double e_swipe = episode_energy(true);
  double e_track = episode_energy(false);
  REQUIRE(e_track == 0.0);
  REQUIRE(e_swipe > e_track);
}

TEST_CASE("free walk at mu=1 tracks 1 m/s within 5%") {
  SimParams prm;
  TerrainGrid g = uniform_world(1.0, 0.1);
  RobotState s = centered_state(g);
  Pcg32 rng(8);
  double late_speed = 0;
  int late_n = 0;
  for (int t = 0; t < 1000; ++t) {
    Action a = terra::pd_tracking_action(s, prm, {1.0, 0.0});
    StepResult r = terra::step(s, a, g, OperatingMode::free_walk(), prm, rng);
    s = r.state;
    if (t >= 750) {
      late_speed += s.v.x;
      ++late_n;
    }
  }
  REQUIRE(late_speed / late_n == Catch::Approx(1.0).epsilon(0.05));
}

TEST_CASE("dragging: steady speed strictly decreases with mu") {
  SimParams prm;
  const double mus[] = {0.5, 1.5, 3.0};
  double mean_speed[3] = {0, 0, 0};
  for (int mi = 0; mi < 3; ++mi) {
    TerrainGrid g = uniform_world(mus[mi], 0.1);
    for (int seed = 0; seed < 50; ++seed) {
      RobotState s = centered_state(g);
      Pcg32 rng(100 + seed);
      double late = 0;
      int n = 0;
      for (int t = 0; t < 1000; ++t) {
        Action a = terra::pd_tracking_action(s, prm, {1.0, 0.0});
        StepResult r =
            terra::step(s, a, g, OperatingMode::dragging(1.0), prm, rng);
        s = r.state;
        if (t >= 500) {
          late += s.v.norm();
          ++n;
        }
      }
      mean_speed[mi] += late / n / 50.0;
    }
  }
  INFO("speeds " << mean_speed[0] << " " << mean_speed[1] << " " << mean_speed[2]);
  REQUIRE(mean_speed[0] > mean_speed[1]);
  REQUIRE(mean_speed[1] > mean_speed[2]);
}

TEST_CASE("payload sticks below the static threshold") {
  SimParams prm;
  TerrainGrid g = uniform_world(1.0, 0.0);
  RobotState s = centered_state(g);
  Pcg32 rng(3);
  // applied force 2 feet * 60 * 0.05 = 6 N < static limit 9.81 N
  Action weak;
  weak.u[0] = weak.u[3] = {0.05, 0.0};
  StepResult r = terra::step(s, weak, g, OperatingMode::dragging(1.0), prm, rng);
  REQUIRE(r.state.v.x == 0.0);
  REQUIRE(r.state.v.y == 0.0);
  // 24 N > 9.81 N: breaks loose
  Action strong;
  strong.u[0] = strong.u[3] = {0.2, 0.0};
  StepResult r2 = terra::step(s, strong, g, OperatingMode::dragging(1.0), prm, rng);
  REQUIRE(r2.state.v.x > 0.0);
}

TEST_CASE("env: reproducible resets, exact horizon, spawn margin") {
  SimParams prm;
  TerrainGrid g = uniform_world(1.0, 0.0);

  Env a(&g, OperatingMode::free_walk(), {1, 0}, 0.0, prm, 42, 7);
  Env b(&g, OperatingMode::free_walk(), {1, 0}, 0.0, prm, 42, 7);
  REQUIRE(a.state().p.x == b.state().p.x);
  REQUIRE(a.state().p.y == b.state().p.y);
  REQUIRE(a.state().psi == b.state().psi);

  // horizon: 20 s at 0.02 s -> exactly 1000 steps
  REQUIRE(prm.horizon_steps == 1000);
  Env walker(&g, OperatingMode::free_walk(), {0, 0}, 0.0, prm, 1, 0);
  for (int t = 0; t < 999; ++t) {
    auto out = walker.step(Action{});
    REQUIRE(out.done == Env::Done::Running);
  }
  auto out = walker.step(Action{});
  REQUIRE(out.done == Env::Done::Horizon);
  REQUIRE(walker.steps() == 1000);

  // spawn margin over 10^4 resets
  Env sweeper(&g, OperatingMode::free_walk(), {1, 0}, 0.0, prm, 99, 0);
  for (int i = 0; i < 10000; ++i) {
    sweeper.reset();
    const auto& p = sweeper.state().p;
    REQUIRE(p.x >= prm.spawn_margin);
    REQUIRE(p.x <= g.extent_x() - prm.spawn_margin);
    REQUIRE(p.y >= prm.spawn_margin);
    REQUIRE(p.y <= g.extent_y() - prm.spawn_margin);
  }

  // undersized world
  TerrainGrid tiny = uniform_world(1.0, 0.0, 1.5, 0.5);
  REQUIRE_THROWS_AS(
      Env(&tiny, OperatingMode::free_walk(), {1, 0}, 0.0, prm, 1, 0),
      terra::ConfigError);
}

TEST_CASE("env: observation noise varies per step, dimension fixed") {
  SimParams prm;
  TerrainGrid g = uniform_world(1.0, 0.0);
  Env env(&g, OperatingMode::free_walk(), {0, 0}, 0.0, prm, 11, 0);
  // standing still: noiseless channels would repeat; noise must not
  auto o1 = *env.step(Action{}).obs;
  auto o2 = *env.step(Action{}).obs;
  bool any_diff = false;
  for (int i = 0; i < terra::kObsDim; ++i)
    if (o1.vec[i] != o2.vec[i]) any_diff = true;
  REQUIRE(any_diff);
  REQUIRE(o1.vec.size() == 27);
}

TEST_CASE("trajectory log round-trips and exports csv") {
  SimParams prm;
  TerrainGrid g = uniform_world(1.0, 0.2);
  Env env(&g, OperatingMode::free_walk(), {1, 0}, 0.0, prm, 5, 0);
  terra::TrajectoryLog log;
  for (int t = 0; t < 50; ++t) {
    Action a = terra::pd_tracking_action(env.state(), prm, {1.0, 0.0});
    env.step(a);
    log.append(env, a);
  }
  const char* bin = "traj_test.tslg";
  const char* csv = "traj_test.csv";
  log.save(bin);
  terra::TrajectoryLog back = terra::TrajectoryLog::load(bin);
  REQUIRE(back.records.size() == log.records.size());
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    REQUIRE(back.records[i].step == log.records[i].step);
    REQUIRE(back.records[i].t == log.records[i].t);
    for (int k = 0; k < 7; ++k)
      REQUIRE(back.records[i].state[k] == log.records[i].state[k]);
    for (int k = 0; k < 27; ++k)
      REQUIRE(back.records[i].obs[k] == log.records[i].obs[k]);
    for (int k = 0; k < 24; ++k)
      REQUIRE(back.records[i].contact[k] == log.records[i].contact[k]);
  }
  back.export_csv(csv);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  REQUIRE(header.substr(0, 7) == "step,t,");
  std::remove(bin);
  std::remove(csv);
}
