// Policy-side domain types: the three training variants, the reward
// shaping, and the Gaussian action head. The estimator is a SEPARATE
// network whose outputs enter the policy as plain numbers — there is no
// backward path from policy loss into estimator parameters.
#pragma once

#include <array>
#include <cmath>
#include <string>

#include "terrasense/nn.hpp"
#include "terrasense/sim.hpp"

namespace terra {

enum class PolicyVariant { NoSE, PassiveSE, ActiveSE };

inline const char* variant_name(PolicyVariant v) {
  switch (v) {
    case PolicyVariant::NoSE: return "nose";
    case PolicyVariant::PassiveSE: return "passive";
    case PolicyVariant::ActiveSE: return "active";
  }
  return "?";
}

inline PolicyVariant variant_from_name(const std::string& s) {
  if (s == "nose" || s == "no-se") return PolicyVariant::NoSE;
  if (s == "passive" || s == "passive-se") return PolicyVariant::PassiveSE;
  if (s == "active" || s == "active-se") return PolicyVariant::ActiveSE;
  throw ConfigError("unknown policy variant '" + s + "'");
}

// Estimator output dimension: (mu, rough, dx/dt, dy/dt, confidence).
inline constexpr int kEstOut = 5;
inline constexpr int kEstIn = kHistory * kObsDim;  // 675

// Policy observes obs(27) plus, for the SE variants, the estimator head.
inline int policy_input_dim(PolicyVariant v) {
  return v == PolicyVariant::NoSE ? kObsDim : kObsDim + kEstOut;
}

struct EstimatorOutput {
  double mu = 0, rough = 0;
  Vec2 dx_dt;       // body-frame displacement rate, m/s
  double conf = 0;  // unsupervised auxiliary channel

  // Inference-time clamps; training losses always use raw values.
  EstimatorOutput clamped() const {
    EstimatorOutput o = *this;
    o.mu = clamp(o.mu, 0.25, 3.0);
    o.rough = clamp(o.rough, 0.0, 1.0);
    return o;
  }
};

struct RewardConfig {
  double w_track_xy = 1.0;
  double sigma_vxy = 0.25;
  double w_track_yaw = 0.5;
  double sigma_wz = 0.25;
  double w_swing_force = -4.0;
  double delta_cf = 0.001;  // per N^2: 1-exp(-delta|f|^2) half-saturates near 26 N
  double w_stance_slip = -4.0;
  double delta_cv = 1.0;    // per (m/s)^2
  double w_force_mag = -1e-4;
  double w_action_rate = -0.1;
  double w_action_curv = -0.1;
  double w_asmp = -1.0;     // ActiveSE only
};

struct RewardTerms {
  double total = 0;
  double track_xy = 0, track_yaw = 0;
  double swing_force = 0, stance_slip = 0, force_mag = 0;
  double action_rate = 0, action_curv = 0;
  double asmp = 0;
};

inline double action_sq_dist(const Action& a, const Action& b) {
  double d = 0;
  for (int i = 0; i < kNumFeet; ++i) {
    Vec2 e = a.u[i] - b.u[i];
    d += e.dot(e);
  }
  return d;
}

// Reward for one transition. `pre` is the state the action was applied to
// (swing-force uses its foot velocities), `post` the resulting state.
// e_err_sq = |e - e_hat_raw|^2 is only charged for ActiveSE.
inline RewardTerms compute_reward(const RewardConfig& cfg, const SimParams& prm,
                                  const RobotState& pre, const RobotState& post,
                                  const Action& a, const Action& a_prev,
                                  const Action& a_prev2,
                                  const ContactResult& contact, Vec2 v_cmd,
                                  double omega_cmd, double e_err_sq,
                                  bool active_se) {
  RewardTerms r;
  Vec2 v_err = post.v - v_cmd;
  r.track_xy = std::exp(-v_err.dot(v_err) / cfg.sigma_vxy);
  double w_err = post.omega - omega_cmd;
  r.track_yaw = std::exp(-w_err * w_err / cfg.sigma_wz);

  for (int i = 0; i < kNumFeet; ++i) {
    if (contact.stance[i]) {
      double s2 = contact.slip[i].dot(contact.slip[i]);
      r.stance_slip += 1.0 - std::exp(-cfg.delta_cv * s2);
      r.force_mag += contact.force[i].dot(contact.force[i]);
    } else {
      // force a swing foot WOULD exert: penalizes paddling in the air
      Vec2 f = (a.u[i] - foot_velocity(pre, prm, i)) * prm.k_t;
      r.swing_force += 1.0 - std::exp(-cfg.delta_cf * f.dot(f));
    }
  }
  r.action_rate = action_sq_dist(a, a_prev);
  r.action_curv = 0;
  for (int i = 0; i < kNumFeet; ++i) {
    Vec2 c = a_prev2.u[i] + a.u[i] - a_prev.u[i] * 2.0;
    r.action_curv += c.dot(c);
  }
  r.asmp = active_se ? e_err_sq : 0.0;

  r.total = cfg.w_track_xy * r.track_xy + cfg.w_track_yaw * r.track_yaw +
            cfg.w_swing_force * r.swing_force +
            cfg.w_stance_slip * r.stance_slip + cfg.w_force_mag * r.force_mag +
            cfg.w_action_rate * r.action_rate +
            cfg.w_action_curv * r.action_curv + cfg.w_asmp * r.asmp;
  return r;
}

// --- Gaussian head ---------------------------------------------------------
// State-independent learned log-std. Actions are sampled, THEN clamped;
// the log-prob is of the pre-clamp sample (squash-free convention).

inline constexpr double kLogStdInit = -0.6931471805599453;  // log(0.5)
inline constexpr double kLog2Pi = 1.8378770664093453;

template <typename T>
T gaussian_logp(const VecX<T>& mean, const VecX<T>& log_std,
                const VecX<T>& action) {
  T lp = 0;
  for (Eigen::Index d = 0; d < mean.size(); ++d) {
    T z = (action[d] - mean[d]) / std::exp(log_std[d]);
    lp += T(-0.5) * z * z - log_std[d] - T(0.5) * T(kLog2Pi);
  }
  return lp;
}

template <typename T>
T gaussian_entropy(const VecX<T>& log_std) {
  T h = 0;
  for (Eigen::Index d = 0; d < log_std.size(); ++d)
    h += log_std[d] + T(0.5) * (T(kLog2Pi) + T(1));
  return h;
}

}  // namespace terra
