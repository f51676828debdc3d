// PPO with a concurrently supervised state estimator.
//
// Three parameter sets move here: the Gaussian policy (MLP mean +
// state-independent learned log-std), the value net, and the estimator.
// Policy/value learn from the clipped surrogate; the estimator learns by
// plain MSE on rollout data BETWEEN rollouts. The estimator's outputs
// reach the policy only as forwarded numbers (clamped), so no gradient
// ever crosses that junction.
#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <utility>
#include <vector>

#include "terrasense/policy.hpp"

namespace terra {

struct PpoConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  int rollout_steps = 21;
  int epochs = 5;
  int minibatches = 4;
  double entropy_coef = 0.01;
  double value_coef = 1.0;
  double clip = 0.2;
  double lr = 1e-3;
  bool reward_norm = true;
  int num_envs = 256;
  // Exploration-std schedule. Left to its own devices the learned std is
  // bistable under the penalty-heavy reward: it either collapses before
  // forward walking is discovered, or sticks high once a slow noisy gait
  // forms (entropy pressure plus a flat advantage keep it there, and the
  // noise in turn keeps fast walking unattractive). So the std is clamped to
  // the band [floor, floor + exp-gap], with the floor annealed geometrically
  // from exp(log_std_min) down to exp(log_std_min_final) across the first
  // floor_anneal_frac of training and held after. With the default gap of 0
  // the std follows the schedule exactly: every variant explores on the same
  // trajectory, high early (saturation events stay frequent, so their
  // signature is learnable) and low late (the gait can sharpen).
  double log_std_min = -0.6931471805599453;        // log(0.5)
  double log_std_min_final = -2.302585092994046;   // log(0.1)
  double floor_anneal_frac = 0.35;
  double log_std_gap = 0.0;

  void validate() const {
    if (gamma <= 0 || lambda <= 0 || rollout_steps <= 0 || epochs <= 0 ||
        minibatches <= 0 || entropy_coef < 0 || value_coef <= 0 || lr <= 0 ||
        num_envs <= 0)
      throw ConfigError("ppo config: all fields must be positive");
    if (clip <= 0 || clip >= 1)
      throw ConfigError("ppo config: clip must lie in (0, 1)");
    if (log_std_min > kLogStdInit)
      throw ConfigError("ppo config: log_std_min above the initial log-std");
    if (log_std_min_final > log_std_min)
      throw ConfigError("ppo config: final log-std floor above the initial");
    if (floor_anneal_frac < 0 || floor_anneal_frac > 1)
      throw ConfigError("ppo config: floor_anneal_frac must lie in [0, 1]");
    if (log_std_gap < 0)
      throw ConfigError("ppo config: log_std_gap must be non-negative");
  }
};

// Log-std floor in effect at iteration `it` of `total_iters`.
inline double annealed_log_floor(const PpoConfig& c, int it, int total_iters) {
  double span = c.floor_anneal_frac * total_iters;
  double a = span > 0 ? std::min(1.0, static_cast<double>(it) / span) : 1.0;
  return c.log_std_min + a * (c.log_std_min_final - c.log_std_min);
}

// GAE(lambda). `values` are V(s_t) for the rollout steps; `bootstrap` is
// V(s_T) used past the window when the last transition is not terminal.
inline void compute_gae(const std::vector<double>& rewards,
                        const std::vector<double>& values,
                        const std::vector<std::uint8_t>& dones, double gamma,
                        double lambda, double bootstrap,
                        std::vector<double>* advantages,
                        std::vector<double>* returns) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n)
    throw ConfigError("compute_gae: sequence length mismatch");
  advantages->assign(n, 0.0);
  returns->assign(n, 0.0);
  double adv = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    double not_done = dones[t] ? 0.0 : 1.0;
    double v_next = (t + 1 < n) ? values[t + 1] : bootstrap;
    double delta = rewards[t] + gamma * v_next * not_done - values[t];
    adv = delta + gamma * lambda * not_done * adv;
    (*advantages)[t] = adv;
    (*returns)[t] = adv + values[t];
  }
}

// Per-sample clipped surrogate objective (to be maximized).
inline double clipped_term(double rho, double adv, double eps) {
  double c = clamp(rho, 1.0 - eps, 1.0 + eps);
  return std::min(rho * adv, c * adv);
}

// Causal reward scaling: divide by the running std of the discounted
// return, computed from data seen BEFORE the sample being scaled.
class RewardNormalizer {
 public:
  RewardNormalizer(double gamma, int n_envs)
      : gamma_(gamma), ret_(n_envs, 0.0) {}

  double normalize(int env, double r, bool done) {
    double out = r / current_std();
    ret_[env] = gamma_ * ret_[env] + r;
    ++count_;
    double d = ret_[env] - mean_;
    mean_ += d / count_;
    m2_ += d * (ret_[env] - mean_);
    if (done) ret_[env] = 0.0;
    return out;
  }

  double current_std() const {
    if (count_ < 2) return 1.0;
    return std::sqrt(m2_ / count_ + 1e-8);
  }

 private:
  double gamma_;
  std::vector<double> ret_;
  long count_ = 0;
  double mean_ = 0.0, m2_ = 0.0;
};

// --- parameter bundle -------------------------------------------------------

struct PolicyBundle {
  PolicyVariant variant = PolicyVariant::PassiveSE;
  Mlp<float> policy;     // input_dim -> 8 action means
  Mlp<float> value;      // input_dim -> 1
  Mlp<float> estimator;  // 675 -> 5
  VecX<float> log_std;   // 8

  static PolicyBundle create(PolicyVariant v, Pcg32& rng) {
    PolicyBundle b;
    b.variant = v;
    int in = policy_input_dim(v);
    b.policy = Mlp<float>({in, 256, 256, kActionDim},
                          {Act::Tanh, Act::Tanh, Act::Identity});
    b.value = Mlp<float>({in, 256, 256, 1}, {Act::Tanh, Act::Tanh, Act::Identity});
    b.estimator = Mlp<float>({kEstIn, 128, 128, kEstOut},
                             {Act::Relu, Act::Relu, Act::Identity});
    b.policy.init(rng);
    b.policy.weights(2) *= 0.01f;  // start near-zero actions
    b.value.init(rng);
    b.estimator.init(rng);
    b.log_std = VecX<float>::Constant(kActionDim, float(kLogStdInit));
    return b;
  }

  EstimatorOutput estimator_single(const float* hist675) const {
    MatX<float> x = Eigen::Map<const MatX<float>>(hist675, kEstIn, 1);
    MatX<float> y = estimator.forward(x);
    EstimatorOutput o;
    o.mu = y(0, 0);
    o.rough = y(1, 0);
    o.dx_dt = {y(2, 0), y(3, 0)};
    o.conf = y(4, 0);
    return o;
  }

  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    policy.save((dir / "policy.tsnn").string());
    value.save((dir / "value.tsnn").string());
    estimator.save((dir / "estimator.tsnn").string());
    std::ofstream out(dir / "head.bin", std::ios::binary);
    if (!out) throw ConfigError("cannot write head.bin in " + dir.string());
    out.write("TSPM", 4);
    std::uint32_t ver = 1, var = static_cast<std::uint32_t>(variant),
                  dim = static_cast<std::uint32_t>(log_std.size());
    out.write(reinterpret_cast<const char*>(&ver), 4);
    out.write(reinterpret_cast<const char*>(&var), 4);
    out.write(reinterpret_cast<const char*>(&dim), 4);
    out.write(reinterpret_cast<const char*>(log_std.data()), dim * 4);
  }

  static PolicyBundle load(const std::filesystem::path& dir) {
    PolicyBundle b;
    b.policy = Mlp<float>::load((dir / "policy.tsnn").string());
    b.value = Mlp<float>::load((dir / "value.tsnn").string());
    b.estimator = Mlp<float>::load((dir / "estimator.tsnn").string());
    std::ifstream in(dir / "head.bin", std::ios::binary);
    if (!in) throw ConfigError("missing head.bin in " + dir.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "TSPM")
      throw ConfigError(dir.string() + ": bad head.bin");
    std::uint32_t ver = 0, var = 0, dim = 0;
    in.read(reinterpret_cast<char*>(&ver), 4);
    in.read(reinterpret_cast<char*>(&var), 4);
    in.read(reinterpret_cast<char*>(&dim), 4);
    if (ver != 1 || var > 2 || dim != kActionDim)
      throw ConfigError(dir.string() + ": bad head.bin fields");
    b.variant = static_cast<PolicyVariant>(var);
    b.log_std.resize(dim);
    in.read(reinterpret_cast<char*>(b.log_std.data()), dim * 4);
    if (!in) throw ConfigError(dir.string() + ": truncated head.bin");
    return b;
  }
};

// --- PPO update --------------------------------------------------------------

struct PpoBatch {           // one sample per column
  MatX<float> input;        // policy input
  MatX<float> actions;      // raw pre-clamp samples
  VecX<float> logp_old;
  VecX<float> advantages;   // raw; normalized inside the update
  VecX<float> returns;
};

struct PpoLosses {
  double policy_loss = 0, value_loss = 0, entropy = 0;
  double mean_ratio = 0, clip_fraction = 0;
};

struct PpoGrads {           // exposed for gradient-level tests
  VecX<float> policy;
  VecX<float> log_std;
  VecX<float> value;
};

inline PpoLosses ppo_update(Mlp<float>& policy, VecX<float>& log_std,
                            Mlp<float>& value, AdamState<float>& opt_policy,
                            AdamState<float>& opt_log_std,
                            AdamState<float>& opt_value, const PpoBatch& batch,
                            const PpoConfig& cfg, bool apply = true,
                            PpoGrads* grads_out = nullptr) {
  const Eigen::Index b_size = batch.input.cols();
  if (b_size == 0) throw ConfigError("ppo_update: empty batch");

  // per-batch advantage normalization
  VecX<float> adv = batch.advantages;
  float a_mean = adv.mean();
  float a_std = std::sqrt((adv.array() - a_mean).square().sum() /
                              static_cast<float>(b_size) +
                          1e-8f);
  adv = (adv.array() - a_mean) / a_std;

  typename Mlp<float>::Cache pc, vc;
  MatX<float> mean = policy.forward(batch.input, &pc);
  MatX<float> val = value.forward(batch.input, &vc);

  VecX<float> sigma = log_std.array().exp();
  PpoLosses losses;
  losses.entropy = gaussian_entropy<float>(log_std);

  MatX<float> dmean = MatX<float>::Zero(kActionDim, b_size);
  VecX<float> dlogstd = VecX<float>::Zero(kActionDim);
  const float inv_b = 1.0f / static_cast<float>(b_size);
  long clipped = 0;

  for (Eigen::Index c = 0; c < b_size; ++c) {
    float lp_new = 0;
    for (int d = 0; d < kActionDim; ++d) {
      float z = (batch.actions(d, c) - mean(d, c)) / sigma[d];
      lp_new += -0.5f * z * z - log_std[d] - 0.5f * float(kLog2Pi);
    }
    float rho = std::exp(lp_new - batch.logp_old[c]);
    float a = adv[c];
    losses.policy_loss -= clipped_term(rho, a, cfg.clip) * inv_b;
    losses.mean_ratio += rho * inv_b;

    bool clipped_off = (a > 0 && rho > 1 + cfg.clip) ||
                       (a < 0 && rho < 1 - cfg.clip);
    if (clipped_off) {
      ++clipped;
      continue;  // gradient of the clipped branch is zero
    }
    float g = -a * rho * inv_b;  // dL/d lp_new
    for (int d = 0; d < kActionDim; ++d) {
      float z = (batch.actions(d, c) - mean(d, c)) / sigma[d];
      dmean(d, c) = g * z / sigma[d];
      dlogstd[d] += g * (z * z - 1.0f);
    }
  }
  losses.clip_fraction = double(clipped) * inv_b;
  losses.policy_loss -= cfg.entropy_coef * losses.entropy;
  dlogstd.array() -= static_cast<float>(cfg.entropy_coef);  // d(-c*H)/dlogstd

  VecX<float> verr = (val.row(0).transpose() - batch.returns);
  losses.value_loss =
      cfg.value_coef * verr.array().square().sum() * inv_b;
  MatX<float> dval = (2.0f * static_cast<float>(cfg.value_coef) * inv_b) *
                     verr.transpose();

  if (!std::isfinite(losses.policy_loss) || !std::isfinite(losses.value_loss))
    throw SimulationFault(
        "ppo_update: non-finite loss (policy " + fmt_num(losses.policy_loss) +
        ", value " + fmt_num(losses.value_loss) + ", batch " +
        std::to_string(b_size) + ")");

  VecX<float> gp = VecX<float>::Zero(policy.param_count());
  VecX<float> gv = VecX<float>::Zero(value.param_count());
  policy.backward(pc, dmean, gp);
  value.backward(vc, dval, gv);

  if (grads_out) {
    grads_out->policy = gp;
    grads_out->log_std = dlogstd;
    grads_out->value = gv;
  }
  if (apply) {
    opt_policy.step(policy.params(), gp, static_cast<float>(cfg.lr));
    opt_log_std.step(log_std, dlogstd, static_cast<float>(cfg.lr));
    log_std = log_std.cwiseMax(static_cast<float>(cfg.log_std_min))
                  .cwiseMin(static_cast<float>(cfg.log_std_min + cfg.log_std_gap));
    opt_value.step(value.params(), gv, static_cast<float>(cfg.lr));
  }
  return losses;
}

// --- estimator update --------------------------------------------------------

struct EstLosses {
  double mse_mu = 0, mse_rough = 0, mse_dx = 0;
  double total() const { return mse_mu + mse_rough + mse_dx; }
};

// Supervised MSE on (mu, rough, dx/dt); the 5th (confidence) output gets
// no gradient. Touches only estimator parameters by construction.
inline EstLosses estimator_update(Mlp<float>& est, AdamState<float>& opt,
                                  const MatX<float>& hist,
                                  const MatX<float>& targets, double lr,
                                  bool apply = true) {
  const Eigen::Index b_size = hist.cols();
  if (targets.cols() != b_size || targets.rows() != 4)
    throw ConfigError("estimator_update: bad target shape");
  typename Mlp<float>::Cache cache;
  MatX<float> y = est.forward(hist, &cache);
  const float inv_b = 1.0f / static_cast<float>(b_size);
  MatX<float> dy = MatX<float>::Zero(kEstOut, b_size);
  EstLosses l;
  for (Eigen::Index c = 0; c < b_size; ++c) {
    for (int d = 0; d < 4; ++d) {
      float e = y(d, c) - targets(d, c);
      dy(d, c) = 2.0f * e * inv_b;
      double sq = double(e) * e * inv_b;
      if (d == 0) l.mse_mu += sq;
      else if (d == 1) l.mse_rough += sq;
      else l.mse_dx += sq;
    }
  }
  if (!std::isfinite(l.total()))
    throw SimulationFault("estimator_update: non-finite loss");
  VecX<float> g = VecX<float>::Zero(est.param_count());
  est.backward(cache, dy, g);
  if (apply) opt.step(est.params(), g, static_cast<float>(lr));
  return l;
}

// --- trainer -----------------------------------------------------------------

struct TrainerConfig {
  PolicyVariant variant = PolicyVariant::PassiveSE;
  PpoConfig ppo;
  RewardConfig reward;
  SimParams sim;
  OperatingMode mode = OperatingMode::free_walk();
  Vec2 v_cmd{1.0, 0.0};
  double omega_cmd = 0.0;
  int iterations = 300;
  int est_minibatches = 4;
  std::uint64_t seed = 1;
};

struct CurveRow {
  int iteration = 0;
  double task_reward = 0;  // mean xy velocity-tracking term
  double est_mse_mu = 0;
  double est_mse_rough = 0;
  double energy = 0;       // mean per-step sum |f|^2
};

inline void save_curves(const std::vector<CurveRow>& rows,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write curves: " + path);
  out << "iteration,task_reward,est_mse_mu,est_mse_rough,energy\n";
  for (const auto& r : rows)
    out << r.iteration << "," << fmt_num(r.task_reward) << ","
        << fmt_num(r.est_mse_mu) << "," << fmt_num(r.est_mse_rough) << ","
        << fmt_num(r.energy) << "\n";
}

class Trainer {
 public:
  Trainer(const TrainerConfig& cfg, std::vector<const TerrainGrid*> grids)
      : cfg_(cfg), grids_(std::move(grids)), rng_(cfg.seed, 0x7472) {
    cfg_.ppo.validate();
    if (grids_.empty()) throw ConfigError("trainer: no terrains given");
    require_two_mu_values();
    bundle_ = PolicyBundle::create(cfg_.variant, rng_);
    opt_policy_ = AdamState<float>(bundle_.policy.param_count());
    opt_value_ = AdamState<float>(bundle_.value.param_count());
    opt_log_std_ = AdamState<float>(kActionDim);
    opt_est_ = AdamState<float>(bundle_.estimator.param_count());
    const int n = cfg_.ppo.num_envs;
    envs_.reserve(n);
    for (int i = 0; i < n; ++i)
      envs_.emplace_back(grids_[i % grids_.size()], cfg_.mode, cfg_.v_cmd,
                         cfg_.omega_cmd, cfg_.sim, cfg_.seed,
                         static_cast<std::uint64_t>(i));
    prev_a_.assign(n, Action{});
    prev2_a_.assign(n, Action{});
    normalizer_ = std::make_unique<RewardNormalizer>(cfg_.ppo.gamma, n);
  }

  void run() {
    for (int it = 0; it < cfg_.iterations; ++it) iterate();
  }

  void iterate() {
    const int n = cfg_.ppo.num_envs;
    const int t_steps = cfg_.ppo.rollout_steps;
    const int total = n * t_steps;
    const int in_dim = policy_input_dim(cfg_.variant);
    const bool use_est_input = cfg_.variant != PolicyVariant::NoSE;
    const bool active = cfg_.variant == PolicyVariant::ActiveSE;

    MatX<float> batch_in(in_dim, total), batch_act(kActionDim, total);
    VecX<float> batch_logp(total);
    std::vector<double> raw_rewards(total), values(total);
    std::vector<std::uint8_t> dones(total);
    MatX<float> est_hist(kEstIn, total), est_targets(4, total);

    MatX<float> obs_mat(kObsDim, n), hist_mat(kEstIn, n);
    MatX<float> pin(in_dim, n);
    VecX<float> sigma = bundle_.log_std.array().exp();

    double sum_track = 0, sum_energy = 0;

    for (int t = 0; t < t_steps; ++t) {
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < kObsDim; ++k)
          obs_mat(k, i) = static_cast<float>(envs_[i].obs().vec[k]);
        envs_[i].history_flat(hist_mat.col(i).data());
      }
      MatX<float> est_out;
      if (use_est_input || active)
        est_out = bundle_.estimator.forward(hist_mat);

      pin.topRows(kObsDim) = obs_mat;
      if (use_est_input) {
        for (int i = 0; i < n; ++i) {
          pin(kObsDim + 0, i) = clamp(est_out(0, i), 0.25f, 3.0f);
          pin(kObsDim + 1, i) = clamp(est_out(1, i), 0.0f, 1.0f);
          pin(kObsDim + 2, i) = est_out(2, i);
          pin(kObsDim + 3, i) = est_out(3, i);
          pin(kObsDim + 4, i) = est_out(4, i);
        }
      }
      MatX<float> means = bundle_.policy.forward(pin);
      MatX<float> vals = bundle_.value.forward(pin);

      for (int i = 0; i < n; ++i) {
        const int k = t * n + i;
        // decision-time supervision targets, read before stepping
        auto [mu_true, rough_true] = envs_[i].true_params();
        est_hist.col(k) = hist_mat.col(i);
        Vec2 dx_rate = envs_[i].last_dx_body() * (1.0 / cfg_.sim.dt);
        est_targets(0, k) = static_cast<float>(mu_true);
        est_targets(1, k) = static_cast<float>(rough_true);
        est_targets(2, k) = static_cast<float>(dx_rate.x);
        est_targets(3, k) = static_cast<float>(dx_rate.y);

        double e_err_sq = 0;
        if (active) {
          double dmu = est_out(0, i) - mu_true;   // raw, unclamped
          double dro = est_out(1, i) - rough_true;
          e_err_sq = dmu * dmu + dro * dro;
        }

        std::array<Vec2, kNumFeet> raw;
        VecX<float> a_raw(kActionDim);
        for (int d = 0; d < kActionDim; ++d)
          a_raw[d] = means(d, i) +
                     sigma[d] * static_cast<float>(rng_.gaussian());
        for (int f = 0; f < kNumFeet; ++f)
          raw[f] = {a_raw[2 * f], a_raw[2 * f + 1]};
        Action act = Action::clamped(raw, cfg_.sim.action_clamp);

        VecX<float> mean_col = means.col(i);
        batch_in.col(k) = pin.col(i);
        batch_act.col(k) = a_raw;
        batch_logp[k] = gaussian_logp<float>(mean_col, bundle_.log_std, a_raw);
        values[k] = vals(0, i);

        RobotState pre = envs_[i].state();
        auto out = envs_[i].step(act);
        if (out.done == Env::Done::Fault) ++fault_count_;

        RewardTerms rt = compute_reward(
            cfg_.reward, cfg_.sim, pre, envs_[i].state(), act, prev_a_[i],
            prev2_a_[i], *out.contact, cfg_.v_cmd, cfg_.omega_cmd, e_err_sq,
            active);
        raw_rewards[k] = rt.total;
        sum_track += rt.track_xy;
        sum_energy += out.contact->energy;

        if (out.done != Env::Done::Running) {
          dones[k] = 1;
          envs_[i].reset();
          prev_a_[i] = prev2_a_[i] = Action{};
        } else {
          dones[k] = 0;
          prev2_a_[i] = prev_a_[i];
          prev_a_[i] = act;
        }
      }
    }

    // bootstrap values for unfinished envs
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < kObsDim; ++k)
        obs_mat(k, i) = static_cast<float>(envs_[i].obs().vec[k]);
      envs_[i].history_flat(hist_mat.col(i).data());
    }
    if (use_est_input) {
      MatX<float> est_out = bundle_.estimator.forward(hist_mat);
      pin.topRows(kObsDim) = obs_mat;
      for (int i = 0; i < n; ++i) {
        pin(kObsDim + 0, i) = clamp(est_out(0, i), 0.25f, 3.0f);
        pin(kObsDim + 1, i) = clamp(est_out(1, i), 0.0f, 1.0f);
        pin(kObsDim + 2, i) = est_out(2, i);
        pin(kObsDim + 3, i) = est_out(3, i);
        pin(kObsDim + 4, i) = est_out(4, i);
      }
    } else {
      pin.topRows(kObsDim) = obs_mat;
    }
    MatX<float> boot = bundle_.value.forward(pin);

    // causal reward scaling in chronological order
    std::vector<double> rewards = raw_rewards;
    if (cfg_.ppo.reward_norm) {
      for (int t = 0; t < t_steps; ++t)
        for (int i = 0; i < n; ++i) {
          int k = t * n + i;
          rewards[k] = normalizer_->normalize(i, raw_rewards[k], dones[k]);
        }
    }

    // GAE per env
    VecX<float> batch_adv(total), batch_ret(total);
    std::vector<double> r_seq(t_steps), v_seq(t_steps), adv_seq, ret_seq;
    std::vector<std::uint8_t> d_seq(t_steps);
    for (int i = 0; i < n; ++i) {
      for (int t = 0; t < t_steps; ++t) {
        int k = t * n + i;
        r_seq[t] = rewards[k];
        v_seq[t] = values[k];
        d_seq[t] = dones[k];
      }
      compute_gae(r_seq, v_seq, d_seq, cfg_.ppo.gamma, cfg_.ppo.lambda,
                  boot(0, i), &adv_seq, &ret_seq);
      for (int t = 0; t < t_steps; ++t) {
        int k = t * n + i;
        batch_adv[k] = static_cast<float>(adv_seq[t]);
        batch_ret[k] = static_cast<float>(ret_seq[t]);
      }
    }

    // PPO epochs over shuffled minibatches
    PpoConfig ppo_now = cfg_.ppo;
    ppo_now.log_std_min = annealed_log_floor(
        cfg_.ppo, static_cast<int>(curves_.size()), cfg_.iterations);
    std::vector<int> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    for (int ep = 0; ep < cfg_.ppo.epochs; ++ep) {
      shuffle(idx);
      int mb_size = total / cfg_.ppo.minibatches;
      for (int mb = 0; mb < cfg_.ppo.minibatches; ++mb) {
        int lo = mb * mb_size;
        int hi = (mb == cfg_.ppo.minibatches - 1) ? total : lo + mb_size;
        PpoBatch pb;
        pb.input.resize(in_dim, hi - lo);
        pb.actions.resize(kActionDim, hi - lo);
        pb.logp_old.resize(hi - lo);
        pb.advantages.resize(hi - lo);
        pb.returns.resize(hi - lo);
        for (int j = lo; j < hi; ++j) {
          int k = idx[j];
          pb.input.col(j - lo) = batch_in.col(k);
          pb.actions.col(j - lo) = batch_act.col(k);
          pb.logp_old[j - lo] = batch_logp[k];
          pb.advantages[j - lo] = batch_adv[k];
          pb.returns[j - lo] = batch_ret[k];
        }
        ppo_update(bundle_.policy, bundle_.log_std, bundle_.value, opt_policy_,
                   opt_log_std_, opt_value_, pb, ppo_now);
      }
    }

    // estimator pass (between rollouts, one epoch)
    EstLosses est_acc;
    {
      std::vector<int> eidx(total);
      std::iota(eidx.begin(), eidx.end(), 0);
      shuffle(eidx);
      int mb_size = total / cfg_.est_minibatches;
      for (int mb = 0; mb < cfg_.est_minibatches; ++mb) {
        int lo = mb * mb_size;
        int hi = (mb == cfg_.est_minibatches - 1) ? total : lo + mb_size;
        MatX<float> h(kEstIn, hi - lo), tg(4, hi - lo);
        for (int j = lo; j < hi; ++j) {
          h.col(j - lo) = est_hist.col(eidx[j]);
          tg.col(j - lo) = est_targets.col(eidx[j]);
        }
        EstLosses l = estimator_update(bundle_.estimator, opt_est_, h, tg,
                                       cfg_.ppo.lr);
        est_acc.mse_mu += l.mse_mu / cfg_.est_minibatches;
        est_acc.mse_rough += l.mse_rough / cfg_.est_minibatches;
        est_acc.mse_dx += l.mse_dx / cfg_.est_minibatches;
      }

      // Refresh the replay pool with a strided subsample of this rollout and
      // take one equal-sized pass over it. Early training is slip-rich;
      // without replay the estimator forgets how to read friction-cone
      // saturation once exploration anneals and slips turn rare, which kills
      // both its evaluation accuracy and the estimation bonus gradient.
      for (int k = static_cast<int>(rng_.below(kReplayStride)); k < total;
           k += kReplayStride) {
        replay_hist_.col(replay_next_) = est_hist.col(k);
        replay_targ_.col(replay_next_) = est_targets.col(k);
        replay_next_ = (replay_next_ + 1) % kReplayCap;
        replay_size_ = std::min(replay_size_ + 1, kReplayCap);
      }
      if (replay_size_ >= 2048) {
        int mbs = total / cfg_.est_minibatches;
        for (int mb = 0; mb < cfg_.est_minibatches; ++mb) {
          MatX<float> h(kEstIn, mbs), tg(4, mbs);
          for (int j = 0; j < mbs; ++j) {
            int k = static_cast<int>(
                rng_.below(static_cast<std::uint32_t>(replay_size_)));
            h.col(j) = replay_hist_.col(k);
            tg.col(j) = replay_targ_.col(k);
          }
          estimator_update(bundle_.estimator, opt_est_, h, tg, cfg_.ppo.lr);
        }
      }
    }

    CurveRow row;
    row.iteration = static_cast<int>(curves_.size());
    row.task_reward = sum_track / total;
    row.est_mse_mu = est_acc.mse_mu;
    row.est_mse_rough = est_acc.mse_rough;
    row.energy = sum_energy / total;
    curves_.push_back(row);
  }

  const std::vector<CurveRow>& curves() const { return curves_; }
  PolicyBundle& bundle() { return bundle_; }
  const PolicyBundle& bundle() const { return bundle_; }
  long fault_count() const { return fault_count_; }

 private:
  void require_two_mu_values() const {
    float first = -1;
    for (const TerrainGrid* g : grids_)
      for (int iy = 0; iy < g->height(); ++iy)
        for (int ix = 0; ix < g->width(); ++ix) {
          float mu = g->cell(ix, iy).mu;
          if (first < 0) first = mu;
          else if (mu != first) return;
        }
    throw ConfigError("trainer: training terrains expose a single mu value");
  }

  void shuffle(std::vector<int>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[rng_.below(static_cast<std::uint32_t>(i))]);
  }

  TrainerConfig cfg_;
  std::vector<const TerrainGrid*> grids_;
  Pcg32 rng_;
  PolicyBundle bundle_;
  AdamState<float> opt_policy_{0}, opt_value_{0}, opt_log_std_{0}, opt_est_{0};
  std::vector<Env> envs_;
  std::vector<Action> prev_a_, prev2_a_;
  std::unique_ptr<RewardNormalizer> normalizer_;
  std::vector<CurveRow> curves_;
  long fault_count_ = 0;

  static constexpr int kReplayCap = 24576;
  static constexpr int kReplayStride = 7;
  MatX<float> replay_hist_{kEstIn, kReplayCap}, replay_targ_{4, kReplayCap};
  int replay_size_ = 0, replay_next_ = 0;
};

// --- evaluation --------------------------------------------------------------

struct EvalStats {
  double mse_mu = 0;      // clamped inference outputs vs ground truth
  double mse_rough = 0;
  double track_xy = 0;    // mean tracking term
  double energy = 0;      // mean per-step sum |f|^2
  long steps = 0;
};

// Deterministic (mean-action) rollouts on held-out envs.
inline EvalStats evaluate_policy(const PolicyBundle& bundle,
                                 const std::vector<const TerrainGrid*>& grids,
                                 int episodes_per_grid, const SimParams& prm,
                                 OperatingMode mode, Vec2 v_cmd,
                                 double omega_cmd, std::uint64_t seed) {
  EvalStats s;
  const bool use_est_input = bundle.variant != PolicyVariant::NoSE;
  std::vector<float> hist(kEstIn);
  int ep_id = 0;
  for (const TerrainGrid* g : grids) {
    for (int ep = 0; ep < episodes_per_grid; ++ep, ++ep_id) {
      Env env(g, mode, v_cmd, omega_cmd, prm, seed,
              0x10000ULL + static_cast<std::uint64_t>(ep_id));
      while (env.done() == Env::Done::Running) {
        env.history_flat(hist.data());
        EstimatorOutput eo = bundle.estimator_single(hist.data());
        EstimatorOutput ec = eo.clamped();
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
        auto [mu_true, rough_true] = env.true_params();
        s.mse_mu += (ec.mu - mu_true) * (ec.mu - mu_true);
        s.mse_rough += (ec.rough - rough_true) * (ec.rough - rough_true);

        MatX<float> mean = bundle.policy.forward(pin);
        std::array<Vec2, kNumFeet> raw;
        for (int f = 0; f < kNumFeet; ++f)
          raw[f] = {mean(2 * f, 0), mean(2 * f + 1, 0)};
        auto out = env.step(Action::clamped(raw, prm.action_clamp));
        Vec2 verr = env.state().v - v_cmd;
        s.track_xy += std::exp(-verr.dot(verr) / 0.25);
        s.energy += out.contact->energy;
        ++s.steps;
      }
    }
  }
  if (s.steps > 0) {
    s.mse_mu /= s.steps;
    s.mse_rough /= s.steps;
    s.track_xy /= s.steps;
    s.energy /= s.steps;
  }
  return s;
}

}  // namespace terra
