// Linear probes over handcrafted patch features: 20-bin classification of
// friction (and roughness) trained with cross-entropy on projected
// self-supervised labels, plus dense per-pixel prediction.
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "terrasense/camera.hpp"
#include "terrasense/features.hpp"
#include "terrasense/nn.hpp"

namespace terra {

inline constexpr int kBins = 20;

struct BinSpec {
  double lo = 0, hi = 1;

  static BinSpec mu_bins() { return {0.25, 3.0}; }
  static BinSpec rough_bins() { return {0.0, 1.0}; }

  double width() const { return (hi - lo) / kBins; }

  // Out-of-range values clamp to the end bins; the upper edge is closed.
  int discretize(double v) const {
    if (!std::isfinite(v))
      throw ConfigError("discretize: non-finite value");
    v = clamp(v, lo, hi);
    int k = static_cast<int>((v - lo) / width());
    return std::min(k, kBins - 1);
  }
  double center(int k) const { return lo + (k + 0.5) * width(); }

  template <typename Derived>
  double expectation(const Eigen::MatrixBase<Derived>& probs) const {
    double e = 0;
    for (int k = 0; k < kBins; ++k) e += double(probs[k]) * center(k);
    return e;
  }
};

// One training sample: a standardizable patch feature + both bin labels.
struct VisionSample {
  std::array<float, kFeatureDim> feat{};
  int bin_mu = 0, bin_rough = 0;
  int frame = 0;
};

// A label at pixel (u, v) trains the full 8x8 patch containing it;
// labels in the right/bottom remainder strip attach to the nearest
// full patch, mirroring the dense-prediction broadcast convention.
inline std::vector<VisionSample> extract_samples(
    const std::vector<LabeledImage>& frames) {
  BinSpec mu = BinSpec::mu_bins(), ro = BinSpec::rough_bins();
  std::vector<VisionSample> out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const LabeledImage& f = frames[i];
    int prows = f.rgb.height() / kPatch, pcols = f.rgb.width() / kPatch;
    if (prows == 0 || pcols == 0)
      throw ConfigError("extract_samples: image smaller than one patch");
    for (const PixelLabel& l : f.labels) {
      int pr = std::min(static_cast<int>(l.v) / kPatch, prows - 1);
      int pc = std::min(static_cast<int>(l.u) / kPatch, pcols - 1);
      VisionSample s;
      s.feat = patch_features(f.rgb, pr * kPatch, pc * kPatch);
      s.bin_mu = mu.discretize(l.mu_hat);
      s.bin_rough = ro.discretize(l.rough_hat);
      s.frame = static_cast<int>(i);
      out.push_back(s);
    }
  }
  return out;
}

struct VisionModel {
  std::array<float, kFeatureDim> feat_mean{}, feat_std{};
  Mlp<float> head_mu;     // kFeatureDim -> kBins, linear
  Mlp<float> head_rough;

  VecX<float> standardize(const std::array<float, kFeatureDim>& f) const {
    VecX<float> x(kFeatureDim);
    for (int i = 0; i < kFeatureDim; ++i)
      x[i] = (f[i] - feat_mean[i]) / feat_std[i];
    return x;
  }

  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    head_mu.save((dir / "head_mu.tsnn").string());
    head_rough.save((dir / "head_rough.tsnn").string());
    std::ofstream out(dir / "stats.bin", std::ios::binary);
    if (!out) throw ConfigError("cannot write stats.bin in " + dir.string());
    out.write("TSVS", 4);
    std::uint32_t ver = 1, dim = kFeatureDim;
    out.write(reinterpret_cast<const char*>(&ver), 4);
    out.write(reinterpret_cast<const char*>(&dim), 4);
    out.write(reinterpret_cast<const char*>(feat_mean.data()), dim * 4);
    out.write(reinterpret_cast<const char*>(feat_std.data()), dim * 4);
  }

  static VisionModel load(const std::filesystem::path& dir) {
    VisionModel m;
    m.head_mu = Mlp<float>::load((dir / "head_mu.tsnn").string());
    m.head_rough = Mlp<float>::load((dir / "head_rough.tsnn").string());
    std::ifstream in(dir / "stats.bin", std::ios::binary);
    if (!in) throw ConfigError("missing stats.bin in " + dir.string());
    char magic[4];
    std::uint32_t ver = 0, dim = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&ver), 4);
    in.read(reinterpret_cast<char*>(&dim), 4);
    if (!in || std::string(magic, 4) != "TSVS" || ver != 1 ||
        dim != kFeatureDim)
      throw ConfigError(dir.string() + ": bad stats.bin");
    in.read(reinterpret_cast<char*>(m.feat_mean.data()), dim * 4);
    in.read(reinterpret_cast<char*>(m.feat_std.data()), dim * 4);
    if (!in) throw ConfigError(dir.string() + ": truncated stats.bin");
    return m;
  }
};

struct VisionTrainConfig {
  double lr = 1e-3;
  int batch = 64;
  int epochs = 20;
  double val_frames_frac = 0.10;
  std::uint64_t seed = 1;
};

struct HeadCurve {
  std::vector<double> epoch_loss;  // mean train cross-entropy per epoch
  double val_loss = 0;
  double val_accuracy = 0;
  long train_samples = 0, val_samples = 0;
};

namespace detail {

inline Mlp<float> train_head(const MatX<float>& x_train,
                             const std::vector<int>& y_train,
                             const MatX<float>& x_val,
                             const std::vector<int>& y_val,
                             const VisionTrainConfig& cfg, Pcg32& rng,
                             HeadCurve* curve) {
  int distinct = 0;
  std::array<bool, kBins> seen{};
  for (int y : y_train)
    if (!seen[y]) {
      seen[y] = true;
      ++distinct;
    }
  if (distinct < 2)
    throw ConfigError(
        "train_head: all training labels fall in one bin; the dataset "
        "carries no signal for this head");

  Mlp<float> head({kFeatureDim, kBins}, {Act::Identity});
  head.init(rng);
  AdamState<float> opt(head.param_count());
  const int n = static_cast<int>(y_train.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int ep = 0; ep < cfg.epochs; ++ep) {
    for (int i = n; i > 1; --i)
      std::swap(order[i - 1], order[rng.below(static_cast<std::uint32_t>(i))]);
    double loss_sum = 0;
    long batches = 0;
    for (int lo = 0; lo < n; lo += cfg.batch) {
      int hi = std::min(n, lo + cfg.batch);
      MatX<float> xb(kFeatureDim, hi - lo);
      std::vector<int> yb(hi - lo);
      for (int j = lo; j < hi; ++j) {
        xb.col(j - lo) = x_train.col(order[j]);
        yb[j - lo] = y_train[order[j]];
      }
      typename Mlp<float>::Cache cache;
      MatX<float> logits = head.forward(xb, &cache);
      MatX<float> dlogits;
      float loss = cross_entropy<float>(logits, yb, &dlogits);
      VecX<float> grad = VecX<float>::Zero(head.param_count());
      head.backward(cache, dlogits, grad);
      opt.step(head.params(), grad, static_cast<float>(cfg.lr));
      loss_sum += loss;
      ++batches;
    }
    if (curve) curve->epoch_loss.push_back(loss_sum / std::max(1L, batches));
  }
  if (curve) {
    curve->train_samples = n;
    curve->val_samples = static_cast<long>(y_val.size());
    if (!y_val.empty()) {
      MatX<float> logits = head.forward(x_val);
      curve->val_loss = cross_entropy<float>(logits, y_val);
      MatX<float> p = softmax<float>(logits);
      long correct = 0;
      for (Eigen::Index c = 0; c < p.cols(); ++c) {
        Eigen::Index arg = 0;
        p.col(c).maxCoeff(&arg);
        if (static_cast<int>(arg) == y_val[c]) ++correct;
      }
      curve->val_accuracy = double(correct) / double(y_val.size());
    }
  }
  return head;
}

}  // namespace detail

struct VisionCurves {
  HeadCurve mu, rough;
  std::vector<int> val_frames;  // indices into the input frame list
};

// Frame-level 10% validation split (patches of one frame overlap, so a
// patch-level split would leak), shared standardization stats from the
// training split, two independent heads.
inline VisionModel train_vision(const std::vector<LabeledImage>& frames,
                                const VisionTrainConfig& cfg,
                                VisionCurves* curves = nullptr) {
  if (frames.size() < 2)
    throw ConfigError("train_vision: need at least 2 frames");
  Pcg32 rng(cfg.seed, 0x76697331);
  std::vector<int> frame_order(frames.size());
  std::iota(frame_order.begin(), frame_order.end(), 0);
  for (std::size_t i = frames.size(); i > 1; --i)
    std::swap(frame_order[i - 1],
              frame_order[rng.below(static_cast<std::uint32_t>(i))]);
  std::size_t n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(frames.size() * cfg.val_frames_frac));
  std::vector<bool> is_val(frames.size(), false);
  std::vector<int> val_frames;
  for (std::size_t i = 0; i < n_val; ++i) {
    is_val[frame_order[i]] = true;
    val_frames.push_back(frame_order[i]);
  }
  std::sort(val_frames.begin(), val_frames.end());
  if (curves) curves->val_frames = val_frames;

  std::vector<VisionSample> samples = extract_samples(frames);
  std::vector<int> tr_idx, va_idx;
  for (std::size_t i = 0; i < samples.size(); ++i)
    (is_val[samples[i].frame] ? va_idx : tr_idx).push_back(
        static_cast<int>(i));
  if (tr_idx.empty())
    throw ConfigError("train_vision: no labeled training samples");

  VisionModel m;
  for (int d = 0; d < kFeatureDim; ++d) {
    double mean = 0;
    for (int i : tr_idx) mean += samples[i].feat[d];
    mean /= double(tr_idx.size());
    double var = 0;
    for (int i : tr_idx) {
      double e = samples[i].feat[d] - mean;
      var += e * e;
    }
    var /= double(tr_idx.size());
    m.feat_mean[d] = static_cast<float>(mean);
    m.feat_std[d] = static_cast<float>(std::max(std::sqrt(var), 1e-6));
  }

  auto pack = [&](const std::vector<int>& idx, MatX<float>* x,
                  std::vector<int>* ymu, std::vector<int>* yro) {
    x->resize(kFeatureDim, static_cast<Eigen::Index>(idx.size()));
    ymu->resize(idx.size());
    yro->resize(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
      x->col(static_cast<Eigen::Index>(j)) = m.standardize(samples[idx[j]].feat);
      (*ymu)[j] = samples[idx[j]].bin_mu;
      (*yro)[j] = samples[idx[j]].bin_rough;
    }
  };
  MatX<float> x_tr, x_va;
  std::vector<int> mu_tr, mu_va, ro_tr, ro_va;
  pack(tr_idx, &x_tr, &mu_tr, &ro_tr);
  pack(va_idx, &x_va, &mu_va, &ro_va);

  m.head_mu = detail::train_head(x_tr, mu_tr, x_va, mu_va, cfg, rng,
                                 curves ? &curves->mu : nullptr);
  m.head_rough = detail::train_head(x_tr, ro_tr, x_va, ro_va, cfg, rng,
                                    curves ? &curves->rough : nullptr);
  return m;
}

// --- dense prediction ---------------------------------------------------------

struct DensePrediction {
  int width = 0, height = 0;
  int prows = 0, pcols = 0;
  std::vector<float> patch_mu, patch_rough;  // prows*pcols, row-major
  MatX<float> probs_mu, probs_rough;         // kBins x (prows*pcols)

  int patch_index(int r, int c) const {
    int pr = std::min(r / kPatch, prows - 1);
    int pc = std::min(c / kPatch, pcols - 1);
    return pr * pcols + pc;
  }
  // remainder pixels on the right/bottom take the nearest full patch
  float mu_at(int r, int c) const { return patch_mu[patch_index(r, c)]; }
  float rough_at(int r, int c) const { return patch_rough[patch_index(r, c)]; }
};

inline DensePrediction predict_dense(const Image& img, const VisionModel& m) {
  DensePrediction d;
  d.width = img.width();
  d.height = img.height();
  d.prows = img.height() / kPatch;
  d.pcols = img.width() / kPatch;
  if (d.prows == 0 || d.pcols == 0)
    throw ConfigError("predict_dense: image smaller than one patch");
  const int n = d.prows * d.pcols;
  MatX<float> x(kFeatureDim, n);
  for (int pr = 0; pr < d.prows; ++pr)
    for (int pc = 0; pc < d.pcols; ++pc)
      x.col(pr * d.pcols + pc) =
          m.standardize(patch_features(img, pr * kPatch, pc * kPatch));
  d.probs_mu = softmax<float>(m.head_mu.forward(x));
  d.probs_rough = softmax<float>(m.head_rough.forward(x));
  BinSpec mu = BinSpec::mu_bins(), ro = BinSpec::rough_bins();
  d.patch_mu.resize(n);
  d.patch_rough.resize(n);
  for (int i = 0; i < n; ++i) {
    d.patch_mu[i] = static_cast<float>(mu.expectation(d.probs_mu.col(i)));
    d.patch_rough[i] = static_cast<float>(ro.expectation(d.probs_rough.col(i)));
  }
  return d;
}

// --- evaluation against ground truth ------------------------------------------

// RMSE of the dense mu map against the true terrain, over pixels whose
// rays reach ground inside the world. `stride` subsamples pixels.
inline double dense_mu_rmse(const Image& img, const Pose2& true_capture_pose,
                            const PinholeCamera& cam, const TerrainGrid& grid,
                            const DensePrediction& pred, int stride = 2) {
  double se = 0;
  long n = 0;
  for (int r = 0; r < img.height(); r += stride)
    for (int c = 0; c < img.width(); c += stride) {
      auto g = unproject_pixel(cam, true_capture_pose, c + 0.5, r + 0.5);
      if (!g || !grid.inside(*g)) continue;
      auto [mu_true, rough_true] = grid.query_params(*g);
      double e = pred.mu_at(r, c) - mu_true;
      se += e * e;
      ++n;
    }
  if (n == 0) throw ConfigError("dense_mu_rmse: no ground pixels in frame");
  return std::sqrt(se / double(n));
}

// Mean predicted mu per terrain class over an overhead render: the
// viewpoint-transfer check (train first-person, evaluate top-down).
inline std::vector<std::pair<int, double>> class_mean_mu(
    const Image& overhead, const OrthoCamera& cam, const TerrainGrid& grid,
    const DensePrediction& pred) {
  std::vector<int> ids;
  std::vector<double> sums;
  std::vector<long> counts;
  for (int r = 0; r < overhead.height(); ++r)
    for (int c = 0; c < overhead.width(); ++c) {
      Vec2 p = cam.unproject(c + 0.5, r + 0.5);
      if (!grid.inside(p)) continue;
      int id = grid.cell_at(p).class_id;
      std::size_t k = 0;
      for (; k < ids.size(); ++k)
        if (ids[k] == id) break;
      if (k == ids.size()) {
        ids.push_back(id);
        sums.push_back(0);
        counts.push_back(0);
      }
      sums[k] += pred.mu_at(r, c);
      ++counts[k];
    }
  std::vector<std::pair<int, double>> out;
  for (std::size_t k = 0; k < ids.size(); ++k)
    out.push_back({ids[k], sums[k] / double(counts[k])});
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace terra
