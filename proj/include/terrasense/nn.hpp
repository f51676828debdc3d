// Dense-MLP core shared by the policy, estimator and vision heads.
//
// Parameters live in one flat vector (per layer: row-major W, then b),
// so serialization, Adam and finite-difference checks all see the same
// layout. Batches are column-major: one sample per column.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "terrasense/common.hpp"

namespace terra {

enum class Act : std::uint32_t { Identity = 0, Tanh = 1, Relu = 2 };

template <typename T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
class Mlp {
 public:
  using Mat = MatX<T>;
  using Vec = VecX<T>;
  using WMap = Eigen::Map<
      Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using CWMap = Eigen::Map<
      const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  struct Cache {
    std::vector<Mat> acts;  // acts[0] = input, acts[i] = output of layer i
  };

  Mlp() = default;

  // sizes = {in, h1, ..., out}; acts has one entry per weight layer.
  Mlp(std::vector<int> sizes, std::vector<Act> acts)
      : sizes_(std::move(sizes)), acts_(std::move(acts)) {
    if (sizes_.size() < 2 || acts_.size() != sizes_.size() - 1)
      throw ConfigError("mlp: sizes/activations mismatch");
    offsets_.resize(layer_count());
    std::size_t n = 0;
    for (int l = 0; l < layer_count(); ++l) {
      offsets_[l] = n;
      n += static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l] + sizes_[l + 1];
    }
    params_ = Vec::Zero(static_cast<Eigen::Index>(n));
  }

  int layer_count() const { return static_cast<int>(sizes_.size()) - 1; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  const std::vector<Act>& activations() const { return acts_; }
  Eigen::Index param_count() const { return params_.size(); }
  Vec& params() { return params_; }
  const Vec& params() const { return params_; }

  WMap weights(int l) {
    return WMap(params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
  }
  CWMap weights(int l) const {
    return CWMap(params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
  }
  Eigen::Map<Vec> bias(int l) {
    return Eigen::Map<Vec>(
        params_.data() + offsets_[l] +
            static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l],
        sizes_[l + 1]);
  }
  Eigen::Map<const Vec> bias(int l) const {
    return Eigen::Map<const Vec>(
        params_.data() + offsets_[l] +
            static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l],
        sizes_[l + 1]);
  }

  // Fan-in scaled uniform init, biases zero.
  void init(Pcg32& rng) {
    for (int l = 0; l < layer_count(); ++l) {
      T bound = T(1) / std::sqrt(static_cast<T>(sizes_[l]));
      auto w = weights(l);
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j)
          w(i, j) = static_cast<T>(rng.uniform(-bound, bound));
      bias(l).setZero();
    }
  }

  // x: (in_dim × batch). Returns (out_dim × batch).
  Mat forward(const Mat& x, Cache* cache = nullptr) const {
    if (x.rows() != input_dim())
      throw ConfigError("mlp forward: input dim " + std::to_string(x.rows()) +
                        ", expected " + std::to_string(input_dim()));
    if (cache) {
      cache->acts.clear();
      cache->acts.reserve(layer_count() + 1);
      cache->acts.push_back(x);
    }
    Mat a = x;
    for (int l = 0; l < layer_count(); ++l) {
      Mat z = weights(l) * a;
      z.colwise() += bias(l);
      apply_act(acts_[l], z);
      a = std::move(z);
      if (cache) cache->acts.push_back(a);
    }
    return a;
  }

  // dy: gradient of a scalar loss wrt the output, (out_dim × batch).
  // Accumulates into `grad` (same size as params); returns the input
  // gradient (needed for the stop-gradient property checks).
  Mat backward(const Cache& cache, const Mat& dy, Vec& grad) const {
    if (static_cast<int>(cache.acts.size()) != layer_count() + 1)
      throw ConfigError("mlp backward: stale or missing cache");
    if (grad.size() != params_.size())
      throw ConfigError("mlp backward: gradient buffer size mismatch");
    Mat delta = dy;
    for (int l = layer_count() - 1; l >= 0; --l) {
      const Mat& a_out = cache.acts[l + 1];
      switch (acts_[l]) {
        case Act::Identity:
          break;
        case Act::Tanh:
          delta.array() *= (T(1) - a_out.array().square());
          break;
        case Act::Relu:
          delta.array() *= (a_out.array() > T(0)).template cast<T>();
          break;
      }
      const Mat& a_in = cache.acts[l];
      WMap gw(grad.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
      gw.noalias() += delta * a_in.transpose();
      Eigen::Map<Vec> gb(grad.data() + offsets_[l] +
                             static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l],
                         sizes_[l + 1]);
      gb.noalias() += delta.rowwise().sum();
      if (l > 0)
        delta = (weights(l).transpose() * delta).eval();
      else
        delta = weights(l).transpose() * delta;
    }
    return delta;  // d loss / d input
  }

  template <typename U>
  Mlp<U> cast() const {
    Mlp<U> out(sizes_, acts_);
    out.params() = params_.template cast<U>();
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write net: " + path);
    write_blob(out);
    if (!out) throw ConfigError("short write on net: " + path);
  }

  void write_blob(std::ostream& out) const {
    out.write("TSNN", 4);
    write_u32(out, 1);  // version
    write_u32(out, sizeof(T));
    write_u32(out, static_cast<std::uint32_t>(layer_count()));
    for (int s : sizes_) write_u32(out, static_cast<std::uint32_t>(s));
    for (Act a : acts_) write_u32(out, static_cast<std::uint32_t>(a));
    std::uint64_t n = static_cast<std::uint64_t>(params_.size());
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(params_.data()),
              static_cast<std::streamsize>(n * sizeof(T)));
  }

  static Mlp load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open net: " + path);
    return read_blob(in, path);
  }

  static Mlp read_blob(std::istream& in, const std::string& origin = "<blob>") {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "TSNN")
      throw ConfigError(origin + ": not a TSNN net file");
    std::uint32_t version = read_u32(in);
    if (version != 1)
      throw ConfigError(origin + ": unsupported TSNN version");
    std::uint32_t width = read_u32(in);
    std::uint32_t layers = read_u32(in);
    if (layers == 0 || layers > 64) throw ConfigError(origin + ": bad layer count");
    std::vector<int> sizes(layers + 1);
    for (auto& s : sizes) s = static_cast<int>(read_u32(in));
    std::vector<Act> acts(layers);
    for (auto& a : acts) {
      std::uint32_t v = read_u32(in);
      if (v > 2) throw ConfigError(origin + ": bad activation code");
      a = static_cast<Act>(v);
    }
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    Mlp net(sizes, acts);
    if (n != static_cast<std::uint64_t>(net.param_count()))
      throw ConfigError(origin + ": parameter count mismatch");
    if (width == sizeof(T)) {
      in.read(reinterpret_cast<char*>(net.params_.data()),
              static_cast<std::streamsize>(n * sizeof(T)));
    } else if (width == 4) {
      std::vector<float> tmp(n);
      in.read(reinterpret_cast<char*>(tmp.data()),
              static_cast<std::streamsize>(n * 4));
      for (std::uint64_t i = 0; i < n; ++i)
        net.params_[static_cast<Eigen::Index>(i)] = static_cast<T>(tmp[i]);
    } else if (width == 8) {
      std::vector<double> tmp(n);
      in.read(reinterpret_cast<char*>(tmp.data()),
              static_cast<std::streamsize>(n * 8));
      for (std::uint64_t i = 0; i < n; ++i)
        net.params_[static_cast<Eigen::Index>(i)] = static_cast<T>(tmp[i]);
    } else {
      throw ConfigError(origin + ": unsupported scalar width");
    }
    if (!in) throw ConfigError(origin + ": truncated parameter data");
    return net;
  }

 private:
  static void apply_act(Act a, Mat& z) {
    switch (a) {
      case Act::Identity:
        break;
      case Act::Tanh:
        z = z.array().tanh();
        break;
      case Act::Relu:
        z = z.cwiseMax(T(0));
        break;
    }
  }

  static void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
  static std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  }

  std::vector<int> sizes_;
  std::vector<Act> acts_;
  std::vector<std::size_t> offsets_;
  Vec params_;
};

template <typename T>
struct AdamState {
  VecX<T> m, v;
  long t = 0;
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);

  explicit AdamState(Eigen::Index n)
      : m(VecX<T>::Zero(n)), v(VecX<T>::Zero(n)) {}

  void step(VecX<T>& params, const VecX<T>& grad, T lr) {
    ++t;
    m = beta1 * m + (T(1) - beta1) * grad;
    v = beta2 * v + (T(1) - beta2) * grad.cwiseProduct(grad);
    T bc1 = T(1) - std::pow(beta1, static_cast<T>(t));
    T bc2 = T(1) - std::pow(beta2, static_cast<T>(t));
    params.array() -=
        lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
  }
};

// Column-wise softmax with the usual max-shift for stability.
template <typename T>
MatX<T> softmax(const MatX<T>& logits) {
  MatX<T> out = logits;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    auto col = out.col(c);
    col.array() -= col.maxCoeff();
    col = col.array().exp();
    col /= col.sum();
  }
  return out;
}

// Mean cross-entropy over the batch; optionally emits dL/dlogits.
template <typename T>
T cross_entropy(const MatX<T>& logits, const std::vector<int>& labels,
                MatX<T>* dlogits = nullptr) {
  if (static_cast<std::size_t>(logits.cols()) != labels.size())
    throw ConfigError("cross_entropy: batch size mismatch");
  MatX<T> p = softmax(logits);
  T loss = 0;
  T inv_n = T(1) / static_cast<T>(labels.size());
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    int y = labels[static_cast<std::size_t>(c)];
    loss -= std::log(std::max(p(y, c), T(1e-12))) * inv_n;
  }
  if (dlogits) {
    *dlogits = p * inv_n;
    for (Eigen::Index c = 0; c < p.cols(); ++c)
      (*dlogits)(labels[static_cast<std::size_t>(c)], c) -= inv_n;
  }
  return loss;
}

}  // namespace terra
