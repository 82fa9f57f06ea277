#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "randprompt/embedding_store.hpp"
#include "randprompt/errors.hpp"
#include "randprompt/rng.hpp"
#include "randprompt/scores.hpp"

namespace randprompt {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

  static Matrix from_embeddings(const EmbeddingMatrix& m) {
    Matrix out(m.count(), m.dim());
    auto src = m.data();
    for (std::size_t i = 0; i < src.size(); ++i) out.values[i] = src[i];
    return out;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

inline constexpr std::size_t kHiddenLayers = 3;
inline constexpr std::size_t kLinearLayers = kHiddenLayers + 1;

/// Shape of the detector: three hidden blocks of
/// linear -> batch norm -> ReLU -> dropout, then a linear layer to one logit.
struct MlpArchitecture {
  std::size_t input_dim = 640;
  std::array<std::size_t, kHiddenLayers> hidden_dims{512, 256, 128};
  double dropout_rate = 0.2;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.1;

  std::size_t in_dim(std::size_t layer) const { return layer == 0 ? input_dim : hidden_dims[layer - 1]; }
  std::size_t out_dim(std::size_t layer) const { return layer < kHiddenLayers ? hidden_dims[layer] : 1; }

  void validate() const {
    if (input_dim < 1) throw ArgumentError("input_dim must be >= 1");
    for (auto h : hidden_dims) {
      if (h < 1) throw ArgumentError("hidden dims must be >= 1");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ArgumentError("dropout_rate must be in [0,1)");
    if (!(bn_epsilon > 0.0)) throw ArgumentError("bn_epsilon must be > 0");
    if (!(bn_momentum > 0.0 && bn_momentum <= 1.0)) throw ArgumentError("bn_momentum must be in (0,1]");
  }

  friend bool operator==(const MlpArchitecture&, const MlpArchitecture&) = default;
};

struct TrainConfig {
  int epochs = 2;
  std::size_t batch_size = 128;  // rows, i.e. batch_size / 2 pairs
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double lr_decay_factor = 0.1;  // applied once, after the first epoch
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool normalize_inputs = true;

  void validate() const {
    if (epochs < 1) throw ArgumentError("epochs must be >= 1");
    if (batch_size < 2 || batch_size % 2 != 0) throw ArgumentError("batch_size must be even and >= 2");
    if (!(lr > 0.0)) throw ArgumentError("lr must be > 0");
    if (!(weight_decay >= 0.0)) throw ArgumentError("weight_decay must be >= 0");
    if (!(lr_decay_factor > 0.0)) throw ArgumentError("lr_decay_factor must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
      throw ArgumentError("Adam betas must be in [0,1)");
    }
    if (!(adam_eps > 0.0)) throw ArgumentError("adam_eps must be > 0");
  }

  /// Learning rate used during `epoch` (0-based).
  double lr_at_epoch(int epoch) const { return epoch == 0 ? lr : lr * lr_decay_factor; }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Every trainable tensor. Also used as the gradient and Adam-moment container.
struct ParamSet {
  std::array<Matrix, kLinearLayers> weight;  // out x in
  std::array<std::vector<double>, kLinearLayers> bias;
  std::array<std::vector<double>, kHiddenLayers> gamma;
  std::array<std::vector<double>, kHiddenLayers> beta;

  static ParamSet zeros(const MlpArchitecture& arch) {
    ParamSet p;
    for (std::size_t l = 0; l < kLinearLayers; ++l) {
      p.weight[l] = Matrix(arch.out_dim(l), arch.in_dim(l));
      p.bias[l].assign(arch.out_dim(l), 0.0);
    }
    for (std::size_t l = 0; l < kHiddenLayers; ++l) {
      p.gamma[l].assign(arch.hidden_dims[l], 0.0);
      p.beta[l].assign(arch.hidden_dims[l], 0.0);
    }
    return p;
  }

  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

/// Visits the tensors of one or more same-shaped ParamSets in declared order:
/// linear0.weight, linear0.bias, bn0.gamma, bn0.beta, ..., linear3.weight, linear3.bias.
/// `fn(name, decays, spans...)`; `decays` is true only for linear weights.
template <typename Fn, typename... Sets>
void visit_tensors(Fn&& fn, Sets&... sets) {
  auto span_of = [](auto& v) {
    if constexpr (requires { v.values; }) {
      return std::span(v.values);
    } else {
      return std::span(v);
    }
  };
  for (std::size_t l = 0; l < kLinearLayers; ++l) {
    const std::string idx = std::to_string(l);
    fn("linear" + idx + ".weight", true, span_of(sets.weight[l])...);
    fn("linear" + idx + ".bias", false, span_of(sets.bias[l])...);
    if (l < kHiddenLayers) {
      fn("bn" + idx + ".gamma", false, span_of(sets.gamma[l])...);
      fn("bn" + idx + ".beta", false, span_of(sets.beta[l])...);
    }
  }
}

struct MlpParams {
  MlpArchitecture arch;
  ParamSet trainable;
  std::array<std::vector<double>, kHiddenLayers> running_mean;
  std::array<std::vector<double>, kHiddenLayers> running_var;
  std::uint64_t steps = 0;
  std::uint64_t revision = 0;  // bumped on every in-place update; ties caches to params

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases; gamma 1, beta 0,
  /// running mean 0, running variance 1.
  static MlpParams initialize(const MlpArchitecture& arch, std::uint64_t seed) {
    arch.validate();
    MlpParams p;
    p.arch = arch;
    p.trainable = ParamSet::zeros(arch);
    Xoshiro256 rng(derive_seed(seed, "init"));
    for (std::size_t l = 0; l < kLinearLayers; ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(arch.in_dim(l)));
      for (auto& w : p.trainable.weight[l].values) w = rng.uniform(-bound, bound);
      for (auto& b : p.trainable.bias[l]) b = rng.uniform(-bound, bound);
    }
    for (std::size_t l = 0; l < kHiddenLayers; ++l) {
      std::fill(p.trainable.gamma[l].begin(), p.trainable.gamma[l].end(), 1.0);
      p.running_mean[l].assign(arch.hidden_dims[l], 0.0);
      p.running_var[l].assign(arch.hidden_dims[l], 1.0);
    }
    return p;
  }

  bool trained() const noexcept { return steps > 0; }

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Adam first and second moments.
struct AdamState {
  ParamSet m;
  ParamSet v;

  static AdamState zeros(const MlpArchitecture& arch) { return {ParamSet::zeros(arch), ParamSet::zeros(arch)}; }
};

enum class Mode { train, eval };

/// Activations kept by a train-mode forward pass for the backward pass.
struct ForwardCache {
  std::uint64_t revision = 0;
  MlpArchitecture arch;
  std::size_t batch = 0;
  std::array<Matrix, kLinearLayers> inputs;    // input of each linear layer
  std::array<Matrix, kHiddenLayers> xhat;      // normalized pre-activations
  std::array<Matrix, kHiddenLayers> bn_out;    // after gamma/beta, before ReLU
  std::array<Matrix, kHiddenLayers> dropout;   // 0 or 1/(1-p)
  std::array<std::vector<double>, kHiddenLayers> inv_std;
  std::array<std::vector<double>, kHiddenLayers> batch_mean;
  std::array<std::vector<double>, kHiddenLayers> batch_var;  // biased
};

struct ForwardResult {
  std::vector<double> logits;
  std::optional<ForwardCache> cache;  // train mode only
};

namespace detail {

// out(n x m) = a(n x k) * w(m x k)^T + bias
inline Matrix linear_forward(const Matrix& a, const Matrix& w, const std::vector<double>& bias) {
  Matrix out(a.rows, w.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    auto ai = a.row(i);
    for (std::size_t j = 0; j < w.rows; ++j) {
      auto wj = w.row(j);
      double acc = bias[j];
      for (std::size_t k = 0; k < a.cols; ++k) acc += ai[k] * wj[k];
      out(i, j) = acc;
    }
  }
  return out;
}

}  // namespace detail

/// Runs the detector on a batch of row vectors.
///
/// Train mode normalizes with batch statistics and samples dropout masks from
/// `rng`; the cache also carries the batch statistics so the caller can fold
/// them into the running estimates (see update_running_stats). Eval mode uses
/// running statistics, no dropout, and never touches `rng`.
inline ForwardResult forward(const MlpParams& params, const Matrix& batch, Mode mode, Xoshiro256& rng) {
  const auto& arch = params.arch;
  if (batch.cols != arch.input_dim) {
    throw ArgumentError("batch dim " + std::to_string(batch.cols) + " != input_dim " +
                        std::to_string(arch.input_dim));
  }
  if (mode == Mode::eval) {
    if (!params.trained()) throw StateError("eval-mode forward on an untrained detector");
    for (std::size_t l = 0; l < kHiddenLayers; ++l) {
      for (std::size_t f = 0; f < arch.hidden_dims[l]; ++f) {
        if (!std::isfinite(params.running_mean[l][f]) || !std::isfinite(params.running_var[l][f])) {
          throw StateError("running statistics of bn" + std::to_string(l) + " are not finite");
        }
      }
    }
  }

  const std::size_t n = batch.rows;
  const auto& tp = params.trainable;
  ForwardResult result;
  ForwardCache cache;
  const bool training = mode == Mode::train;
  if (training) {
    cache.revision = params.revision;
    cache.arch = arch;
    cache.batch = n;
  }

  Matrix x = batch;
  for (std::size_t l = 0; l < kHiddenLayers; ++l) {
    Matrix z = detail::linear_forward(x, tp.weight[l], tp.bias[l]);
    const std::size_t width = z.cols;
    const auto& gamma = tp.gamma[l];
    const auto& beta = tp.beta[l];
    Matrix y(n, width);

    if (training) {
      std::vector<double> mean(width, 0.0), var(width, 0.0), inv_std(width);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < width; ++f) mean[f] += z(i, f);
      }
      for (auto& m : mean) m /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < width; ++f) {
          const double d = z(i, f) - mean[f];
          var[f] += d * d;
        }
      }
      for (std::size_t f = 0; f < width; ++f) {
        var[f] /= static_cast<double>(n);
        inv_std[f] = 1.0 / std::sqrt(var[f] + arch.bn_epsilon);
      }
      Matrix xhat(n, width);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < width; ++f) {
          xhat(i, f) = (z(i, f) - mean[f]) * inv_std[f];
          y(i, f) = gamma[f] * xhat(i, f) + beta[f];
        }
      }
      cache.xhat[l] = std::move(xhat);
      cache.inv_std[l] = std::move(inv_std);
      cache.batch_mean[l] = std::move(mean);
      cache.batch_var[l] = std::move(var);
    } else {
      for (std::size_t f = 0; f < width; ++f) {
        const double scale = gamma[f] / std::sqrt(params.running_var[l][f] + arch.bn_epsilon);
        const double shift = beta[f] - scale * params.running_mean[l][f];
        for (std::size_t i = 0; i < n; ++i) y(i, f) = scale * z(i, f) + shift;
      }
    }

    Matrix h(n, width);
    for (std::size_t k = 0; k < h.values.size(); ++k) h.values[k] = y.values[k] > 0.0 ? y.values[k] : 0.0;

    if (training) {
      Matrix mask(n, width, 1.0);
      if (arch.dropout_rate > 0.0) {
        const double keep_scale = 1.0 / (1.0 - arch.dropout_rate);
        for (auto& m : mask.values) m = rng.uniform01() >= arch.dropout_rate ? keep_scale : 0.0;
        for (std::size_t k = 0; k < h.values.size(); ++k) h.values[k] *= mask.values[k];
      }
      cache.inputs[l] = std::move(x);
      cache.bn_out[l] = std::move(y);
      cache.dropout[l] = std::move(mask);
    }
    x = std::move(h);
  }

  Matrix out = detail::linear_forward(x, tp.weight[kHiddenLayers], tp.bias[kHiddenLayers]);
  result.logits = std::move(out.values);
  if (training) {
    cache.inputs[kHiddenLayers] = std::move(x);
    result.cache = std::move(cache);
  }
  return result;
}

inline ForwardResult forward(const MlpParams& params, const EmbeddingMatrix& batch, Mode mode, Xoshiro256& rng) {
  return forward(params, Matrix::from_embeddings(batch), mode, rng);
}

/// Mean binary cross-entropy on logits and its gradient w.r.t. each logit.
struct LossResult {
  double loss = 0.0;
  std::vector<double> d_logits;
};

inline double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// loss = mean(max(z,0) - z*y + log1p(exp(-|z|))), gradient (sigmoid(z) - y) / n.
inline LossResult bce_with_logits(std::span<const double> logits, std::span<const double> labels) {
  if (logits.size() != labels.size()) throw ArgumentError("logits and labels differ in length");
  if (logits.empty()) throw ArgumentError("bce_with_logits needs at least one sample");
  const double n = static_cast<double>(logits.size());
  LossResult r;
  r.d_logits.resize(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double y = labels[i];
    if (y != 0.0 && y != 1.0) throw ArgumentError("label " + std::to_string(y) + " is not 0 or 1");
    const double z = logits[i];
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    r.d_logits[i] = (sigmoid(z) - y) / n;
  }
  r.loss = total / n;
  return r;
}

/// Exact reverse-mode gradients of a train-mode forward pass, including the
/// batch-norm mean/variance coupling and the cached dropout masks.
inline ParamSet backward(const MlpParams& params, const ForwardCache& cache, std::span<const double> d_logits) {
  if (cache.revision != params.revision || !(cache.arch == params.arch)) {
    throw StateError("forward cache does not belong to the current parameters");
  }
  if (d_logits.size() != cache.batch) {
    throw StateError("d_logits has " + std::to_string(d_logits.size()) + " entries, cache batch is " +
                     std::to_string(cache.batch));
  }
  const auto& arch = params.arch;
  const auto& tp = params.trainable;
  const std::size_t n = cache.batch;
  ParamSet grads = ParamSet::zeros(arch);

  // delta: gradient w.r.t. the output of the current linear layer.
  Matrix delta(n, 1);
  for (std::size_t i = 0; i < n; ++i) delta(i, 0) = d_logits[i];

  for (std::size_t l = kLinearLayers; l-- > 0;) {
    const Matrix& in = cache.inputs[l];
    const Matrix& w = tp.weight[l];
    Matrix& dw = grads.weight[l];
    auto& db = grads.bias[l];
    for (std::size_t i = 0; i < n; ++i) {
      auto in_i = in.row(i);
      for (std::size_t j = 0; j < w.rows; ++j) {
        const double d = delta(i, j);
        db[j] += d;
        if (d == 0.0) continue;
        auto dw_j = dw.row(j);
        for (std::size_t k = 0; k < w.cols; ++k) dw_j[k] += d * in_i[k];
      }
    }
    if (l == 0) break;

    // Gradient w.r.t. the layer input, i.e. the previous block's dropout output.
    Matrix d_in(n, w.cols);
    for (std::size_t i = 0; i < n; ++i) {
      auto out_i = d_in.row(i);
      for (std::size_t j = 0; j < w.rows; ++j) {
        const double d = delta(i, j);
        if (d == 0.0) continue;
        auto w_j = w.row(j);
        for (std::size_t k = 0; k < w.cols; ++k) out_i[k] += d * w_j[k];
      }
    }

    const std::size_t h = l - 1;
    const std::size_t width = arch.hidden_dims[h];
    const Matrix& mask = cache.dropout[h];
    const Matrix& y = cache.bn_out[h];
    const Matrix& xhat = cache.xhat[h];
    Matrix dy(n, width);
    for (std::size_t k = 0; k < dy.values.size(); ++k) {
      dy.values[k] = y.values[k] > 0.0 ? d_in.values[k] * mask.values[k] : 0.0;
    }
    std::vector<double> sum_dxhat(width, 0.0), sum_dxhat_xhat(width, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < width; ++f) {
        const double g = dy(i, f);
        grads.gamma[h][f] += g * xhat(i, f);
        grads.beta[h][f] += g;
        const double dxh = g * tp.gamma[h][f];
        sum_dxhat[f] += dxh;
        sum_dxhat_xhat[f] += dxh * xhat(i, f);
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    Matrix dz(n, width);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < width; ++f) {
        const double dxh = dy(i, f) * tp.gamma[h][f];
        dz(i, f) = cache.inv_std[h][f] * inv_n *
                   (static_cast<double>(n) * dxh - sum_dxhat[f] - xhat(i, f) * sum_dxhat_xhat[f]);
      }
    }
    delta = std::move(dz);
  }
  return grads;
}

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One AdamW update of a single tensor at 1-based step `step`:
/// p -= lr*wd*p, then p -= lr * m_hat / (sqrt(v_hat) + eps).
inline void adamw_update(std::span<double> p, std::span<const double> g, std::span<double> m,
                         std::span<double> v, std::uint64_t step, double lr, double weight_decay,
                         const AdamHyper& hyper) {
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] -= lr * weight_decay * p[i];
    m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
    v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    p[i] -= lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
  }
}

/// Applies one AdamW step to every trainable tensor. Weight decay reaches the
/// linear weights only.
inline void adamw_step(MlpParams& params, AdamState& state, ParamSet grads, const TrainConfig& cfg,
                       double lr_now) {
  if (!(lr_now > 0.0)) throw ArgumentError("learning rate must be > 0");
  visit_tensors(
      [](const std::string& name, bool, std::span<double> g) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (!std::isfinite(g[i])) {
            throw TrainingError("non-finite gradient in " + name + " at index " + std::to_string(i));
          }
        }
      },
      grads);
  const std::uint64_t step = params.steps + 1;
  const AdamHyper hyper{cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
  visit_tensors(
      [&](const std::string&, bool decays, std::span<double> p, std::span<double> g, std::span<double> m,
          std::span<double> v) { adamw_update(p, g, m, v, step, lr_now, decays ? cfg.weight_decay : 0.0, hyper); },
      params.trainable, grads, state.m, state.v);
  params.steps = step;
  ++params.revision;
}

/// Folds a train-mode batch's statistics into the running estimates
/// (unbiased variance, exponential average with bn_momentum).
inline void update_running_stats(MlpParams& params, const ForwardCache& cache) {
  const double mom = params.arch.bn_momentum;
  const double n = static_cast<double>(cache.batch);
  const double unbias = n > 1.0 ? n / (n - 1.0) : 1.0;
  for (std::size_t l = 0; l < kHiddenLayers; ++l) {
    for (std::size_t f = 0; f < params.arch.hidden_dims[l]; ++f) {
      params.running_mean[l][f] = (1.0 - mom) * params.running_mean[l][f] + mom * cache.batch_mean[l][f];
      params.running_var[l][f] = (1.0 - mom) * params.running_var[l][f] + mom * cache.batch_var[l][f] * unbias;
    }
  }
  ++params.revision;
}

/// What the trainer reports for every optimizer step.
struct BatchInfo {
  int epoch = 0;
  std::size_t step = 0;  // global, 0-based
  std::span<const std::size_t> row_pairs;  // source pair index of each batch row
  std::span<const double> row_labels;      // 0 normal, 1 anomaly
  double loss = 0.0;
  double lr = 0.0;
};

using BatchObserver = std::function<void(const BatchInfo&)>;

struct TrainResult {
  MlpParams params;
  std::vector<double> epoch_losses;  // sample-weighted mean loss per epoch
  std::size_t steps = 0;
};

inline std::size_t steps_per_epoch(std::size_t n_pairs, std::size_t batch_size) {
  const std::size_t pairs_per_batch = batch_size / 2;
  return (n_pairs + pairs_per_batch - 1) / pairs_per_batch;
}

/// Trains the detector on paired text embeddings. Each batch holds
/// batch_size/2 pairs with both members present (normals labeled 0, then
/// anomalies labeled 1); the final partial batch is kept.
inline TrainResult train(const PairedEmbeddingSet& pairs, const MlpArchitecture& arch, const TrainConfig& cfg,
                         const BatchObserver& observer = {}) {
  arch.validate();
  cfg.validate();
  if (pairs.size() == 0) throw ArgumentError("training set is empty");
  if (pairs.dim() != arch.input_dim) {
    throw ArgumentError("training embeddings have dim " + std::to_string(pairs.dim()) +
                        ", detector expects " + std::to_string(arch.input_dim));
  }

  const Matrix normals = Matrix::from_embeddings(cfg.normalize_inputs ? l2_normalize(pairs.normals) : pairs.normals);
  const Matrix anomalies =
      Matrix::from_embeddings(cfg.normalize_inputs ? l2_normalize(pairs.anomalies) : pairs.anomalies);

  TrainResult result;
  result.params = MlpParams::initialize(arch, cfg.seed);
  AdamState adam = AdamState::zeros(arch);
  Xoshiro256 shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  Xoshiro256 dropout_rng(derive_seed(cfg.seed, "dropout"));

  const std::size_t n_pairs = pairs.size();
  const std::size_t pairs_per_batch = cfg.batch_size / 2;
  std::vector<std::size_t> order(n_pairs);
  std::vector<double> labels;
  std::vector<std::size_t> row_pairs;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(std::span(order));
    const double lr_now = cfg.lr_at_epoch(epoch);
    double epoch_loss = 0.0;
    std::size_t epoch_rows = 0;

    for (std::size_t start = 0; start < n_pairs; start += pairs_per_batch) {
      const std::size_t count = std::min(pairs_per_batch, n_pairs - start);
      std::span<const std::size_t> members(order.data() + start, count);
      row_pairs.resize(2 * count);
      labels.assign(2 * count, 0.0);
      for (std::size_t i = 0; i < count; ++i) {
        row_pairs[i] = members[i];
        row_pairs[count + i] = members[i];
        labels[count + i] = 1.0;
      }
      Matrix batch(2 * count, arch.input_dim);
      for (std::size_t r = 0; r < batch.rows; ++r) {
        auto src = labels[r] == 0.0 ? normals.row(row_pairs[r]) : anomalies.row(row_pairs[r]);
        std::copy(src.begin(), src.end(), batch.row(r).begin());
      }

      auto fwd = forward(result.params, batch, Mode::train, dropout_rng);
      auto loss = bce_with_logits(fwd.logits, labels);
      if (!std::isfinite(loss.loss)) {
        throw TrainingError("loss became non-finite at step " + std::to_string(result.steps));
      }
      auto grads = backward(result.params, *fwd.cache, loss.d_logits);
      adamw_step(result.params, adam, std::move(grads), cfg, lr_now);
      update_running_stats(result.params, *fwd.cache);

      if (observer) observer(BatchInfo{epoch, result.steps, row_pairs, labels, loss.loss, lr_now});
      epoch_loss += loss.loss * static_cast<double>(2 * count);
      epoch_rows += 2 * count;
      ++result.steps;
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(epoch_rows));
  }
  return result;
}

/// Eval-mode logits for every row.
inline std::vector<double> predict_logits(const MlpParams& params, const EmbeddingMatrix& images, bool normalize) {
  if (!params.trained()) throw StateError("detector has not been trained");
  if (images.dim() != params.arch.input_dim) {
    throw ArgumentError("image embeddings have dim " + std::to_string(images.dim()) + ", detector expects " +
                        std::to_string(params.arch.input_dim));
  }
  if (images.count() == 0) return {};
  Xoshiro256 unused(0);
  return forward(params, normalize ? l2_normalize(images) : images, Mode::eval, unused).logits;
}

/// s_fnn = sigmoid(logit) for every image row.
inline ScoreVector score_fnn(const MlpParams& params, const EmbeddingMatrix& images, bool normalize) {
  auto logits = predict_logits(params, images, normalize);
  for (auto& z : logits) z = sigmoid(z);
  return ScoreVector::identity_ids(std::move(logits), ScoreKind::s_fnn);
}

}  // namespace randprompt
