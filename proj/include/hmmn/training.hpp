#pragma once

#include <map>
#include <string>
#include <vector>

#include "hmmn/data.hpp"
#include "hmmn/gradients.hpp"

namespace hmmn {

enum class Optimizer { sgd, momentum, adam };

inline std::string to_string(Optimizer o) {
  switch (o) {
    case Optimizer::sgd: return "sgd";
    case Optimizer::momentum: return "momentum";
    case Optimizer::adam: return "adam";
  }
  return "sgd";
}

inline Optimizer parse_optimizer(const std::string& s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "momentum") return Optimizer::momentum;
  if (s == "adam") return Optimizer::adam;
  throw ConfigError("unknown optimizer '" + s + "'");
}

// Defaults: plain SGD, lr 0.005, batch 8, up to 50 epochs, early stopping on
// dev accuracy with patience 10 (ties keep the earlier epoch).
template <typename T>
struct TrainConfig {
  T lr = T(0.005);
  std::size_t batch = 8;
  std::size_t epochs = 50;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  Variant variant{};
  T lambda = T(0.45);
  std::size_t hops = 2;
  std::size_t d = 40, d_w = 32, d_r = 36;  // must match the vocabulary/data
  Optimizer optimizer = Optimizer::sgd;
  T momentum = T(0.9);
  T adam_beta1 = T(0.9), adam_beta2 = T(0.999), adam_eps = T(1e-8);
  T clip_norm = T(0);  // 0 = off
  AffinityMode affinity = AffinityMode::answer_dot;
  bool normalize_coattention = false;
  std::size_t threads = 1;

  void validate() const {
    if (!(lr >= T(0))) throw ConfigError("TrainConfig: lr must be >= 0");
    if (batch < 1) throw ConfigError("TrainConfig: batch must be >= 1");
    if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
    if (patience < 1) throw ConfigError("TrainConfig: patience must be >= 1");
    if (hops < 1) throw ConfigError("TrainConfig: hops must be >= 1");
  }
};

template <typename T>
struct EpochStats {
  T train_loss{};
  double dev_accuracy = 0.0;
};

template <typename T>
struct Metrics {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
  // question type -> (correct, total); buckets partition the dataset
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_type;
  std::vector<EpochStats<T>> history;
  std::size_t best_epoch = 0;  // 1-based epoch the returned parameters come from
};

// Scaled uniform init, a = sqrt(6 / (fan_in + fan_out)), drawn in storage
// order from a label-derived stream per matrix.
template <typename T>
ModelParams<T> init_params(std::size_t d, std::size_t d_w, std::size_t d_r,
                           T lambda, std::size_t hops, std::uint64_t seed) {
  ModelParams<T> params;
  params.lambda = lambda;
  params.hops = hops;
  params.W1 = Matrix<T>(d_w, d);
  params.W2 = Matrix<T>(d_r, d_w);
  {
    SplitMix64 rng(derive_seed(seed, "init-w1"));
    const double a = std::sqrt(6.0 / static_cast<double>(d_w + d));
    for (auto& x : params.W1.data()) x = static_cast<T>(rng.uniform(-a, a));
  }
  {
    SplitMix64 rng(derive_seed(seed, "init-w2"));
    const double a = std::sqrt(6.0 / static_cast<double>(d_r + d_w));
    for (auto& x : params.W2.data()) x = static_cast<T>(rng.uniform(-a, a));
  }
  params.validate();
  return params;
}

template <typename T>
Metrics<T> evaluate(const ModelParams<T>& params, const Dataset<T>& data,
                    const Vocabulary<T>& vocab, const Variant& variant,
                    std::size_t threads = 1, AffinityMode affinity = AffinityMode::answer_dot,
                    bool normalize_coattention = false) {
  if (data.instances.empty()) throw DimensionError("evaluate: empty dataset");
  ForwardOptions<T> opts = forward_options(params);
  opts.affinity = affinity;
  opts.normalize_coattention = normalize_coattention;

  std::vector<unsigned char> hit(data.instances.size(), 0);
  parallel_for(data.instances.size(), threads, [&](std::size_t i) {
    EncodedInstance<T> enc = encode_instance(data.instances[i], vocab, params);
    Prediction<T> pred = forward_variant(enc, variant, opts);
    hit[i] = pred.argmax == data.instances[i].gold ? 1 : 0;
  });

  Metrics<T> metrics;
  metrics.total = data.instances.size();
  for (std::size_t i = 0; i < data.instances.size(); ++i) {
    auto& bucket = metrics.per_type[question_type(data.instances[i].question)];
    bucket.second += 1;
    if (hit[i]) {
      bucket.first += 1;
      metrics.correct += 1;
    }
  }
  metrics.accuracy = static_cast<double>(metrics.correct) /
                     static_cast<double>(metrics.total);
  return metrics;
}

template <typename T>
struct TrainResult {
  ModelParams<T> params;
  Metrics<T> metrics;  // dev metrics of the returned (best) parameters
};

namespace detail {

template <typename T>
void clip_gradients(Gradients<T>& g, T max_norm) {
  if (!(max_norm > T(0))) return;
  T sq{};
  for (T x : g.dW1.data()) sq += x * x;
  for (T x : g.dW2.data()) sq += x * x;
  T norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  T scale = max_norm / norm;
  for (T& x : g.dW1.data()) x *= scale;
  for (T& x : g.dW2.data()) x *= scale;
}

template <typename T>
struct OptimizerState {
  Matrix<T> m1, m2;  // momentum / adam first moment
  Matrix<T> v1, v2;  // adam second moment
  std::size_t steps = 0;

  void init(const ModelParams<T>& p) {
    m1 = Matrix<T>(p.W1.rows(), p.W1.cols());
    m2 = Matrix<T>(p.W2.rows(), p.W2.cols());
    v1 = Matrix<T>(p.W1.rows(), p.W1.cols());
    v2 = Matrix<T>(p.W2.rows(), p.W2.cols());
  }
};

template <typename T>
void apply_update(ModelParams<T>& params, const Gradients<T>& g,
                  const TrainConfig<T>& cfg, OptimizerState<T>& state) {
  auto step = [&](Matrix<T>& W, const Matrix<T>& dW, Matrix<T>& m, Matrix<T>& v) {
    switch (cfg.optimizer) {
      case Optimizer::sgd:
        for (std::size_t i = 0; i < W.data().size(); ++i)
          W.data()[i] -= cfg.lr * dW.data()[i];
        break;
      case Optimizer::momentum:
        for (std::size_t i = 0; i < W.data().size(); ++i) {
          m.data()[i] = cfg.momentum * m.data()[i] + dW.data()[i];
          W.data()[i] -= cfg.lr * m.data()[i];
        }
        break;
      case Optimizer::adam: {
        const T t = static_cast<T>(state.steps);
        const T c1 = T(1) - std::pow(cfg.adam_beta1, t);
        const T c2 = T(1) - std::pow(cfg.adam_beta2, t);
        for (std::size_t i = 0; i < W.data().size(); ++i) {
          m.data()[i] = cfg.adam_beta1 * m.data()[i] + (T(1) - cfg.adam_beta1) * dW.data()[i];
          v.data()[i] = cfg.adam_beta2 * v.data()[i] +
                        (T(1) - cfg.adam_beta2) * dW.data()[i] * dW.data()[i];
          W.data()[i] -= cfg.lr * (m.data()[i] / c1) /
                         (std::sqrt(v.data()[i] / c2) + cfg.adam_eps);
        }
        break;
      }
    }
  };
  state.steps += 1;
  step(params.W1, g.dW1, state.m1, state.v1);
  step(params.W2, g.dW2, state.m2, state.v2);
}

}  // namespace detail

// SGD loop with per-epoch seeded shuffles and early stopping on dev
// accuracy. Returns the parameters of the best dev epoch (ties keep the
// earlier epoch). Aborts with a diagnostic if the loss stops being finite.
template <typename T>
TrainResult<T> train(const TrainConfig<T>& cfg, const Dataset<T>& train_set,
                     const Dataset<T>& dev_set, const Vocabulary<T>& vocab) {
  cfg.validate();
  if (train_set.instances.empty() || dev_set.instances.empty())
    throw DimensionError("train: empty train or dev set");

  ModelParams<T> params =
      init_params<T>(cfg.d, cfg.d_w, cfg.d_r, cfg.lambda, cfg.hops, cfg.seed);
  detail::OptimizerState<T> opt_state;
  opt_state.init(params);

  GradOptions<T> gopts;
  gopts.variant = cfg.variant;
  gopts.affinity = cfg.affinity;
  gopts.normalize_coattention = cfg.normalize_coattention;
  gopts.threads = cfg.threads;

  TrainResult<T> result;
  result.params = params;
  double best_acc = -1.0;
  std::size_t since_best = 0;

  std::vector<std::size_t> order(train_set.instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    SplitMix64 rng(derive_seed(cfg.seed, "shuffle", epoch));
    shuffle(order, rng);

    T loss_sum{};
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch) {
      std::vector<RawInstance<T>> batch;
      for (std::size_t i = begin; i < std::min(begin + cfg.batch, order.size()); ++i)
        batch.push_back(train_set.instances[order[i]]);
      Gradients<T> g = backward(batch, vocab, params, gopts);
      if (!std::isfinite(static_cast<double>(g.loss_value)))
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(batches));
      detail::clip_gradients(g, cfg.clip_norm);
      detail::apply_update(params, g, cfg, opt_state);
      loss_sum += g.loss_value;
      ++batches;
    }

    Metrics<T> dev = evaluate(params, dev_set, vocab, cfg.variant, cfg.threads,
                              cfg.affinity, cfg.normalize_coattention);
    EpochStats<T> stats;
    stats.train_loss = loss_sum / static_cast<T>(batches);
    stats.dev_accuracy = dev.accuracy;
    result.metrics.history.push_back(stats);

    if (dev.accuracy > best_acc) {
      best_acc = dev.accuracy;
      result.params = params;
      result.metrics.best_epoch = epoch;
      since_best = 0;
    } else {
      since_best += 1;
      if (since_best >= cfg.patience) break;
    }
  }

  auto history = std::move(result.metrics.history);
  std::size_t best_epoch = result.metrics.best_epoch;
  result.metrics = evaluate(result.params, dev_set, vocab, cfg.variant, cfg.threads,
                            cfg.affinity, cfg.normalize_coattention);
  result.metrics.history = std::move(history);
  result.metrics.best_epoch = best_epoch;
  return result;
}

}  // namespace hmmn
