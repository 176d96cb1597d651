#pragma once

// A small fully connected network with a shared encoder and scalar output
// heads, reverse-mode gradients, Adam, dropout and early stopping.
//
// Architecture for hidden widths h_0..h_{L-1}:
//
//   a_0 = relu(W_0 x + b_0) + P x          (P only when residual is on)
//   a_k = relu(W_k a_{k-1} + b_k)          k = 1..L-1
//   out_j = act_j(w_j . a_{L-1} + c_j)     one row per head
//
// The skip path P is the identity when input_dim == h_0 and a learned
// projection otherwise. Dropout is inverted (scaled by 1/(1-p) at train time)
// and applied after every hidden activation.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aldsurv/core.hpp"

namespace aldsurv {

enum class Activation { exp, softplus, identity };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::exp: return "exp";
    case Activation::softplus: return "softplus";
    case Activation::identity: return "identity";
  }
  return "identity";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "exp") return Activation::exp;
  if (s == "softplus") return Activation::softplus;
  if (s == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

struct MlpConfig {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims{32, 32};
  std::vector<Activation> heads{Activation::exp, Activation::exp, Activation::exp};
  double dropout_rate = 0.1;
  bool residual = true;

  std::size_t head_count() const { return heads.size(); }
  bool has_skip_projection() const { return residual && input_dim != hidden_dims.front(); }

  void validate() const {
    if (input_dim == 0) throw std::invalid_argument("MlpConfig: input_dim must be positive");
    if (hidden_dims.empty()) throw std::invalid_argument("MlpConfig: need at least one hidden layer");
    for (auto h : hidden_dims)
      if (h == 0) throw std::invalid_argument("MlpConfig: hidden widths must be positive");
    if (heads.empty()) throw std::invalid_argument("MlpConfig: need at least one head");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
      throw std::invalid_argument("MlpConfig: dropout_rate must lie in [0, 1)");
  }

  bool operator==(const MlpConfig&) const = default;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

struct MlpParams {
  std::vector<DenseLayer> hidden;
  Eigen::MatrixXd skip;  // h_0 x input_dim, empty unless the projection is used
  DenseLayer head;       // head_count x h_{L-1}
  // Bumped on every optimizer update; forward caches record it.
  std::uint64_t revision = 0;

  static MlpParams zeros(const MlpConfig& config) {
    config.validate();
    MlpParams p;
    std::size_t in = config.input_dim;
    for (auto width : config.hidden_dims) {
      p.hidden.push_back({Eigen::MatrixXd::Zero(width, in), Eigen::VectorXd::Zero(width)});
      in = width;
    }
    if (config.has_skip_projection())
      p.skip = Eigen::MatrixXd::Zero(config.hidden_dims.front(), config.input_dim);
    p.head = {Eigen::MatrixXd::Zero(config.head_count(), in),
              Eigen::VectorXd::Zero(config.head_count())};
    return p;
  }

  // He-uniform weights for the ReLU layers and LeCun-uniform for the skip
  // projection. Head weights use a tenth of the LeCun bound so the initial
  // outputs stay close to the head biases. All biases start at zero.
  static MlpParams initialize(const MlpConfig& config, Rng& rng) {
    MlpParams p = zeros(config);
    auto fill = [&](Eigen::MatrixXd& w, double gain) {
      const double bound = std::sqrt(gain / static_cast<double>(w.cols()));
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-bound, bound);
    };
    for (auto& layer : p.hidden) fill(layer.weight, 6.0);
    if (p.skip.size() > 0) fill(p.skip, 3.0);
    fill(p.head.weight, 0.03);
    return p;
  }

  template <class F>
  void for_each_tensor(F&& f) {
    for (auto& layer : hidden) {
      f(layer.weight);
      f(layer.bias);
    }
    if (skip.size() > 0) f(skip);
    f(head.weight);
    f(head.bias);
  }

  template <class F>
  void for_each_tensor(F&& f) const {
    const_cast<MlpParams*>(this)->for_each_tensor([&](const auto& t) { f(t); });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_tensor([&](const auto& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    for_each_tensor([&](const auto& t) { ok = ok && t.allFinite(); });
    return ok;
  }

  bool same_shape(const MlpParams& other) const {
    if (hidden.size() != other.hidden.size()) return false;
    for (std::size_t k = 0; k < hidden.size(); ++k) {
      if (hidden[k].weight.rows() != other.hidden[k].weight.rows() ||
          hidden[k].weight.cols() != other.hidden[k].weight.cols())
        return false;
    }
    return skip.rows() == other.skip.rows() && skip.cols() == other.skip.cols() &&
           head.weight.rows() == other.head.weight.rows() &&
           head.weight.cols() == other.head.weight.cols();
  }

  // Flat copy of every scalar, in for_each_tensor order.
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for_each_tensor([&](const auto& t) { out.insert(out.end(), t.data(), t.data() + t.size()); });
    return out;
  }

  void assign(std::span<const double> flat) {
    if (flat.size() != parameter_count())
      throw std::invalid_argument("MlpParams::assign: wrong parameter count");
    std::size_t offset = 0;
    for_each_tensor([&](auto& t) {
      std::copy_n(flat.data() + offset, t.size(), t.data());
      offset += static_cast<std::size_t>(t.size());
    });
    ++revision;
  }
};

namespace detail {

inline constexpr double exp_clamp = 60.0;

inline double apply_activation(Activation a, double z) {
  switch (a) {
    case Activation::exp: return std::exp(std::clamp(z, -exp_clamp, exp_clamp));
    case Activation::softplus:
      if (z > 30.0) return z;
      if (z < -700.0) return std::exp(-700.0);
      return std::log1p(std::exp(z));
    case Activation::identity: return z;
  }
  return z;
}

// d act / d z, given both the pre-activation and the activated value.
inline double activation_derivative(Activation a, double z, double out) {
  switch (a) {
    case Activation::exp: return std::abs(z) > exp_clamp ? 0.0 : out;
    case Activation::softplus: return 1.0 / (1.0 + std::exp(-z));
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

}  // namespace detail

// Activations retained by a forward pass for the backward pass.
struct ForwardCache {
  Eigen::MatrixXd input;                 // n x input_dim
  std::vector<Eigen::MatrixXd> pre;      // relu inputs per hidden layer
  std::vector<Eigen::MatrixXd> post;     // layer outputs after residual and dropout
  std::vector<Eigen::MatrixXd> dropout;  // per-unit scale (0 or 1/(1-p)); empty at inference
  Eigen::MatrixXd head_pre;
  Eigen::MatrixXd head_out;
  const MlpParams* params = nullptr;
  std::uint64_t revision = 0;
};

// Batched forward pass; rows of x are records. Returns n x head_count outputs.
// Dropout is drawn from rng only when training is true.
inline Eigen::MatrixXd forward_batch(const MlpParams& params, const MlpConfig& config,
                                     const Eigen::MatrixXd& x, bool training, Rng* rng,
                                     ForwardCache* cache = nullptr) {
  if (static_cast<std::size_t>(x.cols()) != config.input_dim)
    throw std::invalid_argument("forward: expected " + std::to_string(config.input_dim) +
                                " covariates, got " + std::to_string(x.cols()));
  if (params.hidden.size() != config.hidden_dims.size())
    throw std::invalid_argument("forward: parameters do not match the configuration");
  const bool use_dropout = training && config.dropout_rate > 0.0;
  if (use_dropout && rng == nullptr) throw std::invalid_argument("forward: dropout needs an rng");

  if (cache) {
    cache->input = x;
    cache->pre.clear();
    cache->post.clear();
    cache->dropout.clear();
    cache->params = &params;
    cache->revision = params.revision;
  }

  const double keep_scale = use_dropout ? 1.0 / (1.0 - config.dropout_rate) : 1.0;
  Eigen::MatrixXd current = x;
  for (std::size_t k = 0; k < params.hidden.size(); ++k) {
    const auto& layer = params.hidden[k];
    Eigen::MatrixXd pre = (current * layer.weight.transpose()).rowwise() + layer.bias.transpose();
    Eigen::MatrixXd act = pre.cwiseMax(0.0);
    if (k == 0 && config.residual) {
      if (config.has_skip_projection())
        act += x * params.skip.transpose();
      else
        act += x;
    }
    if (use_dropout) {
      Eigen::MatrixXd mask(act.rows(), act.cols());
      for (Eigen::Index j = 0; j < mask.cols(); ++j)
        for (Eigen::Index i = 0; i < mask.rows(); ++i)
          mask(i, j) = rng->bernoulli(config.dropout_rate) ? 0.0 : keep_scale;
      act.array() *= mask.array();
      if (cache) cache->dropout.push_back(std::move(mask));
    }
    if (cache) {
      cache->pre.push_back(std::move(pre));
      cache->post.push_back(act);
    }
    current = std::move(act);
  }

  Eigen::MatrixXd head_pre =
      (current * params.head.weight.transpose()).rowwise() + params.head.bias.transpose();
  Eigen::MatrixXd out(head_pre.rows(), head_pre.cols());
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const Activation a = config.heads[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      out(i, j) = detail::apply_activation(a, head_pre(i, j));
  }
  if (cache) {
    cache->head_pre = std::move(head_pre);
    cache->head_out = out;
  }
  return out;
}

// Single-record convenience wrapper.
inline std::vector<double> forward(std::span<const double> x, const MlpParams& params,
                                   const MlpConfig& config, bool training = false,
                                   Rng* rng = nullptr) {
  Eigen::MatrixXd row(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = x[i];
  const Eigen::MatrixXd out = forward_batch(params, config, row, training, rng);
  return {out.data(), out.data() + out.size()};
}

// Gradient of a loss with respect to every parameter, given the loss
// gradient at the (activated) head outputs of the cached forward pass.
inline MlpParams backward(const ForwardCache& cache, const Eigen::MatrixXd& grad_out,
                          const MlpParams& params, const MlpConfig& config) {
  if (cache.params != &params || cache.revision != params.revision)
    throw std::logic_error("backward: forward cache is stale for these parameters");
  if (grad_out.rows() != cache.head_out.rows() || grad_out.cols() != cache.head_out.cols())
    throw std::invalid_argument("backward: gradient shape does not match head outputs");

  MlpParams grads = MlpParams::zeros(config);
  const std::size_t layers = params.hidden.size();

  Eigen::MatrixXd d_pre(grad_out.rows(), grad_out.cols());
  for (Eigen::Index j = 0; j < d_pre.cols(); ++j) {
    const Activation a = config.heads[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < d_pre.rows(); ++i)
      d_pre(i, j) = grad_out(i, j) *
                    detail::activation_derivative(a, cache.head_pre(i, j), cache.head_out(i, j));
  }
  grads.head.weight = d_pre.transpose() * cache.post.back();
  grads.head.bias = d_pre.colwise().sum().transpose();
  Eigen::MatrixXd d_post = d_pre * params.head.weight;

  for (std::size_t k = layers; k-- > 0;) {
    Eigen::MatrixXd d_act = d_post;
    if (!cache.dropout.empty()) d_act.array() *= cache.dropout[k].array();
    const Eigen::MatrixXd d_relu =
        (cache.pre[k].array() > 0.0).select(d_act, Eigen::MatrixXd::Zero(d_act.rows(), d_act.cols()));
    const Eigen::MatrixXd& layer_input = k == 0 ? cache.input : cache.post[k - 1];
    grads.hidden[k].weight = d_relu.transpose() * layer_input;
    grads.hidden[k].bias = d_relu.colwise().sum().transpose();
    if (k == 0 && config.has_skip_projection()) grads.skip = d_act.transpose() * cache.input;
    if (k > 0) d_post = d_relu * params.hidden[k].weight;
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamOptions {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // L2 penalty folded into the gradient.
  double weight_decay = 0.0;
};

// One bias-corrected Adam update on flat buffers. `step` is the 1-based
// index of this update.
inline void adam_update(std::span<double> params, std::span<const double> grads,
                        std::span<double> m, std::span<double> v, std::uint64_t step,
                        const AdamOptions& opt) {
  if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size())
    throw std::invalid_argument("adam_update: buffer sizes differ");
  if (step == 0) throw std::invalid_argument("adam_update: step counter starts at 1");
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] + opt.weight_decay * params[i];
    m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g;
    v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g * g;
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    params[i] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
  }
}

struct AdamState {
  MlpParams m;
  MlpParams v;
  std::uint64_t step = 0;

  static AdamState for_params(const MlpParams& like) {
    AdamState s{like, like, 0};
    s.m.for_each_tensor([](auto& t) { t.setZero(); });
    s.v.for_each_tensor([](auto& t) { t.setZero(); });
    return s;
  }
};

inline void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state,
                      const AdamOptions& opt) {
  if (!params.same_shape(grads) || !params.same_shape(state.m) || !params.same_shape(state.v))
    throw std::invalid_argument("adam_step: parameter, gradient and state shapes differ");
  ++state.step;
  std::vector<double*> p_ptrs, m_ptrs, v_ptrs;
  std::vector<const double*> g_ptrs;
  std::vector<std::size_t> sizes;
  params.for_each_tensor([&](auto& t) {
    p_ptrs.push_back(t.data());
    sizes.push_back(static_cast<std::size_t>(t.size()));
  });
  grads.for_each_tensor([&](const auto& t) { g_ptrs.push_back(t.data()); });
  state.m.for_each_tensor([&](auto& t) { m_ptrs.push_back(t.data()); });
  state.v.for_each_tensor([&](auto& t) { v_ptrs.push_back(t.data()); });
  for (std::size_t i = 0; i < p_ptrs.size(); ++i) {
    adam_update({p_ptrs[i], sizes[i]}, {g_ptrs[i], sizes[i]}, {m_ptrs[i], sizes[i]},
                {v_ptrs[i], sizes[i]}, state.step, opt);
  }
  ++params.revision;
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 128;
  double learning_rate = 0.01;
  double validation_fraction = 0.2;
  // Epochs without validation improvement before stopping; 0 disables.
  std::size_t early_stop_patience = 10;
  std::uint64_t seed = 0;
  double weight_decay = 0.0;
  // Return the best-validation parameters rather than the last ones.
  bool restore_best = true;

  void validate() const {
    if (epochs == 0) throw std::invalid_argument("TrainConfig: epochs must be positive");
    if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
      throw std::invalid_argument("TrainConfig: validation_fraction must lie in (0, 1)");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
  }
};

struct EpochRecord {
  std::size_t epoch;  // 0 is the untrained network
  double train_loss;
  double validation_loss;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_validation_loss = std::numeric_limits<double>::infinity();
  bool stopped_early = false;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
};

struct TrainedNetwork {
  MlpParams params;
  TrainLog log;
};

// A training objective scores the head outputs of a set of dataset rows.
// `loss` returns the mean loss over `rows` and, when grad is non-null, fills
// it with d(mean loss)/d(outputs) (rows.size() x head_count).
template <class O>
concept BatchObjective = requires(O& o, const Eigen::MatrixXd& out,
                                  std::span<const std::size_t> rows, Eigen::MatrixXd* grad) {
  { o.loss(out, rows, grad) } -> std::convertible_to<double>;
};

namespace detail {

inline Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

template <BatchObjective O>
double evaluate_mean_loss(const MlpParams& params, const MlpConfig& config,
                          const Eigen::MatrixXd& x, std::span<const std::size_t> rows,
                          O& objective) {
  if (rows.empty()) return 0.0;
  const Eigen::MatrixXd out = forward_batch(params, config, gather_rows(x, rows), false, nullptr);
  return objective.loss(out, rows, nullptr);
}

}  // namespace detail

// Minibatch Adam with a seeded validation split. Epoch 0 in the log is the
// untrained network; the returned parameters come from the best validation
// epoch when restore_best is set.
template <BatchObjective O>
TrainedNetwork train(const Eigen::MatrixXd& x, O& objective, const MlpConfig& mlp,
                     const TrainConfig& cfg) {
  mlp.validate();
  cfg.validate();
  const auto n = static_cast<std::size_t>(x.rows());
  if (n == 0) throw TrainingError("train: empty dataset");
  if (static_cast<std::size_t>(x.cols()) != mlp.input_dim)
    throw std::invalid_argument("train: covariate dimension does not match input_dim");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(mix_seed(cfg.seed, 1));
  split_rng.shuffle(order);
  std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * n));
  if (n >= 2) n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  else n_val = 0;
  std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_rows.begin(), val_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  // Too small to hold anything out: select on the training loss instead.
  const std::vector<std::size_t>& select_rows = val_rows.empty() ? train_rows : val_rows;

  Rng init_rng(mix_seed(cfg.seed, 2));
  Rng step_rng(mix_seed(cfg.seed, 3));

  TrainedNetwork result{MlpParams::initialize(mlp, init_rng), {}};
  if constexpr (requires { objective.initial_head_bias(); }) {
    const std::vector<double> bias = objective.initial_head_bias();
    if (bias.size() != mlp.head_count())
      throw std::invalid_argument("train: initial head bias has the wrong length");
    for (std::size_t j = 0; j < bias.size(); ++j)
      result.params.head.bias(static_cast<Eigen::Index>(j)) = bias[j];
  }
  result.log.train_size = train_rows.size();
  result.log.validation_size = val_rows.size();
  MlpParams params = result.params;
  AdamState adam = AdamState::for_params(params);
  const AdamOptions opt{.learning_rate = cfg.learning_rate, .weight_decay = cfg.weight_decay};

  auto begin_epoch = [&](const MlpParams& p) {
    if constexpr (requires { objective.begin_epoch(p, mlp, x, std::span<const std::size_t>{}); }) {
      objective.begin_epoch(p, mlp, x, std::span<const std::size_t>(train_rows));
    }
  };

  begin_epoch(params);
  {
    const double tr = detail::evaluate_mean_loss(params, mlp, x, train_rows, objective);
    const double va = detail::evaluate_mean_loss(params, mlp, x, select_rows, objective);
    if (!std::isfinite(va) || !std::isfinite(tr))
      throw TrainingError("train: non-finite loss for the initial network");
    result.log.epochs.push_back({0, tr, va});
    result.log.best_epoch = 0;
    result.log.best_validation_loss = va;
  }

  std::size_t since_best = 0;
  std::vector<std::size_t> batch_order = train_rows;
  ForwardCache cache;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (epoch > 1) begin_epoch(params);
    step_rng.shuffle(batch_order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < batch_order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(batch_order.size(), start + cfg.batch_size);
      std::span<const std::size_t> rows(batch_order.data() + start, stop - start);
      const Eigen::MatrixXd out =
          forward_batch(params, mlp, detail::gather_rows(x, rows), true, &step_rng, &cache);
      Eigen::MatrixXd grad_out(out.rows(), out.cols());
      const double loss = objective.loss(out, rows, &grad_out);
      if (!std::isfinite(loss) || !grad_out.allFinite())
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch starting at " + std::to_string(start));
      loss_sum += loss * static_cast<double>(rows.size());
      const MlpParams grads = backward(cache, grad_out, params, mlp);
      adam_step(params, grads, adam, opt);
      if (!params.all_finite())
        throw TrainingError("train: parameters became non-finite at epoch " + std::to_string(epoch));
    }
    const double train_loss = loss_sum / static_cast<double>(batch_order.size());
    const double val_loss = detail::evaluate_mean_loss(params, mlp, x, select_rows, objective);
    if (!std::isfinite(val_loss))
      throw TrainingError("train: non-finite validation loss at epoch " + std::to_string(epoch));
    result.log.epochs.push_back({epoch, train_loss, val_loss});

    if (val_loss < result.log.best_validation_loss) {
      result.log.best_validation_loss = val_loss;
      result.log.best_epoch = epoch;
      if (cfg.restore_best) result.params = params;
      since_best = 0;
    } else if (cfg.early_stop_patience > 0 && ++since_best >= cfg.early_stop_patience) {
      result.log.stopped_early = true;
      break;
    }
  }
  if (!cfg.restore_best) result.params = params;
  result.params.revision = 0;
  return result;
}

}  // namespace aldsurv
