#pragma once

// Dense feed-forward classifier: tanh hidden layers, two sigmoid outputs,
// mean quadratic cost, and mini-batch gradient descent with L2 weight decay,
// momentum, per-epoch learning-rate decay and early stopping.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include "json.hpp"
#include "lagtrend/error.hpp"
#include "lagtrend/features.hpp"

namespace lagtrend {

/// Disables early stopping.
inline constexpr std::size_t kNoPatience = std::numeric_limits<std::size_t>::max();

struct NetworkConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_layers{400, 400, 400, 400, 400};
  std::optional<std::size_t> bottleneck;
  std::size_t output_dim = 2;
  double learning_rate = 0.05;
  double lr_decay = 0.97;  // multiplicative, applied once per epoch
  double momentum = 0.9;
  double l2_lambda = 1e-4;
  std::size_t batch_size = 100;
  std::size_t max_epochs = 50;
  std::size_t early_stop_patience = 5;
  std::uint64_t rng_seed = 0;
  double sigmoid_midpoint = 0.0;

  /// Input, hidden (with the bottleneck after the first ceil(h/2) hidden
  /// layers) and output widths, in order.
  std::vector<std::size_t> layer_widths() const {
    std::vector<std::size_t> widths{input_dim};
    const std::size_t split = (hidden_layers.size() + 1) / 2;
    for (std::size_t i = 0; i < hidden_layers.size(); ++i) {
      if (i == split && bottleneck) widths.push_back(*bottleneck);
      widths.push_back(hidden_layers[i]);
    }
    if (bottleneck && split == hidden_layers.size()) widths.push_back(*bottleneck);
    widths.push_back(output_dim);
    return widths;
  }

  void validate() const {
    for (auto w : layer_widths())
      if (w == 0) throw ConfigError("network: every layer width must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("network: learning_rate must be positive");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("network: lr_decay must lie in (0, 1]");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("network: momentum must lie in [0, 1)");
    if (!(l2_lambda >= 0.0)) throw ConfigError("network: l2_lambda must be non-negative");
    if (batch_size == 0 || max_epochs == 0 || early_stop_patience == 0)
      throw ConfigError("network: batch_size, max_epochs and early_stop_patience must be positive");
  }
};

struct Layer {
  Eigen::MatrixXd weights;  // fan_out x fan_in
  Eigen::VectorXd bias;
  Eigen::MatrixXd weight_velocity;
  Eigen::VectorXd bias_velocity;
};

struct NetworkModel {
  NetworkConfig config;
  std::vector<Layer> layers;
  std::mt19937_64 rng;  // drives mini-batch order once initialized
};

/// Weights ~ N(0, 2/fan_in), zero biases and velocities.
inline NetworkModel init(const NetworkConfig& config) {
  config.validate();
  NetworkModel model{config, {}, std::mt19937_64{config.rng_seed}};
  const auto widths = config.layer_widths();
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(widths[l]);
    const auto fan_out = static_cast<Eigen::Index>(widths[l + 1]);
    std::normal_distribution<double> gauss(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    Layer layer;
    layer.weights.resize(fan_out, fan_in);
    for (Eigen::Index c = 0; c < fan_in; ++c)
      for (Eigen::Index r = 0; r < fan_out; ++r) layer.weights(r, c) = gauss(model.rng);
    layer.bias = Eigen::VectorXd::Zero(fan_out);
    layer.weight_velocity = Eigen::MatrixXd::Zero(fan_out, fan_in);
    layer.bias_velocity = Eigen::VectorXd::Zero(fan_out);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

/// Activations of every layer for a column-per-example batch; entry 0 is the
/// input and the last entry the sigmoid output.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;

  const Eigen::MatrixXd& output() const { return activations.back(); }
};

inline ForwardCache forward(const NetworkModel& model, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != static_cast<Eigen::Index>(model.config.input_dim))
    throw DataError("forward: input has " + std::to_string(inputs.rows()) + " features, network expects " +
                    std::to_string(model.config.input_dim));
  ForwardCache cache;
  cache.activations.reserve(model.layers.size() + 1);
  cache.activations.push_back(inputs);
  const double x0 = model.config.sigmoid_midpoint;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    Eigen::MatrixXd z = layer.weights * cache.activations.back();
    z.colwise() += layer.bias;
    if (l + 1 < model.layers.size())
      cache.activations.push_back(z.array().tanh().matrix());
    else
      cache.activations.push_back((1.0 / (1.0 + (-(z.array() - x0)).exp())).matrix());
  }
  return cache;
}

inline std::pair<Eigen::VectorXd, ForwardCache> forward(const NetworkModel& model, const Eigen::VectorXd& input) {
  auto cache = forward(model, Eigen::MatrixXd(input));
  Eigen::VectorXd out = cache.output().col(0);
  return {std::move(out), std::move(cache)};
}

/// Mean over examples of 0.5 * sum_j (yhat_j - y_j)^2.
inline double quadratic_cost(const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& targets) {
  if (outputs.cols() == 0) return 0.0;
  return 0.5 * (outputs - targets).squaredNorm() / static_cast<double>(outputs.cols());
}

inline double cost(const NetworkModel& model, const Dataset& data) {
  return quadratic_cost(forward(model, data.inputs).output(), data.targets);
}

struct GradientSet {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  double cost = 0.0;
};

/// Reverse-mode gradient of the mean quadratic cost (the L2 term is applied
/// by sgd_step, not here).
inline GradientSet backward(const NetworkModel& model, const Eigen::MatrixXd& inputs,
                            const Eigen::MatrixXd& targets) {
  if (inputs.cols() == 0) throw DataError("backward: empty batch");
  if (targets.rows() != static_cast<Eigen::Index>(model.config.output_dim) || targets.cols() != inputs.cols())
    throw DataError("backward: target shape mismatch");
  const auto cache = forward(model, inputs);
  const auto& out = cache.output();
  const double m = static_cast<double>(inputs.cols());

  GradientSet grads;
  const std::size_t n_layers = model.layers.size();
  grads.weights.resize(n_layers);
  grads.biases.resize(n_layers);
  grads.cost = quadratic_cost(out, targets);

  Eigen::MatrixXd delta = ((out - targets).array() * out.array() * (1.0 - out.array())).matrix() / m;
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& a_prev = cache.activations[l];
    grads.weights[l].noalias() = delta * a_prev.transpose();
    grads.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = model.layers[l].weights.transpose() * delta;
      delta = (back.array() * (1.0 - a_prev.array().square())).matrix();
    }
  }
  return grads;
}

inline GradientSet backward(const NetworkModel& model, const Dataset& batch) {
  return backward(model, batch.inputs, batch.targets);
}

inline double effective_learning_rate(const NetworkConfig& config, std::size_t epoch) {
  return config.learning_rate * std::pow(config.lr_decay, static_cast<double>(epoch));
}

/// Heavy-ball update w' = w - eta*dE/dw - eta*lambda*w + mu*(w - w_prev),
/// with eta decayed per epoch. The velocity buffers hold w - w_prev; with
/// mu = 0 the expression is evaluated exactly as the plain weight-decay step.
/// Biases are not decayed.
inline void sgd_step(NetworkModel& model, const GradientSet& grads, std::size_t epoch) {
  const auto& cfg = model.config;
  const double eta = effective_learning_rate(cfg, epoch);
  const double eta_lambda = eta * cfg.l2_lambda;
  const double mu = cfg.momentum;
  if (grads.weights.size() != model.layers.size()) throw DataError("sgd_step: gradient layer count mismatch");
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& layer = model.layers[l];
    if (grads.weights[l].rows() != layer.weights.rows() || grads.weights[l].cols() != layer.weights.cols() ||
        grads.biases[l].size() != layer.bias.size())
      throw DataError("sgd_step: gradient shape mismatch");
    Eigen::MatrixXd w = ((layer.weights.array() - eta * grads.weights[l].array()) -
                         eta_lambda * layer.weights.array() + mu * layer.weight_velocity.array())
                            .matrix();
    Eigen::VectorXd b =
        ((layer.bias.array() - eta * grads.biases[l].array()) + mu * layer.bias_velocity.array()).matrix();
    layer.weight_velocity = w - layer.weights;
    layer.bias_velocity = b - layer.bias;
    layer.weights = std::move(w);
    layer.bias = std::move(b);
  }
}

struct EpochLoss {
  double train = 0.0;
  double validation = 0.0;
};

struct TrainReport {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;  // 1-based
  double best_validation_loss = std::numeric_limits<double>::infinity();
  bool stopped_early = false;
  std::vector<EpochLoss> loss_curve;
};

namespace detail {

inline Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& m, std::span<const std::size_t> idx) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k)
    out.col(static_cast<Eigen::Index>(k)) = m.col(static_cast<Eigen::Index>(idx[k]));
  return out;
}

}  // namespace detail

/// Shuffled mini-batch training. Stops once the validation loss has failed
/// to improve for `early_stop_patience` consecutive epochs (or at
/// `max_epochs`) and restores the weights of the best validation epoch.
inline TrainReport train(NetworkModel& model, const Dataset& train_set, const Dataset& validation_set) {
  const auto& cfg = model.config;
  if (validation_set.empty()) throw ConfigError("train: validation set is empty");
  if (train_set.empty()) throw ConfigError("train: training set is empty");
  if (cfg.batch_size > train_set.size())
    throw ConfigError("train: batch_size " + std::to_string(cfg.batch_size) + " exceeds training set size " +
                      std::to_string(train_set.size()));

  TrainReport report;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Layer> best = model.layers;
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), model.rng);
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      const auto grads = backward(model, detail::gather_columns(train_set.inputs, idx),
                                  detail::gather_columns(train_set.targets, idx));
      sgd_step(model, grads, epoch);
    }
    const EpochLoss loss{cost(model, train_set), cost(model, validation_set)};
    report.loss_curve.push_back(loss);
    report.epochs_run = epoch + 1;
    if (loss.validation < report.best_validation_loss) {
      report.best_validation_loss = loss.validation;
      report.best_epoch = epoch + 1;
      best = model.layers;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      report.stopped_early = true;
      break;
    }
  }
  model.layers = std::move(best);
  return report;
}

/// Argmax of the two outputs; a tie goes to down.
inline Direction predict_class(const Eigen::VectorXd& outputs) {
  return outputs(1) > outputs(0) ? Direction::up : Direction::down;
}

inline Direction predict_class(const NetworkModel& model, const Eigen::VectorXd& input) {
  return predict_class(forward(model, input).first);
}

inline std::vector<Direction> predict_classes(const NetworkModel& model, const Eigen::MatrixXd& inputs) {
  const auto cache = forward(model, inputs);
  std::vector<Direction> out;
  out.reserve(static_cast<std::size_t>(inputs.cols()));
  for (Eigen::Index i = 0; i < inputs.cols(); ++i) out.push_back(predict_class(cache.output().col(i)));
  return out;
}

// Checkpoints: JSON with the config and row-major weight/bias arrays.

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json to_json(const NetworkConfig& c) {
  nlohmann::json j{{"input_dim", c.input_dim},
                   {"hidden_layers", c.hidden_layers},
                   {"output_dim", c.output_dim},
                   {"learning_rate", c.learning_rate},
                   {"lr_decay", c.lr_decay},
                   {"momentum", c.momentum},
                   {"l2_lambda", c.l2_lambda},
                   {"batch_size", c.batch_size},
                   {"max_epochs", c.max_epochs},
                   {"early_stop_patience", c.early_stop_patience},
                   {"rng_seed", c.rng_seed},
                   {"sigmoid_midpoint", c.sigmoid_midpoint}};
  j["bottleneck"] = c.bottleneck ? nlohmann::json(*c.bottleneck) : nlohmann::json(nullptr);
  return j;
}

inline NetworkConfig network_config_from_json(const nlohmann::json& j) {
  NetworkConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.hidden_layers = j.at("hidden_layers").get<std::vector<std::size_t>>();
  if (!j.at("bottleneck").is_null()) c.bottleneck = j.at("bottleneck").get<std::size_t>();
  c.output_dim = j.at("output_dim").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.lr_decay = j.at("lr_decay").get<double>();
  c.momentum = j.at("momentum").get<double>();
  c.l2_lambda = j.at("l2_lambda").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.early_stop_patience = j.at("early_stop_patience").get<std::size_t>();
  c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  c.sigmoid_midpoint = j.at("sigmoid_midpoint").get<double>();
  return c;
}

inline void save_checkpoint(std::ostream& out, const NetworkModel& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : model.layers) {
    std::vector<double> w(static_cast<std::size_t>(layer.weights.size()));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        w.data(), layer.weights.rows(), layer.weights.cols()) = layer.weights;
    layers.push_back({{"rows", layer.weights.rows()},
                      {"cols", layer.weights.cols()},
                      {"weights", w},
                      {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}});
  }
  out << nlohmann::json{{"format", "lagtrend-network"},
                        {"version", kCheckpointVersion},
                        {"config", to_json(model.config)},
                        {"layers", layers}}
             .dump();
}

/// Restores weights and biases; velocities restart at zero.
inline NetworkModel load_checkpoint(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  if (j.value("format", "") != "lagtrend-network" || j.value("version", 0) != kCheckpointVersion)
    throw DataError("checkpoint: unsupported format or version");
  NetworkModel model;
  model.config = network_config_from_json(j.at("config"));
  model.rng.seed(model.config.rng_seed);
  const auto widths = model.config.layer_widths();
  const auto& layers = j.at("layers");
  if (layers.size() + 1 != widths.size()) throw DataError("checkpoint: layer count does not match config");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto rows = layers[l].at("rows").get<Eigen::Index>();
    const auto cols = layers[l].at("cols").get<Eigen::Index>();
    auto w = layers[l].at("weights").get<std::vector<double>>();
    auto b = layers[l].at("bias").get<std::vector<double>>();
    if (rows != static_cast<Eigen::Index>(widths[l + 1]) || cols != static_cast<Eigen::Index>(widths[l]) ||
        static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows)
      throw DataError("checkpoint: layer shape mismatch");
    Layer layer;
    layer.weights = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(w.data(), rows, cols);
    layer.bias = Eigen::Map<Eigen::VectorXd>(b.data(), rows);
    layer.weight_velocity = Eigen::MatrixXd::Zero(rows, cols);
    layer.bias_velocity = Eigen::VectorXd::Zero(rows);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

}  // namespace lagtrend
