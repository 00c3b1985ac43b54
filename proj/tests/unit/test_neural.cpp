#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "lagtrend/neural.hpp"

using namespace lagtrend;

namespace {

NetworkConfig small_config(std::size_t in, std::vector<std::size_t> hidden, std::uint64_t seed = 1) {
  NetworkConfig c;
  c.input_dim = in;
  c.hidden_layers = std::move(hidden);
  c.rng_seed = seed;
  return c;
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = u(rng);
  return m;
}

Eigen::MatrixXd one_hot_targets(Eigen::Index m, std::mt19937_64& rng) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(2, m);
  for (Eigen::Index i = 0; i < m; ++i) t(static_cast<Eigen::Index>(rng() % 2), i) = 1.0;
  return t;
}

// Loop-based forward pass written independently of the Eigen expressions.
std::vector<double> dense_oracle(const NetworkModel& model, const std::vector<double>& x) {
  std::vector<double> a = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& w = model.layers[l].weights;
    std::vector<double> z(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      double s = model.layers[l].bias(r);
      for (Eigen::Index c = 0; c < w.cols(); ++c) s += w(r, c) * a[static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(r)] = l + 1 < model.layers.size() ? std::tanh(s) : 1.0 / (1.0 + std::exp(-s));
    }
    a = z;
  }
  return a;
}

}  // namespace

TEST(NetworkConfig, LayerWidthsWithBottleneck) {
  auto c = small_config(448, {400, 400, 400, 400, 400});
  c.bottleneck = 1;
  EXPECT_EQ(c.layer_widths(), (std::vector<std::size_t>{448, 400, 400, 400, 1, 400, 400, 2}));
  c.bottleneck.reset();
  EXPECT_EQ(c.layer_widths(), (std::vector<std::size_t>{448, 400, 400, 400, 400, 400, 2}));
  auto one = small_config(3, {8});
  one.bottleneck = 2;
  EXPECT_EQ(one.layer_widths(), (std::vector<std::size_t>{3, 8, 2, 2}));
  auto zero = small_config(3, {0});
  EXPECT_THROW(init(zero), ConfigError);
}

TEST(Init, DeterministicGaussianScale) {
  const auto a = init(small_config(400, {400}, 7));
  const auto b = init(small_config(400, {400}, 7));
  EXPECT_EQ(a.layers[0].weights, b.layers[0].weights);
  const auto& w = a.layers[0].weights;
  const double mean = w.mean();
  const double var = (w.array() - mean).square().sum() / static_cast<double>(w.size() - 1);
  EXPECT_NEAR(var, 2.0 / 400.0, 0.2 * 2.0 / 400.0);
  EXPECT_TRUE(a.layers[0].bias.isZero(0.0));
  EXPECT_TRUE(a.layers[0].weight_velocity.isZero(0.0));
}

TEST(Forward, ZeroWeightsGiveHalf) {
  auto m = init(small_config(3, {4, 4}));
  for (auto& l : m.layers) l.weights.setZero();
  const auto [out, cache] = forward(m, Eigen::VectorXd(Eigen::Vector3d{1, -2, 3}));
  EXPECT_EQ(out(0), 0.5);
  EXPECT_EQ(out(1), 0.5);
  EXPECT_TRUE(cache.activations[1].isZero(0.0));
}

TEST(Forward, MatchesDenseOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = init(small_config(2, {3}, static_cast<std::uint64_t>(trial)));
    for (auto& l : m.layers) l.bias = random_matrix(l.bias.size(), 1, rng);
    const Eigen::VectorXd x = random_matrix(2, 1, rng);
    const auto [out, cache] = forward(m, x);
    const auto expect = dense_oracle(m, {x(0), x(1)});
    EXPECT_NEAR(out(0), expect[0], 1e-12);
    EXPECT_NEAR(out(1), expect[1], 1e-12);
  }
}

TEST(Forward, OutputAndHiddenRanges) {
  std::mt19937_64 rng(8);
  auto m = init(small_config(6, {10, 10}));
  const auto cache = forward(m, Eigen::MatrixXd(random_matrix(6, 50, rng) * 100.0));
  for (std::size_t l = 1; l + 1 < cache.activations.size(); ++l)
    EXPECT_TRUE((cache.activations[l].array().abs() <= 1.0).all());
  EXPECT_TRUE((cache.output().array() >= 0.0).all() && (cache.output().array() <= 1.0).all());
  EXPECT_THROW(forward(m, Eigen::MatrixXd(5, 1)), DataError);
}

TEST(Forward, MidpointShiftsSigmoid) {
  auto c = small_config(1, {1});
  c.sigmoid_midpoint = 1.0;
  auto m = init(c);
  for (auto& l : m.layers) l.weights.setZero();
  const auto [out, cache] = forward(m, Eigen::VectorXd(Eigen::VectorXd::Zero(1)));
  EXPECT_NEAR(out(0), 1.0 / (1.0 + std::exp(1.0)), 1e-15);
}

TEST(Backward, MatchesCentralDifferences) {
  std::mt19937_64 rng(99);
  const double eps = 1e-5;
  auto check = [&](NetworkModel& m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    const auto g = backward(m, x, y);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      auto probe = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + eps;
        const double up = quadratic_cost(forward(m, x).output(), y);
        param = saved - eps;
        const double down = quadratic_cost(forward(m, x).output(), y);
        param = saved;
        const double numeric = (up - down) / (2 * eps);
        const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
        EXPECT_LT(std::abs(numeric - analytic) / scale, 1e-5) << "layer " << l;
      };
      for (Eigen::Index i = 0; i < m.layers[l].weights.size(); ++i)
        probe(m.layers[l].weights(i), g.weights[l](i));
      for (Eigen::Index i = 0; i < m.layers[l].bias.size(); ++i) probe(m.layers[l].bias(i), g.biases[l](i));
    }
  };
  auto c = small_config(5, {4, 4}, 3);
  auto m = init(c);
  check(m, random_matrix(5, 7, rng), one_hot_targets(7, rng));
  c.bottleneck = 1;
  auto b = init(c);
  check(b, random_matrix(5, 7, rng), one_hot_targets(7, rng));
}

TEST(Backward, PerfectPredictionAndDuplication) {
  std::mt19937_64 rng(5);
  auto m = init(small_config(3, {4}));
  const Eigen::MatrixXd x = random_matrix(3, 6, rng);
  const Eigen::MatrixXd y = forward(m, x).output();
  const auto g = backward(m, x, y);
  for (const auto& w : g.weights) EXPECT_TRUE(w.isZero(0.0));

  const auto t = one_hot_targets(6, rng);
  const auto once = backward(m, x, t);
  Eigen::MatrixXd x2(3, 12), t2(2, 12);
  x2 << x, x;
  t2 << t, t;
  const auto twice = backward(m, x2, t2);
  for (std::size_t l = 0; l < once.weights.size(); ++l) EXPECT_TRUE(once.weights[l].isApprox(twice.weights[l], 1e-12));
  EXPECT_THROW(backward(m, Eigen::MatrixXd(3, 0), Eigen::MatrixXd(2, 0)), DataError);
}

TEST(SgdStep, ReducesToPlainWeightDecayStep) {
  std::mt19937_64 rng(12);
  auto c = small_config(3, {4});
  c.momentum = 0.0;
  c.lr_decay = 1.0;
  c.learning_rate = 0.3;
  c.l2_lambda = 0.01;
  auto m = init(c);
  const auto g = backward(m, random_matrix(3, 5, rng), one_hot_targets(5, rng));
  std::vector<Eigen::MatrixXd> expect;
  const double eta = c.learning_rate, lambda = c.l2_lambda;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    Eigen::MatrixXd w = m.layers[l].weights;
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = w(i) - eta * g.weights[l](i) - eta * lambda * w(i);
    expect.push_back(w);
  }
  sgd_step(m, g, 4);
  for (std::size_t l = 0; l < m.layers.size(); ++l)
    for (Eigen::Index i = 0; i < expect[l].size(); ++i)
      EXPECT_EQ(m.layers[l].weights(i), expect[l](i));  // bitwise
}

TEST(SgdStep, ScalarQuadraticTrajectory) {
  // One linear-in-w cost surrogate: feed gradient 2(w - 3) by hand.
  auto c = small_config(1, {1});
  c.momentum = 0.0;
  c.l2_lambda = 0.0;
  c.lr_decay = 1.0;
  c.learning_rate = 0.1;
  auto m = init(c);
  double w = m.layers[0].weights(0, 0), expect = w;
  for (int step = 0; step < 30; ++step) {
    GradientSet g;
    for (const auto& l : m.layers) {
      g.weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
      g.biases.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
    g.weights[0](0, 0) = 2.0 * (m.layers[0].weights(0, 0) - 3.0);
    sgd_step(m, g, static_cast<std::size_t>(step));
    expect = 3.0 + (expect - 3.0) * 0.8;
  }
  w = m.layers[0].weights(0, 0);
  EXPECT_NEAR(w, expect, 1e-12);
}

TEST(SgdStep, PureDecayAndScheduledRate) {
  auto c = small_config(2, {3});
  c.momentum = 0.0;
  c.l2_lambda = 0.1;
  c.learning_rate = 0.5;
  c.lr_decay = 0.95;
  auto m = init(c);
  GradientSet zero;
  for (const auto& l : m.layers) {
    zero.weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
    zero.biases.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  const Eigen::MatrixXd before = m.layers[0].weights;
  sgd_step(m, zero, 10);
  const double eta_e = 0.5 * std::pow(0.95, 10);
  EXPECT_DOUBLE_EQ(effective_learning_rate(c, 10), eta_e);
  EXPECT_TRUE(m.layers[0].weights.isApprox(before * (1.0 - eta_e * 0.1), 1e-14));

  // Frozen unit gradient with no decay: the step magnitude is the scheduled rate.
  m.config.l2_lambda = 0.0;
  auto unit = zero;
  unit.weights[0].setOnes();
  const Eigen::MatrixXd w0 = m.layers[0].weights;
  m.layers[0].weight_velocity.setZero();
  sgd_step(m, unit, 10);
  EXPECT_TRUE((w0 - m.layers[0].weights).isApprox(Eigen::MatrixXd::Constant(w0.rows(), w0.cols(), eta_e), 1e-12));
}

TEST(SgdStep, MomentumMatchesVelocityForm) {
  std::mt19937_64 rng(1);
  auto c = small_config(3, {4});
  c.momentum = 0.9;
  c.l2_lambda = 1e-3;
  auto m = init(c);
  Eigen::MatrixXd w = m.layers[0].weights, v = Eigen::MatrixXd::Zero(w.rows(), w.cols());
  for (std::size_t epoch = 0; epoch < 5; ++epoch) {
    const auto g = backward(m, random_matrix(3, 4, rng), one_hot_targets(4, rng));
    const double eta = effective_learning_rate(c, epoch);
    v = c.momentum * v - eta * (g.weights[0] + c.l2_lambda * w);
    w += v;
    sgd_step(m, g, epoch);
    EXPECT_TRUE(m.layers[0].weights.isApprox(w, 1e-12));
  }
}

TEST(Train, XorReachesFullAccuracy) {
  Dataset xor_set;
  xor_set.inputs.resize(2, 4);
  xor_set.inputs << 0, 0, 1, 1,
                    0, 1, 0, 1;
  xor_set.targets.resize(2, 4);
  xor_set.targets << 1, 0, 0, 1,
                     0, 1, 1, 0;
  auto c = small_config(2, {8}, 3);
  c.batch_size = 4;
  c.max_epochs = 5000;
  c.early_stop_patience = kNoPatience;
  c.lr_decay = 1.0;
  c.learning_rate = 0.5;
  auto m = init(c);
  const auto report = train(m, xor_set, xor_set);
  EXPECT_EQ(report.epochs_run, 5000u);
  const auto pred = predict_classes(m, xor_set.inputs);
  EXPECT_EQ(pred, (std::vector<Direction>{Direction::down, Direction::up, Direction::up, Direction::down}));
}

TEST(Train, EarlyStoppingRestoresBestEpoch) {
  std::mt19937_64 rng(6);
  Dataset tr, va;
  tr.inputs = random_matrix(4, 200, rng);
  tr.targets = Eigen::MatrixXd::Zero(2, 200);
  for (Eigen::Index i = 0; i < 200; ++i) tr.targets(tr.inputs(0, i) > 0 ? 1 : 0, i) = 1.0;
  va.inputs = tr.inputs;
  va.targets = Eigen::MatrixXd::Ones(2, 200) - tr.targets;  // learning the task hurts validation
  auto c = small_config(4, {6}, 2);
  c.batch_size = 20;
  c.early_stop_patience = 3;
  c.learning_rate = 0.5;
  c.lr_decay = 1.0;
  c.momentum = 0.0;
  auto m = init(c);
  const auto report = train(m, tr, va);
  for (std::size_t e = 1; e < report.loss_curve.size(); ++e)
    ASSERT_GT(report.loss_curve[e].validation, report.loss_curve[e - 1].validation);
  EXPECT_EQ(report.epochs_run, 4u);
  EXPECT_TRUE(report.stopped_early);
  EXPECT_EQ(report.best_epoch, 1u);
  EXPECT_EQ(report.best_validation_loss, report.loss_curve[0].validation);
  EXPECT_EQ(cost(m, va), report.loss_curve[0].validation);
}

TEST(Train, InfinitePatienceRunsAllEpochsAndIsDeterministic) {
  std::mt19937_64 rng(7);
  Dataset d;
  d.inputs = random_matrix(3, 60, rng);
  d.targets = one_hot_targets(60, rng);
  auto c = small_config(3, {5}, 9);
  c.batch_size = 16;
  c.max_epochs = 12;
  c.early_stop_patience = kNoPatience;
  auto a = init(c), b = init(c);
  const auto ra = train(a, d, d), rb = train(b, d, d);
  EXPECT_EQ(ra.epochs_run, 12u);
  EXPECT_FALSE(ra.stopped_early);
  double best = ra.loss_curve[0].validation;
  for (const auto& l : ra.loss_curve) best = std::min(best, l.validation);
  EXPECT_EQ(ra.best_validation_loss, best);
  for (std::size_t e = 0; e < ra.loss_curve.size(); ++e) EXPECT_EQ(ra.loss_curve[e].train, rb.loss_curve[e].train);
  EXPECT_EQ(a.layers[0].weights, b.layers[0].weights);
}

TEST(Train, Preconditions) {
  Dataset d;
  d.inputs = Eigen::MatrixXd::Zero(2, 10);
  d.targets = Eigen::MatrixXd::Zero(2, 10);
  auto c = small_config(2, {3});
  c.batch_size = 11;
  auto m = init(c);
  EXPECT_THROW(train(m, d, Dataset{}), ConfigError);
  EXPECT_THROW(train(m, d, d), ConfigError);
}

TEST(Predict, ArgmaxWithDownTie) {
  EXPECT_EQ(predict_class(Eigen::Vector2d{0.8, 0.3}), Direction::down);
  EXPECT_EQ(predict_class(Eigen::Vector2d{0.5, 0.5}), Direction::down);
  EXPECT_EQ(predict_class(Eigen::Vector2d{0.2, 0.3}), Direction::up);
  std::mt19937_64 rng(3);
  auto m = init(small_config(4, {6}));
  const Eigen::MatrixXd x = random_matrix(4, 30, rng);
  const auto batch = predict_classes(m, x);
  const auto out = forward(m, x).output();
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    EXPECT_EQ(batch[static_cast<std::size_t>(i)], out(1, i) > out(0, i) ? Direction::up : Direction::down);
    EXPECT_EQ(batch[static_cast<std::size_t>(i)], predict_class(m, Eigen::VectorXd(x.col(i))));
  }
}

TEST(Checkpoint, RoundTripReproducesPredictionsBitwise) {
  std::mt19937_64 rng(4);
  auto c = small_config(5, {7, 7}, 11);
  c.bottleneck = 2;
  c.early_stop_patience = kNoPatience - 1;
  auto m = init(c);
  std::stringstream buf;
  save_checkpoint(buf, m);
  const auto back = load_checkpoint(buf);
  EXPECT_EQ(back.config.layer_widths(), c.layer_widths());
  EXPECT_EQ(back.config.early_stop_patience, c.early_stop_patience);
  const Eigen::MatrixXd x = random_matrix(5, 20, rng);
  EXPECT_EQ(forward(back, x).output(), forward(m, x).output());
  std::istringstream bad("{\"format\":\"other\"}");
  EXPECT_THROW(load_checkpoint(bad), DataError);
  std::istringstream garbage("not json");
  EXPECT_THROW(load_checkpoint(garbage), DataError);
}
