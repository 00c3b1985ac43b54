#pragma once

// Synthetic multi-stock panels with planted lag-1 cross-stock dependence.
//
// Each step t, stock j's log-price moves by
//   r_j(t) = mu(t) + s * A * tanh(z_j(t)) + (1 - s) * sigma(t) * eps
//   z_j(t) = sum_k C_jk * u_k(t - 1)
// where u_k is stock k's previous-step trend gradient (fit_trend over that
// step's ticks, divided by the opening price and rescaled to unit order),
// C has a zero diagonal, s is the signal strength and A the signal scale.
// The step is drawn as `ticks_per_step` prices along a straight log-price
// path plus independent micro-noise, so gradients over sub-step windows are
// noisier than full-step ones.
//
// The optional crisis regime changes the mean return to crisis_drift, scales
// sigma, and adds market-wide sell-off waves: within each wave of
// `wave_length` steps the mean return declines by `wave_decline` per step
// around crisis_drift, then snaps back.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lagtrend/error.hpp"
#include "lagtrend/features.hpp"
#include "lagtrend/market_data.hpp"
#include "lagtrend/rng.hpp"
#include "lagtrend/time.hpp"

namespace lagtrend {

struct RegimeSwitch {
  std::size_t switch_step = 0;
  double crisis_drift = -0.002;
  double crisis_sigma_multiplier = 1.5;
  std::size_t wave_length = 10;
  double wave_decline = 0.002;
};

struct SyntheticConfig {
  std::size_t n_stocks = 20;
  std::size_t n_steps = 3000;
  std::size_t ticks_per_step = 16;
  double signal_strength = 0.0;
  Eigen::MatrixXd coupling;         // n x n, zero diagonal; empty = drawn from seed
  std::size_t coupling_degree = 4;  // drivers per stock when drawn
  double noise_sigma = 0.01;
  double signal_scale = 0.01;
  double micro_noise_sigma = 0.001;
  double drift = 0.0;
  std::optional<RegimeSwitch> regime_switch;
  double initial_price = 100.0;
  Instant start = Instant{std::chrono::sys_days{std::chrono::year{2011} / 4 / 1}};
  Duration tick_interval = std::chrono::minutes{1};
  std::uint64_t seed = 1;

  void validate() const {
    if (n_stocks < 2 || n_steps < 2 || ticks_per_step < 2)
      throw ConfigError("synthetic: need n_stocks >= 2, n_steps >= 2 and ticks_per_step >= 2");
    if (!(signal_strength >= 0.0 && signal_strength <= 1.0))
      throw ConfigError("synthetic: signal_strength must lie in [0, 1]");
    if (noise_sigma < 0.0 || signal_scale < 0.0 || micro_noise_sigma < 0.0)
      throw ConfigError("synthetic: noise and scale parameters must be non-negative");
    if (!(initial_price > 0.0)) throw ConfigError("synthetic: initial_price must be positive");
    if (tick_interval.count() <= 0) throw ConfigError("synthetic: tick_interval must be positive");
    if (coupling.size() != 0) {
      if (coupling.rows() != static_cast<Eigen::Index>(n_stocks) || coupling.cols() != coupling.rows())
        throw ConfigError("synthetic: coupling matrix must be n_stocks x n_stocks");
      if (coupling.diagonal().cwiseAbs().maxCoeff() != 0.0)
        throw ConfigError("synthetic: coupling matrix must have a zero diagonal");
    }
    if (regime_switch) {
      if (regime_switch->switch_step >= n_steps) throw ConfigError("synthetic: switch_step beyond n_steps");
      if (!(regime_switch->crisis_sigma_multiplier > 0.0))
        throw ConfigError("synthetic: crisis_sigma_multiplier must be positive");
      if (regime_switch->wave_length == 0) throw ConfigError("synthetic: wave_length must be positive");
    }
  }

  double mean_return(std::size_t step) const {
    if (!regime_switch || step < regime_switch->switch_step) return drift;
    const auto& rs = *regime_switch;
    const auto k = static_cast<double>((step - rs.switch_step) % rs.wave_length);
    const double centre = 0.5 * static_cast<double>(rs.wave_length - 1);
    return rs.crisis_drift + rs.wave_decline * (centre - k);
  }

  double sigma(std::size_t step) const {
    if (regime_switch && step >= regime_switch->switch_step)
      return noise_sigma * regime_switch->crisis_sigma_multiplier;
    return noise_sigma;
  }
};

inline std::vector<std::string> synthetic_stock_ids(std::size_t n) {
  const std::size_t width = std::to_string(n - 1).size();
  std::vector<std::string> ids;
  for (std::size_t j = 0; j < n; ++j) {
    std::string num = std::to_string(j);
    ids.push_back("S" + std::string(width - num.size(), '0') + num);
  }
  return ids;
}

/// The configured coupling, or a sparse random one: each stock draws
/// `coupling_degree` distinct other stocks with N(0, 1) weights, rescaled to
/// a unit-norm row.
inline Eigen::MatrixXd resolve_coupling(const SyntheticConfig& config) {
  if (config.coupling.size() != 0) return config.coupling;
  const auto n = static_cast<Eigen::Index>(config.n_stocks);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  std::mt19937_64 rng(derive_seed(config.seed, "coupling"));
  std::normal_distribution<double> gauss;
  const std::size_t degree = std::min(config.coupling_degree, config.n_stocks - 1);
  std::vector<Eigen::Index> others;
  for (Eigen::Index j = 0; j < n; ++j) {
    others.clear();
    for (Eigen::Index k = 0; k < n; ++k)
      if (k != j) others.push_back(k);
    std::shuffle(others.begin(), others.end(), rng);
    for (std::size_t d = 0; d < degree; ++d) c(j, others[d]) = gauss(rng);
    const double norm = c.row(j).norm();
    if (norm > 0.0) c.row(j) /= norm;
  }
  return c;
}

/// Full simulation state, kept for the oracle and for tests.
struct Simulation {
  Eigen::MatrixXd prices;     // (n_steps * ticks_per_step) x n_stocks
  Eigen::MatrixXd gradients;  // n_steps x n_stocks, fit_trend slopes in price units
  Eigen::MatrixXd drive;      // n_steps x n_stocks, tanh(z_j(t)); zero at t = 0
};

inline Simulation simulate(const SyntheticConfig& config, const Eigen::MatrixXd& coupling, std::uint64_t seed) {
  config.validate();
  const std::size_t n = config.n_stocks;
  const std::size_t tps = config.ticks_per_step;
  const double s = config.signal_strength;
  const double amp = config.signal_scale;
  double ref = std::sqrt(0.5 * (s * amp) * (s * amp) + ((1.0 - s) * config.noise_sigma) * ((1.0 - s) * config.noise_sigma));
  if (!(ref > 0.0)) ref = 1.0;

  Simulation sim;
  sim.prices.resize(static_cast<Eigen::Index>(config.n_steps * tps), static_cast<Eigen::Index>(n));
  sim.gradients.resize(static_cast<Eigen::Index>(config.n_steps), static_cast<Eigen::Index>(n));
  sim.drive = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(config.n_steps), static_cast<Eigen::Index>(n));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd log_price = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), std::log(config.initial_price));
  Eigen::VectorXd unit_gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  std::vector<double> window(tps);

  for (std::size_t t = 0; t < config.n_steps; ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    const double mu = config.mean_return(t);
    const double sigma = config.sigma(t);
    Eigen::VectorXd drive = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    if (t > 0) drive = (coupling * unit_gradient).array().tanh().matrix();
    sim.drive.row(row) = drive.transpose();
    for (std::size_t j = 0; j < n; ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      const double r = mu + s * amp * drive(col) + (1.0 - s) * sigma * gauss(rng);
      const double base = log_price(col);
      for (std::size_t i = 0; i < tps; ++i) {
        const double lp = base + r * static_cast<double>(i + 1) / static_cast<double>(tps) +
                          config.micro_noise_sigma * gauss(rng);
        window[i] = std::exp(lp);
        sim.prices(static_cast<Eigen::Index>(t * tps + i), col) = window[i];
      }
      log_price(col) = base + r;
      const double slope = fit_trend(window).slope;
      sim.gradients(row, col) = slope;
      unit_gradient(col) = slope * static_cast<double>(tps) / std::exp(base) / ref;
    }
  }
  return sim;
}

inline PriceMatrix to_price_matrix(const SyntheticConfig& config, Eigen::MatrixXd prices) {
  PriceMatrix m;
  m.grid.start = config.start;
  m.grid.step = config.tick_interval;
  m.grid.count = static_cast<std::size_t>(prices.rows());
  m.timestamps = m.grid.instants();
  m.stock_ids = synthetic_stock_ids(config.n_stocks);
  m.fill_mask = PriceMatrix::Mask::Zero(prices.rows(), prices.cols());
  m.values = std::move(prices);
  return m;
}

inline PriceMatrix generate(const SyntheticConfig& config) {
  return to_price_matrix(config, simulate(config, resolve_coupling(config), config.seed).prices);
}

struct OracleBound {
  std::vector<double> per_stock;
  double estimate = 0.0;
  double monte_carlo_error = 0.0;
  std::size_t samples_per_stock = 0;
};

/// Monte-Carlo accuracy of the rule-aware predictor that knows the coupling,
/// the regime schedule and the target's signal drive at t-1 and t, and
/// predicts the sign of the expected change in the target's gradient. Given
/// those two drives the label is independent of the other stocks' gradients
/// at t-1 (the model's inputs), so no predictor fed those inputs can beat
/// this one in expectation.
inline OracleBound oracle_accuracy(const SyntheticConfig& config, std::size_t n_mc) {
  if (n_mc < 10000) throw ConfigError("oracle_accuracy: n_mc must be at least 10^4");
  config.validate();
  const auto coupling = resolve_coupling(config);
  const std::size_t n = config.n_stocks;
  const double s_amp = config.signal_strength * config.signal_scale;
  std::vector<std::size_t> hits(n, 0);
  std::size_t collected = 0;
  for (std::uint64_t rep = 0; collected < n_mc; ++rep) {
    const auto sim = simulate(config, coupling, derive_seed(config.seed, 0x0a11ce00 + rep));
    for (std::size_t t = 1; t < config.n_steps && collected < n_mc; ++t, ++collected) {
      const auto row = static_cast<Eigen::Index>(t);
      for (std::size_t j = 0; j < n; ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        const double expected_now = config.mean_return(t) + s_amp * sim.drive(row, col);
        const double expected_prev = config.mean_return(t - 1) + s_amp * sim.drive(row - 1, col);
        const Direction predicted = expected_now > expected_prev ? Direction::up : Direction::down;
        const Direction actual = direction_of_change(sim.gradients(row - 1, col), sim.gradients(row, col));
        hits[j] += predicted == actual ? 1 : 0;
      }
    }
  }
  OracleBound bound;
  bound.samples_per_stock = collected;
  double total = 0.0;
  for (auto h : hits) {
    bound.per_stock.push_back(static_cast<double>(h) / static_cast<double>(collected));
    total += bound.per_stock.back();
  }
  bound.estimate = total / static_cast<double>(n);
  bound.monte_carlo_error =
      std::sqrt(bound.estimate * (1.0 - bound.estimate) / static_cast<double>(collected * n));
  return bound;
}

}  // namespace lagtrend
