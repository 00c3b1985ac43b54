#pragma once

// Least-squares trend gradients, direction-change labels and min-max input
// scaling for leave-target-out examples.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lagtrend/error.hpp"
#include "lagtrend/market_data.hpp"
#include "lagtrend/time.hpp"

namespace lagtrend {

struct RegressionFit {
  double intercept = 0.0;
  double slope = 0.0;
};

/// Ordinary least squares of `prices` against abscissae 0..n-1.
inline RegressionFit fit_trend(std::span<const double> prices) {
  const std::size_t n = prices.size();
  if (n < 2) throw ConfigError("fit_trend: a window needs at least two prices");
  const double x_mean = 0.5 * static_cast<double>(n - 1);
  double y_mean = 0.0;
  for (double y : prices) y_mean += y;
  y_mean /= static_cast<double>(n);
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) sxy += (static_cast<double>(i) - x_mean) * (prices[i] - y_mean);
  const double nn = static_cast<double>(n);
  const double sxx = nn * (nn * nn - 1.0) / 12.0;
  const double slope = sxy / sxx;
  return {y_mean - slope * x_mean, slope};
}

/// Per-interval slopes: row k holds the fit over rows [k*s, (k+1)*s).
struct GradientMatrix {
  std::size_t step_size = 0;
  std::vector<std::string> stock_ids;
  Eigen::MatrixXd values;                  // intervals x stocks
  std::vector<Instant> interval_timestamps;  // last instant of each window

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }

  std::size_t column_of(const std::string& stock_id) const {
    for (std::size_t j = 0; j < stock_ids.size(); ++j)
      if (stock_ids[j] == stock_id) return j;
    throw ConfigError("unknown stock '" + stock_id + "'");
  }
};

inline GradientMatrix build_gradients(const PriceMatrix& matrix, std::size_t step_size) {
  if (step_size < 2) throw ConfigError("step_size must be at least 2 for a regression window");
  const std::size_t n = matrix.rows();
  if (n == 0 || n % step_size != 0)
    throw DataError("price rows (" + std::to_string(n) + ") not divisible by step size " +
                    std::to_string(step_size));
  const std::size_t intervals = n / step_size;
  GradientMatrix g;
  g.step_size = step_size;
  g.stock_ids = matrix.stock_ids;
  g.values.resize(static_cast<Eigen::Index>(intervals), static_cast<Eigen::Index>(matrix.cols()));
  for (std::size_t j = 0; j < matrix.cols(); ++j) {
    const double* column = matrix.values.col(static_cast<Eigen::Index>(j)).data();
    for (std::size_t k = 0; k < intervals; ++k)
      g.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
          fit_trend(std::span<const double>(column + k * step_size, step_size)).slope;
  }
  g.interval_timestamps.reserve(intervals);
  for (std::size_t k = 0; k < intervals; ++k)
    g.interval_timestamps.push_back(matrix.timestamps[(k + 1) * step_size - 1]);
  return g;
}

inline void write_gradient_csv(std::ostream& out, const GradientMatrix& g) {
  write_matrix_csv(out, g.interval_timestamps, g.stock_ids, g.values);
}

enum class Direction : std::uint8_t { down = 0, up = 1 };

inline const char* to_string(Direction d) { return d == Direction::up ? "up" : "down"; }

/// Inputs are the other stocks' gradients at t-1; the target says whether the
/// left-out stock's gradient rose from t-1 to t.
struct LabeledExample {
  std::vector<double> inputs;
  Direction target = Direction::down;
  std::string target_stock;
  std::size_t interval_index = 0;

  std::array<double, 2> one_hot() const {
    return target == Direction::up ? std::array<double, 2>{0.0, 1.0} : std::array<double, 2>{1.0, 0.0};
  }
};

/// Gradient-matrix columns feeding a model whose target is `target_col`.
inline std::vector<std::size_t> input_columns(std::size_t n_stocks, std::size_t target_col) {
  std::vector<std::size_t> cols;
  cols.reserve(n_stocks - 1);
  for (std::size_t j = 0; j < n_stocks; ++j)
    if (j != target_col) cols.push_back(j);
  return cols;
}

/// Ties (no change in gradient) are labeled down.
inline Direction direction_of_change(double previous, double current) {
  return current > previous ? Direction::up : Direction::down;
}

inline std::vector<LabeledExample> build_labels(const GradientMatrix& g, std::size_t target_col) {
  if (target_col >= g.cols()) throw ConfigError("build_labels: target column out of range");
  if (g.rows() < 2) throw DataError("build_labels: need at least two gradient intervals");
  const auto cols = input_columns(g.cols(), target_col);
  const auto tc = static_cast<Eigen::Index>(target_col);
  std::vector<LabeledExample> out;
  out.reserve(g.rows() - 1);
  for (std::size_t t = 1; t < g.rows(); ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    LabeledExample ex;
    ex.inputs.reserve(cols.size());
    for (auto c : cols) ex.inputs.push_back(g.values(row - 1, static_cast<Eigen::Index>(c)));
    ex.target = direction_of_change(g.values(row - 1, tc), g.values(row, tc));
    ex.target_stock = g.stock_ids[target_col];
    ex.interval_index = t;
    out.push_back(std::move(ex));
  }
  return out;
}

inline std::vector<LabeledExample> build_labels(const GradientMatrix& g, const std::string& target_stock) {
  return build_labels(g, g.column_of(target_stock));
}

/// Column-per-example design matrices, the layout the network consumes.
struct Dataset {
  Eigen::MatrixXd inputs;   // features x examples
  Eigen::MatrixXd targets;  // 2 x examples, one-hot

  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
  bool empty() const { return size() == 0; }
};

inline Dataset make_dataset(std::span<const LabeledExample> examples) {
  Dataset d;
  if (examples.empty()) return d;
  const auto dim = static_cast<Eigen::Index>(examples.front().inputs.size());
  const auto m = static_cast<Eigen::Index>(examples.size());
  d.inputs.resize(dim, m);
  d.targets.resize(2, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& ex = examples[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(ex.inputs.size()) != dim) throw DataError("make_dataset: ragged inputs");
    d.inputs.col(i) = Eigen::Map<const Eigen::VectorXd>(ex.inputs.data(), dim);
    const auto hot = ex.one_hot();
    d.targets(0, i) = hot[0];
    d.targets(1, i) = hot[1];
  }
  return d;
}

struct NormalizationParams {
  Eigen::VectorXd min;
  Eigen::VectorXd max;
};

/// Per-feature extrema over the columns of `inputs`.
inline NormalizationParams fit_normalizer(const Eigen::MatrixXd& inputs) {
  if (inputs.cols() == 0) throw DataError("fit_normalizer: empty training set");
  return {inputs.rowwise().minCoeff(), inputs.rowwise().maxCoeff()};
}

/// (x - min) / (max - min) per feature without clipping; a constant feature
/// maps to 0.5.
inline Eigen::MatrixXd apply_normalizer(const NormalizationParams& p, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != p.min.size()) throw DataError("apply_normalizer: feature count mismatch");
  Eigen::MatrixXd out(inputs.rows(), inputs.cols());
  for (Eigen::Index f = 0; f < inputs.rows(); ++f) {
    const double range = p.max(f) - p.min(f);
    if (range > 0.0)
      out.row(f) = (inputs.row(f).array() - p.min(f)) / range;
    else
      out.row(f).setConstant(0.5);
  }
  return out;
}

}  // namespace lagtrend
