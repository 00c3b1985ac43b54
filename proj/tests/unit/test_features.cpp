#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "lagtrend/features.hpp"

using namespace lagtrend;

namespace {

double residual_ss(std::span<const double> y, double b0, double b1) {
  double q = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - b0 - b1 * static_cast<double>(i);
    q += r * r;
  }
  return q;
}

PriceMatrix matrix_from(const Eigen::MatrixXd& values) {
  PriceMatrix m;
  m.grid.start = parse_timestamp_or_throw("2011-04-01T00:00:00Z");
  m.grid.step = std::chrono::minutes{1};
  m.grid.count = static_cast<std::size_t>(values.rows());
  m.timestamps = m.grid.instants();
  for (Eigen::Index j = 0; j < values.cols(); ++j) m.stock_ids.push_back("S" + std::to_string(j));
  m.values = values;
  m.fill_mask = PriceMatrix::Mask::Zero(values.rows(), values.cols());
  return m;
}

GradientMatrix gradients_from(const Eigen::MatrixXd& g) {
  GradientMatrix out;
  out.step_size = 2;
  out.values = g;
  for (Eigen::Index j = 0; j < g.cols(); ++j) out.stock_ids.push_back("S" + std::to_string(j));
  out.interval_timestamps.resize(static_cast<std::size_t>(g.rows()));
  return out;
}

}  // namespace

TEST(FitTrend, Examples) {
  const std::vector<double> line{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(fit_trend(line).slope, 1.0);
  EXPECT_DOUBLE_EQ(fit_trend(line).intercept, 1.0);
  const std::vector<double> flat{5, 5, 5};
  EXPECT_EQ(fit_trend(flat).slope, 0.0);
  const std::vector<double> zig{1, 3, 2, 5};
  EXPECT_NEAR(fit_trend(zig).slope, 1.1, 1e-15);
  EXPECT_NEAR(fit_trend(zig).intercept, 1.1, 1e-15);
  const std::vector<double> one{1};
  EXPECT_THROW(fit_trend(one), ConfigError);
}

// Coarse-to-fine grid search over (b0, b1) as an independent minimizer of the
// residual sum of squares.
TEST(FitTrend, MatchesGridSearchMinimizer) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 10;
    std::vector<double> y(n);
    for (auto& v : y) v = u(rng);
    double b0 = 0.0, b1 = 0.0, span = 20.0;
    for (int level = 0; level < 40; ++level) {
      double best = residual_ss(y, b0, b1), nb0 = b0, nb1 = b1;
      for (int i = -10; i <= 10; ++i)
        for (int k = -10; k <= 10; ++k) {
          const double c0 = b0 + span * i / 10.0, c1 = b1 + span * k / 10.0;
          const double q = residual_ss(y, c0, c1);
          if (q < best) best = q, nb0 = c0, nb1 = c1;
        }
      b0 = nb0, b1 = nb1, span *= 0.5;
    }
    const auto fit = fit_trend(y);
    EXPECT_NEAR(fit.slope, b1, 1e-6);
    EXPECT_NEAR(fit.intercept, b0, 1e-6);
  }
}

TEST(FitTrend, ResidualOptimalityAndEquivariance) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> y(3 + rng() % 6);
    for (auto& v : y) v = 10 + g(rng);
    const auto fit = fit_trend(y);
    const double q = residual_ss(y, fit.intercept, fit.slope);
    for (double e : {1e-3, -1e-3}) {
      EXPECT_GE(residual_ss(y, fit.intercept + e, fit.slope), q);
      EXPECT_GE(residual_ss(y, fit.intercept, fit.slope + e), q);
    }
    auto scaled = y, shifted = y;
    for (auto& v : scaled) v *= 3.5;
    for (auto& v : shifted) v += 42.0;
    EXPECT_NEAR(fit_trend(scaled).slope, 3.5 * fit.slope, 1e-12);
    EXPECT_NEAR(fit_trend(shifted).slope, fit.slope, 1e-12);
  }
}

TEST(BuildGradients, TwoWindows) {
  Eigen::MatrixXd v(8, 1);
  v << 1, 2, 3, 4, 8, 10, 12, 14;
  const auto g = build_gradients(matrix_from(v), 4);
  ASSERT_EQ(g.rows(), 2u);
  EXPECT_DOUBLE_EQ(g.values(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(g.values(1, 0), 2.0);
  EXPECT_EQ(g.interval_timestamps[0], matrix_from(v).timestamps[3]);  // window end

  const auto single = build_gradients(matrix_from(v), 8);
  EXPECT_EQ(single.rows(), 1u);
  const auto flat = build_gradients(matrix_from(Eigen::MatrixXd::Constant(6, 3, 2.0)), 3);
  EXPECT_TRUE(flat.values.isZero(0.0));

  EXPECT_THROW(build_gradients(matrix_from(v), 3), DataError);
  EXPECT_THROW(build_gradients(matrix_from(v), 1), ConfigError);
}

TEST(BuildGradients, CsvLayout) {
  Eigen::MatrixXd v(4, 2);
  v << 1, 4, 2, 3, 3, 2, 4, 1;
  const auto g = build_gradients(matrix_from(v), 2);
  std::ostringstream out;
  write_gradient_csv(out, g);
  EXPECT_EQ(out.str(),
            "timestamp,S0,S1\n2011-04-01T00:01:00.000Z,1,-1\n2011-04-01T00:03:00.000Z,1,-1\n");
}

TEST(BuildLabels, DirectionsAndTies) {
  Eigen::MatrixXd g(4, 2);
  g << 0.5, 1.0,
       0.7, 2.0,
       0.6, 3.0,
       0.6, 4.0;
  const auto ex = build_labels(gradients_from(g), 0);
  ASSERT_EQ(ex.size(), 3u);
  EXPECT_EQ(ex[0].target, Direction::up);
  EXPECT_EQ(ex[1].target, Direction::down);
  EXPECT_EQ(ex[2].target, Direction::down);  // tie
  EXPECT_EQ(ex[0].inputs, std::vector<double>{1.0});
  EXPECT_EQ(ex[2].inputs, std::vector<double>{3.0});
  EXPECT_EQ(ex[1].interval_index, 2u);
  EXPECT_EQ(ex[0].target_stock, "S0");
  const auto hot = ex[0].one_hot();
  EXPECT_EQ(hot[0] + hot[1], 1.0);
  EXPECT_EQ(hot[1], 1.0);
  EXPECT_THROW(build_labels(gradients_from(g.topRows(1)), 0), DataError);
  EXPECT_THROW(build_labels(gradients_from(g), 5), ConfigError);
}

TEST(BuildLabels, LeaveTargetOutAndPartition) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  const std::size_t stocks = 449;
  Eigen::MatrixXd g(6, stocks);
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = n01(rng);
  const auto gm = gradients_from(g);
  for (std::size_t target : {std::size_t{0}, std::size_t{200}, stocks - 1}) {
    const auto ex = build_labels(gm, target);
    std::size_t ups = 0;
    for (const auto& e : ex) {
      ASSERT_EQ(e.inputs.size(), 448u);
      // Reconstruct the index map: input k must be column k, or k + 1 past the target.
      for (std::size_t k = 0; k < e.inputs.size(); ++k) {
        const std::size_t col = k < target ? k : k + 1;
        EXPECT_EQ(e.inputs[k], g(static_cast<Eigen::Index>(e.interval_index - 1), static_cast<Eigen::Index>(col)));
      }
      ups += e.target == Direction::up;
    }
    EXPECT_EQ(ex.size(), 5u);
    EXPECT_LE(ups, ex.size());
  }
  EXPECT_EQ(build_labels(gm, "S3").front().target_stock, "S3");
}

TEST(Normalizer, MinMaxAndConstant) {
  Eigen::MatrixXd x(2, 3);
  x << 2, 4, 6,
       3, 3, 3;
  const auto p = fit_normalizer(x);
  const auto n = apply_normalizer(p, x);
  EXPECT_EQ(n.row(0), (Eigen::RowVector3d{0, 0.5, 1}));
  EXPECT_EQ(n.row(1), (Eigen::RowVector3d{0.5, 0.5, 0.5}));
  Eigen::MatrixXd unseen(2, 1);
  unseen << 10, 1;
  const auto u = apply_normalizer(p, unseen);
  EXPECT_DOUBLE_EQ(u(0, 0), 2.0);  // not clipped
  EXPECT_THROW(fit_normalizer(Eigen::MatrixXd(2, 0)), DataError);
  EXPECT_THROW(apply_normalizer(p, Eigen::MatrixXd(3, 1)), DataError);
}

TEST(Normalizer, RefitOnNormalizedIsUnitRange) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd x(5, 40);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = n01(rng);
  const auto n = apply_normalizer(fit_normalizer(x), x);
  const auto again = fit_normalizer(n);
  for (Eigen::Index f = 0; f < 5; ++f) {
    EXPECT_NEAR(again.min(f), 0.0, 1e-15);
    EXPECT_NEAR(again.max(f), 1.0, 1e-15);
  }
}

TEST(Dataset, ColumnPerExample) {
  Eigen::MatrixXd g(3, 3);
  g << 1, 2, 3,
       4, 5, 6,
       7, 8, 9;
  const auto ex = build_labels(gradients_from(g), 1);
  const auto d = make_dataset(ex);
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.inputs.col(1), (Eigen::Vector2d{4, 6}));
  EXPECT_EQ(d.targets.col(0), (Eigen::Vector2d{0, 1}));
  EXPECT_TRUE(make_dataset({}).empty());
}
