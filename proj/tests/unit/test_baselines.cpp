#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "lagtrend/baselines.hpp"

using namespace lagtrend;

namespace {

constexpr Direction D = Direction::down;
constexpr Direction U = Direction::up;

PredictionSet make_set(std::vector<Direction> pred, std::vector<Direction> truth) {
  return {std::move(pred), std::move(truth), "S", PredictionSource::model};
}

std::vector<Direction> random_labels(std::size_t n, double p_up, std::mt19937_64& rng) {
  std::bernoulli_distribution b(p_up);
  std::vector<Direction> out(n);
  for (auto& d : out) d = b(rng) ? U : D;
  return out;
}

}  // namespace

TEST(Accuracy, Counting) {
  EXPECT_DOUBLE_EQ(accuracy(make_set({U, U, D}, {U, D, D})), 2.0 / 3.0);
  EXPECT_EQ(accuracy(make_set({U, D}, {U, D})), 1.0);
  EXPECT_EQ(accuracy(make_set({U, D}, {D, U})), 0.0);
  EXPECT_THROW(accuracy(make_set({}, {})), DataError);
  EXPECT_THROW(accuracy(make_set({U}, {U, D})), DataError);
}

TEST(Accuracy, InvariantUnderJointPermutation) {
  std::mt19937_64 rng(1);
  auto p = random_labels(100, 0.4, rng), t = random_labels(100, 0.6, rng);
  const double before = accuracy(p, t);
  std::vector<std::size_t> perm(100);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Direction> p2, t2;
  for (auto i : perm) p2.push_back(p[i]), t2.push_back(t[i]);
  EXPECT_EQ(accuracy(p2, t2), before);
}

TEST(Randomized, ConstantAndSingleton) {
  const auto all_down = make_set({D, D, D, D}, {U, D, U, D});
  const auto r = randomized_baseline(all_down, 5);
  EXPECT_EQ(r.predicted, all_down.predicted);
  EXPECT_EQ(accuracy(r), accuracy(all_down));
  EXPECT_EQ(r.source, PredictionSource::randomized);
  const auto one = make_set({U}, {D});
  EXPECT_EQ(randomized_baseline(one, 1).predicted, one.predicted);
  EXPECT_THROW(randomized_baseline(make_set({}, {}), 1), DataError);
}

TEST(Randomized, PreservesMultisetAndIsSeeded) {
  std::mt19937_64 rng(2);
  const auto s = make_set(random_labels(300, 0.3, rng), random_labels(300, 0.5, rng));
  const auto a = randomized_baseline(s, 9), b = randomized_baseline(s, 9);
  EXPECT_EQ(a.predicted, b.predicted);
  EXPECT_EQ(std::count(a.predicted.begin(), a.predicted.end(), U), std::count(s.predicted.begin(), s.predicted.end(), U));
  EXPECT_EQ(a.truth, s.truth);
}

// Expected shuffle accuracy p*q + (1-p)(1-q) from the up-fractions.
TEST(Randomized, MonteCarloExpectation) {
  std::mt19937_64 rng(3);
  for (double pu : {0.2, 0.5, 0.7}) {
    const auto s = make_set(random_labels(400, pu, rng), random_labels(400, 0.45, rng));
    const double p = static_cast<double>(std::count(s.predicted.begin(), s.predicted.end(), U)) / 400.0;
    const double q = static_cast<double>(std::count(s.truth.begin(), s.truth.end(), U)) / 400.0;
    EXPECT_NEAR(randomized_expected_accuracy(s, 11, 10000), p * q + (1 - p) * (1 - q), 0.01);
  }
  EXPECT_THROW(randomized_expected_accuracy(make_set({U}, {U}), 1, 0), ConfigError);
}

TEST(ClassBaseline, CountingAndComplement) {
  const std::vector<Direction> truth{D, D, U};
  EXPECT_DOUBLE_EQ(accuracy(class_baseline(truth, 1)), 2.0 / 3.0);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    const auto t = random_labels(1 + rng() % 50, 0.5, rng);
    EXPECT_DOUBLE_EQ(accuracy(class_baseline(t, 1)) + accuracy(class_baseline(t, 2)), 1.0);
  }
  // 5595 of 10000 labels down.
  std::vector<Direction> crisis(10000, U);
  std::fill(crisis.begin(), crisis.begin() + 5595, D);
  EXPECT_DOUBLE_EQ(accuracy(class_baseline(crisis, 2)), 0.4405);
  EXPECT_THROW(class_baseline(truth, 3), ConfigError);
  EXPECT_THROW(class_baseline({}, 1), DataError);
}

TEST(BestOf, MaxOfThreeAndAtLeastHalf) {
  // Accuracies 0.48 / 0.47 / 0.53 on 100 labels.
  std::vector<Direction> truth(100, U);
  std::fill(truth.begin(), truth.begin() + 47, D);
  PredictionSet r = make_set(truth, truth);
  for (std::size_t i = 48; i < 100; ++i) r.predicted[i] = truth[i] == U ? D : U;
  ASSERT_DOUBLE_EQ(accuracy(r), 0.48);
  const auto c1 = class_baseline(truth, 1), c2 = class_baseline(truth, 2);
  EXPECT_DOUBLE_EQ(accuracy(c1), 0.47);
  EXPECT_DOUBLE_EQ(accuracy(c2), 0.53);
  EXPECT_DOUBLE_EQ(bestof_baseline(r, c1, c2), 0.53);

  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto t = random_labels(40, 0.5, rng);
    const auto s = make_set(random_labels(40, 0.5, rng), t);
    const auto best = bestof_baseline(randomized_baseline(s, 1), class_baseline(t, 1), class_baseline(t, 2));
    EXPECT_GE(best, 0.5);
    EXPECT_GE(best, std::max(accuracy(class_baseline(t, 1)), accuracy(class_baseline(t, 2))));
  }
  auto other = c1;
  other.truth.back() = other.truth.back() == U ? D : U;
  EXPECT_THROW(bestof_baseline(r, other, c2), DataError);
}
