#pragma once

// Mock predictors that a model must beat: the model's own predictions in
// shuffled order, the two constant predictors, and the per-stock best of
// those three.

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lagtrend/error.hpp"
#include "lagtrend/features.hpp"

namespace lagtrend {

enum class PredictionSource { model, randomized, class1, class2, bestof };

inline const char* to_string(PredictionSource s) {
  switch (s) {
    case PredictionSource::model: return "model";
    case PredictionSource::randomized: return "randomized";
    case PredictionSource::class1: return "class1";
    case PredictionSource::class2: return "class2";
    case PredictionSource::bestof: return "bestof";
  }
  return "?";
}

struct PredictionSet {
  std::vector<Direction> predicted;
  std::vector<Direction> truth;
  std::string stock_id;
  PredictionSource source = PredictionSource::model;
};

inline double accuracy(std::span<const Direction> predicted, std::span<const Direction> truth) {
  if (predicted.empty()) throw DataError("accuracy: empty prediction set");
  if (predicted.size() != truth.size()) throw DataError("accuracy: prediction and truth lengths differ");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

inline double accuracy(const PredictionSet& p) { return accuracy(p.predicted, p.truth); }

/// The model's predictions in a uniformly random order, scored against the
/// unchanged truth.
inline PredictionSet randomized_baseline(const PredictionSet& model_predictions, std::uint64_t seed) {
  if (model_predictions.predicted.empty()) throw DataError("randomized_baseline: empty predictions");
  PredictionSet out = model_predictions;
  out.source = PredictionSource::randomized;
  std::mt19937_64 rng(seed);
  std::shuffle(out.predicted.begin(), out.predicted.end(), rng);
  return out;
}

/// Mean accuracy over `shuffles` independent shuffles.
inline double randomized_expected_accuracy(const PredictionSet& model_predictions, std::uint64_t seed,
                                           std::size_t shuffles) {
  if (shuffles == 0) throw ConfigError("randomized_expected_accuracy: need at least one shuffle");
  PredictionSet work = model_predictions;
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (std::size_t k = 0; k < shuffles; ++k) {
    std::shuffle(work.predicted.begin(), work.predicted.end(), rng);
    total += accuracy(work);
  }
  return total / static_cast<double>(shuffles);
}

/// Class 1 always predicts a downward change, class 2 always upward.
inline PredictionSet class_baseline(std::span<const Direction> truth, int class_index, std::string stock_id = {}) {
  if (truth.empty()) throw DataError("class_baseline: empty labels");
  if (class_index != 1 && class_index != 2) throw ConfigError("class_baseline: class index must be 1 or 2");
  PredictionSet out;
  out.truth.assign(truth.begin(), truth.end());
  out.predicted.assign(truth.size(), class_index == 1 ? Direction::down : Direction::up);
  out.stock_id = std::move(stock_id);
  out.source = class_index == 1 ? PredictionSource::class1 : PredictionSource::class2;
  return out;
}

/// Highest of the three baseline accuracies for one stock.
inline double bestof_baseline(const PredictionSet& randomized, const PredictionSet& class1,
                              const PredictionSet& class2) {
  if (randomized.truth != class1.truth || class1.truth != class2.truth)
    throw DataError("bestof_baseline: baselines scored on different truth");
  return std::max({accuracy(randomized), accuracy(class1), accuracy(class2)});
}

}  // namespace lagtrend
