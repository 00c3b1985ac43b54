#pragma once

// Experiment orchestration: load a price panel, build leave-target-out
// datasets per stock, train and score a network per fold (or per crisis
// split), compare against the baselines, and assemble a report.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "lagtrend/baselines.hpp"
#include "lagtrend/config.hpp"
#include "lagtrend/features.hpp"
#include "lagtrend/market_data.hpp"
#include "lagtrend/neural.hpp"
#include "lagtrend/report.hpp"
#include "lagtrend/rng.hpp"
#include "lagtrend/synth.hpp"

namespace lagtrend {

/// The configured source as a price matrix restricted to consistently
/// present stocks, trimmed to a multiple of `step_size` rows.
inline PriceMatrix load_prices(const DataSource& source, std::size_t step_size) {
  PriceMatrix raw;
  switch (source.kind) {
    case SourceKind::synthetic:
      raw = generate(source.synthetic);
      break;
    case SourceKind::prices: {
      std::ifstream in(source.path);
      if (!in) throw DataError("cannot open price file '" + source.path.string() + "'");
      raw = read_price_csv(in);
      break;
    }
    case SourceKind::ticks: {
      std::ifstream in(source.path);
      if (!in) throw DataError("cannot open tick file '" + source.path.string() + "'");
      const auto table = parse_ticks(in);
      if (table.rows.empty()) throw DataError("tick file '" + source.path.string() + "' has no usable rows");
      auto [first, last] = std::minmax_element(table.rows.begin(), table.rows.end(),
                                               [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
      const auto grid =
          TimeGrid::covering(first->timestamp, last->timestamp, source.bar_interval, source.sessions, source.skip_weekends);
      raw = fill_missing(table, grid).matrix;
      break;
    }
  }
  return select_consistent_stocks(raw, source.min_presence, step_size);
}

/// Runs `task(i)` for i in [0, n) on up to `jobs` threads. Results must be
/// written to per-index slots; the first failure by index is rethrown.
template <class Task>
void parallel_for(std::size_t n, std::size_t jobs, Task&& task) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(jobs, n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Example index sets for one trained model.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Example order used for folding: chronological, or a seeded permutation
/// when folds are shuffled.
inline std::vector<std::size_t> fold_order(std::size_t n_examples, bool shuffle, std::uint64_t seed) {
  std::vector<std::size_t> order(n_examples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  return order;
}

/// k contiguous blocks of `order`; block f is the test set of fold f, the
/// rest form the training pool whose last `validation_fraction` is held out
/// for early stopping.
inline std::vector<Split> make_folds(const std::vector<std::size_t>& order, std::size_t k, double validation_fraction) {
  const std::size_t n = order.size();
  if (n < k) throw DataError("make_folds: fewer examples than folds");
  std::vector<Split> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t lo = f * n / k, hi = (f + 1) * n / k;
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < n; ++i) (i >= lo && i < hi ? folds[f].test : pool).push_back(order[i]);
    const auto n_val = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(pool.size())));
    folds[f].train.assign(pool.begin(), pool.end() - static_cast<std::ptrdiff_t>(n_val));
    folds[f].validation.assign(pool.end() - static_cast<std::ptrdiff_t>(n_val), pool.end());
  }
  return folds;
}

/// Hex FNV-1a digest of the fold test sets.
inline std::string fold_hash(const std::vector<Split>& folds) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& f : folds) {
    feed(f.test.size());
    for (auto i : f.test) feed(i);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline Dataset subset(const Dataset& all, const std::vector<std::size_t>& idx) {
  Dataset d;
  d.inputs = gather_columns(all.inputs, idx);
  d.targets = gather_columns(all.targets, idx);
  return d;
}

struct FitResult {
  std::vector<Direction> predicted;
  std::size_t epochs_run = 0;
};

/// Fits the normalizer on the training inputs only, trains, and predicts the
/// test examples.
inline FitResult fit_and_predict(const Dataset& all, const Split& split, NetworkConfig network) {
  auto train_set = subset(all, split.train);
  auto validation_set = subset(all, split.validation);
  auto test_set = subset(all, split.test);
  const auto norm = fit_normalizer(train_set.inputs);
  train_set.inputs = apply_normalizer(norm, train_set.inputs);
  validation_set.inputs = apply_normalizer(norm, validation_set.inputs);
  test_set.inputs = apply_normalizer(norm, test_set.inputs);
  network.input_dim = static_cast<std::size_t>(all.inputs.rows());
  auto model = init(network);
  const auto report = train(model, train_set, validation_set);
  return {predict_classes(model, test_set.inputs), report.epochs_run};
}

inline std::vector<Direction> truths(const std::vector<LabeledExample>& examples, const std::vector<std::size_t>& idx) {
  std::vector<Direction> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(examples[i].target);
  return out;
}

/// Model accuracy and the three baselines scored on one prediction set.
inline void score(StockRecord& rec, const std::vector<Direction>& predicted, const std::vector<Direction>& truth,
                  double model_accuracy, std::uint64_t stock_seed) {
  PredictionSet model{predicted, truth, rec.stock_id, PredictionSource::model};
  const auto randomized = randomized_baseline(model, derive_seed(stock_seed, "randomized"));
  const auto c1 = class_baseline(truth, 1, rec.stock_id);
  const auto c2 = class_baseline(truth, 2, rec.stock_id);
  rec.accuracy = {model_accuracy, accuracy(randomized), accuracy(c1), accuracy(c2),
                  bestof_baseline(randomized, c1, c2)};
  rec.n_test = truth.size();
}

/// Every input column of every example comes from a stock other than the
/// target; a violation would let the model see the series it predicts.
inline void check_leave_target_out(const GradientMatrix& g, std::size_t target_col,
                                   const std::vector<LabeledExample>& examples) {
  const auto cols = input_columns(g.cols(), target_col);
  if (std::find(cols.begin(), cols.end(), target_col) != cols.end())
    throw RuntimeError("leave-target-out violated for " + g.stock_ids[target_col]);
  for (const auto& ex : examples)
    if (ex.inputs.size() + 1 != g.cols() || ex.target_stock != g.stock_ids[target_col])
      throw RuntimeError("leave-target-out violated for " + g.stock_ids[target_col]);
}

struct Prepared {
  GradientMatrix gradients;
  std::vector<std::size_t> targets;  // gradient columns to evaluate
};

inline Prepared prepare(const ExperimentConfig& config) {
  const auto prices = load_prices(config.data, config.step_size);
  if (prices.cols() < 2) throw DataError("need at least two consistently present stocks");
  Prepared p{build_gradients(prices, config.step_size), {}};
  if (config.stocks.empty()) {
    p.targets.resize(p.gradients.cols());
    std::iota(p.targets.begin(), p.targets.end(), std::size_t{0});
  } else {
    for (const auto& id : config.stocks) {
      try {
        p.targets.push_back(p.gradients.column_of(id));
      } catch (const ConfigError&) {
        throw ConfigError("stock '" + id + "' is not in the consistent universe");
      }
    }
  }
  return p;
}

inline std::string now_iso() {
  return format_timestamp(std::chrono::time_point_cast<Duration>(std::chrono::system_clock::now()));
}

inline ExperimentReport start_report(const ExperimentConfig& config, const char* mode) {
  ExperimentReport r;
  r.mode = mode;
  r.step_size = config.step_size;
  r.bottleneck = config.network.bottleneck;
  r.provenance.config = to_json(config);
  r.provenance.master_seed = config.seed;
  r.provenance.started_at = now_iso();
  return r;
}

inline StockRecord cross_validate_stock(const ExperimentConfig& config, const GradientMatrix& g, std::size_t col) {
  StockRecord rec;
  rec.stock_id = g.stock_ids[col];
  const std::uint64_t stock_seed = derive_seed(config.seed, rec.stock_id);
  const auto examples = build_labels(g, col);
  check_leave_target_out(g, col, examples);
  rec.n_examples = examples.size();
  if (examples.size() < config.folds) {
    rec.skipped = true;
    rec.annotation = "fewer examples than folds";
    return rec;
  }
  const auto order = fold_order(examples.size(), config.shuffle_folds, derive_seed(stock_seed, "folds"));
  const auto folds = make_folds(order, config.folds, config.validation_fraction);
  rec.fold_hash = fold_hash(folds);
  for (const auto& f : folds) {
    if (f.train.size() < config.network.batch_size || f.validation.empty()) {
      rec.skipped = true;
      rec.annotation = "training split of " + std::to_string(f.train.size()) + " examples is smaller than batch_size " +
                       std::to_string(config.network.batch_size);
      return rec;
    }
  }
  const auto all = make_dataset(examples);
  std::vector<Direction> predicted, truth;
  for (std::size_t k = 0; k < folds.size(); ++k) {
    auto network = config.network;
    network.rng_seed = derive_seed(stock_seed, k);
    const auto fit = fit_and_predict(all, folds[k], network);
    const auto fold_truth = truths(examples, folds[k].test);
    rec.fold_accuracies.push_back(accuracy(fit.predicted, fold_truth));
    rec.epochs_run.push_back(fit.epochs_run);
    predicted.insert(predicted.end(), fit.predicted.begin(), fit.predicted.end());
    truth.insert(truth.end(), fold_truth.begin(), fold_truth.end());
  }
  const double model_acc = std::accumulate(rec.fold_accuracies.begin(), rec.fold_accuracies.end(), 0.0) /
                           static_cast<double>(rec.fold_accuracies.size());
  score(rec, predicted, truth, model_acc, stock_seed);
  return rec;
}

inline std::vector<StockRecord> run_stocks(const ExperimentConfig& config, const Prepared& p,
                                           StockRecord (*per_stock)(const ExperimentConfig&, const GradientMatrix&,
                                                                    std::size_t)) {
  std::vector<StockRecord> records(p.targets.size());
  parallel_for(p.targets.size(), config.jobs,
               [&](std::size_t i) { records[i] = per_stock(config, p.gradients, p.targets[i]); });
  return records;
}

inline ExperimentReport cross_validated_on(const ExperimentConfig& config, const Prepared& p, const char* mode) {
  const auto t0 = std::chrono::steady_clock::now();
  auto report = start_report(config, mode);
  report.stocks = run_stocks(config, p, &cross_validate_stock);
  summarize(report, config.alpha);
  report.provenance.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace detail

/// k-fold (default 5) cross-validation per target stock; the model accuracy
/// is the mean over folds and the baselines score the concatenated
/// out-of-fold predictions.
inline ExperimentReport run_cross_validated(const ExperimentConfig& config) {
  config.validate();
  return detail::cross_validated_on(config, detail::prepare(config), "cross_validated");
}

/// Single chronological split: train on examples stamped before
/// crisis_start (the most recent share held out for validation), test on
/// examples stamped in [crisis_start, crisis_end]. An example is stamped
/// with the end of its target interval.
inline ExperimentReport run_crisis(const ExperimentConfig& config) {
  config.validate();
  if (!config.crisis_start || !config.crisis_end) throw ConfigError("crisis mode requires split boundaries");
  const auto t0 = std::chrono::steady_clock::now();
  const auto p = detail::prepare(config);
  auto report = detail::start_report(config, "crisis");
  report.crisis_start = format_timestamp(*config.crisis_start);
  report.crisis_end = format_timestamp(*config.crisis_end);
  const auto& g = p.gradients;

  // The split depends only on timestamps, so it is the same for every stock.
  Split split;
  std::vector<std::size_t> pool;
  for (std::size_t t = 1; t < g.rows(); ++t) {
    const auto ts = g.interval_timestamps[t];
    const std::size_t idx = t - 1;
    if (ts < *config.crisis_start) pool.push_back(idx);
    else if (ts <= *config.crisis_end) split.test.push_back(idx);
  }
  if (pool.empty()) throw DataError("crisis split: no training examples before " + *report.crisis_start);
  if (split.test.empty())
    throw DataError("crisis split: no test examples in [" + *report.crisis_start + ", " + *report.crisis_end + "]");
  const auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(pool.size())));
  split.train.assign(pool.begin(), pool.end() - static_cast<std::ptrdiff_t>(n_val));
  split.validation.assign(pool.end() - static_cast<std::ptrdiff_t>(n_val), pool.end());
  if (split.validation.empty()) throw DataError("crisis split: validation side is empty");
  if (split.train.size() < config.network.batch_size)
    throw DataError("crisis split: " + std::to_string(split.train.size()) +
                    " training examples, fewer than batch_size " + std::to_string(config.network.batch_size));

  std::vector<StockRecord> records(p.targets.size());
  parallel_for(p.targets.size(), config.jobs, [&](std::size_t i) {
    const std::size_t col = p.targets[i];
    StockRecord rec;
    rec.stock_id = g.stock_ids[col];
    const std::uint64_t stock_seed = derive_seed(config.seed, rec.stock_id);
    const auto examples = build_labels(g, col);
    detail::check_leave_target_out(g, col, examples);
    rec.n_examples = examples.size();
    rec.fold_hash = fold_hash({split});
    auto network = config.network;
    network.rng_seed = derive_seed(stock_seed, std::uint64_t{0});
    const auto fit = detail::fit_and_predict(make_dataset(examples), split, network);
    const auto truth = detail::truths(examples, split.test);
    const double acc = accuracy(fit.predicted, truth);
    rec.fold_accuracies = {acc};
    rec.epochs_run = {fit.epochs_run};
    detail::score(rec, fit.predicted, truth, acc, stock_seed);
    records[i] = std::move(rec);
  });
  report.stocks = std::move(records);
  summarize(report, config.alpha);
  report.provenance.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

/// One cross-validated run per bottleneck width, then one without; data,
/// folds and seeds are shared so only the architecture differs.
inline std::vector<ExperimentReport> run_bottleneck_sweep(const ExperimentConfig& config) {
  config.validate();
  const auto p = detail::prepare(config);
  std::vector<ExperimentReport> reports;
  auto variant = config;
  for (auto w : config.bottleneck_widths) {
    variant.network.bottleneck = w;
    reports.push_back(detail::cross_validated_on(variant, p, "bottleneck_sweep"));
  }
  variant.network.bottleneck.reset();
  reports.push_back(detail::cross_validated_on(variant, p, "bottleneck_sweep"));
  return reports;
}

/// Dispatches on config.mode.
inline std::vector<ExperimentReport> run_experiment(const ExperimentConfig& config) {
  switch (config.mode) {
    case Mode::cross_validated: return {run_cross_validated(config)};
    case Mode::crisis: return {run_crisis(config)};
    case Mode::bottleneck_sweep: return run_bottleneck_sweep(config);
  }
  throw ConfigError("unknown mode");
}

}  // namespace lagtrend
