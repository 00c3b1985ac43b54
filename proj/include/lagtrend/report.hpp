#pragma once

// Experiment reports: per-stock accuracies, aggregate means, Welch tests of
// the model against each baseline, and box summaries. Serialized as JSON
// (lossless, round-trips exactly) and as long-format CSV.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lagtrend/csv.hpp"
#include "lagtrend/error.hpp"
#include "lagtrend/stats.hpp"

namespace lagtrend {

inline constexpr const char* kLibraryVersion = "1.0.0";
inline constexpr int kReportVersion = 1;

/// Series order shared by records, tests and box summaries.
inline constexpr std::array<const char*, 5> kSeriesNames{"model", "randomized", "class1", "class2", "bestof"};

struct StockRecord {
  std::string stock_id;
  bool skipped = false;
  std::string annotation;  // why a stock was skipped
  std::size_t n_examples = 0;
  std::size_t n_test = 0;  // examples scored (out-of-fold or crisis test side)
  std::vector<double> fold_accuracies;
  std::array<double, 5> accuracy{};  // indexed like kSeriesNames
  std::string fold_hash;
  std::vector<std::size_t> epochs_run;  // per trained model

  double model() const { return accuracy[0]; }
  double bestof() const { return accuracy[4]; }
};

struct BaselineTest {
  std::string baseline;
  WelchResult welch;
};

struct SeriesSummary {
  std::string series;
  double mean = 0.0;
  std::optional<BoxStats> box;  // needs at least five evaluated stocks
};

struct Provenance {
  nlohmann::json config;
  std::uint64_t master_seed = 0;
  std::string library_version = kLibraryVersion;
  // Excluded from determinism comparisons.
  std::string started_at;
  double wall_clock_seconds = 0.0;
};

struct ExperimentReport {
  std::string mode;
  std::size_t step_size = 0;
  std::optional<std::size_t> bottleneck;
  std::optional<std::string> crisis_start;
  std::optional<std::string> crisis_end;
  std::vector<StockRecord> stocks;
  std::vector<SeriesSummary> series;   // one per kSeriesNames entry
  std::vector<BaselineTest> tests;     // model against each baseline
  double max_model_accuracy = 0.0;
  std::size_t evaluated_stocks = 0;
  Provenance provenance;

  /// "cross_validated", "bottleneck_none", "bottleneck_3", ...
  std::string label() const {
    if (mode == "bottleneck_sweep") return "bottleneck_" + (bottleneck ? std::to_string(*bottleneck) : "none");
    return mode;
  }

  const SeriesSummary& summary(std::string_view name) const {
    for (const auto& s : series)
      if (s.series == name) return s;
    throw DataError("report: no series '" + std::string(name) + "'");
  }

  const BaselineTest* test(std::string_view baseline) const {
    for (const auto& t : tests)
      if (t.baseline == baseline) return &t;
    return nullptr;
  }
};

/// Per-series vectors over evaluated (non-skipped) stocks.
inline std::vector<double> series_values(const std::vector<StockRecord>& stocks, std::size_t series_index) {
  std::vector<double> out;
  for (const auto& s : stocks)
    if (!s.skipped) out.push_back(s.accuracy[series_index]);
  return out;
}

/// Fills the aggregate fields from the per-stock records.
inline void summarize(ExperimentReport& r, double alpha) {
  r.series.clear();
  r.tests.clear();
  r.evaluated_stocks = 0;
  r.max_model_accuracy = 0.0;
  for (const auto& s : r.stocks)
    if (!s.skipped) ++r.evaluated_stocks;
  if (r.evaluated_stocks == 0) throw DataError("report: no stock could be evaluated");
  const auto model = series_values(r.stocks, 0);
  r.max_model_accuracy = *std::max_element(model.begin(), model.end());
  for (std::size_t i = 0; i < kSeriesNames.size(); ++i) {
    const auto values = series_values(r.stocks, i);
    SeriesSummary s;
    s.series = kSeriesNames[i];
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    if (values.size() >= 5) s.box = box_stats(values);
    r.series.push_back(std::move(s));
    if (i > 0 && values.size() >= 2) {
      try {
        r.tests.push_back({kSeriesNames[i], welch_upper_tail(model, values, alpha)});
      } catch (const DataError&) {
        // identical constant samples: no test to report
      }
    }
  }
}

// JSON. Non-finite doubles (an infinite t when both samples are constant) are
// written as the strings "inf", "-inf" and "nan".

namespace detail {

inline nlohmann::json real_to_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double real_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw DataError("report: bad number '" + s + "'");
  }
  return j.get<double>();
}

}  // namespace detail

inline nlohmann::json to_json(const WelchResult& w) {
  using detail::real_to_json;
  return {{"t_statistic", real_to_json(w.t_statistic)},
          {"degrees_of_freedom", real_to_json(w.degrees_of_freedom)},
          {"p_value", real_to_json(w.p_value)},
          {"min_difference", real_to_json(w.min_difference)},
          {"mean_difference", real_to_json(w.mean_difference)},
          {"standard_error", real_to_json(w.standard_error)},
          {"alpha", real_to_json(w.alpha)}};
}

inline WelchResult welch_from_json(const nlohmann::json& j) {
  using detail::real_from_json;
  WelchResult w;
  w.t_statistic = real_from_json(j.at("t_statistic"));
  w.degrees_of_freedom = real_from_json(j.at("degrees_of_freedom"));
  w.p_value = real_from_json(j.at("p_value"));
  w.min_difference = real_from_json(j.at("min_difference"));
  w.mean_difference = real_from_json(j.at("mean_difference"));
  w.standard_error = real_from_json(j.at("standard_error"));
  w.alpha = real_from_json(j.at("alpha"));
  return w;
}

inline nlohmann::json to_json(const BoxStats& b) {
  return {{"n", b.n},
          {"min", b.min},
          {"max", b.max},
          {"median", b.median},
          {"q1", b.q1},
          {"q3", b.q3},
          {"whisker_low", b.whisker_low},
          {"whisker_high", b.whisker_high},
          {"notch_half_width", b.notch_half_width},
          {"notch_low", b.notch_low},
          {"notch_high", b.notch_high},
          {"outliers", b.outliers}};
}

inline BoxStats box_from_json(const nlohmann::json& j) {
  BoxStats b;
  b.n = j.at("n").get<std::size_t>();
  b.min = j.at("min").get<double>();
  b.max = j.at("max").get<double>();
  b.median = j.at("median").get<double>();
  b.q1 = j.at("q1").get<double>();
  b.q3 = j.at("q3").get<double>();
  b.whisker_low = j.at("whisker_low").get<double>();
  b.whisker_high = j.at("whisker_high").get<double>();
  b.notch_half_width = j.at("notch_half_width").get<double>();
  b.notch_low = j.at("notch_low").get<double>();
  b.notch_high = j.at("notch_high").get<double>();
  b.outliers = j.at("outliers").get<std::vector<double>>();
  return b;
}

inline nlohmann::json to_json(const StockRecord& s) {
  nlohmann::json acc = nlohmann::json::object();
  for (std::size_t i = 0; i < kSeriesNames.size(); ++i) acc[kSeriesNames[i]] = s.accuracy[i];
  return {{"stock_id", s.stock_id},
          {"skipped", s.skipped},
          {"annotation", s.annotation},
          {"n_examples", s.n_examples},
          {"n_test", s.n_test},
          {"fold_accuracies", s.fold_accuracies},
          {"accuracy", acc},
          {"fold_hash", s.fold_hash},
          {"epochs_run", s.epochs_run}};
}

inline StockRecord stock_from_json(const nlohmann::json& j) {
  StockRecord s;
  s.stock_id = j.at("stock_id").get<std::string>();
  s.skipped = j.at("skipped").get<bool>();
  s.annotation = j.at("annotation").get<std::string>();
  s.n_examples = j.at("n_examples").get<std::size_t>();
  s.n_test = j.at("n_test").get<std::size_t>();
  s.fold_accuracies = j.at("fold_accuracies").get<std::vector<double>>();
  for (std::size_t i = 0; i < kSeriesNames.size(); ++i) s.accuracy[i] = j.at("accuracy").at(kSeriesNames[i]).get<double>();
  s.fold_hash = j.at("fold_hash").get<std::string>();
  s.epochs_run = j.at("epochs_run").get<std::vector<std::size_t>>();
  return s;
}

inline nlohmann::json to_json(const ExperimentReport& r) {
  nlohmann::json stocks = nlohmann::json::array();
  for (const auto& s : r.stocks) stocks.push_back(to_json(s));
  nlohmann::json series = nlohmann::json::array();
  for (const auto& s : r.series)
    series.push_back({{"series", s.series}, {"mean", s.mean}, {"box", s.box ? to_json(*s.box) : nlohmann::json(nullptr)}});
  nlohmann::json tests = nlohmann::json::array();
  for (const auto& t : r.tests) tests.push_back({{"baseline", t.baseline}, {"welch", to_json(t.welch)}});
  auto opt_str = [](const std::optional<std::string>& s) { return s ? nlohmann::json(*s) : nlohmann::json(nullptr); };
  return {{"mode", r.mode},
          {"step_size", r.step_size},
          {"bottleneck", r.bottleneck ? nlohmann::json(*r.bottleneck) : nlohmann::json(nullptr)},
          {"crisis_start", opt_str(r.crisis_start)},
          {"crisis_end", opt_str(r.crisis_end)},
          {"stocks", stocks},
          {"series", series},
          {"tests", tests},
          {"max_model_accuracy", r.max_model_accuracy},
          {"evaluated_stocks", r.evaluated_stocks},
          {"provenance",
           {{"config", r.provenance.config},
            {"master_seed", r.provenance.master_seed},
            {"library_version", r.provenance.library_version},
            {"wall_clock", {{"started_at", r.provenance.started_at}, {"seconds", r.provenance.wall_clock_seconds}}}}}};
}

inline ExperimentReport report_from_json(const nlohmann::json& j) {
  ExperimentReport r;
  r.mode = j.at("mode").get<std::string>();
  r.step_size = j.at("step_size").get<std::size_t>();
  if (!j.at("bottleneck").is_null()) r.bottleneck = j.at("bottleneck").get<std::size_t>();
  if (!j.at("crisis_start").is_null()) r.crisis_start = j.at("crisis_start").get<std::string>();
  if (!j.at("crisis_end").is_null()) r.crisis_end = j.at("crisis_end").get<std::string>();
  for (const auto& s : j.at("stocks")) r.stocks.push_back(stock_from_json(s));
  for (const auto& s : j.at("series")) {
    SeriesSummary sum;
    sum.series = s.at("series").get<std::string>();
    sum.mean = s.at("mean").get<double>();
    if (!s.at("box").is_null()) sum.box = box_from_json(s.at("box"));
    r.series.push_back(std::move(sum));
  }
  for (const auto& t : j.at("tests")) r.tests.push_back({t.at("baseline").get<std::string>(), welch_from_json(t.at("welch"))});
  r.max_model_accuracy = j.at("max_model_accuracy").get<double>();
  r.evaluated_stocks = j.at("evaluated_stocks").get<std::size_t>();
  const auto& p = j.at("provenance");
  r.provenance.config = p.at("config");
  r.provenance.master_seed = p.at("master_seed").get<std::uint64_t>();
  r.provenance.library_version = p.at("library_version").get<std::string>();
  r.provenance.started_at = p.at("wall_clock").at("started_at").get<std::string>();
  r.provenance.wall_clock_seconds = p.at("wall_clock").at("seconds").get<double>();
  return r;
}

/// The document written by `run`: one report per experiment run.
inline nlohmann::json reports_to_json(const std::vector<ExperimentReport>& reports) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& r : reports) list.push_back(to_json(r));
  return {{"format", "lagtrend-report"}, {"version", kReportVersion}, {"reports", list}};
}

inline std::vector<ExperimentReport> reports_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "lagtrend-report" || j.value("version", 0) != kReportVersion)
    throw DataError("report: unsupported format or version");
  std::vector<ExperimentReport> out;
  try {
    for (const auto& r : j.at("reports")) out.push_back(report_from_json(r));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  }
  return out;
}

/// The JSON document with every wall-clock field removed; two runs of the
/// same config and seed dump to identical bytes.
inline std::string deterministic_dump(nlohmann::json doc) {
  for (auto& r : doc.at("reports")) r.at("provenance").erase("wall_clock");
  return doc.dump();
}

// CSV: long format, one row per (run, stock, series) for evaluated stocks.

inline constexpr std::string_view kAccuracyCsvHeader = "run,stock_id,series,accuracy";
inline constexpr std::string_view kBoxplotCsvHeader =
    "run,series,mean,n,min,q1,median,q3,whisker_low,whisker_high,notch_low,notch_high,outliers";

inline void write_accuracy_csv(std::ostream& out, const std::vector<ExperimentReport>& reports) {
  out << kAccuracyCsvHeader << '\n';
  for (const auto& r : reports)
    for (const auto& s : r.stocks) {
      if (s.skipped) continue;
      for (std::size_t i = 0; i < kSeriesNames.size(); ++i)
        out << r.label() << ',' << s.stock_id << ',' << kSeriesNames[i] << ',' << csv::format_double(s.accuracy[i])
            << '\n';
    }
}

/// Box summaries per run and series; outliers are ';'-joined. Series with
/// fewer than five stocks have only the mean.
inline void write_boxplot_csv(std::ostream& out, const std::vector<ExperimentReport>& reports) {
  out << kBoxplotCsvHeader << '\n';
  for (const auto& r : reports)
    for (const auto& s : r.series) {
      out << r.label() << ',' << s.series << ',' << csv::format_double(s.mean);
      if (s.box) {
        const auto& b = *s.box;
        out << ',' << b.n;
        for (double v : {b.min, b.q1, b.median, b.q3, b.whisker_low, b.whisker_high, b.notch_low, b.notch_high})
          out << ',' << csv::format_double(v);
        out << ',';
        for (std::size_t k = 0; k < b.outliers.size(); ++k) out << (k ? ";" : "") << csv::format_double(b.outliers[k]);
      } else {
        out << ",,,,,,,,,,";
      }
      out << '\n';
    }
}

enum class ReportFormat { json, csv };

/// Writes report.json, or accuracy.csv plus boxplot.csv, into `dir`.
inline std::vector<std::filesystem::path> emit_report(const std::vector<ExperimentReport>& reports, ReportFormat format,
                                                      const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw RuntimeError("cannot create output directory '" + dir.string() + "': " + ec.message());
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw RuntimeError("cannot write '" + p.string() + "'");
    return f;
  };
  std::vector<std::filesystem::path> written;
  if (format == ReportFormat::json) {
    const auto p = dir / "report.json";
    auto f = open(p);
    f << reports_to_json(reports).dump(2) << '\n';
    if (!f) throw RuntimeError("write failed for '" + p.string() + "'");
    written.push_back(p);
  } else {
    const auto acc = dir / "accuracy.csv";
    const auto box = dir / "boxplot.csv";
    {
      auto f = open(acc);
      write_accuracy_csv(f, reports);
      if (!f) throw RuntimeError("write failed for '" + acc.string() + "'");
    }
    {
      auto f = open(box);
      write_boxplot_csv(f, reports);
      if (!f) throw RuntimeError("write failed for '" + box.string() + "'");
    }
    written = {acc, box};
  }
  return written;
}

}  // namespace lagtrend
