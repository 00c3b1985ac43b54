#pragma once

// Tick ingestion, grid alignment with forward/backward fill, and selection of
// the consistently observed stock universe.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "lagtrend/csv.hpp"
#include "lagtrend/error.hpp"
#include "lagtrend/time.hpp"

namespace lagtrend {

struct TickRecord {
  std::string stock_id;
  Instant timestamp{};
  std::optional<double> bid;
  std::optional<double> ask;
  std::optional<double> volume;
  std::optional<double> avg_price;

  /// Average transaction price, falling back to the bid/ask midpoint.
  std::optional<double> price() const {
    if (avg_price) return avg_price;
    if (bid && ask) return 0.5 * (*bid + *ask);
    return std::nullopt;
  }
};

struct StockStream {
  std::string stock_id;
  std::vector<TickRecord> records;  // sorted by timestamp, ties in input order
};

struct TickTable {
  std::vector<TickRecord> rows;  // input order
  std::size_t skipped = 0;

  /// Per-stock streams in order of first appearance.
  std::vector<StockStream> streams() const {
    std::vector<StockStream> out;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& row : rows) {
      auto [it, inserted] = index.try_emplace(row.stock_id, out.size());
      if (inserted) out.push_back(StockStream{row.stock_id, {}});
      out[it->second].records.push_back(row);
    }
    for (auto& stream : out)
      std::stable_sort(stream.records.begin(), stream.records.end(),
                       [](const TickRecord& a, const TickRecord& b) { return a.timestamp < b.timestamp; });
    return out;
  }
};

inline constexpr std::string_view kTickHeader = "stock_id,timestamp,bid,ask,volume,avg_price";

/// Reads the tick CSV format. Rows with a wrong field count, an unparseable
/// timestamp, a malformed number, a non-positive price or a negative volume
/// are skipped and counted.
inline TickTable parse_ticks(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("tick CSV: missing header");
  csv::strip_bom(line);
  {
    const auto fields = csv::split(line);
    const auto expected = csv::split(kTickHeader);
    bool ok = fields.size() == expected.size();
    for (std::size_t i = 0; ok && i < fields.size(); ++i) ok = csv::trim(fields[i]) == expected[i];
    if (!ok) throw DataError("tick CSV: expected header '" + std::string(kTickHeader) + "'");
  }

  TickTable table;
  auto optional_field = [](std::string_view f, std::optional<double>& out) {
    if (csv::trim(f).empty()) return true;
    out = csv::parse_double(f);
    return out.has_value();
  };
  while (std::getline(in, line)) {
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    TickRecord rec;
    bool ok = f.size() == 6 && !csv::trim(f[0]).empty();
    if (ok) {
      rec.stock_id = std::string(csv::trim(f[0]));
      auto ts = parse_timestamp(csv::trim(f[1]));
      ok = ts.has_value();
      if (ok) rec.timestamp = *ts;
    }
    ok = ok && optional_field(f[2], rec.bid) && optional_field(f[3], rec.ask) &&
         optional_field(f[4], rec.volume) && optional_field(f[5], rec.avg_price);
    ok = ok && (!rec.bid || *rec.bid > 0) && (!rec.ask || *rec.ask > 0) &&
         (!rec.avg_price || *rec.avg_price > 0) && (!rec.volume || *rec.volume >= 0);
    if (ok)
      table.rows.push_back(std::move(rec));
    else
      ++table.skipped;
  }
  return table;
}

inline void write_ticks(std::ostream& out, const TickTable& table) {
  auto opt = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string{}; };
  out << kTickHeader << '\n';
  for (const auto& r : table.rows)
    out << r.stock_id << ',' << format_timestamp(r.timestamp) << ',' << opt(r.bid) << ','
        << opt(r.ask) << ',' << opt(r.volume) << ',' << opt(r.avg_price) << '\n';
}

/// Trading-session window as offsets from UTC midnight, both ends inclusive.
struct SessionWindow {
  Duration open{};
  Duration close{};
};

/// Uniform sampling grid. Without sessions the grid is continuous; with
/// sessions, instants are `open + k*step <= close` inside each daily window.
struct TimeGrid {
  Instant start{};
  Duration step{std::chrono::minutes{1}};
  std::size_t count = 0;
  std::vector<SessionWindow> sessions;
  bool skip_weekends = false;  // only meaningful with sessions

  void validate() const {
    if (step.count() <= 0) throw ConfigError("time grid: step must be positive");
    if (count == 0) throw ConfigError("time grid: count must be positive");
    Duration prev_close{-1};
    for (const auto& w : sessions) {
      if (w.open < Duration{0} || w.close >= std::chrono::days{1} || w.open > w.close || w.open <= prev_close)
        throw ConfigError("time grid: sessions must be ordered, disjoint windows within one day");
      prev_close = w.close;
    }
  }

  std::vector<Instant> instants() const {
    validate();
    std::vector<Instant> out;
    out.reserve(count);
    if (sessions.empty()) {
      for (std::size_t i = 0; i < count; ++i) out.push_back(start + static_cast<std::int64_t>(i) * step);
      return out;
    }
    for_each_session_instant(std::chrono::floor<std::chrono::days>(start), [&](Instant t) {
      if (t >= start) out.push_back(t);
      return out.size() < count;
    });
    return out;
  }

  bool in_session(Instant t) const {
    if (sessions.empty()) return true;
    const auto day = std::chrono::floor<std::chrono::days>(t);
    if (skip_weekends && is_weekend(day)) return false;
    const Duration offset = t - day;
    return std::any_of(sessions.begin(), sessions.end(),
                       [&](const SessionWindow& w) { return offset >= w.open && offset <= w.close; });
  }

  /// Smallest grid whose cells (each covering `(previous instant, instant]`)
  /// span every timestamp in `[first, last]`.
  static TimeGrid covering(Instant first, Instant last, Duration step,
                           std::vector<SessionWindow> sessions = {}, bool skip_weekends = false) {
    if (last < first) throw ConfigError("time grid: last precedes first");
    TimeGrid grid;
    grid.step = step;
    grid.sessions = std::move(sessions);
    grid.skip_weekends = skip_weekends;
    if (step.count() <= 0) throw ConfigError("time grid: step must be positive");
    if (grid.sessions.empty()) {
      auto ceil_to_step = [&](Instant t) {
        const auto n = t.time_since_epoch().count();
        const auto s = step.count();
        auto q = n / s;
        if (q * s < n) ++q;
        return Instant{Duration{q * s}};
      };
      grid.start = ceil_to_step(first);
      grid.count = static_cast<std::size_t>((ceil_to_step(last) - grid.start) / step) + 1;
      return grid;
    }
    grid.count = 1;  // lets validate() pass while scanning
    grid.validate();
    std::optional<Instant> begin;
    std::size_t n = 0;
    bool done = false;
    grid.for_each_session_instant(std::chrono::floor<std::chrono::days>(first), [&](Instant t) {
      if (t >= first && !begin) begin = t;
      if (begin) ++n;
      if (t >= last) done = true;
      return !done;
    });
    grid.start = *begin;
    grid.count = n;
    return grid;
  }

private:
  static bool is_weekend(std::chrono::sys_days day) {
    const std::chrono::weekday wd{day};
    return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
  }

  template <typename Visitor>
  void for_each_session_instant(std::chrono::sys_days day, Visitor&& visit) const {
    // Bounded so an empty calendar (e.g. only weekends skipped) cannot spin forever.
    for (int idle_days = 0; idle_days < 14; day += std::chrono::days{1}) {
      if (skip_weekends && is_weekend(day)) {
        ++idle_days;
        continue;
      }
      idle_days = 0;
      for (const auto& w : sessions)
        for (Instant t = Instant{day} + w.open; t <= Instant{day} + w.close; t += step)
          if (!visit(t)) return;
    }
    throw ConfigError("time grid: session calendar yields no instants");
  }
};

/// Time-aligned prices: rows are grid instants, columns are stocks.
struct PriceMatrix {
  using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

  TimeGrid grid;
  std::vector<Instant> timestamps;
  std::vector<std::string> stock_ids;
  Eigen::MatrixXd values;  // column-major, so one stock's series is contiguous
  Mask fill_mask;          // 1 where the value was filled rather than observed

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }

  double observed_fraction(std::size_t col) const {
    if (rows() == 0) return 0.0;
    const auto filled = fill_mask.col(static_cast<Eigen::Index>(col)).cast<double>().sum();
    return 1.0 - filled / static_cast<double>(rows());
  }

  void validate() const {
    if (timestamps.size() != rows() || stock_ids.size() != cols() ||
        fill_mask.rows() != values.rows() || fill_mask.cols() != values.cols())
      throw DataError("price matrix: inconsistent dimensions");
    for (std::size_t i = 1; i < timestamps.size(); ++i)
      if (timestamps[i] <= timestamps[i - 1]) throw DataError("price matrix: timestamps not increasing");
    if (!(values.array() > 0.0).all() || !values.allFinite())
      throw DataError("price matrix: values must be finite and strictly positive");
  }
};

struct FillResult {
  PriceMatrix matrix;
  std::vector<std::string> dropped;  // stocks with no observation inside the grid window
};

/// Last-tick sampling onto `grid`. A cell is observed when a priced tick falls
/// in `(previous instant, instant]` (the first cell uses `(start - step,
/// start]`); otherwise it is forward filled, and leading gaps are back filled
/// from the first observation.
inline FillResult fill_missing(const TickTable& table, const TimeGrid& grid) {
  const auto instants = grid.instants();
  const std::size_t rows = instants.size();
  const Instant window_begin = instants.front() - grid.step;

  const auto streams = table.streams();
  FillResult result;
  auto& m = result.matrix;
  m.grid = grid;
  m.timestamps = instants;
  // One allocation for the widest possible universe; dropped stocks are
  // trimmed by a single conservativeResize at the end.
  m.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(streams.size()));
  m.fill_mask.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(streams.size()));

  Eigen::Index col = 0;
  for (const auto& stream : streams) {
    auto it = std::find_if(stream.records.begin(), stream.records.end(), [&](const TickRecord& r) {
      return r.timestamp > window_begin && r.price().has_value();
    });
    auto values = m.values.col(col);
    auto mask = m.fill_mask.col(col);
    std::optional<double> last;
    std::size_t leading = 0;
    for (std::size_t i = 0; i < rows; ++i) {
      bool observed = false;
      for (; it != stream.records.end() && it->timestamp <= instants[i]; ++it) {
        if (auto p = it->price()) {
          last = p;
          observed = true;
        }
      }
      const auto r = static_cast<Eigen::Index>(i);
      if (!last) {
        ++leading;
        continue;
      }
      values(r) = *last;
      mask(r) = observed ? 0 : 1;
    }
    if (!last) {
      result.dropped.push_back(stream.stock_id);
      continue;
    }
    for (std::size_t i = 0; i < leading; ++i) {
      values(static_cast<Eigen::Index>(i)) = values(static_cast<Eigen::Index>(leading));
      mask(static_cast<Eigen::Index>(i)) = 1;
    }
    m.stock_ids.push_back(stream.stock_id);
    ++col;
  }
  m.values.conservativeResize(Eigen::NoChange, col);
  m.fill_mask.conservativeResize(Eigen::NoChange, col);
  return result;
}

/// Keeps stocks whose observed share of cells is at least `min_observed_fraction`
/// and drops the oldest rows so the row count is a multiple of `step_size`.
inline PriceMatrix select_consistent_stocks(const PriceMatrix& matrix, double min_observed_fraction,
                                            std::size_t step_size) {
  if (!(min_observed_fraction > 0.0 && min_observed_fraction <= 1.0))
    throw ConfigError("min_observed_fraction must lie in (0, 1]");
  if (step_size == 0) throw ConfigError("step_size must be positive");
  if (matrix.rows() < step_size)
    throw DataError("price matrix has fewer rows than one gradient interval");

  std::vector<Eigen::Index> keep;
  for (std::size_t j = 0; j < matrix.cols(); ++j)
    if (matrix.observed_fraction(j) >= min_observed_fraction) keep.push_back(static_cast<Eigen::Index>(j));
  if (keep.empty()) throw DataError("no stock is consistently present: empty universe");

  const std::size_t drop = matrix.rows() % step_size;
  const auto rows = static_cast<Eigen::Index>(matrix.rows() - drop);
  PriceMatrix out;
  out.grid = matrix.grid;
  out.grid.start = matrix.timestamps[drop];
  out.grid.count = static_cast<std::size_t>(rows);
  out.timestamps.assign(matrix.timestamps.begin() + static_cast<std::ptrdiff_t>(drop), matrix.timestamps.end());
  out.values.resize(rows, static_cast<Eigen::Index>(keep.size()));
  out.fill_mask.resize(rows, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    out.values.col(c) = matrix.values.col(keep[k]).tail(rows);
    out.fill_mask.col(c) = matrix.fill_mask.col(keep[k]).tail(rows);
    out.stock_ids.push_back(matrix.stock_ids[static_cast<std::size_t>(keep[k])]);
  }
  return out;
}

/// One tick per cell at its grid instant, carrying the cell value as avg_price.
inline TickTable to_ticks(const PriceMatrix& matrix) {
  TickTable table;
  table.rows.reserve(matrix.rows() * matrix.cols());
  for (std::size_t i = 0; i < matrix.rows(); ++i)
    for (std::size_t j = 0; j < matrix.cols(); ++j) {
      TickRecord r;
      r.stock_id = matrix.stock_ids[j];
      r.timestamp = matrix.timestamps[i];
      r.avg_price = matrix.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      table.rows.push_back(std::move(r));
    }
  return table;
}

/// Matrix CSV: `timestamp,<id>,<id>,...` followed by one row per instant.
inline void write_matrix_csv(std::ostream& out, const std::vector<Instant>& timestamps,
                             const std::vector<std::string>& ids, const Eigen::MatrixXd& values) {
  out << "timestamp";
  for (const auto& id : ids) out << ',' << id;
  out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    out << format_timestamp(timestamps[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < values.cols(); ++j) out << ',' << csv::format_double(values(i, j));
    out << '\n';
  }
}

inline void write_price_csv(std::ostream& out, const PriceMatrix& matrix) {
  write_matrix_csv(out, matrix.timestamps, matrix.stock_ids, matrix.values);
}

/// Loads a price-matrix CSV. Every cell counts as observed; the grid records
/// the first instant and the first spacing.
inline PriceMatrix read_price_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("price CSV: missing header");
  csv::strip_bom(line);
  const auto header = csv::split(line);
  if (header.size() < 2 || csv::trim(header[0]) != "timestamp")
    throw DataError("price CSV: header must be 'timestamp,<stock ids...>'");
  PriceMatrix m;
  for (std::size_t j = 1; j < header.size(); ++j) m.stock_ids.emplace_back(csv::trim(header[j]));

  std::vector<double> cells;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != header.size())
      throw DataError("price CSV: wrong field count on line " + std::to_string(line_no));
    auto ts = parse_timestamp(csv::trim(f[0]));
    if (!ts) throw DataError("price CSV: bad timestamp on line " + std::to_string(line_no));
    m.timestamps.push_back(*ts);
    for (std::size_t j = 1; j < f.size(); ++j) {
      auto v = csv::parse_double(f[j]);
      if (!v) throw DataError("price CSV: bad value on line " + std::to_string(line_no));
      cells.push_back(*v);
    }
  }
  const auto rows = static_cast<Eigen::Index>(m.timestamps.size());
  const auto cols = static_cast<Eigen::Index>(m.stock_ids.size());
  if (rows == 0) throw DataError("price CSV: no rows");
  m.values = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(cells.data(), rows, cols);
  m.fill_mask = PriceMatrix::Mask::Zero(rows, cols);
  m.grid.start = m.timestamps.front();
  m.grid.count = m.timestamps.size();
  if (m.timestamps.size() > 1) m.grid.step = m.timestamps[1] - m.timestamps[0];
  m.validate();
  return m;
}

}  // namespace lagtrend
