#pragma once

// Experiment configuration and its INI-style file format:
//
//   [data]        source = synthetic | ticks | prices, path, bar_interval,
//                 session_open, session_close, skip_weekends, min_presence
//   [synthetic]   generator fields (only with source = synthetic)
//   [network]     overrides of the network defaults
//   [experiment]  mode, step_size, folds, seed, jobs, crisis bounds, ...
//
// Unknown keys are rejected so that typos do not silently fall back to
// defaults.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lagtrend/csv.hpp"
#include "lagtrend/error.hpp"
#include "lagtrend/neural.hpp"
#include "lagtrend/synth.hpp"
#include "lagtrend/time.hpp"

namespace lagtrend {

enum class Mode { cross_validated, crisis, bottleneck_sweep };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::cross_validated: return "cross_validated";
    case Mode::crisis: return "crisis";
    case Mode::bottleneck_sweep: return "bottleneck_sweep";
  }
  return "?";
}

/// Accepts the long names and the CLI short forms cross|crisis|bottleneck.
inline Mode parse_mode(std::string_view s) {
  if (s == "cross_validated" || s == "cross") return Mode::cross_validated;
  if (s == "crisis") return Mode::crisis;
  if (s == "bottleneck_sweep" || s == "bottleneck") return Mode::bottleneck_sweep;
  throw ConfigError("unknown mode '" + std::string(s) + "'");
}

enum class SourceKind { synthetic, ticks, prices };

inline const char* to_string(SourceKind k) {
  switch (k) {
    case SourceKind::synthetic: return "synthetic";
    case SourceKind::ticks: return "ticks";
    case SourceKind::prices: return "prices";
  }
  return "?";
}

struct DataSource {
  SourceKind kind = SourceKind::synthetic;
  std::filesystem::path path;  // ticks / prices
  SyntheticConfig synthetic;
  Duration bar_interval = std::chrono::minutes{1};
  std::vector<SessionWindow> sessions;  // empty = continuous grid
  bool skip_weekends = false;
  double min_presence = 0.9;
};

struct ExperimentConfig {
  Mode mode = Mode::cross_validated;
  DataSource data;
  std::size_t step_size = 16;
  NetworkConfig network;  // input_dim is set per run from the stock universe
  std::vector<std::size_t> bottleneck_widths{1, 3, 5, 10};
  std::size_t folds = 5;
  double validation_fraction = 0.25;
  bool shuffle_folds = false;
  std::optional<Instant> crisis_start;
  std::optional<Instant> crisis_end;
  std::vector<std::string> stocks;  // targets to evaluate; empty = all
  std::size_t jobs = 1;
  std::uint64_t seed = 42;
  double alpha = 0.001;
  std::filesystem::path out = "out";

  void validate() const {
    if (step_size < 2) throw ConfigError("experiment: step_size must be at least 2");
    if (folds < 2) throw ConfigError("experiment: folds must be at least 2");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
      throw ConfigError("experiment: validation_fraction must lie in (0, 1)");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("experiment: alpha must lie in (0, 1)");
    if (jobs == 0) throw ConfigError("experiment: jobs must be positive");
    if (!(data.min_presence > 0.0 && data.min_presence <= 1.0))
      throw ConfigError("data: min_presence must lie in (0, 1]");
    if (data.kind != SourceKind::synthetic && data.path.empty())
      throw ConfigError("data: source '" + std::string(to_string(data.kind)) + "' needs a path");
    if (data.kind == SourceKind::synthetic) data.synthetic.validate();
    if (mode == Mode::crisis) {
      if (!crisis_start || !crisis_end) throw ConfigError("crisis mode requires crisis_start and crisis_end");
      if (*crisis_end < *crisis_start) throw ConfigError("crisis_end precedes crisis_start");
    }
    if (mode == Mode::bottleneck_sweep && bottleneck_widths.empty())
      throw ConfigError("bottleneck sweep needs at least one width");
    for (auto w : bottleneck_widths)
      if (w == 0) throw ConfigError("bottleneck widths must be positive");
    auto probe = network;
    probe.input_dim = 1;
    probe.validate();
  }
};

namespace detail {

template <class T>
T parse_unsigned(const std::string& key, std::string_view text) {
  text = csv::trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    throw ConfigError("'" + key + "': expected a non-negative integer, got '" + std::string(text) + "'");
  return value;
}

inline double parse_real(const std::string& key, std::string_view text) {
  auto v = csv::parse_double(csv::trim(text));
  if (!v) throw ConfigError("'" + key + "': expected a number, got '" + std::string(text) + "'");
  return *v;
}

inline bool parse_bool(const std::string& key, std::string_view text) {
  text = csv::trim(text);
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("'" + key + "': expected a boolean, got '" + std::string(text) + "'");
}

inline std::vector<std::size_t> parse_size_list(const std::string& key, std::string_view text) {
  std::vector<std::size_t> out;
  for (auto item : csv::split(text, ','))
    if (!csv::trim(item).empty()) out.push_back(parse_unsigned<std::size_t>(key, item));
  return out;
}

/// "HH:MM" or "HH:MM:SS" as an offset from midnight.
inline Duration parse_clock(const std::string& key, std::string_view text) {
  text = csv::trim(text);
  const auto parts = csv::split(text, ':');
  if (parts.size() < 2 || parts.size() > 3) throw ConfigError("'" + key + "': expected HH:MM[:SS]");
  const auto h = parse_unsigned<int>(key, parts[0]);
  const auto m = parse_unsigned<int>(key, parts[1]);
  const int s = parts.size() == 3 ? parse_unsigned<int>(key, parts[2]) : 0;
  if (h > 23 || m > 59 || s > 59) throw ConfigError("'" + key + "': clock time out of range");
  return std::chrono::hours{h} + std::chrono::minutes{m} + std::chrono::seconds{s};
}

inline Duration parse_duration_key(const std::string& key, std::string_view text) {
  try {
    return parse_duration(csv::trim(text));
  } catch (const Error& e) {
    throw ConfigError("'" + key + "': " + e.what());
  }
}

inline Instant parse_instant_key(const std::string& key, std::string_view text) {
  auto t = parse_timestamp(csv::trim(text));
  if (!t) throw ConfigError("'" + key + "': bad timestamp '" + std::string(text) + "'");
  return *t;
}

/// Rows separated by '|', entries by ','.
inline Eigen::MatrixXd parse_matrix(const std::string& key, std::string_view text) {
  std::vector<std::vector<double>> rows;
  for (auto row : csv::split(text, '|')) {
    rows.emplace_back();
    for (auto cell : csv::split(row, ',')) rows.back().push_back(parse_real(key, cell));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) throw ConfigError("'" + key + "': ragged matrix");
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

using Ptree = boost::property_tree::ptree;

inline void reject_unknown(const Ptree& section, const std::string& name, const std::set<std::string>& known) {
  for (const auto& [key, value] : section)
    if (!known.count(key)) throw ConfigError("unknown key '" + name + "." + key + "'");
}

inline void apply_synthetic(const Ptree& sec, SyntheticConfig& c) {
  reject_unknown(sec, "synthetic",
                 {"n_stocks", "n_steps", "ticks_per_step", "signal_strength", "coupling_matrix", "coupling_degree",
                  "noise_sigma", "signal_scale", "micro_noise_sigma", "drift", "initial_price", "start",
                  "tick_interval", "seed", "switch_step", "crisis_drift", "crisis_sigma_multiplier", "wave_length",
                  "wave_decline"});
  for (const auto& [key, node] : sec) {
    const std::string k = "synthetic." + key;
    const std::string v = node.data();
    if (key == "n_stocks") c.n_stocks = parse_unsigned<std::size_t>(k, v);
    else if (key == "n_steps") c.n_steps = parse_unsigned<std::size_t>(k, v);
    else if (key == "ticks_per_step") c.ticks_per_step = parse_unsigned<std::size_t>(k, v);
    else if (key == "signal_strength") c.signal_strength = parse_real(k, v);
    else if (key == "coupling_matrix") c.coupling = parse_matrix(k, v);
    else if (key == "coupling_degree") c.coupling_degree = parse_unsigned<std::size_t>(k, v);
    else if (key == "noise_sigma") c.noise_sigma = parse_real(k, v);
    else if (key == "signal_scale") c.signal_scale = parse_real(k, v);
    else if (key == "micro_noise_sigma") c.micro_noise_sigma = parse_real(k, v);
    else if (key == "drift") c.drift = parse_real(k, v);
    else if (key == "initial_price") c.initial_price = parse_real(k, v);
    else if (key == "start") c.start = parse_instant_key(k, v);
    else if (key == "tick_interval") c.tick_interval = parse_duration_key(k, v);
    else if (key == "seed") c.seed = parse_unsigned<std::uint64_t>(k, v);
  }
  const bool has_switch = sec.find("switch_step") != sec.not_found();
  for (const char* key : {"crisis_drift", "crisis_sigma_multiplier", "wave_length", "wave_decline"})
    if (!has_switch && sec.find(key) != sec.not_found())
      throw ConfigError(std::string("synthetic.") + key + " requires synthetic.switch_step");
  if (has_switch) {
    RegimeSwitch rs;
    rs.switch_step = parse_unsigned<std::size_t>("synthetic.switch_step", sec.get<std::string>("switch_step"));
    if (auto v = sec.get_optional<std::string>("crisis_drift")) rs.crisis_drift = parse_real("synthetic.crisis_drift", *v);
    if (auto v = sec.get_optional<std::string>("crisis_sigma_multiplier"))
      rs.crisis_sigma_multiplier = parse_real("synthetic.crisis_sigma_multiplier", *v);
    if (auto v = sec.get_optional<std::string>("wave_length"))
      rs.wave_length = parse_unsigned<std::size_t>("synthetic.wave_length", *v);
    if (auto v = sec.get_optional<std::string>("wave_decline")) rs.wave_decline = parse_real("synthetic.wave_decline", *v);
    c.regime_switch = rs;
  }
}

inline void apply_network(const Ptree& sec, NetworkConfig& c) {
  reject_unknown(sec, "network",
                 {"hidden_layers", "bottleneck", "learning_rate", "lr_decay", "momentum", "l2_lambda", "batch_size",
                  "max_epochs", "early_stop_patience", "sigmoid_midpoint"});
  for (const auto& [key, node] : sec) {
    const std::string k = "network." + key;
    const std::string v = node.data();
    if (key == "hidden_layers") c.hidden_layers = parse_size_list(k, v);
    else if (key == "bottleneck") {
      if (csv::trim(v) == "none" || csv::trim(v).empty()) c.bottleneck.reset();
      else c.bottleneck = parse_unsigned<std::size_t>(k, v);
    }
    else if (key == "learning_rate") c.learning_rate = parse_real(k, v);
    else if (key == "lr_decay") c.lr_decay = parse_real(k, v);
    else if (key == "momentum") c.momentum = parse_real(k, v);
    else if (key == "l2_lambda") c.l2_lambda = parse_real(k, v);
    else if (key == "batch_size") c.batch_size = parse_unsigned<std::size_t>(k, v);
    else if (key == "max_epochs") c.max_epochs = parse_unsigned<std::size_t>(k, v);
    else if (key == "early_stop_patience") {
      if (csv::trim(v) == "none") c.early_stop_patience = kNoPatience;
      else c.early_stop_patience = parse_unsigned<std::size_t>(k, v);
    }
    else if (key == "sigmoid_midpoint") c.sigmoid_midpoint = parse_real(k, v);
  }
}

inline void apply_data(const Ptree& sec, DataSource& d) {
  reject_unknown(sec, "data",
                 {"source", "path", "bar_interval", "session_open", "session_close", "skip_weekends", "min_presence"});
  if (auto v = sec.get_optional<std::string>("source")) {
    const auto s = csv::trim(*v);
    if (s == "synthetic") d.kind = SourceKind::synthetic;
    else if (s == "ticks") d.kind = SourceKind::ticks;
    else if (s == "prices") d.kind = SourceKind::prices;
    else throw ConfigError("data.source must be synthetic, ticks or prices");
  }
  if (auto v = sec.get_optional<std::string>("path")) d.path = std::string(csv::trim(*v));
  if (auto v = sec.get_optional<std::string>("bar_interval")) d.bar_interval = parse_duration_key("data.bar_interval", *v);
  if (auto v = sec.get_optional<std::string>("skip_weekends")) d.skip_weekends = parse_bool("data.skip_weekends", *v);
  if (auto v = sec.get_optional<std::string>("min_presence")) d.min_presence = parse_real("data.min_presence", *v);
  const auto open = sec.get_optional<std::string>("session_open");
  const auto close = sec.get_optional<std::string>("session_close");
  if (open.has_value() != close.has_value()) throw ConfigError("data: session_open and session_close go together");
  if (open) {
    SessionWindow w{parse_clock("data.session_open", *open), parse_clock("data.session_close", *close)};
    if (w.close < w.open) throw ConfigError("data: session_close precedes session_open");
    d.sessions = {w};
  }
}

inline void apply_experiment(const Ptree& sec, ExperimentConfig& c) {
  reject_unknown(sec, "experiment",
                 {"mode", "step_size", "bottleneck_widths", "folds", "validation_fraction", "shuffle_folds",
                  "crisis_start", "crisis_end", "stocks", "jobs", "seed", "alpha", "out"});
  for (const auto& [key, node] : sec) {
    const std::string k = "experiment." + key;
    const std::string v = node.data();
    if (key == "mode") c.mode = parse_mode(csv::trim(v));
    else if (key == "step_size") c.step_size = parse_unsigned<std::size_t>(k, v);
    else if (key == "bottleneck_widths") c.bottleneck_widths = parse_size_list(k, v);
    else if (key == "folds") c.folds = parse_unsigned<std::size_t>(k, v);
    else if (key == "validation_fraction") c.validation_fraction = parse_real(k, v);
    else if (key == "shuffle_folds") c.shuffle_folds = parse_bool(k, v);
    else if (key == "crisis_start") c.crisis_start = parse_instant_key(k, v);
    else if (key == "crisis_end") c.crisis_end = parse_instant_key(k, v);
    else if (key == "stocks") {
      c.stocks.clear();
      for (auto s : csv::split(v, ','))
        if (!csv::trim(s).empty()) c.stocks.emplace_back(csv::trim(s));
    }
    else if (key == "jobs") c.jobs = parse_unsigned<std::size_t>(k, v);
    else if (key == "seed") c.seed = parse_unsigned<std::uint64_t>(k, v);
    else if (key == "alpha") c.alpha = parse_real(k, v);
    else if (key == "out") c.out = std::string(csv::trim(v));
  }
}

}  // namespace detail

namespace detail {

// The INI reader only knows whole-line comments; drop `; ...` after a value.
inline std::string strip_inline_comments(std::istream& in) {
  std::string out, line;
  while (std::getline(in, line)) {
    for (std::size_t i = 1; i < line.size(); ++i)
      if (line[i] == ';' && (line[i - 1] == ' ' || line[i - 1] == '\t')) {
        line.resize(i);
        break;
      }
    out += line;
    out += '\n';
  }
  return out;
}

}  // namespace detail

/// Parses a config document. Relative data paths resolve against `base_dir`.
/// `;` starts a comment at the beginning of a line or after whitespace.
inline ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
  detail::Ptree tree;
  try {
    std::istringstream cleaned(detail::strip_inline_comments(in));
    boost::property_tree::ini_parser::read_ini(cleaned, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  for (const auto& [name, section] : tree) {
    if (section.empty() && !section.data().empty()) throw ConfigError("config: key '" + name + "' outside a section");
    if (name == "data") detail::apply_data(section, c.data);
    else if (name == "synthetic") continue;
    else if (name == "network") detail::apply_network(section, c.network);
    else if (name == "experiment") detail::apply_experiment(section, c);
    else throw ConfigError("config: unknown section [" + name + "]");
  }
  if (auto syn = tree.get_child_optional("synthetic")) {
    if (c.data.kind != SourceKind::synthetic)
      throw ConfigError("config: [synthetic] given but data.source is '" + std::string(to_string(c.data.kind)) + "'");
    detail::apply_synthetic(*syn, c.data.synthetic);
  }
  if (c.data.kind == SourceKind::synthetic && !c.data.path.empty())
    throw ConfigError("config: data.path given with a synthetic source; exactly one data source is allowed");
  if (!c.data.path.empty() && c.data.path.is_relative() && !base_dir.empty()) c.data.path = base_dir / c.data.path;
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  return parse_config(in, path.parent_path());
}

// JSON snapshot of the resolved configuration, stored in report provenance.

inline nlohmann::json to_json(const SyntheticConfig& c) {
  nlohmann::json j{{"n_stocks", c.n_stocks},
                   {"n_steps", c.n_steps},
                   {"ticks_per_step", c.ticks_per_step},
                   {"signal_strength", c.signal_strength},
                   {"coupling_degree", c.coupling_degree},
                   {"noise_sigma", c.noise_sigma},
                   {"signal_scale", c.signal_scale},
                   {"micro_noise_sigma", c.micro_noise_sigma},
                   {"drift", c.drift},
                   {"initial_price", c.initial_price},
                   {"start", format_timestamp(c.start)},
                   {"tick_interval_ms", c.tick_interval.count()},
                   {"seed", c.seed}};
  if (c.coupling.size() != 0) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < c.coupling.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(c.coupling.cols()));
      for (Eigen::Index k = 0; k < c.coupling.cols(); ++k) row[static_cast<std::size_t>(k)] = c.coupling(r, k);
      rows.push_back(row);
    }
    j["coupling_matrix"] = rows;
  }
  if (c.regime_switch) {
    const auto& rs = *c.regime_switch;
    j["regime_switch"] = {{"switch_step", rs.switch_step},
                          {"crisis_drift", rs.crisis_drift},
                          {"crisis_sigma_multiplier", rs.crisis_sigma_multiplier},
                          {"wave_length", rs.wave_length},
                          {"wave_decline", rs.wave_decline}};
  }
  return j;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json data{{"source", to_string(c.data.kind)},
                      {"bar_interval_ms", c.data.bar_interval.count()},
                      {"skip_weekends", c.data.skip_weekends},
                      {"min_presence", c.data.min_presence}};
  if (c.data.kind == SourceKind::synthetic)
    data["synthetic"] = to_json(c.data.synthetic);
  else
    data["path"] = c.data.path.generic_string();
  nlohmann::json sessions = nlohmann::json::array();
  for (const auto& w : c.data.sessions) sessions.push_back({w.open.count(), w.close.count()});
  data["sessions_ms"] = sessions;
  auto network = to_json(c.network);
  if (c.network.early_stop_patience == kNoPatience) network["early_stop_patience"] = nullptr;
  nlohmann::json j{{"mode", to_string(c.mode)},
                   {"data", data},
                   {"step_size", c.step_size},
                   {"network", network},
                   {"bottleneck_widths", c.bottleneck_widths},
                   {"folds", c.folds},
                   {"validation_fraction", c.validation_fraction},
                   {"shuffle_folds", c.shuffle_folds},
                   {"stocks", c.stocks},
                   {"jobs", c.jobs},
                   {"seed", c.seed},
                   {"alpha", c.alpha}};
  j["crisis_start"] = c.crisis_start ? nlohmann::json(format_timestamp(*c.crisis_start)) : nlohmann::json(nullptr);
  j["crisis_end"] = c.crisis_end ? nlohmann::json(format_timestamp(*c.crisis_end)) : nlohmann::json(nullptr);
  return j;
}

}  // namespace lagtrend
