#pragma once

// Run configuration and the command implementations behind the qhp tool.
// Each cmd_* returns a process exit code:
//   0 ok, 1 check failed, 2 configuration error, 3 I/O error.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qhp/episodes.hpp"
#include "qhp/gradcheck.hpp"

namespace qhp {

inline constexpr std::string_view kArtifactVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitConfig = 2, kExitIo = 3 };

class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  EpisodeConfig episode;
  MethodParams params;
  std::optional<double> tau_seg;  // follows tau unless set
  std::vector<std::string> strategies{"hub", "fps"};
  std::uint64_t episodes = 100;
  std::string out = "metrics.csv";

  MethodParams resolved_params() const {
    MethodParams p = params;
    p.tau_seg = tau_seg.value_or(p.tau);
    return p;
  }
};

namespace detail {

template <typename T>
T parse_value(const std::string& key, std::string_view text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ConfigError(key, "cannot parse value '" + std::string(text) + "'");
  }
  return v;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto item = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

struct KeySpec {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::map<std::string, KeySpec>& key_table() {
  static const std::map<std::string, KeySpec> table = [] {
    std::map<std::string, KeySpec> t;
    // Accessors are generic lambdas so one definition serves both set and get.
    auto int_key = [&t](const std::string& key, auto field) {
      t[key] = {[key, field](RunConfig& c, const std::string& v) { field(c) = parse_value<int>(key, v); },
                [field](const RunConfig& c) { return std::to_string(field(c)); }};
    };
    auto real_key = [&t](const std::string& key, auto field) {
      t[key] = {[key, field](RunConfig& c, const std::string& v) { field(c) = parse_value<double>(key, v); },
                [field](const RunConfig& c) { return format_double(field(c)); }};
    };
    int_key("n_way", [](auto& c) -> auto& { return c.episode.n_way; });
    int_key("n_shot", [](auto& c) -> auto& { return c.episode.n_shot; });
    int_key("n_query", [](auto& c) -> auto& { return c.episode.n_query; });
    int_key("points_per_cloud", [](auto& c) -> auto& { return c.episode.points_per_cloud; });
    int_key("dim", [](auto& c) -> auto& { return c.episode.dim; });
    int_key("modes_per_class", [](auto& c) -> auto& { return c.episode.modes_per_class; });
    real_key("shift", [](auto& c) -> auto& { return c.episode.shift; });
    real_key("noise", [](auto& c) -> auto& { return c.episode.noise; });
    real_key("class_spread", [](auto& c) -> auto& { return c.episode.class_spread; });
    real_key("mode_spread", [](auto& c) -> auto& { return c.episode.mode_spread; });
    int_key("k", [](auto& c) -> auto& { return c.params.k; });
    int_key("eta", [](auto& c) -> auto& { return c.params.eta; });
    real_key("gamma", [](auto& c) -> auto& { return c.params.gamma; });
    real_key("tau", [](auto& c) -> auto& { return c.params.tau; });
    real_key("lambda", [](auto& c) -> auto& { return c.params.lambda; });
    real_key("epsilon", [](auto& c) -> auto& { return c.params.epsilon; });
    int_key("pdo_steps", [](auto& c) -> auto& { return c.params.pdo_steps; });
    real_key("pdo_step_size", [](auto& c) -> auto& { return c.params.pdo_step_size; });
    t["tau_seg"] = {[](RunConfig& c, const std::string& v) { c.tau_seg = parse_value<double>("tau_seg", v); },
                    [](const RunConfig& c) { return format_double(c.resolved_params().tau_seg); }};
    t["seed"] = {[](RunConfig& c, const std::string& v) { c.episode.seed = parse_value<std::uint64_t>("seed", v); },
                 [](const RunConfig& c) { return std::to_string(c.episode.seed); }};
    t["episodes"] = {[](RunConfig& c, const std::string& v) { c.episodes = parse_value<std::uint64_t>("episodes", v); },
                     [](const RunConfig& c) { return std::to_string(c.episodes); }};
    t["out"] = {[](RunConfig& c, const std::string& v) { c.out = v; },
                [](const RunConfig& c) { return c.out; }};
    t["strategies"] = {[](RunConfig& c, const std::string& v) {
                         c.strategies = split_list(v);
                         for (const auto& s : c.strategies) {
                           try {
                             Strategy::parse(s);
                           } catch (const Error& e) {
                             throw ConfigError("strategies", e.what());
                           }
                         }
                       },
                       [](const RunConfig& c) {
                         std::string s;
                         for (std::size_t i = 0; i < c.strategies.size(); ++i) s += (i ? "," : "") + c.strategies[i];
                         return s;
                       }};
    return t;
  }();
  return table;
}

}  // namespace detail

/// Sets one key; '-' in keys is accepted as '_'. Throws ConfigError naming
/// the key when it is unknown or its value does not parse.
inline void apply_setting(RunConfig& c, std::string key, const std::string& value) {
  std::replace(key.begin(), key.end(), '-', '_');
  const auto& table = detail::key_table();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError(key, "unknown key");
  it->second.set(c, detail::trim(value));
}

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : detail::key_table()) keys.push_back(k);
  return keys;
}

/// Flat "key = value" text; '#' starts a comment.
inline void parse_config(RunConfig& c, std::istream& is) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(is, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (detail::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(detail::trim(line), "line " + std::to_string(number) + " has no '='");
    }
    apply_setting(c, detail::trim(std::string_view(line).substr(0, eq)), line.substr(eq + 1));
  }
}

inline void load_config_file(RunConfig& c, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config file " + path);
  parse_config(c, is);
}

/// Resolved configuration in the config-file format.
inline std::string format_config(const RunConfig& c) {
  std::ostringstream os;
  for (const auto& [key, spec] : detail::key_table()) os << key << " = " << spec.get(c) << '\n';
  return os.str();
}

/// Checks cross-field constraints; throws ConfigError.
inline void validate_config(const RunConfig& c) {
  try {
    c.episode.validate();
  } catch (const Error& e) {
    throw ConfigError("episode", e.what());
  }
  const MethodParams p = c.resolved_params();
  if (p.k < 1) throw ConfigError("k", "must be at least 1");
  if (p.eta < 1) throw ConfigError("eta", "must be at least 1");
  if (!(p.gamma > 0.0 && p.gamma < 1.0)) throw ConfigError("gamma", "must lie in (0, 1)");
  if (!(p.tau > 0.0)) throw ConfigError("tau", "must be positive");
  if (!(p.tau_seg > 0.0)) throw ConfigError("tau_seg", "must be positive");
  if (!(p.epsilon > 0.0)) throw ConfigError("epsilon", "must be positive");
  if (p.pdo_steps < 1) throw ConfigError("pdo_steps", "must be at least 1");
  if (!(p.pdo_step_size > 0.0)) throw ConfigError("pdo_step_size", "must be positive");
  if (c.strategies.empty()) throw ConfigError("strategies", "at least one strategy is required");
}

inline std::vector<Strategy> parse_strategies(const std::vector<std::string>& names) {
  std::vector<Strategy> out;
  for (const auto& n : names) {
    try {
      out.push_back(Strategy::parse(n));
    } catch (const Error& e) {
      throw ConfigError("strategies", e.what());
    }
  }
  return out;
}

/// Writes via a sibling temp file and rename.
inline void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp.string());
    os << contents;
    if (!os.flush()) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " to " + target.string());
  }
}

inline std::string manifest_path(const std::string& out) { return out + ".manifest"; }

inline std::string format_manifest(const RunConfig& c, const MetricsReport& r) {
  std::ostringstream os;
  os << "# qhp run manifest\n"
     << "# artifact_version " << kArtifactVersion << '\n'
     << "# master_seed " << c.episode.seed << '\n'
     << "# wall_seconds " << format_double(r.wall_seconds) << '\n'
     << format_config(c);
  return os.str();
}

inline MetricsReport run_config(const RunConfig& c) {
  validate_config(c);
  return run_experiment(c.episode, c.episodes, parse_strategies(c.strategies), c.resolved_params());
}

inline std::string metrics_text(const MetricsReport& r) {
  std::ostringstream os;
  write_metrics(os, r);
  return os.str();
}

/// Runs the experiment, writes the metrics file and a manifest beside it.
inline int cmd_run(const RunConfig& c, std::ostream& out, std::ostream& err) {
  MetricsReport report;
  try {
    report = run_config(c);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    write_file_atomic(c.out, metrics_text(report));
    write_file_atomic(manifest_path(c.out), format_manifest(c, report));
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  }
  for (const auto& s : report.summary) {
    out << s.strategy << ": mean mIoU " << format_double(s.mean) << " (sd " << format_double(s.stddev)
        << ", " << s.episodes << " episodes)\n";
  }
  return kExitOk;
}

inline const std::vector<std::string>& sweep_parameters() {
  static const std::vector<std::string> p{"k", "eta", "gamma", "lambda", "ratio"};
  return p;
}

inline std::string sweep_report_path(const std::string& prefix, const std::string& param,
                                     const std::string& value) {
  return prefix + "." + param + "=" + value + ".csv";
}

inline std::string sweep_summary_path(const std::string& prefix) { return prefix + ".summary.csv"; }

/// One run per value with paired seeds; `ratio` replaces the strategy list
/// with mixed(<value>). Writes one report per value plus a summary table.
inline int cmd_sweep(const RunConfig& base, const std::string& param,
                     const std::vector<std::string>& values, std::ostream& out, std::ostream& err) {
  if (std::find(sweep_parameters().begin(), sweep_parameters().end(), param) == sweep_parameters().end()) {
    err << "config error: cannot sweep parameter '" << param << "'\n";
    return kExitConfig;
  }
  if (values.empty()) {
    err << "config error: sweep needs at least one value\n";
    return kExitConfig;
  }
  std::ostringstream summary;
  summary << "param,value,strategy,episodes,mean_miou,std_miou,mean_total_loss\n";
  for (const auto& value : values) {
    RunConfig c = base;
    MetricsReport report;
    try {
      if (param == "ratio") {
        c.strategies = {"mixed(" + value + ")"};
      } else {
        apply_setting(c, param, value);
      }
      c.out = sweep_report_path(base.out, param, value);
      report = run_config(c);
    } catch (const ConfigError& e) {
      err << "config error: " << e.what() << '\n';
      return kExitConfig;
    }
    try {
      write_file_atomic(c.out, metrics_text(report));
      write_file_atomic(manifest_path(c.out), format_manifest(c, report));
    } catch (const IoError& e) {
      err << "io error: " << e.what() << '\n';
      return kExitIo;
    }
    for (const auto& s : report.summary) {
      double total = 0.0;
      std::size_t n = 0;
      for (const auto& row : report.rows) {
        if (row.strategy == s.strategy) {
          total += row.total_loss;
          ++n;
        }
      }
      summary << param << ',' << value << ',' << s.strategy << ',' << s.episodes << ','
              << format_double(s.mean) << ',' << format_double(s.stddev) << ','
              << format_double(n ? total / static_cast<double>(n) : 0.0) << '\n';
      out << param << '=' << value << "  " << s.strategy << ": mean mIoU " << format_double(s.mean) << '\n';
    }
  }
  try {
    write_file_atomic(sweep_summary_path(base.out), summary.str());
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitOk;
}

inline constexpr double kGradcheckTolerance = 1e-4;

/// Exit 0 iff the max relative gradient error is below 1e-4. `corrupt` adds
/// an offset to one analytic gradient entry (negative control).
inline int cmd_gradcheck(std::uint64_t seed, std::size_t cases, std::ostream& out, std::ostream& err,
                         double corrupt = 0.0) {
  if (cases < 1) {
    err << "config error: cases must be at least 1\n";
    return kExitConfig;
  }
  const GradcheckResult r = gradcheck_pc_loss(seed, cases, corrupt);
  out << "max_relative_error " << format_double(r.max_relative_error) << " over " << r.cases << " cases\n";
  if (!(r.max_relative_error < kGradcheckTolerance)) {
    err << "gradient check failed: seed " << seed << " instance " << r.worst_case << " relative error "
        << format_double(r.max_relative_error) << '\n';
    return kExitCheckFailed;
  }
  return kExitOk;
}

/// Writes episode `index` of the configured stream to `path`.
inline int cmd_gen(const RunConfig& c, std::uint64_t index, const std::string& path, std::ostream& err) {
  Episode e;
  try {
    validate_config(c);
    e = generate_synthetic_episode(c.episode, index);
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << '\n';
    return kExitConfig;
  }
  try {
    std::ostringstream os;
    write_episode(os, e);
    write_file_atomic(path, os.str());
  } catch (const IoError& ex) {
    err << "io error: " << ex.what() << '\n';
    return kExitIo;
  }
  return kExitOk;
}

}  // namespace qhp
