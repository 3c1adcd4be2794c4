#pragma once

// Synthetic episodes with controllable support-to-query shift, the episode
// text format, and the paired-episode experiment harness.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qhp/core.hpp"
#include "qhp/hpg.hpp"
#include "qhp/hpm.hpp"
#include "qhp/pdo.hpp"
#include "qhp/segment.hpp"

namespace qhp {

/// Shape and geometry of synthetic episodes.
///
/// Every class (background included) owns `modes_per_class` mode directions
/// scattered within `mode_spread` radians of a class axis; class axes are
/// scattered within `class_spread` radians of a shared scene axis. Support
/// points of a class are drawn around all of its modes; each query cloud
/// shows one randomly chosen mode per class, rotated by `shift` radians in a
/// random 2-plane. `noise` is the within-mode angular standard deviation.
struct EpisodeConfig {
  int n_way = 1;
  int n_shot = 1;
  int n_query = 1;
  int points_per_cloud = 256;
  int dim = 32;
  int modes_per_class = 1;
  double shift = 0.0;
  double noise = 0.1;
  double class_spread = 0.4;
  double mode_spread = 0.6;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_way < 1) throw Error("n_way must be at least 1");
    if (n_shot < 1) throw Error("n_shot must be at least 1");
    if (n_query < 1) throw Error("n_query must be at least 1");
    if (points_per_cloud < 2 * (n_way + 1)) throw Error("points_per_cloud must be at least 2*(n_way+1)");
    if (dim < 3) throw Error("dim must be at least 3");
    if (modes_per_class < 1) throw Error("modes_per_class must be at least 1");
    if (!(shift >= 0.0) || !(noise >= 0.0) || !(class_spread >= 0.0) || !(mode_spread >= 0.0)) {
      throw Error("shift, noise and spreads must be non-negative");
    }
  }
};

namespace detail {

using Vec = std::vector<double>;

inline Vec random_unit(SeededRng& rng, std::size_t d) {
  Vec v(d);
  double n = 0.0;
  while (n < 1e-12) {
    for (double& x : v) x = rng.normal();
    n = FeatureMatrix::norm(v);
  }
  for (double& x : v) x /= n;
  return v;
}

/// Random unit vector orthogonal to the unit vector u.
inline Vec random_tangent(SeededRng& rng, const Vec& u) {
  Vec v(u.size());
  double n = 0.0;
  while (n < 1e-9) {
    for (double& x : v) x = rng.normal();
    const double along = dot(v, u);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= along * u[i];
    n = FeatureMatrix::norm(v);
  }
  for (double& x : v) x /= n;
  return v;
}

/// Moves u by `angle` radians toward the orthogonal unit direction t.
inline Vec rotate_toward(const Vec& u, const Vec& t, double angle) {
  Vec out(u.size());
  const double c = std::cos(angle), s = std::sin(angle);
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = c * u[i] + s * t[i];
  const double n = FeatureMatrix::norm(out);
  for (double& x : out) x /= n;
  return out;
}

/// Isotropic angular perturbation: a tangent Gaussian with per-axis standard
/// deviation `sigma`, mapped onto the sphere. Always consumes dim draws.
inline Vec perturb(SeededRng& rng, const Vec& u, double sigma) {
  const std::size_t d = u.size();
  Vec t(d);
  for (double& x : t) x = rng.normal() * sigma;
  const double along = dot(t, u);
  for (std::size_t i = 0; i < d; ++i) t[i] -= along * u[i];
  const double angle = FeatureMatrix::norm(t);
  if (angle < 1e-15) return u;
  for (double& x : t) x /= angle;
  return rotate_toward(u, t, angle);
}

}  // namespace detail

/// Deterministic in (cfg, rng state); the random stream consumed does not
/// depend on shift or noise, so runs differing only in those stay paired.
inline Episode generate_synthetic_episode(const EpisodeConfig& cfg, SeededRng& rng) {
  using detail::Vec;
  cfg.validate();
  const auto d = static_cast<std::size_t>(cfg.dim);
  const int num_classes = cfg.n_way + 1;
  const auto modes = static_cast<std::size_t>(cfg.modes_per_class);
  // Angular spreads are expressed as per-axis tangent sigmas.
  const double axis_sigma = 1.0 / std::sqrt(static_cast<double>(d - 1));

  const Vec scene = detail::random_unit(rng, d);
  std::vector<std::vector<Vec>> support_modes(static_cast<std::size_t>(num_classes));
  std::vector<std::vector<Vec>> query_modes(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    const Vec axis = detail::perturb(rng, scene, cfg.class_spread * axis_sigma);
    for (std::size_t m = 0; m < modes; ++m) {
      const Vec mode = detail::perturb(rng, axis, cfg.mode_spread * axis_sigma);
      const Vec plane = detail::random_tangent(rng, mode);
      support_modes[static_cast<std::size_t>(c)].push_back(mode);
      query_modes[static_cast<std::size_t>(c)].push_back(detail::rotate_toward(mode, plane, cfg.shift));
    }
  }

  const double noise_sigma = cfg.noise * axis_sigma;
  auto sample_point = [&](const std::vector<Vec>& pool, std::vector<double>& out) {
    const Vec& mode = pool[rng.below(pool.size())];
    const Vec p = detail::perturb(rng, mode, noise_sigma);
    out.insert(out.end(), p.begin(), p.end());
  };
  // One mode per class is visible in each query cloud.
  auto visible_modes = [&](const std::vector<Vec>& all) {
    return std::vector<Vec>{all[rng.below(all.size())]};
  };

  const auto t = static_cast<std::size_t>(cfg.points_per_cloud);
  Episode e;
  e.n_way = cfg.n_way;
  e.n_shot = cfg.n_shot;
  for (int c = 1; c <= cfg.n_way; ++c) {
    std::vector<LabeledCloud> shots;
    for (int k = 0; k < cfg.n_shot; ++k) {
      const auto& fg_pool = support_modes[static_cast<std::size_t>(c)];
      const auto& bg_pool = support_modes[0];
      std::vector<double> data;
      ClassMask mask;
      const std::size_t fg = t / 2;
      for (std::size_t i = 0; i < t; ++i) {
        const bool is_fg = i < fg;
        sample_point(is_fg ? fg_pool : bg_pool, data);
        mask.labels.push_back(is_fg ? c : kBackground);
      }
      shots.push_back({FeatureMatrix(t, d, std::move(data), true), std::move(mask)});
    }
    e.support.push_back(std::move(shots));
  }
  for (int l = 0; l < cfg.n_query; ++l) {
    std::vector<std::vector<Vec>> pools;
    for (const auto& m : query_modes) pools.push_back(visible_modes(m));
    std::vector<double> data;
    ClassMask mask;
    for (std::size_t i = 0; i < t; ++i) {
      const auto c = static_cast<ClassId>(i * static_cast<std::size_t>(num_classes) / t);
      sample_point(pools[static_cast<std::size_t>(c)], data);
      mask.labels.push_back(c);
    }
    e.query.push_back({FeatureMatrix(t, d, std::move(data), true), std::move(mask)});
  }
  return e;
}

inline Episode generate_synthetic_episode(const EpisodeConfig& cfg, std::uint64_t episode_index) {
  SeededRng rng(cfg.seed, episode_index);
  return generate_synthetic_episode(cfg, rng);
}

// ---------------------------------------------------------------------------
// Episode text format (schema version 1)
//
//   qhp-episode 1
//   n_way <C>
//   n_shot <K>
//   n_query <L>
//   dim <D>
//   cloud support <class> <shot> <points> <normalized 0|1>
//   <label> <f_0> ... <f_{D-1}>          (one line per point)
//   cloud query <index> <points> <normalized 0|1>
//   ...
//   end
//
// Doubles use the shortest round-trip decimal form, so read(write(e)) == e
// bit for bit.
// ---------------------------------------------------------------------------

inline constexpr int kEpisodeSchemaVersion = 1;

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class SchemaVersionError : public Error {
 public:
  explicit SchemaVersionError(int found)
      : Error("unsupported episode schema version " + std::to_string(found) + " (expected " +
              std::to_string(kEpisodeSchemaVersion) + ")") {}
};

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline void write_episode(std::ostream& os, const Episode& e) {
  const std::size_t d = e.support.empty() || e.support.front().empty()
                            ? (e.query.empty() ? 0 : e.query.front().features.dim())
                            : e.support.front().front().features.dim();
  os << "qhp-episode " << kEpisodeSchemaVersion << '\n'
     << "n_way " << e.n_way << '\n'
     << "n_shot " << e.n_shot << '\n'
     << "n_query " << e.query.size() << '\n'
     << "dim " << d << '\n';
  auto cloud_body = [&os](const LabeledCloud& c) {
    for (std::size_t i = 0; i < c.features.rows(); ++i) {
      os << c.mask.labels[i];
      for (double v : c.features.row(i)) os << ' ' << format_double(v);
      os << '\n';
    }
  };
  for (std::size_t c = 0; c < e.support.size(); ++c) {
    for (std::size_t k = 0; k < e.support[c].size(); ++k) {
      const auto& cloud = e.support[c][k];
      os << "cloud support " << c + 1 << ' ' << k << ' ' << cloud.features.rows() << ' '
         << (cloud.features.normalized() ? 1 : 0) << '\n';
      cloud_body(cloud);
    }
  }
  for (std::size_t l = 0; l < e.query.size(); ++l) {
    const auto& cloud = e.query[l];
    os << "cloud query " << l << ' ' << cloud.features.rows() << ' '
       << (cloud.features.normalized() ? 1 : 0) << '\n';
    cloud_body(cloud);
  }
  os << "end\n";
}

namespace detail {

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  std::vector<std::string_view> next(std::string_view what) {
    if (!std::getline(is_, line_)) throw ParseError(number_ + 1, "unexpected end of file, expected " + std::string(what));
    ++number_;
    std::vector<std::string_view> tokens;
    std::string_view rest(line_);
    while (!rest.empty()) {
      const auto start = rest.find_first_not_of(" \t\r");
      if (start == std::string_view::npos) break;
      rest.remove_prefix(start);
      const auto end = rest.find_first_of(" \t\r");
      tokens.push_back(rest.substr(0, end));
      if (end == std::string_view::npos) break;
      rest.remove_prefix(end);
    }
    return tokens;
  }

  std::size_t line() const { return number_; }

  template <typename T>
  T number(std::string_view tok) const {
    T v{};
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
      throw ParseError(number_, "malformed number '" + std::string(tok) + "'");
    }
    return v;
  }

  long keyed(std::string_view key) {
    const auto tokens = next(key);
    if (tokens.size() != 2 || tokens[0] != key) {
      throw ParseError(number_, "expected '" + std::string(key) + " <value>'");
    }
    return number<long>(tokens[1]);
  }

 private:
  std::istream& is_;
  std::string line_;
  std::size_t number_ = 0;
};

}  // namespace detail

/// Parses and validates an episode. Throws ParseError (with line number) on
/// malformed input, SchemaVersionError on a version mismatch, and Error when
/// the decoded episode violates an episode invariant.
inline Episode read_episode(std::istream& is) {
  detail::LineReader in(is);
  {
    const auto header = in.next("header");
    if (header.size() != 2 || header[0] != "qhp-episode") throw ParseError(in.line(), "missing 'qhp-episode' header");
    const int version = in.number<int>(header[1]);
    if (version != kEpisodeSchemaVersion) throw SchemaVersionError(version);
  }
  Episode e;
  e.n_way = static_cast<int>(in.keyed("n_way"));
  e.n_shot = static_cast<int>(in.keyed("n_shot"));
  const long n_query = in.keyed("n_query");
  const long dim = in.keyed("dim");
  if (e.n_way < 1 || e.n_shot < 1 || n_query < 1 || dim < 1) {
    throw ParseError(in.line(), "header counts must be positive");
  }
  const auto d = static_cast<std::size_t>(dim);

  auto read_body = [&](std::size_t points, bool normalized) {
    std::vector<double> data;
    data.reserve(points * d);
    ClassMask mask;
    std::size_t row_dim = 0;
    for (std::size_t i = 0; i < points; ++i) {
      const auto tokens = in.next("point row");
      if (tokens.size() < 2) throw ParseError(in.line(), "point row needs a label and features");
      if (i == 0) {
        row_dim = tokens.size() - 1;
      } else if (tokens.size() - 1 != row_dim) {
        throw ParseError(in.line(), "ragged point row");
      }
      mask.labels.push_back(in.number<int>(tokens[0]));
      for (std::size_t j = 1; j < tokens.size(); ++j) data.push_back(in.number<double>(tokens[j]));
    }
    try {
      return LabeledCloud{FeatureMatrix(points, row_dim, std::move(data), normalized), std::move(mask)};
    } catch (const Error& err) {
      throw ParseError(in.line(), err.what());
    }
  };

  e.support.resize(static_cast<std::size_t>(e.n_way));
  const auto expected_support = static_cast<std::size_t>(e.n_way) * static_cast<std::size_t>(e.n_shot);
  for (std::size_t s = 0; s < expected_support; ++s) {
    const auto tokens = in.next("support cloud");
    if (tokens.size() != 6 || tokens[0] != "cloud" || tokens[1] != "support") {
      throw ParseError(in.line(), "expected 'cloud support <class> <shot> <points> <normalized>'");
    }
    const auto cls = in.number<std::size_t>(tokens[2]);
    const auto shot = in.number<std::size_t>(tokens[3]);
    if (cls != s / static_cast<std::size_t>(e.n_shot) + 1 || shot != s % static_cast<std::size_t>(e.n_shot)) {
      throw ParseError(in.line(), "support clouds out of (class, shot) order");
    }
    const auto points = in.number<std::size_t>(tokens[4]);
    if (points == 0) throw ParseError(in.line(), "empty cloud");
    e.support[cls - 1].push_back(read_body(points, in.number<int>(tokens[5]) != 0));
  }
  for (long l = 0; l < n_query; ++l) {
    const auto tokens = in.next("query cloud");
    if (tokens.size() != 5 || tokens[0] != "cloud" || tokens[1] != "query") {
      throw ParseError(in.line(), "expected 'cloud query <index> <points> <normalized>'");
    }
    if (in.number<long>(tokens[2]) != l) throw ParseError(in.line(), "query clouds out of order");
    const auto points = in.number<std::size_t>(tokens[3]);
    if (points == 0) throw ParseError(in.line(), "empty cloud");
    e.query.push_back(read_body(points, in.number<int>(tokens[4]) != 0));
  }
  const auto tail = in.next("end");
  if (tail.size() != 1 || tail[0] != "end") throw ParseError(in.line(), "expected 'end'");

  const auto report = validate_episode(e);
  if (!report.ok()) throw Error("invalid episode: " + report.violations.front());
  for (const auto& shots : e.support) {
    for (const auto& c : shots) {
      if (c.features.dim() != d) throw Error("invalid episode: dimension mismatch with header dim");
    }
  }
  return e;
}

inline void write_episode_file(const std::string& path, const Episode& e) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_episode(os, e);
  if (!os) throw Error("failed writing " + path);
}

inline Episode read_episode_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  return read_episode(is);
}

// ---------------------------------------------------------------------------
// Experiment harness
// ---------------------------------------------------------------------------

/// Method hyperparameters. k, eta, gamma and lambda follow the published
/// settings; tau, tau_seg and epsilon are library choices.
struct MethodParams {
  int k = 5;
  int eta = 100;
  double gamma = 0.6;
  double tau = 0.1;
  double tau_seg = 0.1;
  double lambda = kDefaultLambda;
  double epsilon = kDefaultEpsilon;
  int pdo_steps = 50;
  double pdo_step_size = 0.1;
};

struct Strategy {
  enum class Kind { kFps, kHub, kMixed, kHubPdo };
  Kind kind = Kind::kHub;
  double ratio = 1.0;  // hub share, kMixed only

  std::string name() const {
    switch (kind) {
      case Kind::kFps: return "fps";
      case Kind::kHub: return "hub";
      case Kind::kHubPdo: return "hub+pdo";
      case Kind::kMixed: return "mixed(" + format_double(ratio) + ")";
    }
    return "?";
  }

  /// Accepts fps, hub, hub+pdo and mixed(<ratio>) / mixed:<ratio>.
  static Strategy parse(std::string_view s) {
    if (s == "fps") return {Kind::kFps, 0.0};
    if (s == "hub") return {Kind::kHub, 1.0};
    if (s == "hub+pdo") return {Kind::kHubPdo, 1.0};
    std::string_view body;
    if (s.starts_with("mixed(") && s.ends_with(")")) {
      body = s.substr(6, s.size() - 7);
    } else if (s.starts_with("mixed:")) {
      body = s.substr(6);
    } else {
      throw Error("unknown strategy '" + std::string(s) + "'");
    }
    double r = 0.0;
    const auto res = std::from_chars(body.data(), body.data() + body.size(), r);
    if (res.ec != std::errc() || res.ptr != body.data() + body.size() || !(r >= 0.0 && r <= 1.0)) {
      throw Error("invalid mixing ratio in strategy '" + std::string(s) + "'");
    }
    return {Kind::kMixed, r};
  }

  friend bool operator==(const Strategy&, const Strategy&) = default;
};

struct EpisodeResult {
  std::uint64_t episode_index = 0;
  std::string strategy;
  double miou = 0.0;
  double ce_loss = 0.0;
  double pc_loss = 0.0;
  double total_loss = 0.0;
  std::size_t bad_hubs = 0;
  /// Mean bad-hub cosine to own-class prototype centroid before/after the
  /// PDO descent; NaN unless the strategy is hub+pdo with bad hubs present.
  double bad_hub_cosine_before = std::numeric_limits<double>::quiet_NaN();
  double bad_hub_cosine_after = std::numeric_limits<double>::quiet_NaN();
};

struct StrategySummary {
  std::string strategy;
  std::size_t episodes = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

struct MetricsReport {
  EpisodeConfig config;
  MethodParams params;
  std::vector<std::string> strategies;
  std::uint64_t episodes = 0;
  /// Rows ordered by (episode_index, strategy position).
  std::vector<EpisodeResult> rows;
  std::vector<StrategySummary> summary;
  double wall_seconds = 0.0;

  std::vector<double> miou_of(const std::string& strategy) const {
    std::vector<double> out;
    for (const auto& r : rows) {
      if (r.strategy == strategy) out.push_back(r.miou);
    }
    return out;
  }
};

/// Mean and sample standard deviation (0 for fewer than two values).
inline StrategySummary summarize(const std::string& name, const std::vector<double>& values) {
  StrategySummary s;
  s.strategy = name;
  s.episodes = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

/// Everything a strategy needs from one episode, computed once and shared.
struct PreparedEpisode {
  Episode episode;
  FlatSupport support;
  LabeledCloud query;
  PrototypeSet hub;
  PrototypeSet fps;
  PdoAnalysis purity;
};

inline PreparedEpisode prepare_episode(Episode e, const MethodParams& p, bool need_fps) {
  PreparedEpisode out;
  out.episode = std::move(e);
  out.support = flatten_support(out.episode);
  out.query = flatten_query(out.episode);
  const auto hubs =
      mine_class_hubs(out.episode, out.support, out.query.features, p.k, p.eta, p.epsilon);
  out.hub = cluster_hub_prototypes(out.support.features, out.support.mask, hubs);
  if (need_fps) out.fps = fps_prototypes(out.support.features, out.support.mask, p.eta);
  out.purity = analyze_hub_purity(out.episode, out.support, out.query, p.k, p.eta, p.gamma, p.epsilon);
  return out;
}

inline EpisodeResult evaluate_strategy(const PreparedEpisode& ep, const Strategy& strategy,
                                       const MethodParams& p, SeededRng& mix_rng) {
  EpisodeResult r;
  r.strategy = strategy.name();
  PrototypeSet protos;
  switch (strategy.kind) {
    case Strategy::Kind::kFps: protos = ep.fps; break;
    case Strategy::Kind::kHub:
    case Strategy::Kind::kHubPdo: protos = ep.hub; break;
    case Strategy::Kind::kMixed: protos = mix_prototypes(ep.hub, ep.fps, strategy.ratio, mix_rng); break;
  }

  AnchorSet anchors = make_anchor_set(protos, ep.support.features, ep.support.mask, ep.purity.table);
  r.bad_hubs = ep.purity.table.bad_hubs().size();
  if (strategy.kind == Strategy::Kind::kHubPdo) {
    const auto opt = optimize_embeddings(anchors, protos, p.tau, p.pdo_steps, p.pdo_step_size);
    r.bad_hub_cosine_before = opt.bad_hub_cosine.front();
    r.bad_hub_cosine_after = opt.bad_hub_cosine.back();
    anchors = opt.anchors;
    protos = opt.prototypes;
  }
  r.pc_loss = pc_loss(anchors.features, anchors.labels, anchors.weights, protos, p.tau).loss;

  const auto logits = class_logits(ep.query.features, protos, ep.episode.num_classes(), p.tau_seg);
  r.ce_loss = ce_loss(logits, ep.query.mask);
  r.total_loss = total_loss(r.ce_loss, r.pc_loss, p.lambda);
  r.miou = miou(predict_mask(logits), ep.query.mask, ep.episode.num_classes()).miou;
  return r;
}

/// Runs every strategy on the same episodes. Episode i is generated from
/// stream (cfg.seed, i); mixing draws use a separate per-episode stream.
inline MetricsReport run_experiment(const EpisodeConfig& cfg, std::uint64_t episodes,
                                    const std::vector<Strategy>& strategies, const MethodParams& p) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  MetricsReport report;
  report.config = cfg;
  report.params = p;
  report.episodes = episodes;
  bool need_fps = false;
  for (const auto& s : strategies) {
    report.strategies.push_back(s.name());
    need_fps = need_fps || s.kind == Strategy::Kind::kFps || s.kind == Strategy::Kind::kMixed;
  }

  for (std::uint64_t i = 0; i < episodes; ++i) {
    SeededRng rng(cfg.seed, i);
    const PreparedEpisode ep = prepare_episode(generate_synthetic_episode(cfg, rng), p, need_fps);
    SeededRng mix_rng = rng.fork(1);
    for (const auto& s : strategies) {
      EpisodeResult r = evaluate_strategy(ep, s, p, mix_rng);
      r.episode_index = i;
      report.rows.push_back(std::move(r));
    }
  }
  for (const auto& name : report.strategies) report.summary.push_back(summarize(name, report.miou_of(name)));
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

/// Metrics file: a CSV row per (episode, strategy), then an aggregate footer.
/// Contains no timing, so identical runs produce identical bytes.
inline void write_metrics(std::ostream& os, const MetricsReport& r) {
  os << "episode_index,strategy,miou,ce_loss,pc_loss,total_loss,bad_hubs\n";
  for (const auto& row : r.rows) {
    os << row.episode_index << ',' << row.strategy << ',' << format_double(row.miou) << ','
       << format_double(row.ce_loss) << ',' << format_double(row.pc_loss) << ','
       << format_double(row.total_loss) << ',' << row.bad_hubs << '\n';
  }
  os << "# aggregate\n";
  os << "# strategy,episodes,mean_miou,std_miou\n";
  for (const auto& s : r.summary) {
    os << "# " << s.strategy << ',' << s.episodes << ',' << format_double(s.mean) << ','
       << format_double(s.stddev) << '\n';
  }
}

}  // namespace qhp
