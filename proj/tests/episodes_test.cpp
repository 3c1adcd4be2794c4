#include <gtest/gtest.h>

#include <sstream>

#include "qhp/episodes.hpp"

namespace qhp {
namespace {

EpisodeConfig small_config(std::uint64_t seed = 0) {
  EpisodeConfig cfg;
  cfg.points_per_cloud = 48;
  cfg.dim = 8;
  cfg.modes_per_class = 2;
  cfg.noise = 0.3;
  cfg.seed = seed;
  return cfg;
}

MethodParams small_params() {
  MethodParams p;
  p.eta = 8;
  p.pdo_steps = 5;
  return p;
}

std::string serialize(const Episode& e) {
  std::ostringstream os;
  write_episode(os, e);
  return os.str();
}

Episode parse(const std::string& text) {
  std::istringstream is(text);
  return read_episode(is);
}

TEST(GenerateEpisodeTest, DegenerateGeneratorRepeatsOnePointPerClass) {
  EpisodeConfig cfg = small_config();
  cfg.noise = 0.0;
  cfg.shift = 0.0;
  cfg.modes_per_class = 1;
  const Episode e = generate_synthetic_episode(cfg, 0);
  EXPECT_TRUE(validate_episode(e).ok());
  const FlatSupport s = flatten_support(e);
  const LabeledCloud q = flatten_query(e);
  for (ClassId c = 0; c <= cfg.n_way; ++c) {
    const auto ref = s.features.row(s.mask.indices_of(c).front());
    for (std::size_t i : s.mask.indices_of(c)) EXPECT_TRUE(std::ranges::equal(s.features.row(i), ref));
    for (std::size_t i : q.mask.indices_of(c)) EXPECT_TRUE(std::ranges::equal(q.features.row(i), ref));
  }
}

TEST(GenerateEpisodeTest, SameSeedSameBytes) {
  const auto cfg = small_config(11);
  EXPECT_EQ(serialize(generate_synthetic_episode(cfg, 3)), serialize(generate_synthetic_episode(cfg, 3)));
  EXPECT_NE(serialize(generate_synthetic_episode(cfg, 3)), serialize(generate_synthetic_episode(cfg, 4)));
}

TEST(GenerateEpisodeTest, InvalidConfigThrows) {
  EpisodeConfig cfg = small_config();
  cfg.points_per_cloud = 3;
  EXPECT_THROW(generate_synthetic_episode(cfg, 0), Error);
  cfg = small_config();
  cfg.dim = 2;
  EXPECT_THROW(generate_synthetic_episode(cfg, 0), Error);
}

double mean_within_class_cosine(const Episode& e) {
  const FlatSupport s = flatten_support(e);
  const LabeledCloud q = flatten_query(e);
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.features.rows(); ++i) {
    for (std::size_t j = 0; j < q.features.rows(); ++j) {
      if (s.mask.labels[i] != q.mask.labels[j]) continue;
      total += dot(s.features.row(i), q.features.row(j));
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

double mean_cosine_over_episodes(EpisodeConfig cfg, double shift, int episodes) {
  cfg.shift = shift;
  double total = 0.0;
  for (int i = 0; i < episodes; ++i) total += mean_within_class_cosine(generate_synthetic_episode(cfg, static_cast<std::uint64_t>(i)));
  return total / episodes;
}

TEST(GenerateEpisodeTest, ShiftLowersSupportQueryCosine) {
  EpisodeConfig cfg = small_config(5);
  cfg.points_per_cloud = 32;
  cfg.modes_per_class = 3;
  const double at0 = mean_cosine_over_episodes(cfg, 0.0, 200);
  const double at25 = mean_cosine_over_episodes(cfg, 0.25, 200);
  const double at5 = mean_cosine_over_episodes(cfg, 0.5, 200);
  EXPECT_LT(at5, at0);
  EXPECT_LE(at25, at0);
  EXPECT_LE(at5, at25);
}

TEST(EpisodeFileTest, RoundTripIsExact) {
  for (std::uint64_t i = 0; i < 20; ++i) {
    EpisodeConfig cfg = small_config(i);
    cfg.n_way = 1 + static_cast<int>(i % 3);
    cfg.n_shot = 1 + static_cast<int>(i % 2);
    cfg.n_query = 1 + static_cast<int>(i % 2);
    cfg.shift = 0.1 * static_cast<double>(i);
    const Episode e = generate_synthetic_episode(cfg, i);
    EXPECT_EQ(parse(serialize(e)), e);
  }
}

TEST(EpisodeFileTest, TruncatedFileIsAParseError) {
  const std::string text = serialize(generate_synthetic_episode(small_config(), 0));
  for (std::size_t cut : {text.size() / 3, text.size() / 2, text.size() - 5}) {
    EXPECT_THROW(parse(text.substr(0, cut)), ParseError) << "cut at " << cut;
  }
}

TEST(EpisodeFileTest, ParseErrorCarriesLineNumber) {
  std::string text = serialize(generate_synthetic_episode(small_config(), 0));
  const auto pos = text.find("n_shot 1");
  text.replace(pos, 8, "n_shot x");
  try {
    parse(text);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(EpisodeFileTest, SchemaVersionMismatch) {
  std::string text = serialize(generate_synthetic_episode(small_config(), 0));
  text.replace(0, text.find('\n'), "qhp-episode 2");
  EXPECT_THROW(parse(text), SchemaVersionError);
}

TEST(EpisodeFileTest, DimensionMismatchIsSurfacedOnRead) {
  EpisodeConfig a = small_config(), b = small_config();
  b.dim = 4;
  Episode e = generate_synthetic_episode(a, 0);
  e.query = generate_synthetic_episode(b, 0).query;
  try {
    parse(serialize(e));
    FAIL();
  } catch (const ParseError&) {
    FAIL() << "expected a validation error, not a parse error";
  } catch (const Error& err) {
    EXPECT_NE(std::string(err.what()).find("dimension mismatch"), std::string::npos);
  }
}

TEST(StrategyTest, ParseAndName) {
  EXPECT_EQ(Strategy::parse("hub").name(), "hub");
  EXPECT_EQ(Strategy::parse("fps").name(), "fps");
  EXPECT_EQ(Strategy::parse("hub+pdo").name(), "hub+pdo");
  EXPECT_EQ(Strategy::parse("mixed(0.5)").name(), "mixed(0.5)");
  EXPECT_EQ(Strategy::parse("mixed:0.3").ratio, 0.3);
  EXPECT_THROW(Strategy::parse("kmeans"), Error);
  EXPECT_THROW(Strategy::parse("mixed(1.5)"), Error);
}

TEST(RunExperimentTest, ZeroEpisodesIsEmpty) {
  const auto r = run_experiment(small_config(), 0, {Strategy::parse("hub")}, small_params());
  EXPECT_TRUE(r.rows.empty());
  ASSERT_EQ(r.summary.size(), 1u);
  EXPECT_EQ(r.summary[0].episodes, 0u);
}

TEST(RunExperimentTest, PairedListsAndRecomputableAggregates) {
  const std::vector<Strategy> s{Strategy::parse("hub"), Strategy::parse("fps"), Strategy::parse("mixed(0.5)"),
                                Strategy::parse("hub+pdo")};
  const auto r = run_experiment(small_config(7), 12, s, small_params());
  ASSERT_EQ(r.rows.size(), 48u);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    EXPECT_EQ(r.rows[i].episode_index, i / 4);
    EXPECT_EQ(r.rows[i].strategy, s[i % 4].name());
  }
  for (const auto& sum : r.summary) {
    const auto v = r.miou_of(sum.strategy);
    ASSERT_EQ(v.size(), 12u);
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= 12.0;
    double sq = 0.0;
    for (double x : v) sq += (x - mean) * (x - mean);
    EXPECT_NEAR(sum.mean, mean, 1e-12);
    EXPECT_NEAR(sum.stddev, std::sqrt(sq / 11.0), 1e-12);
  }
}

TEST(RunExperimentTest, DefaultsAreEchoed) {
  const MethodParams p;
  EXPECT_EQ(p.k, 5);
  EXPECT_EQ(p.eta, 100);
  EXPECT_EQ(p.gamma, 0.6);
  EXPECT_EQ(p.lambda, 0.1);
  EXPECT_EQ(p.tau, 0.1);
  EXPECT_EQ(p.epsilon, 1e-6);
  const auto r = run_experiment(small_config(), 1, {Strategy::parse("hub")}, p);
  EXPECT_EQ(r.params.k, 5);
  EXPECT_EQ(r.params.eta, 100);
  EXPECT_EQ(r.params.gamma, 0.6);
  EXPECT_EQ(r.params.lambda, 0.1);
}

TEST(RunExperimentTest, DeterministicMetricsText) {
  const std::vector<Strategy> s{Strategy::parse("hub"), Strategy::parse("mixed(0.3)")};
  std::ostringstream a, b;
  write_metrics(a, run_experiment(small_config(3), 5, s, small_params()));
  write_metrics(b, run_experiment(small_config(3), 5, s, small_params()));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().rfind("episode_index,strategy,miou", 0), 0u);
  EXPECT_NE(a.str().find("# aggregate"), std::string::npos);
}

TEST(RunExperimentTest, ZeroShiftIsSegmentedAlmostPerfectly) {
  EpisodeConfig cfg = small_config(9);
  cfg.points_per_cloud = 128;
  cfg.dim = 16;
  cfg.noise = 0.1;
  MethodParams p;
  p.eta = 16;
  const auto r = run_experiment(cfg, 10, {Strategy::parse("hub"), Strategy::parse("fps")}, p);
  for (const auto& s : r.summary) EXPECT_GE(s.mean, 0.99) << s.strategy;
}

}  // namespace
}  // namespace qhp
