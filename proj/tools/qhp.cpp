// qhp: episodic hub-prototype experiments from the command line.
//
//   qhp run       --config FILE [overrides]
//   qhp sweep     --param {k,eta,gamma,lambda,ratio} --values 0,0.1,... [overrides]
//   qhp gradcheck [--seed N] [--cases N]
//   qhp gen       --index I --out FILE [overrides]

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qhp/cli.hpp"

namespace {

struct Overrides {
  std::optional<std::string> config;
  std::vector<std::string> strategies;
  std::vector<std::string> sets;
  std::map<std::string, std::string> values;
};

void add_config_flags(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--config", o.config, "Key-value config file");
  cmd.add_option("--strategy", o.strategies, "Strategy: fps, hub, hub+pdo, mixed(<ratio>); repeatable");
  cmd.add_option("--set", o.sets, "Generic override key=value; repeatable");
  for (const auto& key : qhp::config_keys()) {
    if (key == "strategies") continue;
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    cmd.add_option_function<std::string>(
        flag, [&o, key](const std::string& v) { o.values[key] = v; }, "Override '" + key + "'");
  }
}

// File first, then named flags, then --set, then --strategy.
qhp::RunConfig resolve(const Overrides& o) {
  qhp::RunConfig c;
  if (o.config) qhp::load_config_file(c, *o.config);
  for (const auto& [key, value] : o.values) qhp::apply_setting(c, key, value);
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw qhp::ConfigError(kv, "--set expects key=value");
    qhp::apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!o.strategies.empty()) {
    std::string joined;
    for (const auto& s : o.strategies) joined += (joined.empty() ? "" : ",") + s;
    qhp::apply_setting(c, "strategies", joined);
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query-aware hub prototype experiments"};
  app.require_subcommand(1);

  Overrides run_o, sweep_o, gen_o;
  auto* run = app.add_subcommand("run", "Run paired episodes and write a metrics report");
  add_config_flags(*run, run_o);

  auto* sweep = app.add_subcommand("sweep", "Run one report per parameter value");
  add_config_flags(*sweep, sweep_o);
  std::string sweep_param;
  std::vector<std::string> sweep_values;
  sweep->add_option("--param", sweep_param, "k, eta, gamma, lambda or ratio")->required();
  sweep->add_option("--values", sweep_values, "Values to sweep")->delimiter(',');

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the contrastive loss gradients");
  std::uint64_t grad_seed = 0;
  std::size_t grad_cases = 50;
  double grad_corrupt = 0.0;
  grad->add_option("--seed", grad_seed, "Master seed");
  grad->add_option("--cases", grad_cases, "Number of random instances");
  grad->add_option("--corrupt", grad_corrupt, "Offset added to one analytic gradient entry")->group("");

  auto* gen = app.add_subcommand("gen", "Write one synthetic episode file");
  add_config_flags(*gen, gen_o);
  std::uint64_t gen_index = 0;
  std::string gen_out;
  gen->add_option("--index", gen_index, "Episode index within the seeded stream");
  gen->add_option("--episode-out", gen_out, "Episode file path (defaults to --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return qhp::kExitConfig;
  }

  try {
    if (*run) return qhp::cmd_run(resolve(run_o), std::cout, std::cerr);
    if (*sweep) return qhp::cmd_sweep(resolve(sweep_o), sweep_param, sweep_values, std::cout, std::cerr);
    if (*grad) return qhp::cmd_gradcheck(grad_seed, grad_cases, std::cout, std::cerr, grad_corrupt);
    if (*gen) {
      const qhp::RunConfig c = resolve(gen_o);
      return qhp::cmd_gen(c, gen_index, gen_out.empty() ? c.out : gen_out, std::cerr);
    }
  } catch (const qhp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return qhp::kExitConfig;
  } catch (const qhp::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return qhp::kExitIo;
  } catch (const qhp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return qhp::kExitCheckFailed;
  }
  return qhp::kExitOk;
}
