#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "commands.hpp"
#include "config.hpp"
#include "distort/error.hpp"
#include "selftest.hpp"

namespace fs = std::filesystem;
using namespace distort;
using namespace distort::cli;

namespace {

struct RunFlags {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out = "distort-run";
  bool strict_mon2 = false;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("distort");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("DISTORT_LOG")) {
    const auto lvl = spdlog::level::from_str(env);
    // from_str maps unknown names to off
    if (lvl == spdlog::level::off && std::string(env) != "off") {
      spdlog::warn("DISTORT_LOG={} is not a log level; keeping warn", env);
    } else {
      spdlog::set_level(lvl);
    }
  }
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run_command(const std::string& command, const RunFlags& flags) {
  if (flags.config_path.empty() == flags.preset.empty()) {
    throw ConfigError("give exactly one of --config or --preset");
  }
  std::string text, origin;
  if (!flags.preset.empty()) {
    const auto p = preset_text(command, flags.preset);
    if (!p) {
      std::string names;
      for (const auto& n : preset_names(command)) names += " " + n;
      throw ConfigError("unknown " + command + " preset '" + flags.preset + "'; available:" + names);
    }
    text = *p;
    origin = "preset:" + flags.preset;
  } else {
    text = read_file(flags.config_path);
    origin = flags.config_path;
  }
  json config = parse_config(text, origin);
  if (config.at("command") != command) {
    throw ConfigError(origin + ": config is for command '" + config.at("command").get<std::string>() + "', not '" +
                      command + "'");
  }
  if (!config.contains(command)) throw ConfigError(origin + ": missing \"" + command + "\" section");
  if (flags.seed) config["seed"] = *flags.seed;
  if (flags.threads) config["threads"] = *flags.threads;
  if (flags.strict_mon2) {
    if (command != "tree") throw ConfigError("--strict-mon2 applies to the tree command only");
    config["tree"]["strict_mon2"] = true;
  }
  validate_config(config, "", origin + " (after command-line overrides)");

  RunContext ctx;
  ctx.seed = config.value("seed", std::uint64_t{1});
  ctx.threads = config.value("threads", 1u);
  ctx.out = flags.out;
  fs::create_directories(ctx.out);
  spdlog::info("{} run from {} into {}", command, origin, ctx.out.string());

  const auto t0 = std::chrono::steady_clock::now();
  RunReport rr = command == "tree"       ? cmd_tree(config, ctx)
                 : command == "dynamics" ? cmd_dynamics(config, ctx)
                                         : cmd_density(config, ctx);
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  {
    std::ofstream f(ctx.out / "report.json");
    f << dump_report(rr.report);
  }
  {
    json timing = rr.timing;
    timing["total"] = total;
    std::ofstream f(ctx.out / "timing.json");
    f << timing.dump(2) << '\n';
  }
  std::cout << (ctx.out / "report.json").string() << '\n';
  if (rr.exit_code != 0) spdlog::error("{} run finished with failed verifications (exit {})", command, rr.exit_code);
  return rr.exit_code;
}

int run_selftest(const selftest::Options& opt, const std::string& out) {
  std::size_t n = 0;
  for (const auto& c : selftest::criteria()) n += selftest::selected(c, opt.filter) ? 1 : 0;
  if (n == 0) throw ConfigError("--filter '" + opt.filter + "' selects no criteria");
  const auto results = selftest::run(opt, [](const selftest::Result& r) {
    std::cout << selftest::format_line(r) << std::endl;
  });
  std::size_t passed = 0;
  json rows = json::array();
  for (const auto& r : results) {
    passed += r.pass ? 1 : 0;
    rows.push_back({{"id", r.id}, {"suite", r.suite}, {"title", r.title}, {"pass", r.pass}, {"detail", r.detail}});
  }
  std::cout << passed << "/" << results.size() << " criteria passed\n";
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream f(fs::path(out) / "selftest.json");
    f << dump_report(json{{"results", rows}, {"tolerance_scale", opt.tolerance_scale}, {"seed", opt.seed}});
  }
  return passed == results.size() ? 0 : static_cast<int>(ExitCode::Numeric);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Distorted expectations, dynamic distortion and distorted dynamics"};
  app.require_subcommand(1);

  RunFlags flags;
  auto add_run = [&](const std::string& name, const std::string& help) {
    auto* sub = app.add_subcommand(name, help);
    auto* cfg = sub->add_option("--config", flags.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--preset", flags.preset, "embedded configuration")->excludes(cfg);
    sub->add_option("--seed", flags.seed, "random seed (overrides the config)");
    sub->add_option("--threads", flags.threads, "worker threads")->check(CLI::Range(1u, 256u));
    sub->add_option("--out", flags.out, "output directory")->capture_default_str();
    if (name == "tree") sub->add_flag("--strict-mon2", flags.strict_mon2, "fail on any mon2 violation");
    return sub;
  };
  auto* tree = add_run("tree", "binomial-tree distortion, tower and Q-flow checks");
  auto* dyn = add_run("dynamics", "distorted drift, PDE, Phi curves, Monte Carlo and convergence");
  auto* dens = add_run("density", "density and survival estimators on a grid");

  selftest::Options st;
  std::string st_out;
  auto* self = app.add_subcommand("selftest", "run the acceptance criteria");
  self->add_option("--filter", st.filter, "suite names, criterion numbers or ACn labels, comma separated");
  self->add_option("--tolerance-scale", st.tolerance_scale, "multiply every accuracy tolerance")
      ->check(CLI::PositiveNumber);
  self->add_option("--seed", st.seed, "random seed")->capture_default_str();
  self->add_option("--threads", st.threads, "worker threads")->check(CLI::Range(1u, 256u));
  self->add_option("--out", st_out, "write selftest.json here");

  auto* schema = app.add_subcommand("schema", "print the run configuration JSON schema");
  std::string list_for;
  auto* presets = app.add_subcommand("presets", "list embedded presets");
  presets->add_option("command", list_for, "tree, dynamics or density");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::Config);
  }

  try {
    if (*tree) return run_command("tree", flags);
    if (*dyn) return run_command("dynamics", flags);
    if (*dens) return run_command("density", flags);
    if (*self) return run_selftest(st, st_out);
    if (*schema) {
      std::cout << run_config_schema_text();
      return 0;
    }
    if (*presets) {
      for (const char* c : {"tree", "dynamics", "density"}) {
        if (!list_for.empty() && list_for != c) continue;
        for (const auto& n : preset_names(c)) std::cout << c << ' ' << n << '\n';
      }
      return 0;
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(e.exit_code());
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("configuration: {}", e.what());
    return static_cast<int>(ExitCode::Config);
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(ExitCode::Config);
  }
  return 0;
}
