#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "config.hpp"
#include "distort/error.hpp"

using namespace distort;
using namespace distort::cli;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, PresetsValidate) {
  for (const char* cmd : {"tree", "dynamics", "density"}) {
    const auto names = preset_names(cmd);
    ASSERT_FALSE(names.empty()) << cmd;
    for (const auto& n : names) {
      const auto text = preset_text(cmd, n);
      ASSERT_TRUE(text) << n;
      EXPECT_NO_THROW(parse_config(*text, n)) << n;
    }
  }
  EXPECT_FALSE(preset_text("tree", "no_such_preset"));
}

TEST(Config, ParseErrorHasPosition) {
  const auto msg = error_of("{\n  \"schema_version\": 1,\n  \"command\": \"tree\",,\n}");
  EXPECT_NE(msg.find("cfg.json:3:"), std::string::npos) << msg;
}

TEST(Config, SchemaErrorNamesLineAndPointer) {
  const std::string text = R"({
  "schema_version": 1,
  "command": "tree",
  "tree": {
    "mode": "consistent",
    "model": {"kind": "symmetric", "periods": 2, "x0": 0, "dx": 1, "dt": 1, "up": 1.5},
    "distortion": {"family": "power", "gamma": 2},
    "payoff": [0, 1, 2]
  }
})";
  const auto msg = error_of(text);
  EXPECT_NE(msg.find("cfg.json:6:"), std::string::npos) << msg;
  EXPECT_NE(msg.find("/tree/model/up"), std::string::npos) << msg;
}

TEST(Config, UnknownKeysAndMisspelledFamilyParameters) {
  const std::string base = R"({"schema_version": 1, "command": "tree", "tree": {"mode": "consistent", "model": {"kind": "symmetric", "periods": 2, "x0": 0, "dx": 1, "dt": 1}, "payoff": [0, 1, 2], "distortion": )";
  EXPECT_NE(error_of(base + R"({"family": "power", "gama": 2}}})").find("unknown key \"gama\""), std::string::npos);
  EXPECT_FALSE(error_of(base + R"({"family": "power", "gamma": 2}, "extra": 1}})").empty());
  EXPECT_TRUE(error_of(base + R"({"family": "power", "gamma": 2}}})").empty());
  EXPECT_FALSE(error_of(R"({"schema_version": 2, "command": "tree"})").empty());
}

TEST(Config, ReportIsStable) {
  const json j = {{"b", 0.1}, {"a", {1.0, 2.5}}, {"c", std::nan("")}};
  const auto s = dump_report(j);
  EXPECT_LT(s.find("\"a\""), s.find("\"b\""));
  EXPECT_NE(s.find("0.10000000000000001"), std::string::npos);
  EXPECT_NE(s.find("null"), std::string::npos);
  EXPECT_EQ(s, dump_report(json::parse(dump_report(j))));
}

TEST(Commands, TwoPeriodTreeReport) {
  const auto config = parse_config(*preset_text("tree", "two_period"), "two_period");
  RunContext ctx;
  ctx.out = std::filesystem::temp_directory_path() / "distort_cmd_tree";
  std::filesystem::create_directories(ctx.out);
  const auto rr = cmd_tree(config, ctx);
  EXPECT_EQ(rr.exit_code, 0);
  EXPECT_NEAR(rr.report.at("results").at("naive").get<double>(), 0.5, 1e-12);
  EXPECT_NEAR(rr.report.at("results").at("static").get<double>(), 0.625, 1e-12);
  EXPECT_NEAR(rr.report.at("results").at("consistent").get<double>(), 0.625, 1e-12);
  // the echoed configuration re-validates
  EXPECT_NO_THROW(validate_config(rr.report.at("config"), "", "echo"));
  const auto again = cmd_tree(config, ctx);
  EXPECT_EQ(dump_report(rr.report), dump_report(again.report));
  std::filesystem::remove_all(ctx.out);
}

TEST(Commands, CrossingVerdict) {
  const auto config = parse_config(*preset_text("tree", "crossing"), "crossing");
  RunContext ctx;
  ctx.out = std::filesystem::temp_directory_path() / "distort_cmd_crossing";
  std::filesystem::create_directories(ctx.out);
  const auto rr = cmd_tree(config, ctx);
  const auto s = dump_report(rr.report);
  EXPECT_NE(s.find("-0.125"), std::string::npos) << s;
  EXPECT_NE(s.find("no consistent Phi"), std::string::npos) << s;
  std::filesystem::remove_all(ctx.out);
}

TEST(Commands, WangDriftTable) {
  const auto config = parse_config(*preset_text("dynamics", "wang"), "wang");
  RunContext ctx;
  ctx.out = std::filesystem::temp_directory_path() / "distort_cmd_wang";
  std::filesystem::create_directories(ctx.out);
  const auto rr = cmd_dynamics(config, ctx);
  EXPECT_EQ(rr.exit_code, 0);
  EXPECT_TRUE(std::filesystem::exists(ctx.out / "mu.csv"));
  EXPECT_FALSE(slurp(ctx.out / "mu.csv").empty());
  EXPECT_LE(rr.report.at("mu").at("closed_form_error").get<double>(), 1e-6);
  std::filesystem::remove_all(ctx.out);
}
