#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ared/cli.hpp"

using namespace ared;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "ared");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "ared_cli_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

CsvTable table_of(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in);
}

}  // namespace

TEST(Format, DoublesRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(format_double(kNaN), "nan");
  EXPECT_EQ(format_double(-kInf), "-inf");
  for (double x : {1.0 / 3.0, -2.5e-300, 6.02e23, 0.0}) EXPECT_EQ(*parse_double(format_double(x)), x);
  EXPECT_FALSE(parse_double("1.5x").has_value());
  EXPECT_FALSE(parse_double("").has_value());
  EXPECT_EQ(*parse_double("+2"), 2.0);
  EXPECT_EQ(parse_integer<int>("42"), 42);
  EXPECT_FALSE(parse_integer<int>("4.2").has_value());
  EXPECT_EQ(trim("  a b \t"), "a b");
}

TEST(Config, ParsingAndErrors) {
  RunConfig c;
  std::istringstream text("# comment\nbeta = 4.5\n\ntype2=sroc  # trailing\nL=3\nz10=0.2\n");
  apply_config_text(c, text);
  EXPECT_EQ(c.params.beta, 4.5);
  EXPECT_EQ(c.type2, "sroc");
  EXPECT_EQ(c.L, 3);
  EXPECT_EQ(initial_demand(c, 0), 0.2);
  EXPECT_EQ(initial_demand(c, 1), c.params.s);
  try {
    apply_assignment(c, "nonsense=1");
    FAIL();
  } catch (const ParameterError& e) {
    EXPECT_EQ(e.key(), "nonsense");
  }
  EXPECT_THROW(apply_assignment(c, "beta"), ParameterError);
  EXPECT_THROW(apply_assignment(c, "beta=abc"), ParameterError);
  RunConfig bad;
  bad.params.beta = -1.0;
  EXPECT_THROW(validate(bad), ParameterError);
  RunConfig low;
  low.x0 = -9.0;
  EXPECT_THROW(validate(low), ParameterError);
}

TEST(Config, EchoRoundTrip) {
  RunConfig c;
  apply_assignment(c, "beta=3.7");
  apply_assignment(c, "ic_family=far-positive,negative-small");
  apply_assignment(c, "z20=0.05");
  std::ostringstream echo;
  write_config_echo(echo, c, Mode::Unconstrained);
  const auto t = table_of(echo.str());
  RunConfig back;
  for (const auto& [k, v] : t.config) set_key(back, k, v);
  EXPECT_EQ(config_entries(back), [&] {
    RunConfig expect = c;
    expect.mode = ModeSelection::Unconstrained;
    return config_entries(expect);
  }());
}

TEST(Config, BetaGrid) {
  RunConfig c;
  c.beta_min = 1.0;
  c.beta_max = 1.3;
  c.beta_step = 0.1;
  const auto g = beta_grid(c);
  ASSERT_EQ(g.size(), 4u);
  EXPECT_DOUBLE_EQ(g.back(), 1.3);
  c.beta_order = "descending";
  EXPECT_EQ(beta_grid(c).front(), g.back());
}

TEST(Cli, ExitCodes) {
  const auto ok = run({"equilibria"});
  EXPECT_EQ(ok.code, kExitOk);
  EXPECT_TRUE(ok.err.empty());

  const auto key = run({"simulate", "--set", "bogus=1"});
  EXPECT_EQ(key.code, kExitConfig);
  EXPECT_EQ(key.err.rfind("error=config key=bogus reason=\"", 0), 0u);
  EXPECT_EQ(std::count(key.err.begin(), key.err.end(), '\n'), 1);

  EXPECT_EQ(run({"simulate", "--set", "beta=-1"}).code, kExitConfig);
  EXPECT_EQ(run({"frobnicate"}).code, kExitConfig);
  EXPECT_EQ(run({"simulate", "--mode", "sideways"}).code, kExitConfig);
  EXPECT_EQ(run({"simulate", "--config", "/nonexistent/ared.cfg"}).code, kExitConfig);

  const auto io = run({"simulate", "--set", "T=1", "--set", "T0=0", "--out", "/nonexistent/dir/x.csv"});
  EXPECT_EQ(io.code, kExitRuntime);
  EXPECT_EQ(io.err.rfind("error=io path=/nonexistent/dir/x.csv", 0), 0u);

  const auto dom = run({"simulate", "--set", "x0=-8.9", "--set", "m1=-0.99", "--set", "T0=0",
                        "--set", "T=5", "--mode", "unconstrained"});
  EXPECT_EQ(dom.code, kExitRuntime);
  EXPECT_EQ(dom.err.rfind("error=domain period=1 reason=", 0), 0u);
}

TEST(Cli, SimulateHeaderOnlyAndBoth) {
  const auto empty = run({"simulate", "--set", "T=0", "--set", "T0=0"});
  ASSERT_EQ(empty.code, 0);
  const auto t = table_of(empty.out);
  EXPECT_TRUE(t.rows.empty());
  EXPECT_EQ(t.config.at("mode"), "constrained");

  const auto base = scratch("both.csv");
  const auto r = run({"simulate", "--set", "T=50", "--set", "T0=10", "--mode", "both", "--out",
                      base.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* m : {"constrained", "unconstrained"}) {
    const auto path = scratch(std::string("both_") + m + ".csv");
    ASSERT_TRUE(fs::exists(path));
    const auto tab = table_of(slurp(path));
    EXPECT_EQ(tab.config.at("mode"), m);
    ASSERT_EQ(tab.rows.size(), 50u);
    EXPECT_EQ(tab.rows.front()[0], "11");
    const auto replay = replay_clearing(tab);
    EXPECT_EQ(replay.violations, 0u);
  }
  EXPECT_EQ(run({"simulate", "--mode", "both"}).code, kExitConfig);
}

TEST(Cli, RestrictedRegionsAppear) {
  const auto chart = run({"simulate", "--set", "beta=3", "--set", "x0=0.5", "--set", "T=2000",
                          "--set", "T0=100"});
  ASSERT_EQ(chart.code, 0);
  EXPECT_NE(chart.out.find(",Z1,"), std::string::npos);

  const auto sroc = run({"simulate", "--set", "type2=sroc", "--set", "beta=4.5", "--set", "T=5000",
                         "--set", "T0=1000"});
  ASSERT_EQ(sroc.code, 0) << sroc.err;
  EXPECT_NE(sroc.out.find(",Z2,"), std::string::npos);
  const auto replay = replay_clearing(table_of(sroc.out));
  EXPECT_EQ(replay.rows, 5000u);
  EXPECT_EQ(replay.violations, 0u);
}

TEST(Cli, ReproducesFromEchoedConfig) {
  const auto first = scratch("repro.csv");
  ASSERT_EQ(run({"simulate", "--set", "beta=4", "--set", "x0=-0.3", "--set", "T=300", "--set",
                 "T0=50", "--out", first.string()})
                .code,
            0);
  const auto tab = table_of(slurp(first));
  const auto cfg = scratch("repro.cfg");
  {
    std::ofstream f(cfg);
    for (const auto& [k, v] : tab.config) f << k << '=' << v << '\n';
  }
  const auto second = scratch("repro2.csv");
  ASSERT_EQ(run({"simulate", "--config", cfg.string(), "--out", second.string()}).code, 0);
  EXPECT_EQ(slurp(first), slurp(second));
}

TEST(Cli, BifurcationCsvAndSvg) {
  const auto base = scratch("bif.csv");
  const auto r = run({"bifurcation", "--set", "beta_min=0.5", "--set", "beta_max=3", "--set",
                      "beta_step=0.5", "--set", "T=200", "--set", "T0=200", "--set", "samples=20",
                      "--out", base.string(), "--svg"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto tab = table_of(slurp(base));
  ASSERT_EQ(tab.header.size(), 6u);
  EXPECT_EQ(tab.header[0], "beta");
  EXPECT_EQ(tab.rows.size(), 6u * 20u);
  EXPECT_EQ(tab.rows.front()[5], "positive-small");
  const auto svg = slurp(scratch("bif.svg"));
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(run({"bifurcation", "--svg"}).code, kExitConfig);
}

TEST(Cli, BifurcationFailedPointsAsNan) {
  const auto r = run({"bifurcation", "--set", "g=3", "--set", "beta_min=0", "--set", "beta_max=0",
                      "--set", "T=100", "--set", "T0=100", "--set", "ic_family=far-positive",
                      "--mode", "unconstrained"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto tab = table_of(r.out);
  ASSERT_EQ(tab.rows.size(), 1u);
  EXPECT_EQ(tab.rows[0][1], "-1");
  EXPECT_EQ(tab.rows[0][2], "nan");
  EXPECT_EQ(tab.rows[0][4], "-1");
}

TEST(Cli, EquilibriaReport) {
  const auto r = run({"equilibria", "--out", scratch("eq.csv").string()});
  ASSERT_EQ(r.code, 0);
  for (const char* key : {"pbar = 8.99999", "beta_TR = 2.3978952727983", "beta_LP", "beta_BC_plus",
                          "beta_NS_plus", "beta_NS_minus", "uniqueness", "nonfund_plus"})
    EXPECT_NE(r.out.find(key), std::string::npos) << key;
  const auto tab = table_of(slurp(scratch("eq.csv")));
  EXPECT_EQ(tab.header, (std::vector<std::string>{"item", "value", "status", "note"}));

  const auto calm = run({"equilibria", "--set", "g=1.05"});
  EXPECT_NE(calm.out.find("globally-stable"), std::string::npos);
  const auto roc = run({"equilibria", "--set", "type2=roc"});
  EXPECT_NE(roc.out.find("beta_NS = 0.2006706954621"), std::string::npos);
  EXPECT_NE(roc.out.find("beta_NS_numeric"), std::string::npos);
}

TEST(Cli, Compare) {
  const auto r = run({"compare", "--set", "beta=4", "--set", "x0=-0.1", "--set", "T=5000",
                      "--set", "T0=1000"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto tab = table_of(r.out);
  EXPECT_EQ(tab.config.at("mode"), "both");
  EXPECT_EQ(tab.header.size(), 5u);
  bool seen = false;
  for (const auto& row : tab.rows)
    if (row[0] == "min_dev") {
      seen = true;
      EXPECT_GT(*parse_double(row[4]), 0.0);
    }
  EXPECT_TRUE(seen);
  EXPECT_EQ(run({"compare", "--mode", "constrained"}).code, kExitConfig);
  EXPECT_EQ(run({"compare", "--mode", "both", "--set", "T=10", "--set", "T0=0"}).code, 0);
}

TEST(Cli, OutputPaths) {
  EXPECT_EQ(output_path("dir/run.csv", Mode::Constrained, true), "dir/run_constrained.csv");
  EXPECT_EQ(output_path("dir/run.csv", Mode::Constrained, false), "dir/run.csv");
  EXPECT_EQ(with_extension("dir/run_unconstrained.csv", ".svg"), "dir/run_unconstrained.svg");
}
