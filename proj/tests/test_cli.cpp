#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "bermudan/commands.hpp"
#include "hedge_fixtures.hpp"

using namespace bermudan;
namespace fs = std::filesystem;

namespace {

const std::string kSource = BERMUDAN_SOURCE_DIR;
const std::string kCli = BERMUDAN_CLI_PATH;

std::string scenario(const std::string& name) { return kSource + "/scenarios/" + name + ".json"; }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bermudan_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliRun {
  int code = -1;
  std::string out, err;
  Json json() const { return Json::parse(out); }
};

CliRun run(const std::string& args, const std::string& tag) {
  const fs::path dir = scratch("run_" + tag);
  const std::string cmd = "'" + kCli + "' " + args + " > '" + (dir / "out").string() + "' 2> '" +
                          (dir / "err").string() + "'";
  const int st = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  r.out = slurp(dir / "out");
  r.err = slurp(dir / "err");
  return r;
}

// scenario file with some keys replaced
std::string variant(const std::string& base, const std::string& tag, const std::function<void(Json&)>& edit) {
  Json j = Json::parse(slurp(scenario(base)));
  edit(j);
  const fs::path p = scratch("scn_" + tag) / "scenario.json";
  std::ofstream(p) << j.dump(2);
  return p.string();
}

std::string write_raw(const std::string& tag, const std::string& text) {
  const fs::path p = scratch("raw_" + tag) / "scenario.json";
  std::ofstream(p) << text;
  return p.string();
}

}  // namespace

TEST(Cli, SolveGaussianC1MeetsDuality) {
  const CliRun r = run("--scenario '" + scenario("gaussian_c1") + "' --command solve", "solve_c1");
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = r.json();
  EXPECT_EQ(j["solution"]["label"], "C1");
  EXPECT_LE(std::abs(j["gap"].get<double>()), 2e-4);
  EXPECT_NEAR(j["primal"]["value"].get<double>() - j["dual_value"].get<double>(), j["gap"].get<double>(), 1e-15);
  EXPECT_LE(j["coupling"]["marginal_sup_error"].get<double>(), 1e-4);
  const double lo = j["monte_carlo"]["ci99_lo"], hi = j["monte_carlo"]["ci99_hi"];
  EXPECT_LE(lo, j["primal"]["value"].get<double>());
  EXPECT_GE(hi, j["primal"]["value"].get<double>());
}

TEST(Cli, CheckReversedPairExitsThreeWithWitness) {
  const CliRun r = run("--scenario '" + scenario("gaussian_reversed") + "' --command check", "check_rev");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("convex order"), std::string::npos);
  const Json j = r.json();
  EXPECT_FALSE(j["convex_order"]["ordered"].get<bool>());
  // E|X - k| for centred normals peaks in difference at k = 0: (sqrt 2 - 1) sqrt(2 / pi)
  const double expect = (std::sqrt(2.0) - 1.0) * std::sqrt(2.0 / M_PI);
  EXPECT_NEAR(j["convex_order"]["worst_k"].get<double>(), 0.0, 1e-9);
  EXPECT_NEAR(j["convex_order"]["worst_gap"].get<double>(), expect, 1e-8);
}

TEST(Cli, CheckOrderedPairReportsDispersion) {
  const CliRun r = run("--scenario '" + scenario("triangle_uniform_c2") + "' --command check", "check_ok");
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = r.json();
  EXPECT_TRUE(j["convex_order"]["ordered"].get<bool>());
  // 1 - |x| meets the uniform density 1/4 at |x| = 3/4
  EXPECT_NEAR(j["dispersion"]["e"].get<double>(), 0.75, 1e-9);
  EXPECT_NEAR(j["dispersion"]["alpha"].get<double>(), 1.0, 1e-12);
  EXPECT_NEAR(j["dispersion"]["beta"].get<double>(), 2.0, 1e-12);
}

TEST(Cli, ReduceNonConvexHedge) {
  const fs::path out = scratch("reduce_out");
  const CliRun r = run("--scenario '" + scenario("triangle_uniform_c1") + "' --command reduce --hedge '" + kSource +
                        "/scenarios/nonconvex_hedge.csv' --out '" + out.string() + "'",
                    "reduce");
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = r.json();
  const auto& trail = j["reduce"]["trail"];
  ASSERT_EQ(trail.size(), 4u);
  for (std::size_t k = 0; k < trail.size(); ++k) {
    EXPECT_TRUE(trail[k]["verified"].get<bool>());
    if (k > 0) {
      EXPECT_LE(trail[k]["cost"]["total"].get<double>(), trail[k - 1]["cost"]["total"].get<double>() + 1e-8);
    }
  }
  EXPECT_GT(trail[0]["cost"]["total"].get<double>(), trail[3]["cost"]["total"].get<double>() + 0.1);
  EXPECT_LE(j["reduce"]["final_excess_envelope_sup"].get<double>(), 1e-9);

  // the written hedge is psi-generated: convex psi, phi = (a - psi)^+, theta1 = -psi', theta2 = 0
  const Superhedge h = load_hedge((out / "collapsed_hedge.csv").string());
  const auto& g = h.psi.grid();
  for (std::size_t i = 1; i + 1 < g.size(); ++i) {
    const double s0 = (h.psi.v(i) - h.psi.v(i - 1)) / (g[i] - g[i - 1]);
    const double s1 = (h.psi.v(i + 1) - h.psi.v(i)) / (g[i + 1] - g[i]);
    EXPECT_GE(s1, s0 - 1e-9) << g[i];
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g[i];
    EXPECT_NEAR(h.phi.v(i), std::max(x * x + 0.9 - h.psi.v(i), 0.0), 1e-12) << x;
    EXPECT_GE(h.psi.v(i), x * x - 1e-12);
    EXPECT_EQ(h.theta2.v(i), 0.0);
    if (i + 1 < g.size()) {
      EXPECT_NEAR(h.theta1.v(i), -(h.psi.v(i + 1) - h.psi.v(i)) / (g[i + 1] - g[i]), 1e-9);
    }
  }
}

TEST(Cli, ReduceRejectsNonHedge) {
  // psi below b somewhere: not a superhedge, exit 3
  const fs::path dir = scratch("bad_hedge");
  std::ofstream(dir / "h.csv") << "grid,phi,psi,theta1,theta2\n-2,0,0,0,0\n2,0,0,0,0\n";
  const CliRun r = run("--scenario '" + scenario("triangle_uniform_c1") + "' --command reduce --hedge '" +
                        (dir / "h.csv").string() + "'",
                    "reduce_bad");
  EXPECT_EQ(r.code, 3) << r.err;
  std::ofstream(dir / "m.csv") << "grid,phi,psi\n-2,0,4\n2,0,4\n";
  const CliRun m = run("--scenario '" + scenario("triangle_uniform_c1") + "' --command reduce --hedge '" +
                        (dir / "m.csv").string() + "'",
                    "reduce_missing");
  EXPECT_EQ(m.code, 2) << m.err;
}

TEST(Cli, SameScenarioAndSeedGiveIdenticalReports) {
  const std::string args = "--scenario '" + scenario("triangle_uniform_c3") + "' --command solve --seed 11";
  const CliRun a = run(args, "det_a"), b = run(args, "det_b");
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const CliRun c = run("--scenario '" + scenario("triangle_uniform_c3") + "' --command solve --seed 12", "det_c");
  ASSERT_EQ(c.code, 0);
  EXPECT_NE(a.json()["monte_carlo"]["mean"], c.json()["monte_carlo"]["mean"]);
  EXPECT_EQ(a.json()["primal"], c.json()["primal"]);

  const fs::path o1 = scratch("det_o1"), o2 = scratch("det_o2");
  for (const auto& o : {o1, o2})
    ASSERT_EQ(run("--scenario '" + scenario("gaussian_c2") + "' --command report --out '" + o.string() + "'",
                  "det_r")
                  .code,
              0);
  for (const auto& e : fs::directory_iterator(o1)) EXPECT_EQ(slurp(e.path()), slurp(o2 / e.path().filename()));
}

TEST(Cli, ReportedCsvFilesRoundTrip) {
  const fs::path out = scratch("report_out");
  const CliRun r = run("--scenario '" + scenario("gaussian_c3") + "' --command report --out '" + out.string() + "'",
                    "report");
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(slurp(out / "report.json"));
  EXPECT_EQ(j.dump(2) + "\n", r.out);
  EXPECT_TRUE(j["hedge"]["verified"].get<bool>());
  EXPECT_NEAR(j["hedge"]["cost"]["total"].get<double>(), j["dual_value"].get<double>(), 2e-4);

  const std::map<std::string, std::vector<std::string>> expected{
      {"psi_star.csv", {"x", "psi"}},
      {"phi_star.csv", {"x", "phi"}},
      {"curtain.csv", {"x", "f", "g"}},
      {"curtain_left.csv", {"x", "f", "g"}},
      {"regions.csv", {"region", "source", "stop_time", "lo", "hi", "mu_mass"}}};
  for (const auto& [name, cols] : expected) {
    const std::string text = slurp(out / name);
    ASSERT_FALSE(text.empty()) << name;
    std::istringstream in(text);
    std::ostringstream back;
    if (name == "regions.csv") {
      const TextTable t = read_text_csv(in);
      EXPECT_EQ(t.columns, cols);
      EXPECT_FALSE(t.rows.empty());
      write_csv(back, t);
    } else {
      const CsvTable t = read_csv(in);
      EXPECT_EQ(t.columns, cols);
      EXPECT_GT(t.rows.size(), 10u) << name;
      write_csv(back, t);
    }
    EXPECT_EQ(back.str(), text) << name;
  }
}

TEST(Cli, HedgeFileRoundTripsBitExactly) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 10; ++k) {
    const auto c = fixtures::random_superhedge(rng, -2.0, 2.0);
    std::ostringstream a;
    write_hedge(a, c.hedge);
    std::istringstream in(a.str());
    const Superhedge h = read_hedge(in);
    for (std::size_t i = 0; i < h.psi.size(); ++i) {
      const double x = h.psi.x(i);
      EXPECT_EQ(h.psi.v(i), c.hedge.psi(x));
      EXPECT_EQ(h.phi.v(i), c.hedge.phi(x));
      EXPECT_EQ(h.theta1.v(i), c.hedge.theta1(x));
      EXPECT_EQ(h.theta2.v(i), c.hedge.theta2(x));
    }
    std::ostringstream b;
    write_hedge(b, h);
    EXPECT_EQ(a.str(), b.str());
  }
}

TEST(Cli, OracleSweepIsMonotone) {
  const std::string path = variant("triangle_uniform_c1", "oracle", [](Json& j) {
    j["oracle"]["n_mu"] = 80;
    j["oracle"]["n_nu"] = 160;
  });
  const fs::path out = scratch("oracle_out");
  const CliRun r = run("--scenario '" + path + "' --command oracle --out '" + out.string() + "'", "oracle");
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = r.json();
  const auto& lv = j["oracle"]["levels"];
  ASSERT_EQ(lv.size(), 3u);
  EXPECT_EQ(lv[0]["n_mu"], 20);
  EXPECT_EQ(lv[2]["n_nu"], 160);
  EXPECT_TRUE(j["oracle"]["monotone"].get<bool>());
  for (const auto& l : lv) EXPECT_LE(l["value"].get<double>(), j["oracle"]["dual_value"].get<double>() + 1e-9);
  std::ifstream in(out / "optimizer.csv");
  const CsvTable t = read_csv(in);
  EXPECT_EQ(t.columns, (std::vector<std::string>{"i", "j", "x", "y", "pi_stop", "pi_go"}));
  double mass = 0.0;
  for (const auto& row : t.rows) mass += row[4] + row[5];
  EXPECT_NEAR(mass, 1.0, 1e-9);
}

TEST(Cli, TimeZeroUniform) {
  const CliRun r = run("--scenario '" + scenario("time0_uniform") + "' --command solve", "time0");
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = r.json()["time0"];
  EXPECT_NEAR(j["f"].get<double>(), -0.5, 1e-6);
  EXPECT_NEAR(j["g"].get<double>(), 0.5, 1e-6);
  EXPECT_NEAR(j["value"].get<double>(), 5.0 / 12.0, 1e-6);
  const CliRun o = run("--scenario '" + scenario("time0_uniform") + "' --command oracle", "time0_oracle");
  EXPECT_EQ(o.code, 2);
}

TEST(Cli, InvalidScenariosExitTwo) {
  std::vector<std::pair<std::string, std::string>> bad{
      {"unknown_key", variant("gaussian_c1", "k", [](Json& j) { j["colour"] = "red"; })},
      {"schema", variant("gaussian_c1", "s", [](Json& j) { j["schema"] = 2; })},
      {"family", variant("gaussian_c1", "f", [](Json& j) { j["payoffs"]["a"] = {{"family", "cubic"}}; })},
      {"expression", variant("gaussian_c1", "e", [](Json& j) { j["payoffs"]["a"] = "x*x + 3"; })},
      {"tol", variant("gaussian_c1", "t", [](Json& j) { j["solver"]["tol"] = -1e-9; })},
      {"trunc", variant("gaussian_c1", "q", [](Json& j) { j["solver"]["trunc_quantile"] = 0.0; })},
      {"measure", variant("gaussian_c1", "m", [](Json& j) { j["mu"] = {{"family", "cauchy"}}; })},
      {"sigma", variant("gaussian_c1", "g", [](Json& j) { j["mu"]["sigma"] = -1.0; })},
      {"mode", variant("gaussian_c1", "o", [](Json& j) { j["mode"] = "american"; })},
      {"missing_mu", variant("gaussian_c1", "u", [](Json& j) { j.erase("mu"); })},
      {"syntax", write_raw("syntax", "{\"schema\": 1,")},
      {"no_file", "/nonexistent/scenario.json"},
  };
  for (const auto& [tag, path] : bad) {
    const CliRun r = run("--scenario '" + path + "' --command solve", "bad_" + tag);
    EXPECT_EQ(r.code, 2) << tag << ": " << r.err;
  }
  EXPECT_EQ(run("--scenario '" + scenario("gaussian_c1") + "' --command price", "bad_cmd").code, 2);
  EXPECT_EQ(run("--command solve", "bad_flags").code, 2);
  EXPECT_EQ(run("--scenario '" + scenario("gaussian_c1") + "' --command solve --tol -1", "bad_tol").code, 2);
}

TEST(Cli, PayoffPreconditionsExitThree) {
  const std::string concave = variant("gaussian_c1", "concave", [](Json& j) {
    j["payoffs"]["a"] = {{"family", "pwl"}, {"breakpoints", {-1.0, 0.0, 1.0}}, {"values", {0.0, 1.0, 0.0}}};
  });
  EXPECT_EQ(run("--scenario '" + concave + "' --command solve", "concave").code, 3);
  const std::string negative = variant("gaussian_c1", "neg", [](Json& j) { j["payoffs"]["b"]["c2"] = -1.0; });
  EXPECT_EQ(run("--scenario '" + negative + "' --command solve", "neg").code, 3);
  const std::string skew = variant("gaussian_c1", "skew", [](Json& j) {
    j["payoffs"]["a"] = {{"family", "max_of_lines"}, {"lines", {{1.0, 0.0}, {-2.0, 0.0}}}};
  });
  EXPECT_EQ(run("--scenario '" + skew + "' --command solve", "skew").code, 3);
  // the same asymmetric payoff is fine at time 0
  const std::string t0 = variant("time0_uniform", "skew0", [](Json& j) {
    j["payoffs"]["a"] = {{"family", "max_of_lines"}, {"lines", {{0.1, 0.2}, {-0.2, 0.2}}}};
  });
  EXPECT_EQ(run("--scenario '" + t0 + "' --command solve", "skew0").code, 0);
}

TEST(Cli, GridOverrideIsRecorded) {
  const CliRun r = run("--scenario '" + scenario("triangle_uniform_c1") + "' --command solve --grid-n 64", "grid");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.json()["scenario"]["solver"]["grid_n"], 64);
  EXPECT_LE(std::abs(r.json()["gap"].get<double>()), 2e-4);
}
