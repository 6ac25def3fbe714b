#include <iostream>

#include "CLI11.hpp"
#include "bermudan/commands.hpp"

int main(int argc, char** argv) {
  using namespace bermudan;
  CLI::App app{"Bermudan option bounds under marginal constraints"};
  RunOptions o;
  int grid_n = 0;
  double tol = 0.0;
  std::uint64_t seed = 0;
  app.add_option("--scenario", o.scenario_path, "scenario JSON file")->required();
  app.add_option("--command", o.command, "check | solve | oracle | reduce | report")->required();
  auto* g = app.add_option("--grid-n", grid_n, "curtain-map grid and quadrature resolution");
  auto* t = app.add_option("--tol", tol, "convex-order tolerance");
  auto* s = app.add_option("--seed", seed, "Monte Carlo seed");
  app.add_option("--out", o.out_dir, "directory for the JSON report and CSV files");
  app.add_option("--hedge", o.hedge_path, "superhedge CSV read by reduce");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (*g) o.grid_n = grid_n;
  if (*t) o.tol = tol;
  if (*s) o.seed = seed;

  try {
    const CommandResult r = run_command(o);
    std::cout << r.report.dump(2) << '\n';
    if (r.exit_code != 0) std::cerr << r.message << '\n';
    return r.exit_code;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal-error: " << e.what() << '\n';
    return 4;
  }
}
