#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "cli.hpp"

int main(int argc, char** argv) {
  using certbound::cli::RunConfig;

  CLI::App app{"certbound: positivity-certificate bounds for polynomial optimal control"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string orders_text = "3";
  std::string lambdas_text = "1";
  std::string x0_text;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", cfg.out_dir, "output directory root");
    sub->add_option("--tag", cfg.tag, "run directory name (default: UTC timestamp)");
    sub->add_option("--jobs", cfg.jobs, "concurrent independent solves");
    sub->add_option("--seed", cfg.seed, "seed for sampling checks");
    sub->add_option("--tol", cfg.tol, "SDP solver tolerance");
  };

  CLI::App* ocp = app.add_subcommand("ocp", "certified lower bound on the optimal value");
  ocp->add_option("--problem", cfg.problem_path, "problem JSON file")->required();
  ocp->add_option("--order", orders_text, "Putinar order d (or sweep a..b)");
  ocp->add_option("--orders", orders_text, "order sweep a..b");
  ocp->add_option("--t0", cfg.t0, "initial time");
  ocp->add_option("--x0", x0_text, "initial state, comma separated")->required();
  add_common(ocp);

  CLI::App* roa = app.add_subcommand("roa", "outer approximation of the region of attraction");
  roa->add_option("--problem", cfg.problem_path, "problem JSON file")->required();
  roa->add_option("--order", orders_text, "Putinar order d (or sweep a..b)");
  roa->add_option("--orders", orders_text, "order sweep a..b");
  roa->add_option("--t0", cfg.t0, "initial time");
  roa->add_option("--grid", cfg.grid, "sublevel CSV grid points per axis");
  add_common(roa);

  CLI::App* ioc = app.add_subcommand("ioc", "inverse optimal control from trajectories");
  ioc->add_option("--problem", cfg.problem_path, "problem JSON file (running cost ignored)")
      ->required();
  ioc->add_option("--trajectories", cfg.trajectory_paths, "trajectory JSON files")
      ->expected(-1);
  ioc->add_option("--order", orders_text, "Putinar order d");
  ioc->add_option("--lambda", lambdas_text, "regularization weight");
  ioc->add_option("--lambdas", lambdas_text, "sweep: comma list or log-spaced a..b:n");
  ioc->add_option("--dict-degree", cfg.dict_degree, "Lagrangian dictionary degree");
  ioc->add_flag("--with-controls", cfg.with_controls, "allow control-dependent Lagrangians");
  ioc->add_option("--fit-degree", cfg.fit_degree, "trajectory polynomial fit degree");
  ioc->add_option("--reference", cfg.reference_path, "reference Lagrangian JSON for distances");
  add_common(ioc);

  CLI::App* verify = app.add_subcommand("verify", "independently check a certificate file");
  verify->add_option("--certificate", cfg.certificate_path, "certificate JSON file")->required();
  verify->add_option("--samples", cfg.samples, "nonnegativity sample budget");
  verify->add_option("--seed", cfg.seed, "sampling seed");

  CLI::App* bench = app.add_subcommand("bench", "benchmark harnesses");
  CLI::App* bench_brockett =
      bench->add_subcommand("brockett", "value bounds vs. the minimum-time oracle grid");
  bench_brockett->add_option("--orders", orders_text, "order sweep a..b");
  bench_brockett->add_option("--state-radius", cfg.state_radius, "state box radius");
  add_common(bench_brockett);
  bench->require_subcommand(1);

  CLI11_PARSE(app, argc, argv);

  try {
    cfg.orders = certbound::cli::parse_orders(orders_text);
    cfg.lambdas = certbound::cli::parse_lambdas(lambdas_text);
    if (!x0_text.empty()) cfg.x0 = certbound::cli::parse_point(x0_text);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  try {
    if (app.got_subcommand(ocp)) {
      cfg.subcommand = "ocp";
      return certbound::cli::cmd_ocp(cfg);
    }
    if (app.got_subcommand(roa)) {
      cfg.subcommand = "roa";
      return certbound::cli::cmd_roa(cfg);
    }
    if (app.got_subcommand(ioc)) {
      cfg.subcommand = "ioc";
      return certbound::cli::cmd_ioc(cfg);
    }
    if (app.got_subcommand(verify)) {
      cfg.subcommand = "verify";
      return certbound::cli::cmd_verify(cfg);
    }
    if (app.got_subcommand(bench)) {
      cfg.subcommand = "bench brockett";
      return certbound::cli::cmd_bench(cfg);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
