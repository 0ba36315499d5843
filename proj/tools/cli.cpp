#include "cli.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <thread>
#include <filesystem>
#include <limits>
#include <sstream>

#include "certbound/apps.hpp"
#include "certbound/brockett.hpp"
#include "certbound/json_io.hpp"

namespace certbound::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitSolver = 2;
constexpr int kExitVerification = 3;

std::string timestamp_tag() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", std::gmtime(&t));
  return buf;
}

fs::path run_dir(const RunConfig& cfg, const std::string& sub) {
  return fs::path(cfg.out_dir) / sub / (cfg.tag.empty() ? timestamp_tag() : cfg.tag);
}

void write_meta(const fs::path& dir) {
  json meta{{"schema", kSchemaTag}, {"written_at_utc", timestamp_tag()}};
  atomic_write_file((dir / "run_meta.json").string(), meta.dump(2) + "\n");
}

json scaling_json(const AffineScaling& sc) {
  if (!sc.active) return json{{"active", false}};
  return json{{"active", true},
              {"state_center", sc.state_center},
              {"state_scale", sc.state_scale},
              {"control_center", sc.control_center},
              {"control_scale", sc.control_scale}};
}

AppSolveOptions app_options(const RunConfig& cfg) {
  AppSolveOptions o;
  o.sdp.tol = cfg.tol;
  return o;
}

struct LoadedProblem {
  ControlProblem prob;
  std::string hash;
};

std::optional<LoadedProblem> load_problem(const RunConfig& cfg) {
  try {
    const std::string bytes = read_file(cfg.problem_path);
    return LoadedProblem{control_problem_from_json(json::parse(bytes)), content_hash(bytes)};
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: cannot load problem '%s': %s\n", cfg.problem_path.c_str(),
                 e.what());
    return std::nullopt;
  }
}

void write_certificates(const fs::path& dir, const std::string& prefix,
                        const std::vector<PutinarCertificate>& certs, json& file_list) {
  for (std::size_t i = 0; i < certs.size(); ++i) {
    const std::string name =
        "cert_" + prefix + "_" + std::to_string(i) + "_" + certs[i].label + ".json";
    atomic_write_file((dir / name).string(), certbound::to_json(certs[i]).dump(2) + "\n");
    file_list.push_back(name);
  }
}

}  // namespace

json RunConfig::to_json() const {
  return {{"subcommand", subcommand},
          {"problem", problem_path},
          {"trajectories", trajectory_paths},
          {"certificate", certificate_path},
          {"reference", reference_path},
          {"orders", orders},
          {"t0", t0},
          {"x0", x0},
          {"grid", grid},
          {"lambdas", lambdas},
          {"dict_degree", dict_degree},
          {"with_controls", with_controls},
          {"fit_degree", fit_degree},
          {"state_radius", state_radius},
          {"out_dir", out_dir},
          {"tag", tag},
          {"jobs", jobs},
          {"seed", seed},
          {"tol", tol},
          {"samples", samples}};
}

std::vector<int> parse_orders(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) return {std::stoi(text)};
  const int lo = std::stoi(text.substr(0, dots));
  const int hi = std::stoi(text.substr(dots + 2));
  if (hi < lo) throw std::invalid_argument("orders range is empty");
  std::vector<int> out;
  for (int d = lo; d <= hi; ++d) out.push_back(d);
  return out;
}

std::vector<double> parse_lambdas(const std::string& text) {
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const auto colon = text.find(':', dots);
    if (colon == std::string::npos)
      throw std::invalid_argument("log-spaced lambdas need a count: a..b:n");
    const double lo = std::stod(text.substr(0, dots));
    const double hi = std::stod(text.substr(dots + 2, colon - dots - 2));
    const int n = std::stoi(text.substr(colon + 1));
    if (lo <= 0 || hi <= 0 || n < 1)
      throw std::invalid_argument("log-spaced lambdas need positive endpoints");
    std::vector<double> out;
    for (int i = 0; i < n; ++i) {
      const double f = n == 1 ? 0.0 : double(i) / (n - 1);
      out.push_back(std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo))));
    }
    return out;
  }
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  if (out.empty()) throw std::invalid_argument("empty lambda list");
  return out;
}

std::vector<double> parse_point(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

int cmd_ocp(const RunConfig& cfg) {
  const auto loaded = load_problem(cfg);
  if (!loaded) return kExitInput;
  const ControlProblem& prob = loaded->prob;
  if (cfg.x0.size() != prob.state_dim()) {
    std::fprintf(stderr, "error: --x0 needs %zu coordinates\n", prob.state_dim());
    return kExitInput;
  }

  const fs::path dir = run_dir(cfg, "ocp");
  json runs = json::array();
  bool any_solver_failure = false, any_invalid = false, any_verified = false;
  double best_bound = 0.0;
  int best_order = -1;

  for (int order : cfg.orders) {
    OcpResult r;
    try {
      r = solve_ocp(prob, cfg.t0, cfg.x0, order, app_options(cfg));
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: order %d: %s\n", order, e.what());
      return kExitInput;
    }
    json entry{{"order", order}, {"status", to_string(r.status)}};
    if (r.certificates.empty()) {
      any_solver_failure = true;
    } else {
      json files = json::array();
      write_certificates(dir, "ocp_d" + std::to_string(order), r.certificates, files);
      entry["bound"] = r.bound;
      entry["verified"] = r.verified;
      entry["worst_residual"] = r.worst_residual;
      entry["worst_eigenvalue"] = r.worst_eigenvalue;
      entry["certificates"] = files;
      entry["v"] = certbound::to_json(r.v);
      entry["scaling"] = scaling_json(r.scaling);
      entry["assembly_log"] = r.assembly_log;
      if (r.verified) {
        any_verified = true;
        if (best_order < 0 || r.bound > best_bound) {
          best_bound = r.bound;
          best_order = order;
        }
      } else {
        any_invalid = true;
      }
    }
    runs.push_back(std::move(entry));
    std::printf("ocp order %d: status=%s bound=%s verified=%s\n", order,
                to_string(r.status).c_str(),
                r.certificates.empty() ? "-" : std::to_string(r.bound).c_str(),
                r.certificates.empty() ? "-" : (r.verified ? "yes" : "NO"));
  }

  json result{{"schema", kSchemaTag},
              {"command", "ocp"},
              {"config", cfg.to_json()},
              {"input_hash", loaded->hash},
              {"runs", std::move(runs)}};
  if (best_order >= 0) result["best"] = {{"order", best_order}, {"bound", best_bound}};
  atomic_write_file((dir / "result.json").string(), result.dump(2) + "\n");
  write_meta(dir);
  std::printf("wrote %s\n", (dir / "result.json").string().c_str());

  if (any_invalid) return kExitVerification;
  if (any_solver_failure) return kExitSolver;
  return any_verified ? kExitOk : kExitSolver;
}

int cmd_roa(const RunConfig& cfg) {
  const auto loaded = load_problem(cfg);
  if (!loaded) return kExitInput;
  const ControlProblem& prob = loaded->prob;

  const fs::path dir = run_dir(cfg, "roa");
  json runs = json::array();
  bool any_solver_failure = false, any_invalid = false, any_verified = false;

  for (int order : cfg.orders) {
    RoaResult r;
    try {
      r = solve_roa(prob, cfg.t0, order, app_options(cfg));
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: order %d: %s\n", order, e.what());
      return kExitInput;
    }
    json entry{{"order", order}, {"status", to_string(r.status)}};
    if (r.certificates.empty()) {
      any_solver_failure = true;
    } else {
      json files = json::array();
      write_certificates(dir, "roa_d" + std::to_string(order), r.certificates, files);
      entry["objective"] = r.objective;
      entry["verified"] = r.verified;
      entry["worst_residual"] = r.worst_residual;
      entry["certificates"] = files;
      entry["v"] = certbound::to_json(r.v);
      entry["w"] = certbound::to_json(r.w);
      entry["scaling"] = scaling_json(r.scaling);
      entry["assembly_log"] = r.assembly_log;
      if (r.verified)
        any_verified = true;
      else
        any_invalid = true;

      if (prob.X.has_bounding_box()) {
        GridSpec grid;
        grid.bounds = prob.X.bounding_box();
        grid.counts.assign(prob.state_dim(), cfg.grid);
        const std::string name = "sublevel_d" + std::to_string(order) + ".csv";
        atomic_write_file((dir / name).string(), sublevel_grid_csv(r.v, cfg.t0, grid));
        entry["sublevel_csv"] = name;
      }
    }
    runs.push_back(std::move(entry));
    std::printf("roa order %d: status=%s objective=%s verified=%s\n", order,
                to_string(r.status).c_str(),
                r.certificates.empty() ? "-" : std::to_string(r.objective).c_str(),
                r.certificates.empty() ? "-" : (r.verified ? "yes" : "NO"));
  }

  json result{{"schema", kSchemaTag},
              {"command", "roa"},
              {"config", cfg.to_json()},
              {"input_hash", loaded->hash},
              {"runs", std::move(runs)}};
  atomic_write_file((dir / "result.json").string(), result.dump(2) + "\n");
  write_meta(dir);
  std::printf("wrote %s\n", (dir / "result.json").string().c_str());

  if (any_invalid) return kExitVerification;
  if (any_solver_failure) return kExitSolver;
  return any_verified ? kExitOk : kExitSolver;
}

int cmd_ioc(const RunConfig& cfg) {
  const auto loaded = load_problem(cfg);
  if (!loaded) return kExitInput;
  const ControlProblem& prob = loaded->prob;
  if (cfg.trajectory_paths.empty()) {
    std::fprintf(stderr, "error: at least one trajectory file is required\n");
    return kExitInput;
  }

  std::vector<PolynomialTrajectory> fits;
  std::vector<std::string> traj_hashes;
  double max_fit_residual = 0.0;
  for (const auto& path : cfg.trajectory_paths) {
    try {
      const std::string bytes = read_file(path);
      const Trajectory tr = trajectory_from_json(json::parse(bytes));
      traj_hashes.push_back(content_hash(bytes));
      fits.push_back(fit_polynomial_trajectory(tr, cfg.fit_degree));
      max_fit_residual = std::max(max_fit_residual, fits.back().fit_residual);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: trajectory '%s': %s\n", path.c_str(), e.what());
      return kExitInput;
    }
  }

  std::optional<Polynomial> reference;
  if (!cfg.reference_path.empty()) {
    try {
      reference = polynomial_from_json(json::parse(read_file(cfg.reference_path)));
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: reference '%s': %s\n", cfg.reference_path.c_str(), e.what());
      return kExitInput;
    }
  }

  const std::vector<Monomial> basis = cfg.with_controls
                                          ? monomial_basis(prob.xu_vars, cfg.dict_degree)
                                          : monomial_basis(prob.state_vars, cfg.dict_degree);

  const fs::path dir = run_dir(cfg, "ioc");
  json runs = json::array();
  std::ostringstream summary;
  summary.precision(12);
  summary << "lambda,epsilon,status,verified";
  if (reference) summary << ",distance_to_reference";
  summary << "\n";

  bool any_solver_failure = false, any_invalid = false, any_verified = false;
  const int order = cfg.orders.front();

  // Independent solves across the sweep, one builder and solver per job.
  std::vector<IocResult> results(cfg.lambdas.size());
  std::vector<std::string> errors(cfg.lambdas.size());
  {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (;;) {
        const std::size_t li = next.fetch_add(1);
        if (li >= cfg.lambdas.size()) return;
        try {
          IocOptions opts;
          opts.app = app_options(cfg);
          results[li] = solve_ioc(prob, fits, order, cfg.lambdas[li], basis, opts);
        } catch (const std::exception& e) {
          errors[li] = e.what();
        }
      }
    };
    std::vector<std::thread> pool;
    for (int j = 0; j < std::max(1, cfg.jobs); ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t li = 0; li < cfg.lambdas.size(); ++li) {
    if (!errors[li].empty()) {
      std::fprintf(stderr, "error: lambda %g: %s\n", cfg.lambdas[li], errors[li].c_str());
      return kExitInput;
    }
    const double lambda = cfg.lambdas[li];
    const IocResult& r = results[li];
    json entry{{"lambda", lambda}, {"order", order}, {"status", to_string(r.status)}};
    summary << lambda << ",";
    if (r.certificates.empty()) {
      any_solver_failure = true;
      summary << "," << to_string(r.status) << ",0";
      if (reference) summary << ",";
      summary << "\n";
    } else {
      json files = json::array();
      write_certificates(dir, "ioc_l" + std::to_string(li), r.certificates, files);
      entry["epsilon"] = r.epsilon;
      entry["verified"] = r.verified;
      entry["lagrangian"] = certbound::to_json(r.lagrangian);
      entry["v"] = certbound::to_json(r.v);
      entry["l_coeffs"] = r.l_coeffs;
      entry["normalization_value"] = r.normalization_value;
      entry["max_fit_residual"] = max_fit_residual;
      entry["assembly_log"] = r.assembly_log;
      entry["certificates"] = files;
      if (r.verified)
        any_verified = true;
      else
        any_invalid = true;
      summary << r.epsilon << "," << to_string(r.status) << "," << (r.verified ? 1 : 0);
      if (reference) {
        const auto ref_coeffs = coeffs_on_basis(
            reference->embedded_into(cfg.with_controls ? prob.xu_vars : prob.state_vars), basis);
        const double dist = normalized_distance(r.l_coeffs, ref_coeffs);
        entry["distance_to_reference"] = dist;
        summary << "," << dist;
      }
      summary << "\n";
    }
    runs.push_back(std::move(entry));
    std::printf("ioc lambda %-8g: status=%s epsilon=%s\n", lambda, to_string(r.status).c_str(),
                r.certificates.empty() ? "-" : std::to_string(r.epsilon).c_str());
  }

  atomic_write_file((dir / "summary.csv").string(), summary.str());
  json result{{"schema", kSchemaTag},
              {"command", "ioc"},
              {"config", cfg.to_json()},
              {"input_hash", loaded->hash},
              {"trajectory_hashes", traj_hashes},
              {"runs", std::move(runs)}};
  atomic_write_file((dir / "result.json").string(), result.dump(2) + "\n");
  write_meta(dir);
  std::printf("wrote %s\n", (dir / "result.json").string().c_str());

  if (any_invalid) return kExitVerification;
  if (any_solver_failure) return kExitSolver;
  return any_verified ? kExitOk : kExitSolver;
}

int cmd_verify(const RunConfig& cfg) {
  PutinarCertificate cert;
  try {
    cert = certificate_from_json(json::parse(read_file(cfg.certificate_path)));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: cannot load certificate '%s': %s\n",
                 cfg.certificate_path.c_str(), e.what());
    return kExitInput;
  }

  const VerifyOutcome out = verify_certificate(cert, 1e-6, 1e-6);
  double sampled_min = std::numeric_limits<double>::quiet_NaN();
  bool sample_ok = true;
  if (cert.set.has_bounding_box() && cfg.samples > 0) {
    try {
      sampled_min = sample_nonnegativity(cert.target, cert.set, cfg.samples, cfg.seed);
      sample_ok = sampled_min >= -1e-5 * out.scale;
    } catch (const std::exception& e) {
      std::printf("sampling skipped: %s\n", e.what());
    }
  }

  std::printf("residual       %.6e (threshold %.1e x %.3e)\n", out.worst_residual, 1e-6,
              out.scale);
  std::printf("min eigenvalue %.6e\n", out.worst_eigenvalue);
  if (std::isfinite(sampled_min))
    std::printf("sampled min    %.6e over %d samples\n", sampled_min, cfg.samples);
  const bool valid = out.valid && sample_ok;
  std::printf("certificate %s\n", valid ? "VALID" : "INVALID");
  return valid ? kExitOk : kExitVerification;
}

int cmd_bench(const RunConfig& cfg) {
  Table1Config tcfg;
  tcfg.orders = cfg.orders;
  tcfg.state_radius = cfg.state_radius;
  tcfg.jobs = cfg.jobs;

  std::vector<Table1Row> rows;
  try {
    rows = table1_harness(tcfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSolver;
  }

  const fs::path dir = run_dir(cfg, "bench");
  atomic_write_file((dir / "table1.csv").string(), table1_csv(rows));

  // Near-minimum-time trajectories, reusable as inverse-problem inputs:
  // raw free-time paths plus unit-horizon rescalings with their shared
  // fixed-horizon problem file (ready for the ioc subcommand).
  OracleConfig ocfg;
  ocfg.state_radius = cfg.state_radius;
  json traj_files = json::array();
  std::vector<Trajectory> raw;
  for (const auto& x0 : table1_states()) {
    const auto r = oracle_min_time(x0, ocfg);
    raw.push_back(r.trajectory);
    std::ostringstream name;
    name << "trajectory_x" << x0[1] << "_" << x0[2] << ".json";
    atomic_write_file((dir / name.str()).string(),
                      certbound::to_json(r.trajectory).dump(2) + "\n");
    traj_files.push_back(name.str());
  }
  json ioc_files = json::array();
  {
    const RescaledIoc rs = rescale_to_unit_horizon(raw, cfg.state_radius);
    atomic_write_file((dir / "ioc_problem.json").string(),
                      certbound::to_json(rs.problem).dump(2) + "\n");
    for (std::size_t i = 0; i < rs.trajectories.size(); ++i) {
      const std::string name = "ioc_trajectory_" + std::to_string(i) + ".json";
      atomic_write_file((dir / name).string(),
                        certbound::to_json(rs.trajectories[i]).dump(2) + "\n");
      ioc_files.push_back(name);
    }
  }

  bool all_verified = true, bound_ok = true, monotone = true;
  const std::size_t n_states = table1_states().size();
  for (const auto& row : rows) {
    all_verified = all_verified && row.verified;
    bound_ok = bound_ok && (row.sos_bound <= row.oracle_T + 1e-3);
  }
  for (std::size_t o = 1; o < cfg.orders.size(); ++o)
    for (std::size_t i = 0; i < n_states; ++i)
      monotone = monotone && rows[o * n_states + i].sos_bound >=
                                 rows[(o - 1) * n_states + i].sos_bound - 1e-6;

  json result{{"schema", kSchemaTag},
              {"command", "bench"},
              {"config", cfg.to_json()},
              {"table_csv", "table1.csv"},
              {"trajectories", std::move(traj_files)},
              {"ioc_problem", "ioc_problem.json"},
              {"ioc_trajectories", std::move(ioc_files)},
              {"all_verified", all_verified},
              {"bounds_below_oracle", bound_ok},
              {"monotone_in_order", monotone}};
  atomic_write_file((dir / "result.json").string(), result.dump(2) + "\n");
  write_meta(dir);
  std::printf("wrote %s\n", (dir / "table1.csv").string().c_str());
  std::printf("verified=%d bounds_below_oracle=%d monotone=%d\n", int(all_verified),
              int(bound_ok), int(monotone));

  if (!all_verified || !bound_ok || !monotone) return kExitVerification;
  return kExitOk;
}

}  // namespace certbound::cli
