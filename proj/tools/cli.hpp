#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace certbound::cli {

/// Everything a run needs, reconstructable from the flags; serialized into
/// every output file so results are reproducible byte for byte.
struct RunConfig {
  std::string subcommand;
  std::string problem_path;
  std::vector<std::string> trajectory_paths;
  std::string certificate_path;
  std::string reference_path;
  std::vector<int> orders{3};
  double t0 = 0.0;
  std::vector<double> x0;
  int grid = 21;
  std::vector<double> lambdas{1.0};
  int dict_degree = 4;
  bool with_controls = false;
  int fit_degree = 8;
  double state_radius = 4.0;
  std::string out_dir = "runs";
  std::string tag;  // empty: timestamp directory name
  int jobs = 1;
  std::uint64_t seed = 0;
  double tol = 2e-6;
  int samples = 10000;

  nlohmann::json to_json() const;
};

int cmd_ocp(const RunConfig& cfg);
int cmd_roa(const RunConfig& cfg);
int cmd_ioc(const RunConfig& cfg);
int cmd_verify(const RunConfig& cfg);
int cmd_bench(const RunConfig& cfg);

/// "3" or "2..5" -> {2,3,4,5}.
std::vector<int> parse_orders(const std::string& text);
/// "0.5" or "0.5,1,2" or log-spaced "0.01..10:7".
std::vector<double> parse_lambdas(const std::string& text);
std::vector<double> parse_point(const std::string& text);

}  // namespace certbound::cli
