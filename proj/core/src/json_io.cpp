#include "certbound/json_io.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace certbound {

using nlohmann::json;

json to_json(const VariableSet& vars) { return json(vars.names()); }

VariableSet variable_set_from_json(const json& j) {
  return VariableSet(j.get<std::vector<std::string>>());
}

json to_json(const Polynomial& p) {
  json terms = json::array();
  for (const auto& [m, c] : p.terms()) {
    terms.push_back({{"exponents", m.exponents}, {"coeff", c}});
  }
  return {{"vars", to_json(p.vars())}, {"terms", std::move(terms)}};
}

Polynomial polynomial_from_json(const json& j) {
  const VariableSet vars = variable_set_from_json(j.at("vars"));
  Polynomial::TermMap terms;
  for (const auto& t : j.at("terms")) {
    Monomial m(t.at("exponents").get<std::vector<int>>());
    terms[std::move(m)] += t.at("coeff").get<double>();
  }
  return Polynomial(vars, std::move(terms));
}

json to_json(const SemialgebraicSet& set) {
  json gs = json::array();
  for (const auto& g : set.inequalities()) gs.push_back(to_json(g));
  json out{{"vars", to_json(set.vars())}, {"inequalities", std::move(gs)}};
  if (set.has_bounding_box()) {
    json box = json::array();
    for (const auto& [lo, hi] : set.bounding_box()) box.push_back({lo, hi});
    out["bounding_box"] = std::move(box);
  }
  return out;
}

SemialgebraicSet set_from_json(const json& j) {
  const VariableSet vars = variable_set_from_json(j.at("vars"));
  std::vector<Polynomial> gs;
  for (const auto& g : j.at("inequalities")) gs.push_back(polynomial_from_json(g));
  std::vector<std::pair<double, double>> box;
  if (j.contains("bounding_box")) {
    for (const auto& b : j.at("bounding_box")) box.emplace_back(b.at(0), b.at(1));
  }
  return SemialgebraicSet(vars, std::move(gs), std::move(box));
}

json to_json(const ControlProblem& prob) {
  json dyn = json::array();
  for (const auto& f : prob.dynamics) dyn.push_back(to_json(f));
  return {{"schema", kSchemaTag},
          {"state_vars", to_json(prob.state_vars)},
          {"control_vars", to_json(prob.control_vars)},
          {"dynamics", std::move(dyn)},
          {"lagrangian", to_json(prob.lagrangian)},
          {"terminal_cost", to_json(prob.terminal_cost)},
          {"sets", {{"X", to_json(prob.X)}, {"U", to_json(prob.U)}, {"XT", to_json(prob.XT)}}},
          {"horizon", prob.horizon == Horizon::FixedUnit ? "fixed_unit" : "free_terminal"}};
}

ControlProblem control_problem_from_json(const json& j) {
  if (j.value("schema", "") != kSchemaTag)
    throw std::invalid_argument("control_problem_from_json: unknown or missing schema tag");
  const VariableSet xs = variable_set_from_json(j.at("state_vars"));
  const VariableSet us = variable_set_from_json(j.at("control_vars"));
  std::vector<Polynomial> dyn;
  for (const auto& f : j.at("dynamics")) dyn.push_back(polynomial_from_json(f));
  const std::string h = j.at("horizon").get<std::string>();
  if (h != "fixed_unit" && h != "free_terminal")
    throw std::invalid_argument("control_problem_from_json: horizon must be fixed_unit or free_terminal");
  return make_control_problem(
      xs, us, std::move(dyn), polynomial_from_json(j.at("lagrangian")),
      polynomial_from_json(j.at("terminal_cost")), set_from_json(j.at("sets").at("X")),
      set_from_json(j.at("sets").at("U")), set_from_json(j.at("sets").at("XT")),
      h == "fixed_unit" ? Horizon::FixedUnit : Horizon::FreeTerminal);
}

json to_json(const Trajectory& traj) {
  return {{"schema", kSchemaTag},
          {"t0", traj.t0},
          {"times", traj.times},
          {"states", traj.states},
          {"controls", traj.controls}};
}

Trajectory trajectory_from_json(const json& j) {
  if (j.value("schema", "") != kSchemaTag)
    throw std::invalid_argument("trajectory_from_json: unknown or missing schema tag");
  Trajectory t;
  t.t0 = j.at("t0").get<double>();
  t.times = j.at("times").get<std::vector<double>>();
  t.states = j.at("states").get<std::vector<std::vector<double>>>();
  t.controls = j.at("controls").get<std::vector<std::vector<double>>>();
  return t;
}

json to_json(const PutinarCertificate& cert) {
  json blocks = json::array();
  for (const auto& blk : cert.blocks) {
    json basis = json::array();
    for (const auto& m : blk.basis) basis.push_back(m.exponents);
    std::vector<double> gram;
    gram.reserve(blk.gram.size());
    for (int i = 0; i < blk.gram.rows(); ++i)
      for (int j2 = 0; j2 < blk.gram.cols(); ++j2) gram.push_back(blk.gram(i, j2));
    blocks.push_back(
        {{"basis", std::move(basis)}, {"gram", std::move(gram)}, {"multiplies", blk.multiplies}});
  }
  return {{"schema", kSchemaTag},
          {"label", cert.label},
          {"set", to_json(cert.set)},
          {"target", to_json(cert.target)},
          {"blocks", std::move(blocks)},
          {"residual", cert.identity_residual},
          {"eig_min", cert.eig_min}};
}

PutinarCertificate certificate_from_json(const json& j) {
  if (j.value("schema", "") != kSchemaTag)
    throw std::invalid_argument("certificate_from_json: unknown or missing schema tag");
  PutinarCertificate cert;
  cert.label = j.value("label", "");
  cert.set = set_from_json(j.at("set"));
  cert.target = polynomial_from_json(j.at("target"));
  for (const auto& b : j.at("blocks")) {
    GramBlock blk;
    for (const auto& e : b.at("basis")) blk.basis.emplace_back(e.get<std::vector<int>>());
    const auto gram = b.at("gram").get<std::vector<double>>();
    const int k = static_cast<int>(blk.basis.size());
    if (gram.size() != static_cast<std::size_t>(k) * k)
      throw std::invalid_argument("certificate_from_json: gram size does not match basis");
    blk.gram.resize(k, k);
    for (int i = 0; i < k; ++i)
      for (int j2 = 0; j2 < k; ++j2) blk.gram(i, j2) = gram[i * k + j2];
    blk.multiplies = b.at("multiplies").get<int>();
    cert.blocks.push_back(std::move(blk));
  }
  cert.identity_residual = j.at("residual").get<double>();
  cert.eig_min = j.at("eig_min").get<double>();
  return cert;
}

std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void atomic_write_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + tmp.string());
    out << content;
  }
  fs::rename(tmp, target);
}

}  // namespace certbound
