#pragma once

#include <string>

#include "json.hpp"

#include "certbound/brockett.hpp"
#include "certbound/model.hpp"
#include "certbound/sos.hpp"

namespace certbound {

inline constexpr const char* kSchemaTag = "certbound/v1";

nlohmann::json to_json(const VariableSet& vars);
VariableSet variable_set_from_json(const nlohmann::json& j);

/// {"vars": [...], "terms": [{"exponents": [...], "coeff": c}, ...]},
/// graded-lex sorted for byte-stable output.
nlohmann::json to_json(const Polynomial& p);
Polynomial polynomial_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SemialgebraicSet& set);
SemialgebraicSet set_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ControlProblem& prob);
ControlProblem control_problem_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PutinarCertificate& cert);
PutinarCertificate certificate_from_json(const nlohmann::json& j);

/// FNV-1a 64-bit content fingerprint, hex encoded (not cryptographic).
std::string content_hash(const std::string& bytes);

std::string read_file(const std::string& path);
/// Write-then-rename so concurrent readers never observe partial files.
void atomic_write_file(const std::string& path, const std::string& content);

}  // namespace certbound
