#pragma once

// JSON encoding of configs, instances, sweep specs and solver output.
//
// Matrices are row-major nested arrays and all indices are 0-based. An
// instance object has exactly the keys "phi", "x_true", "perms", "anchors",
// "y", "sigma2" and "config"; the noise realization is recomputed on load as
// y - P Phi x.

#include "permsbl/em.hpp"
#include "permsbl/harness.hpp"
#include "permsbl/model.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace permsbl {

using Json = nlohmann::json;

Json matrix_to_json(const Eigen::MatrixXd& a);
/// Throws ConfigError on ragged or non-numeric input.
Eigen::MatrixXd matrix_from_json(const Json& j, const char* what);

Json config_to_json(const ProblemConfig& c);
/// Missing keys keep their defaults; unknown keys and wrong types are
/// ConfigErrors. The result is validated.
ProblemConfig config_from_json(const Json& j);

Json instance_to_json(const ProblemInstance& inst);
/// Throws ConfigError when shapes disagree with the embedded config.
ProblemInstance instance_from_json(const Json& j);

Json trial_options_to_json(const TrialOptions& o);
TrialOptions trial_options_from_json(const Json& j);

Json sweep_spec_to_json(const SweepSpec& s);
SweepSpec sweep_spec_from_json(const Json& j);

/// Estimate, permutations, iteration record and score against the truth
/// stored in the instance.
Json solve_output_to_json(std::string_view algorithm, const Eigen::MatrixXd& x_hat,
                          const std::vector<PermutationMap>& perms, const EMState* state,
                          const TrialResult& score);

/// Throws ConfigError when the file is missing or not valid JSON.
Json read_json(const std::filesystem::path& path);
void write_json(const Json& j, const std::filesystem::path& path);

}  // namespace permsbl
