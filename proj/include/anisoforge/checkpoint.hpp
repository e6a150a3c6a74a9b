#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "anisoforge/energy.hpp"

namespace anisoforge {

struct AdamState {
  Eigen::VectorXd m, v;
  long long step = 0;
};

/// Everything needed to evaluate or resume a trained surrogate.
struct Checkpoint {
  Surrogate model;
  std::vector<std::string> design_names;
  long long epoch = 0;
  AdamState adam;
  nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json to_json(const Checkpoint& ck);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

/// Structured-text (JSON) checkpoint; doubles round-trip exactly.
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace anisoforge
