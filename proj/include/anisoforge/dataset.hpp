#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "anisoforge/tensor_core.hpp"

namespace anisoforge {

struct SampleRecord {
  Eigen::VectorXd D;
  SymTensor3 C;
  SymTensor3 S;
};

struct Dataset {
  std::vector<std::string> design_names;
  std::vector<SampleRecord> records;
  /// Free-form metadata: model id, parameter ranges, sampler settings, seed, units, ...
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  int design_dim() const { return static_cast<int>(design_names.size()); }
  Eigen::VectorXd design_lower() const;
  Eigen::VectorXd design_upper() const;
  /// Distinct design vectors in first-seen order.
  std::vector<Eigen::VectorXd> unique_designs() const;
};

/// Text format:
///   #ANISOFORGE-DATASET v1 {json metadata incl. "design_names"}
///   D_1 .. D_m C11 C22 C33 C12 C13 C23 S11 S22 S33 S12 S13 S23
/// Blank lines and further '#' lines are ignored.
void write_dataset(const Dataset& data, std::ostream& os);
void write_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset read_dataset(std::istream& is, const std::string& source = "<stream>");
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace anisoforge
