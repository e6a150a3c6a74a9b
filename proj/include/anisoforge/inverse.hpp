#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "anisoforge/dataset.hpp"
#include "anisoforge/energy.hpp"
#include "anisoforge/optim.hpp"

namespace anisoforge::inverse {

/// Find design variables (and optionally the orientation) whose surrogate
/// stresses match target stresses at given strains.
struct InverseProblem {
  const Surrogate* model = nullptr;
  std::vector<SymTensor3> C_targets;
  std::vector<SymTensor3> S_targets;
  Eigen::VectorXd design;        ///< full design vector; entries not listed in free_design stay fixed
  std::vector<int> free_design;  ///< indices into `design`
  Eigen::VectorXd lower, upper;  ///< bounds of the free design variables
  bool free_orientation = false; ///< also search (phi, p_raw)

  /// Targets from every record of a dataset; all design variables free with
  /// the given bounds.
  static InverseProblem from_dataset(const Surrogate& model, const Dataset& targets, const Eigen::VectorXd& lower,
                                     const Eigen::VectorXd& upper, bool free_orientation = false);
};

/// Mean squared Frobenius mismatch of the surrogate stresses.
double design_objective(const InverseProblem& problem, const Eigen::VectorXd& D, const MaterialFrame& frame);

struct InverseSolution {
  Eigen::VectorXd design;
  double phi = 0.0;
  Vec3 p_raw = Vec3::UnitZ();
  std::vector<Vec3> directions;  ///< active directions of the recovered orientation
  double objective = 0.0;
  int best_run = 0;
  std::vector<OptimResult> runs;
  std::vector<std::string> variable_names;  ///< traces hold these variables in physical units
};

/// CMA-ES in coordinates normalised to [0,1] over the bounds, restarted
/// `restarts` times from seeded random means (the first run starts at the
/// centre of the box).
InverseSolution invert_design(const InverseProblem& problem, const CmaConfig& config, int restarts = 5,
                              const std::vector<std::string>& design_names = {});

/// iter,f_best,var1,...,varn in physical units.
void write_trace_csv(const InverseSolution& sol, int run, const std::filesystem::path& path);
nlohmann::json to_json(const InverseSolution& sol);

}  // namespace anisoforge::inverse
