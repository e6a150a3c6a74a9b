#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace anisoforge::inverse {

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// One row per generation (CMA-ES) or iteration (Nelder-Mead).
struct TraceEntry {
  int iteration = 0;
  long evaluations = 0;
  double f_best = 0.0;
  Eigen::VectorXd x_best;
  // CMA-ES only.
  double sigma = 0.0;
  double min_cov_eigenvalue = 0.0;
  double cov_asymmetry = 0.0;
};

struct OptimResult {
  Eigen::VectorXd x;
  double f = 0.0;
  long evaluations = 0;
  int iterations = 0;
  bool converged = false;
  /// Set when the iteration budget ran out before the tolerance was met.
  bool hit_max_iterations = false;
  std::vector<TraceEntry> history;
};

struct CmaConfig {
  int population = 0;  ///< 0 selects 4 + floor(3 ln n)
  double sigma0 = 0.3;
  Eigen::VectorXd mean0;
  Eigen::VectorXd lower;  ///< empty: unbounded
  Eigen::VectorXd upper;
  long max_evaluations = 20000;
  std::uint64_t seed = 1;
  double target = -std::numeric_limits<double>::infinity();  ///< stop once f_best < target
  double tol_x = 1e-14;
  double tol_fun = 0.0;  ///< stop once the generation's f-range stays below this (0 disables)
  double bound_penalty = 1e4;
};

/// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation and rank-one
/// plus rank-mu covariance updates. Bounded variables are evaluated at the
/// clamped point plus bound_penalty * squared violation distance. NaN
/// objective values rank as +inf; a generation of only NaN throws.
OptimResult cma_es(const Objective& objective, const CmaConfig& config);

struct NmConfig {
  double initial_scale = 0.1;
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
  int max_iterations = 5000;
  double tolerance = 1e-10;  ///< simplex diameter (infinity norm from the best vertex)
  double f_tolerance = 0.0;  ///< optional spread criterion on vertex values
};

/// Downhill simplex. Starting simplex is x0 and x0 + initial_scale * e_i.
OptimResult nelder_mead(const Objective& objective, const NmConfig& config, const Eigen::VectorXd& x0);

}  // namespace anisoforge::inverse
