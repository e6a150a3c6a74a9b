#include "anisoforge/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "anisoforge/errors.hpp"

namespace anisoforge::inverse {
namespace {

double sanitize(double f) { return std::isnan(f) ? std::numeric_limits<double>::infinity() : f; }

struct Bounds {
  Eigen::VectorXd lower, upper;
  bool active = false;

  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const {
    if (!active) return x;
    return x.cwiseMax(lower).cwiseMin(upper);
  }
};

}  // namespace

OptimResult cma_es(const Objective& objective, const CmaConfig& config) {
  const Eigen::Index n = config.mean0.size();
  if (n < 1) throw InvalidArgument("cma_es: empty initial mean");
  if (!(config.sigma0 > 0.0)) throw InvalidArgument("cma_es: sigma0 must be positive");
  Bounds bounds;
  if (config.lower.size() > 0 || config.upper.size() > 0) {
    if (config.lower.size() != n || config.upper.size() != n)
      throw InvalidArgument("cma_es: bounds must match the dimension of the mean");
    if ((config.lower.array() > config.upper.array()).any()) throw InvalidArgument("cma_es: lower bound above upper");
    bounds = {config.lower, config.upper, true};
  }

  const int lambda = config.population > 0 ? config.population
                                           : 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(n))));
  if (lambda < 4) throw InvalidArgument("cma_es: population must be at least 4");
  const int mu = lambda / 2;
  Eigen::VectorXd weights(mu);
  for (int i = 0; i < mu; ++i) weights[i] = std::log(mu + 0.5) - std::log(i + 1.0);
  weights /= weights.sum();
  const double mu_eff = 1.0 / weights.squaredNorm();
  const double nd = static_cast<double>(n);

  const double cs = (mu_eff + 2.0) / (nd + mu_eff + 5.0);
  const double ds = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (nd + 1.0)) - 1.0) + cs;
  const double cc = (4.0 + mu_eff / nd) / (nd + 4.0 + 2.0 * mu_eff / nd);
  const double c1 = 2.0 / ((nd + 1.3) * (nd + 1.3) + mu_eff);
  const double cmu = std::min(1.0 - c1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nd + 2.0) * (nd + 2.0) + mu_eff));
  const double chi_n = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::VectorXd mean = config.mean0;
  double sigma = config.sigma0;
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd D = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd pc = Eigen::VectorXd::Zero(n), ps = Eigen::VectorXd::Zero(n);

  OptimResult result;
  result.f = std::numeric_limits<double>::infinity();
  result.x = bounds.clamp(mean);

  Eigen::MatrixXd Z(n, lambda), Y(n, lambda), X(n, lambda);
  std::vector<double> fitness(static_cast<std::size_t>(lambda));
  std::vector<int> order(static_cast<std::size_t>(lambda));

  for (int gen = 0;; ++gen) {
    for (int k = 0; k < lambda; ++k) {
      for (Eigen::Index i = 0; i < n; ++i) Z(i, k) = normal(rng);
      Y.col(k) = B * D.asDiagonal() * Z.col(k);
      X.col(k) = mean + sigma * Y.col(k);
    }
    bool any_finite = false;
    for (int k = 0; k < lambda; ++k) {
      const Eigen::VectorXd xk = X.col(k);
      const Eigen::VectorXd xc = bounds.clamp(xk);
      double f = sanitize(objective(xc));
      ++result.evaluations;
      if (std::isfinite(f)) {
        any_finite = true;
        if (f < result.f) {
          result.f = f;
          result.x = xc;
        }
      }
      if (bounds.active) f += config.bound_penalty * (xk - xc).squaredNorm();
      fitness[static_cast<std::size_t>(k)] = f;
    }
    if (!any_finite) throw NumericalError("cma_es: every candidate of a generation evaluated to NaN/inf");

    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fitness[static_cast<std::size_t>(a)] < fitness[static_cast<std::size_t>(b)]; });

    const Eigen::VectorXd old_mean = mean;
    Eigen::VectorXd y_w = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < mu; ++i) y_w += weights[i] * Y.col(order[static_cast<std::size_t>(i)]);
    mean = old_mean + sigma * y_w;

    // C^{-1/2} y_w = B D^-1 B^T y_w
    const Eigen::VectorXd inv_sqrt_y = B * D.cwiseInverse().asDiagonal() * (B.transpose() * y_w);
    ps = (1.0 - cs) * ps + std::sqrt(cs * (2.0 - cs) * mu_eff) * inv_sqrt_y;
    const double ps_norm = ps.norm();
    const double denom = std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * (gen + 1)));
    const bool hsig = ps_norm / denom / chi_n < 1.4 + 2.0 / (nd + 1.0);
    pc = (1.0 - cc) * pc + (hsig ? std::sqrt(cc * (2.0 - cc) * mu_eff) : 0.0) * y_w;

    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i) {
      const auto y = Y.col(order[static_cast<std::size_t>(i)]);
      rank_mu.noalias() += weights[i] * y * y.transpose();
    }
    const double delta_h = hsig ? 0.0 : cc * (2.0 - cc);
    C = (1.0 - c1 - cmu) * C + c1 * (pc * pc.transpose() + delta_h * C) + cmu * rank_mu;
    C = 0.5 * (C + C.transpose()).eval();

    sigma *= std::exp((cs / ds) * (ps_norm / chi_n - 1.0));

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    Eigen::VectorXd evals = es.eigenvalues().cwiseMax(1e-14);
    B = es.eigenvectors();
    D = evals.cwiseSqrt();
    C = B * evals.asDiagonal() * B.transpose();
    C = 0.5 * (C + C.transpose()).eval();

    TraceEntry entry;
    entry.iteration = gen;
    entry.evaluations = result.evaluations;
    entry.f_best = result.f;
    entry.x_best = result.x;
    entry.sigma = sigma;
    entry.min_cov_eigenvalue = evals.minCoeff();
    entry.cov_asymmetry = (C - C.transpose()).cwiseAbs().maxCoeff();
    result.history.push_back(std::move(entry));
    result.iterations = gen + 1;

    if (result.f < config.target) {
      result.converged = true;
      break;
    }
    if (sigma * std::sqrt(C.diagonal().maxCoeff()) < config.tol_x) {
      result.converged = true;
      break;
    }
    if (config.tol_fun > 0.0) {
      const double spread = fitness[static_cast<std::size_t>(order.back())] - fitness[static_cast<std::size_t>(order.front())];
      if (std::isfinite(spread) && spread < config.tol_fun) {
        result.converged = true;
        break;
      }
    }
    if (result.evaluations + lambda > config.max_evaluations) {
      result.hit_max_iterations = true;
      break;
    }
    if (!std::isfinite(sigma) || D.maxCoeff() > 1e7 * D.minCoeff()) {
      break;
    }
  }
  return result;
}

OptimResult nelder_mead(const Objective& objective, const NmConfig& config, const Eigen::VectorXd& x0) {
  const Eigen::Index n = x0.size();
  if (n < 1) throw InvalidArgument("nelder_mead: empty starting point");
  if (!(config.reflection > 0.0) || !(config.expansion > 1.0) || !(config.contraction > 0.0 && config.contraction < 1.0) ||
      !(config.shrink > 0.0 && config.shrink < 1.0))
    throw InvalidArgument("nelder_mead: invalid simplex coefficients");

  OptimResult result;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++result.evaluations;
    return sanitize(objective(x));
  };

  std::vector<Eigen::VectorXd> simplex(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> f(static_cast<std::size_t>(n + 1));
  f[0] = eval(x0);
  if (!std::isfinite(f[0])) throw InvalidArgument("nelder_mead: objective is not finite at the starting point");
  for (Eigen::Index i = 0; i < n; ++i) {
    simplex[static_cast<std::size_t>(i + 1)][i] += config.initial_scale;
    f[static_cast<std::size_t>(i + 1)] = eval(simplex[static_cast<std::size_t>(i + 1)]);
  }

  std::vector<std::size_t> order(static_cast<std::size_t>(n + 1));
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
    std::vector<Eigen::VectorXd> s2;
    std::vector<double> f2;
    s2.reserve(order.size());
    f2.reserve(order.size());
    for (auto k : order) {
      s2.push_back(simplex[k]);
      f2.push_back(f[k]);
    }
    simplex = std::move(s2);
    f = std::move(f2);
  };

  const auto last = static_cast<std::size_t>(n);
  for (int iter = 0;; ++iter) {
    sort_simplex();
    TraceEntry entry;
    entry.iteration = iter;
    entry.evaluations = result.evaluations;
    entry.f_best = f[0];
    entry.x_best = simplex[0];
    result.history.push_back(std::move(entry));
    result.iterations = iter;

    double diameter = 0.0;
    for (std::size_t i = 1; i <= last; ++i)
      diameter = std::max(diameter, (simplex[i] - simplex[0]).cwiseAbs().maxCoeff());
    const bool f_ok = config.f_tolerance <= 0.0 || std::abs(f[last] - f[0]) <= config.f_tolerance;
    if (diameter < config.tolerance && f_ok) {
      result.converged = true;
      break;
    }
    if (iter >= config.max_iterations) {
      result.hit_max_iterations = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < last; ++i) centroid += simplex[i];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = centroid + config.reflection * (centroid - simplex[last]);
    const double fr = eval(xr);
    if (fr < f[0]) {
      const Eigen::VectorXd xe = centroid + config.expansion * (xr - centroid);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[last] = xe;
        f[last] = fe;
      } else {
        simplex[last] = xr;
        f[last] = fr;
      }
      continue;
    }
    if (fr < f[last - 1]) {
      simplex[last] = xr;
      f[last] = fr;
      continue;
    }
    bool shrink = false;
    if (fr < f[last]) {
      const Eigen::VectorXd xc = centroid + config.contraction * (xr - centroid);
      const double fc = eval(xc);
      if (fc <= fr) {
        simplex[last] = xc;
        f[last] = fc;
      } else {
        shrink = true;
      }
    } else {
      const Eigen::VectorXd xcc = centroid + config.contraction * (simplex[last] - centroid);
      const double fcc = eval(xcc);
      if (fcc < f[last]) {
        simplex[last] = xcc;
        f[last] = fcc;
      } else {
        shrink = true;
      }
    }
    if (shrink) {
      for (std::size_t i = 1; i <= last; ++i) {
        simplex[i] = simplex[0] + config.shrink * (simplex[i] - simplex[0]);
        f[i] = eval(simplex[i]);
      }
    }
  }
  result.x = simplex[0];
  result.f = f[0];
  return result;
}

}  // namespace anisoforge::inverse
