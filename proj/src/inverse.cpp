#include "anisoforge/inverse.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "anisoforge/errors.hpp"

namespace anisoforge::inverse {

InverseProblem InverseProblem::from_dataset(const Surrogate& model, const Dataset& targets, const Eigen::VectorXd& lower,
                                            const Eigen::VectorXd& upper, bool free_orientation) {
  if (targets.empty()) throw InvalidArgument("inverse: empty target dataset");
  InverseProblem p;
  p.model = &model;
  for (const auto& r : targets.records) {
    p.C_targets.push_back(r.C);
    p.S_targets.push_back(r.S);
  }
  p.design = targets.records.front().D;
  for (int i = 0; i < targets.design_dim(); ++i) p.free_design.push_back(i);
  p.lower = lower;
  p.upper = upper;
  p.free_orientation = free_orientation;
  return p;
}

double design_objective(const InverseProblem& pr, const Eigen::VectorXd& D, const MaterialFrame& frame) {
  const auto norm = pr.model->normalization_coeffs(D, frame);
  double sum = 0.0;
  for (std::size_t i = 0; i < pr.C_targets.size(); ++i) {
    const SymTensor3 d = pr.model->stress(pr.C_targets[i], D, frame, norm) - pr.S_targets[i];
    sum += d.ddot(d);
  }
  return sum / static_cast<double>(pr.C_targets.size());
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Mapping {
  const InverseProblem* pr;
  int nfree() const { return static_cast<int>(pr->free_design.size()); }
  int dim() const { return nfree() + (pr->free_orientation ? 4 : 0); }

  Eigen::VectorXd design(const Eigen::VectorXd& x) const {
    Eigen::VectorXd D = pr->design;
    for (int i = 0; i < nfree(); ++i)
      D[pr->free_design[static_cast<std::size_t>(i)]] = pr->lower[i] + x[i] * (pr->upper[i] - pr->lower[i]);
    return D;
  }
  double phi(const Eigen::VectorXd& x) const { return kTwoPi * x[nfree()]; }
  Vec3 p(const Eigen::VectorXd& x) const { return (2.0 * x.segment<3>(nfree()).array() - 1.0).matrix(); }

  std::vector<double> physical(const Eigen::VectorXd& x) const {
    std::vector<double> v;
    const Eigen::VectorXd D = design(x);
    for (int i : pr->free_design) v.push_back(D[i]);
    if (pr->free_orientation) {
      v.push_back(phi(x));
      const Vec3 pv = p(x);
      v.insert(v.end(), {pv[0], pv[1], pv[2]});
    }
    return v;
  }
};

std::vector<Vec3> active_directions(const AnisotropyState& an, const Tensor3& R) {
  const auto [N1, N2] = structure_tensors(R);
  std::vector<Vec3> out;
  if (an.alpha1() > 0.5) out.push_back(recover_direction(N1));
  if (an.alpha2() > 0.5) out.push_back(recover_direction(N2));
  return out;
}

}  // namespace

InverseSolution invert_design(const InverseProblem& pr, const CmaConfig& config, int restarts,
                              const std::vector<std::string>& design_names) {
  if (!pr.model) throw InvalidArgument("inverse: no model");
  if (pr.C_targets.empty() || pr.C_targets.size() != pr.S_targets.size())
    throw InvalidArgument("inverse: targets missing or inconsistent");
  if (pr.free_design.empty() && !pr.free_orientation) throw InvalidArgument("inverse: no free variables");
  const auto nfree = static_cast<Eigen::Index>(pr.free_design.size());
  if (pr.lower.size() != nfree || pr.upper.size() != nfree || !pr.lower.allFinite() || !pr.upper.allFinite())
    throw InvalidArgument("inverse: every free design variable needs finite bounds");
  if (((pr.upper - pr.lower).array() <= 0.0).any()) throw InvalidArgument("inverse: empty bound interval");
  if (pr.design.size() != pr.model->network().architecture().design_dim)
    throw InvalidArgument("inverse: design vector size does not match the model");
  for (int i : pr.free_design)
    if (i < 0 || i >= pr.design.size()) throw InvalidArgument("inverse: free design index out of range");
  if (restarts < 1) throw InvalidArgument("inverse: restarts must be >= 1");

  const Mapping map{&pr};
  const int n = map.dim();
  const MaterialFrame base = pr.model->frame();
  const AnisotropyState& an = pr.model->anisotropy();
  auto objective = [&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd D = map.design(x);
    if (!pr.free_orientation) return design_objective(pr, D, base);
    const Vec3 p = map.p(x);
    if (p.norm() < 1e-12) return std::numeric_limits<double>::quiet_NaN();
    return design_objective(pr, D, make_frame(an, rodrigues(map.phi(x), p)));
  };

  InverseSolution sol;
  for (int i : pr.free_design)
    sol.variable_names.push_back(static_cast<std::size_t>(i) < design_names.size()
                                     ? design_names[static_cast<std::size_t>(i)]
                                     : "D" + std::to_string(i + 1));
  if (pr.free_orientation) sol.variable_names.insert(sol.variable_names.end(), {"phi", "p1", "p2", "p3"});

  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    CmaConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(r);
    c.lower = Eigen::VectorXd::Zero(n);
    c.upper = Eigen::VectorXd::Ones(n);
    if (r == 0 && config.mean0.size() == n) {
      c.mean0 = config.mean0;
    } else if (r == 0) {
      c.mean0 = Eigen::VectorXd::Constant(n, 0.5);
    } else {
      std::mt19937_64 rng(c.seed * 7919u + 17u);
      std::uniform_real_distribution<double> u(0.1, 0.9);
      c.mean0.resize(n);
      for (int k = 0; k < n; ++k) c.mean0[k] = u(rng);
    }
    sol.runs.push_back(cma_es(objective, c));
    if (sol.runs.back().f < best) {
      best = sol.runs.back().f;
      sol.best_run = r;
    }
  }
  const Eigen::VectorXd& x = sol.runs[static_cast<std::size_t>(sol.best_run)].x;
  sol.objective = best;
  sol.design = map.design(x);
  if (pr.free_orientation) {
    sol.phi = map.phi(x);
    sol.p_raw = map.p(x);
    sol.directions = active_directions(an, rodrigues(sol.phi, sol.p_raw));
  } else {
    sol.phi = an.phi;
    sol.p_raw = an.p_raw;
    if (base.cls != AnisotropyClass::iso) sol.directions = active_directions(an, an.rotation());
  }
  // Store the physical coordinates in the traces so reports need no mapping.
  for (auto& run : sol.runs)
    for (auto& h : run.history) {
      const auto v = map.physical(h.x_best);
      h.x_best = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
  return sol;
}

void write_trace_csv(const InverseSolution& sol, int run, const std::filesystem::path& path) {
  if (run < 0 || static_cast<std::size_t>(run) >= sol.runs.size()) throw InvalidArgument("trace: run out of range");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << "iter,f_best";
  for (const auto& n : sol.variable_names) os << ',' << n;
  os << '\n';
  char buf[64];
  for (const auto& h : sol.runs[static_cast<std::size_t>(run)].history) {
    std::snprintf(buf, sizeof buf, "%d,%.12e", h.iteration, h.f_best);
    os << buf;
    for (Eigen::Index i = 0; i < h.x_best.size(); ++i) {
      std::snprintf(buf, sizeof buf, ",%.12g", h.x_best[i]);
      os << buf;
    }
    os << '\n';
  }
}

nlohmann::json to_json(const InverseSolution& sol) {
  nlohmann::json j;
  j["objective"] = sol.objective;
  j["design"] = std::vector<double>(sol.design.data(), sol.design.data() + sol.design.size());
  j["phi"] = sol.phi;
  j["p_raw"] = {sol.p_raw[0], sol.p_raw[1], sol.p_raw[2]};
  nlohmann::json dirs = nlohmann::json::array();
  for (const auto& d : sol.directions) dirs.push_back({d[0], d[1], d[2]});
  j["directions"] = dirs;
  j["best_run"] = sol.best_run;
  j["variables"] = sol.variable_names;
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : sol.runs)
    runs.push_back({{"objective", r.f}, {"evaluations", r.evaluations}, {"generations", r.iterations},
                    {"converged", r.converged}});
  j["runs"] = runs;
  return j;
}

}  // namespace anisoforge::inverse
