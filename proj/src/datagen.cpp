#include "anisoforge/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "anisoforge/errors.hpp"

namespace anisoforge::datagen {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Eigen::MatrixXd lhs_draw(int n, int dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd out(n, dim);
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int d = 0; d < dim; ++d) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int i = 0; i < n; ++i) out(i, d) = (perm[static_cast<std::size_t>(i)] + unit(rng)) / n;
  }
  return out;
}

}  // namespace

Eigen::MatrixXd latin_hypercube(int n, int dim, std::uint64_t seed) {
  if (n <= 0 || dim <= 0) throw InvalidArgument("latin_hypercube: n and dim must be positive");
  std::mt19937_64 rng(seed);
  return lhs_draw(n, dim, rng);
}

std::vector<Tensor3> sample_F_lhs(int n, double delta, std::uint64_t seed) {
  if (n <= 0) throw InvalidArgument("sample_F_lhs: n must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("sample_F_lhs: delta must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const Eigen::MatrixXd u = lhs_draw(n, 9, rng);
    std::vector<Tensor3> out;
    out.reserve(static_cast<std::size_t>(n));
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      Tensor3 F;
      for (int k = 0; k < 9; ++k) {
        const int r = k / 3, c = k % 3;
        F(r, c) = (r == c ? 1.0 : 0.0) + delta * (2.0 * u(i, k) - 1.0);
      }
      if (!(F.determinant() > 0.1)) ok = false;
      out.push_back(F);
    }
    if (ok) return out;
  }
  throw NumericalError("sample_F_lhs: could not draw a design with det F > 0.1");
}

std::vector<Tensor3> sample_F_polar(int n, double lo, double hi, std::uint64_t seed) {
  if (n <= 0) throw InvalidArgument("sample_F_polar: n must be positive");
  if (!(lo > 0.0 && hi >= lo && std::isfinite(hi))) throw InvalidArgument("sample_F_polar: invalid stretch bounds");
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd u = lhs_draw(n, 3, rng);
  std::vector<Tensor3> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Vec3 lam = (lo + (hi - lo) * u.row(i).array()).matrix().transpose();
    const Tensor3 Q = random_rotation(rng);
    const Tensor3 R = random_rotation(rng);
    const Mat3 U = Q * lam.asDiagonal() * Q.transpose();
    out.push_back(R * (0.5 * (U + U.transpose())));
  }
  return out;
}

std::vector<std::size_t> dedupe_invariant_space(const std::vector<SymTensor3>& Cs, AnisotropyClass cls, double tol,
                                                const SymTensor3& N1, const SymTensor3& N2,
                                                const std::vector<Eigen::VectorXd>* designs) {
  if (designs && designs->size() != Cs.size()) throw InvalidArgument("dedupe: design list size mismatch");
  const int k = active_invariant_count(cls);
  std::vector<Eigen::VectorXd> keys;
  keys.reserve(Cs.size());
  for (std::size_t i = 0; i < Cs.size(); ++i) {
    const auto inv = invariants(Cs[i], N1, N2, 1.0, 1.0, cls);
    const Eigen::Index m = designs ? (*designs)[i].size() : 0;
    Eigen::VectorXd key(k + m);
    key.head(k) = inv.values.head(k);
    if (m > 0) key.tail(m) = (*designs)[i];
    keys.push_back(std::move(key));
  }
  std::vector<std::size_t> kept;
  std::multimap<double, std::size_t> index;  // first invariant of retained samples
  for (std::size_t i = 0; i < keys.size(); ++i) {
    bool dup = false;
    if (tol > 0.0) {
      for (auto it = index.lower_bound(keys[i][0] - tol); it != index.end() && it->first < keys[i][0] + tol; ++it) {
        if ((keys[it->second] - keys[i]).cwiseAbs().maxCoeff() < tol) {
          dup = true;
          break;
        }
      }
    }
    if (!dup) {
      kept.push_back(i);
      index.emplace(keys[i][0], i);
    }
  }
  return kept;
}

std::vector<Tensor3> dedupe_invariant_space(const std::vector<Tensor3>& Fs, AnisotropyClass cls, double tol,
                                            const SymTensor3& N1, const SymTensor3& N2) {
  std::vector<SymTensor3> Cs;
  Cs.reserve(Fs.size());
  for (const auto& F : Fs) Cs.push_back(cauchy_green(F));
  std::vector<Tensor3> out;
  for (std::size_t i : dedupe_invariant_space(Cs, cls, tol, N1, N2)) out.push_back(Fs[i]);
  return out;
}

ModelEval eval_neo_hookean(double c1, double c2, const SymTensor3& C) {
  const Metric m = make_metric(C);
  const Mat3 I = Mat3::Identity();
  ModelEval out;
  out.psi = 0.5 * c1 * (m.C.trace() - 3.0) - c1 * std::log(m.J) + 0.5 * c2 * (m.J - 1.0) * (m.J - 1.0);
  out.S = SymTensor3::from_matrix(c1 * (I - m.C_inv) + c2 * m.J * (m.J - 1.0) * m.C_inv);
  return out;
}

ModelEval eval_aniso_hgo(const HgoParams& p, const SymTensor3& C) {
  const Metric m = make_metric(C);
  const Mat3 I = Mat3::Identity();
  const Mat3 N1 = p.n1.normalized() * p.n1.normalized().transpose();
  const Mat3 N2 = p.n2.normalized() * p.n2.normalized().transpose();
  const double I4 = (m.C.cwiseProduct(N1)).sum();
  const double I6 = (m.C.cwiseProduct(N2)).sum();
  const double a = I4 - 1.0, b = I6 - 1.0;
  const double e4 = std::exp(p.c4 * a * a * a * a);
  const double e6 = std::exp(p.c5 * b * b * b * b);
  ModelEval out;
  out.psi = p.c1 * (m.C.trace() - 3.0) + p.c1 / p.c2 * (std::pow(m.J, -2.0 * p.c2) - 1.0) + p.c3 * (e4 + e6 - 2.0);
  const Mat3 S = 2.0 * p.c1 * I - 2.0 * p.c1 * std::pow(m.det, -p.c2) * m.C_inv +
                 8.0 * p.c3 * p.c4 * a * a * a * e4 * N1 + 8.0 * p.c3 * p.c5 * b * b * b * e6 * N2;
  out.S = SymTensor3::from_matrix(S);
  return out;
}

double lame_lambda(double mu, double nu) {
  if (!(nu < 0.5) || !(nu > -1.0)) throw InvalidArgument("Poisson ratio must lie in (-1, 0.5)");
  return 2.0 * mu * nu / (1.0 - 2.0 * nu);
}

ModelEval eval_coupled_neo_hookean(double mu, double lambda, const SymTensor3& C) {
  const Metric m = make_metric(C);
  const Mat3 I = Mat3::Identity();
  const double J2 = m.J * m.J;
  ModelEval out;
  out.psi = 0.5 * mu * (m.C.trace() - std::log(J2) - 3.0) + 0.25 * lambda * (J2 - std::log(J2) - 1.0);
  out.S = SymTensor3::from_matrix(mu * (I - m.C_inv) + 0.5 * lambda * (J2 * m.C_inv - m.C_inv));
  return out;
}

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::neo_hookean: return "neo-hookean";
    case ModelKind::aniso_hgo: return "aniso-hgo";
    case ModelKind::coupled_neo_hookean: return "coupled-neo-hookean";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "neo-hookean" || name == "neo_hookean") return ModelKind::neo_hookean;
  if (name == "aniso-hgo" || name == "aniso_hgo" || name == "hgo") return ModelKind::aniso_hgo;
  if (name == "coupled-neo-hookean" || name == "coupled_neo_hookean") return ModelKind::coupled_neo_hookean;
  throw InvalidArgument("unknown model '" + name + "' (neo-hookean, aniso-hgo, coupled-neo-hookean)");
}

std::vector<double> GridAxis::values() const {
  if (count < 1) throw InvalidArgument("grid axis '" + name + "' needs at least one value");
  std::vector<double> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
  return v;
}

ModelSpec ModelSpec::defaults(ModelKind kind, AnisotropyClass cls, int count) {
  ModelSpec s;
  s.kind = kind;
  switch (kind) {
    case ModelKind::neo_hookean:
      s.cls = AnisotropyClass::iso;
      s.axes = {{"c1", 1.0, 5.0, count}, {"c2", 1.0, 5.0, count}};
      break;
    case ModelKind::aniso_hgo:
      if (cls == AnisotropyClass::iso) throw InvalidArgument("aniso-hgo needs class trans or ortho");
      s.cls = cls;
      s.axes = {{"c1", 1.0, 5.0, count}, {"c4", 3.0, 7.0, count}};
      if (cls == AnisotropyClass::ortho) s.axes.push_back({"c5", 2.0, 6.0, count});
      break;
    case ModelKind::coupled_neo_hookean:
      s.cls = AnisotropyClass::iso;
      s.axes = {{"mu", 0.5, 2.0, count}};
      break;
  }
  return s;
}

ModelEval ModelSpec::evaluate(const Eigen::VectorXd& D, const SymTensor3& C) const {
  if (D.size() != static_cast<Eigen::Index>(axes.size())) throw InvalidArgument("model: design size mismatch");
  auto lookup = [&](const std::string& name, double fallback) {
    for (std::size_t i = 0; i < axes.size(); ++i)
      if (axes[i].name == name) return D[static_cast<Eigen::Index>(i)];
    return fallback;
  };
  switch (kind) {
    case ModelKind::neo_hookean:
      return eval_neo_hookean(lookup("c1", 1.0), lookup("c2", 1.0), C);
    case ModelKind::aniso_hgo: {
      HgoParams p = hgo;
      p.c1 = lookup("c1", p.c1);
      p.c2 = lookup("c2", p.c2);
      p.c3 = lookup("c3", p.c3);
      p.c4 = lookup("c4", p.c4);
      p.c5 = cls == AnisotropyClass::ortho ? lookup("c5", p.c5) : 0.0;
      return eval_aniso_hgo(p, C);
    }
    case ModelKind::coupled_neo_hookean: {
      const double mu_v = lookup("mu", mu);
      return eval_coupled_neo_hookean(mu_v, lame_lambda(mu_v, lookup("nu", nu)), C);
    }
  }
  throw InvalidArgument("model: unknown kind");
}

std::vector<Vec3> ModelSpec::directions() const {
  if (kind != ModelKind::aniso_hgo) return {};
  if (cls == AnisotropyClass::ortho) return {hgo.n1.normalized(), hgo.n2.normalized()};
  return {hgo.n1.normalized()};
}

namespace {

std::vector<Tensor3> draw_F(const SamplerSpec& s, std::uint64_t seed) {
  if (s.kind == SamplerKind::lhs) return sample_F_lhs(s.n_F, s.delta, seed);
  return sample_F_polar(s.n_F, s.stretch_lo, s.stretch_hi, seed);
}

}  // namespace

Dataset build_dataset(const ModelSpec& model, const SamplerSpec& sampler, std::uint64_t seed) {
  if (model.axes.empty()) throw InvalidArgument("build_dataset: empty parameter grid");
  std::vector<std::vector<double>> values;
  std::size_t sets = 1;
  for (const auto& a : model.axes) {
    values.push_back(a.values());
    sets *= values.back().size();
  }
  if (sets == 0) throw InvalidArgument("build_dataset: empty parameter grid");

  SymTensor3 N1 = SymTensor3::zero(), N2 = SymTensor3::zero();
  const auto dirs = model.directions();
  if (!dirs.empty()) N1 = outer(dirs[0]);
  if (dirs.size() > 1) N2 = outer(dirs[1]);
  auto prepare = [&](std::uint64_t s) {
    auto F = draw_F(sampler, s);
    if (sampler.dedupe_tol > 0.0) F = dedupe_invariant_space(F, model.cls, sampler.dedupe_tol, N1, N2);
    return F;
  };

  Dataset data;
  for (const auto& a : model.axes) data.design_names.push_back(a.name);
  std::vector<Tensor3> shared;
  if (!sampler.independent) shared = prepare(seed);

  const int dim = static_cast<int>(model.axes.size());
  for (std::size_t k = 0; k < sets; ++k) {
    Eigen::VectorXd D(dim);
    std::size_t rem = k;
    for (int i = dim - 1; i >= 0; --i) {
      const auto& v = values[static_cast<std::size_t>(i)];
      D[i] = v[rem % v.size()];
      rem /= v.size();
    }
    const std::vector<Tensor3> own = sampler.independent ? prepare(derive_seed(seed, k + 1)) : std::vector<Tensor3>{};
    const auto& Fs = sampler.independent ? own : shared;
    for (const auto& F : Fs) {
      SampleRecord r;
      r.D = D;
      r.C = cauchy_green(F);
      r.S = model.evaluate(D, r.C).S;
      data.records.push_back(std::move(r));
    }
  }

  nlohmann::json meta;
  meta["model"] = to_string(model.kind);
  meta["class"] = to_string(model.cls);
  nlohmann::json axes = nlohmann::json::array();
  for (const auto& a : model.axes) axes.push_back({{"name", a.name}, {"lo", a.lo}, {"hi", a.hi}, {"count", a.count}});
  meta["grid"] = axes;
  if (model.kind == ModelKind::aniso_hgo) {
    nlohmann::json fixed = nlohmann::json::object();
    const std::pair<const char*, double> all[] = {{"c1", model.hgo.c1}, {"c2", model.hgo.c2}, {"c3", model.hgo.c3},
                                                  {"c4", model.hgo.c4}, {"c5", model.hgo.c5}};
    for (const auto& [name, v] : all) {
      const bool on_grid = std::any_of(model.axes.begin(), model.axes.end(), [&](const GridAxis& a) { return a.name == name; });
      if (!on_grid && !(model.cls == AnisotropyClass::trans && std::string(name) == "c5")) fixed[name] = v;
    }
    meta["fixed"] = fixed;
  }
  if (model.kind == ModelKind::coupled_neo_hookean) meta["fixed"] = {{"nu", model.nu}, {"mu", model.mu}};
  nlohmann::json jd = nlohmann::json::array();
  for (const auto& d : dirs) jd.push_back({d[0], d[1], d[2]});
  meta["directions"] = jd;
  nlohmann::json js;
  js["kind"] = sampler.kind == SamplerKind::lhs ? "lhs" : "polar";
  js["n_F"] = sampler.n_F;
  if (sampler.kind == SamplerKind::lhs)
    js["delta"] = sampler.delta;
  else
    js["stretch_bounds"] = {sampler.stretch_lo, sampler.stretch_hi};
  js["independent"] = sampler.independent;
  js["dedupe_tol"] = sampler.dedupe_tol;
  meta["sampler"] = js;
  meta["seed"] = seed;
  meta["units"] = "MPa";
  data.metadata = meta;
  return data;
}

IsotropyReport isotropy_probe(const std::function<SymTensor3(const SymTensor3&)>& stress, double gamma_max,
                              int steps) {
  if (steps < 2) throw InvalidArgument("isotropy_probe: need at least two shear steps");
  IsotropyReport rep;
  const double s2 = 1.0 / std::sqrt(2.0);
  const double s3 = 1.0 / std::sqrt(3.0);
  const Vec3 e1 = Vec3::UnitX(), e2 = Vec3::UnitY(), e3 = Vec3::UnitZ();
  const Vec3 d1 = Vec3(s3, s3, s3);
  const Vec3 d2 = Vec3(s2, -s2, 0.0);
  rep.planes = {{e1, e2}, {e2, e3}, {e3, e1}, {e2, e1}, {Vec3(s2, s2, 0.0), e3}, {d1, d2}};
  for (int k = 1; k <= steps; ++k) rep.gammas.push_back(gamma_max * k / steps);
  for (const auto& [a, b] : rep.planes) {
    std::vector<double> curve;
    for (double g : rep.gammas) {
      const Tensor3 F = Mat3::Identity() + g * a * b.transpose();
      curve.push_back(stress(cauchy_green(F)).frobenius_norm());
    }
    rep.curves.push_back(std::move(curve));
  }
  for (std::size_t j = 0; j < rep.gammas.size(); ++j) {
    double lo = INFINITY, hi = 0.0;
    for (const auto& c : rep.curves) {
      lo = std::min(lo, c[j]);
      hi = std::max(hi, c[j]);
    }
    if (hi > 0.0) rep.deviation = std::max(rep.deviation, (hi - lo) / hi);
  }
  return rep;
}

}  // namespace anisoforge::datagen
