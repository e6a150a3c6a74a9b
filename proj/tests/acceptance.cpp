// Desk-scale acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.
//   acceptance [out_dir] [--quick]
// Artifacts go to out_dir (default acceptance_out). --quick skips the
// criteria that need the desk-scale training runs.

#include <malloc.h>

#include <algorithm>
#include <chrono>
#include <cstring>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "anisoforge/errors.hpp"
#include "anisoforge/fem.hpp"
#include "anisoforge/inverse.hpp"
#include "anisoforge/training.hpp"
#include "support.hpp"

using namespace anisoforge;
namespace fs = std::filesystem;
using Eigen::VectorXd;

namespace {

constexpr FormulationMode kModes[] = {FormulationMode::polyconvex, FormulationMode::nonpoly_linearC,
                                      FormulationMode::unconstrained};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SymTensor3 bump(const SymTensor3& C, int a, double h) {
  SymTensor3 out = C;
  out[a] += h;
  return out;
}

/// Fourth-order central difference of f at step h.
template <class F>
auto fd4(const F& f, double h) -> decltype(f(h)) {
  return (8.0 * (f(h) - f(-h)) - (f(2 * h) - f(-2 * h))) / (12.0 * h);
}

/// Relative error with a floor, so that entries near zero are judged on the
/// scale of the whole quantity.
double rel_err(double a, double b, double floor) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor}); }

// ---------------------------------------------------------------------------
// Shared desk-scale training runs.

const Vec3 kN1(1.0 / std::sqrt(3.0), std::sqrt(2.0) / std::sqrt(3.0), 0.0);

datagen::ModelSpec desk_spec(AnisotropyClass cls, int grid = 3) {
  if (cls == AnisotropyClass::iso) return datagen::ModelSpec::defaults(datagen::ModelKind::neo_hookean, cls, grid);
  auto spec = datagen::ModelSpec::defaults(datagen::ModelKind::aniso_hgo, AnisotropyClass::trans, grid);
  spec.cls = cls;
  if (cls == AnisotropyClass::ortho) spec.hgo.c5 = 4.0;  // (c1, c4) grid, second family fixed
  return spec;
}

datagen::SamplerSpec desk_sampler(int n_F = 100) {
  datagen::SamplerSpec s;
  s.n_F = n_F;
  s.independent = true;
  return s;
}

training::TrainConfig desk_train() {
  training::TrainConfig c;
  c.epochs = 20000;
  c.seed = 1;
  c.log_every = 100;
  return c;
}

constexpr std::uint64_t kDataSeed = 11;

struct DeskRun {
  Dataset data;
  training::TrainResult result;
  double seconds = 0.0;
};

DeskRun train_desk(AnisotropyClass cls, const fs::path& out) {
  DeskRun r;
  r.data = datagen::build_dataset(desk_spec(cls), desk_sampler(), kDataSeed);
  training::TrainConfig c = desk_train();
  c.log_csv = out / fmt("train_%s.csv", to_string(cls));
  c.checkpoint_path = out / fmt("model_%s.json", to_string(cls));
  const auto t0 = std::chrono::steady_clock::now();
  r.result = training::train(r.data, c);
  r.seconds = seconds_since(t0);
  return r;
}

/// Model for the inverse criterion. Class and direction are given, so the
/// fit is not limited by discovery; the 5x5 grid is needed for off-grid designs.
DeskRun train_inverse_model(const fs::path& out) {
  DeskRun r;
  r.data = datagen::build_dataset(desk_spec(AnisotropyClass::trans, 5), desk_sampler(40), kDataSeed);
  training::TrainConfig c = desk_train();
  c.epochs = 170000;
  c.log_every = 500;
  c.known_class = AnisotropyClass::trans;
  c.known_directions = {kN1};
  c.log_csv = out / "train_trans_inverse.csv";
  c.checkpoint_path = out / "model_trans_inverse.json";
  const auto t0 = std::chrono::steady_clock::now();
  r.result = training::train(r.data, c);
  r.seconds = seconds_since(t0);
  return r;
}

// ---------------------------------------------------------------------------

struct NormalizationStats {
  double max_S[3] = {0, 0, 0};
  double max_psi[3] = {0, 0, 0};
  double seconds = 0.0;
};

NormalizationStats normalization_suite() {
  NormalizationStats st;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  for (int m = 0; m < 3; ++m) {
    for (int k = 0; k < 1000; ++k) {
      testing::ModelOptions o;
      o.mode = kModes[m];
      Surrogate model = testing::random_model(rng, o);
      // Cover the fixed classes as well as continuous alphas.
      if (k % 4 == 1) model.anisotropy().fixed_class = AnisotropyClass::iso;
      if (k % 4 == 2) model.anisotropy().fixed_class = AnisotropyClass::trans;
      if (k % 4 == 3) model.anisotropy().fixed_class = AnisotropyClass::ortho;
      const VectorXd D = testing::random_design(rng, 2);
      st.max_S[m] = std::max(st.max_S[m], model.stress(SymTensor3::identity(), D).max_abs());
      st.max_psi[m] = std::max(st.max_psi[m], std::abs(model.psi_total(SymTensor3::identity(), D)));
    }
  }
  st.seconds = seconds_since(t0);
  return st;
}

Outcome ac1(const NormalizationStats& st) {
  bool ok = st.seconds < 60.0;
  std::string d;
  for (int m = 0; m < 3; ++m) {
    ok = ok && st.max_S[m] < 1e-8 && st.max_psi[m] < 1e-10;
    d += fmt("%s |S|=%.1e |psi|=%.1e; ", to_string(kModes[m]), st.max_S[m], st.max_psi[m]);
  }
  return {ok, d + fmt("%.1fs", st.seconds)};
}

Outcome ac2() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(202);
  double e_grad = 0, e_hess = 0, e_stress = 0, e_tan = 0, e_train = 0;

  // Network input derivatives.
  for (auto cm : {ConstraintMode::polyconvex, ConstraintMode::unconstrained}) {
    PicnnArchitecture a;
    a.design_dim = 2;
    a.design_width = 4;
    a.invariant_width = 4;
    a.layers = 3;
    a.mode = cm;
    Picnn net = Picnn::initialized(a, 7);
    std::uniform_real_distribution<double> u(-0.5, 0.5), ux(-1.0, 4.0);
    for (Eigen::Index i = 0; i < net.parameter_count(); ++i) net.parameters()[i] += 0.3 * u(rng);
    for (int k = 0; k < 20; ++k) {
      Vec8 x;
      for (int i = 0; i < 8; ++i) x[i] = ux(rng);
      const VectorXd D = testing::random_design(rng, 2);
      const Vec8 g = net.grad_input(x, D);
      const Mat8 H = net.hess_input(x, D);
      for (int i = 0; i < 8; ++i) {
        auto shifted = [&](double t) {
          Vec8 y = x;
          y[i] += t;
          return y;
        };
        const double fd = fd4([&](double t) { return net.forward(shifted(t), D); }, 1e-3);
        e_grad = std::max(e_grad, rel_err(g[i], fd, 1e-4 * g.lpNorm<Eigen::Infinity>()));
        const Vec8 hfd = fd4([&](double t) -> Vec8 { return net.grad_input(shifted(t), D); }, 1e-3);
        for (int j = 0; j < 8; ++j)
          e_hess = std::max(e_hess, rel_err(H(j, i), hfd[j], 1e-4 * H.lpNorm<Eigen::Infinity>()));
      }
    }
  }

  // Stress and tangent of the full energy in every formulation.
  for (auto mode : kModes) {
    testing::ModelOptions o;
    o.mode = mode;
    o.design_width = 4;
    o.invariant_width = 4;
    const Surrogate m = testing::random_model(rng, o);
    for (int k = 0; k < 20; ++k) {
      const auto C = testing::random_C(rng);
      const VectorXd D = testing::random_design(rng, 2);
      const SymTensor3 S = m.stress(C, D);
      const Tangent66 T = m.tangent(C, D);
      for (int a = 0; a < 6; ++a) {
        const double w = SymTensor3::kWeight[static_cast<std::size_t>(a)];
        const double fd = 2.0 / w * fd4([&](double t) { return m.psi_total(bump(C, a, t), D); }, 1e-4);
        e_stress = std::max(e_stress, rel_err(S[a], fd, 1e-4 * S.max_abs()));
        const Vec6 tfd =
            2.0 / w * fd4([&](double t) -> Vec6 { return m.stress(bump(C, a, t), D).components(); }, 1e-4);
        for (int b = 0; b < 6; ++b)
          e_tan = std::max(e_tan, rel_err(T(b, a), tfd[b], 1e-4 * T.lpNorm<Eigen::Infinity>()));
      }
    }
  }

  // Training-loss gradient with respect to every trainable scalar.
  {
    auto spec = datagen::ModelSpec::defaults(datagen::ModelKind::aniso_hgo, AnisotropyClass::ortho, 2);
    datagen::SamplerSpec s;
    s.n_F = 5;
    const Dataset d = datagen::build_dataset(spec, s, 3);
    for (auto mode : kModes) {
      PicnnArchitecture a;
      a.design_dim = d.design_dim();
      a.design_width = 4;
      a.invariant_width = 4;
      a.layers = 2;
      a.mode = network_mode(mode);
      Picnn net = Picnn::initialized(a, 5);
      net.set_design_scaling(d.design_lower(), d.design_upper() - d.design_lower());
      AnisotropyState an;
      an.alpha_bar1 = 0.3;
      an.alpha_bar2 = -0.2;
      an.phi = 0.7;
      an.p_raw = Vec3(0.3, -0.5, 0.8);
      EnergyConfig ec;
      ec.mode = mode;
      const Surrogate m(net, an, ec);
      const auto td = training::prepare(d, 1.0, true);
      const auto layout = training::trainable_layout(m, false);
      VectorXd gt;
      training::AnisoGradient ga;
      training::loss(m, td, 1e-2, 0.25, &gt, &ga);
      const VectorXd g = training::pack_gradient(gt, ga, layout);
      const VectorXd z = training::pack(m, layout);
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        auto f = [&](double t) {
          VectorXd zt = z;
          zt[i] += t;
          Surrogate mt = m;
          training::unpack(zt, layout, mt);
          return training::loss(mt, td, 1e-2, 0.25).total();
        };
        const double fd = fd4(f, 1e-4 * std::max(1.0, std::abs(z[i])));
        e_train = std::max(e_train, rel_err(g[i], fd, 1e-4 * g.lpNorm<Eigen::Infinity>()));
      }
    }
  }
  const double t = seconds_since(t0);
  const bool ok = e_grad < 1e-5 && e_hess < 1e-4 && e_stress < 1e-5 && e_tan < 1e-4 && e_train < 1e-5 && t < 300.0;
  return {ok, fmt("grad %.1e hess %.1e stress %.1e tangent %.1e train %.1e; %.1fs", e_grad, e_hess, e_stress, e_tan,
                  e_train, t)};
}

Outcome ac3() {
  PicnnArchitecture a;
  a.design_dim = 2;
  a.design_width = 30;
  a.invariant_width = 40;
  a.layers = 3;
  Picnn net = Picnn::initialized(a, 33);
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(-0.5, 0.5), ux(-2.0, 6.0);
  for (Eigen::Index i = 0; i < net.parameter_count(); ++i) net.parameters()[i] += 0.2 * u(rng);
  auto point = [&] {
    Vec8 x;
    for (int i = 0; i < 8; ++i) x[i] = ux(rng);
    return x;
  };
  double min_grad = 1e300, min_eig = 1e300, worst_mid = -1e300;
  for (int k = 0; k < 10000; ++k) {
    const Vec8 x = point(), y = point();
    const VectorXd D = testing::random_design(rng, 2);
    const auto vgh = net.value_grad_hess(x, D);
    min_grad = std::min(min_grad, vgh.grad.minCoeff());
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Mat8>(vgh.hess, Eigen::EigenvaluesOnly).eigenvalues()[0]);
    const double fy = net.forward(y, D), fm = net.forward(0.5 * (x + y), D);
    const double gap = fm - 0.5 * (vgh.value + fy);
    worst_mid = std::max(worst_mid, gap / std::max(1.0, std::abs(vgh.value) + std::abs(fy)));
  }
  const bool ok = min_grad >= -1e-12 && min_eig >= -1e-9 && worst_mid <= 1e-12;
  return {ok, fmt("min dPsi/dI %.2e, min eig %.2e, worst midpoint gap %.2e", min_grad, min_eig, worst_mid)};
}

Outcome ac4() {
  std::mt19937_64 rng(404);
  double worst = 0.0;
  for (auto mode : kModes) {
    testing::ModelOptions o;
    o.mode = mode;
    const Surrogate m = testing::random_model(rng, o);
    const Tensor3 R = m.anisotropy().rotation();
    for (int k = 0; k < 1000 / 3 + 1; ++k) {
      const auto C = testing::random_C(rng);
      const VectorXd D = testing::random_design(rng, 2);
      const Tensor3 Q = random_rotation(rng);
      const SymTensor3 S = m.stress(C, D, make_frame(m.anisotropy(), R));
      const SymTensor3 Sq = m.stress(rotate_into(C, Q), D, make_frame(m.anisotropy(), Q.transpose() * R));
      worst = std::max(worst, (Sq.components() - rotate_into(S, Q).components()).lpNorm<Eigen::Infinity>() /
                                  std::max(1.0, S.max_abs()));
    }
  }
  return {worst < 1e-9, fmt("max deviation %.2e over 1002 draws", worst)};
}

Outcome ac5(const DeskRun& iso, const DeskRun& trans, const DeskRun& ortho) {
  auto alphas = [](const DeskRun& r) {
    const auto& an = r.result.checkpoint.model.anisotropy();
    return std::pair{an.alpha1(), an.alpha2()};
  };
  const auto [i1, i2] = alphas(iso);
  const auto [t1, t2] = alphas(trans);
  const auto [o1, o2] = alphas(ortho);
  const bool iso_ok = i1 < 0.05 && i2 < 0.05;
  const bool trans_ok = (t1 > 0.5) != (t2 > 0.5);
  const bool ortho_ok = o1 > 0.5 && o2 > 0.5;
  const double tmax = std::max({iso.seconds, trans.seconds, ortho.seconds});
  const bool ok = iso_ok && trans_ok && ortho_ok && tmax <= 1800.0;
  return {ok, fmt("iso (%.3f, %.3f) trans (%.3f, %.3f) ortho (%.3f, %.3f); slowest run %.0fs", i1, i2, t1, t2, o1, o2,
                  tmax)};
}

Outcome ac6(const DeskRun& trans) {
  const auto& dirs = trans.result.report.directions;
  if (dirs.size() != 1) return {false, fmt("%zu active directions", dirs.size())};
  const double c = std::abs(dirs[0].n.dot(kN1));
  return {c > 0.99, fmt("|n.n_true| = %.5f, n = (%.4f, %.4f, %.4f)", c, dirs[0].n[0], dirs[0].n[1], dirs[0].n[2])};
}

inverse::CmaConfig inverse_cma() {
  inverse::CmaConfig c;
  c.sigma0 = 0.3;
  c.max_evaluations = 6000;
  c.seed = 5;
  return c;
}

Dataset reference_targets(const Eigen::Vector2d& D, const Vec3& n1, std::uint64_t seed) {
  auto spec = desk_spec(AnisotropyClass::trans);
  spec.hgo.n1 = n1;
  spec.axes = {{"c1", D[0], D[0], 1}, {"c4", D[1], D[1], 1}};
  datagen::SamplerSpec s;
  s.n_F = 50;
  return datagen::build_dataset(spec, s, seed);
}

Outcome ac7(const DeskRun& trans, const fs::path& out) {
  const Surrogate& model = trans.result.checkpoint.model;
  const VectorXd lo = trans.data.design_lower(), hi = trans.data.design_upper();
  std::string detail = fmt("model loss %.3g (%.0fs); ", trans.result.report.final_data_loss, trans.seconds);
  bool ok = true;

  auto solve = [&](const Dataset& targets, bool free_orientation, const char* tag) {
    const auto pr = inverse::InverseProblem::from_dataset(model, targets, lo, hi, free_orientation);
    const auto sol = inverse::invert_design(pr, inverse_cma(), 5, {"c1", "c4"});
    std::ofstream(out / fmt("invert_%s.json", tag)) << inverse::to_json(sol).dump(2);
    return sol;
  };

  const Eigen::Vector2d seen(3.0, 5.0), unseen(2.2, 4.4);
  const auto s1 = solve(reference_targets(seen, kN1, 71), false, "seen");
  const double e1 = ((s1.design - seen).array() / seen.array()).abs().maxCoeff();
  ok = ok && e1 < 0.01;
  detail += fmt("seen err %.2f%%; ", 100 * e1);

  const auto s2 = solve(reference_targets(unseen, kN1, 72), false, "unseen");
  const double e2 = ((s2.design - unseen).array() / unseen.array()).abs().maxCoeff();
  ok = ok && e2 < 0.05;
  detail += fmt("unseen err %.2f%%; ", 100 * e2);

  const Vec3 n_rot(1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0), 0.0);
  const auto s3 = solve(reference_targets(seen, n_rot, 73), true, "rotated");
  const double c = s3.directions.size() == 1 ? std::abs(s3.directions[0].dot(n_rot)) : 0.0;
  ok = ok && c > 0.99;
  detail += fmt("rotated |n.n_true| %.5f (D = %.3f, %.3f)", c, s3.design[0], s3.design[1]);
  return {ok, detail};
}

Outcome ac8(const DeskRun& trans) {
  const Surrogate& model = trans.result.checkpoint.model;
  const Eigen::Vector2d D(2.6, 5.7);
  inverse::InverseProblem pr;
  pr.model = &model;
  std::mt19937_64 rng(808);
  for (int k = 0; k < 50; ++k) {
    pr.C_targets.push_back(testing::random_C(rng, 0.2));
    pr.S_targets.push_back(model.stress(pr.C_targets.back(), D));
  }
  pr.design = D;
  pr.free_design = {0, 1};
  pr.lower = trans.data.design_lower();
  pr.upper = trans.data.design_upper();
  inverse::CmaConfig c = inverse_cma();
  c.target = 1e-24;
  c.max_evaluations = 20000;
  const auto sol = inverse::invert_design(pr, c, 5);
  const double e = ((sol.design - D).array() / D.array()).abs().maxCoeff();
  return {sol.objective < 1e-12 && e < 1e-4, fmt("objective %.2e, max rel err %.2e", sol.objective, e)};
}

Outcome ac9() {
  using namespace inverse;
  CmaConfig c;
  c.mean0 = VectorXd::Constant(4, 1.0);
  c.sigma0 = 0.5;
  c.target = 1e-10;
  c.max_evaluations = 5000;
  const auto sph = cma_es([](const VectorXd& x) { return x.squaredNorm(); }, c);
  c.mean0 = VectorXd::Constant(2, -1.0);
  c.target = 1e-6;
  c.max_evaluations = 20000;
  const auto ros = cma_es(
      [](const VectorXd& x) { return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2); }, c);
  const SymTensor3 N = outer(kN1);
  NmConfig nm;
  nm.tolerance = 1e-12;
  const auto r = nelder_mead(
      [&](const VectorXd& x) {
        const SymTensor3 d = outer(Vec3(x[0], x[1], x[2]).normalized()) - N;
        return d.ddot(d);
      },
      nm, Eigen::Vector3d(0.2, 0.9, 0.3));
  const double dir_err = 1.0 - std::abs(Vec3(r.x[0], r.x[1], r.x[2]).normalized().dot(kN1));
  const bool ok = sph.f < 1e-10 && sph.evaluations <= 5000 && ros.f < 1e-6 && ros.evaluations <= 20000 && dir_err < 1e-6;
  return {ok, fmt("sphere %.1e in %ld evals, Rosenbrock %.1e in %ld evals, direction err %.1e", sph.f, sph.evaluations,
                  ros.f, ros.evaluations, dir_err)};
}

Outcome ac10(const DeskRun& trans, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const Surrogate& model = trans.result.checkpoint.model;
  const Eigen::Vector2d D(3.0, 5.0);
  const fem::Material mat = fem::surrogate_material(model, D, model.frame());

  // Patch test: affine displacement on one element.
  std::mt19937_64 rng(1010);
  double patch = 0.0;
  {
    const fem::Mesh m = fem::box_mesh(1.0, 1.0, 1.0, 1, 1, 1);
    for (int k = 0; k < 5; ++k) {
      const Tensor3 F = testing::random_F(rng, 0.15);
      fem::Dirichlet bc;
      for (int a = 0; a < m.node_count(); ++a) {
        const Vec3 u = (F - Mat3::Identity()) * m.nodes.col(a);
        for (int d = 0; d < 3; ++d) {
          bc.dofs.push_back(3 * a + d);
          bc.values.push_back(u[d]);
        }
      }
      const auto st = fem::solve_static(m, bc, mat, 1, 1e-9, 5);
      const SymTensor3 S = model.stress(cauchy_green(F), D);
      for (const auto& p : st.points[0])
        patch = std::max(patch, (p.S.components() - S.components()).lpNorm<Eigen::Infinity>());
    }
  }

  // Consistent tangent against differences of the internal force.
  double tangent = 0.0;
  {
    const fem::Mesh m = fem::box_mesh(2.0, 1.0, 1.0, 2, 1, 1);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    VectorXd disp(m.dof_count());
    for (Eigen::Index i = 0; i < disp.size(); ++i) disp[i] = u(rng);
    VectorXd f;
    Eigen::MatrixXd K;
    fem::assemble(m, mat, disp, &f, &K);
    const double h = 1e-6;
    for (Eigen::Index j = 0; j < disp.size(); ++j) {
      VectorXd up = disp, um = disp, fp, fm;
      up[j] += h;
      um[j] -= h;
      fem::assemble(m, mat, up, &fp, nullptr);
      fem::assemble(m, mat, um, &fm, nullptr);
      tangent = std::max(tangent, ((fp - fm) / (2 * h) - K.col(j)).norm() / std::max(1.0, K.col(j).norm()));
    }
  }

  // Orientation inversion on the beam.
  fem::FemConfig cfg;
  cfg.design = D;
  inverse::NmConfig nm;
  nm.initial_scale = 0.5;
  nm.max_iterations = 200;
  nm.tolerance = 1e-4;
  const auto res = fem::invert_orientation(model, cfg, 5, nm, 1);
  double lo = 1e300, hi = 0.0;
  std::ofstream csv(out / "fem_invert_runs.csv");
  csv << "run,phi,p1,p2,p3,vm_max,evaluations,failed\n";
  for (std::size_t k = 0; k < res.runs.size(); ++k) {
    const auto& r = res.runs[k];
    csv << k << ',' << r.phi << ',' << r.p_raw[0] << ',' << r.p_raw[1] << ',' << r.p_raw[2] << ',' << r.vm_max << ','
        << r.result.evaluations << ',' << r.failed << '\n';
    if (r.failed) continue;
    lo = std::min(lo, r.result.f);
    hi = std::max(hi, r.result.f);
  }
  const bool all_ok = std::none_of(res.runs.begin(), res.runs.end(), [](const auto& r) { return r.failed; });
  const double spread = (hi - lo) / lo;
  const double t = seconds_since(t0);
  const bool ok = patch < 1e-6 && tangent < 1e-4 && all_ok && spread <= 0.02 && t <= 1200.0;
  return {ok, fmt("patch %.1e, tangent %.1e, objective spread %.2f%% (vm %.4g..%.4g), %.0fs", patch, tangent,
                  100 * spread, lo, hi, t)};
}

Outcome ac11(const NormalizationStats& st) {
  std::mt19937_64 rng(1111);
  testing::ModelOptions o;
  o.mode = FormulationMode::nonpoly_linearC;
  int identical = 0;
  const int n = 200;
  for (int k = 0; k < n; ++k) {
    Surrogate m = testing::random_model(rng, o);
    const auto C = testing::random_C(rng);
    const VectorXd D = testing::random_design(rng, 2);
    const Tangent66 a = m.tangent(C, D, true), b = m.tangent(C, D, false);
    identical += std::memcmp(a.data(), b.data(), sizeof(double) * 36) == 0;
  }
  bool norm_ok = true;
  for (int m = 1; m < 3; ++m) norm_ok = norm_ok && st.max_S[m] < 1e-8 && st.max_psi[m] < 1e-10;
  return {identical == n && norm_ok, fmt("%d/%d tangents bitwise identical; fallback normalization %s", identical, n,
                                         norm_ok ? "ok" : "failed")};
}

Outcome ac12(const DeskRun& iso, const fs::path& out) {
  const auto runs = training::sample_size_study(desk_spec(AnisotropyClass::iso), desk_sampler(), {20, 50}, desk_train(),
                                                kDataSeed);
  std::vector<std::pair<int, const std::vector<double>*>> curves;
  for (const auto& r : runs) curves.emplace_back(r.n_F, &r.report.loss);
  curves.emplace_back(100, &iso.result.report.loss);
  for (const auto& [n, loss] : curves) {
    std::ofstream f(out / fmt("study_loss_n%d.csv", n));
    f << "epoch,loss\n";
    for (std::size_t e = 0; e < loss->size(); e += 100) f << e << ',' << (*loss)[e] << '\n';
  }
  const double l20 = runs[0].report.final_loss, l50 = runs[1].report.final_loss;
  const double l100 = iso.result.report.final_loss;
  bool produced = true;
  for (const auto& [n, loss] : curves) produced = produced && loss->size() == 20000;
  return {produced && l100 <= 2.0 * l20, fmt("final loss n20 %.3e, n50 %.3e, n100 %.3e (ratio 100/20 = %.2f)", l20, l50,
                                             l100, l100 / l20)};
}

}  // namespace

int main(int argc, char** argv) {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  fs::path out = "acceptance_out";
  bool quick = false;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--quick")
      quick = true;
    else
      out = argv[i];
  }
  fs::create_directories(out);

  int failures = 0;
  auto report = [&](int k, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("AC%d %s %s\n", k, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };

  const NormalizationStats norm = normalization_suite();
  report(1, [&] { return ac1(norm); });
  report(2, ac2);
  report(3, ac3);
  report(4, ac4);
  report(9, ac9);
  report(11, [&] { return ac11(norm); });
  if (quick) return failures == 0 ? 0 : 1;

  const DeskRun iso = train_desk(AnisotropyClass::iso, out);
  const DeskRun trans = train_desk(AnisotropyClass::trans, out);
  const DeskRun ortho = train_desk(AnisotropyClass::ortho, out);
  report(5, [&] { return ac5(iso, trans, ortho); });
  report(6, [&] { return ac6(trans); });
  report(7, [&] { return ac7(train_inverse_model(out), out); });
  report(8, [&] { return ac8(trans); });
  report(10, [&] { return ac10(trans, out); });
  report(12, [&] { return ac12(iso, out); });

  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
