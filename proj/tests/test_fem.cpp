#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "anisoforge/errors.hpp"
#include "anisoforge/fem.hpp"
#include "support.hpp"

using namespace anisoforge;
using namespace anisoforge::fem;

namespace {

/// Saint Venant-Kirchhoff, S = lambda tr(E) I + 2 mu E.
StressTangent svk(const SymTensor3& C) {
  const double lambda = 2.0, mu = 1.0;
  const Mat3 E = 0.5 * (C.matrix() - Mat3::Identity());
  StressTangent st;
  st.S = SymTensor3::from_matrix(lambda * E.trace() * Mat3::Identity() + 2.0 * mu * E);
  // dS/dE_eng in Voigt order 11,22,33,12,13,23; shear entries act on 2E_ij.
  st.tangent.setZero();
  st.tangent.topLeftCorner<3, 3>().setConstant(lambda);
  for (int i = 0; i < 3; ++i) st.tangent(i, i) += 2.0 * mu;
  for (int i = 3; i < 6; ++i) st.tangent(i, i) = mu;
  return st;
}

Material random_surrogate(std::mt19937_64& rng, Surrogate& keep) {
  keep = testing::random_model(rng);
  return surrogate_material(keep, Eigen::Vector2d(2.0, 3.0), keep.frame());
}

FemConfig small_beam() {
  FemConfig c;
  c.nx = 4;
  c.ny = 1;
  c.nz = 1;
  c.Lx = 4.0;
  c.u0 = 0.05;
  c.load_steps = 2;
  c.design = Eigen::Vector2d(2.0, 3.0);
  return c;
}

}  // namespace

TEST_CASE("box mesh") {
  const Mesh m = box_mesh(2.0, 1.0, 1.0, 2, 1, 1);
  CHECK(m.node_count() == 12);
  CHECK(m.elements.size() == 2);
  const auto& e = m.elements[0];
  CHECK(m.nodes.col(e[6]).isApprox(Vec3(1.0, 1.0, 1.0)));
  CHECK(m.nodes.col(e[0]).isZero());
  CHECK_THROWS_AS(box_mesh(0.0, 1.0, 1.0, 1, 1, 1), InvalidArgument);
}

TEST_CASE("patch test reproduces the pointwise constitutive response") {
  std::mt19937_64 rng(3);
  Surrogate model;
  const Material mat = random_surrogate(rng, model);
  const Mesh m = box_mesh(1.0, 1.0, 1.0, 1, 1, 1);
  for (int k = 0; k < 5; ++k) {
    const Tensor3 F = testing::random_F(rng, 0.15);
    Dirichlet bc;
    for (int a = 0; a < m.node_count(); ++a) {
      const Vec3 u = (F - Mat3::Identity()) * m.nodes.col(a);
      for (int d = 0; d < 3; ++d) {
        bc.dofs.push_back(3 * a + d);
        bc.values.push_back(u[d]);
      }
    }
    const FieldState st = solve_static(m, bc, mat, 1, 1e-9, 5);
    const SymTensor3 S = mat(cauchy_green(F)).S;
    for (const auto& p : st.points[0]) {
      CHECK((p.F - F).norm() < 1e-12);
      CHECK((p.S.components() - S.components()).lpNorm<Eigen::Infinity>() < 1e-6);
      const Mat3 sigma = F * S.matrix() * F.transpose() / F.determinant();
      CHECK((p.cauchy - sigma).norm() < 1e-10);
      CHECK(p.von_mises == doctest::Approx(von_mises(sigma)));
    }
  }
}

TEST_CASE("consistent tangent against differences of the internal force") {
  std::mt19937_64 rng(4);
  Surrogate model;
  const Material mat = random_surrogate(rng, model);
  for (const Material& law : {mat, Material(svk)}) {
    const Mesh m = box_mesh(2.0, 1.0, 1.0, 2, 1, 1);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    Eigen::VectorXd disp(m.dof_count());
    for (Eigen::Index i = 0; i < disp.size(); ++i) disp[i] = u(rng);
    Eigen::VectorXd f;
    Eigen::MatrixXd K;
    assemble(m, law, disp, &f, &K);
    CHECK((K - K.transpose()).norm() < 1e-10 * K.norm());
    const double h = 1e-6;
    for (Eigen::Index j = 0; j < disp.size(); ++j) {
      Eigen::VectorXd up = disp, um = disp, fp, fm;
      up[j] += h;
      um[j] -= h;
      assemble(m, law, up, &fp, nullptr);
      assemble(m, law, um, &fm, nullptr);
      const Eigen::VectorXd fd = (fp - fm) / (2 * h);
      CHECK((fd - K.col(j)).norm() <= 1e-4 * std::max(1.0, K.col(j).norm()));
    }
  }
}

TEST_CASE("beam: zero load, equilibrium and Newton convergence") {
  std::mt19937_64 rng(5);
  const Surrogate model = testing::random_model(rng);
  FemConfig c = small_beam();
  const Mesh m = beam_mesh(c);
  const Dirichlet bc = beam_boundary(m, c);
  // Both bottom edges are supported, one node pinned in y, midspan top line loaded.
  CHECK(std::count(bc.values.begin(), bc.values.end(), -c.u0) == 2);

  c.u0 = 0.0;
  const FieldState rest = solve_beam(model, c);
  CHECK(rest.u.isZero(1e-12));
  CHECK(von_mises_max(rest) < 1e-8);

  c.u0 = 0.05;
  const FieldState st = solve_beam(model, c);
  CHECK(st.converged);
  CHECK(st.residual_norm < c.tolerance);
  CHECK(st.residuals.size() == 2);
  for (const auto& hist : st.residuals) {
    REQUIRE(hist.size() >= 4);
    // Superlinear tail: contraction ratios shrink and the last one is tiny.
    const std::size_t n = hist.size();
    const double q1 = hist[n - 3] / hist[n - 4], q2 = hist[n - 2] / hist[n - 3], q3 = hist[n - 1] / hist[n - 2];
    CHECK(q2 < q1);
    CHECK(q3 < q2);
    CHECK(q3 < 1e-2);
  }
  Vec3 total = Vec3::Zero();
  for (std::size_t i = 0; i < bc.dofs.size(); ++i) total[bc.dofs[i] % 3] += st.reactions[static_cast<Eigen::Index>(i)];
  CHECK(total.lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK(von_mises_max(st) > 0.0);

  const auto path = std::filesystem::temp_directory_path() / "anisoforge_test_beam.vtk";
  write_vtk(m, st, path);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str().find("CELL_DATA 4") != std::string::npos);
  CHECK(ss.str().find("displacement") != std::string::npos);

  c.max_newton = 0;
  CHECK_THROWS_AS(solve_beam(model, c), NumericalError);
  c = small_beam();
  c.nx = 3;
  CHECK_THROWS_AS(beam_boundary(beam_mesh(c), c), InvalidArgument);
  c = small_beam();
  c.design = Eigen::Vector3d(1, 1, 1);
  CHECK_THROWS_AS(solve_beam(model, c), InvalidArgument);
  FieldState unconverged;
  CHECK_THROWS_AS(von_mises_max(unconverged), InvalidArgument);
}

TEST_CASE("Von Mises stress") {
  Mat3 s = Mat3::Zero();
  s(0, 0) = 3.0;
  CHECK(von_mises(s) == doctest::Approx(3.0));
  CHECK(von_mises(2.0 * Mat3::Identity()) == doctest::Approx(0.0).epsilon(1e-14));
  s.setZero();
  s(0, 1) = s(1, 0) = 1.0;
  CHECK(von_mises(s) == doctest::Approx(std::sqrt(3.0)));
}

TEST_CASE("orientation inversion") {
  std::mt19937_64 rng(6);
  Surrogate iso = testing::random_model(rng);
  iso.anisotropy().fixed_class = AnisotropyClass::iso;
  inverse::NmConfig nm;
  nm.max_iterations = 10;
  const FemConfig c = small_beam();
  const auto flat = invert_orientation(iso, c, 3, nm, 1);
  CHECK(flat.orientation_insensitive);
  CHECK(flat.runs.size() == 3);
  CHECK(flat.best >= 0);

  Surrogate trans = testing::random_model(rng);
  trans.anisotropy().fixed_class = AnisotropyClass::trans;
  const auto a = invert_orientation(trans, c, 2, nm, 7);
  const auto b = invert_orientation(trans, c, 2, nm, 7);
  CHECK_FALSE(a.orientation_insensitive);
  REQUIRE(a.runs.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(a.runs[k].phi == b.runs[k].phi);
    CHECK(a.runs[k].vm_max == b.runs[k].vm_max);
    CHECK(a.runs[k].vm_max <= a.runs[k].result.history.front().f_best);
  }
  CHECK_THROWS_AS(invert_orientation(trans, c, 0, nm, 1), InvalidArgument);
}
