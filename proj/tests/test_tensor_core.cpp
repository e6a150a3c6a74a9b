#include <doctest.h>

#include "anisoforge/errors.hpp"
#include "support.hpp"

using namespace anisoforge;
using testing::random_C;
using testing::random_unit;

namespace {

const SymTensor3 kN1 = outer(Vec3(1.0, 2.0, 0.5).normalized());
const SymTensor3 kN2 = outer(Vec3(-2.0, 1.0, 0.0).normalized());

SymTensor3 bump(const SymTensor3& C, int a, double h) {
  SymTensor3 out = C;
  out[a] += h;
  return out;
}

}  // namespace

TEST_CASE("SymTensor3 storage and contraction") {
  Mat3 m;
  m << 1, 2, 3, 2, 5, 6, 3, 6, 9;
  const auto s = SymTensor3::from_matrix(m);
  CHECK(s.matrix().isApprox(m));
  CHECK(s(0, 2) == 3.0);
  CHECK(s(2, 1) == 6.0);
  CHECK(s.ddot(s) == doctest::Approx(m.cwiseProduct(m).sum()));
  CHECK(SymTensor3::identity().trace() == 3.0);
}

TEST_CASE("invariants at the undeformed state") {
  const auto inv = invariants(SymTensor3::identity(), kN1, kN2, 0.3, 0.7, AnisotropyClass::ortho);
  Vec8 expect;
  expect << 3, 3, 1, -2, 0.3, 0.3, 0.7, 0.7;
  CHECK((inv.values - expect).norm() < 1e-14);
  const auto iso = invariants(SymTensor3::identity(), kN1, kN2, 0.3, 0.7, AnisotropyClass::iso);
  CHECK(iso.values.tail<4>().isZero());
  const auto trans = invariants(SymTensor3::identity(), kN1, kN2, 0.3, 0.7, AnisotropyClass::trans);
  CHECK(trans.values.tail<2>().isZero());
  CHECK(active_invariant_count(AnisotropyClass::trans) == 6);
}

TEST_CASE("cofactor trace satisfies Cayley-Hamilton") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k) {
    const auto C = random_C(rng);
    const Mat3 m = C.matrix();
    const auto inv = invariants(C, kN1, kN2, 1.0, 1.0, AnisotropyClass::ortho);
    CHECK(inv[1] == doctest::Approx(0.5 * (m.trace() * m.trace() - (m * m).trace())).epsilon(1e-12));
    CHECK(inv[2] == doctest::Approx(std::sqrt(m.determinant())).epsilon(1e-12));
  }
}

TEST_CASE("bases are the derivatives of the invariants") {
  std::mt19937_64 rng(5);
  const double h = 1e-6;
  for (int k = 0; k < 20; ++k) {
    const auto C = random_C(rng);
    const double a1 = 0.4, a2 = 0.8;
    const auto B = bases(C, kN1, kN2, a1, a2, AnisotropyClass::ortho);
    for (int a = 0; a < 6; ++a) {
      const auto ip = invariants(bump(C, a, h), kN1, kN2, a1, a2, AnisotropyClass::ortho).values;
      const auto im = invariants(bump(C, a, -h), kN1, kN2, a1, a2, AnisotropyClass::ortho).values;
      const Vec8 fd = (ip - im) / (2 * h);
      for (int i = 0; i < 8; ++i) {
        const double an = B[i][a] * SymTensor3::kWeight[static_cast<std::size_t>(a)];
        CHECK(testing::close(an, fd[i], 1e-6, 1e-8));
      }
    }
  }
}

TEST_CASE("second derivatives of the invariants match differences of the bases") {
  std::mt19937_64 rng(6);
  const double h = 1e-6;
  for (int k = 0; k < 10; ++k) {
    const auto C = random_C(rng);
    const auto K = basis_second_derivatives(C, kN1, kN2, 0.6, 0.9, AnisotropyClass::ortho);
    for (int b = 0; b < 6; ++b) {
      const auto Bp = bases(bump(C, b, h), kN1, kN2, 0.6, 0.9, AnisotropyClass::ortho);
      const auto Bm = bases(bump(C, b, -h), kN1, kN2, 0.6, 0.9, AnisotropyClass::ortho);
      for (int i = 0; i < 8; ++i) {
        const Vec6 fd = (Bp[i].components() - Bm[i].components()) / (2 * h);
        const Vec6 an = K[static_cast<std::size_t>(i)].col(b) * SymTensor3::kWeight[static_cast<std::size_t>(b)];
        CHECK((fd - an).norm() <= 1e-6 * std::max(1.0, an.norm()));
      }
    }
    for (const auto& Ki : K) CHECK((Ki - Ki.transpose()).norm() < 1e-12);
  }
}

TEST_CASE("rotations and structure tensors") {
  std::mt19937_64 rng(9);
  CHECK(rodrigues(0.0, Vec3(0.3, 0.1, -2.0)).isApprox(Mat3::Identity()));
  for (int k = 0; k < 20; ++k) {
    const Tensor3 R = rodrigues(2.0 * k / 7.0, random_unit(rng) * 3.0);
    CHECK((R.transpose() * R - Mat3::Identity()).norm() < 1e-13);
    CHECK(R.determinant() == doctest::Approx(1.0));
    const auto [N1, N2] = structure_tensors(R);
    CHECK(N1.trace() == doctest::Approx(1.0));
    CHECK(std::abs(N1.ddot(N2)) < 1e-13);
    const auto rp = rotation_params_from_matrix(R);
    CHECK((rodrigues(rp) - R).norm() < 1e-10);
  }
  const Vec3 n1 = Vec3(1, 1, 0).normalized();
  const Vec3 n2 = Vec3(0, 0, 1);
  const Tensor3 R = rotation_from_directions(n1, &n2);
  CHECK((R.col(0) - n1).norm() < 1e-12);
  CHECK((R.col(1) - n2).norm() < 1e-12);
  const Tensor3 R1 = rotation_from_directions(n1);
  CHECK((R1.col(0) - n1).norm() < 1e-12);
  CHECK(std::abs(R1.determinant() - 1.0) < 1e-12);
}

TEST_CASE("uniform random rotations are proper") {
  std::mt19937_64 rng(1);
  Mat3 mean = Mat3::Zero();
  const int n = 4000;
  for (int k = 0; k < n; ++k) {
    const Tensor3 Q = random_rotation(rng);
    CHECK(Q.determinant() == doctest::Approx(1.0));
    mean += Q / n;
  }
  CHECK(mean.norm() < 0.1);  // Haar measure has zero mean
}

TEST_CASE("direction recovery from a structure tensor") {
  std::mt19937_64 rng(12);
  for (int k = 0; k < 20; ++k) {
    const Vec3 n = random_unit(rng);
    const Vec3 r = recover_direction(outer(n));
    CHECK(std::abs(std::abs(r.dot(n)) - 1.0) < 1e-10);
    CHECK(direction_residual(r, outer(n)) < 1e-12);
    CHECK(r == canonical_sign(r));
  }
  CHECK(canonical_sign(Vec3(0, -1, 2)) == Vec3(0, 1, -2));
}

TEST_CASE("invariants are objective under joint rotation") {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 50; ++k) {
    const auto C = random_C(rng);
    const Tensor3 Q = random_rotation(rng);
    const auto a = invariants(C, kN1, kN2, 0.5, 0.5, AnisotropyClass::ortho).values;
    const auto b = invariants(rotate_into(C, Q), rotate_into(kN1, Q), rotate_into(kN2, Q), 0.5, 0.5,
                              AnisotropyClass::ortho)
                       .values;
    CHECK((a - b).norm() < 1e-12);
  }
}

TEST_CASE("invalid inputs") {
  Vec6 bad;
  bad << 1, 1, -1, 0, 0, 0;
  CHECK_THROWS_AS(make_metric(SymTensor3(bad)), InvalidArgument);
  bad << 1, 1, 1, 2, 0, 0;
  CHECK_THROWS_AS(make_metric(SymTensor3(bad)), InvalidArgument);
  CHECK_THROWS_AS(anisotropy_class_from_string("cubic"), InvalidArgument);
  CHECK(anisotropy_class_from_string("trans") == AnisotropyClass::trans);
}
