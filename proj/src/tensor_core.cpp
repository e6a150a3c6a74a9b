#include "anisoforge/tensor_core.hpp"

#include <algorithm>
#include <sstream>

#include "anisoforge/errors.hpp"
#include "anisoforge/optim.hpp"

namespace anisoforge {

SymTensor3 SymTensor3::from_matrix(const Mat3& m) {
  Vec6 v;
  v << m(0, 0), m(1, 1), m(2, 2), 0.5 * (m(0, 1) + m(1, 0)), 0.5 * (m(0, 2) + m(2, 0)),
      0.5 * (m(1, 2) + m(2, 1));
  return SymTensor3(v);
}

SymTensor3 SymTensor3::identity() {
  Vec6 v;
  v << 1, 1, 1, 0, 0, 0;
  return SymTensor3(v);
}

Mat3 SymTensor3::matrix() const {
  Mat3 m;
  m << v_[0], v_[3], v_[4],  //
      v_[3], v_[1], v_[5],   //
      v_[4], v_[5], v_[2];
  return m;
}

double SymTensor3::operator()(int i, int j) const {
  if (i == j) return v_[i];
  const int lo = std::min(i, j);
  const int hi = std::max(i, j);
  if (lo == 0) return hi == 1 ? v_[3] : v_[4];
  return v_[5];
}

double SymTensor3::ddot(const SymTensor3& o) const {
  return v_[0] * o.v_[0] + v_[1] * o.v_[1] + v_[2] * o.v_[2] +
         2.0 * (v_[3] * o.v_[3] + v_[4] * o.v_[4] + v_[5] * o.v_[5]);
}

const char* to_string(AnisotropyClass cls) {
  switch (cls) {
    case AnisotropyClass::iso: return "iso";
    case AnisotropyClass::trans: return "trans";
    case AnisotropyClass::ortho: return "ortho";
  }
  return "?";
}

AnisotropyClass anisotropy_class_from_string(const std::string& name) {
  if (name == "iso" || name == "isotropic") return AnisotropyClass::iso;
  if (name == "trans" || name == "transiso" || name == "transverse") return AnisotropyClass::trans;
  if (name == "ortho" || name == "orthotropic") return AnisotropyClass::ortho;
  throw InvalidArgument("unknown anisotropy class '" + name + "' (expected iso, trans or ortho)");
}

int active_invariant_count(AnisotropyClass cls) {
  switch (cls) {
    case AnisotropyClass::iso: return 4;
    case AnisotropyClass::trans: return 6;
    case AnisotropyClass::ortho: return 8;
  }
  return 8;
}

Metric make_metric(const SymTensor3& C) {
  if (!C.components().allFinite()) throw InvalidArgument("invalid metric: non-finite C");
  Metric m;
  m.C = C.matrix();
  Eigen::LLT<Mat3> llt(m.C);
  if (llt.info() != Eigen::Success) throw InvalidArgument("invalid metric: C is not positive definite");
  m.det = m.C.determinant();
  if (!(m.det > 0.0)) throw InvalidArgument("invalid metric: det C <= 0");
  m.C_inv = m.C.inverse();
  m.C_inv = 0.5 * (m.C_inv + m.C_inv.transpose()).eval();
  m.cof = m.det * m.C_inv;
  m.J = std::sqrt(m.det);
  return m;
}

Mat3 skew(const Vec3& p) {
  Mat3 P;
  P << 0.0, -p[2], p[1],  //
      p[2], 0.0, -p[0],   //
      -p[1], p[0], 0.0;
  return P;
}

Tensor3 rodrigues(double phi, const Vec3& p) {
  const double norm = p.norm();
  if (!(norm > 1e-300) || !std::isfinite(norm)) throw InvalidArgument("degenerate axis");
  const Mat3 P = skew(p / norm);
  return Mat3::Identity() + std::sin(phi) * P + (1.0 - std::cos(phi)) * (P * P);
}

Tensor3 rodrigues(const RotationParams& params) { return rodrigues(params.phi, params.p); }

std::pair<SymTensor3, SymTensor3> structure_tensors(const Tensor3& R) {
  const double orth_err = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (orth_err > 1e-8 || R.determinant() < 0.0) {
    std::ostringstream os;
    os << "structure_tensors: R is not a proper rotation (|R^T R - I| = " << orth_err << ")";
    throw InvalidArgument(os.str());
  }
  return {outer(R.col(0)), outer(R.col(1))};
}

RotationParams rotation_params_from_matrix(const Tensor3& R) {
  Eigen::AngleAxisd aa(R);
  RotationParams out;
  out.phi = aa.angle();
  out.p = aa.axis();
  if (out.phi < 1e-14 || !out.p.allFinite()) {
    out.phi = 0.0;
    out.p = Vec3::UnitZ();
  }
  return out;
}

Tensor3 rotation_from_directions(const Vec3& n1, const Vec3* n2) {
  if (n1.norm() < 1e-12) throw InvalidArgument("degenerate direction");
  const Vec3 a = n1.normalized();
  if (n2 == nullptr) {
    return Eigen::Quaterniond::FromTwoVectors(Vec3::UnitX(), a).toRotationMatrix();
  }
  Vec3 b = *n2 - n2->dot(a) * a;
  if (b.norm() < 1e-8) throw InvalidArgument("second direction is parallel to the first");
  b.normalize();
  Mat3 R;
  R.col(0) = a;
  R.col(1) = b;
  R.col(2) = a.cross(b);
  return R;
}

namespace {

// tr(A N) for symmetric A, N.
double trace_product(const Mat3& A, const Mat3& N) { return (A.cwiseProduct(N)).sum(); }

void check_alpha(double alpha1, double alpha2) {
  if (!std::isfinite(alpha1) || !std::isfinite(alpha2)) throw InvalidArgument("non-finite anisotropy weight");
}

}  // namespace

InvariantVector invariants(const SymTensor3& C, const SymTensor3& N1, const SymTensor3& N2, double alpha1,
                           double alpha2, AnisotropyClass cls) {
  return invariants(make_metric(C), N1, N2, alpha1, alpha2, cls);
}

InvariantVector invariants(const Metric& m, const SymTensor3& N1, const SymTensor3& N2, double alpha1,
                           double alpha2, AnisotropyClass cls) {
  check_alpha(alpha1, alpha2);
  InvariantVector out;
  out.cls = cls;
  out.values[0] = m.C.trace();
  out.values[1] = m.cof.trace();
#ifndef NDEBUG
  {
    const double ch = 0.5 * (out.values[0] * out.values[0] - (m.C * m.C).trace());
    if (std::abs(ch - out.values[1]) > 1e-9 * std::max(1.0, std::abs(ch)))
      throw NumericalError("invariants: cofactor trace disagrees with Cayley-Hamilton form");
  }
#endif
  out.values[2] = m.J;
  out.values[3] = -2.0 * m.J;
  if (cls != AnisotropyClass::iso) {
    const Mat3 n1 = N1.matrix();
    out.values[4] = alpha1 * trace_product(m.C, n1);
    out.values[5] = alpha1 * trace_product(m.cof, n1);
  }
  if (cls == AnisotropyClass::ortho) {
    const Mat3 n2 = N2.matrix();
    out.values[6] = alpha2 * trace_product(m.C, n2);
    out.values[7] = alpha2 * trace_product(m.cof, n2);
  }
  return out;
}

namespace {

// d tr(Cof C N)/dC = tr(Cof C N) C^-1 - Cof C N C^-1, symmetrised.
SymTensor3 cofactor_basis(const Metric& m, const Mat3& N) {
  const double t = trace_product(m.cof, N);
  return SymTensor3::from_matrix(t * m.C_inv - m.cof * N * m.C_inv);
}

}  // namespace

BasisSet bases(const SymTensor3& C, const SymTensor3& N1, const SymTensor3& N2, double alpha1,
               double alpha2, AnisotropyClass cls) {
  return bases(make_metric(C), N1, N2, alpha1, alpha2, cls);
}

BasisSet bases(const Metric& m, const SymTensor3& N1, const SymTensor3& N2, double alpha1, double alpha2,
               AnisotropyClass cls) {
  check_alpha(alpha1, alpha2);
  BasisSet b;
  const SymTensor3 I = SymTensor3::identity();
  const SymTensor3 Cs = SymTensor3::from_matrix(m.C);
  const SymTensor3 Ci = SymTensor3::from_matrix(m.C_inv);
  b.entries[0] = I;
  b.entries[1] = m.C.trace() * I - Cs;
  b.entries[2] = (0.5 * m.J) * Ci;
  b.entries[3] = (-m.J) * Ci;
  if (cls != AnisotropyClass::iso) {
    b.entries[4] = alpha1 * N1;
    b.entries[5] = alpha1 * cofactor_basis(m, N1.matrix());
  }
  if (cls == AnisotropyClass::ortho) {
    b.entries[6] = alpha2 * N2;
    b.entries[7] = alpha2 * cofactor_basis(m, N2.matrix());
  }
  return b;
}

namespace {

using Fourth = std::array<double, 81>;

inline int idx4(int i, int j, int k, int l) { return ((i * 3 + j) * 3 + k) * 3 + l; }

Tangent66 to_voigt(const Fourth& K) {
  Tangent66 T;
  for (int a = 0; a < 6; ++a) {
    const int i = SymTensor3::kIndex[a][0], j = SymTensor3::kIndex[a][1];
    for (int b = 0; b < 6; ++b) {
      const int k = SymTensor3::kIndex[b][0], l = SymTensor3::kIndex[b][1];
      T(a, b) = 0.25 * (K[idx4(i, j, k, l)] + K[idx4(j, i, k, l)] + K[idx4(i, j, l, k)] + K[idx4(j, i, l, k)]);
    }
  }
  return T;
}

// d(C^-1)_ij / dC_kl in the symmetric sense.
inline double dinv(const Mat3& Ci, int i, int j, int k, int l) {
  return -0.5 * (Ci(i, k) * Ci(j, l) + Ci(i, l) * Ci(j, k));
}

Tangent66 second_derivative_I2() {
  Fourth K{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
          K[idx4(i, j, k, l)] = (i == j && k == l ? 1.0 : 0.0) -
                                0.5 * ((i == k && j == l ? 1.0 : 0.0) + (i == l && j == k ? 1.0 : 0.0));
  return to_voigt(K);
}

// Second derivative of J = sqrt(det C).
Tangent66 second_derivative_J(const Metric& m) {
  const Mat3& Ci = m.C_inv;
  Fourth K{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
          K[idx4(i, j, k, l)] = 0.25 * m.J * Ci(i, j) * Ci(k, l) + 0.5 * m.J * dinv(Ci, i, j, k, l);
  return to_voigt(K);
}

// Second derivative of f = det(C) tr(C^-1 N) = tr(Cof C N).
Tangent66 second_derivative_cofactor(const Metric& m, const Mat3& N) {
  const Mat3& Ci = m.C_inv;
  const double d = m.det;
  const double t = trace_product(Ci, N);
  const Mat3 M = Ci * N * Ci;
  Fourth K{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) {
          const double dM = -0.5 * (Ci(i, k) * M(l, j) + Ci(i, l) * M(k, j) + M(i, k) * Ci(l, j) + M(i, l) * Ci(k, j));
          K[idx4(i, j, k, l)] = d * t * Ci(i, j) * Ci(k, l) - d * Ci(i, j) * M(k, l) + d * t * dinv(Ci, i, j, k, l) -
                                d * M(i, j) * Ci(k, l) - d * dM;
        }
  return to_voigt(K);
}

}  // namespace

std::array<Tangent66, 8> basis_second_derivatives(const SymTensor3& C, const SymTensor3& N1,
                                                  const SymTensor3& N2, double alpha1, double alpha2,
                                                  AnisotropyClass cls) {
  return basis_second_derivatives(make_metric(C), N1, N2, alpha1, alpha2, cls);
}

std::array<Tangent66, 8> basis_second_derivatives(const Metric& m, const SymTensor3& N1, const SymTensor3& N2,
                                                  double alpha1, double alpha2, AnisotropyClass cls) {
  check_alpha(alpha1, alpha2);
  std::array<Tangent66, 8> out;
  for (auto& t : out) t.setZero();
  out[1] = second_derivative_I2();
  out[2] = second_derivative_J(m);
  out[3] = -2.0 * out[2];
  if (cls != AnisotropyClass::iso) out[5] = alpha1 * second_derivative_cofactor(m, N1.matrix());
  if (cls == AnisotropyClass::ortho) out[7] = alpha2 * second_derivative_cofactor(m, N2.matrix());
  return out;
}

SymTensor3 outer(const Vec3& a) { return SymTensor3::from_matrix(a * a.transpose()); }

SymTensor3 cauchy_green(const Tensor3& F) { return SymTensor3::from_matrix(F.transpose() * F); }

SymTensor3 rotate_into(const SymTensor3& A, const Mat3& Q) {
  return SymTensor3::from_matrix(Q.transpose() * A.matrix() * Q);
}

double direction_residual(const Vec3& n, const SymTensor3& N) {
  return (n * n.transpose() - N.matrix()).squaredNorm();
}

Vec3 canonical_sign(const Vec3& n, double tol) {
  for (int i = 0; i < 3; ++i) {
    if (std::abs(n[i]) > tol) return n[i] < 0.0 ? Vec3(-n) : n;
  }
  return n;
}

Vec3 recover_direction(const SymTensor3& N) {
  if (!N.components().allFinite()) throw InvalidArgument("recover_direction: non-finite N");
  Eigen::SelfAdjointEigenSolver<Mat3> es(N.matrix(), Eigen::EigenvaluesOnly);
  const Vec3 ev = es.eigenvalues();  // ascending
  const double top = ev[2];
  if (!(top > 0.0)) throw InvalidArgument("recover_direction: N has no positive eigenvalue");
  if (ev[2] - ev[1] < 1e-3 * std::abs(top)) throw InvalidArgument("ambiguous direction");

  const Mat3 Nm = N.matrix();
  int k = 0;
  Nm.diagonal().maxCoeff(&k);
  Eigen::VectorXd x0 = Nm.col(k) / std::sqrt(Nm(k, k));

  inverse::NmConfig cfg;
  cfg.initial_scale = 0.05;
  cfg.tolerance = 1e-13;
  cfg.max_iterations = 4000;
  const auto result = inverse::nelder_mead(
      [&](const Eigen::VectorXd& x) { return direction_residual(Vec3(x[0], x[1], x[2]), N); }, cfg, x0);
  Vec3 n(result.x[0], result.x[1], result.x[2]);
  if (n.norm() < 1e-12) throw NumericalError("recover_direction: collapsed to zero vector");
  return canonical_sign(n.normalized());
}

}  // namespace anisoforge
