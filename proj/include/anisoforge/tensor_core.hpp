#pragma once

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace anisoforge {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat8 = Eigen::Matrix<double, 8, 8>;

/// Full 3x3 tensor (deformation gradient, rotation).
using Tensor3 = Mat3;

/// Fourth-order material tangent in 6x6 Voigt form. Rows/columns follow the
/// component order (11,22,33,12,13,23); dS_voigt = T * dE_engineering.
using Tangent66 = Eigen::Matrix<double, 6, 6>;

/// Symmetric 3x3 tensor stored as its 6 independent components in the order
/// (11,22,33,12,13,23). Components are tensor components (no Voigt factors).
class SymTensor3 {
 public:
  SymTensor3() : v_(Vec6::Zero()) {}
  explicit SymTensor3(const Vec6& components) : v_(components) {}
  /// Takes the symmetric part of `m`.
  static SymTensor3 from_matrix(const Mat3& m);
  static SymTensor3 identity();
  static SymTensor3 zero() { return SymTensor3{}; }

  Mat3 matrix() const;
  const Vec6& components() const { return v_; }
  Vec6& components() { return v_; }
  double operator[](int i) const { return v_[i]; }
  double& operator[](int i) { return v_[i]; }
  double operator()(int i, int j) const;

  double trace() const { return v_[0] + v_[1] + v_[2]; }
  /// A:B with factor-2 weights on the shear entries.
  double ddot(const SymTensor3& other) const;
  double frobenius_norm() const { return std::sqrt(ddot(*this)); }
  double max_abs() const { return v_.cwiseAbs().maxCoeff(); }

  SymTensor3& operator+=(const SymTensor3& o) { v_ += o.v_; return *this; }
  SymTensor3& operator-=(const SymTensor3& o) { v_ -= o.v_; return *this; }
  SymTensor3& operator*=(double s) { v_ *= s; return *this; }
  friend SymTensor3 operator+(SymTensor3 a, const SymTensor3& b) { return a += b; }
  friend SymTensor3 operator-(SymTensor3 a, const SymTensor3& b) { return a -= b; }
  friend SymTensor3 operator*(double s, SymTensor3 a) { return a *= s; }
  friend SymTensor3 operator*(SymTensor3 a, double s) { return a *= s; }
  friend SymTensor3 operator-(SymTensor3 a) { a.v_ = -a.v_; return a; }

  /// Index pairs for the 6 stored components.
  static constexpr std::array<std::array<int, 2>, 6> kIndex{{{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}}};
  /// Weights of each stored component in a double contraction.
  static constexpr std::array<double, 6> kWeight{1.0, 1.0, 1.0, 2.0, 2.0, 2.0};

 private:
  Vec6 v_;
};

enum class AnisotropyClass { iso, trans, ortho };

const char* to_string(AnisotropyClass cls);
AnisotropyClass anisotropy_class_from_string(const std::string& name);

/// Number of active invariants for a class (4, 6 or 8).
int active_invariant_count(AnisotropyClass cls);

/// (I1..I8) = (tr C, tr Cof C, J, -2J, a1 tr(C N1), a1 tr(Cof C N1), a2 tr(C N2), a2 tr(Cof C N2)).
/// Entries beyond the active count of the class are zero.
struct InvariantVector {
  Vec8 values = Vec8::Zero();
  AnisotropyClass cls = AnisotropyClass::iso;

  double operator[](int i) const { return values[i]; }
};

/// Derivatives dI_i/dC of each invariant; entries of inactive invariants are zero.
struct BasisSet {
  std::array<SymTensor3, 8> entries;
  const SymTensor3& operator[](int i) const { return entries[static_cast<std::size_t>(i)]; }
};

/// Angle-axis parametrisation of the rotation carrying the Cartesian basis
/// onto the preferred directions. `p` is normalised before use.
struct RotationParams {
  double phi = 0.0;
  Vec3 p = Vec3::UnitZ();
};

/// Quantities of C shared by every invariant and basis evaluation.
struct Metric {
  Mat3 C;
  Mat3 C_inv;
  Mat3 cof;  ///< det(C) C^-1
  double det = 1.0;
  double J = 1.0;  ///< sqrt(det C)
};

/// Validates that C is symmetric positive definite; throws "invalid metric" otherwise.
Metric make_metric(const SymTensor3& C);

/// R = I + sin(phi) P + (1 - cos(phi)) P^2 with P the skew tensor of the unit axis.
Tensor3 rodrigues(double phi, const Vec3& p);
Tensor3 rodrigues(const RotationParams& params);

/// Skew tensor eps.p, i.e. P w = p x w.
Mat3 skew(const Vec3& p);

/// N_i = (R e_i) (x) (R e_i) for i = 1, 2.
std::pair<SymTensor3, SymTensor3> structure_tensors(const Tensor3& R);

/// Rotation taking e1 to n1 (and e2 to n2 when given). Used to seed a known
/// orientation for the (phi, p) parametrisation.
RotationParams rotation_params_from_matrix(const Tensor3& R);
Tensor3 rotation_from_directions(const Vec3& n1, const Vec3* n2 = nullptr);

InvariantVector invariants(const SymTensor3& C, const SymTensor3& N1, const SymTensor3& N2,
                           double alpha1, double alpha2, AnisotropyClass cls);
InvariantVector invariants(const Metric& m, const SymTensor3& N1, const SymTensor3& N2,
                           double alpha1, double alpha2, AnisotropyClass cls);

BasisSet bases(const SymTensor3& C, const SymTensor3& N1, const SymTensor3& N2, double alpha1,
               double alpha2, AnisotropyClass cls);
BasisSet bases(const Metric& m, const SymTensor3& N1, const SymTensor3& N2, double alpha1,
               double alpha2, AnisotropyClass cls);

/// d^2 I_i / dC dC in minor-symmetric 6x6 form (tensor components, no Voigt factors):
/// dB_i[a] = sum_b K_i[a][b] * kWeight[b] * dC[b].
std::array<Tangent66, 8> basis_second_derivatives(const SymTensor3& C, const SymTensor3& N1,
                                                  const SymTensor3& N2, double alpha1, double alpha2,
                                                  AnisotropyClass cls);
std::array<Tangent66, 8> basis_second_derivatives(const Metric& m, const SymTensor3& N1,
                                                  const SymTensor3& N2, double alpha1, double alpha2,
                                                  AnisotropyClass cls);

/// || n (x) n - N ||_F^2.
double direction_residual(const Vec3& n, const SymTensor3& N);

/// Unit vector n with n (x) n ~ N, found by simplex minimisation of the
/// direction residual. Sign convention: first nonzero component positive.
Vec3 recover_direction(const SymTensor3& N);

/// Flips n so that its first component with |n_i| > tol is positive.
Vec3 canonical_sign(const Vec3& n, double tol = 1e-12);

SymTensor3 outer(const Vec3& a);
/// Right Cauchy-Green tensor F^T F.
SymTensor3 cauchy_green(const Tensor3& F);
/// Q^T A Q.
SymTensor3 rotate_into(const SymTensor3& A, const Mat3& Q);

/// Random proper rotation, uniform on SO(3) (normalised Gaussian quaternion).
template <class Rng>
Tensor3 random_rotation(Rng& rng);

}  // namespace anisoforge

#include "anisoforge/detail/random_rotation.ipp"
