#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

#include "anisoforge/picnn.hpp"
#include "anisoforge/tensor_core.hpp"

namespace anisoforge {

/// polyconvex: constrained network + normalization term linear in the invariants.
/// nonpoly_linearC: constrained network + normalization term linear in C.
/// unconstrained: free network weights, invariant-linear normalization.
enum class FormulationMode { polyconvex, nonpoly_linearC, unconstrained };

const char* to_string(FormulationMode mode);
FormulationMode formulation_mode_from_string(const std::string& name);
/// Network constraint mode implied by a formulation.
ConstraintMode network_mode(FormulationMode mode);

struct EnergyConfig {
  double gamma = 1.0;
  FormulationMode mode = FormulationMode::polyconvex;
};

double sigmoid(double x);

/// Trainable anisotropy state. When `fixed_class` is set, the alphas are
/// pinned to {0,1} and the raw alpha values are ignored.
struct AnisotropyState {
  double alpha_bar1 = 0.0;
  double alpha_bar2 = 0.0;
  double phi = 0.0;
  Vec3 p_raw = Vec3(0.0, 0.0, 1.0);
  std::optional<AnisotropyClass> fixed_class;

  double alpha1() const;
  double alpha2() const;
  Tensor3 rotation() const { return rodrigues(phi, p_raw); }
};

/// Orientation-dependent quantities shared by every evaluation at one design.
struct MaterialFrame {
  SymTensor3 N1, N2;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  AnisotropyClass cls = AnisotropyClass::ortho;
};

MaterialFrame make_frame(const AnisotropyState& state);
/// Same alphas/class as `state`, but structure tensors from rotation R.
MaterialFrame make_frame(const AnisotropyState& state, const Tensor3& R);

/// Invariants of the undeformed configuration: (3,3,1,-2,a1,a1,a2,a2).
Vec8 reference_invariants(double alpha1, double alpha2);
/// Reference invariants with the alphas of inactive directions zeroed.
Vec8 frame_reference(const MaterialFrame& frame);

/// Coefficients of the stress-normalization term. `dbar` holds the network
/// gradient at the reference invariants.
struct NormalizationCoeffs {
  double o = 0.0, p = 0.0, q = 0.0, r = 0.0, s = 0.0;
  Vec8 dbar = Vec8::Zero();
  double psi_bar = 0.0;
};

NormalizationCoeffs normalization_from_gradient(const Vec8& dbar, double psi_bar, double alpha1, double alpha2);
/// Linear-in-invariants normalization as a coefficient vector: (0,0,-o,0,p,q,r,s).
Vec8 sn_coefficients(const NormalizationCoeffs& n);
/// sum_i dbar_i Bbar_i (bases at C = I), used by the linear-in-C normalization.
SymTensor3 reference_stress_tensor(const Vec8& dbar, const MaterialFrame& frame);

/// Volumetric growth term gamma (J + 1/J - 2)^2 and its J-derivatives.
double growth_psi(double gamma, double J);
double growth_d1(double gamma, double J);
double growth_d2(double gamma, double J);

struct StressTangent {
  SymTensor3 S;
  Tangent66 tangent;
};

/// Psi = Psi_NN + Psi_gr + Psi_n + Psi_sn with S = 2 dPsi/dC and its tangent.
class Surrogate {
 public:
  Surrogate() = default;
  Surrogate(Picnn net, AnisotropyState aniso, EnergyConfig config);

  const Picnn& network() const { return net_; }
  Picnn& network() { return net_; }
  const AnisotropyState& anisotropy() const { return aniso_; }
  AnisotropyState& anisotropy() { return aniso_; }
  const EnergyConfig& config() const { return config_; }
  EnergyConfig& config() { return config_; }

  MaterialFrame frame() const { return make_frame(aniso_); }

  NormalizationCoeffs normalization_coeffs(const Eigen::VectorXd& D) const;
  NormalizationCoeffs normalization_coeffs(const Eigen::VectorXd& D, const MaterialFrame& frame) const;

  double psi_total(const SymTensor3& C, const Eigen::VectorXd& D) const;
  double psi_total(const SymTensor3& C, const Eigen::VectorXd& D, const MaterialFrame& frame) const;

  SymTensor3 stress(const SymTensor3& C, const Eigen::VectorXd& D) const;
  SymTensor3 stress(const SymTensor3& C, const Eigen::VectorXd& D, const MaterialFrame& frame) const;
  /// Same as stress() but reuses precomputed normalization coefficients.
  SymTensor3 stress(const SymTensor3& C, const Eigen::VectorXd& D, const MaterialFrame& frame,
                    const NormalizationCoeffs& norm) const;

  Tangent66 tangent(const SymTensor3& C, const Eigen::VectorXd& D, bool include_sn = true) const;
  Tangent66 tangent(const SymTensor3& C, const Eigen::VectorXd& D, const MaterialFrame& frame,
                    bool include_sn = true) const;

  StressTangent stress_tangent(const SymTensor3& C, const Eigen::VectorXd& D, const MaterialFrame& frame,
                               const NormalizationCoeffs& norm) const;

 private:
  void check_J(double J) const;

  Picnn net_;
  AnisotropyState aniso_;
  EnergyConfig config_;
};

}  // namespace anisoforge
