#include "anisoforge/energy.hpp"

#include <cmath>

#include "anisoforge/errors.hpp"

namespace anisoforge {

const char* to_string(FormulationMode mode) {
  switch (mode) {
    case FormulationMode::polyconvex: return "polyconvex";
    case FormulationMode::nonpoly_linearC: return "nonpoly_linearC";
    case FormulationMode::unconstrained: return "unconstrained";
  }
  return "?";
}

FormulationMode formulation_mode_from_string(const std::string& name) {
  if (name == "polyconvex") return FormulationMode::polyconvex;
  if (name == "nonpoly_linearC" || name == "nonpoly-linearC" || name == "linearC") return FormulationMode::nonpoly_linearC;
  if (name == "unconstrained") return FormulationMode::unconstrained;
  throw InvalidArgument("unknown formulation mode '" + name + "' (polyconvex, nonpoly_linearC, unconstrained)");
}

ConstraintMode network_mode(FormulationMode mode) {
  return mode == FormulationMode::unconstrained ? ConstraintMode::unconstrained : ConstraintMode::polyconvex;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double AnisotropyState::alpha1() const {
  if (fixed_class) return *fixed_class == AnisotropyClass::iso ? 0.0 : 1.0;
  return sigmoid(alpha_bar1);
}

double AnisotropyState::alpha2() const {
  if (fixed_class) return *fixed_class == AnisotropyClass::ortho ? 1.0 : 0.0;
  return sigmoid(alpha_bar2);
}

MaterialFrame make_frame(const AnisotropyState& state) { return make_frame(state, state.rotation()); }

MaterialFrame make_frame(const AnisotropyState& state, const Tensor3& R) {
  MaterialFrame f;
  std::tie(f.N1, f.N2) = structure_tensors(R);
  f.alpha1 = state.alpha1();
  f.alpha2 = state.alpha2();
  f.cls = state.fixed_class.value_or(AnisotropyClass::ortho);
  return f;
}

Vec8 reference_invariants(double alpha1, double alpha2) {
  Vec8 v;
  v << 3.0, 3.0, 1.0, -2.0, alpha1, alpha1, alpha2, alpha2;
  return v;
}

NormalizationCoeffs normalization_from_gradient(const Vec8& d, double psi_bar, double alpha1, double alpha2) {
  NormalizationCoeffs n;
  n.dbar = d;
  n.psi_bar = psi_bar;
  n.p = d[5];
  n.q = d[4];
  n.r = d[7];
  n.s = d[6];
  n.o = 2.0 * (d[0] + 2.0 * d[1] + 0.5 * d[2] - d[3] + (n.p + n.q) * alpha1 + (n.r + n.s) * alpha2);
  return n;
}

Vec8 sn_coefficients(const NormalizationCoeffs& n) {
  Vec8 c;
  c << 0.0, 0.0, -n.o, 0.0, n.p, n.q, n.r, n.s;
  return c;
}

SymTensor3 reference_stress_tensor(const Vec8& d, const MaterialFrame& f) {
  const SymTensor3 I = SymTensor3::identity();
  SymTensor3 M = (d[0] + 2.0 * d[1] + 0.5 * d[2] - d[3]) * I;
  if (f.cls != AnisotropyClass::iso) M += f.alpha1 * (d[4] * f.N1 + d[5] * (I - f.N1));
  if (f.cls == AnisotropyClass::ortho) M += f.alpha2 * (d[6] * f.N2 + d[7] * (I - f.N2));
  return M;
}

double growth_psi(double gamma, double J) {
  const double g = J + 1.0 / J - 2.0;
  return gamma * g * g;
}

double growth_d1(double gamma, double J) {
  const double g = J + 1.0 / J - 2.0;
  return 2.0 * gamma * g * (1.0 - 1.0 / (J * J));
}

double growth_d2(double gamma, double J) {
  const double g = J + 1.0 / J - 2.0;
  const double g1 = 1.0 - 1.0 / (J * J);
  return 2.0 * gamma * (g1 * g1 + g * 2.0 / (J * J * J));
}

Vec8 frame_reference(const MaterialFrame& f) {
  return reference_invariants(f.cls == AnisotropyClass::iso ? 0.0 : f.alpha1,
                              f.cls == AnisotropyClass::ortho ? f.alpha2 : 0.0);
}

Surrogate::Surrogate(Picnn net, AnisotropyState aniso, EnergyConfig config)
    : net_(std::move(net)), aniso_(std::move(aniso)), config_(config) {
  if (config_.gamma < 0.0 || !std::isfinite(config_.gamma)) throw InvalidArgument("energy: gamma must be >= 0");
  if (net_.architecture().mode != network_mode(config_.mode))
    throw InvalidArgument(std::string("energy: formulation '") + to_string(config_.mode) +
                          "' requires a " + to_string(network_mode(config_.mode)) + " network");
}

void Surrogate::check_J(double J) const {
  if (!(J >= 1e-6)) throw NumericalError("energy: degenerate volume ratio J < 1e-6");
}

NormalizationCoeffs Surrogate::normalization_coeffs(const Eigen::VectorXd& D) const {
  return normalization_coeffs(D, frame());
}

NormalizationCoeffs Surrogate::normalization_coeffs(const Eigen::VectorXd& D, const MaterialFrame& f) const {
  const Vec8 Ibar = frame_reference(f);
  const auto vg = net_.value_and_grad(Ibar, D);
  return normalization_from_gradient(vg.grad, vg.value, Ibar[4], Ibar[6]);
}

double Surrogate::psi_total(const SymTensor3& C, const Eigen::VectorXd& D) const { return psi_total(C, D, frame()); }

double Surrogate::psi_total(const SymTensor3& C, const Eigen::VectorXd& D, const MaterialFrame& f) const {
  const Metric m = make_metric(C);
  check_J(m.J);
  const auto inv = invariants(m, f.N1, f.N2, f.alpha1, f.alpha2, f.cls);
  const auto norm = normalization_coeffs(D, f);
  double psi = net_.forward(inv.values, D) + growth_psi(config_.gamma, m.J) - norm.psi_bar;
  if (config_.mode == FormulationMode::nonpoly_linearC) {
    psi -= reference_stress_tensor(norm.dbar, f).ddot(C - SymTensor3::identity());
  } else {
    psi += sn_coefficients(norm).dot(inv.values - frame_reference(f));
  }
  return psi;
}

SymTensor3 Surrogate::stress(const SymTensor3& C, const Eigen::VectorXd& D) const { return stress(C, D, frame()); }

SymTensor3 Surrogate::stress(const SymTensor3& C, const Eigen::VectorXd& D, const MaterialFrame& f) const {
  return stress(C, D, f, normalization_coeffs(D, f));
}

SymTensor3 Surrogate::stress(const SymTensor3& C, const Eigen::VectorXd& D, const MaterialFrame& f,
                             const NormalizationCoeffs& norm) const {
  const Metric m = make_metric(C);
  check_J(m.J);
  const auto inv = invariants(m, f.N1, f.N2, f.alpha1, f.alpha2, f.cls);
  const auto B = bases(m, f.N1, f.N2, f.alpha1, f.alpha2, f.cls);
  Vec8 c = net_.grad_input(inv.values, D);
  c[2] += growth_d1(config_.gamma, m.J);
  if (config_.mode != FormulationMode::nonpoly_linearC) c += sn_coefficients(norm);
  SymTensor3 S;
  for (int i = 0; i < 8; ++i) S += (2.0 * c[i]) * B[i];
  if (config_.mode == FormulationMode::nonpoly_linearC) S -= 2.0 * reference_stress_tensor(norm.dbar, f);
  return S;
}

Tangent66 Surrogate::tangent(const SymTensor3& C, const Eigen::VectorXd& D, bool include_sn) const {
  return tangent(C, D, frame(), include_sn);
}

Tangent66 Surrogate::tangent(const SymTensor3& C, const Eigen::VectorXd& D, const MaterialFrame& f,
                             bool include_sn) const {
  NormalizationCoeffs norm;
  if (include_sn) norm = normalization_coeffs(D, f);
  return stress_tangent(C, D, f, norm).tangent;
}

StressTangent Surrogate::stress_tangent(const SymTensor3& C, const Eigen::VectorXd& D, const MaterialFrame& f,
                                        const NormalizationCoeffs& norm) const {
  const Metric m = make_metric(C);
  check_J(m.J);
  const auto inv = invariants(m, f.N1, f.N2, f.alpha1, f.alpha2, f.cls);
  const auto B = bases(m, f.N1, f.N2, f.alpha1, f.alpha2, f.cls);
  const auto K = basis_second_derivatives(m, f.N1, f.N2, f.alpha1, f.alpha2, f.cls);
  const auto vgh = net_.value_grad_hess(inv.values, D);

  Vec8 c = vgh.grad;
  c[2] += growth_d1(config_.gamma, m.J);
  Mat8 H = vgh.hess;
  H(2, 2) += growth_d2(config_.gamma, m.J);
  // The linear-in-C normalization has no second derivative, so it is left
  // out of the tangent entirely.
  if (config_.mode != FormulationMode::nonpoly_linearC) c += sn_coefficients(norm);

  Eigen::Matrix<double, 6, 8> Bm;
  for (int i = 0; i < 8; ++i) Bm.col(i) = B[i].components();
  StressTangent out;
  out.tangent = 4.0 * Bm * H * Bm.transpose();
  for (int i = 0; i < 8; ++i)
    if (c[i] != 0.0) out.tangent += (4.0 * c[i]) * K[static_cast<std::size_t>(i)];
  out.tangent = 0.5 * (out.tangent + out.tangent.transpose()).eval();

  for (int i = 0; i < 8; ++i) out.S += (2.0 * c[i]) * B[i];
  if (config_.mode == FormulationMode::nonpoly_linearC) out.S -= 2.0 * reference_stress_tensor(norm.dbar, f);
  return out;
}

}  // namespace anisoforge
