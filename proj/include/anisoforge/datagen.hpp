#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "anisoforge/dataset.hpp"
#include "anisoforge/tensor_core.hpp"

namespace anisoforge::datagen {

/// Latin hypercube design on [0,1]^dim, one row per point.
Eigen::MatrixXd latin_hypercube(int n, int dim, std::uint64_t seed);

/// F_ij in [delta_ij - delta, delta_ij + delta], det F > 0.1. A design with a
/// rejected row is redrawn as a whole so every marginal stays stratified.
std::vector<Tensor3> sample_F_lhs(int n, double delta, std::uint64_t seed);

/// F = R U with U = Q diag(lambda) Q^T, lambda from a Latin hypercube on
/// [lo, hi]^3 and R, Q uniform random rotations.
std::vector<Tensor3> sample_F_polar(int n, double lo, double hi, std::uint64_t seed);

/// Indices retained after removing samples whose invariant vectors (plus
/// design vector, if any) lie within `tol` of an earlier one in the inf-norm.
std::vector<std::size_t> dedupe_invariant_space(const std::vector<SymTensor3>& Cs, AnisotropyClass cls, double tol,
                                                const SymTensor3& N1 = SymTensor3::zero(),
                                                const SymTensor3& N2 = SymTensor3::zero(),
                                                const std::vector<Eigen::VectorXd>* designs = nullptr);
std::vector<Tensor3> dedupe_invariant_space(const std::vector<Tensor3>& Fs, AnisotropyClass cls, double tol,
                                            const SymTensor3& N1 = SymTensor3::zero(),
                                            const SymTensor3& N2 = SymTensor3::zero());

struct ModelEval {
  double psi = 0.0;
  SymTensor3 S;
};

ModelEval eval_neo_hookean(double c1, double c2, const SymTensor3& C);

struct HgoParams {
  double c1 = 1.0;
  double c2 = 0.75;
  double c3 = 1.0;
  double c4 = 0.0;
  double c5 = 0.0;
  Vec3 n1 = Vec3(1.0 / std::sqrt(3.0), std::sqrt(2.0) / std::sqrt(3.0), 0.0);
  Vec3 n2 = Vec3(std::sqrt(2.0) / std::sqrt(3.0), -1.0 / std::sqrt(3.0), 0.0);
};
ModelEval eval_aniso_hgo(const HgoParams& p, const SymTensor3& C);

/// lambda = 2 mu nu / (1 - 2 nu).
double lame_lambda(double mu, double nu);
ModelEval eval_coupled_neo_hookean(double mu, double lambda, const SymTensor3& C);

enum class ModelKind { neo_hookean, aniso_hgo, coupled_neo_hookean };
const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

/// One design axis of a parameter grid: `count` linspace values on [lo, hi].
struct GridAxis {
  std::string name;
  double lo = 1.0;
  double hi = 5.0;
  int count = 5;
  std::vector<double> values() const;
};

struct ModelSpec {
  ModelKind kind = ModelKind::neo_hookean;
  AnisotropyClass cls = AnisotropyClass::iso;  ///< for aniso_hgo: trans drops c5
  std::vector<GridAxis> axes;
  HgoParams hgo;       ///< fixed values for HGO parameters that are not on the grid
  double nu = 0.44;    ///< coupled neo-Hookean
  double mu = 1.0;     ///< coupled neo-Hookean when mu is not on the grid

  /// Default grid: 5 values per axis.
  static ModelSpec defaults(ModelKind kind, AnisotropyClass cls, int count = 5);
  /// Stress/energy of the model at one design point (ordered as `axes`).
  ModelEval evaluate(const Eigen::VectorXd& D, const SymTensor3& C) const;
  /// Preferred directions in use (empty for isotropic models).
  std::vector<Vec3> directions() const;
};

enum class SamplerKind { lhs, polar };

struct SamplerSpec {
  SamplerKind kind = SamplerKind::lhs;
  int n_F = 260;
  double delta = 0.2;
  double stretch_lo = 0.8;
  double stretch_hi = 1.45;
  bool independent = false;  ///< fresh F draws per parameter set
  double dedupe_tol = 1e-8;  ///< invariant inf-norm; 0 disables deduplication
};

Dataset build_dataset(const ModelSpec& model, const SamplerSpec& sampler, std::uint64_t seed);

struct IsotropyReport {
  std::vector<std::pair<Vec3, Vec3>> planes;  ///< (shear direction a, plane normal b)
  std::vector<double> gammas;
  std::vector<std::vector<double>> curves;     ///< ||S||_F per plane per gamma
  double deviation = 0.0;                      ///< max relative spread across planes
};

/// Simple shear F = I + gamma a (x) b along several orthonormal (a, b) pairs.
IsotropyReport isotropy_probe(const std::function<SymTensor3(const SymTensor3&)>& stress, double gamma_max = 0.3,
                              int steps = 11);

}  // namespace anisoforge::datagen
