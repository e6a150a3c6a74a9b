#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "anisoforge/energy.hpp"
#include "anisoforge/tensor_core.hpp"

namespace testing {

using namespace anisoforge;

/// F = I + U(-delta, delta) with det F > 0.3.
inline Tensor3 random_F(std::mt19937_64& rng, double delta = 0.25) {
  std::uniform_real_distribution<double> u(-delta, delta);
  for (;;) {
    Tensor3 F = Mat3::Identity();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) F(i, j) += u(rng);
    if (F.determinant() > 0.3) return F;
  }
}

inline SymTensor3 random_C(std::mt19937_64& rng, double delta = 0.25) { return cauchy_green(random_F(rng, delta)); }

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

struct ModelOptions {
  FormulationMode mode = FormulationMode::polyconvex;
  int design_dim = 2;
  int design_width = 6;
  int invariant_width = 8;
  int layers = 2;
  double gamma = 1.0;
};

/// Random network, random (continuous) anisotropy state, design scaling on [1,5].
inline Surrogate random_model(std::mt19937_64& rng, const ModelOptions& o = {}) {
  PicnnArchitecture a;
  a.design_dim = o.design_dim;
  a.design_width = o.design_width;
  a.invariant_width = o.invariant_width;
  a.layers = o.layers;
  a.mode = network_mode(o.mode);
  Picnn net = Picnn::initialized(a, rng());
  // Perturb biases too so that no structure is special at the origin.
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (const auto& b : net.layout().b_x)
    for (Eigen::Index i = 0; i < b.size(); ++i) net.parameters()[b.offset + i] = u(rng);
  for (const auto& b : net.layout().b_y)
    for (Eigen::Index i = 0; i < b.size(); ++i) net.parameters()[b.offset + i] = u(rng);
  net.set_design_scaling(Eigen::VectorXd::Constant(o.design_dim, 3.0), Eigen::VectorXd::Constant(o.design_dim, 2.0));
  AnisotropyState an;
  std::uniform_real_distribution<double> ab(-2.0, 2.0), ph(0.0, 6.0);
  an.alpha_bar1 = ab(rng);
  an.alpha_bar2 = ab(rng);
  an.phi = ph(rng);
  an.p_raw = random_unit(rng);
  EnergyConfig ec;
  ec.gamma = o.gamma;
  ec.mode = o.mode;
  return Surrogate(std::move(net), an, ec);
}

inline Eigen::VectorXd random_design(std::mt19937_64& rng, int dim, double lo = 1.0, double hi = 5.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd D(dim);
  for (int i = 0; i < dim; ++i) D[i] = u(rng);
  return D;
}

/// |a - b| <= rel * max(|a|, |b|) + abs.
inline bool close(double a, double b, double rel, double abs = 0.0) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs;
}

}  // namespace testing
