#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "anisoforge/tensor_core.hpp"

namespace anisoforge {

/// polyconvex: invariant-path weights and readout are realised as squares of
/// the stored parameters (non-negative), so the output is convex and
/// non-decreasing in the invariants. unconstrained: every weight is free.
enum class ConstraintMode { polyconvex, unconstrained };

const char* to_string(ConstraintMode mode);
ConstraintMode constraint_mode_from_string(const std::string& name);

struct PicnnArchitecture {
  int invariant_dim = 8;
  int design_dim = 2;
  int design_width = 30;
  int invariant_width = 40;
  int layers = 3;  ///< hidden layers on each path (H + 1)
  ConstraintMode mode = ConstraintMode::polyconvex;

  bool operator==(const PicnnArchitecture&) const = default;
};

/// Offsets of each block inside the flat parameter vector.
struct PicnnLayout {
  struct Block {
    Eigen::Index offset = 0;
    int rows = 0;
    int cols = 0;
    Eigen::Index size() const { return static_cast<Eigen::Index>(rows) * cols; }
  };
  std::vector<Block> w_yy, b_y;         // design path
  std::vector<Block> w_xx, w_xy, b_x;   // invariant path
  Block readout;
  Eigen::Index total = 0;

  explicit PicnnLayout(const PicnnArchitecture& arch);
  /// True when the parameter at flat index i is a square-realised (constrained) weight.
  std::vector<bool> constrained_mask(const PicnnArchitecture& arch) const;
};

/// Partially input-convex network Psi(I, D):
///   y_{h+1} = softplus(W^yy_h y_h + b^y_h)
///   x_{h+1} = softplus(W^xx_h x_h + W^xy_h y_{h+1} + b^x_h)
///   Psi     = w . x_{H+1}
/// with x_0 = invariants and y_0 = design variables.
class Picnn {
 public:
  Picnn() : Picnn(PicnnArchitecture{}) {}
  explicit Picnn(const PicnnArchitecture& arch);
  Picnn(const Picnn& other);
  Picnn& operator=(const Picnn& other);

  /// Fan-in scaled uniform initialisation; constrained weights start small and positive.
  static Picnn initialized(const PicnnArchitecture& arch, std::uint64_t seed);

  const PicnnArchitecture& architecture() const { return arch_; }
  const PicnnLayout& layout() const { return layout_; }
  const Eigen::VectorXd& parameters() const { return theta_; }
  Eigen::VectorXd& parameters() { return theta_; }
  Eigen::Index parameter_count() const { return layout_.total; }

  /// Optional declared design bounds; evaluations outside them log one warning.
  void set_design_bounds(Eigen::VectorXd lower, Eigen::VectorXd upper);
  const Eigen::VectorXd& design_lower() const { return design_lower_; }
  const Eigen::VectorXd& design_upper() const { return design_upper_; }

  /// Design inputs enter the network as (D - shift) / scale. Empty = identity.
  void set_design_scaling(Eigen::VectorXd shift, Eigen::VectorXd scale);
  const Eigen::VectorXd& design_shift() const { return design_shift_; }
  const Eigen::VectorXd& design_scale() const { return design_scale_; }

  double forward(const Vec8& invariants, const Eigen::VectorXd& design) const;
  Vec8 grad_input(const Vec8& invariants, const Eigen::VectorXd& design) const;
  Mat8 hess_input(const Vec8& invariants, const Eigen::VectorXd& design) const;

  struct ValueGrad {
    double value = 0.0;
    Vec8 grad;
  };
  ValueGrad value_and_grad(const Vec8& invariants, const Eigen::VectorXd& design) const;

  struct ValueGradHess {
    double value = 0.0;
    Vec8 grad;
    Mat8 hess;
  };
  ValueGradHess value_grad_hess(const Vec8& invariants, const Eigen::VectorXd& design) const;

  // Batched evaluation: one column per sample.
  Eigen::RowVectorXd forward_batch(const Eigen::MatrixXd& X0, const Eigen::MatrixXd& Y0) const;
  Eigen::MatrixXd grad_input_batch(const Eigen::MatrixXd& X0, const Eigen::MatrixXd& Y0) const;

  /// Gradient of sum_n Psi(X0_n, Y0_n) w.r.t. the stored parameters.
  Eigen::VectorXd value_parameter_gradient(const Eigen::MatrixXd& X0, const Eigen::MatrixXd& Y0) const;

  /// Second-order kernel for the stress path. With g_n = dPsi/dI at sample n
  /// and directions R (one column per sample) it evaluates
  ///   Phi = sum_n R_n . g_n
  /// and returns dPhi/dX0 (= H_n R_n per column). When `grad_theta` is not
  /// null, dPhi/dtheta is accumulated into it; when `grad_design` is not
  /// null, it receives dPhi/dY0.
  Eigen::MatrixXd directional_second_order(const Eigen::MatrixXd& X0, const Eigen::MatrixXd& Y0,
                                           const Eigen::MatrixXd& R, Eigen::VectorXd* grad_theta,
                                           Eigen::MatrixXd* grad_design = nullptr) const;

  /// Realised weight matrices (squares of the stored blocks in polyconvex mode).
  Eigen::MatrixXd realized_w_xx(int h) const;
  Eigen::VectorXd realized_readout() const;

 private:
  void check_inputs(const Eigen::MatrixXd& X0, const Eigen::MatrixXd& Y0) const;
  Eigen::MatrixXd scaled_design(const Eigen::MatrixXd& Y0) const;

  PicnnArchitecture arch_;
  PicnnLayout layout_;
  Eigen::VectorXd theta_;
  Eigen::VectorXd design_lower_, design_upper_;
  Eigen::VectorXd design_shift_, design_scale_;
  mutable std::atomic<bool> warned_bounds_{false};
};

/// softplus and its first two derivatives, overflow safe.
double softplus(double z);
double softplus_d1(double z);
double softplus_d2(double z);

}  // namespace anisoforge
