#include "anisoforge/picnn.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "anisoforge/errors.hpp"
#include "anisoforge/logging.hpp"

namespace anisoforge {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double softplus_d1(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus_d2(double z) {
  const double s = softplus_d1(z);
  return s * (1.0 - s);
}

const char* to_string(ConstraintMode mode) {
  return mode == ConstraintMode::polyconvex ? "polyconvex" : "unconstrained";
}

ConstraintMode constraint_mode_from_string(const std::string& name) {
  if (name == "polyconvex") return ConstraintMode::polyconvex;
  if (name == "unconstrained") return ConstraintMode::unconstrained;
  throw InvalidArgument("unknown constraint mode '" + name + "'");
}

PicnnLayout::PicnnLayout(const PicnnArchitecture& arch) {
  if (arch.layers < 1 || arch.design_width < 1 || arch.invariant_width < 1 || arch.invariant_dim < 1 ||
      arch.design_dim < 0)
    throw InvalidArgument("picnn: invalid architecture");
  Eigen::Index off = 0;
  auto take = [&](int rows, int cols) {
    Block b{off, rows, cols};
    off += b.size();
    return b;
  };
  for (int h = 0; h < arch.layers; ++h) {
    const int in = h == 0 ? arch.design_dim : arch.design_width;
    w_yy.push_back(take(arch.design_width, in));
    b_y.push_back(take(arch.design_width, 1));
  }
  for (int h = 0; h < arch.layers; ++h) {
    const int in = h == 0 ? arch.invariant_dim : arch.invariant_width;
    w_xx.push_back(take(arch.invariant_width, in));
    w_xy.push_back(take(arch.invariant_width, arch.design_width));
    b_x.push_back(take(arch.invariant_width, 1));
  }
  readout = take(1, arch.invariant_width);
  total = off;
}

std::vector<bool> PicnnLayout::constrained_mask(const PicnnArchitecture& arch) const {
  std::vector<bool> mask(static_cast<std::size_t>(total), false);
  if (arch.mode != ConstraintMode::polyconvex) return mask;
  auto mark = [&](const Block& b) {
    for (Eigen::Index i = 0; i < b.size(); ++i) mask[static_cast<std::size_t>(b.offset + i)] = true;
  };
  for (const auto& b : w_xx) mark(b);
  mark(readout);
  return mask;
}

Picnn::Picnn(const PicnnArchitecture& arch)
    : arch_(arch), layout_(arch), theta_(Eigen::VectorXd::Zero(layout_.total)) {}

Picnn::Picnn(const Picnn& other)
    : arch_(other.arch_),
      layout_(other.layout_),
      theta_(other.theta_),
      design_lower_(other.design_lower_),
      design_upper_(other.design_upper_),
      design_shift_(other.design_shift_),
      design_scale_(other.design_scale_) {}

Picnn& Picnn::operator=(const Picnn& other) {
  if (this != &other) {
    arch_ = other.arch_;
    layout_ = other.layout_;
    theta_ = other.theta_;
    design_lower_ = other.design_lower_;
    design_upper_ = other.design_upper_;
    design_shift_ = other.design_shift_;
    design_scale_ = other.design_scale_;
    warned_bounds_.store(false);
  }
  return *this;
}

Picnn Picnn::initialized(const PicnnArchitecture& arch, std::uint64_t seed) {
  Picnn net(arch);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto& th = net.theta_;
  const bool poly = arch.mode == ConstraintMode::polyconvex;
  auto fill_free = [&](const PicnnLayout::Block& b) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, b.cols)));
    for (Eigen::Index i = 0; i < b.size(); ++i) th[b.offset + i] = bound * (2.0 * unit(rng) - 1.0);
  };
  auto fill_constrained = [&](const PicnnLayout::Block& b) {
    // realised weight v^2 lies in [0.04, 1] / fan_in
    const double scale = 1.0 / std::sqrt(static_cast<double>(std::max(1, b.cols)));
    for (Eigen::Index i = 0; i < b.size(); ++i) th[b.offset + i] = scale * (0.2 + 0.8 * unit(rng));
  };
  for (int h = 0; h < arch.layers; ++h) fill_free(net.layout_.w_yy[static_cast<std::size_t>(h)]);
  for (int h = 0; h < arch.layers; ++h) {
    const auto& wxx = net.layout_.w_xx[static_cast<std::size_t>(h)];
    if (poly)
      fill_constrained(wxx);
    else
      fill_free(wxx);
    fill_free(net.layout_.w_xy[static_cast<std::size_t>(h)]);
  }
  if (poly)
    fill_constrained(net.layout_.readout);
  else
    fill_free(net.layout_.readout);
  return net;
}

void Picnn::set_design_bounds(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  if (lower.size() != arch_.design_dim || upper.size() != arch_.design_dim)
    throw InvalidArgument("picnn: design bounds dimension mismatch");
  design_lower_ = std::move(lower);
  design_upper_ = std::move(upper);
}

void Picnn::set_design_scaling(Eigen::VectorXd shift, Eigen::VectorXd scale) {
  if (shift.size() == 0 && scale.size() == 0) {
    design_shift_.resize(0);
    design_scale_.resize(0);
    return;
  }
  if (shift.size() != arch_.design_dim || scale.size() != arch_.design_dim)
    throw InvalidArgument("picnn: design scaling dimension mismatch");
  if ((scale.array() <= 0.0).any() || !scale.allFinite() || !shift.allFinite())
    throw InvalidArgument("picnn: design scale must be positive and finite");
  design_shift_ = std::move(shift);
  design_scale_ = std::move(scale);
}

Eigen::MatrixXd Picnn::scaled_design(const Eigen::MatrixXd& Y0) const {
  if (design_scale_.size() == 0) return Y0;
  return ((Y0.colwise() - design_shift_).array().colwise() / design_scale_.array()).matrix();
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

using ConstMap = Eigen::Map<const MatrixXd>;
using MutMap = Eigen::Map<MatrixXd>;

ConstMap block(const VectorXd& th, const PicnnLayout::Block& b) { return ConstMap(th.data() + b.offset, b.rows, b.cols); }
MutMap block(VectorXd& th, const PicnnLayout::Block& b) { return MutMap(th.data() + b.offset, b.rows, b.cols); }

// softplus(z) into `out` and its derivative into `d1`, one exp per entry.
void activate(const MatrixXd& z, MatrixXd& out, MatrixXd& d1) {
  out.resize(z.rows(), z.cols());
  d1.resize(z.rows(), z.cols());
  const Eigen::Index n = z.size();
  const double* zp = z.data();
  double* op = out.data();
  double* dp = d1.data();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = zp[i];
    const double e = std::exp(-std::abs(v));
    op[i] = std::max(v, 0.0) + std::log1p(e);
    dp[i] = v >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
  }
}

struct Forward {
  std::vector<MatrixXd> Y, U, U1;  // Y[0..L], U[0..L-1], U1 = softplus'(U)
  std::vector<MatrixXd> X, Z, Z1;  // X[0..L], Z[0..L-1], Z1 = softplus'(Z)
  std::vector<MatrixXd> A;     // realised W_xx
  VectorXd w;                  // realised readout
};

}  // namespace

Eigen::MatrixXd Picnn::realized_w_xx(int h) const {
  const auto raw = block(theta_, layout_.w_xx[static_cast<std::size_t>(h)]);
  if (arch_.mode == ConstraintMode::polyconvex) return raw.array().square().matrix();
  return raw;
}

Eigen::VectorXd Picnn::realized_readout() const {
  const auto raw = block(theta_, layout_.readout);
  VectorXd w = raw.transpose();
  if (arch_.mode == ConstraintMode::polyconvex) w = w.array().square().matrix();
  return w;
}

void Picnn::check_inputs(const MatrixXd& X0, const MatrixXd& Y0) const {
  if (X0.rows() != arch_.invariant_dim) throw InvalidArgument("picnn: invariant input has wrong dimension");
  if (Y0.rows() != arch_.design_dim) throw InvalidArgument("picnn: design input has wrong dimension");
  if (X0.cols() != Y0.cols()) throw InvalidArgument("picnn: batch size mismatch");
  if (!X0.allFinite() || !Y0.allFinite()) throw NumericalError("picnn: non-finite input");
  if (design_lower_.size() == arch_.design_dim && !warned_bounds_.load()) {
    for (Eigen::Index c = 0; c < Y0.cols(); ++c) {
      if ((Y0.col(c).array() < design_lower_.array() - 1e-12).any() ||
          (Y0.col(c).array() > design_upper_.array() + 1e-12).any()) {
        if (!warned_bounds_.exchange(true)) {
          std::ostringstream os;
          os << "picnn: design point [" << Y0.col(c).transpose() << "] lies outside the training bounds";
          log::warn(os.str());
        }
        break;
      }
    }
  }
}

namespace {

Forward run_forward(const PicnnArchitecture& arch, const PicnnLayout& layout, const VectorXd& th,
                    const MatrixXd& X0, const MatrixXd& Y0) {
  const auto L = static_cast<std::size_t>(arch.layers);
  const bool poly = arch.mode == ConstraintMode::polyconvex;
  Forward f;
  f.Y.resize(L + 1);
  f.U.resize(L);
  f.U1.resize(L);
  f.X.resize(L + 1);
  f.Z.resize(L);
  f.Z1.resize(L);
  f.A.resize(L);
  f.Y[0] = Y0;
  for (std::size_t h = 0; h < L; ++h) {
    f.U[h] = block(th, layout.w_yy[h]) * f.Y[h];
    f.U[h].colwise() += block(th, layout.b_y[h]).col(0);
    activate(f.U[h], f.Y[h + 1], f.U1[h]);
  }
  f.X[0] = X0;
  for (std::size_t h = 0; h < L; ++h) {
    const auto raw = block(th, layout.w_xx[h]);
    f.A[h] = poly ? MatrixXd(raw.array().square().matrix()) : MatrixXd(raw);
    f.Z[h] = f.A[h] * f.X[h] + block(th, layout.w_xy[h]) * f.Y[h + 1];
    f.Z[h].colwise() += block(th, layout.b_x[h]).col(0);
    activate(f.Z[h], f.X[h + 1], f.Z1[h]);
  }
  const auto raw = block(th, layout.readout);
  f.w = raw.transpose();
  if (poly) f.w = f.w.array().square().matrix();
  return f;
}

// d(sum_n w.x_L)/dX0 via a plain backward sweep.
MatrixXd input_gradient(const Forward& f) {
  const auto L = f.Z.size();
  const Eigen::Index N = f.X[0].cols();
  MatrixXd delta = f.w.replicate(1, N);
  for (std::size_t h = L; h-- > 0;) {
    const MatrixXd E = delta.cwiseProduct(f.Z1[h]);
    delta = f.A[h].transpose() * E;
  }
  return delta;
}

}  // namespace

double Picnn::forward(const Vec8& invariants, const Eigen::VectorXd& design) const {
  return forward_batch(MatrixXd(invariants), MatrixXd(design))(0);
}

Vec8 Picnn::grad_input(const Vec8& invariants, const Eigen::VectorXd& design) const {
  return grad_input_batch(MatrixXd(invariants), MatrixXd(design)).col(0);
}

Picnn::ValueGrad Picnn::value_and_grad(const Vec8& invariants, const Eigen::VectorXd& design) const {
  const MatrixXd X0 = invariants;
  const MatrixXd Y0 = design;
  check_inputs(X0, Y0);
  const Forward f = run_forward(arch_, layout_, theta_, X0, scaled_design(Y0));
  ValueGrad out;
  out.value = f.w.dot(f.X.back().col(0));
  out.grad = input_gradient(f).col(0);
  return out;
}

Mat8 Picnn::hess_input(const Vec8& invariants, const Eigen::VectorXd& design) const {
  const MatrixXd X0 = invariants.replicate(1, 8);
  const MatrixXd Y0 = design.replicate(1, 8);
  const MatrixXd H = directional_second_order(X0, Y0, MatrixXd::Identity(8, 8), nullptr);
  return 0.5 * (H + H.transpose());
}

Picnn::ValueGradHess Picnn::value_grad_hess(const Vec8& invariants, const Eigen::VectorXd& design) const {
  const auto vg = value_and_grad(invariants, design);
  return {vg.value, vg.grad, hess_input(invariants, design)};
}

Eigen::RowVectorXd Picnn::forward_batch(const MatrixXd& X0, const MatrixXd& Y0) const {
  check_inputs(X0, Y0);
  const Forward f = run_forward(arch_, layout_, theta_, X0, scaled_design(Y0));
  return f.w.transpose() * f.X.back();
}

Eigen::MatrixXd Picnn::grad_input_batch(const MatrixXd& X0, const MatrixXd& Y0) const {
  check_inputs(X0, Y0);
  return input_gradient(run_forward(arch_, layout_, theta_, X0, scaled_design(Y0)));
}

Eigen::VectorXd Picnn::value_parameter_gradient(const MatrixXd& X0, const MatrixXd& Y0) const {
  check_inputs(X0, Y0);
  const Forward f = run_forward(arch_, layout_, theta_, X0, scaled_design(Y0));
  const auto L = f.Z.size();
  const Eigen::Index N = X0.cols();
  VectorXd grad = VectorXd::Zero(layout_.total);
  std::vector<MatrixXd> Ybar(L + 1);
  for (std::size_t h = 0; h <= L; ++h) Ybar[h] = MatrixXd::Zero(arch_.design_width, N);

  VectorXd wbar = f.X.back().rowwise().sum();
  MatrixXd Xbar = f.w.replicate(1, N);
  std::vector<MatrixXd> Abars(L);
  for (std::size_t h = L; h-- > 0;) {
    const MatrixXd Zbar = Xbar.cwiseProduct(f.Z1[h]);
    Abars[h] = Zbar * f.X[h].transpose();
    Xbar = f.A[h].transpose() * Zbar;
    block(grad, layout_.w_xy[h]).noalias() += Zbar * f.Y[h + 1].transpose();
    block(grad, layout_.b_x[h]).col(0) += Zbar.rowwise().sum();
    Ybar[h + 1].noalias() += block(theta_, layout_.w_xy[h]).transpose() * Zbar;
  }
  for (std::size_t h = L; h-- > 0;) {
    const MatrixXd Ubar = Ybar[h + 1].cwiseProduct(f.U1[h]);
    block(grad, layout_.w_yy[h]).noalias() += Ubar * f.Y[h].transpose();
    block(grad, layout_.b_y[h]).col(0) += Ubar.rowwise().sum();
    if (h > 0) Ybar[h].noalias() += block(theta_, layout_.w_yy[h]).transpose() * Ubar;
  }
  const bool poly = arch_.mode == ConstraintMode::polyconvex;
  for (std::size_t h = 0; h < L; ++h) {
    auto g = block(grad, layout_.w_xx[h]);
    if (poly)
      g += 2.0 * block(theta_, layout_.w_xx[h]).cwiseProduct(Abars[h]);
    else
      g += Abars[h];
  }
  auto gw = block(grad, layout_.readout);
  if (poly)
    gw += 2.0 * block(theta_, layout_.readout).cwiseProduct(wbar.transpose());
  else
    gw += wbar.transpose();
  return grad;
}

Eigen::MatrixXd Picnn::directional_second_order(const MatrixXd& X0, const MatrixXd& Y0, const MatrixXd& R,
                                                VectorXd* grad_theta, MatrixXd* grad_design) const {
  check_inputs(X0, Y0);
  if (R.rows() != X0.rows() || R.cols() != X0.cols()) throw InvalidArgument("picnn: direction batch mismatch");
  const Forward f = run_forward(arch_, layout_, theta_, X0, scaled_design(Y0));
  const auto L = f.Z.size();
  const Eigen::Index N = X0.cols();

  // Tangent sweep along R.
  std::vector<MatrixXd> Xd(L + 1), Zd(L);
  const auto& S1 = f.Z1;
  Xd[0] = R;
  for (std::size_t h = 0; h < L; ++h) {
    Zd[h] = f.A[h] * Xd[h];
    Xd[h + 1] = S1[h].cwiseProduct(Zd[h]);
  }

  // Reverse sweep of Phi = sum_n w . Xd_L.
  const bool want_theta = grad_theta != nullptr;
  const bool want_design = grad_design != nullptr;
  const bool want_y = want_theta || want_design;
  MatrixXd Xdbar = f.w.replicate(1, N);
  MatrixXd Xbar = MatrixXd::Zero(arch_.invariant_width, N);
  std::vector<MatrixXd> Ybar;
  if (want_y) {
    Ybar.resize(L + 1);
    for (std::size_t h = 1; h <= L; ++h) Ybar[h] = MatrixXd::Zero(arch_.design_width, N);
  }
  const bool poly = arch_.mode == ConstraintMode::polyconvex;
  for (std::size_t h = L; h-- > 0;) {
    const MatrixXd S2 = (S1[h].array() * (1.0 - S1[h].array())).matrix();
    const MatrixXd Zdbar = Xdbar.cwiseProduct(S1[h]);
    const MatrixXd Zbar = Xdbar.cwiseProduct(Zd[h]).cwiseProduct(S2) + Xbar.cwiseProduct(S1[h]);
    if (want_theta) {
      MatrixXd Abar = Zdbar * Xd[h].transpose();
      Abar.noalias() += Zbar * f.X[h].transpose();
      auto g = block(*grad_theta, layout_.w_xx[h]);
      if (poly)
        g += 2.0 * block(theta_, layout_.w_xx[h]).cwiseProduct(Abar);
      else
        g += Abar;
      block(*grad_theta, layout_.w_xy[h]).noalias() += Zbar * f.Y[h + 1].transpose();
      block(*grad_theta, layout_.b_x[h]).col(0) += Zbar.rowwise().sum();
    }
    if (want_y) Ybar[h + 1].noalias() += block(theta_, layout_.w_xy[h]).transpose() * Zbar;
    Xdbar = f.A[h].transpose() * Zdbar;
    Xbar = f.A[h].transpose() * Zbar;
  }
  if (want_theta) {
    const VectorXd wbar = Xd.back().rowwise().sum();
    auto gw = block(*grad_theta, layout_.readout);
    if (poly)
      gw += 2.0 * block(theta_, layout_.readout).cwiseProduct(wbar.transpose());
    else
      gw += wbar.transpose();
  }
  if (want_y) {
    for (std::size_t h = L; h-- > 0;) {
      const MatrixXd Ubar = Ybar[h + 1].cwiseProduct(f.U1[h]);
      if (want_theta) {
        block(*grad_theta, layout_.w_yy[h]).noalias() += Ubar * f.Y[h].transpose();
        block(*grad_theta, layout_.b_y[h]).col(0) += Ubar.rowwise().sum();
      }
      const MatrixXd back = block(theta_, layout_.w_yy[h]).transpose() * Ubar;
      if (h > 0)
        Ybar[h] += back;
      else if (want_design)
        *grad_design = design_scale_.size() == 0
                           ? back
                           : MatrixXd((back.array().colwise() / design_scale_.array()).matrix());
    }
  }
  return Xbar;
}

}  // namespace anisoforge
