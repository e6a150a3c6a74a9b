#include "anisoforge/fem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include "anisoforge/errors.hpp"
#include "anisoforge/logging.hpp"

namespace anisoforge::fem {

Material surrogate_material(const Surrogate& model, const Eigen::VectorXd& D, const MaterialFrame& frame) {
  if (D.size() != model.network().architecture().design_dim)
    throw InvalidArgument("fem: design vector size does not match the model");
  const NormalizationCoeffs norm = model.normalization_coeffs(D, frame);
  return [&model, D, frame, norm](const SymTensor3& C) { return model.stress_tangent(C, D, frame, norm); };
}

Mesh box_mesh(double Lx, double Ly, double Lz, int nx, int ny, int nz) {
  if (!(Lx > 0 && Ly > 0 && Lz > 0)) throw InvalidArgument("mesh: dimensions must be positive");
  if (nx < 1 || ny < 1 || nz < 1) throw InvalidArgument("mesh: divisions must be >= 1");
  Mesh m;
  m.nodes.resize(3, (nx + 1) * (ny + 1) * (nz + 1));
  auto id = [&](int i, int j, int k) { return i + (nx + 1) * (j + (ny + 1) * k); };
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i) m.nodes.col(id(i, j, k)) << Lx * i / nx, Ly * j / ny, Lz * k / nz;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        m.elements.push_back({id(i, j, k), id(i + 1, j, k), id(i + 1, j + 1, k), id(i, j + 1, k), id(i, j, k + 1),
                              id(i + 1, j, k + 1), id(i + 1, j + 1, k + 1), id(i, j + 1, k + 1)});
  return m;
}

Mesh beam_mesh(const FemConfig& c) { return box_mesh(c.Lx, c.Ly, c.Lz, c.nx, c.ny, c.nz); }

Dirichlet beam_boundary(const Mesh& mesh, const FemConfig& c) {
  if (c.nx % 2 != 0) throw InvalidArgument("beam: nx must be even so that a node row sits at midspan");
  const double tol = 1e-9 * std::max({c.Lx, c.Ly, c.Lz});
  Dirichlet bc;
  auto fix = [&](int node, int dir, double v) {
    bc.dofs.push_back(3 * node + dir);
    bc.values.push_back(v);
  };
  bool pinned_y = false;
  for (int a = 0; a < mesh.node_count(); ++a) {
    const Vec3 X = mesh.nodes.col(a);
    const bool bottom = std::abs(X.z()) < tol;
    if (bottom && std::abs(X.x()) < tol) {
      fix(a, 0, 0.0);
      if (!pinned_y) {
        fix(a, 1, 0.0);
        pinned_y = true;
      }
      fix(a, 2, 0.0);
    } else if (bottom && std::abs(X.x() - c.Lx) < tol) {
      fix(a, 2, 0.0);
    } else if (std::abs(X.z() - c.Lz) < tol && std::abs(X.x() - 0.5 * c.Lx) < tol) {
      fix(a, 2, -c.u0);
    }
  }
  return bc;
}

namespace {

constexpr std::array<std::array<double, 3>, 8> kCorner{{{-1, -1, -1},
                                                        {1, -1, -1},
                                                        {1, 1, -1},
                                                        {-1, 1, -1},
                                                        {-1, -1, 1},
                                                        {1, -1, 1},
                                                        {1, 1, 1},
                                                        {-1, 1, 1}}};

/// dN_a/dxi at a point, one column per node.
Eigen::Matrix<double, 3, 8> shape_derivatives(const Vec3& xi) {
  Eigen::Matrix<double, 3, 8> d;
  for (int a = 0; a < 8; ++a) {
    const auto& c = kCorner[static_cast<std::size_t>(a)];
    const double s0 = 1 + c[0] * xi[0], s1 = 1 + c[1] * xi[1], s2 = 1 + c[2] * xi[2];
    d(0, a) = 0.125 * c[0] * s1 * s2;
    d(1, a) = 0.125 * s0 * c[1] * s2;
    d(2, a) = 0.125 * s0 * s1 * c[2];
  }
  return d;
}

const std::array<Eigen::Matrix<double, 3, 8>, 8>& gauss_derivatives() {
  static const auto table = [] {
    std::array<Eigen::Matrix<double, 3, 8>, 8> t;
    const double g = 1.0 / std::sqrt(3.0);
    for (int q = 0; q < 8; ++q) {
      const auto& c = kCorner[static_cast<std::size_t>(q)];
      t[static_cast<std::size_t>(q)] = shape_derivatives(Vec3(g * c[0], g * c[1], g * c[2]));
    }
    return t;
  }();
  return table;
}

using ElementVector = Eigen::Matrix<double, 24, 1>;
using ElementMatrix = Eigen::Matrix<double, 24, 24>;

void element(const Mesh& mesh, int e, const Material& material, const Eigen::VectorXd& u, ElementVector* fe,
             ElementMatrix* ke, std::array<QuadraturePoint, 8>* points) {
  const auto& conn = mesh.elements[static_cast<std::size_t>(e)];
  Eigen::Matrix<double, 3, 8> X, U;
  for (int a = 0; a < 8; ++a) {
    const int n = conn[static_cast<std::size_t>(a)];
    X.col(a) = mesh.nodes.col(n);
    U.col(a) = u.segment<3>(3 * n);
  }
  if (fe) fe->setZero();
  if (ke) ke->setZero();
  for (int q = 0; q < 8; ++q) {
    const auto& dN = gauss_derivatives()[static_cast<std::size_t>(q)];
    const Mat3 J0 = X * dN.transpose();  // dX/dxi
    const double detJ0 = J0.determinant();
    if (!(detJ0 > 0.0)) throw InvalidArgument("mesh: non-positive Jacobian in element " + std::to_string(e));
    const Eigen::Matrix<double, 3, 8> G = J0.transpose().inverse() * dN;  // dN/dX
    const Mat3 F = Mat3::Identity() + U * G.transpose();
    const double detF = F.determinant();
    if (!(detF > 0.0))
      throw NumericalError("fem: inverted element " + std::to_string(e) + " (det F = " + std::to_string(detF) + ")");
    const StressTangent st = material(cauchy_green(F));
    const Vec6& S = st.S.components();
    const Mat3 Sm = st.S.matrix();

    Eigen::Matrix<double, 6, 24> B;
    for (int a = 0; a < 8; ++a) {
      const Vec3 g = G.col(a);
      for (int k = 0; k < 3; ++k) {
        const int c = 3 * a + k;
        B(0, c) = F(k, 0) * g[0];
        B(1, c) = F(k, 1) * g[1];
        B(2, c) = F(k, 2) * g[2];
        B(3, c) = F(k, 0) * g[1] + F(k, 1) * g[0];
        B(4, c) = F(k, 0) * g[2] + F(k, 2) * g[0];
        B(5, c) = F(k, 1) * g[2] + F(k, 2) * g[1];
      }
    }
    if (fe) fe->noalias() += detJ0 * B.transpose() * S;
    if (ke) {
      ke->noalias() += detJ0 * B.transpose() * st.tangent * B;
      const Eigen::Matrix<double, 8, 8> geo = detJ0 * G.transpose() * Sm * G;
      for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 8; ++b)
          for (int k = 0; k < 3; ++k) (*ke)(3 * a + k, 3 * b + k) += geo(a, b);
    }
    if (points) {
      auto& p = (*points)[static_cast<std::size_t>(q)];
      p.F = F;
      p.S = st.S;
      p.cauchy = F * Sm * F.transpose() / detF;
      p.cauchy = 0.5 * (p.cauchy + p.cauchy.transpose()).eval();
      p.von_mises = von_mises(p.cauchy);
    }
  }
}

}  // namespace

void assemble(const Mesh& mesh, const Material& material, const Eigen::VectorXd& u, Eigen::VectorXd* force,
              Eigen::MatrixXd* stiffness, std::vector<std::array<QuadraturePoint, 8>>* points) {
  if (u.size() != mesh.dof_count()) throw InvalidArgument("assemble: displacement size mismatch");
  const int ne = static_cast<int>(mesh.elements.size());
  std::vector<ElementVector> fe(force ? static_cast<std::size_t>(ne) : 0);
  std::vector<ElementMatrix> ke(stiffness ? static_cast<std::size_t>(ne) : 0);
  if (points) points->assign(static_cast<std::size_t>(ne), {});

  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (int e = 0; e < ne; ++e) {
    try {
      const auto i = static_cast<std::size_t>(e);
      element(mesh, e, material, u, force ? &fe[i] : nullptr, stiffness ? &ke[i] : nullptr,
              points ? &(*points)[i] : nullptr);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  // Scatter in element order so the sums do not depend on the thread count.
  if (force) force->setZero(mesh.dof_count());
  if (stiffness) stiffness->setZero(mesh.dof_count(), mesh.dof_count());
  for (int e = 0; e < ne; ++e) {
    const auto& conn = mesh.elements[static_cast<std::size_t>(e)];
    for (int a = 0; a < 8; ++a) {
      const int ga = 3 * conn[static_cast<std::size_t>(a)];
      if (force) force->segment<3>(ga) += fe[static_cast<std::size_t>(e)].segment<3>(3 * a);
      if (stiffness)
        for (int b = 0; b < 8; ++b) {
          const int gb = 3 * conn[static_cast<std::size_t>(b)];
          stiffness->block<3, 3>(ga, gb) += ke[static_cast<std::size_t>(e)].block<3, 3>(3 * a, 3 * b);
        }
    }
  }
}

FieldState solve_static(const Mesh& mesh, const Dirichlet& bc, const Material& material, int load_steps,
                        double tolerance, int max_newton) {
  if (load_steps < 1) throw InvalidArgument("solve: load_steps must be >= 1");
  if (!(tolerance > 0.0)) throw InvalidArgument("solve: tolerance must be positive");
  if (bc.dofs.size() != bc.values.size()) throw InvalidArgument("solve: Dirichlet dofs/values size mismatch");
  const int ndof = mesh.dof_count();
  std::vector<char> fixed(static_cast<std::size_t>(ndof), 0);
  for (int d : bc.dofs) {
    if (d < 0 || d >= ndof) throw InvalidArgument("solve: Dirichlet dof out of range");
    if (fixed[static_cast<std::size_t>(d)]) throw InvalidArgument("solve: dof constrained twice");
    fixed[static_cast<std::size_t>(d)] = 1;
  }
  std::vector<int> free;
  for (int d = 0; d < ndof; ++d)
    if (!fixed[static_cast<std::size_t>(d)]) free.push_back(d);
  const auto nf = static_cast<Eigen::Index>(free.size());

  FieldState state;
  state.u = Eigen::VectorXd::Zero(ndof);
  Eigen::VectorXd f;
  Eigen::MatrixXd K;
  bool warned = false;
  for (int step = 1; step <= load_steps; ++step) {
    const double lambda = static_cast<double>(step) / load_steps;
    for (std::size_t i = 0; i < bc.dofs.size(); ++i) state.u[bc.dofs[i]] = lambda * bc.values[i];
    auto& hist = state.residuals.emplace_back();
    bool done = false;
    for (int it = 0; it <= max_newton; ++it) {
      assemble(mesh, material, state.u, &f, nf > 0 ? &K : nullptr);
      Eigen::VectorXd r(nf);
      for (Eigen::Index i = 0; i < nf; ++i) r[i] = f[free[static_cast<std::size_t>(i)]];
      const double rn = nf > 0 ? r.lpNorm<Eigen::Infinity>() : 0.0;
      if (!std::isfinite(rn)) throw NumericalError("Newton: non-finite residual in load step " + std::to_string(step));
      hist.push_back(rn);
      state.residual_norm = rn;
      if (rn < tolerance) {
        done = true;
        break;
      }
      if (it == max_newton) break;
      Eigen::MatrixXd Kff(nf, nf);
      for (Eigen::Index i = 0; i < nf; ++i)
        for (Eigen::Index j = 0; j < nf; ++j) Kff(i, j) = K(free[static_cast<std::size_t>(i)], free[static_cast<std::size_t>(j)]);
      Eigen::VectorXd du;
      Eigen::LLT<Eigen::MatrixXd> llt(Kff);
      if (llt.info() == Eigen::Success) {
        du = llt.solve(-r);
      } else {
        if (!warned) {
          log::warn("fem: global stiffness is not positive definite (load step " + std::to_string(step) +
                    "); using LU");
          warned = true;
        }
        state.indefinite_stiffness = true;
        du = Kff.partialPivLu().solve(-r);
      }
      if (!du.allFinite()) throw NumericalError("Newton: singular stiffness in load step " + std::to_string(step));
      for (Eigen::Index i = 0; i < nf; ++i) state.u[free[static_cast<std::size_t>(i)]] += du[i];
    }
    if (!done) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "Newton did not converge: load step %d/%d, %d iterations, residual %.3e (tol %.1e)",
                    step, load_steps, static_cast<int>(hist.size()) - 1, hist.back(), tolerance);
      throw NumericalError(buf);
    }
  }
  assemble(mesh, material, state.u, &f, nullptr, &state.points);
  state.reactions.resize(static_cast<Eigen::Index>(bc.dofs.size()));
  for (std::size_t i = 0; i < bc.dofs.size(); ++i) state.reactions[static_cast<Eigen::Index>(i)] = f[bc.dofs[i]];
  state.converged = true;
  return state;
}

namespace {

MaterialFrame beam_frame(const Surrogate& model, const FemConfig& c) {
  if (!c.orientation) return model.frame();
  return make_frame(model.anisotropy(), rodrigues(*c.orientation));
}

}  // namespace

FieldState solve_beam(const Surrogate& model, const FemConfig& c) {
  const Mesh mesh = beam_mesh(c);
  const Dirichlet bc = beam_boundary(mesh, c);
  return solve_static(mesh, bc, surrogate_material(model, c.design, beam_frame(model, c)), c.load_steps, c.tolerance,
                      c.max_newton);
}

double von_mises(const Mat3& sigma) {
  const Mat3 dev = sigma - sigma.trace() / 3.0 * Mat3::Identity();
  return std::sqrt(1.5 * dev.cwiseProduct(dev).sum());
}

double von_mises_max(const FieldState& state) {
  if (!state.converged) throw InvalidArgument("von_mises_max: state is not converged");
  double m = 0.0;
  for (const auto& el : state.points)
    for (const auto& p : el) m = std::max(m, p.von_mises);
  return m;
}

void write_vtk(const Mesh& mesh, const FieldState& state, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  const int nn = mesh.node_count();
  const auto ne = mesh.elements.size();
  std::vector<double> cell_vm(ne, 0.0), node_vm(static_cast<std::size_t>(nn), 0.0);
  std::vector<int> node_count(static_cast<std::size_t>(nn), 0);
  for (std::size_t e = 0; e < ne && e < state.points.size(); ++e) {
    for (const auto& p : state.points[e]) cell_vm[e] = std::max(cell_vm[e], p.von_mises);
    for (int n : mesh.elements[e]) {
      node_vm[static_cast<std::size_t>(n)] += cell_vm[e];
      ++node_count[static_cast<std::size_t>(n)];
    }
  }
  char buf[128];
  os << "# vtk DataFile Version 3.0\nanisoforge beam\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << nn << " double\n";
  for (int a = 0; a < nn; ++a) {
    std::snprintf(buf, sizeof buf, "%.10g %.10g %.10g\n", mesh.nodes(0, a), mesh.nodes(1, a), mesh.nodes(2, a));
    os << buf;
  }
  os << "CELLS " << ne << ' ' << 9 * ne << '\n';
  for (const auto& el : mesh.elements) {
    os << 8;
    for (int n : el) os << ' ' << n;
    os << '\n';
  }
  os << "CELL_TYPES " << ne << '\n';
  for (std::size_t e = 0; e < ne; ++e) os << "12\n";
  os << "POINT_DATA " << nn << "\nVECTORS displacement double\n";
  for (int a = 0; a < nn; ++a) {
    const Vec3 u = state.u.size() == mesh.dof_count() ? Vec3(state.u.segment<3>(3 * a)) : Vec3::Zero();
    std::snprintf(buf, sizeof buf, "%.10g %.10g %.10g\n", u[0], u[1], u[2]);
    os << buf;
  }
  os << "SCALARS von_mises double 1\nLOOKUP_TABLE default\n";
  for (int a = 0; a < nn; ++a) {
    const auto i = static_cast<std::size_t>(a);
    std::snprintf(buf, sizeof buf, "%.10g\n", node_count[i] ? node_vm[i] / node_count[i] : 0.0);
    os << buf;
  }
  os << "CELL_DATA " << ne << "\nSCALARS von_mises_max double 1\nLOOKUP_TABLE default\n";
  for (double v : cell_vm) {
    std::snprintf(buf, sizeof buf, "%.10g\n", v);
    os << buf;
  }
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

OrientationResult invert_orientation(const Surrogate& model, const FemConfig& config, int restarts,
                                     const inverse::NmConfig& nm, std::uint64_t seed) {
  if (restarts < 1) throw InvalidArgument("fem-invert: restarts must be >= 1");
  const Mesh mesh = beam_mesh(config);
  const Dirichlet bc = beam_boundary(mesh, config);
  const AnisotropyState& an = model.anisotropy();

  auto vm_at = [&](double phi, const Vec3& p) {
    const Material mat = surrogate_material(model, config.design, make_frame(an, rodrigues(phi, p)));
    return von_mises_max(solve_static(mesh, bc, mat, config.load_steps, config.tolerance, config.max_newton));
  };
  auto objective = [&](const Eigen::VectorXd& x) {
    const Vec3 p = x.tail<3>();
    if (p.norm() < 1e-12) return std::numeric_limits<double>::infinity();
    try {
      return vm_at(x[0], p);
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  std::vector<Eigen::VectorXd> starts;
  for (int k = 0; k < restarts; ++k) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(k));
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    const Vec3 axis = random_rotation(rng).col(0);
    Eigen::VectorXd x0(4);
    x0 << u(rng), axis;
    starts.push_back(x0);
  }

  OrientationResult out;
  std::vector<double> f0;
  for (const auto& x0 : starts) f0.push_back(objective(x0));
  const double lo = *std::min_element(f0.begin(), f0.end());
  const double hi = *std::max_element(f0.begin(), f0.end());
  out.orientation_insensitive =
      std::isfinite(hi) && (hi - lo) <= 1e-10 * std::max(1.0, std::abs(hi)) &&
      (restarts > 1 || (an.alpha1() < 0.5 && an.alpha2() < 0.5));

  for (int k = 0; k < restarts; ++k) {
    OrientationRun run;
    const auto& x0 = starts[static_cast<std::size_t>(k)];
    if (out.orientation_insensitive) {
      run.result.x = x0;
      run.result.f = f0[static_cast<std::size_t>(k)];
      run.result.evaluations = 1;
      run.result.converged = true;
      run.result.history.push_back({0, 1, run.result.f, x0});
    } else {
      run.result = inverse::nelder_mead(objective, nm, x0);
    }
    run.phi = run.result.x[0];
    run.p_raw = run.result.x.tail<3>();
    if (!std::isfinite(run.result.f)) {
      run.failed = true;
      run.error = "Newton failed at every visited orientation";
    } else {
      run.vm_max = run.result.f;
    }
    out.runs.push_back(std::move(run));
    const auto& r = out.runs.back();
    if (!r.failed && (out.best < 0 || r.result.f < out.runs[static_cast<std::size_t>(out.best)].result.f)) out.best = k;
  }
  if (out.best < 0) throw NumericalError("fem-invert: Newton failed in every run");
  return out;
}

}  // namespace anisoforge::fem
