#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "anisoforge/energy.hpp"
#include "anisoforge/optim.hpp"

namespace anisoforge::fem {

/// Constitutive law at a quadrature point: S(C) and its Voigt tangent.
using Material = std::function<StressTangent(const SymTensor3& C)>;

/// Surrogate at a fixed design and orientation; normalisation is evaluated once.
Material surrogate_material(const Surrogate& model, const Eigen::VectorXd& D, const MaterialFrame& frame);

struct Mesh {
  Eigen::Matrix3Xd nodes;
  std::vector<std::array<int, 8>> elements;  ///< hex8, VTK node order
  int node_count() const { return static_cast<int>(nodes.cols()); }
  int dof_count() const { return 3 * node_count(); }
};

/// Structured box mesh on [0,Lx] x [0,Ly] x [0,Lz].
Mesh box_mesh(double Lx, double Ly, double Lz, int nx, int ny, int nz);

struct Dirichlet {
  std::vector<int> dofs;
  std::vector<double> values;  ///< at full load
};

struct FemConfig {
  double Lx = 4.0, Ly = 1.0, Lz = 1.0;
  int nx = 8, ny = 2, nz = 2;
  double u0 = 0.1;  ///< downward displacement of the midspan top face
  int load_steps = 4;
  double tolerance = 1e-9;  ///< residual infinity norm
  int max_newton = 25;
  Eigen::VectorXd design;
  std::optional<RotationParams> orientation;  ///< overrides the trained orientation
};

Mesh beam_mesh(const FemConfig& config);
/// Simple supports on the bottom edges (x = 0 pinned, x = Lx roller in z)
/// and the prescribed midspan displacement on the top face.
Dirichlet beam_boundary(const Mesh& mesh, const FemConfig& config);

struct QuadraturePoint {
  Tensor3 F = Mat3::Identity();
  SymTensor3 S;
  Mat3 cauchy = Mat3::Zero();
  double von_mises = 0.0;
};

struct FieldState {
  Eigen::VectorXd u;
  std::vector<std::array<QuadraturePoint, 8>> points;
  Eigen::VectorXd reactions;                  ///< internal force at constrained dofs (in `Dirichlet` order)
  std::vector<std::vector<double>> residuals;  ///< Newton residual history per load step
  double residual_norm = 0.0;
  bool converged = false;
  bool indefinite_stiffness = false;
};

/// Internal force vector and tangent stiffness for displacement u.
void assemble(const Mesh& mesh, const Material& material, const Eigen::VectorXd& u, Eigen::VectorXd* force,
              Eigen::MatrixXd* stiffness, std::vector<std::array<QuadraturePoint, 8>>* points = nullptr);

/// Newton-Raphson with load stepping of the prescribed values.
FieldState solve_static(const Mesh& mesh, const Dirichlet& bc, const Material& material, int load_steps,
                        double tolerance, int max_newton);
FieldState solve_beam(const Surrogate& model, const FemConfig& config);

double von_mises(const Mat3& sigma);
double von_mises_max(const FieldState& state);

/// Legacy VTK unstructured grid with displacement (point) and Von Mises (cell, max over points).
void write_vtk(const Mesh& mesh, const FieldState& state, const std::filesystem::path& path);

struct OrientationRun {
  inverse::OptimResult result;
  double phi = 0.0;
  Vec3 p_raw = Vec3::UnitZ();
  double vm_max = 0.0;
  bool failed = false;
  std::string error;
};

struct OrientationResult {
  std::vector<OrientationRun> runs;
  int best = -1;
  bool orientation_insensitive = false;
};

/// Nelder-Mead over (phi, p_raw) minimising the maximum Von Mises stress,
/// restarted from seeded random orientations.
OrientationResult invert_orientation(const Surrogate& model, const FemConfig& config, int restarts,
                                     const inverse::NmConfig& nm, std::uint64_t seed);

}  // namespace anisoforge::fem
