#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "anisoforge/checkpoint.hpp"
#include "anisoforge/dataset.hpp"
#include "anisoforge/datagen.hpp"
#include "anisoforge/energy.hpp"

namespace anisoforge::training {

struct TrainConfig {
  long long epochs = 20000;
  double learning_rate = 1e-3;
  double epsilon = 1e-3;         ///< weight of the alpha L^p penalty
  double p = 0.25;
  double warmup_fraction = 0.1;  ///< geometric epsilon ramp from 1e-3 eps
  std::optional<AnisotropyClass> known_class;
  std::vector<Vec3> known_directions;
  std::uint64_t seed = 1;
  FormulationMode mode = FormulationMode::polyconvex;
  double gamma = 1.0;
  int design_width = 30;
  int invariant_width = 40;
  int layers = 3;
  int log_every = 100;
  bool early_stop = false;
  double early_stop_tol = 1e-10;
  long long early_stop_window = 1000;
  bool normalize_components = false;
  double active_threshold = 0.5;
  double inactive_threshold = 0.05;
  std::filesystem::path log_csv;          ///< epoch,loss,alpha1,alpha2,phi
  std::filesystem::path checkpoint_path;  ///< written at the end and every checkpoint_every epochs
  long long checkpoint_every = 0;
};

/// Dataset in the layout used by the loss: metrics, targets and unique designs.
struct TrainingData {
  int n = 0;
  int design_dim = 0;
  std::vector<Metric> metrics;
  std::vector<SymTensor3> targets;
  Eigen::MatrixXd Y;                ///< design_dim x n
  std::vector<int> design_index;    ///< sample -> column of U
  Eigen::MatrixXd U;                ///< design_dim x unique designs
  Vec6 component_weight = Vec6::Ones();
  std::vector<double> growth_d1;    ///< dPsi_gr/dJ per sample (set by prepare for a gamma)
};

TrainingData prepare(const Dataset& data, double gamma, bool normalize_components = false);

/// Gradient of the loss with respect to the anisotropy parameters.
struct AnisoGradient {
  double alpha_bar1 = 0.0;
  double alpha_bar2 = 0.0;
  double phi = 0.0;
  Vec3 p_raw = Vec3::Zero();
};

struct LossValue {
  double data = 0.0;            ///< mean squared Frobenius stress residual
  double regularization = 0.0;  ///< eps (a1^p + a2^p), zero for a known class
  double total() const { return data + regularization; }
};

/// Loss and (optionally) its exact gradient for the current model.
LossValue loss(const Surrogate& model, const TrainingData& data, double epsilon, double p,
               Eigen::VectorXd* grad_theta = nullptr, AnisoGradient* grad_aniso = nullptr);

/// Which scalars besides the network weights are trained.
struct TrainableLayout {
  bool alpha = false;
  bool rotation = false;
  Eigen::Index theta = 0;
  Eigen::Index size() const { return theta + (alpha ? 2 : 0) + (rotation ? 4 : 0); }
};

TrainableLayout trainable_layout(const Surrogate& model, bool directions_known);
Eigen::VectorXd pack(const Surrogate& model, const TrainableLayout& layout);
void unpack(const Eigen::VectorXd& z, const TrainableLayout& layout, Surrogate& model);
Eigen::VectorXd pack_gradient(const Eigen::VectorXd& g_theta, const AnisoGradient& g_aniso,
                              const TrainableLayout& layout);

struct Adam {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  void step(Eigen::VectorXd& z, const Eigen::VectorXd& g, AdamState& state) const;
};

struct DirectionEstimate {
  int index = 0;  ///< 1 or 2
  Vec3 n;
  SymTensor3 N;
};

/// Unit directions of the active structure tensors, recovered by simplex search.
std::vector<DirectionEstimate> extract_directions(const AnisotropyState& aniso, double active_threshold = 0.5);

/// "iso", "trans", "ortho" or "undetermined" from the trained alphas.
std::string decide_class(const AnisotropyState& aniso, double active, double inactive);

struct TrainReport {
  long long first_epoch = 0;
  std::vector<double> loss;
  std::vector<double> alpha1, alpha2;
  double final_loss = 0.0;
  double final_data_loss = 0.0;
  double phi = 0.0;
  Vec3 p = Vec3::Zero();
  SymTensor3 N1, N2;
  std::vector<DirectionEstimate> directions;
  std::string decided_class;
  double wall_time = 0.0;
  bool stopped_early = false;
};

nlohmann::json to_json(const TrainReport& r);

struct TrainResult {
  Checkpoint checkpoint;
  TrainReport report;
};

/// Full-batch Adam. When `resume` is given, training continues from its
/// parameters, optimizer state and epoch counter.
TrainResult train(const Dataset& data, const TrainConfig& config, const Checkpoint* resume = nullptr);

struct EvalMetrics {
  Vec6 relative_rmse = Vec6::Zero();  ///< per stored stress component
  double mse = 0.0;                   ///< mean squared Frobenius residual
  std::size_t samples = 0;
};

EvalMetrics evaluate(const Surrogate& model, const Dataset& data);

struct CurveRow {
  double F11 = 1.0;
  SymTensor3 predicted;
  std::optional<SymTensor3> reference;
};

/// Uniaxial path F = diag(F11, 1, 1), F11 on a linspace.
std::vector<CurveRow> uniaxial_curve(const Surrogate& model, const Eigen::VectorXd& D, double lo = 0.8,
                                     double hi = 1.2, int points = 41,
                                     const std::function<SymTensor3(const SymTensor3&)>& reference = {});
void write_curve_csv(const std::vector<CurveRow>& rows, const std::filesystem::path& path);

struct StudyRun {
  int n_F = 0;
  std::size_t records = 0;
  TrainReport report;
};

/// Trains one model per sample size with independent F draws per parameter set.
std::vector<StudyRun> sample_size_study(const datagen::ModelSpec& model, datagen::SamplerSpec sampler,
                                        const std::vector<int>& sizes, const TrainConfig& config,
                                        std::uint64_t data_seed);

}  // namespace anisoforge::training
