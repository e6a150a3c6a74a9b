#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif
#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "anisoforge/checkpoint.hpp"
#include "anisoforge/datagen.hpp"
#include "anisoforge/errors.hpp"
#include "anisoforge/fem.hpp"
#include "anisoforge/inverse.hpp"
#include "anisoforge/logging.hpp"
#include "anisoforge/training.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace anisoforge;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct Common {
  std::string config_file;
  std::string run_name;
  std::string runs_dir = "runs";
  std::vector<std::string> assignments;  // --set and command flags, applied in order
  int threads = 0;
  std::string log_level = "info";
};

struct RunDir {
  fs::path root, config, checkpoints, logs, reports;
};

RunDir make_run_dir(const Common& c, const std::string& command) {
  RunDir d;
  d.root = fs::path(c.runs_dir) / (c.run_name.empty() ? command : c.run_name);
  d.config = d.root / "config";
  d.checkpoints = d.root / "checkpoints";
  d.logs = d.root / "logs";
  d.reports = d.root / "reports";
  for (const auto& p : {d.config, d.checkpoints, d.logs, d.reports}) fs::create_directories(p);
  return d;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Resolved config: file, then --set assignments and command flags in order.
cli::RunConfig resolve(const Common& c, const RunDir& dir) {
  cli::RunConfig cfg;
  cli::ConfigBinding b(cfg);
  if (!c.config_file.empty()) b.load_ini(c.config_file);
  for (const auto& a : c.assignments) b.set_assignment(a);
  write_text(dir.config / "resolved.ini", b.to_ini());
  return cfg;
}

void apply_threads(int threads) {
  if (threads <= 0) {
    if (const char* env = std::getenv("ANISOFORGE_THREADS")) threads = std::atoi(env);
  }
  if (threads <= 0) return;
#ifdef _OPENMP
  omp_set_num_threads(threads);
#endif
  Eigen::setNbThreads(threads);
}

std::string checkpoint_class(const Checkpoint& ck) {
  if (ck.model.anisotropy().fixed_class) return to_string(*ck.model.anisotropy().fixed_class);
  if (ck.extra.contains("decided_class")) return ck.extra["decided_class"].get<std::string>();
  return "undetermined";
}

Eigen::VectorXd default_design(const Checkpoint& ck, const std::vector<double>& given) {
  const Picnn& net = ck.model.network();
  const int dim = net.architecture().design_dim;
  if (!given.empty()) {
    if (static_cast<int>(given.size()) != dim)
      throw InvalidArgument("design has " + std::to_string(given.size()) + " entries, model expects " +
                            std::to_string(dim));
    return to_eigen(given);
  }
  if (net.design_lower().size() != dim) throw InvalidArgument("no design given and checkpoint has no design bounds");
  return 0.5 * (net.design_lower() + net.design_upper());
}

std::optional<RotationParams> fem_orientation(const cli::FemOptions& f) {
  if (f.p.empty()) return std::nullopt;
  if (f.p.size() != 3) throw InvalidArgument("fem.p needs three components");
  return RotationParams{f.phi, Vec3(f.p[0], f.p[1], f.p[2])};
}

json field_summary(const fem::FieldState& s, const fem::Dirichlet& bc) {
  json j;
  j["converged"] = s.converged;
  j["residual_inf_norm"] = s.residual_norm;
  j["von_mises_max"] = fem::von_mises_max(s);
  j["residual_history"] = s.residuals;
  j["indefinite_stiffness"] = s.indefinite_stiffness;
  Vec3 total = Vec3::Zero();
  double load = 0.0;
  for (std::size_t i = 0; i < bc.dofs.size(); ++i) {
    const double r = s.reactions[static_cast<Eigen::Index>(i)];
    total[bc.dofs[i] % 3] += r;
    if (bc.values[i] != 0.0) load += r;
  }
  j["reaction_sum"] = {total[0], total[1], total[2]};
  j["prescribed_face_force"] = load;
  return j;
}

// ---------------------------------------------------------------- commands

int cmd_gen_data(const Common& c, const std::string& out) {
  const RunDir dir = make_run_dir(c, "gen-data");
  const cli::RunConfig cfg = resolve(c, dir);
  const auto spec = cli::model_spec(cfg.data);
  const Dataset data = datagen::build_dataset(spec, cfg.data.sampler, cfg.data.seed);
  const fs::path path = out.empty() ? dir.reports / "dataset.txt" : fs::path(out);
  write_dataset(data, path);
  std::printf("records: %zu\ndesign variables:", data.size());
  for (const auto& n : data.design_names) std::printf(" %s", n.c_str());
  std::printf("\nwritten: %s\n", path.string().c_str());
  return 0;
}

int cmd_train(const Common& c, const std::string& data_path, const std::string& resume_path) {
  const RunDir dir = make_run_dir(c, "train");
  cli::RunConfig cfg = resolve(c, dir);
  const Dataset data = read_dataset(fs::path(data_path));
  auto& tc = cfg.train;
  tc.log_csv = dir.logs / "train.csv";
  tc.checkpoint_path = dir.checkpoints / "model.json";
  std::optional<Checkpoint> resume;
  if (!resume_path.empty()) resume = load_checkpoint(resume_path);
  const auto res = training::train(data, tc, resume ? &*resume : nullptr);
  json rep = training::to_json(res.report);
  rep["dataset"] = data.metadata;
  rep["records"] = data.size();
  write_json(dir.reports / "train.json", rep);
  const auto& an = res.checkpoint.model.anisotropy();
  std::printf("epochs %lld..%lld  final loss %.6e  alpha1 %.4f  alpha2 %.4f  class %s\n", res.report.first_epoch,
              res.checkpoint.epoch, res.report.final_loss, an.alpha1(), an.alpha2(),
              res.report.decided_class.c_str());
  for (const auto& d : res.report.directions)
    std::printf("direction %d: %.6f %.6f %.6f\n", d.index, d.n[0], d.n[1], d.n[2]);
  std::printf("checkpoint: %s\n", tc.checkpoint_path.string().c_str());
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& ck_path, const std::string& data_path,
                 const std::vector<double>& curve_design) {
  const RunDir dir = make_run_dir(c, "evaluate");
  resolve(c, dir);
  const Checkpoint ck = load_checkpoint(ck_path);
  json rep;
  if (!data_path.empty()) {
    const Dataset data = read_dataset(fs::path(data_path));
    if (data.design_names != ck.design_names) throw InvalidArgument("dataset design variables differ from checkpoint");
    const auto m = training::evaluate(ck.model, data);
    rep["samples"] = m.samples;
    rep["mse"] = m.mse;
    rep["relative_rmse"] = to_vector(m.relative_rmse);
    std::printf("samples %zu  mse %.6e  relative rmse (11,22,33,12,13,23):", m.samples, m.mse);
    for (int i = 0; i < 6; ++i) std::printf(" %.4e", m.relative_rmse[i]);
    std::printf("\n");
  }
  const Eigen::VectorXd D = default_design(ck, curve_design);
  const auto rows = training::uniaxial_curve(ck.model, D);
  training::write_curve_csv(rows, dir.reports / "uniaxial.csv");
  rep["curve_design"] = to_vector(D);
  write_json(dir.reports / "evaluate.json", rep);
  return 0;
}

int cmd_invert(const Common& c, const std::string& ck_path, const std::string& targets_path) {
  const RunDir dir = make_run_dir(c, "invert");
  const cli::RunConfig cfg = resolve(c, dir);
  const Checkpoint ck = load_checkpoint(ck_path);
  const Dataset targets = read_dataset(fs::path(targets_path));
  if (targets.design_names != ck.design_names)
    throw InvalidArgument("target design variables differ from the checkpoint");
  const std::string ck_cls = checkpoint_class(ck);
  if (targets.metadata.contains("class") && ck_cls != "undetermined" &&
      targets.metadata["class"].get<std::string>() != ck_cls)
    throw InvalidArgument("class mismatch: targets are " + targets.metadata["class"].get<std::string>() +
                          ", checkpoint is " + ck_cls);
  const Picnn& net = ck.model.network();
  Eigen::VectorXd lo = cfg.inverse.lower.empty() ? net.design_lower() : to_eigen(cfg.inverse.lower);
  Eigen::VectorXd hi = cfg.inverse.upper.empty() ? net.design_upper() : to_eigen(cfg.inverse.upper);
  auto problem = inverse::InverseProblem::from_dataset(ck.model, targets, lo, hi, cfg.inverse.free_orientation);
  const auto sol = inverse::invert_design(problem, cfg.inverse.cma, cfg.inverse.restarts, ck.design_names);
  for (std::size_t r = 0; r < sol.runs.size(); ++r)
    inverse::write_trace_csv(sol, static_cast<int>(r), dir.logs / ("invert_trace_run" + std::to_string(r) + ".csv"));
  write_json(dir.reports / "invert.json", inverse::to_json(sol));
  std::printf("objective %.6e (run %d)\n", sol.objective, sol.best_run);
  for (Eigen::Index i = 0; i < sol.design.size(); ++i)
    std::printf("%s = %.8g\n", ck.design_names[static_cast<std::size_t>(i)].c_str(), sol.design[i]);
  for (const auto& d : sol.directions) std::printf("direction: %.6f %.6f %.6f\n", d[0], d[1], d[2]);
  return 0;
}

int cmd_fem(const Common& c, const std::string& ck_path) {
  const RunDir dir = make_run_dir(c, "fem");
  const cli::RunConfig cfg = resolve(c, dir);
  const Checkpoint ck = load_checkpoint(ck_path);
  fem::FemConfig fc = cfg.fem.fem;
  fc.design = default_design(ck, cfg.fem.design);
  fc.orientation = fem_orientation(cfg.fem);
  const fem::Mesh mesh = fem::beam_mesh(fc);
  const fem::Dirichlet bc = fem::beam_boundary(mesh, fc);
  const auto state = fem::solve_beam(ck.model, fc);
  fem::write_vtk(mesh, state, dir.reports / "beam.vtk");
  json rep = field_summary(state, bc);
  rep["design"] = to_vector(fc.design);
  write_json(dir.reports / "fem.json", rep);
  std::printf("max von Mises %.8e  residual %.3e\n", fem::von_mises_max(state), state.residual_norm);
  return 0;
}

int cmd_fem_invert(const Common& c, const std::string& ck_path) {
  const RunDir dir = make_run_dir(c, "fem-invert");
  const cli::RunConfig cfg = resolve(c, dir);
  const Checkpoint ck = load_checkpoint(ck_path);
  fem::FemConfig fc = cfg.fem.fem;
  fc.design = default_design(ck, cfg.fem.design);
  const auto res = fem::invert_orientation(ck.model, fc, cfg.fem.restarts, cfg.fem.nm, cfg.fem.seed);
  json runs = json::array();
  for (std::size_t k = 0; k < res.runs.size(); ++k) {
    const auto& r = res.runs[k];
    std::ofstream os(dir.logs / ("fem_invert_trace_run" + std::to_string(k) + ".csv"));
    if (!os) throw IoError("cannot write trace file");
    os << "iter,evaluations,von_mises_max,phi,p1,p2,p3\n";
    char buf[256];
    for (const auto& h : r.result.history) {
      std::snprintf(buf, sizeof buf, "%d,%ld,%.12e,%.12g,%.12g,%.12g,%.12g\n", h.iteration, h.evaluations,
                    h.f_best, h.x_best[0], h.x_best[1], h.x_best[2], h.x_best[3]);
      os << buf;
    }
    runs.push_back({{"von_mises_max", r.vm_max}, {"phi", r.phi}, {"p", {r.p_raw[0], r.p_raw[1], r.p_raw[2]}},
                    {"evaluations", r.result.evaluations}, {"failed", r.failed}, {"error", r.error}});
  }
  const auto& best = res.runs[static_cast<std::size_t>(res.best)];
  fc.orientation = RotationParams{best.phi, best.p_raw};
  const fem::Mesh mesh = fem::beam_mesh(fc);
  const auto state = fem::solve_beam(ck.model, fc);
  fem::write_vtk(mesh, state, dir.reports / "beam_best.vtk");
  json rep;
  rep["runs"] = runs;
  rep["best_run"] = res.best;
  rep["orientation_insensitive"] = res.orientation_insensitive;
  rep["best"] = runs[static_cast<std::size_t>(res.best)];
  const Tensor3 R = rodrigues(best.phi, best.p_raw);
  rep["best_n1"] = {R(0, 0), R(1, 0), R(2, 0)};
  write_json(dir.reports / "fem_invert.json", rep);
  for (std::size_t k = 0; k < res.runs.size(); ++k)
    std::printf("run %zu: max von Mises %.8e%s\n", k, res.runs[k].vm_max, res.runs[k].failed ? " (failed)" : "");
  if (res.orientation_insensitive) std::printf("orientation-insensitive: objective is constant in (phi, p)\n");
  return 0;
}

int cmd_probe_isotropy(const Common& c, const std::string& ck_path, const std::vector<double>& design) {
  const RunDir dir = make_run_dir(c, "probe-isotropy");
  const cli::RunConfig cfg = resolve(c, dir);
  std::function<SymTensor3(const SymTensor3&)> stress;
  std::optional<Checkpoint> ck;
  datagen::ModelSpec spec;
  Eigen::VectorXd D;
  if (!ck_path.empty()) {
    ck = load_checkpoint(ck_path);
    D = default_design(*ck, design);
    const MaterialFrame frame = ck->model.frame();
    const auto norm = ck->model.normalization_coeffs(D, frame);
    stress = [&ck, &D, frame, norm](const SymTensor3& C) { return ck->model.stress(C, D, frame, norm); };
  } else {
    spec = cli::model_spec(cfg.data);
    if (design.size() != spec.axes.size()) throw InvalidArgument("--design must list one value per grid axis");
    D = to_eigen(design);
    stress = [&spec, &D](const SymTensor3& C) { return spec.evaluate(D, C).S; };
  }
  const auto rep = datagen::isotropy_probe(stress);
  std::ofstream os(dir.reports / "isotropy.csv");
  if (!os) throw IoError("cannot write isotropy.csv");
  os << "gamma";
  for (std::size_t p = 0; p < rep.planes.size(); ++p) os << ",plane" << p;
  os << '\n';
  char buf[64];
  for (std::size_t g = 0; g < rep.gammas.size(); ++g) {
    std::snprintf(buf, sizeof buf, "%.6g", rep.gammas[g]);
    os << buf;
    for (const auto& curve : rep.curves) {
      std::snprintf(buf, sizeof buf, ",%.12e", curve[g]);
      os << buf;
    }
    os << '\n';
  }
  write_json(dir.reports / "isotropy.json", {{"deviation", rep.deviation}, {"design", to_vector(D)}});
  std::printf("isotropy deviation %.3e\n", rep.deviation);
  return 0;
}

int cmd_study_samples(const Common& c, const std::vector<int>& sizes) {
  const RunDir dir = make_run_dir(c, "study-samples");
  const cli::RunConfig cfg = resolve(c, dir);
  const auto spec = cli::model_spec(cfg.data);
  const auto runs = training::sample_size_study(spec, cfg.data.sampler, sizes, cfg.train, cfg.data.seed);
  std::size_t longest = 0;
  json rep = json::array();
  for (const auto& r : runs) {
    std::ofstream os(dir.logs / ("study_loss_n" + std::to_string(r.n_F) + ".csv"));
    if (!os) throw IoError("cannot write study log");
    os << "epoch,loss\n";
    char buf[64];
    for (std::size_t e = 0; e < r.report.loss.size(); ++e) {
      std::snprintf(buf, sizeof buf, "%zu,%.10e\n", e, r.report.loss[e]);
      os << buf;
    }
    longest = std::max(longest, r.report.loss.size());
    rep.push_back({{"n_F", r.n_F}, {"records", r.records}, {"final_loss", r.report.final_loss},
                   {"final_data_loss", r.report.final_data_loss}, {"decided_class", r.report.decided_class}});
    std::printf("n_F %d: records %zu  final loss %.6e\n", r.n_F, r.records, r.report.final_loss);
  }
  std::ofstream os(dir.reports / "study_losses.csv");
  if (!os) throw IoError("cannot write study_losses.csv");
  os << "epoch";
  for (const auto& r : runs) os << ",loss_n" << r.n_F;
  os << '\n';
  char buf[64];
  for (std::size_t e = 0; e < longest; ++e) {
    os << e;
    for (const auto& r : runs) {
      if (e < r.report.loss.size()) {
        std::snprintf(buf, sizeof buf, ",%.10e", r.report.loss[e]);
        os << buf;
      } else {
        os << ',';
      }
    }
    os << '\n';
  }
  write_json(dir.reports / "study.json", rep);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Batched training allocates the same large temporaries every epoch; keep
  // them on the heap instead of mapping and unmapping pages each time.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"anisoforge: polyconvex anisotropic surrogates, inverse design and beam analysis"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config_file, "INI file with [data], [train], [inverse], [fem] sections");
  app.add_option("--run", common.run_name, "Run name (directory under --runs-dir); defaults to the command name");
  app.add_option("--runs-dir", common.runs_dir, "Parent directory of run directories");
  app.add_option("--threads", common.threads, "Worker threads (falls back to ANISOFORGE_THREADS)");
  app.add_option("--log-level", common.log_level, "debug, info, warn, error or off");
  app.add_option_function<std::vector<std::string>>(
      "--set",
      [&](const std::vector<std::string>& v) {
        common.assignments.insert(common.assignments.end(), v.begin(), v.end());
      },
      "Override a config field: section.key=value (repeatable)");

  // Command flags are recorded as assignments so they land in the echoed config.
  auto flag = [&](CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(
        name, [&common, key](const std::string& v) { common.assignments.push_back(key + "=" + v); }, help);
  };
  auto bool_flag = [&](CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
    sub->add_flag_function(
        name, [&common, key](std::int64_t) { common.assignments.push_back(key + "=true"); }, help);
  };

  std::string out, data_path, resume_path, ck_path, targets_path;
  std::vector<double> design;
  std::vector<std::string> directions;
  std::vector<int> sizes{20, 50, 100};

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic stress-strain dataset");
  flag(gen, "--model", "data.model", "neo-hookean, aniso-hgo or coupled-neo-hookean");
  flag(gen, "--class", "data.class", "iso, trans or ortho (aniso-hgo)");
  flag(gen, "--grid", "data.grid", "Values per design axis, e.g. 5x5");
  flag(gen, "--ranges", "data.ranges", "Axis ranges lo:hi,lo:hi");
  flag(gen, "--nf", "data.nf", "Deformation samples per parameter set");
  flag(gen, "--delta", "data.delta", "Half-width of the F_ij sampling box");
  flag(gen, "--sampler", "data.sampler", "lhs or polar");
  flag(gen, "--seed", "data.seed", "Random seed");
  bool_flag(gen, "--independent", "data.independent", "Fresh deformation draws per parameter set");
  gen->add_option("--out", out, "Dataset path (default: <run>/reports/dataset.txt)");

  auto* train = app.add_subcommand("train", "Train a surrogate on a dataset");
  train->add_option("--data", data_path, "Dataset file")->required();
  train->add_option("--resume", resume_path, "Checkpoint to continue from");
  flag(train, "--epochs", "train.epochs", "Number of Adam epochs");
  flag(train, "--lr", "train.learning_rate", "Learning rate");
  flag(train, "--epsilon", "train.epsilon", "Weight of the anisotropy penalty");
  flag(train, "--p", "train.p", "Exponent of the anisotropy penalty");
  flag(train, "--seed", "train.seed", "Initialisation seed");
  flag(train, "--mode", "train.mode", "polyconvex, nonpoly_linearC or unconstrained");
  flag(train, "--gamma", "train.gamma", "Volumetric growth weight");
  flag(train, "--known-class", "train.known_class", "Fix the anisotropy class (iso, trans, ortho)");
  train->add_option("--direction", directions, "Known preferred direction x,y,z (repeatable)");

  auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset and trace a uniaxial curve");
  eval->add_option("--checkpoint", ck_path, "Checkpoint file")->required();
  eval->add_option("--data", data_path, "Dataset file");
  eval->add_option("--design", design, "Design vector for the uniaxial curve")->delimiter(',');

  auto* inv = app.add_subcommand("invert", "Identify design variables from target stresses");
  inv->add_option("--checkpoint", ck_path, "Checkpoint file")->required();
  inv->add_option("--targets", targets_path, "Target dataset file")->required();
  flag(inv, "--restarts", "inverse.restarts", "CMA-ES restarts");
  flag(inv, "--seed", "inverse.seed", "CMA-ES seed");
  flag(inv, "--lower", "inverse.lower", "Lower bounds, comma separated");
  flag(inv, "--upper", "inverse.upper", "Upper bounds, comma separated");
  bool_flag(inv, "--free-orientation", "inverse.free_orientation", "Also search the orientation");

  auto* femc = app.add_subcommand("fem", "Solve the simply supported beam");
  auto* femi = app.add_subcommand("fem-invert", "Fibre orientation minimising the maximum von Mises stress");
  for (auto* sub : {femc, femi}) {
    sub->add_option("--checkpoint", ck_path, "Checkpoint file")->required();
    flag(sub, "--design", "fem.design", "Design vector, comma separated (default: centre of the training box)");
    flag(sub, "--u0", "fem.u0", "Midspan displacement");
    flag(sub, "--load-steps", "fem.load_steps", "Load steps");
    flag(sub, "--tolerance", "fem.tolerance", "Newton residual tolerance");
  }
  flag(femc, "--phi", "fem.phi", "Orientation angle");
  flag(femc, "--p", "fem.p", "Orientation axis x,y,z");
  flag(femi, "--restarts", "fem.restarts", "Nelder-Mead restarts");
  flag(femi, "--seed", "fem.seed", "Seed of the initial orientations");

  auto* probe = app.add_subcommand("probe-isotropy", "Simple-shear isotropy probe of a checkpoint or reference model");
  probe->add_option("--checkpoint", ck_path, "Checkpoint file");
  flag(probe, "--model", "data.model", "Reference model instead of a checkpoint");
  flag(probe, "--class", "data.class", "Class of the reference model");
  probe->add_option("--design", design, "Design vector")->delimiter(',');

  auto* study = app.add_subcommand("study-samples", "Train at several sample sizes and compare loss histories");
  flag(study, "--model", "data.model", "Reference model");
  flag(study, "--class", "data.class", "Anisotropy class");
  flag(study, "--grid", "data.grid", "Values per design axis");
  flag(study, "--seed", "data.seed", "Data seed");
  flag(study, "--epochs", "train.epochs", "Epochs per training");
  study->add_option("--sizes", sizes, "Sample sizes")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    log::set_level(common.log_level == "debug"  ? log::Level::debug
                   : common.log_level == "info" ? log::Level::info
                   : common.log_level == "warn" ? log::Level::warn
                   : common.log_level == "error" ? log::Level::error
                   : common.log_level == "off"  ? log::Level::off
                                                : throw InvalidArgument("unknown log level '" + common.log_level + "'"));
    apply_threads(common.threads);
    if (!directions.empty()) {
      std::string joined;
      for (const auto& d : directions) joined += (joined.empty() ? "" : ";") + d;
      common.assignments.push_back("train.directions=" + joined);
    }
    if (*gen) {
      cli::RunConfig probe_cfg;
      cli::ConfigBinding b(probe_cfg);
      if (!common.config_file.empty()) b.load_ini(common.config_file);
      for (const auto& a : common.assignments) b.set_assignment(a);
      if (probe_cfg.data.model.empty()) {
        std::cerr << "gen-data: --model is required (or [data] model in --config)\n" << gen->help();
        return kExitUsage;
      }
      return cmd_gen_data(common, out);
    }
    if (*train) return cmd_train(common, data_path, resume_path);
    if (*eval) return cmd_evaluate(common, ck_path, data_path, design);
    if (*inv) return cmd_invert(common, ck_path, targets_path);
    if (*femc) return cmd_fem(common, ck_path);
    if (*femi) return cmd_fem_invert(common, ck_path);
    if (*probe) return cmd_probe_isotropy(common, ck_path, design);
    if (*study) return cmd_study_samples(common, sizes);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}
