#include "anisoforge/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "anisoforge/errors.hpp"
#include "anisoforge/logging.hpp"

namespace anisoforge::training {

using Eigen::MatrixXd;
using Eigen::VectorXd;

TrainingData prepare(const Dataset& data, double gamma, bool normalize_components) {
  if (data.empty()) throw InvalidArgument("training: empty dataset");
  TrainingData t;
  t.n = static_cast<int>(data.size());
  t.design_dim = data.design_dim();
  t.Y.resize(t.design_dim, t.n);
  const auto uniq = data.unique_designs();
  t.U.resize(t.design_dim, static_cast<Eigen::Index>(uniq.size()));
  for (std::size_t k = 0; k < uniq.size(); ++k) t.U.col(static_cast<Eigen::Index>(k)) = uniq[k];
  Vec6 sq = Vec6::Zero();
  for (int i = 0; i < t.n; ++i) {
    const auto& r = data.records[static_cast<std::size_t>(i)];
    if (r.D.size() != t.design_dim) throw InvalidArgument("training: record design size mismatch");
    t.metrics.push_back(make_metric(r.C));
    if (t.metrics.back().J < 1e-6) throw NumericalError("training: sample with J < 1e-6");
    t.targets.push_back(r.S);
    t.Y.col(i) = r.D;
    int idx = 0;
    while (t.U.col(idx) != r.D) ++idx;
    t.design_index.push_back(idx);
    t.growth_d1.push_back(growth_d1(gamma, t.metrics.back().J));
    sq += r.S.components().cwiseAbs2();
  }
  if (normalize_components) {
    for (int a = 0; a < 6; ++a) {
      const double ms = sq[a] / t.n;
      t.component_weight[a] = ms > 1e-300 ? 1.0 / ms : 1.0;
    }
  }
  return t;
}

namespace {

double contract(const Mat3& A, const Mat3& B) { return A.cwiseProduct(B).sum(); }

}  // namespace

LossValue loss(const Surrogate& model, const TrainingData& data, double epsilon, double p, VectorXd* grad_theta,
               AnisoGradient* grad_aniso) {
  if (data.n == 0) throw InvalidArgument("training: empty dataset");
  const Picnn& net = model.network();
  const auto& an = model.anisotropy();
  const bool linearC = model.config().mode == FormulationMode::nonpoly_linearC;
  const Tensor3 R = an.rotation();
  const MaterialFrame f = make_frame(an, R);
  const bool act1 = f.cls != AnisotropyClass::iso;
  const bool act2 = f.cls == AnisotropyClass::ortho;
  const double a1 = f.alpha1, a2 = f.alpha2;
  const Vec8 Ibar = frame_reference(f);
  const int n = data.n;
  const Eigen::Index nu = data.U.cols();

  MatrixXd X0(8, n);
  std::vector<BasisSet> B(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& m = data.metrics[static_cast<std::size_t>(i)];
    X0.col(i) = invariants(m, f.N1, f.N2, a1, a2, f.cls).values;
    B[static_cast<std::size_t>(i)] = bases(m, f.N1, f.N2, a1, a2, f.cls);
  }
  const MatrixXd G = net.grad_input_batch(X0, data.Y);
  const MatrixXd Xb = Ibar.replicate(1, nu);
  const MatrixXd Db = net.grad_input_batch(Xb, data.U);
  std::vector<NormalizationCoeffs> norms(static_cast<std::size_t>(nu));
  std::vector<SymTensor3> Mref(static_cast<std::size_t>(nu));
  for (Eigen::Index k = 0; k < nu; ++k) {
    norms[static_cast<std::size_t>(k)] = normalization_from_gradient(Db.col(k), 0.0, Ibar[4], Ibar[6]);
    if (linearC) Mref[static_cast<std::size_t>(k)] = reference_stress_tensor(Db.col(k), f);
  }

  MatrixXd coeff(8, n);
  std::vector<SymTensor3> Gbar(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const auto k = static_cast<std::size_t>(data.design_index[ui]);
    Vec8 c = G.col(i);
    c[2] += data.growth_d1[ui];
    if (!linearC) c += sn_coefficients(norms[k]);
    SymTensor3 S;
    for (int j = 0; j < 8; ++j)
      if (c[j] != 0.0) S += (2.0 * c[j]) * B[ui][j];
    if (linearC) S -= 2.0 * Mref[k];
    const SymTensor3 r = S - data.targets[ui];
    double li = 0.0;
    for (int a = 0; a < 6; ++a) li += SymTensor3::kWeight[static_cast<std::size_t>(a)] * data.component_weight[a] * r[a] * r[a];
    sum += li;
    coeff.col(i) = c;
    Gbar[ui] = SymTensor3((2.0 / n) * data.component_weight.cwiseProduct(r.components()));
  }
  LossValue out;
  out.data = sum / n;
  if (!an.fixed_class) out.regularization = epsilon * (std::pow(a1, p) + std::pow(a2, p));
  if (!grad_theta && !grad_aniso) return out;

  VectorXd scratch;
  VectorXd& gth = grad_theta ? *grad_theta : scratch;
  gth = VectorXd::Zero(net.parameter_count());

  // Sample path: Phi = sum_n r_n . dPsi/dI(I_n).
  MatrixXd rdir(8, n);
  MatrixXd rho = MatrixXd::Zero(8, nu);
  std::vector<SymTensor3> Gu(static_cast<std::size_t>(nu));
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (int j = 0; j < 8; ++j) rdir(j, i) = 2.0 * Gbar[ui].ddot(B[ui][j]);
    rho.col(data.design_index[ui]) += rdir.col(i);
    Gu[static_cast<std::size_t>(data.design_index[ui])] += Gbar[ui];
  }
  const MatrixXd Q = net.directional_second_order(X0, data.Y, rdir, &gth);

  double da1 = 0.0, da2 = 0.0;
  Mat3 dN1 = Mat3::Zero(), dN2 = Mat3::Zero();
  const Mat3 N1 = f.N1.matrix(), N2 = f.N2.matrix();

  // Normalization path: the reference gradient dbar enters every stress.
  MatrixXd rbar(8, nu);
  for (Eigen::Index k = 0; k < nu; ++k) {
    const Vec8 d = Db.col(k);
    Vec8 v = Vec8::Zero();
    if (!linearC) {
      const Vec8 r = rho.col(k);
      Vec8 dodd;
      dodd << 1.0, 2.0, 0.5, -1.0, Ibar[4], Ibar[4], Ibar[6], Ibar[6];
      v = -2.0 * r[2] * dodd;
      v[4] += r[5];
      v[5] += r[4];
      v[6] += r[7];
      v[7] += r[6];
      if (act1) da1 += -2.0 * r[2] * (d[4] + d[5]);
      if (act2) da2 += -2.0 * r[2] * (d[6] + d[7]);
    } else {
      const Mat3 g = Gu[static_cast<std::size_t>(k)].matrix();
      const double tg = g.trace();
      v[0] = -2.0 * tg;
      v[1] = -4.0 * tg;
      v[2] = -tg;
      v[3] = 2.0 * tg;
      if (act1) {
        const double gN = contract(g, N1);
        v[4] = -2.0 * a1 * gN;
        v[5] = -2.0 * a1 * (tg - gN);
        da1 += -2.0 * (d[4] * gN + d[5] * (tg - gN));
        dN1 += -2.0 * a1 * (d[4] - d[5]) * g;
      }
      if (act2) {
        const double gN = contract(g, N2);
        v[6] = -2.0 * a2 * gN;
        v[7] = -2.0 * a2 * (tg - gN);
        da2 += -2.0 * (d[6] * gN + d[7] * (tg - gN));
        dN2 += -2.0 * a2 * (d[6] - d[7]) * g;
      }
    }
    rbar.col(k) = v;
  }
  const MatrixXd Qbar = net.directional_second_order(Xb, data.U, rbar, &gth);
  if (!grad_aniso) return out;

  for (Eigen::Index k = 0; k < nu; ++k) {
    if (act1) da1 += Qbar(4, k) + Qbar(5, k);
    if (act2) da2 += Qbar(6, k) + Qbar(7, k);
  }

  // Invariants and bases depend on alpha and the structure tensors.
  if (act1 || act2) {
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const auto& m = data.metrics[ui];
      const Mat3 g = Gbar[ui].matrix();
      const double gCi = contract(g, m.C_inv);
      const Mat3 cgc = m.det * m.C_inv * g * m.C_inv;
      auto accumulate = [&](const Mat3& N, int j, double alpha, double& da, Mat3& dN) {
        const double t5 = contract(m.C, N);
        const double t6 = contract(m.cof, N);
        const Mat3 b6 = t6 * m.C_inv - m.cof * N * m.C_inv;
        const double q5 = Q(j, i), q6 = Q(j + 1, i);
        const double c5 = coeff(j, i), c6 = coeff(j + 1, i);
        da += q5 * t5 + q6 * t6 + 2.0 * c5 * contract(g, N) + 2.0 * c6 * contract(g, b6);
        dN += alpha * (q5 * m.C + q6 * m.cof + 2.0 * c5 * g + 2.0 * c6 * (gCi * m.cof - cgc));
      };
      if (act1) accumulate(N1, 4, a1, da1, dN1);
      if (act2) accumulate(N2, 6, a2, da2, dN2);
    }
  }

  AnisoGradient ga;
  if (!an.fixed_class) {
    const double s1 = a1 * (1.0 - a1), s2 = a2 * (1.0 - a2);
    ga.alpha_bar1 = da1 * s1 + epsilon * p * std::pow(a1, p) * (1.0 - a1);
    ga.alpha_bar2 = da2 * s2 + epsilon * p * std::pow(a2, p) * (1.0 - a2);
  }
  if (act1 || act2) {
    const Vec3 n1 = R.col(0), n2 = R.col(1);
    Mat3 dR = Mat3::Zero();
    dR.col(0) = 2.0 * (0.5 * (dN1 + dN1.transpose())) * n1;
    dR.col(1) = 2.0 * (0.5 * (dN2 + dN2.transpose())) * n2;
    const double pn = an.p_raw.norm();
    const Vec3 ph = an.p_raw / pn;
    const Mat3 P = skew(ph);
    const double s = std::sin(an.phi), c = std::cos(an.phi);
    ga.phi = contract(dR, c * P + s * P * P);
    Vec3 dph;
    for (int k = 0; k < 3; ++k) {
      const Mat3 E = skew(Vec3::Unit(k));
      dph[k] = contract(dR, s * E + (1.0 - c) * (E * P + P * E));
    }
    ga.p_raw = (Mat3::Identity() - ph * ph.transpose()) * dph / pn;
  }
  *grad_aniso = ga;
  return out;
}

TrainableLayout trainable_layout(const Surrogate& model, bool directions_known) {
  TrainableLayout l;
  l.theta = model.network().parameter_count();
  const auto& an = model.anisotropy();
  l.alpha = !an.fixed_class.has_value();
  l.rotation = !directions_known && (!an.fixed_class || *an.fixed_class != AnisotropyClass::iso);
  return l;
}

VectorXd pack(const Surrogate& model, const TrainableLayout& l) {
  VectorXd z(l.size());
  z.head(l.theta) = model.network().parameters();
  Eigen::Index o = l.theta;
  const auto& an = model.anisotropy();
  if (l.alpha) {
    z[o++] = an.alpha_bar1;
    z[o++] = an.alpha_bar2;
  }
  if (l.rotation) {
    z[o++] = an.phi;
    z.segment<3>(o) = an.p_raw;
  }
  return z;
}

void unpack(const VectorXd& z, const TrainableLayout& l, Surrogate& model) {
  if (z.size() != l.size()) throw InvalidArgument("unpack: size mismatch");
  model.network().parameters() = z.head(l.theta);
  Eigen::Index o = l.theta;
  auto& an = model.anisotropy();
  if (l.alpha) {
    an.alpha_bar1 = z[o++];
    an.alpha_bar2 = z[o++];
  }
  if (l.rotation) {
    an.phi = z[o++];
    an.p_raw = z.segment<3>(o);
  }
}

VectorXd pack_gradient(const VectorXd& g_theta, const AnisoGradient& ga, const TrainableLayout& l) {
  VectorXd g(l.size());
  g.head(l.theta) = g_theta;
  Eigen::Index o = l.theta;
  if (l.alpha) {
    g[o++] = ga.alpha_bar1;
    g[o++] = ga.alpha_bar2;
  }
  if (l.rotation) {
    g[o++] = ga.phi;
    g.segment<3>(o) = ga.p_raw;
  }
  return g;
}

void Adam::step(VectorXd& z, const VectorXd& g, AdamState& st) const {
  if (st.m.size() != z.size()) {
    st.m = VectorXd::Zero(z.size());
    st.v = VectorXd::Zero(z.size());
    st.step = 0;
  }
  ++st.step;
  st.m = beta1 * st.m + (1.0 - beta1) * g;
  st.v = beta2 * st.v + (1.0 - beta2) * g.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.step));
  z.array() -= lr * (st.m.array() / bc1) / ((st.v.array() / bc2).sqrt() + eps);
}

std::vector<DirectionEstimate> extract_directions(const AnisotropyState& aniso, double active_threshold) {
  const Tensor3 R = aniso.rotation();
  const auto [N1, N2] = structure_tensors(R);
  std::vector<DirectionEstimate> out;
  if (aniso.alpha1() > active_threshold) out.push_back({1, recover_direction(N1), N1});
  if (aniso.alpha2() > active_threshold) out.push_back({2, recover_direction(N2), N2});
  return out;
}

std::string decide_class(const AnisotropyState& aniso, double active, double inactive) {
  if (aniso.fixed_class) return to_string(*aniso.fixed_class);
  const double a1 = aniso.alpha1(), a2 = aniso.alpha2();
  const bool on1 = a1 > active, on2 = a2 > active;
  const bool off1 = a1 < inactive, off2 = a2 < inactive;
  if (off1 && off2) return "iso";
  if ((on1 && off2) || (on2 && off1)) return "trans";
  if (on1 && on2) return "ortho";
  return "undetermined";
}

nlohmann::json to_json(const TrainReport& r) {
  nlohmann::json j;
  j["first_epoch"] = r.first_epoch;
  j["epochs"] = r.loss.size();
  j["loss"] = r.loss;
  j["alpha1"] = r.alpha1;
  j["alpha2"] = r.alpha2;
  j["final_loss"] = r.final_loss;
  j["final_data_loss"] = r.final_data_loss;
  j["phi"] = r.phi;
  j["p"] = {r.p[0], r.p[1], r.p[2]};
  auto sym = [](const SymTensor3& s) {
    return std::vector<double>(s.components().data(), s.components().data() + 6);
  };
  j["N1"] = sym(r.N1);
  j["N2"] = sym(r.N2);
  nlohmann::json dirs = nlohmann::json::array();
  for (const auto& d : r.directions) dirs.push_back({{"index", d.index}, {"n", {d.n[0], d.n[1], d.n[2]}}});
  j["directions"] = dirs;
  j["decided_class"] = r.decided_class;
  j["wall_time_s"] = r.wall_time;
  j["stopped_early"] = r.stopped_early;
  return j;
}

namespace {

Surrogate initial_model(const Dataset& data, const TrainConfig& cfg) {
  PicnnArchitecture arch;
  arch.design_dim = data.design_dim();
  arch.design_width = cfg.design_width;
  arch.invariant_width = cfg.invariant_width;
  arch.layers = cfg.layers;
  arch.mode = network_mode(cfg.mode);
  Picnn net = Picnn::initialized(arch, cfg.seed);
  const VectorXd lo = data.design_lower(), hi = data.design_upper();
  net.set_design_bounds(lo, hi);
  VectorXd scale = 0.5 * (hi - lo);
  for (Eigen::Index i = 0; i < scale.size(); ++i)
    if (!(scale[i] > 0.0)) scale[i] = 1.0;
  net.set_design_scaling(0.5 * (hi + lo), scale);

  AnisotropyState an;
  an.fixed_class = cfg.known_class;
  if (!cfg.known_directions.empty()) {
    const Vec3* n2 = cfg.known_directions.size() > 1 ? &cfg.known_directions[1] : nullptr;
    const auto rp = rotation_params_from_matrix(rotation_from_directions(cfg.known_directions[0], n2));
    an.phi = rp.phi;
    an.p_raw = rp.p;
  } else {
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vec3 p;
    do p = Vec3(u(rng), u(rng), u(rng));
    while (p.norm() < 0.1 || p.norm() > 1.0);
    an.p_raw = p.normalized();
    an.phi = 0.5 + 0.5 * (u(rng) + 1.0);
  }
  EnergyConfig ec;
  ec.gamma = cfg.gamma;
  ec.mode = cfg.mode;
  return Surrogate(std::move(net), an, ec);
}

double warmup_epsilon(const TrainConfig& cfg, long long epoch) {
  const double horizon = cfg.warmup_fraction * static_cast<double>(cfg.epochs);
  if (cfg.epsilon <= 0.0 || horizon < 1.0 || static_cast<double>(epoch) >= horizon) return cfg.epsilon;
  const double t = static_cast<double>(epoch) / horizon;
  return cfg.epsilon * std::pow(1e-3, 1.0 - t);
}

}  // namespace

TrainResult train(const Dataset& data, const TrainConfig& cfg, const Checkpoint* resume) {
  if (cfg.epochs < 0) throw InvalidArgument("train: epochs must be >= 0");
  if (!(cfg.learning_rate > 0.0)) throw InvalidArgument("train: learning rate must be positive");
  if (cfg.epsilon < 0.0) throw InvalidArgument("train: epsilon must be >= 0");
  if (!(cfg.p > 0.0 && cfg.p <= 1.0)) throw InvalidArgument("train: p must lie in (0, 1]");
  if (cfg.known_class == AnisotropyClass::ortho && cfg.known_directions.size() == 1)
    throw InvalidArgument("train: orthotropic class needs two known directions");

  const auto t0 = std::chrono::steady_clock::now();
  TrainResult res;
  Checkpoint& ck = res.checkpoint;
  if (resume) {
    ck = *resume;
    if (ck.design_names != data.design_names) throw InvalidArgument("train: checkpoint design variables differ from dataset");
  } else {
    ck.model = initial_model(data, cfg);
    ck.design_names = data.design_names;
  }
  ck.extra["known_directions"] = !cfg.known_directions.empty();
  Surrogate& model = ck.model;
  const TrainingData td = prepare(data, model.config().gamma, cfg.normalize_components);
  const TrainableLayout layout = trainable_layout(model, !cfg.known_directions.empty());
  VectorXd z = pack(model, layout);
  if (ck.adam.m.size() != 0 && ck.adam.m.size() != z.size()) throw InvalidArgument("train: optimizer state does not match");
  Adam adam;
  adam.lr = cfg.learning_rate;

  std::ofstream log;
  if (!cfg.log_csv.empty()) {
    if (cfg.log_csv.has_parent_path()) std::filesystem::create_directories(cfg.log_csv.parent_path());
    const bool append = resume != nullptr && std::filesystem::exists(cfg.log_csv);
    log.open(cfg.log_csv, append ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot open training log '" + cfg.log_csv.string() + "'");
    if (!append) log << "epoch,loss,alpha1,alpha2,phi\n";
  }

  TrainReport& rep = res.report;
  rep.first_epoch = ck.epoch;
  Checkpoint last_finite = ck;
  VectorXd gth;
  AnisoGradient ga;
  const long long end = ck.epoch + cfg.epochs;
  for (long long e = ck.epoch; e < end; ++e) {
    const double eps = warmup_epsilon(cfg, e - rep.first_epoch);
    const LossValue lv = loss(model, td, eps, cfg.p, &gth, &ga);
    const VectorXd g = pack_gradient(gth, ga, layout);
    if (!std::isfinite(lv.total()) || !g.allFinite()) {
      if (!cfg.checkpoint_path.empty()) save_checkpoint(last_finite, cfg.checkpoint_path);
      std::ostringstream os;
      os << "training diverged at epoch " << e << " (loss " << lv.total() << ")";
      if (!cfg.checkpoint_path.empty()) os << "; last finite state saved to " << cfg.checkpoint_path.string();
      throw NumericalError(os.str());
    }
    rep.loss.push_back(lv.total());
    rep.alpha1.push_back(model.anisotropy().alpha1());
    rep.alpha2.push_back(model.anisotropy().alpha2());
    if (log.is_open() && cfg.log_every > 0 && (e - rep.first_epoch) % cfg.log_every == 0) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%lld,%.10e,%.10f,%.10f,%.10f\n", e, lv.total(), rep.alpha1.back(),
                    rep.alpha2.back(), model.anisotropy().phi);
      log << buf;
    }
    last_finite.model = model;
    last_finite.adam = ck.adam;
    last_finite.epoch = e;

    adam.step(z, g, ck.adam);
    unpack(z, layout, model);
    ck.epoch = e + 1;

    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() && ck.epoch % cfg.checkpoint_every == 0)
      save_checkpoint(ck, cfg.checkpoint_path);
    if (cfg.early_stop && static_cast<long long>(rep.loss.size()) > cfg.early_stop_window) {
      const double prev = rep.loss[rep.loss.size() - 1 - static_cast<std::size_t>(cfg.early_stop_window)];
      if (std::abs(prev - lv.total()) <= cfg.early_stop_tol * std::abs(prev)) {
        rep.stopped_early = true;
        break;
      }
    }
  }

  const LossValue fin = loss(model, td, cfg.epsilon, cfg.p);
  rep.final_loss = fin.total();
  rep.final_data_loss = fin.data;
  const auto& an = model.anisotropy();
  rep.phi = an.phi;
  rep.p = an.p_raw;
  std::tie(rep.N1, rep.N2) = structure_tensors(an.rotation());
  rep.decided_class = decide_class(an, cfg.active_threshold, cfg.inactive_threshold);
  try {
    rep.directions = extract_directions(an, cfg.active_threshold);
  } catch (const NumericalError& e) {
    log::warn(std::string("direction extraction failed: ") + e.what());
  }
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ck.extra["decided_class"] = rep.decided_class;
  if (!cfg.checkpoint_path.empty()) save_checkpoint(ck, cfg.checkpoint_path);
  return res;
}

EvalMetrics evaluate(const Surrogate& model, const Dataset& data) {
  EvalMetrics m;
  m.samples = data.size();
  if (data.empty()) return m;
  const MaterialFrame f = model.frame();
  Vec6 err = Vec6::Zero(), ref = Vec6::Zero();
  double sum = 0.0;
  std::vector<std::pair<Eigen::VectorXd, NormalizationCoeffs>> cache;
  for (const auto& r : data.records) {
    const NormalizationCoeffs* nc = nullptr;
    for (const auto& [d, c] : cache)
      if (d == r.D) nc = &c;
    if (!nc) {
      cache.emplace_back(r.D, model.normalization_coeffs(r.D, f));
      nc = &cache.back().second;
    }
    const SymTensor3 S = model.stress(r.C, r.D, f, *nc);
    const SymTensor3 d = S - r.S;
    err += d.components().cwiseAbs2();
    ref += r.S.components().cwiseAbs2();
    sum += d.ddot(d);
  }
  for (int a = 0; a < 6; ++a) m.relative_rmse[a] = ref[a] > 0.0 ? std::sqrt(err[a] / ref[a]) : std::sqrt(err[a] / m.samples);
  m.mse = sum / static_cast<double>(m.samples);
  return m;
}

std::vector<CurveRow> uniaxial_curve(const Surrogate& model, const Eigen::VectorXd& D, double lo, double hi,
                                     int points, const std::function<SymTensor3(const SymTensor3&)>& reference) {
  if (points < 2) throw InvalidArgument("uniaxial_curve: need at least two points");
  const MaterialFrame f = model.frame();
  const auto nc = model.normalization_coeffs(D, f);
  std::vector<CurveRow> rows;
  for (int i = 0; i < points; ++i) {
    CurveRow row;
    row.F11 = lo + (hi - lo) * i / (points - 1);
    Tensor3 F = Mat3::Identity();
    F(0, 0) = row.F11;
    const SymTensor3 C = cauchy_green(F);
    row.predicted = model.stress(C, D, f, nc);
    if (reference) row.reference = reference(C);
    rows.push_back(row);
  }
  return rows;
}

void write_curve_csv(const std::vector<CurveRow>& rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  const bool ref = !rows.empty() && rows.front().reference.has_value();
  const char* names[] = {"S11", "S22", "S33", "S12", "S13", "S23"};
  os << "F11";
  for (const char* n : names) os << ",pred_" << n;
  if (ref)
    for (const char* n : names) os << ",true_" << n;
  os << '\n';
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.10g", r.F11);
    os << buf;
    for (int a = 0; a < 6; ++a) {
      std::snprintf(buf, sizeof buf, ",%.12e", r.predicted[a]);
      os << buf;
    }
    if (ref)
      for (int a = 0; a < 6; ++a) {
        std::snprintf(buf, sizeof buf, ",%.12e", (*r.reference)[a]);
        os << buf;
      }
    os << '\n';
  }
}

std::vector<StudyRun> sample_size_study(const datagen::ModelSpec& model, datagen::SamplerSpec sampler,
                                        const std::vector<int>& sizes, const TrainConfig& config,
                                        std::uint64_t data_seed) {
  if (sizes.empty()) throw InvalidArgument("sample-size study: no sizes given");
  std::vector<StudyRun> runs;
  for (int s : sizes) {
    if (s <= 0) throw InvalidArgument("sample-size study: sizes must be positive");
    sampler.n_F = s;
    sampler.independent = true;
    const Dataset data = datagen::build_dataset(model, sampler, data_seed);
    TrainConfig c = config;
    c.checkpoint_path.clear();
    c.log_csv.clear();
    StudyRun run;
    run.n_F = s;
    run.records = data.size();
    run.report = train(data, c).report;
    runs.push_back(std::move(run));
  }
  return runs;
}

}  // namespace anisoforge::training
