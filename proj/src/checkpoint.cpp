#include "anisoforge/checkpoint.hpp"

#include <fstream>

#include "anisoforge/errors.hpp"

namespace anisoforge {

namespace {

constexpr int kVersion = 1;

nlohmann::json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const Checkpoint& ck) {
  const auto& net = ck.model.network();
  const auto& arch = net.architecture();
  const auto& an = ck.model.anisotropy();
  nlohmann::json j;
  j["format"] = "anisoforge-checkpoint";
  j["version"] = kVersion;
  j["architecture"] = {{"invariant_dim", arch.invariant_dim}, {"design_dim", arch.design_dim},
                       {"design_width", arch.design_width}, {"invariant_width", arch.invariant_width},
                       {"layers", arch.layers},             {"constraint", to_string(arch.mode)}};
  j["energy"] = {{"gamma", ck.model.config().gamma}, {"mode", to_string(ck.model.config().mode)}};
  j["parameters"] = vec_json(net.parameters());
  j["design_names"] = ck.design_names;
  j["design_lower"] = vec_json(net.design_lower());
  j["design_upper"] = vec_json(net.design_upper());
  j["design_shift"] = vec_json(net.design_shift());
  j["design_scale"] = vec_json(net.design_scale());
  j["anisotropy"] = {{"alpha_bar1", an.alpha_bar1},
                     {"alpha_bar2", an.alpha_bar2},
                     {"phi", an.phi},
                     {"p_raw", {an.p_raw[0], an.p_raw[1], an.p_raw[2]}},
                     {"fixed_class", an.fixed_class ? nlohmann::json(to_string(*an.fixed_class)) : nlohmann::json()}};
  j["epoch"] = ck.epoch;
  j["adam"] = {{"step", ck.adam.step}, {"m", vec_json(ck.adam.m)}, {"v", vec_json(ck.adam.v)}};
  j["extra"] = ck.extra;
  return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "anisoforge-checkpoint") throw IoError("not an anisoforge checkpoint");
    if (j.at("version").get<int>() != kVersion) throw IoError("unsupported checkpoint version");
    const auto& ja = j.at("architecture");
    PicnnArchitecture arch;
    arch.invariant_dim = ja.at("invariant_dim").get<int>();
    arch.design_dim = ja.at("design_dim").get<int>();
    arch.design_width = ja.at("design_width").get<int>();
    arch.invariant_width = ja.at("invariant_width").get<int>();
    arch.layers = ja.at("layers").get<int>();
    arch.mode = constraint_mode_from_string(ja.at("constraint").get<std::string>());
    Picnn net(arch);
    const Eigen::VectorXd theta = json_vec(j.at("parameters"));
    if (theta.size() != net.parameter_count()) throw IoError("checkpoint parameter count does not match architecture");
    net.parameters() = theta;
    const Eigen::VectorXd lo = json_vec(j.at("design_lower")), hi = json_vec(j.at("design_upper"));
    if (lo.size() > 0) net.set_design_bounds(lo, hi);
    net.set_design_scaling(json_vec(j.at("design_shift")), json_vec(j.at("design_scale")));

    EnergyConfig ec;
    ec.gamma = j.at("energy").at("gamma").get<double>();
    ec.mode = formulation_mode_from_string(j.at("energy").at("mode").get<std::string>());

    const auto& jn = j.at("anisotropy");
    AnisotropyState an;
    an.alpha_bar1 = jn.at("alpha_bar1").get<double>();
    an.alpha_bar2 = jn.at("alpha_bar2").get<double>();
    an.phi = jn.at("phi").get<double>();
    const auto p = jn.at("p_raw").get<std::vector<double>>();
    if (p.size() != 3) throw IoError("checkpoint p_raw must have 3 entries");
    an.p_raw = Vec3(p[0], p[1], p[2]);
    if (!jn.at("fixed_class").is_null()) an.fixed_class = anisotropy_class_from_string(jn.at("fixed_class").get<std::string>());

    Checkpoint ck;
    ck.model = Surrogate(std::move(net), an, ec);
    ck.design_names = j.at("design_names").get<std::vector<std::string>>();
    ck.epoch = j.at("epoch").get<long long>();
    ck.adam.step = j.at("adam").at("step").get<long long>();
    ck.adam.m = json_vec(j.at("adam").at("m"));
    ck.adam.v = json_vec(j.at("adam").at("v"));
    ck.extra = j.value("extra", nlohmann::json::object());
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed checkpoint: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp);
    if (!os) throw IoError("cannot open '" + tmp + "' for writing");
    os << to_json(ck).dump(1) << '\n';
    if (!os) throw IoError("failed writing checkpoint '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open checkpoint '" + path.string() + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse checkpoint '" + path.string() + "': " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace anisoforge
