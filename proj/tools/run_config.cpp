#include "run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "anisoforge/errors.hpp"

namespace anisoforge::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double to_double(const std::string& s) {
  double v = 0.0;
  const auto t = trim(s);
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size()) {
    if (t == "inf") return std::numeric_limits<double>::infinity();
    if (t == "-inf") return -std::numeric_limits<double>::infinity();
    throw InvalidArgument("expected a number, got '" + s + "'");
  }
  return v;
}

template <class Int>
Int to_int(const std::string& s) {
  Int v{};
  const auto t = trim(s);
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size()) throw InvalidArgument("expected an integer, got '" + s + "'");
  return v;
}

bool to_bool(const std::string& s) {
  const auto t = trim(s);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw InvalidArgument("expected true/false, got '" + s + "'");
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
  return out;
}

std::string join_vec3(const std::vector<Vec3>& dirs) {
  std::string out;
  for (std::size_t i = 0; i < dirs.size(); ++i)
    out += (i ? ";" : "") + fmt(dirs[i][0]) + "," + fmt(dirs[i][1]) + "," + fmt(dirs[i][2]);
  return out;
}

}  // namespace

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  const auto t = trim(text);
  if (t.empty()) return out;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(item));
  return out;
}

Vec3 parse_vec3(const std::string& text) {
  const auto v = parse_list(text);
  if (v.size() != 3) throw InvalidArgument("expected three comma-separated numbers, got '" + text + "'");
  return {v[0], v[1], v[2]};
}

std::vector<int> parse_grid(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(trim(text));
  std::string item;
  while (std::getline(ss, item, 'x')) {
    const int n = to_int<int>(item);
    if (n < 1) throw InvalidArgument("grid counts must be >= 1");
    out.push_back(n);
  }
  if (out.empty()) throw InvalidArgument("empty grid '" + text + "'");
  return out;
}

template <>
void ConfigBinding::bind(const std::string& s, const std::string& k, double& r) {
  add(s, k, {[&r](const std::string& v) { r = to_double(v); }, [&r] { return fmt(r); }});
}
template <>
void ConfigBinding::bind(const std::string& s, const std::string& k, int& r) {
  add(s, k, {[&r](const std::string& v) { r = to_int<int>(v); }, [&r] { return std::to_string(r); }});
}
template <>
void ConfigBinding::bind(const std::string& s, const std::string& k, long& r) {
  add(s, k, {[&r](const std::string& v) { r = to_int<long>(v); }, [&r] { return std::to_string(r); }});
}
template <>
void ConfigBinding::bind(const std::string& s, const std::string& k, long long& r) {
  add(s, k, {[&r](const std::string& v) { r = to_int<long long>(v); }, [&r] { return std::to_string(r); }});
}
template <>
void ConfigBinding::bind(const std::string& s, const std::string& k, unsigned long& r) {
  add(s, k, {[&r](const std::string& v) { r = to_int<unsigned long>(v); }, [&r] { return std::to_string(r); }});
}
template <>
void ConfigBinding::bind(const std::string& s, const std::string& k, bool& r) {
  add(s, k, {[&r](const std::string& v) { r = to_bool(v); }, [&r] { return std::string(r ? "true" : "false"); }});
}
template <>
void ConfigBinding::bind(const std::string& s, const std::string& k, std::string& r) {
  add(s, k, {[&r](const std::string& v) { r = trim(v); }, [&r] { return r; }});
}
template <>
void ConfigBinding::bind(const std::string& s, const std::string& k, std::vector<double>& r) {
  add(s, k, {[&r](const std::string& v) { r = parse_list(v); }, [&r] { return join(r); }});
}
template <>
void ConfigBinding::bind(const std::string& s, const std::string& k, Eigen::VectorXd& r) {
  add(s, k,
      {[&r](const std::string& v) {
         const auto l = parse_list(v);
         r = Eigen::Map<const Eigen::VectorXd>(l.data(), static_cast<Eigen::Index>(l.size()));
       },
       [&r] { return join(std::vector<double>(r.data(), r.data() + r.size())); }});
}
template <>
void ConfigBinding::bind(const std::string& s, const std::string& k, Vec3& r) {
  add(s, k, {[&r](const std::string& v) { r = parse_vec3(v); }, [&r] { return join({r[0], r[1], r[2]}); }});
}

void ConfigBinding::add(const std::string& section, const std::string& key, Entry e) {
  if (std::find(sections_.begin(), sections_.end(), section) == sections_.end()) sections_.push_back(section);
  entries_[section].emplace_back(key, std::move(e));
}

ConfigBinding::ConfigBinding(RunConfig& c) {
  auto& d = c.data;
  bind("data", "model", d.model);
  bind("data", "class", d.cls);
  bind("data", "grid", d.grid);
  bind("data", "ranges", d.ranges);
  bind("data", "seed", d.seed);
  add("data", "sampler",
      {[&d](const std::string& v) {
         const auto t = trim(v);
         if (t == "lhs")
           d.sampler.kind = datagen::SamplerKind::lhs;
         else if (t == "polar")
           d.sampler.kind = datagen::SamplerKind::polar;
         else
           throw InvalidArgument("sampler must be lhs or polar");
       },
       [&d] { return std::string(d.sampler.kind == datagen::SamplerKind::lhs ? "lhs" : "polar"); }});
  bind("data", "nf", d.sampler.n_F);
  bind("data", "delta", d.sampler.delta);
  bind("data", "stretch_lo", d.sampler.stretch_lo);
  bind("data", "stretch_hi", d.sampler.stretch_hi);
  bind("data", "independent", d.sampler.independent);
  bind("data", "dedupe_tol", d.sampler.dedupe_tol);
  bind("data", "c1", d.hgo.c1);
  bind("data", "c2", d.hgo.c2);
  bind("data", "c3", d.hgo.c3);
  bind("data", "c4", d.hgo.c4);
  bind("data", "c5", d.hgo.c5);
  bind("data", "n1", d.hgo.n1);
  bind("data", "n2", d.hgo.n2);
  bind("data", "nu", d.nu);

  auto& t = c.train;
  bind("train", "epochs", t.epochs);
  bind("train", "learning_rate", t.learning_rate);
  bind("train", "epsilon", t.epsilon);
  bind("train", "p", t.p);
  bind("train", "warmup_fraction", t.warmup_fraction);
  add("train", "known_class",
      {[&t](const std::string& v) {
         const auto s = trim(v);
         if (s.empty() || s == "none")
           t.known_class.reset();
         else
           t.known_class = anisotropy_class_from_string(s);
       },
       [&t] { return std::string(t.known_class ? to_string(*t.known_class) : "none"); }});
  add("train", "directions",
      {[&t](const std::string& v) {
         t.known_directions.clear();
         std::stringstream ss(trim(v));
         std::string item;
         while (std::getline(ss, item, ';'))
           if (!trim(item).empty()) t.known_directions.push_back(parse_vec3(item));
       },
       [&t] { return join_vec3(t.known_directions); }});
  bind("train", "seed", t.seed);
  add("train", "mode", {[&t](const std::string& v) { t.mode = formulation_mode_from_string(trim(v)); },
                        [&t] { return std::string(to_string(t.mode)); }});
  bind("train", "gamma", t.gamma);
  bind("train", "design_width", t.design_width);
  bind("train", "invariant_width", t.invariant_width);
  bind("train", "layers", t.layers);
  bind("train", "log_every", t.log_every);
  bind("train", "early_stop", t.early_stop);
  bind("train", "early_stop_tol", t.early_stop_tol);
  bind("train", "early_stop_window", t.early_stop_window);
  bind("train", "normalize_components", t.normalize_components);
  bind("train", "active_threshold", t.active_threshold);
  bind("train", "inactive_threshold", t.inactive_threshold);
  bind("train", "checkpoint_every", t.checkpoint_every);

  auto& iv = c.inverse;
  bind("inverse", "population", iv.cma.population);
  bind("inverse", "sigma0", iv.cma.sigma0);
  bind("inverse", "mean0", iv.cma.mean0);
  bind("inverse", "max_evaluations", iv.cma.max_evaluations);
  bind("inverse", "seed", iv.cma.seed);
  bind("inverse", "target", iv.cma.target);
  bind("inverse", "tol_x", iv.cma.tol_x);
  bind("inverse", "tol_fun", iv.cma.tol_fun);
  bind("inverse", "bound_penalty", iv.cma.bound_penalty);
  bind("inverse", "restarts", iv.restarts);
  bind("inverse", "free_orientation", iv.free_orientation);
  bind("inverse", "lower", iv.lower);
  bind("inverse", "upper", iv.upper);

  auto& f = c.fem;
  bind("fem", "lx", f.fem.Lx);
  bind("fem", "ly", f.fem.Ly);
  bind("fem", "lz", f.fem.Lz);
  bind("fem", "nx", f.fem.nx);
  bind("fem", "ny", f.fem.ny);
  bind("fem", "nz", f.fem.nz);
  bind("fem", "u0", f.fem.u0);
  bind("fem", "load_steps", f.fem.load_steps);
  bind("fem", "tolerance", f.fem.tolerance);
  bind("fem", "max_newton", f.fem.max_newton);
  bind("fem", "design", f.design);
  bind("fem", "phi", f.phi);
  bind("fem", "p", f.p);
  bind("fem", "restarts", f.restarts);
  bind("fem", "seed", f.seed);
  bind("fem", "nm_initial_scale", f.nm.initial_scale);
  bind("fem", "nm_reflection", f.nm.reflection);
  bind("fem", "nm_expansion", f.nm.expansion);
  bind("fem", "nm_contraction", f.nm.contraction);
  bind("fem", "nm_shrink", f.nm.shrink);
  bind("fem", "nm_max_iterations", f.nm.max_iterations);
  bind("fem", "nm_tolerance", f.nm.tolerance);
  bind("fem", "nm_f_tolerance", f.nm.f_tolerance);
}

void ConfigBinding::set(const std::string& section, const std::string& key, const std::string& value) {
  const auto it = entries_.find(section);
  if (it == entries_.end()) {
    std::string valid;
    for (const auto& s : sections_) valid += (valid.empty() ? "" : ", ") + s;
    throw InvalidArgument("unknown config section [" + section + "]; valid sections: " + valid);
  }
  for (auto& [k, e] : it->second)
    if (k == key) {
      try {
        e.set(value);
      } catch (const InvalidArgument& err) {
        throw InvalidArgument(section + "." + key + ": " + err.what());
      }
      return;
    }
  std::string valid;
  for (const auto& [k, e] : it->second) valid += (valid.empty() ? "" : ", ") + k;
  throw InvalidArgument("unknown key '" + key + "' in [" + section + "]; valid keys: " + valid);
}

void ConfigBinding::set_assignment(const std::string& a) {
  const auto eq = a.find('=');
  const auto dot = a.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw InvalidArgument("expected section.key=value, got '" + a + "'");
  set(trim(a.substr(0, dot)), trim(a.substr(dot + 1, eq - dot - 1)), a.substr(eq + 1));
}

void ConfigBinding::load_ini(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  load_ini_text(ss.str(), path.string());
}

void ConfigBinding::load_ini_text(const std::string& text, const std::string& source) {
  std::stringstream ss(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    if (t.front() == '[') {
      if (t.back() != ']') throw InvalidArgument(where + "malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      if (!entries_.count(section)) {
        std::string valid;
        for (const auto& s : sections_) valid += (valid.empty() ? "" : ", ") + s;
        throw InvalidArgument(where + "unknown section [" + section + "]; valid sections: " + valid);
      }
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw InvalidArgument(where + "expected key = value");
    if (section.empty()) throw InvalidArgument(where + "key outside of a section");
    try {
      set(section, trim(t.substr(0, eq)), t.substr(eq + 1));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(where + e.what());
    }
  }
}

std::string ConfigBinding::to_ini() const {
  std::string out;
  for (const auto& s : sections_) {
    out += "[" + s + "]\n";
    for (const auto& [k, e] : entries_.at(s)) out += k + " = " + e.get() + "\n";
    out += "\n";
  }
  return out;
}

datagen::ModelSpec model_spec(const DataOptions& d) {
  if (d.model.empty()) throw InvalidArgument("no model given (--model or [data] model)");
  const auto kind = datagen::model_kind_from_string(d.model);
  const auto cls = anisotropy_class_from_string(d.cls);
  auto spec = datagen::ModelSpec::defaults(kind, kind == datagen::ModelKind::aniso_hgo ? cls : AnisotropyClass::iso);
  if (kind != datagen::ModelKind::aniso_hgo && cls != AnisotropyClass::iso)
    throw InvalidArgument(d.model + " is isotropic; class must be iso");
  spec.hgo = d.hgo;
  spec.nu = d.nu;
  if (!d.grid.empty()) {
    const auto counts = parse_grid(d.grid);
    if (counts.size() > spec.axes.size())
      throw InvalidArgument("grid has " + std::to_string(counts.size()) + " axes but " + d.model + " has " +
                            std::to_string(spec.axes.size()) + " design variables");
    // Axes beyond the grid stay at their fixed parameter values.
    spec.axes.resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) spec.axes[i].count = counts[i];
  }
  if (!d.ranges.empty()) {
    std::stringstream ss(d.ranges);
    std::string item;
    std::size_t i = 0;
    while (std::getline(ss, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos || i >= spec.axes.size()) throw InvalidArgument("ranges: expected lo:hi per axis");
      spec.axes[i].lo = to_double(item.substr(0, colon));
      spec.axes[i].hi = to_double(item.substr(colon + 1));
      if (spec.axes[i].hi < spec.axes[i].lo) throw InvalidArgument("ranges: hi < lo");
      ++i;
    }
    if (i != spec.axes.size()) throw InvalidArgument("ranges: expected one lo:hi per grid axis");
  }
  return spec;
}

}  // namespace anisoforge::cli
