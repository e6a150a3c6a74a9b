#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "anisoforge/datagen.hpp"
#include "anisoforge/fem.hpp"
#include "anisoforge/optim.hpp"
#include "anisoforge/training.hpp"

namespace anisoforge::cli {

struct DataOptions {
  std::string model;  ///< empty until set
  std::string cls = "iso";
  std::string grid;   ///< "5x5"; empty = model default (5 per axis)
  std::string ranges; ///< "lo:hi,lo:hi"; empty = model default
  std::uint64_t seed = 1;
  datagen::SamplerSpec sampler;
  datagen::HgoParams hgo;
  double nu = 0.44;
};

struct InverseOptions {
  inverse::CmaConfig cma;
  int restarts = 5;
  bool free_orientation = false;
  std::vector<double> lower, upper;  ///< empty = training bounds of the checkpoint
};

struct FemOptions {
  fem::FemConfig fem;
  std::vector<double> design;
  double phi = 0.0;
  std::vector<double> p;  ///< orientation axis; empty = trained orientation
  inverse::NmConfig nm = [] {
    // each NM step is a full beam solve
    inverse::NmConfig c;
    c.initial_scale = 0.5;
    c.max_iterations = 200;
    c.tolerance = 1e-4;
    return c;
  }();
  int restarts = 5;
  std::uint64_t seed = 1;
};

struct RunConfig {
  DataOptions data;
  training::TrainConfig train;
  InverseOptions inverse;
  FemOptions fem;
};

/// Typed key registry over one RunConfig instance. Every addressable field is
/// listed here; the same table drives parsing, overrides and the echo.
class ConfigBinding {
 public:
  explicit ConfigBinding(RunConfig& cfg);

  /// Assigns section.key; unknown keys throw InvalidArgument listing the valid ones.
  void set(const std::string& section, const std::string& key, const std::string& value);
  /// "section.key=value".
  void set_assignment(const std::string& assignment);
  void load_ini(const std::filesystem::path& path);
  void load_ini_text(const std::string& text, const std::string& source);
  std::string to_ini() const;

 private:
  struct Entry {
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
  };
  std::vector<std::string> sections_;
  std::map<std::string, std::vector<std::pair<std::string, Entry>>> entries_;
  void add(const std::string& section, const std::string& key, Entry e);
  template <class T>
  void bind(const std::string& section, const std::string& key, T& ref);
};

std::vector<double> parse_list(const std::string& text);
Vec3 parse_vec3(const std::string& text);
/// "5x5" -> {5, 5}.
std::vector<int> parse_grid(const std::string& text);

/// Model and grid described by the [data] section.
datagen::ModelSpec model_spec(const DataOptions& d);

}  // namespace anisoforge::cli
