#include "anisoforge/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "anisoforge/errors.hpp"

namespace anisoforge {

namespace {

constexpr const char* kMagic = "#ANISOFORGE-DATASET";

void append_number(std::string& line, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  if (!line.empty()) line.push_back(' ');
  line += buf;
}

}  // namespace

Eigen::VectorXd Dataset::design_lower() const {
  if (records.empty()) return Eigen::VectorXd(design_dim());
  Eigen::VectorXd lo = records.front().D;
  for (const auto& r : records) lo = lo.cwiseMin(r.D);
  return lo;
}

Eigen::VectorXd Dataset::design_upper() const {
  if (records.empty()) return Eigen::VectorXd(design_dim());
  Eigen::VectorXd hi = records.front().D;
  for (const auto& r : records) hi = hi.cwiseMax(r.D);
  return hi;
}

std::vector<Eigen::VectorXd> Dataset::unique_designs() const {
  std::vector<Eigen::VectorXd> out;
  for (const auto& r : records) {
    bool seen = false;
    for (const auto& d : out)
      if (d == r.D) {
        seen = true;
        break;
      }
    if (!seen) out.push_back(r.D);
  }
  return out;
}

void write_dataset(const Dataset& data, std::ostream& os) {
  nlohmann::json meta = data.metadata;
  meta["design_names"] = data.design_names;
  meta["n_records"] = data.records.size();
  os << kMagic << " v1 " << meta.dump() << '\n';
  std::string line;
  for (const auto& r : data.records) {
    if (r.D.size() != data.design_dim()) throw InvalidArgument("dataset: record design size mismatch");
    line.clear();
    for (Eigen::Index i = 0; i < r.D.size(); ++i) append_number(line, r.D[i]);
    for (int i = 0; i < 6; ++i) append_number(line, r.C[i]);
    for (int i = 0; i < 6; ++i) append_number(line, r.S[i]);
    os << line << '\n';
  }
  if (!os) throw IoError("dataset: write failed");
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_dataset(data, os);
}

Dataset read_dataset(std::istream& is, const std::string& source) {
  std::string line;
  if (!std::getline(is, line)) throw IoError(source + ": empty dataset file");
  std::istringstream head(line);
  std::string magic, version;
  head >> magic >> version;
  if (magic != kMagic) throw IoError(source + ": missing " + std::string(kMagic) + " header");
  if (version != "v1") throw IoError(source + ": unsupported dataset version '" + version + "'");
  std::string json_text;
  std::getline(head, json_text);
  Dataset data;
  try {
    data.metadata = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(source + ": bad metadata header: " + e.what());
  }
  if (!data.metadata.contains("design_names") || !data.metadata["design_names"].is_array())
    throw IoError(source + ": metadata lacks design_names");
  data.design_names = data.metadata["design_names"].get<std::vector<std::string>>();
  data.metadata.erase("design_names");
  data.metadata.erase("n_records");

  const int m = data.design_dim();
  const int cols = m + 12;
  std::vector<double> vals;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    vals.clear();
    const char* p = line.c_str();
    char* end = nullptr;
    while (true) {
      const double v = std::strtod(p, &end);
      if (end == p) break;
      vals.push_back(v);
      p = end;
    }
    while (*p == ' ' || *p == '\t' || *p == '\r') ++p;
    if (*p != '\0' || static_cast<int>(vals.size()) != cols) {
      std::ostringstream os;
      os << source << ":" << lineno << ": expected " << cols << " numeric columns";
      throw IoError(os.str());
    }
    SampleRecord r;
    r.D = Eigen::Map<const Eigen::VectorXd>(vals.data(), m);
    for (int i = 0; i < 6; ++i) {
      r.C[i] = vals[static_cast<std::size_t>(m + i)];
      r.S[i] = vals[static_cast<std::size_t>(m + 6 + i)];
    }
    data.records.push_back(std::move(r));
  }
  return data;
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open dataset '" + path.string() + "'");
  return read_dataset(is, path.string());
}

}  // namespace anisoforge
