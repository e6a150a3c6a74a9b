#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "anisoforge/checkpoint.hpp"
#include "anisoforge/dataset.hpp"
#include "anisoforge/datagen.hpp"
#include "anisoforge/errors.hpp"
#include "support.hpp"

using namespace anisoforge;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "anisoforge_test_io";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("dataset round trip is exact") {
  auto spec = datagen::ModelSpec::defaults(datagen::ModelKind::aniso_hgo, AnisotropyClass::ortho, 2);
  datagen::SamplerSpec s;
  s.n_F = 5;
  const Dataset d = datagen::build_dataset(spec, s, 2);
  std::stringstream ss;
  write_dataset(d, ss);
  const Dataset r = read_dataset(ss);
  REQUIRE(r.size() == d.size());
  CHECK(r.design_names == d.design_names);
  CHECK(r.metadata["model"] == "aniso-hgo");
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(r.records[i].D == d.records[i].D);
    CHECK(r.records[i].C.components() == d.records[i].C.components());
    CHECK(r.records[i].S.components() == d.records[i].S.components());
  }
  CHECK(r.design_lower() == Eigen::Vector3d(1, 3, 2));
  CHECK(r.design_upper() == Eigen::Vector3d(5, 7, 6));

  const auto path = scratch("data.txt");
  write_dataset(d, path);
  CHECK(read_dataset(path).size() == d.size());
}

TEST_CASE("malformed datasets are rejected with a location") {
  std::stringstream no_header("1 2 3\n");
  CHECK_THROWS_AS(read_dataset(no_header), IoError);
  std::stringstream short_row(
      "#ANISOFORGE-DATASET v1 {\"design_names\":[\"c1\"]}\n"
      "1 1 1 1 0 0 0 0 0 0 0 0 0\n"
      "1 1 1 1 0 0 0\n");
  try {
    read_dataset(short_row, "bad.txt");
    FAIL("expected an error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("bad.txt:3") != std::string::npos);
  }
  CHECK_THROWS_AS(read_dataset(fs::path("/nonexistent/anisoforge.txt")), IoError);
}

TEST_CASE("checkpoint round trip reproduces the surrogate bitwise") {
  std::mt19937_64 rng(4);
  for (auto mode : {FormulationMode::polyconvex, FormulationMode::unconstrained}) {
    testing::ModelOptions o;
    o.mode = mode;
    Checkpoint ck;
    ck.model = testing::random_model(rng, o);
    ck.model.network().set_design_bounds(Eigen::Vector2d(1, 1), Eigen::Vector2d(5, 5));
    ck.model.anisotropy().fixed_class = AnisotropyClass::trans;
    ck.design_names = {"c1", "c4"};
    ck.epoch = 123;
    ck.adam.m = Eigen::VectorXd::LinSpaced(5, 0.1, 0.5);
    ck.adam.v = Eigen::VectorXd::LinSpaced(5, 1.0, 2.0);
    ck.adam.step = 123;
    ck.extra["note"] = "x";
    const auto path = scratch("model.json");
    save_checkpoint(ck, path);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.epoch == 123);
    CHECK(back.design_names == ck.design_names);
    CHECK(back.adam.m == ck.adam.m);
    CHECK(back.adam.step == 123);
    CHECK(back.extra["note"] == "x");
    CHECK(back.model.network().architecture() == ck.model.network().architecture());
    CHECK(back.model.network().parameters() == ck.model.network().parameters());
    CHECK(back.model.network().design_lower() == ck.model.network().design_lower());
    CHECK(back.model.anisotropy().fixed_class == AnisotropyClass::trans);
    CHECK(back.model.config().mode == mode);
    const auto C = testing::random_C(rng);
    const Eigen::Vector2d D(2.5, 3.5);
    CHECK(back.model.stress(C, D).components() == ck.model.stress(C, D).components());
  }
  CHECK_THROWS_AS(load_checkpoint(scratch("missing.json")), IoError);
  std::ofstream(scratch("broken.json")) << "{\"architecture\": 3";
  CHECK_THROWS(load_checkpoint(scratch("broken.json")));
}
