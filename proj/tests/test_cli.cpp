#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include <doctest.h>

#include "anisoforge/errors.hpp"
#include "run_config.hpp"

using namespace anisoforge;
using namespace anisoforge::cli;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(ANISOFORGE_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path workdir() {
  const fs::path d = fs::temp_directory_path() / "anisoforge_test_cli";
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("config sections and overrides") {
  RunConfig cfg;
  ConfigBinding b(cfg);
  b.load_ini_text(
      "# comment\n"
      "[data]\n"
      "model = aniso-hgo\n"
      "class = trans\n"
      "grid = 3x3\n"
      "nf = 100\n"
      "independent = true\n"
      "n1 = 1,0,0\n"
      "[train]\n"
      "epochs = 500\n"
      "mode = unconstrained\n"
      "directions = 1,0,0;0,1,0\n"
      "[fem]\n"
      "u0 = 0.2\n",
      "test.ini");
  CHECK(cfg.data.model == "aniso-hgo");
  CHECK(cfg.data.sampler.n_F == 100);
  CHECK(cfg.data.sampler.independent);
  CHECK(cfg.data.hgo.n1 == Vec3(1, 0, 0));
  CHECK(cfg.train.epochs == 500);
  CHECK(cfg.train.mode == FormulationMode::unconstrained);
  CHECK(cfg.train.known_directions.size() == 2);
  CHECK(cfg.fem.fem.u0 == 0.2);

  b.set_assignment("train.learning_rate=0.005");
  CHECK(cfg.train.learning_rate == 0.005);
  CHECK_THROWS_AS(b.set_assignment("train.nonsense=1"), InvalidArgument);
  CHECK_THROWS_AS(b.set_assignment("bogus.x=1"), InvalidArgument);
  CHECK_THROWS_AS(b.set_assignment("train.epochs"), InvalidArgument);
  CHECK_THROWS_AS(b.set("train", "epochs", "many"), InvalidArgument);
  try {
    b.set("data", "modle", "x");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("model") != std::string::npos);
  }

  // The echo parses back to the same configuration.
  RunConfig again;
  ConfigBinding b2(again);
  b2.load_ini_text(b.to_ini(), "echo");
  CHECK(b2.to_ini() == b.to_ini());
  CHECK(again.train.learning_rate == 0.005);
}

TEST_CASE("grid and model specification") {
  CHECK(parse_grid("5x5") == std::vector<int>{5, 5});
  CHECK(parse_grid("3") == std::vector<int>{3});
  CHECK_THROWS_AS(parse_grid("3xz"), InvalidArgument);
  CHECK(parse_list("1, 2.5,3") == std::vector<double>{1, 2.5, 3});
  CHECK_THROWS_AS(parse_vec3("1,2"), InvalidArgument);

  DataOptions d;
  d.model = "aniso-hgo";
  d.cls = "ortho";
  d.grid = "3x4x2";
  d.ranges = "1:2,3:4,5:6";
  const auto spec = model_spec(d);
  REQUIRE(spec.axes.size() == 3);
  CHECK(spec.axes[1].count == 4);
  CHECK(spec.axes[2].lo == 5.0);
  d.grid = "3x3";
  d.ranges.clear();
  CHECK(model_spec(d).axes.size() == 2);
  d.model.clear();
  CHECK_THROWS_AS(model_spec(d), InvalidArgument);
}

TEST_CASE("command line exit codes and run layout") {
  const fs::path dir = workdir();
  const std::string runs = "--runs-dir " + (dir / "runs").string();
  CHECK(run("--help") == 0);
  CHECK(run("gen-data " + runs) == 2);
  CHECK(run("gen-data --model neo-hookean --no-such-flag " + runs) == 2);
  CHECK(run("gen-data --model neo-hookean --set data.bogus=1 " + runs) == 2);
  CHECK(run("train --data " + (dir / "missing.txt").string() + " " + runs) == 4);

  REQUIRE(run("gen-data --model neo-hookean --grid 2x2 --set data.nf=6 --run tiny " + runs) == 0);
  const fs::path data = dir / "runs" / "tiny" / "reports" / "dataset.txt";
  CHECK(fs::exists(data));
  CHECK(fs::exists(dir / "runs" / "tiny" / "config" / "resolved.ini"));
  REQUIRE(run("train --data " + data.string() +
              " --set train.epochs=5 --set train.design_width=3 --set train.invariant_width=3 --run tiny " + runs) == 0);
  CHECK(fs::exists(dir / "runs" / "tiny" / "checkpoints" / "model.json"));
  CHECK(fs::exists(dir / "runs" / "tiny" / "logs" / "train.csv"));
  CHECK(fs::exists(dir / "runs" / "tiny" / "reports" / "train.json"));
  const std::string ck = (dir / "runs" / "tiny" / "checkpoints" / "model.json").string();
  CHECK(run("evaluate --checkpoint " + ck + " --data " + data.string() + " --run tiny " + runs) == 0);
  CHECK(fs::exists(dir / "runs" / "tiny" / "reports" / "evaluate.json"));
  CHECK(run("probe-isotropy --model neo-hookean --design 1,1 --run tiny " + runs) == 0);
  CHECK(fs::exists(dir / "runs" / "tiny" / "reports" / "isotropy.csv"));
}
