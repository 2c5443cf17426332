#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "condkl/app/commands.hpp"
#include "condkl/app/config.hpp"
#include "condkl/field_io.hpp"

using namespace condkl;
using namespace condkl::app;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"([grid]
nx = 10
ny = 5

[kernel]
sigma = 0.65
l1 = 0.3
l2 = 0.2

[observations]
count = 6

[model]
d = 20

[propagation]
method = mc
samples = 4
level = 2

[active_learning]
n_am = 2
ensemble = 10
samples = 20

[run]
seed = 5
)";

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("condkl_test_" + tag + "_" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return path / name;
  }
};

int run(const std::string& command, const fs::path& config, const fs::path& out, int threads = 1) {
  std::ostringstream log;
  CommandOptions o;
  o.command = command;
  o.config = config.string();
  o.out = out.string();
  o.threads = threads;
  const int code = run_command(o, log);
  if (code != 0) MESSAGE(log.str());
  return code;
}

std::string slurp(const fs::path& p) { return read_text(p); }

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig cfg = parse_config(kSmall);
  CHECK(cfg.nx == 10);
  CHECK(cfg.kernel.l1 == 0.3);
  CHECK(cfg.propagation == PropagationMethod::kMonteCarlo);
  CHECK(cfg.seed == 5);

  auto line_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return e.line();
    }
    return -1;
  };
  CHECK(line_of("[grid]\nnx = 10\nbogus = 3\n") == 3);
  CHECK(line_of("[grid]\nnx = 10\nnx = 12\n") == 3);
  CHECK(line_of("[nowhere]\n") == 1);
  CHECK(line_of("# comment\n[grid]\n\nnx = ten\n") == 4);
  CHECK(line_of("[kernel]\nconvention = wide\n") == 2);
  CHECK(line_of("nx = 3\n") == 1);
  CHECK(line_of("[grid]\nnx = 10\n") == -1);
}

TEST_CASE("config hash and presets") {
  ExperimentConfig a = parse_config(kSmall);
  ExperimentConfig b = a;
  b.output = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.kernel.sigma = 0.66;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(canonical_text(a).find("kernel.sigma = 0.65\n") != std::string::npos);
  for (const std::string& name : preset_names()) {
    const auto p = preset(name);
    REQUIRE(p.has_value());
    p->validate();
    CHECK(p->nx == 120);
    CHECK(p->ny == 60);
  }
  CHECK(preset("paper-sigma065").has_value());
  CHECK(preset("paper-sigma13")->kernel.sigma == 1.3);
  CHECK_FALSE(preset("missing").has_value());
}

TEST_CASE("synth is reproducible and writes sidecars") {
  TempDir tmp("synth");
  const fs::path cfg = tmp.write("small.ini", kSmall);
  REQUIRE(run("synth", cfg, tmp.path / "a") == 0);
  REQUIRE(run("synth", cfg, tmp.path / "b") == 0);
  for (const char* f : {"g_ref.csv", "k_ref.csv", "observations.csv", "g_ref.json", "synth.json"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(tmp.path / "a" / f));
    CHECK(slurp(tmp.path / "a" / f) == slurp(tmp.path / "b" / f));
  }
  CHECK(slurp(tmp.path / "a" / "g_ref.csv").rfind("x1,x2,", 0) == 0);
  CHECK_FALSE(fs::exists(tmp.path / "a" / ".condkl.lock"));
}

TEST_CASE("zero variance gives a flat reference field") {
  TempDir tmp("flat");
  std::string text = kSmall;
  text.replace(text.find("sigma = 0.65"), 12, "sigma = 0");
  const fs::path cfg = tmp.write("flat.ini", text);
  REQUIRE(run("synth", cfg, tmp.path / "o") == 0);
  const StructuredGrid grid(2.0, 1.0, 10, 5);
  const Vector g = parse_field_csv(slurp(tmp.path / "o" / "g_ref.csv"), grid);
  const Vector k = parse_field_csv(slurp(tmp.path / "o" / "k_ref.csv"), grid);
  CHECK(g.cwiseAbs().maxCoeff() == 0.0);
  CHECK((k.array() == 1.0).all());
}

TEST_CASE("small propagate run is fast and thread-independent") {
  TempDir tmp("prop");
  const fs::path cfg = tmp.write("small.ini", kSmall);
  const auto t0 = std::chrono::steady_clock::now();
  REQUIRE(run("propagate", cfg, tmp.path / "t1", 1) == 0);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 1.0);
  REQUIRE(run("propagate", cfg, tmp.path / "t2", 2) == 0);
  for (const char* f : {"propagate_mc.csv", "convergence.csv", "propagate.json"})
    CHECK(slurp(tmp.path / "t1" / f) == slurp(tmp.path / "t2" / f));
}

TEST_CASE("collocation at r = 20 and level 2 solves 41 nodes") {
  TempDir tmp("coll");
  std::string text = kSmall;
  text.replace(text.find("method = mc"), 11, "method = collocation\nmodel = unconditional");
  const fs::path cfg = tmp.write("coll.ini", text);
  REQUIRE(run("propagate", cfg, tmp.path / "o") == 0);
  const std::string j = slurp(tmp.path / "o" / "propagate.json");
  CHECK(j.find("\"nodes_solved\": 41") != std::string::npos);
  CHECK(j.find("\"r\": 20") != std::string::npos);
}

TEST_CASE("output directory resolution") {
  ExperimentConfig cfg;
  cfg.output = "from-config";
  unsetenv(kOutputDirEnv);
  CHECK(resolve_output_dir(cfg, std::nullopt) == fs::path("from-config"));
  setenv(kOutputDirEnv, "from-env", 1);
  CHECK(resolve_output_dir(cfg, std::nullopt) == fs::path("from-env"));
  CHECK(resolve_output_dir(cfg, std::string("from-flag")) == fs::path("from-flag"));
  unsetenv(kOutputDirEnv);
}

TEST_CASE("held lock and failures give distinct exit codes") {
  TempDir tmp("lock");
  const fs::path cfg = tmp.write("small.ini", kSmall);
  fs::create_directories(tmp.path / "held");
  std::ofstream(tmp.path / "held" / ".condkl.lock") << "1\n";
  CHECK(run("synth", cfg, tmp.path / "held") == kExitLocked);
  CHECK_FALSE(fs::exists(tmp.path / "held" / "g_ref.csv"));

  CHECK(run("nonsense", cfg, tmp.path / "u") == kExitUsage);
  CHECK(run("synth", tmp.path / "missing.ini", tmp.path / "u") == kExitUsage);

  std::string text = kSmall;
  text.replace(text.find("sigma = 0.65"), 12, "sigma = 0");
  const fs::path flat = tmp.write("flat.ini", text);
  const int code = run("condition", flat, tmp.path / "err");
  CHECK(code != kExitOk);
  REQUIRE(fs::exists(tmp.path / "err" / "error.json"));
  const std::string j = slurp(tmp.path / "err" / "error.json");
  CHECK(j.find("\"status\": \"error\"") != std::string::npos);
  CHECK(j.find("\"command\": \"condition\"") != std::string::npos);
}

TEST_CASE("shipped config files match the presets") {
  for (const std::string& name : preset_names()) {
    const fs::path file = fs::path(CONDKL_SOURCE_DIR) / "configs" / (name + ".ini");
    REQUIRE(fs::exists(file));
    const ExperimentConfig cfg = load_config(file.string());
    CHECK(config_hash(cfg) == config_hash(*preset(name)));
    CHECK(cfg.output == preset(name)->output);
  }
  load_config((fs::path(CONDKL_SOURCE_DIR) / "configs" / "desk.ini").string()).validate();
}
