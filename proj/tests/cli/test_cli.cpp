#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "commands.hpp"

using namespace torifano;
using namespace torifano::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::path(TORIFANO_CLI_WORKDIR);

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, const std::string& text) {
  fs::create_directories(kWork);
  const fs::path p = kWork / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

struct Result {
  int code;
  std::string output;
};

Result run_cli(const std::string& args) {
  const fs::path log = kWork / "last_output.txt";
  const std::string cmd = std::string(TORIFANO_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

std::string config_error(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigError);
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config errors name the offending field") {
  CHECK(config_error(R"({"polytope": {"labels": [{"normal": [1, 0]}, {"normal": [0, 1.5]}]}})")
            .find("polytope.labels[1].normal") != std::string::npos);
  CHECK(config_error(R"({"flow": {"scheme": "rk4"}})").find("flow.scheme") != std::string::npos);
  CHECK(config_error(R"({"flow": {"dt": "sometimes"}})").find("flow.dt") != std::string::npos);
  CHECK(config_error(R"({"grid": {"resolutoin": 3}})").find("grid.resolutoin") != std::string::npos);
  CHECK(config_error(R"({"initial": {"type": "bump"}})").find("initial.amplitude") != std::string::npos);
  CHECK(config_error("{not json").find("not valid JSON") != std::string::npos);
}

TEST_CASE("config round trip and named deformation forms") {
  const RunConfig c = parse_config_text(R"({
    "polytope": "cp1xcp1",
    "deformation": {"A": [[0, 0.2], [-0.2, 0]], "B": {"beta": 0.3}},
    "initial": {"type": "polynomial", "terms": [{"exponents": [2, 0], "coefficient": 0.1}]},
    "flow": {"dt": 1e-5, "scheme": "explicit-euler", "normalization": "none"}})");
  const DeformationPair d = build_deformation(c, 2);
  CHECK(d.B(0, 1) == 0.3);
  CHECK(d.A(1, 0) == -0.2);
  CHECK(c.flow.dt.value() == 1e-5);
  const RunConfig back = parse_config(c.to_json());
  CHECK(back.to_json() == c.to_json());

  RunConfig bad = c;
  bad.B = {{0.0, 0.3}, {0.3, 0.0}};
  CHECK_THROWS_WITH_AS(build_deformation(bad, 2), doctest::Contains("deformation.B"), Error);
}

TEST_CASE("validate: taming margin and failure") {
  const auto ok = write_config("beta05.json", R"({"deformation": {"B": {"beta": 0.5}}})");
  const auto bad = write_config("beta12.json", R"({"deformation": {"B": {"beta": 1.2}}})");
  const Result r1 = run_cli("validate --preset cp1xcp1 --resolution 41 --config " + ok.string());
  CHECK(r1.code == 0);
  CHECK(r1.output.find("FAIL") == std::string::npos);
  const Result r2 = run_cli("validate --preset cp1xcp1 --resolution 41 --config " + bad.string());
  CHECK(r2.code == 2);
  CHECK(r2.output.find("taming failure at (0, 0)") != std::string::npos);
}

TEST_CASE("exit codes for parse errors and invalid polytopes") {
  const auto malformed = write_config(
      "malformed.json",
      R"({"polytope": {"labels": [{"normal": [1, 0]}, {"normal": [0, 1.5]}, {"normal": [-1, 0]}, {"normal": [0, -1]}]}})");
  const Result r = run_cli("validate --config " + malformed.string());
  CHECK(r.code == 4);
  CHECK(r.output.find("polytope.labels[1].normal") != std::string::npos);

  CHECK(run_cli("validate --preset nope").code == 4);
  CHECK(run_cli("validate --no-such-flag").code == 4);

  const auto not_delzant = write_config(
      "notdelzant.json",
      R"({"polytope": {"labels": [{"normal": [1, 2]}, {"normal": [0, -1]}, {"normal": [-1, 0]}]}})");
  CHECK(run_cli("validate --config " + not_delzant.string()).code == 2);
}

TEST_CASE("functionals on the presets") {
  const Result r = run_cli("functionals --preset cp1");
  REQUIRE(r.code == 0);
  const json j = json::parse(r.output);
  CHECK(std::abs(j["mabuchi"].get<double>() - 2.0) < 1e-5);
  CHECK(std::abs(j["a"].get<double>() - 2.0) < 1e-10);
  CHECK(std::abs(j["futaki_coordinates"][0].get<double>()) < 1e-10);
  CHECK(std::abs(j["kappa"]["min"].get<double>() - 2.0) < 1e-3);
  CHECK(std::abs(j["kappa"]["max"].get<double>() - 2.0) < 1e-3);

  const Result r2 = run_cli("functionals --preset cp2 --resolution 61");
  REQUIRE(r2.code == 0);
  const json j2 = json::parse(r2.output);
  CHECK(std::abs(j2["a"].get<double>() - 4.0) < 1e-9);
  CHECK(std::abs(j2["futaki_coordinates"][0].get<double>()) < 1e-9);
  CHECK(std::abs(j2["futaki_coordinates"][1].get<double>()) < 1e-9);

  const auto bad = write_config("beta12f.json", R"({"deformation": {"B": {"beta": 1.2}}})");
  const Result r3 = run_cli("functionals --preset cp1xcp1 --resolution 41 --config " + bad.string());
  CHECK(r3.code == 2);
  CHECK(r3.output.find("(0, 0)") != std::string::npos);
}

TEST_CASE("transform at y = 0 and y = 1") {
  const auto c = write_config("transform.json", R"({"transform": {"y": [[0], [1]]}})");
  const Result r = run_cli("transform --preset cp1 --config " + c.string());
  REQUIRE(r.code == 0);
  const json j = json::parse(r.output);
  CHECK(j["points"][0]["phi"].get<double>() == 0.0);
  CHECK(std::abs(j["points"][1]["x"][0].get<double>() - std::tanh(1.0)) < 1e-10);
  CHECK(std::abs(j["points"][1]["phi"].get<double>() - std::log(std::cosh(1.0))) < 1e-10);
}

TEST_CASE("flow outputs are deterministic and resume is exact") {
  const auto c = write_config("flow.json", R"({
    "polytope": "cp1xcp1", "deformation": {"B": {"beta": 0.3}},
    "initial": {"type": "bump", "amplitude": 0.1, "width": 1.0},
    "grid": {"resolution": 41},
    "flow": {"t_end": 0.2, "cadence": 0.05, "snapshot_cadence": 0.1}})");
  const fs::path a = kWork / "flow_a", r = kWork / "flow_r";
  for (const auto& d : {a, r}) fs::remove_all(d);

  REQUIRE(run_cli("flow --config " + c.string() + " --out " + a.string()).code == 0);
  const std::string csv1 = slurp(a / "observables.csv");
  const std::string summary1 = slurp(a / "summary.json");
  fs::remove_all(a);
  REQUIRE(run_cli("flow --config " + c.string() + " --out " + a.string()).code == 0);
  CHECK(slurp(a / "observables.csv") == csv1);
  CHECK(slurp(a / "summary.json") == summary1);

  const std::string csv = slurp(a / "observables.csv");
  CHECK(csv.rfind("t,mabuchi,sup_b_sq,kappa_min,kappa_max,rhs_sup,norm_change\n", 0) == 0);
  const json s = json::parse(slurp(a / "summary.json"));
  CHECK(s["status"] == "ok");
  CHECK(s["monotone"] == true);
  CHECK(s["samples"] == 5);
  CHECK(s["config"]["grid"]["resolution"] == 41);
  CHECK(json::parse(slurp(a / "timing.json")).contains("wall_seconds"));

  // Resume from the t = 0.1 snapshot and compare the final snapshots.
  std::vector<fs::path> snaps;
  for (const auto& e : fs::directory_iterator(a / "snapshots")) snaps.push_back(e.path());
  std::sort(snaps.begin(), snaps.end());
  REQUIRE(snaps.size() == 3);
  REQUIRE(run_cli("flow --config " + c.string() + " --out " + r.string() + " --resume " +
              snaps[1].string()).code == 0);
  std::vector<fs::path> resumed;
  for (const auto& e : fs::directory_iterator(r / "snapshots")) resumed.push_back(e.path());
  std::sort(resumed.begin(), resumed.end());
  REQUIRE(!resumed.empty());
  CHECK(resumed.back().filename() == snaps.back().filename());
  CHECK(slurp(resumed.back()) == slurp(snaps.back()));
}

TEST_CASE("a flow failure exits with 3 and is recorded") {
  const auto c = write_config("flow_bad.json", R"({
    "polytope": "cp1xcp1", "deformation": {"B": {"beta": 0.3}},
    "initial": {"type": "bump", "amplitude": 0.1, "width": 1.0},
    "grid": {"resolution": 41},
    "flow": {"t_end": 0.5, "dt": 0.01}})");
  const fs::path out = kWork / "flow_fail";
  fs::remove_all(out);
  const Result r = run_cli("flow --config " + c.string() + " --out " + out.string());
  CHECK(r.code == 3);
  const json s = json::parse(slurp(out / "summary.json"));
  CHECK(s["status"] == "failed");
  CHECK(s["error"]["kind"] == "StabilityAbort");
}
