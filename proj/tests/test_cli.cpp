#include "thintube/cli.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using thintube::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch() {
  const auto dir = fs::temp_directory_path() / "thintube_cli_test";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

double value_after(const std::string& text, const std::string& key) {
  const auto pos = text.find(key + " ");
  REQUIRE(pos != std::string::npos);
  return std::stod(text.substr(pos + key.size() + 1));
}

const char* kStudy = R"json({
  "command": "sweep",
  "geometry": {"profile": "2 - s^2", "curvature": "0.3*(1 - s^2)", "torsion": "0.5"},
  "section": {"shape": "disk", "radius": 1, "n": 48},
  "eps": [0.1, 0.05, 0.025, 0.0125],
  "j_max": 2
})json";

}  // namespace

TEST_CASE("section subcommand: disk eigenvalue and JSON artifact") {
  const auto stem = (scratch() / "disk").string();
  const auto r = call({"section", "--shape", "disk", "--radius", "1", "--n", "96", "--out", stem});
  REQUIRE(r.code == 0);
  const double j01 = 2.404825557695773;
  CHECK(std::abs(value_after(r.out, "lambda0") - j01 * j01) / (j01 * j01) < 0.01);
  CHECK(r.out.find("lambda1") != std::string::npos);
  CHECK(r.out.find("C1") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(stem + ".json"));
  CHECK(j.at("lambda0").get<double>() == doctest::Approx(value_after(r.out, "lambda0")).epsilon(1e-11));
}

TEST_CASE("every subcommand's help lists its flags") {
  const std::vector<std::pair<std::string, std::vector<std::string>>> expected{
      {"section", {"--config", "--shape", "--radius", "--center", "--x-range", "--y-range", "--vertices", "--n", "--out"}},
      {"geometry", {"--config", "--profile", "--curvature", "--torsion", "--rotation", "--unbounded", "--interval",
                    "--delta", "--json"}},
      {"effective", {"--config", "--eps", "--j-max", "--grid-n", "--boundary", "--csv", "--json"}},
      {"sweep", {"--config", "--eps", "--j-max", "--grid-n", "--delta", "--window-cap", "--section-n", "--csv",
                 "--json"}},
      {"neumann", {"--config", "--eps", "--csv", "--json"}},
      {"essential", {"--config", "--eps", "--unbounded", "--json"}},
      {"tube3d", {"--config", "--kind", "--planes", "--tube-section-n", "--coarse-planes", "--coarse-section-n",
                  "--spread-limit", "--json"}},
      {"report", {"--in", "--format", "--out"}},
  };
  for (const auto& [sub, flags] : expected) {
    const auto r = call({sub, "--help"});
    CAPTURE(sub);
    CHECK(r.code == 0);
    for (const auto& f : flags) {
      CAPTURE(f);
      CHECK(r.out.find(f) != std::string::npos);
    }
  }
}

TEST_CASE("input errors exit with code 2") {
  CHECK(call({"sweep", "--no-such-flag"}).code == 2);
  CHECK(call({}).code == 2);
  CHECK(call({"frobnicate"}).code == 2);

  const auto bad = scratch() / "bad.json";
  write(bad, R"({"geometry": {"profil": "2 - s^2"}})");
  auto r = call({"sweep", "--config", bad.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("geometry.profil") != std::string::npos);

  r = call({"sweep", "--profile", "2", "--eps", "0.1", "0.05"});
  CHECK(r.code == 2);
  CHECK(r.err.find("hypothesis") != std::string::npos);

  r = call({"sweep", "--profile", "2 - s^^2"});
  CHECK(r.code == 2);
  r = call({"sweep", "--eps", "0.05", "0.1"});
  CHECK(r.code == 2);

  const auto other = scratch() / "other.json";
  write(other, R"({"command": "neumann"})");
  CHECK(call({"sweep", "--config", other.string()}).code == 2);
}

TEST_CASE("numerical failures exit with code 3 and name the stage") {
  const auto r = call({"sweep", "--unbounded", "--profile", "2 - s^2/(1 + s^2)", "--window-cap", "0.5", "--eps",
                       "0.05", "0.025", "--section-n", "32"});
  CHECK(r.code == 3);
  CHECK(r.err.find("stage 'window'") != std::string::npos);
}

TEST_CASE("sweep from a config document; flags win over the document") {
  const auto dir = scratch();
  write(dir / "study.json", kStudy);
  const auto csv = (dir / "out.csv").string(), js = (dir / "out.json").string();
  auto r = call({"sweep", "--config", (dir / "study.json").string(), "--csv", csv, "--json", js});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("limit j=2") != std::string::npos);
  const auto text = slurp(csv);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 4 * 3);

  r = call({"report", "--in", js, "--format", "csv"});
  REQUIRE(r.code == 0);
  CHECK(r.out == text);
  r = call({"report", "--in", js, "--format", "json"});
  CHECK(r.out == slurp(js));

  r = call({"sweep", "--config", (dir / "study.json").string(), "--j-max", "0", "--csv", csv});
  REQUIRE(r.code == 0);
  const auto small = slurp(csv);
  CHECK(std::count(small.begin(), small.end(), '\n') == 1 + 4);

  CHECK(call({"report", "--in", (dir / "study.json").string()}).code == 2);
}

TEST_CASE("geometry, effective, neumann and essential subcommands") {
  auto r = call({"geometry", "--profile", "2 - s^2"});
  CHECK(r.code == 0);
  CHECK(r.out.find("hypotheses consistent") != std::string::npos);
  r = call({"geometry", "--profile", "2"});
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") != std::string::npos);

  const auto csv = (scratch() / "potential.csv").string();
  r = call({"effective", "--eps", "0.05", "--section-n", "32", "--csv", csv});
  CHECK(r.code == 0);
  CHECK(slurp(csv).rfind("epsilon,s,theta,zeta,W\n", 0) == 0);

  r = call({"neumann", "--profile", "2", "--eps", "0.1", "0.05", "--j-max", "0", "--section-n", "32"});
  CHECK(r.code == 0);
  CHECK(r.out.find("note:") != std::string::npos);

  r = call({"essential", "--unbounded", "--profile", "2 - s^2/(1 + s^2)", "--eps", "0.05", "0.025", "--section-n",
            "32"});
  CHECK(r.code == 0);
  CHECK(r.out.find(" yes ") != std::string::npos);
}

TEST_CASE("tube3d subcommand: straight tube differences vanish") {
  const auto r = call({"tube3d", "--kind", "form", "--eps", "0.2", "0.1", "0.05", "0.025", "--j-max", "0",
                       "--planes", "24", "--tube-section-n", "16", "--coarse-planes", "16", "--coarse-section-n",
                       "16"});
  CHECK(r.code == 0);
  CHECK(r.out.find("all differences vanish") != std::string::npos);
}

TEST_CASE("the installed binary is deterministic") {
  const char* exe = std::getenv("THINTUBE_CLI");
  if (!exe) {
    MESSAGE("THINTUBE_CLI not set; skipping the binary check");
    return;
  }
  const auto dir = scratch();
  write(dir / "study.json", kStudy);
  const auto cmd = [&](const std::string& tag) {
    const std::string line = std::string(exe) + " sweep --config " + (dir / "study.json").string() + " --csv " +
                             (dir / (tag + ".csv")).string() + " > " + (dir / (tag + ".txt")).string();
    return std::system(line.c_str());
  };
  const int a = cmd("a"), b = cmd("b");
  CHECK(a == 0);
  CHECK(a == b);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.txt") == slurp(dir / "b.txt"));
  CHECK(std::system((std::string(exe) + " sweep --bogus 2>/dev/null").c_str()) != 0);
}
