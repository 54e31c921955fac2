#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gcdq;
using namespace gcdq::testing;

namespace {

namespace fs = std::filesystem;

int run(const std::string& args) {
  std::string cmd = std::string(GCDQ_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string fixture(const std::string& name) {
  return std::string(GCDQ_FIXTURE_DIR) + "/" + name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch() {
  fs::path dir = fs::temp_directory_path() / "gcdq-cli-test";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("graph validate exit codes") {
  CHECK(run("graph validate " + fixture("valid_graph.json")) == 0);
  CHECK(run("graph validate " + fixture("broken_condition.json")) == 1);
  CHECK(run("graph validate /nonexistent/file.json") == 2);
}

TEST_CASE("graph quality prints a certified value") {
  CHECK(run("graph quality " + fixture("valid_graph.json")) == 0);
}

TEST_CASE("pipeline run, trace verify, and tamper rejection") {
  fs::path dir = scratch();
  Rng rng(51);
  PipelineInstance inst = pipeline_instance(rng, 12, 3, 1);
  fs::path graph_path = dir / "graph.json";
  {
    std::ofstream out(graph_path);
    out << inst.graph.to_json().dump(2);
  }
  CHECK(run("pipeline run " + graph_path.string() + " 1009 --out " + dir.string()) == 0);
  fs::path trace = dir / "trace.json";
  REQUIRE(fs::exists(trace));
  CHECK(run("trace verify " + trace.string()) == 0);

  nlohmann::json j = nlohmann::json::parse(slurp(trace));
  j["steps"][0]["inequalities"][0]["rhs"]["lo"] = "0/1";
  fs::path tampered = dir / "tampered.json";
  {
    std::ofstream out(tampered);
    out << j.dump(2);
  }
  CHECK(run("trace verify " + tampered.string()) == 1);

  // Precondition failure: an edgeless graph has zero density.
  GcdGraph empty = make_graph({{{{1051, 1}}, Rational(1)}}, {{{{1061, 1}}, Rational(1)}}, {});
  fs::path empty_path = dir / "empty.json";
  {
    std::ofstream out(empty_path);
    out << empty.to_json().dump(2);
  }
  CHECK(run("pipeline run " + empty_path.string() + " 1009 --out " + dir.string()) == 4);
}

TEST_CASE("ds outputs are byte stable across runs") {
  fs::path d1 = scratch() / "r1";
  fs::path d2 = scratch() / "r2";
  for (const auto& d : {d1, d2}) {
    fs::create_directories(d);
    CHECK(run("ds measure --psi const:1/2 --qmin 2 --qmax 30 --seed 7 --out " + d.string()) ==
          0);
    CHECK(run("ds overlap --psi const:1/2 --max 20 --seed 7 --out " + d.string()) == 0);
    CHECK(run("ds second-moment --psi const:1/2 --x 2 --tgrid 1,2 --seed 7 --out " +
              d.string()) == 0);
    CHECK(run("ds anatomy --x 100 --t 1 --c 1 --seed 7 --out " + d.string()) == 0);
    CHECK(run("ds counterexample --n 8 --scale 480 --seed 7 --out " + d.string()) == 0);
    CHECK(run("ds catlin --psi recip --q 6 --seed 7 --out " + d.string()) == 0);
  }
  for (const char* f : {"measure.csv", "overlap.csv", "second_moment.csv", "anatomy.csv",
                        "counterexample.json", "catlin.csv"}) {
    CHECK(slurp(d1 / f) == slurp(d2 / f));
    CHECK(!slurp(d1 / f).empty());
  }
}

TEST_CASE("ds anatomy row matches the library count") {
  fs::path dir = scratch() / "anatomy";
  fs::create_directories(dir);
  REQUIRE(run("ds anatomy --x 100 --t 1 --c 1 --out " + dir.string()) == 0);
  std::string csv = slurp(dir / "anatomy.csv");
  CHECK(csv.find("100,1/1,1/1,3,") != std::string::npos);
}
