#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "ad3/graph.hpp"

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  const std::string command = std::string(AD3_CLI_PATH) + " " + args + " 2>&1";
  RunResult result;
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 256> buffer;
  while (fgets(buffer.data(), buffer.size(), pipe) != nullptr) {
    result.output += buffer.data();
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string temp_path(const std::string& name) {
  return std::string("/tmp/ad3_cli_test_") + name;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

TEST_CASE("gen then solve then exact round trip") {
  const std::string graph_path = temp_path("g.fg");
  RunResult r = run("gen --family ising --rows 4 --cols 4 --rho 1.0 --seed 7"
                    " --output " + graph_path);
  CHECK(r.exit_code == 0);

  const std::string trace_path = temp_path("t.csv");
  r = run("solve --input " + graph_path + " --algorithm ad3 --eta 1.0"
          " --trace " + trace_path);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("ad3 status=") != std::string::npos);
  const std::string trace = read_file(trace_path);
  CHECK(trace.rfind("iter,dual,primal,r_primal,r_dual,eta,oracle_calls\n",
                    0) == 0);

  r = run("solve --input " + graph_path + " --exact");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("exact status=OPTIMAL") != std::string::npos);

  // `exact` subcommand is an alias
  r = run("exact --input " + graph_path);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("exact status=OPTIMAL") != std::string::npos);
}

TEST_CASE("algorithm both writes two suffixed traces") {
  const std::string graph_path = temp_path("g2.fg");
  RunResult r = run("gen --family ising --rows 3 --cols 3 --rho 0.5 --seed 3"
                    " --output " + graph_path);
  CHECK(r.exit_code == 0);
  const std::string trace_path = temp_path("t2");
  r = run("solve --input " + graph_path + " --algorithm both --trace " +
          trace_path);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("ad3 status=") != std::string::npos);
  CHECK(r.output.find("psg status=") != std::string::npos);
  CHECK(!read_file(trace_path + ".ad3.csv").empty());
  CHECK(!read_file(trace_path + ".psg.csv").empty());
}

TEST_CASE("generated graphs parse and validate") {
  const std::string graph_path = temp_path("g3.fg");
  RunResult r = run("gen --family potts --rows 2 --cols 2 --num-states 3"
                    " --seed 11 --output " + graph_path);
  CHECK(r.exit_code == 0);
  const ad3::FactorGraph g = ad3::parse_graph(read_file(graph_path));
  CHECK(g.num_variables() == 4);
  CHECK(g.num_factors() == 4);
}

TEST_CASE("input errors exit 1") {
  CHECK(run("solve --input /nonexistent/path.fg").exit_code == 1);
  CHECK(run("solve --frobnicate").exit_code == 1);
  const std::string bad_path = temp_path("bad.fg");
  std::ofstream(bad_path) << "variables 1\nvar 0 2 0\n";
  CHECK(run("solve --input " + bad_path).exit_code == 1);
}

TEST_CASE("require-convergence exits 2 on max-iters stops") {
  const std::string graph_path = temp_path("g4.fg");
  RunResult r = run("gen --family ising --rows 4 --cols 4 --rho 1.0 --seed 19"
                    " --output " + graph_path);
  CHECK(r.exit_code == 0);
  r = run("solve --input " + graph_path +
          " --max-iters 2 --require-convergence");
  CHECK(r.exit_code == 2);
}

TEST_CASE("solver flags are accepted") {
  const std::string graph_path = temp_path("g5.fg");
  RunResult r = run("gen --family ising --rows 3 --cols 3 --rho 1.0 --seed 2"
                    " --output " + graph_path);
  CHECK(r.exit_code == 0);
  const std::string out_path = temp_path("a.txt");
  r = run("solve --input " + graph_path +
          " --algorithm ad3 --eta 2.0 --no-eta-adapt --max-iters 500"
          " --tol 1e-8 --inner-iters 5 --no-cache --threads 2 --seed 1"
          " --output " + out_path);
  CHECK(r.exit_code == 0);
  CHECK(!read_file(out_path).empty());
}
