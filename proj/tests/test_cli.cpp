// End-to-end driver tests: exit codes, artifact layout, determinism.
// BLOCHLAP_CLI points at the built binary; tests run in a scratch dir.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const fs::path scratch = fs::temp_directory_path() / "blochlap_cli_test";

int run(const std::string& args) {
  const std::string cmd =
      std::string(BLOCHLAP_CLI) + " " + args + " >" + (scratch / "stdout.txt").string() + " 2>" +
      (scratch / "stderr.txt").string();
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

fs::path write_config(const std::string& name, const std::string& body) {
  fs::create_directories(scratch);
  const fs::path p = scratch / name;
  std::ofstream(p) << body;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ostringstream ss;
  ss << std::ifstream(p).rdbuf();
  return ss.str();
}

int line_count(const fs::path& p) {
  std::ifstream in(p);
  int n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

const char* free2d = R"({
  "dimension": 2,
  "lambda": 0.09,
  "direction": [1.0, 0.0],
  "J_max": 4,
  "grid_N": 16,
  "num_bands": 4
})";

const char* free1d_solve = R"({
  "dimension": 1,
  "lambda": 0.09,
  "direction": [1.0],
  "J_max": 16,
  "grid_N": 16,
  "num_bands": 4,
  "eval_points": [[4.0]],
  "epsilon_ladder": [0.2],
  "contour": {"sigma1": 4.0, "sigma2": 4.0, "halo": 0.1, "slices": 1, "nodes_per_slice": 512}
})";

}  // namespace

TEST_CASE("bands row count on the free 2d grid") {
  const auto cfg = write_config("free2d.json", free2d);
  const auto out = scratch / "bands_out";
  REQUIRE(run("bands --config " + cfg.string() + " --out " + out.string()) == 0);
  // (grid_N+1)^2 nodes, 4 bands, plus the header
  CHECK(line_count(out / "bands.csv") == 17 * 17 * 4 + 1);
  CHECK(slurp(out / "bands.csv").substr(0, 32) == "alpha1,alpha2,band,mu,dmu1,dmu2\n");
}

TEST_CASE("malformed json exits 2") {
  const auto cfg = write_config("bad.json", "{not json");
  CHECK(run("bands --config " + cfg.string()) == 2);
  CHECK(slurp(scratch / "stderr.txt").find("\"code\":2") != std::string::npos);
}

TEST_CASE("invalid truncation exits 2") {
  const auto cfg = write_config("j0.json",
                                R"({"dimension": 1, "J_max": 0})");
  CHECK(run("bands --config " + cfg.string()) == 2);
}

TEST_CASE("missing config file exits 2") {
  CHECK(run("bands --config " + (scratch / "nope.json").string()) == 2);
}

TEST_CASE("empty ladder exits 2 for converge") {
  std::string body(free1d_solve);
  body.replace(body.find("[0.2]"), 5, "[]");
  const auto cfg = write_config("empty_ladder.json", body);
  CHECK(run("converge --config " + cfg.string() + " --out " + (scratch / "c0").string()) == 2);
}

TEST_CASE("single epsilon yields a single convergence row") {
  const auto cfg = write_config("one_eps.json", free1d_solve);
  const auto out = scratch / "c1";
  REQUIRE(run("converge --config " + cfg.string() + " --out " + out.string()) == 0);
  CHECK(line_count(out / "convergence.csv") == 2);
  CHECK(slurp(out / "convergence.csv").substr(0, 26) == "epsilon,max_abs_error\n0.20");
}

TEST_CASE("solve artifacts and determinism") {
  const auto cfg = write_config("solve.json", free1d_solve);
  const auto a = scratch / "sA";
  const auto b = scratch / "sB";
  REQUIRE(run("solve --config " + cfg.string() + " --out " + a.string()) == 0);
  REQUIRE(run("solve --config " + cfg.string() + " --out " + b.string()) == 0);
  CHECK(slurp(a / "solution.csv") == slurp(b / "solution.csv"));
  CHECK(slurp(a / "solution.csv").substr(0, 11) == "x1,re_total");
  CHECK(slurp(a / "diagnostics.json").find("\"pole_count\": 2") != std::string::npos);
}

TEST_CASE("fermi emits both tables") {
  const auto cfg = write_config("fermi.json", free1d_solve);
  const auto out = scratch / "f";
  REQUIRE(run("fermi --config " + cfg.string() + " --out " + out.string()) == 0);
  CHECK(line_count(out / "fermi.csv") == 3);  // header + one crossing per sign
  CHECK(line_count(out / "fermi_complex.csv") == 1);
}
