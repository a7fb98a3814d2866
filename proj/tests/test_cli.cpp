#include "catch_amalgamated.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <sys/wait.h>

using Catch::Matchers::WithinAbs;

namespace {

const char* DISK =
    "'{\"kind\":\"riemannian_conformal\",\"dim\":2,"
    "\"factor\":\"2/(1-x1^2-x2^2)\",\"domain\":{\"type\":\"ball\",\"radius\":1.0}}'";
const char* RANDERS =
    "'{\"kind\":\"randers\",\"dim\":2,\"alpha\":[[1,0],[0,1]],\"beta\":[0.5,0]}'";

struct CmdResult {
  int code = -1;
  std::string out;
};

CmdResult run_cli(const std::string& args, bool merge_stderr = false) {
  const char* bin = std::getenv("FINSLER_CLI");
  REQUIRE(bin != nullptr);
  std::string cmd = std::string(bin) + " " + args + (merge_stderr ? " 2>&1" : " 2>/dev/null");
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  CmdResult r;
  char buf[4096];
  size_t got;
  while ((got = fread(buf, 1, sizeof(buf), p)) > 0) r.out.append(buf, got);
  int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

nlohmann::json parse_json(const std::string& s) { return nlohmann::json::parse(s); }

}  // namespace

TEST_CASE("eval prints the norm") {
  CmdResult r = run_cli("eval --metric '{\"kind\":\"euclidean\",\"n\":2}' --x 0,0 --y 3,4");
  REQUIRE(r.code == 0);
  REQUIRE(r.out == "5.0\n");

  CmdResult j = run_cli("eval --metric '{\"kind\":\"euclidean\",\"n\":2}' --x 0,0 --y 3,4 --json");
  REQUIRE(j.code == 0);
  REQUIRE(parse_json(j.out)["F"].get<double>() == 5.0);
}

TEST_CASE("distance matches the hyperbolic oracle") {
  CmdResult r = run_cli(std::string("distance --metric ") + DISK + " --from 0,0 --to 0.5,0");
  REQUIRE(r.code == 0);
  REQUIRE_THAT(std::stod(r.out), WithinAbs(std::log(3.0), 1e-6));
}

TEST_CASE("tensor reports the flat identity") {
  CmdResult r =
      run_cli("tensor --metric '{\"kind\":\"euclidean\",\"dim\":2}' --x 0.3,0.1 --y 1,2");
  REQUIRE(r.code == 0);
  nlohmann::json j = parse_json(r.out);
  REQUIRE_THAT(j["g"][0][0].get<double>(), WithinAbs(1.0, 1e-12));
  REQUIRE_THAT(j["g"][0][1].get<double>(), WithinAbs(0.0, 1e-12));
  REQUIRE_THAT(j["g"][1][1].get<double>(), WithinAbs(1.0, 1e-12));
  REQUIRE_THAT(j["condition"].get<double>(), WithinAbs(1.0, 1e-9));
  REQUIRE_THAT(j["F"].get<double>(), WithinAbs(std::sqrt(5.0), 1e-12));
}

TEST_CASE("connection reports a vanishing flat spray") {
  CmdResult r =
      run_cli("connection --metric '{\"kind\":\"euclidean\",\"dim\":2}' --x 0.2,0.4 --y 0.7,0.1");
  REQUIRE(r.code == 0);
  nlohmann::json j = parse_json(r.out);
  REQUIRE_THAT(j["G"][0].get<double>(), WithinAbs(0.0, 1e-12));
  REQUIRE_THAT(j["G"][1].get<double>(), WithinAbs(0.0, 1e-12));
  REQUIRE(j["gamma1"].size() == 2);
  REQUIRE(j["P"].size() == 2);
}

TEST_CASE("trace emits well-formed CSV") {
  CmdResult r = run_cli(
      "trace --metric '{\"kind\":\"euclidean\",\"dim\":2}' --x 0,0 --v 1,0.5 "
      "--t-end 0.02 --step 0.01");
  REQUIRE(r.code == 0);
  std::vector<std::string> lines;
  size_t pos = 0;
  while (pos < r.out.size()) {
    size_t nl = r.out.find('\n', pos);
    lines.push_back(r.out.substr(pos, nl - pos));
    pos = nl + 1;
  }
  REQUIRE(lines.size() == 4);
  REQUIRE(lines[0] == "t,x1,x2,v1,v2,F");
  // final row holds the endpoint; fields parse as plain '.'-decimals
  double cols[6];
  int n = std::sscanf(lines[3].c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &cols[0], &cols[1], &cols[2],
                      &cols[3], &cols[4], &cols[5]);
  REQUIRE(n == 6);
  REQUIRE_THAT(cols[0], WithinAbs(0.02, 1e-15));
  REQUIRE_THAT(cols[1], WithinAbs(0.02, 1e-12));
  REQUIRE_THAT(cols[2], WithinAbs(0.01, 1e-12));
  REQUIRE_THAT(cols[5], WithinAbs(std::sqrt(1.25), 1e-12));
}

TEST_CASE("exp matches the hyperbolic closed form") {
  CmdResult r =
      run_cli(std::string("exp --metric ") + DISK + " --x 0,0 --v 0.5,0 --step 0.001");
  REQUIRE(r.code == 0);
  REQUIRE_THAT(std::stod(r.out), WithinAbs(std::tanh(0.5), 1e-8));
}

TEST_CASE("connect solves the directed flat problem") {
  CmdResult r =
      run_cli(std::string("connect --metric ") + RANDERS + " --from 0,0 --to 1,0 --json");
  REQUIRE(r.code == 0);
  nlohmann::json j = parse_json(r.out);
  REQUIRE(j["converged"].get<bool>());
  REQUIRE_THAT(j["X"][0].get<double>(), WithinAbs(1.0, 1e-9));
  REQUIRE_THAT(j["X"][1].get<double>(), WithinAbs(0.0, 1e-9));
  REQUIRE_THAT(j["length"].get<double>(), WithinAbs(1.5, 1e-9));
}

TEST_CASE("convexity emits the full report") {
  CmdResult r = run_cli(
      "convexity --metric '{\"kind\":\"euclidean\",\"dim\":2}' --at 0,0 --grid 1.0 "
      "--samples 4 --seed 42");
  REQUIRE(r.code == 0);
  nlohmann::json j = parse_json(r.out);
  REQUIRE(j["epsilon"].get<double>() == 1.0);
  REQUIRE(j["eta"].get<double>() == 3.0);
  REQUIRE(j["epsilon_tilde"].get<double>() == 1.0 / 3.0);
  REQUIRE(j["radii"].size() == 1);
  REQUIRE(j["radii"][0]["pass"].get<bool>());
}

TEST_CASE("identical invocations are byte-identical") {
  std::string cmd = std::string("connect --metric ") + DISK + " --from 0.1,0.2 --to -0.3,0.1 --json";
  CmdResult a = run_cli(cmd);
  CmdResult b = run_cli(cmd);
  REQUIRE(a.code == 0);
  REQUIRE(a.out == b.out);

  std::string conv =
      "convexity --metric '{\"kind\":\"euclidean\",\"dim\":2}' --at 0,0 --grid 0.5:1.0:0.5 "
      "--samples 4 --seed 9";
  CmdResult c = run_cli(conv);
  CmdResult d = run_cli(conv);
  REQUIRE(c.code == 0);
  REQUIRE(c.out == d.out);
}

TEST_CASE("verify runs the suite and writes the report file") {
  std::string path = "/tmp/finsler_cli_verify_report.json";
  std::remove(path.c_str());
  CmdResult r = run_cli("verify --metric-set zoo --seed 1 --json " + path);
  REQUIRE(r.code == 0);
  nlohmann::json j = parse_json(r.out);
  REQUIRE(j["all_pass"].get<bool>());
  REQUIRE(j["seed"].get<int>() == 1);
  REQUIRE(j["checks"].size() == 30);
  REQUIRE(j["rejections"].size() == 1);
  REQUIRE(j["rejections"][0]["metric"] == "quartic_axes");

  FILE* f = fopen(path.c_str(), "rb");
  REQUIRE(f != nullptr);
  std::string file_contents;
  char buf[4096];
  size_t got;
  while ((got = fread(buf, 1, sizeof(buf), f)) > 0) file_contents.append(buf, got);
  fclose(f);
  REQUIRE(file_contents == r.out);
  std::remove(path.c_str());
}

TEST_CASE("usage and input failures exit 1") {
  REQUIRE(run_cli("bogus", true).code == 1);
  REQUIRE(run_cli("eval --metric '{\"kind\":\"euclidean\",\"dim\":2}' --x 0,0", true).code == 1);
  REQUIRE(run_cli("eval --metric '{\"kind\":\"euclidean\",\"dim\":2}' --x 0,0 --y 1,2,3",
                  true).code == 1);
  REQUIRE(run_cli("eval --metric '{\"kind\":\"euclidean\",\"dim\":2}' --x 0,0 --y 1,zz",
                  true).code == 1);
  REQUIRE(run_cli("eval --metric nosuch.json --x 0,0 --y 1,0", true).code == 1);
  REQUIRE(run_cli("eval --metric '{\"kind\":\"euclidean\"}' --x 0,0 --y 1,0", true).code == 1);
  REQUIRE(run_cli("verify --metric-set nope", true).code == 1);
  // a norm whose fundamental tensor degenerates is rejected at load time
  CmdResult q = run_cli(
      "tensor --metric '{\"kind\":\"expression\",\"dim\":2,\"F\":\"(y1^4+y2^4)^0.25\"}' "
      "--x 0,0 --y 1,1",
      true);
  REQUIRE(q.code == 1);
  REQUIRE(q.out.find("metric_rejected") != std::string::npos);
}

TEST_CASE("numeric failures exit 2") {
  CmdResult r = run_cli(
      "exp --metric '{\"kind\":\"riemannian_conformal\",\"dim\":2,\"factor\":\"1\","
      "\"domain\":{\"type\":\"ball\",\"radius\":1.0}}' --x 0.9,0 --v 1,0",
      true);
  REQUIRE(r.code == 2);
  REQUIRE(r.out.find("domain_exit") != std::string::npos);
}

TEST_CASE("help is available") {
  CmdResult r = run_cli("--help");
  REQUIRE(r.code == 0);
  REQUIRE(r.out.find("splitmix64") != std::string::npos);
  REQUIRE(r.out.find("verify") != std::string::npos);
}
