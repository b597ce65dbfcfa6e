#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "rieszlat/cli.hpp"

using nlohmann::json;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = rieszlat::cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::filesystem::path temp_file(const std::string& stem, const std::string& body) {
  const auto p = std::filesystem::temp_directory_path() / (stem + "_" + std::to_string(::getpid()));
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST_CASE("lattice info for E8") {
  const Outcome o = run({"lattice", "--name", "E8", "--info"});
  REQUIRE(o.code == 0);
  const json j = json::parse(o.out);
  CHECK(j["schema"] == 1);
  CHECK(j["command"] == "lattice");
  CHECK(std::fabs(j["result"]["covolume"].get<double>() - 1.0) <= 1e-12);
  CHECK(j["result"]["minimal_norm"].get<double>() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(j["result"]["kissing_number"] == 240);
  CHECK(j["config"]["name"] == "E8");
}

TEST_CASE("Madelung of A2 is below Z2") {
  const Outcome a = run({"madelung", "--name", "A2", "--d", "2", "--s", "1"});
  const Outcome z = run({"madelung", "--name", "Z2", "--d", "2", "--s", "1"});
  REQUIRE(a.code == 0);
  REQUIRE(z.code == 0);
  const json ja = json::parse(a.out), jz = json::parse(z.out);
  CHECK(ja["result"]["value"].get<double>() < jz["result"]["value"].get<double>());
  CHECK(ja["result"]["error"].get<double>() <= 1e-6);
}

TEST_CASE("usage errors exit with 2") {
  const Outcome bogus = run({"lattice", "--name", "E8", "--bogus"});
  CHECK(bogus.code == 2);
  CHECK(bogus.err.find("Usage") != std::string::npos);
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"lattice", "--name", "Q7"}).code == 2);
  CHECK(run({"lattice", "--file", "/nonexistent/lattice.txt"}).code == 2);
  CHECK(run({"energy", "--name", "A2", "--format", "csv"}).code == 2);
  CHECK(run({"jellium", "--d", "2", "--s", "1", "--R", "1"}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("budget errors exit with 4") {
  const Outcome o = run({"theta", "--name", "Z24", "--max-norm", "12", "--method", "enumerated", "--budget", "1000"});
  CHECK(o.code == 4);
}

TEST_CASE("csv sweeps carry the resolved config") {
  const Outcome o = run({"probe-ck", "--name", "A2", "--n", "2", "--trials", "10", "--format", "csv"});
  REQUIRE(o.code == 0);
  CHECK(o.out.rfind("# schema=1\n", 0) == 0);
  CHECK(o.out.find("# trials=10") != std::string::npos);
  CHECK(o.out.find("t,baseline,trials,violations,min_gap") != std::string::npos);
}

TEST_CASE("output does not depend on the thread count") {
  const std::vector<std::string> base = {"probe-ck", "--name", "A2", "--n", "2", "--trials", "40", "--seed", "3"};
  std::vector<std::string> one = base, three = base;
  one.insert(one.end(), {"--threads", "1"});
  three.insert(three.end(), {"--threads", "3"});
  const Outcome a = run(one), b = run(three);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);

  const Outcome c = run({"energy", "--name", "A2", "--n", "2", "--init", "random", "--threads", "1"});
  const Outcome d = run({"energy", "--name", "A2", "--n", "2", "--init", "random", "--threads", "4"});
  REQUIRE(c.code == 0);
  CHECK(c.out == d.out);
}

TEST_CASE("config file supplies defaults and the command line wins") {
  const auto cfg = temp_file("rieszlat_cfg", "# defaults\nname = Z2\ns = 1\nd = 2\n");
  const Outcome a = run({"madelung", "--config", cfg.string()});
  REQUIRE(a.code == 0);
  const json ja = json::parse(a.out);
  CHECK(ja["config"]["name"] == "Z2");
  CHECK(ja["config"]["s"].get<double>() == 1.0);
  const Outcome b = run({"madelung", "--config", cfg.string(), "--name", "A2"});
  REQUIRE(b.code == 0);
  CHECK(json::parse(b.out)["config"]["name"] == "A2");
  std::filesystem::remove(cfg);

  CHECK(run({"madelung", "--config", "/nonexistent/cfg"}).code == 2);
}

TEST_CASE("probe-ck reports the counterexample field in d = 2") {
  const Outcome o = run({"probe-ck", "--name", "A2", "--n", "2", "--trials", "20"});
  REQUIRE(o.code == 0);
  const json j = json::parse(o.out);
  REQUIRE(j["result"].contains("conjecture-counterexample-candidate"));
  CHECK(j["result"]["conjecture-counterexample-candidate"] == false);
}

TEST_CASE("other commands produce reports") {
  CHECK(run({"theta", "--name", "E8", "--max-norm", "6", "--method", "both"}).code == 0);
  CHECK(run({"zeta", "--name", "Z2", "--s", "4"}).code == 0);
  const Outcome g = run({"green", "--name", "A2", "--s", "1", "--x", "0.3,0.2", "--route", "all"});
  REQUIRE(g.code == 0);
  CHECK(json::parse(g.out)["result"].is_object());
  CHECK(run({"kernel-check", "--d", "3", "--s", "1"}).code == 0);
  const Outcome j = run({"jellium", "--d", "2", "--R", "1", "--restarts", "2"});
  REQUIRE(j.code == 0);
  CHECK(run({"optimize", "--name", "A2", "--n", "2", "--restarts", "2", "--s", "1"}).code == 0);
}

TEST_CASE("coincident points exit with 3") {
  const auto pts = temp_file("rieszlat_pts", "0.1 0.1\n0.1 0.1\n");
  const Outcome o = run({"energy", "--name", "Z2", "--s", "1", "--points", pts.string()});
  CHECK(o.code == 3);
  std::filesystem::remove(pts);
}
