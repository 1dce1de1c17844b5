// End-to-end tests of the command-line tool: documented examples, JSON
// output shape, exit-code contract, reproducibility, and transform
// round-trips through the type checker.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>
#include <probt/dist.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <vector>

using nlohmann::json;
using probt::Rat;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  std::string cmd = std::string(PROBT_BIN) + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  RunResult r;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string terms(const std::string& name) {
  return std::string(PROBT_TERMS_DIR) + "/" + name;
}

Rat Q(const std::string& s) {
  mpq_class q(s);
  q.canonicalize();
  return Rat(q);
}

}  // namespace

TEST_CASE("eval: three-outcome coin cascade, exact under a zero budget") {
  RunResult r =
      run("eval " + terms("branch.pt") + " --mode lockstep --eps 0");
  CHECK(r.code == 0);
  json j = json::parse(r.out);
  CHECK(j["residual"] == "0/1");
  REQUIRE(j["support"].size() == 3);
  std::map<int, std::string> got;
  for (const auto& e : j["support"]) got[e["nat"].get<int>()] = e["prob"];
  CHECK(got[2] == "1/2");
  CHECK(got[3] == "1/4");
  CHECK(got[4] == "1/4");
}

TEST_CASE("check: probabilistic fixpoint has type Nat") {
  RunResult r = run("check " + terms("fixgeo.pt"));
  CHECK(r.code == 0);
  json j = json::parse(r.out);
  CHECK(j["type"] == "Nat");
}

TEST_CASE("compare: geometric draw vs its fixpoint form") {
  RunResult r =
      run("compare " + terms("geo.pt") + " " + terms("geo_fix.pt") +
          " --eps 2^-16");
  CHECK(r.code == 0);
  json j = json::parse(r.out);
  CHECK(Q(j["tv_upper"].get<std::string>()) <= Rat(1, 32768));
  CHECK(Q(j["tv_lower"].get<std::string>()) >= 0);
}

TEST_CASE("exit codes: user errors are 2, resource exhaustion is 1") {
  CHECK(run("eval " + terms("no_such_term.pt")).code == 2);
  CHECK(run("eval " + terms("geo.pt") + " --eps 0").code == 2);
  CHECK(run("eval " + terms("branch.pt") + " --eps 7/3").code == 2);
  CHECK(run("eval " + terms("geo.pt") + " --mode exact-tree").code == 2);

  // Syntactically broken input file.
  {
    std::ofstream f("/tmp/probt_cli_bad.pt");
    f << "S (\n";
  }
  CHECK(run("check /tmp/probt_cli_bad.pt").code == 2);

  // Work budget blown on the exact tree.
  CHECK(run("eval " + terms("doubleflip.pt") +
            " --mode exact-tree --max-steps 3")
            .code == 1);
  // Step cap leaves residual above the requested budget.
  RunResult r = run("eval " + terms("geo_fix.pt") +
                    " --eps 2^-40 --max-steps 10");
  CHECK(r.code == 1);
  json j = json::parse(r.out);
  CHECK(Q(j["residual"].get<std::string>()) > Q("1/1099511627776"));
}

TEST_CASE("sample: fixed seeds give byte-identical output") {
  std::string args =
      "sample " + terms("doubleflip.pt") + " --seed 42 --trials 2000";
  RunResult a = run(args);
  RunResult b = run(args);
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  json j = json::parse(a.out);
  CHECK(j["trials"] == 2000);
  CHECK(j["capped"] == 0);
  for (const auto& e : j["empirical"]) {
    int k = e["nat"].get<int>();
    CHECK(k >= 0);
    CHECK(k <= 2);
  }
  // Deterministic evaluation output is reproducible too.
  std::string ev = "eval " + terms("branch.pt") + " --eps 0";
  CHECK(run(ev).out == run(ev).out);
}

TEST_CASE("avlength: geometric fixpoint averages two steps per level") {
  RunResult r = run("avlength " + terms("fixgeo.pt") + " --eps 2^-20");
  CHECK(r.code == 0);
  json j = json::parse(r.out);
  Rat av = Q(j["avlength_lower"].get<std::string>());
  CHECK(av > Rat(19, 10));
  CHECK(av < 2);
}

TEST_CASE("transform: every pass round-trips through the type checker") {
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"oplus-to-rand", "branch.pt"},    {"oplus-to-fixran", "branch.pt"},
      {"fixran-to-rand", "fixgeo.pt"},   {"rand-to-fixran", "geo.pt"},
      {"lift-plus", "branch.pt"},        {"finite-rep", "flip_fn_01.pt"},
      {"approximant", "rand_02.pt"},     {"derand-mc", "mc_01.pt"},
      {"derand-lv", "lv_01.pt"},
  };
  int i = 0;
  for (const auto& [pass, file] : cases) {
    CAPTURE(pass);
    std::string out = "/tmp/probt_cli_tr_" + std::to_string(i++) + ".pt";
    RunResult t = run("transform " + terms(file) + " --pass " + pass +
                      " --out " + out);
    REQUIRE(t.code == 0);
    json j = json::parse(t.out);
    CHECK(j["pass"] == pass);
    CHECK(!j["type"].get<std::string>().empty());
    RunResult c = run("check " + out);
    CHECK(c.code == 0);
    CHECK(json::parse(c.out)["type"] == j["type"]);
  }
  // Applying a pass to a term already in the target fragment is an error.
  CHECK(run("transform " + terms("geo.pt") + " --pass oplus-to-rand --out "
            "/tmp/probt_cli_tr_bad.pt")
            .code == 2);
}

TEST_CASE("transform then eval agrees with eval within the reported bound") {
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"oplus-to-rand", "branch.pt"},
      {"oplus-to-fixran", "branch.pt"},
      {"fixran-to-rand", "fixgeo.pt"},
      {"rand-to-fixran", "geo.pt"},
  };
  int i = 0;
  for (const auto& [pass, file] : cases) {
    CAPTURE(pass);
    std::string out = "/tmp/probt_cli_cm_" + std::to_string(i++) + ".pt";
    REQUIRE(run("transform " + terms(file) + " --pass " + pass + " --out " +
                out)
                .code == 0);
    RunResult c = run("compare " + terms(file) + " " + out + " --eps 2^-16");
    CHECK(c.code == 0);
    json j = json::parse(c.out);
    CHECK(Q(j["tv_upper"].get<std::string>()) <= Rat(1, 32768));
  }
}
