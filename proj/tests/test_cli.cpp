// End-to-end checks of the command-line driver: exit codes, determinism and
// JSON stability. The binary path arrives as argv[1].

#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <string>

namespace {

std::string g_binary;

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  std::string cmd = g_binary + " " + args + " 2>&1";
  std::array<char, 4096> buf{};
  RunResult result;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0)
    result.output.append(buf.data(), n);
  int status = pclose(pipe);
  result.exit_code = WEXITSTATUS(status);
  return result;
}

std::string program(const std::string& name) {
  return std::string(QPL_PROGRAMS_DIR) + "/" + name;
}

}  // namespace

TEST_CASE("check: well-typed programs exit 0 and print signatures") {
  RunResult r = run("check " + program("ghz-driver.qpl"));
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("GHZ : Nat -> ListQ") != std::string::npos);
  CHECK(r.output.find("GHZnext : ListQ -> ListQ") != std::string::npos);
}

TEST_CASE("check: static errors exit 1 with a diagnostic") {
  std::string bad = "/tmp/qpl_cli_bad.qpl";
  {
    std::ofstream out(bad);
    out << "new qbit q;\ny = copy q\n";
  }
  RunResult r = run("check " + bad);
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("NotClassical") != std::string::npos);

  std::string empty = "/tmp/qpl_cli_empty.qpl";
  { std::ofstream out(empty); }
  RunResult r2 = run("check " + empty);
  CHECK(r2.exit_code == 1);
  CHECK(r2.output.find("SyntaxError") != std::string::npos);
}

TEST_CASE("run: deterministic per seed") {
  RunResult a = run("run " + program("cointoss.qpl") + " --seed 7");
  RunResult b = run("run " + program("cointoss.qpl") + " --seed 7");
  CHECK(a.exit_code == 0);
  CHECK(a.output == b.output);
  CHECK(a.output.find("b = ff") != std::string::npos);

  RunResult ghz = run("run " + program("ghz-driver.qpl") + " --seed 1");
  CHECK(ghz.exit_code == 0);
  CHECK(ghz.output.find("0.5") != std::string::npos);
}

TEST_CASE("run: divergent program times out with exit 3") {
  RunResult r = run("run " + program("diverge.qpl") + " --max-steps 200");
  CHECK(r.exit_code == 3);
  CHECK(r.output.find("Timeout") != std::string::npos);
}

TEST_CASE("enumerate: requires --max-steps and reports the halt bound") {
  RunResult missing = run("enumerate " + program("cointoss.qpl"));
  CHECK(missing.exit_code != 0);

  RunResult r =
      run("enumerate " + program("cointoss.qpl") + " --max-steps 260");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("halt lower bound") != std::string::npos);

  RunResult loop =
      run("enumerate " + program("diverge.qpl") + " --max-steps 100");
  CHECK(loop.exit_code == 0);
  CHECK(loop.output.find("halt lower bound: 0") != std::string::npos);
  CHECK(loop.output.find("frontier mass:    1") != std::string::npos);
}

TEST_CASE("enumerate: JSON output is byte-stable across runs") {
  std::string args = "enumerate " + program("cointoss.qpl") +
                     " --max-steps 100 --format json";
  RunResult a = run(args);
  RunResult b = run(args);
  CHECK(a.exit_code == 0);
  CHECK(a.output == b.output);
  CHECK(a.output.find("\"halt_lower_bound\"") != std::string::npos);
}

TEST_CASE("denote: GHZ final state sits in block 3") {
  RunResult r = run("denote " + program("ghz-driver.qpl") +
                    " --depth 5 --fix-iters 8");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("block 3") != std::string::npos);
  CHECK(r.output.find("total mass: 1") != std::string::npos);
}

TEST_CASE("denote: superoperator dump") {
  RunResult r = run("denote " + program("cointoss.qpl") +
                    " --depth 4 --superop");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("superoperator") != std::string::npos);
}

TEST_CASE("verify: passes on the corpus and fails on bad gate registries") {
  RunResult r = run("verify " + program("cointoss.qpl") +
                    " --depth 4 --max-steps 300");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("soundness") != std::string::npos);

  // a corrupted (non-unitary) gate registry is rejected
  std::string gates = "/tmp/qpl_cli_gates.json";
  {
    std::ofstream out(gates);
    out << R"({"BAD": {"arity": 1, "matrix": [[[1,0],[1,0]],[[0,0],[1,0]]]}})";
  }
  RunResult bad = run("verify " + program("cointoss.qpl") + " --gates " +
                      gates);
  CHECK(bad.exit_code != 0);
  CHECK(bad.output.find("unitary") != std::string::npos);
}

TEST_CASE("custom gates are usable once registered") {
  std::string gates = "/tmp/qpl_cli_sqrtx.json";
  {
    std::ofstream out(gates);
    // sqrt(X): [[(1+i)/2, (1-i)/2], [(1-i)/2, (1+i)/2]]
    out << R"({"SX": {"arity": 1, "matrix":
      [[[0.5,0.5],[0.5,-0.5]],[[0.5,-0.5],[0.5,0.5]]]}})";
  }
  std::string prog = "/tmp/qpl_cli_sx.qpl";
  {
    std::ofstream out(prog);
    out << "new qbit q;\nq *= SX;\nq *= SX;\nb = measure q\n";
  }
  // SX twice is X, so the measurement is deterministically tt
  RunResult r = run("run " + prog + " --gates " + gates + " --seed 3");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("b = tt") != std::string::npos);
}

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: test_cli <qpl-binary>\n");
    return 1;
  }
  g_binary = argv[1];
  doctest::Context context;
  return context.run();
}
