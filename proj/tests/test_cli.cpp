#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mrmx/graph.hpp"
#include "mrmx/io.hpp"
#include "mrmx/linalg.hpp"
#include "mrmx/oracles.hpp"
#include "mrmx/report.hpp"

#ifndef MRMX_CLI
#error "MRMX_CLI must name the command line binary"
#endif

using namespace mrmx;
namespace fs = std::filesystem;

namespace {

struct Dir {
  fs::path p = fs::temp_directory_path() / ("mrmx_cli_" + std::to_string(::getpid()));
  Dir() { fs::create_directories(p); }
  ~Dir() { fs::remove_all(p); }
  std::string operator/(const std::string& f) const { return (p / f).string(); }
};

const Dir& dir() {
  static Dir d;
  return d;
}

void put(const std::string& name, const std::string& body) { std::ofstream(dir() / name) << body; }

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string o = dir() / "stdout", e = dir() / "stderr";
  const std::string cmd = env + " " + MRMX_CLI + " " + args + " >" + o + " 2>" + e;
  const int st = std::system(cmd.c_str());
  return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, slurp(o), slurp(e)};
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  bool seen = false;
  while (std::getline(in, line)) {
    if (line == kCsvHeader) {
      seen = true;
      continue;
    }
    if (!seen) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

// column indices in the header
constexpr int kAlgo = 0, kNnzC = 4, kRounds = 8;

void fixtures() {
  static bool done = false;
  if (done) return;
  done = true;
  std::string id = "coo 8 8 8\n";
  for (int i = 0; i < 8; ++i) id += std::to_string(i) + " " + std::to_string(i) + " 1\n";
  put("I8.coo", id);
  put("R.coo", "dense 8 8\n"
               "1 0 3 0 0 0 2 0\n0 0 0 4 0 0 0 0\n5 0 0 0 0 1 0 0\n0 0 0 0 0 0 0 7\n"
               "0 2 0 0 9 0 0 0\n0 0 0 0 0 0 3 0\n0 0 8 0 0 0 0 1\n6 0 0 0 2 0 0 0\n");
  put("two.coo", "coo 8 8 2\n0 1 3\n5 2 4\n");
  put("c4.g", "4 4\n0 1\n1 2\n2 3\n0 3\n");
  put("L.coo", "dense 2 2\n2 0\n4 4\n");
  put("mp.coo", "dense 2 2\n0 inf\n3 0\n");
}

}  // namespace

TEST_CASE("multiply: identity times R gives R") {
  fixtures();
  auto r = run("multiply --algo dense --a " + dir() / "I8.coo" + " --b " + dir() / "R.coo" +
               " --m 16 --M 256 --out " + dir() / "C.coo");
  REQUIRE(r.code == 0);
  std::ifstream c(dir() / "C.coo"), rr(dir() / "R.coo");
  CHECK(read_matrix<NatSemiring>(c) == read_matrix<NatSemiring>(rr));
  const auto rows = csv_rows(r.out);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].size() == 13);
  CHECK(rows[0][kAlgo] == "dense");
}

TEST_CASE("multiply: every algorithm agrees and --out round-trips") {
  fixtures();
  std::ifstream ra(dir() / "R.coo");
  const auto R = read_matrix<NatSemiring>(ra);
  const auto want = naive_multiply(R, R);
  for (const std::string algo : {"dense", "d1", "d2", "r1", "auto", "sd"}) {
    auto r = run("multiply --algo " + algo + " --a " + dir() / "R.coo" + " --b " + dir() / "R.coo" +
                 " --m 4 --M 1024 --seed 3 --out " + dir() / "P.coo");
    REQUIRE(r.code == 0);
    std::ifstream p(dir() / "P.coo");
    CHECK(read_matrix<NatSemiring>(p) == want);
  }
}

TEST_CASE("multiply: auto on a 2-nonzero matrix reports d1") {
  fixtures();
  auto r = run("multiply --algo auto --a " + dir() / "two.coo" + " --b " + dir() / "two.coo" + " --m 4 --M 256");
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(r.out);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0][kAlgo] == "d1");
}

TEST_CASE("multiply: min-plus accepts inf") {
  fixtures();
  auto r = run("multiply --semiring minplus --algo dense --a " + dir() / "mp.coo" + " --b " + dir() / "mp.coo" +
               " --m 4 --M 64 --out " + dir() / "MP.coo");
  REQUIRE(r.code == 0);
  std::ifstream p(dir() / "MP.coo");
  const auto C = read_matrix<MinPlusSemiring>(p);
  CHECK(C.at(0, 0) == 0);
  CHECK(C.at(0, 1) == MinPlusSemiring::inf);
  CHECK(C.at(1, 0) == 3);
}

TEST_CASE("exit codes") {
  fixtures();
  auto missing = run("multiply --a " + dir() / "nope.coo" + " --b " + dir() / "R.coo" + " --m 4 --M 64");
  CHECK(missing.code == 2);
  CHECK_FALSE(missing.err.empty());
  CHECK(run("multiply --algo bogus --a x --b y --m 1 --M 2").code == 2);
  CHECK(run("multiply --a x --b y").code == 2);
  CHECK(run("").code == 2);
  put("bad.coo", "coo 2 2 1\n0 5 1\n");
  CHECK(run("multiply --a " + dir() / "bad.coo" + " --b " + dir() / "bad.coo" + " --m 1 --M 8").code == 2);
  // M below the input size: strict mode stops with a budget error
  CHECK(run("multiply --algo dense --strict --a " + dir() / "R.coo" + " --b " + dir() / "R.coo" + " --m 4 --M 8").code ==
        3);
  put("sing.coo", "dense 2 2\n1 1\n1 1\n");
  CHECK(run("invert --method charpoly --a " + dir() / "sing.coo").code == 3);
  put("tri.g", "3 3\n0 1\n1 2\n0 2\n");
  CHECK(run("match --graph " + dir() / "tri.g").code == 2);
  put("star.g", "4 3\n0 1\n0 2\n0 3\n");
  CHECK(run("match --graph " + dir() / "star.g" + " --retries 5").code == 3);
}

TEST_CASE("bench: r1 over 10 seeds gives 10 rows with equal nnz_c") {
  auto r = run("bench --algo r1 --grid 64:4:4096 --seeds 10 --density 0.2");
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(r.out);
  REQUIRE(rows.size() == 10);
  for (const auto& row : rows) CHECK(row[kNnzC] == rows[0][kNnzC]);
}

TEST_CASE("bench: dense rounds do not increase with M") {
  auto r = run("bench --algo dense --density 1 --grid 256:4:256,256:4:512,256:4:1024");
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(r.out);
  REQUIRE(rows.size() == 3);
  CHECK(std::stoi(rows[1][kRounds]) <= std::stoi(rows[0][kRounds]));
  CHECK(std::stoi(rows[2][kRounds]) <= std::stoi(rows[1][kRounds]));
}

TEST_CASE("bench: empty grid prints only the header; bad grid exits 2") {
  auto r = run("bench --grid ''");
  CHECK(r.code == 0);
  CHECK(r.out == std::string(kCsvHeader) + "\n");
  CHECK(run("bench --grid 7:1:2").code == 2);
  CHECK(run("bench --grid 16:8:4").code == 2);
  CHECK(run("bench --grid abc").code == 2);
}

TEST_CASE("bench: --csv appends with a single header") {
  const std::string csv = dir() / "append.csv";
  fs::remove(csv);
  CHECK(run("bench --algo d1 --grid 16:2:64 --csv " + csv).code == 0);
  CHECK(run("bench --algo d1 --grid 16:2:64 --seeds 2 --csv " + csv).code == 0);
  const auto text = slurp(csv);
  CHECK(text.find(kCsvHeader) == 0);
  CHECK(text.find(kCsvHeader, 1) == std::string::npos);
  CHECK(csv_rows(text).size() == 3);
}

TEST_CASE("invert: identity by every method") {
  fixtures();
  for (const std::string method : {"triangular", "charpoly"}) {
    auto r = run("invert --method " + method + " --a " + dir() / "I8.coo" + " --out " + dir() / "inv.coo");
    REQUIRE(r.code == 0);
    std::ifstream f(dir() / "inv.coo");
    CHECK(read_matrix<FieldSemiring<Rational>>(f) == FieldMatrix<Rational>::identity(8));
  }
  auto r = run("invert --method newton --a " + dir() / "I8.coo" + " --out " + dir() / "inv.coo");
  REQUIRE(r.code == 0);
  std::ifstream f(dir() / "inv.coo");
  const auto N = read_matrix<FieldSemiring<double>>(f);
  for (std::int64_t i = 0; i < 8; ++i) CHECK(N.at(i, i) == doctest::Approx(1.0));
}

TEST_CASE("invert: triangular hand example") {
  fixtures();
  auto r = run("invert --method triangular --a " + dir() / "L.coo" + " --out " + dir() / "Linv.coo");
  REQUIRE(r.code == 0);
  CHECK(slurp(dir() / "Linv.coo") == "coo 2 2 3\n0 0 1/2\n1 0 -1/2\n1 1 1/4\n");
}

TEST_CASE("match: 4-cycle with retries prints a valid perfect matching") {
  fixtures();
  auto r = run("match --graph " + dir() / "c4.g" + " --retries 20 --out " + dir() / "m.txt");
  REQUIRE(r.code == 0);
  std::ifstream f(dir() / "m.txt");
  Matching m;
  std::int64_t u = 0, v = 0;
  while (f >> u >> v) m.push_back({u, v});
  std::ifstream g(dir() / "c4.g");
  const auto all = exhaustive_perfect_matchings(read_graph(g));
  CHECK(std::find(all.begin(), all.end(), m) != all.end());
}

TEST_CASE("estimate: identity pair is exact") {
  fixtures();
  auto r = run("estimate --eps 0.5 --strict --a " + dir() / "I8.coo" + " --b " + dir() / "I8.coo");
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("estimate 8\n", 0) == 0);
}

TEST_CASE("MRMX_AUDIT_LOG receives one line per round") {
  fixtures();
  const std::string log = dir() / "audit.log";
  fs::remove(log);
  auto r = run("multiply --algo d1 --a " + dir() / "R.coo" + " --b " + dir() / "R.coo" + " --m 4 --M 512",
               "MRMX_AUDIT_LOG=" + log);
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(r.out);
  REQUIRE(rows.size() == 1);
  const auto text = slurp(log);
  std::size_t lines = 0;
  for (std::size_t p = text.find("round="); p != std::string::npos; p = text.find("round=", p + 1)) ++lines;
  CHECK(std::to_string(lines) == rows[0][kRounds]);
}
