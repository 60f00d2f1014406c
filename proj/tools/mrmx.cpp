// mrmx: run the MapReduce matrix algorithms on files and report rounds and
// memory as CSV.
//
// Exit codes: 0 ok, 2 bad flags or input, 3 budget or algorithm failure.
#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "mrmx/generate.hpp"
#include "mrmx/io.hpp"
#include "mrmx/linalg.hpp"
#include "mrmx/matching.hpp"
#include "mrmx/matmul_sparse.hpp"
#include "mrmx/report.hpp"

using namespace mrmx;

namespace {

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::size_t m = 0, M = 0;
  std::uint64_t seed = 0;
  bool strict = false;
  std::string out, csv;
  Mode mode() const { return strict ? Mode::Strict : Mode::Audit; }
};

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open '" + path + "'");
  return f;
}

template <class S>
CooMatrix<S> load(const std::string& path) {
  auto f = open_in(path);
  return read_matrix<S>(f);
}

/// Writes to --out when given, else stdout.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw InputError("cannot write '" + path + "'");
    }
  }
  std::ostream& os() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

/// Report rows append to --csv (header when the file is new or empty), or
/// go to stdout with a header.
void report(const Common& c, const std::vector<ReportRow>& rows) {
  if (c.csv.empty()) {
    std::cout << kCsvHeader << '\n';
    for (const auto& r : rows) write_row(std::cout, r);
    return;
  }
  bool fresh = true;
  {
    std::ifstream probe(c.csv);
    fresh = !probe || probe.peek() == std::ifstream::traits_type::eof();
  }
  std::ofstream f(c.csv, std::ios::app);
  if (!f) throw InputError("cannot write '" + c.csv + "'");
  if (fresh) f << kCsvHeader << '\n';
  for (const auto& r : rows) write_row(f, r);
}

void audit(const std::string& what, const RoundStats& st) {
  if (!st.clean()) std::cerr << "warning: " << what << " ran with budget violations (audit mode)\n";
  const char* path = std::getenv("MRMX_AUDIT_LOG");
  if (path == nullptr || *path == '\0') return;
  std::ofstream f(path, std::ios::app);
  if (!f) throw InputError(std::string("cannot write audit log '") + path + "'");
  f << "# " << what << '\n';
  st.write_audit_log(f);
}

MemoryBudget budget_or(const Common& c, std::size_t m_def, std::size_t M_def) {
  return MemoryBudget(c.m ? c.m : m_def, c.M ? c.M : M_def);
}

// ---- multiply / bench ----------------------------------------------------

template <class S>
MatmulResult<S> run_multiply(const std::string& algo, const CooMatrix<S>& A, const CooMatrix<S>& B,
                             const MemoryBudget& b, std::uint64_t seed, Mode mode, bool allow_random) {
  if (algo == "dense") return dd_multiply(A, B, b, seed, mode);
  if (algo == "d1") return d1_multiply(A, B, b, seed, mode);
  if (algo == "d2") return d2_multiply(A, B, b, seed, mode);
  if (algo == "r1") return r1_multiply(A, B, b, seed, mode);
  if (algo == "auto") return sparse_multiply_auto(A, B, b, seed, allow_random, mode);
  return sd_multiply(A, B, b, seed, mode);
}

template <class S>
double multiply_bound(const std::string& ran, const CooMatrix<S>& A, const CooMatrix<S>& B, std::size_t nnz_c,
                      const MemoryBudget& b) {
  const auto dim = A.rows();
  const auto nt = static_cast<std::int64_t>(std::max(A.nnz(), B.nnz()));
  if (ran == "d1") return bounds::d1(nt, dim, b);
  if (ran == "d2" || ran == "r1") return bounds::d2(nt, static_cast<std::int64_t>(nnz_c), dim, b);
  return bounds::dense(dim, b);
}

template <class S>
ReportRow multiply_row(const std::string& algo, const CooMatrix<S>& A, const CooMatrix<S>& B, const MemoryBudget& b,
                       std::uint64_t seed, Mode mode, bool allow_random, CooMatrix<S>* C_out) {
  auto res = run_multiply(algo, A, B, b, seed, mode, allow_random);
  const std::string ran = res.algo.empty() ? algo : res.algo;
  audit("multiply " + ran, res.stats);
  auto row = make_row(ran, A.rows(), A.nnz(), B.nnz(), res.C.nnz(), b, seed, res.stats,
                      multiply_bound(ran, A, B, res.C.nnz(), b));
  if (C_out) *C_out = std::move(res.C);
  return row;
}

template <class S>
int cmd_multiply(const Common& c, const std::string& algo, const std::string& a, const std::string& bpath,
                 bool allow_random) {
  const auto A = load<S>(a);
  const auto B = load<S>(bpath);
  CooMatrix<S> C;
  const auto row = multiply_row(algo, A, B, MemoryBudget(c.m, c.M), c.seed, c.mode(), allow_random, &C);
  Sink sink(c.out);
  write_matrix(sink.os(), C);
  report(c, {row});
  return 0;
}

struct GridCell {
  std::int64_t dim;
  std::size_t m, M;
};

/// "n:m:M,n:m:M,..." with n a perfect square.
std::vector<GridCell> parse_grid(const std::string& spec) {
  std::vector<GridCell> out;
  std::stringstream ss(spec);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    long long n = 0, m = 0, M = 0;
    char c1 = 0, c2 = 0;
    std::istringstream cs(cell);
    if (!(cs >> n >> c1 >> m >> c2 >> M) || c1 != ':' || c2 != ':' || n < 1 || m < 1 || M < m || !(cs >> std::ws).eof())
      throw InputError("bad grid cell '" + cell + "' (want n:m:M with 1 <= m <= M)");
    std::int64_t d = 0;
    while ((d + 1) * (d + 1) <= n) ++d;
    if (d * d != n) throw InputError("grid n=" + std::to_string(n) + " is not a perfect square");
    out.push_back({d, static_cast<std::size_t>(m), static_cast<std::size_t>(M)});
  }
  return out;
}

template <class S>
int cmd_bench(const Common& c, const std::string& algo, const std::string& grid, int seeds, double density,
              std::uint64_t input_seed, bool allow_random) {
  const auto cells = parse_grid(grid);
  std::vector<ReportRow> rows;
  for (const auto& g : cells) {
    const auto A = random_matrix<S>(g.dim, density, input_seed);
    const auto B = random_matrix<S>(g.dim, density, input_seed + 1);
    for (int s = 0; s < seeds; ++s)
      rows.push_back(multiply_row(algo, A, B, MemoryBudget(g.m, g.M), c.seed + static_cast<std::uint64_t>(s), c.mode(),
                                  allow_random, static_cast<CooMatrix<S>*>(nullptr)));
  }
  report(c, rows);
  return 0;
}

template <class S>
int cmd_estimate(const Common& c, const std::string& a, const std::string& bpath, double eps, double delta) {
  const auto A = load<S>(a);
  const auto B = load<S>(bpath);
  check_square_pair(A, B);
  const auto n = static_cast<std::size_t>(std::max<std::int64_t>(1, A.rows() * A.rows()));
  const auto nt = std::max<std::size_t>({std::size_t{1}, A.nnz(), B.nnz()});
  const std::size_t m_def = std::max<std::size_t>(n / 4, sketch_min_local(sketch_params(eps, delta)));
  const MemoryBudget b = budget_or(c, m_def, std::max(m_def, 8 * nt + 8 * n));
  EstimateOptions opt;
  opt.eps = eps;
  opt.delta = delta;
  auto est = estimate_output_nnz(A, B, opt, b, c.seed, c.mode());
  audit("estimate", est.stats);
  Sink sink(c.out);
  sink.os() << "estimate " << est.estimate << '\n';
  report(c, {make_row("estimate", A.rows(), A.nnz(), B.nnz(), static_cast<std::size_t>(std::llround(est.estimate)), b,
                      c.seed, est.stats, bounds::estimate(static_cast<std::int64_t>(nt), A.rows(), b))});
  return 0;
}

// ---- invert / match -------------------------------------------------------

int cmd_invert(const Common& c, const std::string& method, const std::string& a, double tol, int max_iter) {
  if (method == "newton") {
    using S = FieldSemiring<double>;
    const auto A = load<S>(a);
    const auto n = static_cast<std::size_t>(std::max<std::int64_t>(1, A.rows() * A.rows()));
    const MemoryBudget b = budget_or(c, std::min<std::size_t>(16, n), 8 * n);
    auto r = newton_inverse(A, LinalgConfig{b, c.seed, c.mode()}, tol, max_iter);
    audit("invert newton", r.stats);
    Sink sink(c.out);
    write_matrix(sink.os(), r.B);
    report(c, {make_row("newton", A.rows(), A.nnz(), 0, r.B.nnz(), b, c.seed, r.stats, bounds::newton(A.rows(), b))});
    return 0;
  }
  using S = FieldSemiring<Rational>;
  const auto A = load<S>(a);
  const auto d = static_cast<std::size_t>(std::max<std::int64_t>(1, A.rows()));
  const std::size_t n = d * d;
  const bool tri = method == "triangular";
  const MemoryBudget b = budget_or(c, std::min<std::size_t>(16, n), tri ? 8 * n : 8 * n * d);
  const LinalgConfig cfg{b, c.seed, c.mode()};
  auto r = tri ? invert_lower_triangular(A, cfg) : invert_general(A, cfg);
  audit("invert " + method, r.stats);
  Sink sink(c.out);
  write_matrix(sink.os(), r.inv);
  report(c, {make_row(method, A.rows(), A.nnz(), 0, r.inv.nnz(), b, c.seed, r.stats,
                      tri ? bounds::triangular(A.rows(), b) : bounds::charpoly(A.rows(), b))});
  return 0;
}

int cmd_match(const Common& c, const std::string& path, int retries) {
  auto f = open_in(path);
  const Graph g = read_graph(f);
  const MemoryBudget def = matching_budget(g.d);
  const MemoryBudget b = budget_or(c, def.m, def.M);
  RoundStats all;
  for (int t = 0; t < std::max(1, retries); ++t) {
    const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(t);
    auto r = mvv_trial(g, b, seed, c.mode());
    all.append(r.stats);
    if (!r.success) continue;
    audit("match", all);
    Sink sink(c.out);
    for (const auto& [u, v] : r.edges) sink.os() << u << ' ' << v << '\n';
    report(c, {make_row("match", g.d, 2 * g.k(), 0, r.edges.size(), b, seed, all, bounds::charpoly(g.d, b))});
    return 0;
  }
  audit("match", all);
  throw NoPerfectMatchingFound("no perfect matching found after " + std::to_string(std::max(1, retries)) + " trials");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MapReduce matrix algorithms under local/aggregate memory budgets"};
  app.require_subcommand(1);

  Common c;
  std::string algo = "auto", a, bfile, semiring = "nat", grid, method = "charpoly", graph;
  bool allow_random = false;
  int seeds = 1, retries = 1, max_iter = 0;
  double density = 0.25, eps = 0.5, delta = 0.125, tol = 1e-10;
  std::uint64_t input_seed = 1;

  const std::vector<std::string> algos = {"dense", "d1", "d2", "r1", "auto", "sd"};
  auto common = [&](CLI::App* s, bool need_budget) {
    auto* m = s->add_option("--m", c.m, "local memory in words");
    auto* M = s->add_option("--M", c.M, "aggregate memory in words");
    if (need_budget) {
      m->required();
      M->required();
    }
    s->add_option("--seed", c.seed, "base seed");
    s->add_flag("--strict", c.strict, "abort on the first budget violation");
    s->add_option("--out", c.out, "result file (default stdout)");
    s->add_option("--csv", c.csv, "append report rows here (default stdout)");
  };

  auto* mul = app.add_subcommand("multiply", "multiply two matrix files");
  mul->add_option("--algo", algo)->check(CLI::IsMember(algos));
  mul->add_option("--a", a)->required();
  mul->add_option("--b", bfile)->required();
  mul->add_option("--semiring", semiring)->check(CLI::IsMember({"nat", "minplus"}));
  mul->add_flag("--allow-random", allow_random, "let auto pick the randomized schedule");
  common(mul, true);

  auto* bench = app.add_subcommand("bench", "sweep random inputs over an n:m:M grid");
  bench->add_option("--grid", grid, "comma separated n:m:M cells")->required();
  bench->add_option("--algo", algo)->check(CLI::IsMember(algos));
  bench->add_option("--seeds", seeds)->check(CLI::PositiveNumber);
  bench->add_option("--density", density)->check(CLI::Range(0.0, 1.0));
  bench->add_option("--input-seed", input_seed);
  bench->add_option("--semiring", semiring)->check(CLI::IsMember({"nat", "minplus"}));
  bench->add_flag("--allow-random", allow_random);
  common(bench, false);

  auto* inv = app.add_subcommand("invert", "invert a square matrix");
  inv->add_option("--method", method)->check(CLI::IsMember({"triangular", "charpoly", "newton"}));
  inv->add_option("--a", a)->required();
  inv->add_option("--tol", tol);
  inv->add_option("--max-iter", max_iter);
  common(inv, false);

  auto* match = app.add_subcommand("match", "randomized perfect matching");
  match->add_option("--graph", graph)->required();
  match->add_option("--retries", retries)->check(CLI::PositiveNumber);
  common(match, false);

  auto* est = app.add_subcommand("estimate", "estimate nnz of a product");
  est->add_option("--a", a)->required();
  est->add_option("--b", bfile)->required();
  est->add_option("--eps", eps)->check(CLI::Range(0.0, 1.0));
  est->add_option("--delta", delta)->check(CLI::Range(0.0, 1.0));
  est->add_option("--semiring", semiring)->check(CLI::IsMember({"nat", "minplus"}));
  common(est, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const bool nat = semiring == "nat";
  try {
    if (*mul) return nat ? cmd_multiply<NatSemiring>(c, algo, a, bfile, allow_random)
                         : cmd_multiply<MinPlusSemiring>(c, algo, a, bfile, allow_random);
    if (*bench) return nat ? cmd_bench<NatSemiring>(c, algo, grid, seeds, density, input_seed, allow_random)
                           : cmd_bench<MinPlusSemiring>(c, algo, grid, seeds, density, input_seed, allow_random);
    if (*inv) return cmd_invert(c, method, a, tol, max_iter);
    if (*match) return cmd_match(c, graph, retries);
    if (*est) return nat ? cmd_estimate<NatSemiring>(c, a, bfile, eps, delta)
                         : cmd_estimate<MinPlusSemiring>(c, a, bfile, eps, delta);
  } catch (const BudgetError& e) {
    std::cerr << "budget violation: " << e.what() << '\n';
    return 3;
  } catch (const SingularMatrix& e) {
    std::cerr << "singular matrix: " << e.what() << '\n';
    return 3;
  } catch (const NoConvergence& e) {
    std::cerr << "no convergence: " << e.what() << '\n';
    return 3;
  } catch (const NoPerfectMatchingFound& e) {
    std::cerr << "matching failed: " << e.what() << '\n';
    return 3;
  } catch (const SingularWeighting& e) {
    std::cerr << "matching failed: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
