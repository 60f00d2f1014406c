// Text matrix format. "coo <rows> <cols> <nnz>" followed by nnz lines
// "i j value", or "dense <rows> <cols>" followed by row-major values.
// Min-plus values accept "inf".
#pragma once

#include <gmpxx.h>

#include <charconv>
#include <iomanip>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrmx/matrix.hpp"
#include "mrmx/semiring.hpp"

namespace mrmx {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class S>
struct ScalarCodec;

template <>
struct ScalarCodec<NatSemiring> {
  static std::int64_t parse(const std::string& s) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || v < 0) throw FormatError("bad natural number '" + s + "'");
    return v;
  }
  static std::string format(std::int64_t v) { return std::to_string(v); }
};

template <>
struct ScalarCodec<MinPlusSemiring> {
  static std::int64_t parse(const std::string& s) {
    if (s == "inf") return MinPlusSemiring::inf;
    return ScalarCodec<NatSemiring>::parse(s);
  }
  static std::string format(std::int64_t v) { return v == MinPlusSemiring::inf ? "inf" : std::to_string(v); }
};

template <>
struct ScalarCodec<FieldSemiring<mpq_class>> {
  static mpq_class parse(const std::string& s) {
    mpq_class q;
    if (q.set_str(s, 10) != 0) throw FormatError("bad rational '" + s + "'");
    q.canonicalize();
    return q;
  }
  static std::string format(const mpq_class& v) { return v.get_str(); }
};

template <>
struct ScalarCodec<FieldSemiring<double>> {
  static double parse(const std::string& s) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw FormatError("bad float '" + s + "'");
    return v;
  }
  static std::string format(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
  }
};

template <class S>
CooMatrix<S> read_matrix(std::istream& is) {
  using V = typename S::value_type;
  std::string kind;
  std::int64_t r = -1, c = -1;
  if (!(is >> kind >> r >> c) || r < 0 || c < 0) throw FormatError("bad matrix header");
  std::vector<Entry<V>> e;
  std::string tok;
  if (kind == "coo") {
    std::int64_t nnz = -1;
    if (!(is >> nnz) || nnz < 0) throw FormatError("bad nonzero count");
    for (std::int64_t k = 0; k < nnz; ++k) {
      std::int64_t i = 0, j = 0;
      if (!(is >> i >> j >> tok)) throw FormatError("truncated entry list");
      e.push_back({i, j, ScalarCodec<S>::parse(tok)});
    }
  } else if (kind == "dense") {
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t j = 0; j < c; ++j) {
        if (!(is >> tok)) throw FormatError("truncated dense body");
        e.push_back({i, j, ScalarCodec<S>::parse(tok)});
      }
  } else {
    throw FormatError("unknown matrix kind '" + kind + "'");
  }
  try {
    return CooMatrix<S>(r, c, std::move(e));
  } catch (const std::exception& ex) {
    throw FormatError(ex.what());
  }
}

template <class S>
void write_matrix(std::ostream& os, const CooMatrix<S>& A) {
  os << "coo " << A.rows() << ' ' << A.cols() << ' ' << A.nnz() << '\n';
  for (const auto& x : A.entries()) os << x.i << ' ' << x.j << ' ' << ScalarCodec<S>::format(x.x) << '\n';
}

}  // namespace mrmx
