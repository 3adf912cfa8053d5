#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vbald/linop.hpp"

namespace vbald {

/// Matrix Market ingestion failure. `kind()` distinguishes the causes so the
/// CLI can map them to messages and exit codes.
class MatrixMarketError : public Error {
 public:
  enum class Kind {
    Io,
    MalformedHeader,
    Unsupported,
    NotSymmetric,
    NotSquare,
    MalformedEntry,
    IndexOutOfRange,
  };

  MatrixMarketError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

namespace detail {

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline std::string_view trim_left(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  return s;
}

template <class T>
bool parse_token(std::string_view& s, T& out) {
  s = trim_left(s);
  if (s.empty()) return false;
  // from_chars does not accept a leading '+'.
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc()) return false;
  s.remove_prefix(static_cast<std::size_t>(ptr - s.data()));
  return true;
}

}  // namespace detail

/// Reads a `coordinate real|integer symmetric` Matrix Market stream.
inline LinearOperator read_matrix_market(std::istream& in) {
  using Kind = MatrixMarketError::Kind;
  std::string line;
  if (!std::getline(in, line)) throw MatrixMarketError(Kind::MalformedHeader, "empty file");

  std::istringstream header(line);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket" || symmetry.empty()) {
    throw MatrixMarketError(Kind::MalformedHeader, "missing or incomplete %%MatrixMarket banner");
  }
  object = detail::lowercase(object);
  format = detail::lowercase(format);
  field = detail::lowercase(field);
  symmetry = detail::lowercase(symmetry);
  if (object != "matrix") {
    throw MatrixMarketError(Kind::Unsupported, "unsupported object '" + object + "'");
  }
  if (format != "coordinate") {
    throw MatrixMarketError(Kind::Unsupported, "only coordinate format is supported, got '" +
                                                   format + "'");
  }
  if (field != "real" && field != "integer" && field != "double") {
    throw MatrixMarketError(Kind::Unsupported, "unsupported field '" + field + "'");
  }
  if (symmetry != "symmetric") {
    throw MatrixMarketError(Kind::NotSymmetric,
                            "matrix declared '" + symmetry + "', expected symmetric");
  }

  // Size line follows any number of comment lines.
  long long rows = -1, cols = -1, count = -1;
  while (std::getline(in, line)) {
    std::string_view v = detail::trim_left(line);
    if (v.empty() || v.front() == '%') continue;
    if (!detail::parse_token(v, rows) || !detail::parse_token(v, cols) ||
        !detail::parse_token(v, count) || rows < 0 || cols < 0 || count < 0) {
      throw MatrixMarketError(Kind::MalformedHeader, "malformed size line: '" + line + "'");
    }
    break;
  }
  if (rows < 0) throw MatrixMarketError(Kind::MalformedHeader, "missing size line");
  if (rows != cols) {
    throw MatrixMarketError(Kind::NotSquare, "matrix is " + std::to_string(rows) + "x" +
                                                 std::to_string(cols) + ", expected square");
  }
  if (rows == 0) throw MatrixMarketError(Kind::NotSquare, "matrix has zero dimension");

  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(count));
  while (static_cast<long long>(entries.size()) < count && std::getline(in, line)) {
    std::string_view v = detail::trim_left(line);
    if (v.empty() || v.front() == '%') continue;
    long long i = 0, j = 0;
    double x = 0.0;
    if (!detail::parse_token(v, i) || !detail::parse_token(v, j) || !detail::parse_token(v, x)) {
      throw MatrixMarketError(Kind::MalformedEntry, "malformed entry: '" + line + "'");
    }
    if (i < 1 || j < 1 || i > rows || j > cols) {
      throw MatrixMarketError(Kind::IndexOutOfRange,
                              "entry (" + std::to_string(i) + ", " + std::to_string(j) +
                                  ") outside " + std::to_string(rows) + "x" +
                                  std::to_string(cols));
    }
    entries.emplace_back(static_cast<Index>(i - 1), static_cast<Index>(j - 1), x);
  }
  if (static_cast<long long>(entries.size()) != count) {
    throw MatrixMarketError(Kind::MalformedEntry,
                            "expected " + std::to_string(count) + " entries, found " +
                                std::to_string(entries.size()));
  }
  return LinearOperator::from_lower_triplets(static_cast<Index>(rows), std::move(entries));
}

inline LinearOperator read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw MatrixMarketError(MatrixMarketError::Kind::Io, "cannot open '" + path + "'");
  }
  return read_matrix_market(in);
}

/// Writes the lower triangle as `coordinate real symmetric`. Values use 17
/// significant digits, so reading the file back reproduces them exactly.
inline void write_matrix_market(const LinearOperator& op, std::ostream& out,
                                const std::string& comment = {}) {
  if (!op.is_symmetric()) throw NumericalError("write_matrix_market: operator is not symmetric");
  std::vector<Triplet> lower;
  if (const auto* s = op.sparse_lower()) {
    lower.reserve(static_cast<std::size_t>(s->nonZeros()));
    for (Index c = 0; c < s->outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(*s, c); it; ++it) {
        lower.emplace_back(it.row(), it.col(), it.value());
      }
    }
  } else {
    const DenseMatrix& d = *op.dense();
    for (Index c = 0; c < d.cols(); ++c) {
      for (Index r = c; r < d.rows(); ++r) {
        if (d(r, c) != 0.0) lower.emplace_back(r, c, d(r, c));
      }
    }
  }
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  if (!comment.empty()) {
    std::istringstream lines(comment);
    std::string l;
    while (std::getline(lines, l)) out << "% " << l << '\n';
  }
  out << op.dim() << ' ' << op.dim() << ' ' << lower.size() << '\n';
  char buf[64];
  for (const auto& t : lower) {
    std::snprintf(buf, sizeof buf, "%.17g", t.value());
    out << (t.row() + 1) << ' ' << (t.col() + 1) << ' ' << buf << '\n';
  }
}

inline void write_matrix_market(const LinearOperator& op, const std::string& path,
                                const std::string& comment = {}) {
  std::ofstream out(path);
  if (!out) throw MatrixMarketError(MatrixMarketError::Kind::Io, "cannot write '" + path + "'");
  write_matrix_market(op, out, comment);
}

}  // namespace vbald
