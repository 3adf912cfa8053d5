#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vbald/estimators.hpp"
#include "vbald/linop.hpp"

namespace vbald {

/// One (case, method) result.
///
/// CSV columns, in order:
///   dataset, n, kappa, lengthscale, method, m, d, seed, estimate, exact,
///   rel_error, wall_ms, converged, error
/// Optional fields are written as empty cells. rel_error is present exactly
/// when both estimate and exact are; it is absolute when exact is 0. A non-empty error means the method
/// failed and estimate is empty.
struct BenchRecord {
  std::string dataset;
  Index n = 0;
  std::optional<double> kappa;
  std::optional<double> lengthscale;
  std::string method;
  int m = 0;
  int d = 0;
  std::uint64_t seed = 0;
  std::optional<double> estimate;
  std::optional<double> exact;
  std::optional<double> rel_error;
  double wall_ms = 0.0;
  bool converged = true;
  std::string error;

  friend bool operator==(const BenchRecord&, const BenchRecord&) = default;
};

inline const std::vector<std::string>& bench_columns() {
  static const std::vector<std::string> columns = {
      "dataset", "n",       "kappa",     "lengthscale", "method",    "m",    "d",
      "seed",    "estimate", "exact",    "rel_error",   "wall_ms",   "converged", "error"};
  return columns;
}

/// |estimate - exact| / |exact|, or the absolute error when exact == 0.
inline double relative_error(double estimate, double exact) {
  const double err = std::abs(estimate - exact);
  return exact == 0.0 ? err : err / std::abs(exact);
}

inline void set_exact(BenchRecord& r, double exact) {
  r.exact = exact;
  r.rel_error = r.estimate ? std::optional<double>(relative_error(*r.estimate, exact)) : std::nullopt;
}

namespace detail {

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> cells(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cells.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cells.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back();
    } else {
      cells.back() += c;
    }
  }
  if (quoted) throw std::runtime_error("bench csv: unterminated quote");
  return cells;
}

inline std::string opt_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline double parse_double_cell(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("bench csv: bad number '" + s + "'");
  }
  return v;
}

inline std::optional<double> parse_opt_cell(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_double_cell(s);
}

template <class Int>
Int parse_int_cell(const std::string& s) {
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("bench csv: bad integer '" + s + "'");
  }
  return v;
}

}  // namespace detail

inline void write_bench_header(std::ostream& out) {
  const auto& cols = bench_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
}

inline void write_bench_row(std::ostream& out, const BenchRecord& r) {
  using detail::opt_cell;
  out << detail::csv_quote(r.dataset) << ',' << r.n << ',' << opt_cell(r.kappa) << ','
      << opt_cell(r.lengthscale) << ',' << detail::csv_quote(r.method) << ',' << r.m << ',' << r.d << ','
      << r.seed << ',' << opt_cell(r.estimate) << ',' << opt_cell(r.exact) << ',' << opt_cell(r.rel_error)
      << ',' << detail::format_double(r.wall_ms) << ',' << (r.converged ? 1 : 0) << ','
      << detail::csv_quote(r.error) << '\n';
}

inline void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records) {
  write_bench_header(out);
  for (const auto& r : records) write_bench_row(out, r);
}

/// Inverse of write_bench_csv. Lines are newline separated, so fields must
/// not contain raw newlines.
inline std::vector<BenchRecord> read_bench_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("bench csv: missing header");
  if (detail::csv_split(line) != bench_columns()) throw std::runtime_error("bench csv: unexpected header");
  std::vector<BenchRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    // A quoted cell may span lines; quotes are balanced once the record ends.
    std::string more;
    while (std::count(line.begin(), line.end(), '"') % 2 == 1 && std::getline(in, more)) line += "\n" + more;
    const auto c = detail::csv_split(line);
    if (c.size() != bench_columns().size()) throw std::runtime_error("bench csv: wrong column count");
    BenchRecord r;
    r.dataset = c[0];
    r.n = detail::parse_int_cell<Index>(c[1]);
    r.kappa = detail::parse_opt_cell(c[2]);
    r.lengthscale = detail::parse_opt_cell(c[3]);
    r.method = c[4];
    r.m = detail::parse_int_cell<int>(c[5]);
    r.d = detail::parse_int_cell<int>(c[6]);
    r.seed = detail::parse_int_cell<std::uint64_t>(c[7]);
    r.estimate = detail::parse_opt_cell(c[8]);
    r.exact = detail::parse_opt_cell(c[9]);
    r.rel_error = detail::parse_opt_cell(c[10]);
    r.wall_ms = detail::parse_double_cell(c[11]);
    r.converged = detail::parse_int_cell<int>(c[12]) != 0;
    r.error = c[13];
    out.push_back(std::move(r));
  }
  return out;
}

inline nlohmann::json to_json(const BenchRecord& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"dataset", r.dataset},   {"n", r.n},
          {"kappa", opt(r.kappa)},  {"lengthscale", opt(r.lengthscale)},
          {"method", r.method},     {"m", r.m},
          {"d", r.d},               {"seed", r.seed},
          {"estimate", opt(r.estimate)}, {"exact", opt(r.exact)},
          {"rel_error", opt(r.rel_error)}, {"wall_ms", r.wall_ms},
          {"converged", r.converged}, {"error", r.error}};
}

inline nlohmann::json to_json(const LogDetEstimate& e) {
  const auto& g = e.diagnostics;
  nlohmann::json diag = {{"solver_iterations", g.solver_iterations},
                         {"gradient_norm", g.gradient_norm},
                         {"objective", g.objective},
                         {"wall_ms", g.wall_ms},
                         {"converged", g.converged},
                         {"stop_reason", g.stop_reason},
                         {"prior", g.prior},
                         {"mass_below_floor", g.mass_below_floor},
                         {"floor_warning", g.floor_warning},
                         {"probe_checksum", g.probe_checksum}};
  return {{"value", e.value}, {"method", std::string(to_string(e.method))},
          {"lambda_u", e.lambda_u}, {"m", e.m}, {"d", e.d}, {"seed", e.seed}, {"diagnostics", diag}};
}

/// A benchmark input: a name, optional lengthscale, and a factory so that
/// large matrices are only built while their case runs.
struct BenchCase {
  std::string dataset;
  std::optional<double> lengthscale;
  std::function<LinearOperator()> build;
};

struct BenchOptions {
  std::vector<Method> methods;
  EstimatorConfig config;
  Index exact_guard = 5000;  ///< exact oracle and kappa only for n <= guard
  int power_iterations = 500;
  /// Called after each row with the estimate's probe fingerprint (0 for
  /// rows with no probes).
  std::function<void(const BenchRecord&, std::uint64_t)> on_row;
};

/// Runs every case against every method, in input order. A method that
/// throws produces a row with `error` set and the run continues.
inline std::vector<BenchRecord> run_bench(const std::vector<BenchCase>& cases, const BenchOptions& opt) {
  if (opt.methods.empty()) throw std::invalid_argument("run_bench: empty methods list");
  std::vector<BenchRecord> rows;
  for (const auto& bc : cases) {
    const LinearOperator op = bc.build();
    std::optional<double> kappa;
    std::optional<double> exact;
    std::string exact_error;
    if (op.dim() <= opt.exact_guard) {
      try {
        kappa = condition_number_estimate(op, opt.power_iterations).value;
        exact = logdet_exact(op, opt.exact_guard);
      } catch (const std::exception& e) {
        exact_error = e.what();
      }
    }
    for (const Method method : opt.methods) {
      BenchRecord r;
      r.dataset = bc.dataset;
      r.n = op.dim();
      r.kappa = kappa;
      r.lengthscale = bc.lengthscale;
      r.method = std::string(to_string(method));
      r.m = method == Method::Exact ? 0 : opt.config.m;
      r.d = method == Method::Exact ? 0 : opt.config.d;
      r.seed = opt.config.seed;
      std::uint64_t fingerprint = 0;
      try {
        EstimatorConfig cfg = opt.config;
        cfg.exact_guard = opt.exact_guard;
        const LogDetEstimate est = estimate_logdet(method, op, cfg);
        r.estimate = est.value;
        r.wall_ms = est.diagnostics.wall_ms;
        r.converged = est.diagnostics.converged;
        fingerprint = est.diagnostics.probe_checksum;
      } catch (const std::exception& e) {
        r.error = e.what();
        r.converged = false;
      }
      if (exact) {
        set_exact(r, *exact);
      } else if (r.error.empty() && !exact_error.empty()) {
        r.error = "exact oracle: " + exact_error;
      }
      if (opt.on_row) opt.on_row(r, fingerprint);
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

}  // namespace vbald
