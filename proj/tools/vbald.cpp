// vbald: log-determinant estimation from the command line.
//
//   vbald logdet  (--mtx PATH | --se-kernel SPEC | --identity N | --diag LIST) [options]
//   vbald moments (input) [--basis B] [-m M] [-d D] [--seed S] [--csv PATH]
//   vbald bench   (--lengthscales R | --mtx PATH... | --identity N) --methods LIST [--csv PATH]
//
// Exit codes: 0 ok, 2 usage, 3 input parse, 4 numerical failure,
// 5 non-convergence (estimate still printed).

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cli_support.hpp"

namespace {

using namespace vbald;
using cli::ExitCode;
using cli::UsageError;

struct InputOptions {
  std::vector<std::string> mtx;
  std::string se_kernel;
  Index identity = 0;
  std::string diag;
};

struct EstimatorOptions {
  std::string method = "vbald";
  int m = 30;
  int d = 50;
  std::string basis = "chebyshev";
  std::string prior = "auto";
  double gtol = 1e-6;
  double jitter = 1e-8;
  std::uint64_t seed = 0;
  int max_iterations = 500;
  double chebyshev_floor = 1e-6;
  bool extended = false;
};

void add_input_options(CLI::App& app, InputOptions& in, bool many_files) {
  auto* mtx = app.add_option("--mtx", in.mtx, "Matrix Market file (coordinate real symmetric)");
  if (!many_files) mtx->expected(1);
  app.add_option("--se-kernel", in.se_kernel,
                 "Squared-exponential kernel, KEY=VAL list: n, dim, l, noise, seed, scale");
  app.add_option("--identity", in.identity, "Identity matrix of size N")->check(CLI::PositiveNumber);
  app.add_option("--diag", in.diag, "Diagonal matrix, comma-separated entries");
}

void add_estimator_options(CLI::App& app, EstimatorOptions& o, bool with_method) {
  if (with_method) {
    app.add_option("--method", o.method, "vbald | taylor | chebyshev | lanczos | exact")
        ->check(CLI::IsMember({"vbald", "taylor", "chebyshev", "lanczos", "exact"}));
  }
  app.add_option("-m,--moments", o.m, "Moments, polynomial degree or Lanczos steps")->check(CLI::PositiveNumber);
  app.add_option("-d,--probes", o.d, "Hutchinson probe vectors")->check(CLI::PositiveNumber);
  app.add_option("--basis", o.basis, "power | chebyshev | legendre")
      ->check(CLI::IsMember({"power", "chebyshev", "legendre"}));
  app.add_option("--prior", o.prior, "uniform | beta | auto")->check(CLI::IsMember({"uniform", "beta", "auto"}));
  app.add_option("--gtol", o.gtol, "Dual gradient tolerance (inf-norm)")->check(CLI::PositiveNumber);
  app.add_option("--jitter", o.jitter, "Initial Hessian diagonal jitter")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", o.seed, "Probe stream seed");
  app.add_option("--max-iterations", o.max_iterations, "Newton iteration cap")->check(CLI::PositiveNumber);
  app.add_option("--chebyshev-floor", o.chebyshev_floor, "Chebyshev interval start a, relative to lambda_u")
      ->check(CLI::Range(1e-300, 0.999999));
  app.add_flag("--extended", o.extended, "Solve the dual in long double");
}

EstimatorConfig to_config(const EstimatorOptions& o) {
  EstimatorConfig cfg;
  cfg.m = o.m;
  cfg.d = o.d;
  cfg.seed = o.seed;
  cfg.basis = *parse_basis(o.basis);
  cfg.prior = *parse_prior(o.prior);
  cfg.solver.gtol = o.gtol;
  cfg.solver.jitter = o.jitter;
  cfg.solver.max_iterations = o.max_iterations;
  cfg.chebyshev_floor = o.chebyshev_floor;
  cfg.extended_precision = o.extended;
  return cfg;
}

struct LoadedInput {
  std::string label;
  std::optional<double> lengthscale;
  LinearOperator op;
};

int count_inputs(const InputOptions& in) {
  return static_cast<int>(!in.mtx.empty()) + static_cast<int>(!in.se_kernel.empty()) +
         static_cast<int>(in.identity > 0) + static_cast<int>(!in.diag.empty());
}

LoadedInput load_single(const InputOptions& in) {
  if (count_inputs(in) != 1) {
    throw UsageError("exactly one of --mtx, --se-kernel, --identity, --diag is required");
  }
  if (!in.mtx.empty()) return {in.mtx.front(), std::nullopt, read_matrix_market(in.mtx.front())};
  if (!in.se_kernel.empty()) {
    const KernelSpec spec = cli::parse_kernel_spec(in.se_kernel);
    return {cli::kernel_label(spec), spec.lengthscale, se_kernel(spec)};
  }
  if (in.identity > 0) {
    return {"identity:" + std::to_string(in.identity), std::nullopt, LinearOperator::identity(in.identity)};
  }
  const auto parts = cli::split(in.diag, ',');
  Vector d(static_cast<Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) d[static_cast<Index>(i)] = cli::to_double("--diag", parts[i]);
  if (d.size() == 0) throw UsageError("--diag: empty list");
  return {"diag:" + in.diag, std::nullopt, LinearOperator::diagonal(d)};
}

void report_diagnostics(const LogDetEstimate& est) {
  const auto& g = est.diagnostics;
  std::cerr << "not converged: stop=" << g.stop_reason << " iterations=" << g.solver_iterations
            << " gradient_norm=" << g.gradient_norm << " objective=" << g.objective << '\n';
}

int cmd_logdet(const InputOptions& in, const EstimatorOptions& o, bool json, bool compare) {
  const LoadedInput input = load_single(in);
  const EstimatorConfig cfg = to_config(o);
  const Method method = *parse_method(o.method);
  const LogDetEstimate est = estimate_logdet(method, input.op, cfg);
  std::optional<double> exact;
  if (compare) exact = logdet_exact(input.op, cfg.exact_guard);

  if (json) {
    nlohmann::json out = to_json(est);
    out["dataset"] = input.label;
    out["n"] = input.op.dim();
    if (exact) {
      out["exact"] = *exact;
      out["rel_error"] = relative_error(est.value, *exact);
    }
    std::cout << out.dump(2) << '\n';
  } else {
    std::cout << std::setprecision(12);
    std::cout << "method     " << to_string(est.method) << '\n'
              << "n          " << input.op.dim() << '\n'
              << "logdet     " << est.value << '\n';
    if (est.method != Method::Exact) {
      std::cout << "lambda_u   " << est.lambda_u << '\n' << "m          " << est.m << '\n'
                << "d          " << est.d << '\n' << "seed       " << est.seed << '\n';
    }
    if (est.method == Method::Vbald) {
      const auto& g = est.diagnostics;
      std::cout << "prior      " << g.prior << '\n'
                << "iterations " << g.solver_iterations << '\n'
                << "grad_norm  " << g.gradient_norm << '\n'
                << "converged  " << (g.converged ? "yes" : "no") << '\n';
    }
    if (exact) {
      std::cout << "exact      " << *exact << '\n'
                << "rel_error  " << relative_error(est.value, *exact) << '\n';
    }
    std::cout << "wall_ms    " << est.diagnostics.wall_ms << '\n';
  }
  if (est.diagnostics.floor_warning) {
    std::cerr << "warning: surrogate mass below the support floor is " << est.diagnostics.mass_below_floor
              << '\n';
  }
  if (!est.diagnostics.converged) {
    report_diagnostics(est);
    return ExitCode::NotConverged;
  }
  return ExitCode::Ok;
}

int cmd_moments(const InputOptions& in, const EstimatorOptions& o, const std::string& csv_path) {
  const LoadedInput input = load_single(in);
  const double lambda_u = gershgorin_upper_bound(input.op);
  const NormalizedOperator<LinearOperator> b(input.op, lambda_u);
  const SpectralMoments mom = estimate_moments(b, MomentBasis{*parse_basis(o.basis), o.m}, o.d, o.seed);
  std::ofstream file;
  if (!csv_path.empty()) {
    file.open(csv_path);
    if (!file) throw UsageError("cannot open '" + csv_path + "' for writing");
  }
  std::ostream& out = csv_path.empty() ? std::cout : file;
  out << std::setprecision(17);
  out << "# basis=" << to_string(mom.basis.kind) << " m=" << mom.basis.order << " d=" << mom.probes
      << " seed=" << mom.seed << " lambda_u=" << lambda_u << '\n';
  out << "i,value,variance\n";
  for (Index i = 0; i < mom.values.size(); ++i) {
    out << i << ',' << mom.values[i] << ',' << mom.variance[i] << '\n';
  }
  return ExitCode::Ok;
}

struct BenchOptionsCli {
  std::string lengthscales;
  std::string methods;
  Index n = 1000;
  int dim = 6;
  double noise = 1e-8;
  double scale = 1.0;
  std::uint64_t kernel_seed = 0;
  Index exact_guard = 5000;
  std::string csv;
  bool json = false;
  bool verbose = false;
};

int cmd_bench(const InputOptions& in, const EstimatorOptions& o, const BenchOptionsCli& b) {
  BenchOptions opt;
  opt.methods = cli::parse_methods(b.methods);
  opt.config = to_config(o);
  opt.exact_guard = b.exact_guard;

  std::vector<BenchCase> cases;
  if (!b.lengthscales.empty()) {
    for (double l : cli::parse_lengthscales(b.lengthscales)) {
      KernelSpec spec;
      spec.n = b.n;
      spec.dim = b.dim;
      spec.lengthscale = l;
      spec.noise = b.noise;
      spec.seed = b.kernel_seed;
      spec.input_scale = b.scale;
      try {
        validate(spec);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      cases.push_back({cli::kernel_label(spec), l, [spec] { return se_kernel(spec); }});
    }
  }
  for (const auto& path : in.mtx) {
    cases.push_back({path, std::nullopt, [path] { return read_matrix_market(path); }});
  }
  if (in.identity > 0) {
    const Index n = in.identity;
    cases.push_back({"identity:" + std::to_string(n), std::nullopt, [n] { return LinearOperator::identity(n); }});
  }
  if (!in.se_kernel.empty()) {
    const KernelSpec spec = cli::parse_kernel_spec(in.se_kernel);
    cases.push_back({cli::kernel_label(spec), spec.lengthscale, [spec] { return se_kernel(spec); }});
  }
  if (cases.empty()) throw UsageError("bench: no cases (use --lengthscales, --mtx, --se-kernel or --identity)");

  // Paired-probe check: every probe-based row of one case must report the
  // same fingerprint.
  std::map<std::string, std::uint64_t> fingerprints;
  bool paired = true;
  opt.on_row = [&](const BenchRecord& r, std::uint64_t fp) {
    if (b.verbose) {
      std::cerr << r.dataset << " " << r.method << " probes=" << std::hex << fp << std::dec
                << (r.error.empty() ? "" : " error=" + r.error) << '\n';
    }
    if (fp == 0) return;
    const auto [it, inserted] = fingerprints.emplace(r.dataset, fp);
    if (!inserted && it->second != fp) paired = false;
  };
  const std::vector<BenchRecord> rows = run_bench(cases, opt);
  if (!paired) {
    std::cerr << "bench: probe-based methods consumed different probe sets\n";
    return ExitCode::Numerical;
  }

  std::ofstream file;
  if (!b.csv.empty()) {
    file.open(b.csv);
    if (!file) throw UsageError("cannot open '" + b.csv + "' for writing");
    write_bench_csv(file, rows);
  }
  if (b.json) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) arr.push_back(to_json(r));
    std::cout << arr.dump(2) << '\n';
  } else if (b.csv.empty()) {
    write_bench_csv(std::cout, rows);
  }
  return ExitCode::Ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Log-determinant estimation for symmetric positive-definite matrices"};
  app.require_subcommand(1);

  InputOptions logdet_in, moments_in, bench_in;
  EstimatorOptions logdet_opt, moments_opt, bench_opt;
  bool logdet_json = false, logdet_compare = false;
  std::string moments_csv;
  BenchOptionsCli bench_cli;

  auto* logdet = app.add_subcommand("logdet", "Estimate log det of one matrix");
  add_input_options(*logdet, logdet_in, false);
  add_estimator_options(*logdet, logdet_opt, true);
  logdet->add_flag("--json", logdet_json, "Print the estimate as JSON");
  logdet->add_flag("--compare", logdet_compare, "Also run the exact oracle and report the relative error");

  auto* moments = app.add_subcommand("moments", "Print stochastic spectral moments");
  add_input_options(*moments, moments_in, false);
  add_estimator_options(*moments, moments_opt, false);
  moments->add_option("--csv", moments_csv, "Write moments to PATH instead of stdout");

  auto* bench = app.add_subcommand("bench", "Run methods over a sweep and emit CSV rows");
  add_input_options(*bench, bench_in, true);
  add_estimator_options(*bench, bench_opt, false);
  bench->add_option("--lengthscales", bench_cli.lengthscales, "START:STOP:STEP or comma list");
  bench->add_option("--methods", bench_cli.methods, "Comma-separated methods")->required();
  bench->add_option("--n", bench_cli.n, "Kernel size for --lengthscales")->check(CLI::PositiveNumber);
  bench->add_option("--dim", bench_cli.dim, "Kernel input dimension")->check(CLI::PositiveNumber);
  bench->add_option("--noise", bench_cli.noise, "Kernel diagonal noise")->check(CLI::NonNegativeNumber);
  bench->add_option("--scale", bench_cli.scale, "Kernel input standard deviation")->check(CLI::PositiveNumber);
  bench->add_option("--kernel-seed", bench_cli.kernel_seed, "Kernel input seed");
  bench->add_option("--exact-guard", bench_cli.exact_guard, "Largest n for the exact oracle");
  bench->add_option("--csv", bench_cli.csv, "Write CSV to PATH");
  bench->add_flag("--json", bench_cli.json, "Print rows as JSON");
  bench->add_flag("--verbose", bench_cli.verbose, "Report probe fingerprints on standard error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ExitCode::Usage;
  }

  try {
    if (logdet->parsed()) return cmd_logdet(logdet_in, logdet_opt, logdet_json, logdet_compare);
    if (moments->parsed()) return cmd_moments(moments_in, moments_opt, moments_csv);
    if (bench->parsed()) return cmd_bench(bench_in, bench_opt, bench_cli);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return ExitCode::Usage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return ExitCode::Usage;
  } catch (const MatrixMarketError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return ExitCode::InputParse;
  } catch (const DimensionError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return ExitCode::InputParse;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return ExitCode::Numerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ExitCode::Numerical;
  }
  return ExitCode::Usage;
}
