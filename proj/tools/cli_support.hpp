#pragma once

#include <charconv>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vbald/vbald.hpp"

namespace vbald::cli {

enum ExitCode : int { Ok = 0, Usage = 2, InputParse = 3, Numerical = 4, NotConverged = 5 };

/// Malformed command line content that CLI11 cannot catch by itself.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw UsageError("bad value for " + key + ": '" + v + "'");
  }
  return out;
}

template <class Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw UsageError("bad integer for " + key + ": '" + v + "'");
  }
  return out;
}

/// Parses "n=1000,dim=6,l=0.1,noise=1e-8,seed=3,scale=0.1". Unlisted keys
/// keep their defaults; lengthscale is required.
inline KernelSpec parse_kernel_spec(const std::string& text) {
  KernelSpec spec;
  bool have_l = false;
  for (const auto& kv : split(text, ',')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--se-kernel: expected KEY=VAL, got '" + kv + "'");
    const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
    if (key == "n") {
      spec.n = to_int<Index>(key, val);
    } else if (key == "dim") {
      spec.dim = to_int<int>(key, val);
    } else if (key == "l" || key == "lengthscale") {
      spec.lengthscale = to_double(key, val);
      have_l = true;
    } else if (key == "noise") {
      spec.noise = to_double(key, val);
    } else if (key == "seed") {
      spec.seed = to_int<std::uint64_t>(key, val);
    } else if (key == "scale") {
      spec.input_scale = to_double(key, val);
    } else {
      throw UsageError("--se-kernel: unknown key '" + key + "' (known: n, dim, l, noise, seed, scale)");
    }
  }
  if (!have_l) throw UsageError("--se-kernel: l=<lengthscale> is required");
  try {
    validate(spec);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--se-kernel: ") + e.what());
  }
  return spec;
}

/// "0.05:0.85:0.1" (inclusive range) or "0.45,0.55".
inline std::vector<double> parse_lengthscales(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw UsageError("--lengthscales: expected START:STOP:STEP");
    const double start = to_double("start", parts[0]);
    const double stop = to_double("stop", parts[1]);
    const double step = to_double("step", parts[2]);
    if (!(step > 0.0) || stop < start) throw UsageError("--lengthscales: need step > 0 and stop >= start");
    const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    for (long k = 0; k <= count; ++k) out.push_back(start + step * static_cast<double>(k));
  } else {
    for (const auto& v : split(text, ',')) out.push_back(to_double("lengthscale", v));
  }
  for (double l : out) {
    if (!(l > 0.0)) throw UsageError("--lengthscales: values must be positive");
  }
  return out;
}

inline std::vector<Method> parse_methods(const std::string& text) {
  std::vector<Method> out;
  for (const auto& name : split(text, ',')) {
    const auto m = parse_method(name);
    if (!m) throw UsageError("unknown method '" + name + "'");
    out.push_back(*m);
  }
  if (out.empty()) throw UsageError("--methods: empty methods list");
  return out;
}

inline std::string kernel_label(const KernelSpec& s) {
  std::ostringstream out;
  out << "se:n=" << s.n << ",dim=" << s.dim << ",l=" << s.lengthscale << ",noise=" << s.noise
      << ",seed=" << s.seed << ",scale=" << s.input_scale;
  return out.str();
}

}  // namespace vbald::cli
