#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "fitnet/errors.hpp"
#include "fitnet/fitness.hpp"

namespace fitnet {

/// How a live node's attachment weight is formed from its degree.
enum class KernelMode {
  // eta * (live in-degree + live out-degree): the degree the mean-field rate
  // equation tracks, with a newborn starting at its m out-links
  Degree,
  // eta * (live in-degree + kernel_offset)
  Offset,
};

struct ModelParams {
  std::uint32_t m = 5;
  double c = 0.0;
  FitnessDistribution fitness_dist = fitness::Delta{1.0};
  std::uint64_t total_steps = 10000;
  std::uint64_t snapshot_interval = 1000;
  std::uint64_t seed = 1;
  KernelMode kernel = KernelMode::Degree;
  std::optional<double> kernel_offset;  // defaults to m in Offset mode
  std::string fitness_file;             // source of Empirical samples, informational

  double offset() const { return kernel_offset.value_or(static_cast<double>(m)); }
};

inline void validate(const ModelParams& p) {
  if (p.m == 0) throw ParameterError("m must be a positive integer");
  if (!(p.c >= 0.0 && p.c < 1.0)) throw ParameterError("c must lie in [0, 1)");
  if (p.total_steps == 0) throw ParameterError("steps must be positive");
  if (p.snapshot_interval == 0) throw ParameterError("snapshot_interval must be positive");
  if (p.snapshot_interval > p.total_steps) throw ParameterError("snapshot_interval must not exceed steps");
  if (p.kernel_offset && !(*p.kernel_offset >= 0.0)) throw ParameterError("kernel_offset must be >= 0");
  validate(p.fitness_dist);
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

// shortest decimal form that reads back to the same double
inline std::string format_double(double v) {
  for (int digits = 15;; ++digits) {
    std::ostringstream os;
    os.precision(digits);
    os << v;
    if (digits >= 17 || std::stod(os.str()) == v) return os.str();
  }
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      value = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw ParameterError("bad value for '" + key + "': " + text);
    }
  } else {
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
      throw ParameterError("bad value for '" + key + "': " + text);
  }
  return value;
}

}  // namespace detail

inline std::vector<double> read_fitness_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open fitness sample file " + path);
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line)) {
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    out.push_back(detail::parse_number<double>("fitness_file", line));
  }
  return out;
}

/// Parses `key = value` lines. Unknown keys are rejected; '#' starts a comment.
inline ModelParams parse_params(std::istream& in, ModelParams base = {}) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParameterError("config line " + std::to_string(lineno) + ": expected key = value");
    kv[detail::trim(std::string_view(line).substr(0, eq))] = detail::trim(std::string_view(line).substr(eq + 1));
  }

  ModelParams p = std::move(base);
  std::string family = fitness_name(p.fitness_dist);
  double lambda = 1.0;
  double eta_max = max_fitness(p.fitness_dist);
  if (const auto* te = std::get_if<fitness::TruncatedExponential>(&p.fitness_dist)) lambda = te->lambda;

  for (const auto& [key, value] : kv) {
    if (key == "m") p.m = detail::parse_number<std::uint32_t>(key, value);
    else if (key == "c") p.c = detail::parse_number<double>(key, value);
    else if (key == "fitness") family = value;
    else if (key == "lambda") lambda = detail::parse_number<double>(key, value);
    else if (key == "eta_max") eta_max = detail::parse_number<double>(key, value);
    else if (key == "steps") p.total_steps = detail::parse_number<std::uint64_t>(key, value);
    else if (key == "snapshot_interval") p.snapshot_interval = detail::parse_number<std::uint64_t>(key, value);
    else if (key == "seed") p.seed = detail::parse_number<std::uint64_t>(key, value);
    else if (key == "kernel") {
      if (value == "degree") p.kernel = KernelMode::Degree;
      else if (value == "offset") p.kernel = KernelMode::Offset;
      else throw ParameterError("kernel must be 'degree' or 'offset'");
    } else if (key == "kernel_offset") p.kernel_offset = detail::parse_number<double>(key, value);
    else if (key == "fitness_file") p.fitness_file = value;
    else throw ParameterError("unknown config key '" + key + "'");
  }

  if (family == "delta") p.fitness_dist = fitness::Delta{eta_max};
  else if (family == "trunc-exp") p.fitness_dist = fitness::TruncatedExponential{lambda, eta_max};
  else if (family == "uniform") p.fitness_dist = fitness::Uniform{eta_max};
  else if (family == "empirical") {
    if (p.fitness_file.empty()) {
      if (!std::holds_alternative<fitness::Empirical>(p.fitness_dist))
        throw ParameterError("fitness = empirical requires fitness_file");
    } else {
      p.fitness_dist = fitness::Empirical{read_fitness_samples(p.fitness_file)};
    }
  } else throw ParameterError("unknown fitness family '" + family + "'");

  validate(p);
  return p;
}

inline ModelParams load_params(const std::string& path, ModelParams base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  return parse_params(in, std::move(base));
}

inline void write_params(std::ostream& out, const ModelParams& p) {
  using detail::format_double;
  out << "m = " << p.m << '\n';
  out << "c = " << format_double(p.c) << '\n';
  out << "fitness = " << fitness_name(p.fitness_dist) << '\n';
  if (const auto* te = std::get_if<fitness::TruncatedExponential>(&p.fitness_dist))
    out << "lambda = " << format_double(te->lambda) << '\n';
  if (!std::holds_alternative<fitness::Empirical>(p.fitness_dist))
    out << "eta_max = " << format_double(max_fitness(p.fitness_dist)) << '\n';
  else
    out << "fitness_file = " << p.fitness_file << '\n';
  out << "steps = " << p.total_steps << '\n';
  out << "snapshot_interval = " << p.snapshot_interval << '\n';
  out << "seed = " << p.seed << '\n';
  out << "kernel = " << (p.kernel == KernelMode::Degree ? "degree" : "offset") << '\n';
  if (p.kernel_offset) out << "kernel_offset = " << format_double(*p.kernel_offset) << '\n';
}

}  // namespace fitnet
