#include "ewboot/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "ewboot/errors.hpp"
#include "ewboot/format.hpp"

namespace ewboot {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string_view unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

double to_real(std::string_view key, std::string_view text) {
  double v = 0.0;
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (!parse_double(text, v)) throw ConfigError(std::string(key), "expected a number, got '" + std::string(text) + "'");
  return v;
}

std::uint64_t to_unsigned(std::string_view key, std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError(std::string(key), "expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return v;
}

bool to_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(std::string(key), "expected true or false");
}

template <class T, class F>
std::vector<T> to_list(std::string_view key, std::string_view text, F&& convert) {
  std::vector<T> out;
  for (auto part : split(text, ',')) out.push_back(static_cast<T>(convert(key, part)));
  return out;
}

template <class T>
std::string join(const std::vector<T>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>) {
      s += format_double(values[i]);
    } else {
      s += std::to_string(values[i]);
    }
  }
  return s;
}

}  // namespace

void set_config_value(RunConfig& config, std::string_view dotted_key, std::string_view raw) {
  const std::string key(dotted_key);
  const std::string_view value = unquote(raw);
  auto& e = config.experiment;
  auto& sim = e.simulation;
  if (key == "simulation.theta0") {
    sim.theta0 = to_list<double>(key, value, to_real);
  } else if (key == "simulation.baseline") {
    if (value == "constant") {
      sim.baseline.kind = BaselineKind::Constant;
    } else if (value == "weibull") {
      sim.baseline.kind = BaselineKind::Weibull;
    } else {
      throw ConfigError(key, "expected constant or weibull");
    }
  } else if (key == "simulation.baseline_rate") {
    sim.baseline.rate = to_real(key, value);
  } else if (key == "simulation.weibull_shape") {
    sim.baseline.shape = to_real(key, value);
  } else if (key == "simulation.weibull_scale") {
    sim.baseline.scale = to_real(key, value);
  } else if (key == "simulation.covariates") {
    if (value == "uniform") {
      sim.covariates = CovariateLaw::Uniform;
    } else if (value == "rademacher") {
      sim.covariates = CovariateLaw::Rademacher;
    } else {
      throw ConfigError(key, "expected uniform or rademacher");
    }
  } else if (key == "simulation.censoring_rate") {
    sim.censoring_rate = to_real(key, value);
  } else if (key == "simulation.tau") {
    sim.tau = to_real(key, value);
  } else if (key == "simulation.n") {
    sim.n = to_unsigned(key, value);
  } else if (key == "bootstrap.scheme") {
    try {
      e.scheme = WeightScheme::parse(value);
    } catch (const Error& err) {
      throw ConfigError(key, err.what());
    }
  } else if (key == "bootstrap.B") {
    e.B = to_unsigned(key, value);
  } else if (key == "bootstrap.sigma") {
    try {
      e.sigma = parse_sigma_source(value);
    } catch (const ConfigError& err) {
      throw ConfigError(key, "expected plugin, profile or bootstrap");
    }
  } else if (key == "experiment.n_grid") {
    e.n_grid = to_list<std::size_t>(key, value, to_unsigned);
  } else if (key == "experiment.mc_reps") {
    e.mc_reps = to_unsigned(key, value);
  } else if (key == "experiment.alpha") {
    e.alpha = to_real(key, value);
  } else if (key == "experiment.moments") {
    e.moments = to_list<int>(key, value, to_unsigned);
  } else if (key == "weights.n_grid") {
    config.weight_n_grid = to_list<std::size_t>(key, value, to_unsigned);
  } else if (key == "weights.replications") {
    config.weight_options.replications = to_unsigned(key, value);
  } else if (key == "weights.marginal_samples") {
    config.weight_options.marginal_samples = to_unsigned(key, value);
  } else if (key == "weights.moment_samples") {
    config.weight_options.moment_samples = to_unsigned(key, value);
  } else if (key == "inequalities.laws") {
    config.inequality_laws = to_unsigned(key, value);
  } else if (key == "inequalities.sample_size") {
    config.inequality_sample_size = to_unsigned(key, value);
  } else if (key == "inequalities.mc_draws") {
    config.multiplier_draws = to_unsigned(key, value);
  } else if (key == "rng.seed") {
    e.seed = to_unsigned(key, value);
  } else if (key == "execution.threads") {
    e.threads = static_cast<unsigned>(to_unsigned(key, value));
    if (e.threads == 0) throw ConfigError(key, "must be at least 1");
  } else if (key == "execution.strict") {
    e.strict = to_bool(key, value);
  } else {
    throw ConfigError(key, "unknown configuration key");
  }
}

void RunConfig::validate() const {
  experiment.validate();
  if (weight_n_grid.empty()) throw ConfigError("weights.n_grid", "must not be empty");
  for (auto n : weight_n_grid) {
    if (n < 2) throw ConfigError("weights.n_grid", "sample sizes must be at least 2");
  }
  if (weight_options.replications < 2) throw ConfigError("weights.replications", "must be at least 2");
  if (weight_options.marginal_samples < 2) throw ConfigError("weights.marginal_samples", "must be at least 2");
  if (weight_options.moment_samples < 2) throw ConfigError("weights.moment_samples", "must be at least 2");
  if (inequality_laws < 1) throw ConfigError("inequalities.laws", "must be at least 1");
  if (inequality_sample_size < 2) throw ConfigError("inequalities.sample_size", "must be at least 2");
  if (multiplier_draws < 2) throw ConfigError("inequalities.mc_draws", "must be at least 2");
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig config;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      static const char* known[] = {"simulation", "bootstrap", "experiment", "weights",
                                    "inequalities", "rng", "execution"};
      if (std::find(std::begin(known), std::end(known), section) == std::end(known)) {
        throw ConfigError(section, "unknown configuration section");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
    if (section.empty()) throw ParseError(line_no, "key outside of a section");
    const auto key = trim(line.substr(0, eq));
    set_config_value(config, section + "." + std::string(key), line.substr(eq + 1));
  }
  config.validate();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text_file(path));
}

std::string echo_run_config(const RunConfig& config) {
  const auto& e = config.experiment;
  const auto& sim = e.simulation;
  std::ostringstream out;
  out << "[simulation]\n"
      << "theta0 = " << join(sim.theta0) << "\n"
      << "baseline = " << (sim.baseline.kind == BaselineKind::Constant ? "constant" : "weibull") << "\n"
      << "baseline_rate = " << format_double(sim.baseline.rate) << "\n"
      << "weibull_shape = " << format_double(sim.baseline.shape) << "\n"
      << "weibull_scale = " << format_double(sim.baseline.scale) << "\n"
      << "covariates = " << (sim.covariates == CovariateLaw::Uniform ? "uniform" : "rademacher") << "\n"
      << "censoring_rate = " << format_double(sim.censoring_rate) << "\n"
      << "tau = " << format_double(sim.tau) << "\n"
      << "n = " << sim.n << "\n"
      << "[bootstrap]\n"
      << "scheme = \"" << e.scheme.to_string() << "\"\n"
      << "B = " << e.B << "\n"
      << "sigma = " << to_string(e.sigma) << "\n"
      << "[experiment]\n"
      << "n_grid = " << join(e.n_grid) << "\n"
      << "mc_reps = " << e.mc_reps << "\n"
      << "alpha = " << format_double(e.alpha) << "\n"
      << "moments = " << join(e.moments) << "\n"
      << "[weights]\n"
      << "n_grid = " << join(config.weight_n_grid) << "\n"
      << "replications = " << config.weight_options.replications << "\n"
      << "marginal_samples = " << config.weight_options.marginal_samples << "\n"
      << "moment_samples = " << config.weight_options.moment_samples << "\n"
      << "[inequalities]\n"
      << "laws = " << config.inequality_laws << "\n"
      << "sample_size = " << config.inequality_sample_size << "\n"
      << "mc_draws = " << config.multiplier_draws << "\n"
      << "[rng]\n"
      << "seed = " << e.seed << "\n"
      << "[execution]\n"
      << "strict = " << (e.strict ? "true" : "false") << "\n";
  return out.str();
}

void write_dataset_csv(std::ostream& out, const SurvivalDataset& data, std::string_view comment) {
  for (auto line : split(comment, '\n')) {
    if (!comment.empty()) out << "# " << line << "\n";
  }
  out << "y,delta";
  for (std::size_t k = 0; k < data.d(); ++k) out << ",z" << (k + 1);
  out << "\n";
  for (std::size_t i = 0; i < data.n(); ++i) {
    out << format_double(data.y(i)) << "," << data.delta(i);
    for (double v : data.z(i)) out << "," << format_double(v);
    out << "\n";
  }
}

SurvivalDataset read_dataset_csv(std::istream& in) {
  std::string raw;
  std::size_t line_no = 0;
  std::size_t d = 0;
  bool have_header = false;
  std::vector<double> y, z;
  std::vector<int> delta;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!have_header) {
      if (!line.empty() && line.front() == '#') continue;
      const auto cols = split(line, ',');
      if (cols.size() < 3 || cols[0] != "y" || cols[1] != "delta") {
        throw ParseError(line_no, "expected header y,delta,z1,...,zd");
      }
      for (std::size_t k = 2; k < cols.size(); ++k) {
        if (cols[k] != "z" + std::to_string(k - 1)) {
          throw ParseError(line_no, "expected column z" + std::to_string(k - 1) + ", got '" +
                                        std::string(cols[k]) + "'");
        }
      }
      d = cols.size() - 2;
      have_header = true;
      continue;
    }
    if (trim(line).empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != d + 2) {
      throw ParseError(line_no, "expected " + std::to_string(d + 2) + " fields, got " +
                                    std::to_string(cols.size()));
    }
    double v = 0.0;
    if (!parse_double(cols[0], v)) throw ParseError(line_no, "y is not a number");
    if (!std::isfinite(v) || v < 0.0) throw ParseError(line_no, "y must be finite and non-negative");
    y.push_back(v);
    if (cols[1] == "0") {
      delta.push_back(0);
    } else if (cols[1] == "1") {
      delta.push_back(1);
    } else {
      throw ParseError(line_no, "delta must be 0 or 1");
    }
    for (std::size_t k = 0; k < d; ++k) {
      if (!parse_double(cols[k + 2], v)) {
        throw ParseError(line_no, "z" + std::to_string(k + 1) + " is not a number");
      }
      if (!std::isfinite(v)) throw ParseError(line_no, "z" + std::to_string(k + 1) + " must be finite");
      z.push_back(v);
    }
  }
  if (!have_header) throw ParseError(line_no + 1, "missing header y,delta,z1,...,zd");
  try {
    return SurvivalDataset(std::move(y), std::move(delta), std::move(z), d);
  } catch (const ValidationError& e) {
    throw ParseError(line_no, e.what());
  } catch (const SizeError& e) {
    throw ParseError(line_no, e.what());
  }
}

SurvivalDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_dataset_csv(in);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace ewboot
