#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ewboot/cox.hpp"
#include "ewboot/lab.hpp"
#include "ewboot/weights.hpp"

namespace ewboot {

// Everything a command can read from a config file.
//
//   [simulation]   theta0, baseline, baseline_rate, weibull_shape, weibull_scale,
//                  covariates, censoring_rate, tau, n
//   [bootstrap]    scheme, B, sigma
//   [experiment]   n_grid, mc_reps, alpha, moments
//   [weights]      n_grid, replications, marginal_samples, moment_samples
//   [inequalities] laws, sample_size, mc_draws
//   [rng]          seed
//   [execution]    threads, strict
struct RunConfig {
  ExperimentConfig experiment = desk_profile();
  std::vector<std::size_t> weight_n_grid{10, 100, 1000};
  WeightCheckOptions weight_options{};
  std::size_t inequality_laws = 100;
  std::size_t inequality_sample_size = 20'000;
  std::size_t multiplier_draws = 20'000;

  void validate() const;
};

// Lines are `[section]`, `key = value`, blank, or comments starting with # or ;.
// Unknown sections or keys throw ConfigError naming "section.key".
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

// Applies one `section.key=value` override, as parsed from a file.
void set_config_value(RunConfig& config, std::string_view dotted_key, std::string_view value);

// Canonical, fully resolved config text. The thread count is left out so
// that artifacts do not depend on it.
std::string echo_run_config(const RunConfig& config);

// Dataset CSV: optional leading `#` comment lines, then the header
// `y,delta,z1,...,zd` and one row per observation.
void write_dataset_csv(std::ostream& out, const SurvivalDataset& data,
                       std::string_view comment = {});
// Throws ParseError with the 1-based line number.
SurvivalDataset read_dataset_csv(std::istream& in);

SurvivalDataset load_dataset(const std::filesystem::path& path);  // IoError, ParseError

std::string read_text_file(const std::filesystem::path& path);                     // IoError
void write_text_file(const std::filesystem::path& path, std::string_view content);  // IoError

}  // namespace ewboot
