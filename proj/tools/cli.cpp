#include "cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "ewboot/bootstrap.hpp"
#include "ewboot/cox.hpp"
#include "ewboot/errors.hpp"
#include "ewboot/format.hpp"
#include "ewboot/io.hpp"
#include "ewboot/lab.hpp"
#include "ewboot/parallel.hpp"
#include "ewboot/weights.hpp"
#include "report.hpp"

#ifndef EWBOOT_VERSION
#define EWBOOT_VERSION "unknown"
#endif

namespace ewboot::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool strict = false;
};

struct Overrides {
  std::optional<std::string> scheme;
  std::optional<std::size_t> B;
  std::optional<double> alpha;
  std::optional<std::string> sigma;
  std::optional<std::size_t> n;
  std::optional<std::size_t> mc_reps;
};

RunConfig resolve_config(const Globals& g, const Overrides& o) {
  RunConfig config;
  if (!g.config_path.empty()) {
    const std::string text = read_text_file(g.config_path);
    try {
      config = parse_run_config(text);
    } catch (const ParseError& e) {
      throw ConfigError(g.config_path, e.what());
    }
  }
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError(kv, "--set expects section.key=value");
    set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  auto& e = config.experiment;
  if (g.seed) e.seed = *g.seed;
  if (g.threads) e.threads = *g.threads;
  if (g.strict) e.strict = true;
  if (o.scheme) set_config_value(config, "bootstrap.scheme", *o.scheme);
  if (o.B) e.B = *o.B;
  if (o.alpha) e.alpha = *o.alpha;
  if (o.sigma) set_config_value(config, "bootstrap.sigma", *o.sigma);
  if (o.n) {
    e.simulation.n = *o.n;
    e.n_grid = {*o.n};
  }
  if (o.mc_reps) e.mc_reps = *o.mc_reps;
  config.validate();
  return config;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------

int cmd_simulate(const RunConfig& config, const std::string& out_path, std::ostream& out) {
  const auto& e = config.experiment;
  RandomStream rng = RandomStream(e.seed).substream("simulate");
  const auto data = simulate_dataset(e.simulation, rng);
  std::ostringstream csv;
  write_dataset_csv(csv, data, provenance_comment("simulate", echo_run_config(config)));
  write_text_file(out_path, csv.str());
  std::size_t events = data.event_count();
  out << "wrote " << data.n() << " observations (" << events << " events) to " << out_path << "\n";
  return kPass;
}

Json information_json(const std::function<Eigen::MatrixXd()>& compute) {
  Json j;
  try {
    const Eigen::MatrixXd info = compute();
    j["information"] = matrix_json(info);
    try {
      j["inverse"] = matrix_json(invert_information(info));
      j["singular"] = false;
    } catch (const SingularMatrixError& err) {
      j["inverse"] = nullptr;
      j["singular"] = true;
      j["condition_number"] = err.condition_number();
    }
  } catch (const SingularMatrixError& err) {
    j["information"] = nullptr;
    j["inverse"] = nullptr;
    j["singular"] = true;
    j["condition_number"] = err.condition_number();
  }
  return j;
}

int cmd_fit(const RunConfig& config, const std::string& data_path,
            const std::vector<double>& fix_theta, const std::string& out_path, std::ostream& out) {
  const auto data = load_dataset(data_path);
  const auto weights = unit_weights(data.n());
  CoxFit f;
  const bool fixed = !fix_theta.empty();
  if (fixed) {
    if (fix_theta.size() != data.d()) {
      throw ConfigError("fix-theta", "expected " + std::to_string(data.d()) + " values");
    }
    f.theta_hat = Eigen::Map<const Eigen::VectorXd>(fix_theta.data(),
                                                    static_cast<Eigen::Index>(fix_theta.size()));
    const auto pl = log_partial_likelihood(f.theta_hat, data, weights);
    f.eta_hat = weighted_breslow(f.theta_hat, data, weights);
    f.log_partial_likelihood = pl.value;
    f.score_sup_norm = pl.gradient.cwiseAbs().maxCoeff();
    f.observed_information = -pl.hessian;
  } else {
    f = fit(data, weights);
  }

  Json j = provenance_json("fit", echo_run_config(config));
  j["dataset"] = data_path;
  j["n"] = data.n();
  j["d"] = data.d();
  j["events"] = data.event_count();
  j["theta_fixed"] = fixed;
  j["theta_hat"] = vector_json(f.theta_hat);
  j["log_partial_likelihood"] = f.log_partial_likelihood;
  j["score_sup_norm"] = f.score_sup_norm;
  j["observed_information"] = matrix_json(f.observed_information);
  j["converged"] = fixed ? Json(nullptr) : Json(f.converged);
  j["monotone_likelihood"] = f.monotone_likelihood;
  j["iterations"] = f.iterations;
  j["eta_tau"] = f.eta_hat(data.tau());
  Json table = Json::array();
  double cumulative = 0.0;
  for (std::size_t k = 0; k < f.eta_hat.jump_times.size(); ++k) {
    cumulative += f.eta_hat.jump_sizes[k];
    table.push_back({{"time", f.eta_hat.jump_times[k]},
                     {"jump", f.eta_hat.jump_sizes[k]},
                     {"eta", cumulative}});
  }
  j["eta_hat"] = std::move(table);
  j["plugin_efficient_information"] =
      information_json([&] { return plugin_efficient_information(f, data); });
  j["profile_information"] = information_json([&] { return profile_information(f, data); });

  if (out_path.empty()) {
    out << dump(j);
  } else {
    write_text_file(out_path, dump(j));
    out << "theta_hat =";
    for (Eigen::Index k = 0; k < f.theta_hat.size(); ++k) out << " " << format_double(f.theta_hat[k]);
    out << "\n";
  }
  if (!fixed && !f.converged) {
    out << "FAIL fit did not converge"
        << (f.monotone_likelihood ? " (monotone likelihood)" : "") << "\n";
    return kCheckFailed;
  }
  return kPass;
}

int cmd_bootstrap(const RunConfig& config, const std::string& data_path, const fs::path& out_dir,
                  std::ostream& out) {
  const auto& e = config.experiment;
  const auto data = load_dataset(data_path);
  const auto base = fit(data, unit_weights(data.n()));
  if (!base.converged) {
    out << "FAIL base fit did not converge"
        << (base.monotone_likelihood ? " (monotone likelihood)" : "") << "\n";
    return kCheckFailed;
  }
  BootstrapOptions options;
  options.threads = e.threads;
  options.strict = e.strict;
  const std::uint64_t seed = RandomStream(e.seed).substream("bootstrap").key();
  const auto run = run_bootstrap(data, base, e.scheme, e.B, seed, options);
  const Eigen::MatrixXd sigma_star = variance_estimate(run);
  const bool degenerate = sigma_star.cwiseAbs().maxCoeff() == 0.0;

  Eigen::MatrixXd sigma_hat;
  switch (e.sigma) {
    case SigmaSource::Plugin:
      sigma_hat = invert_information(plugin_efficient_information(base, data));
      break;
    case SigmaSource::Profile:
      sigma_hat = invert_information(profile_information(base, data));
      break;
    case SigmaSource::Bootstrap:
      sigma_hat = sigma_star;
      break;
  }
  std::vector<ConfidenceSet> sets;
  if (e.alpha < 1.0) {
    sets.push_back(t_confidence_set(run, sigma_hat, e.alpha));
    sets.push_back(percentile_confidence_set(run, e.alpha));
    sets.push_back(hybrid_confidence_set(run, e.alpha));
  } else if (e.strict) {
    throw DomainError("alpha = 1 gives a level-0 interval");
  }

  ensure_directory(out_dir);
  const std::string echo = echo_run_config(config);
  const std::string comment = provenance_comment("bootstrap", echo);

  std::ostringstream meta;
  meta << "scheme = " << run.scheme.to_string() << "\nn = " << run.n << "\nB = " << run.B
       << "\nc2 = " << format_double(run.c2) << "\nseed = " << run.seed
       << "\nexcluded = " << run.excluded.size();
  std::ostringstream reps;
  for (const std::string& part : {comment, meta.str()}) {
    std::istringstream lines(part);
    std::string line;
    while (std::getline(lines, line)) reps << "# " << line << "\n";
  }
  reps << "replicate";
  for (std::size_t k = 0; k < data.d(); ++k) reps << ",theta" << (k + 1);
  reps << "\n";
  {
    std::size_t row = 0, next_excluded = 0;
    for (std::size_t b = 0; b < run.B; ++b) {
      if (next_excluded < run.excluded.size() && run.excluded[next_excluded] == b) {
        ++next_excluded;
        continue;
      }
      reps << b;
      for (Eigen::Index k = 0; k < run.theta_stars.cols(); ++k) {
        reps << "," << format_double(run.theta_stars(static_cast<Eigen::Index>(row), k));
      }
      reps << "\n";
      ++row;
    }
  }
  write_text_file(out_dir / "bootstrap_replicates.csv", reps.str());

  std::ostringstream sets_csv;
  {
    std::istringstream lines(comment);
    std::string line;
    while (std::getline(lines, line)) sets_csv << "# " << line << "\n";
  }
  sets_csv << "kind,level,coordinate,lower,upper,degenerate\n";
  Json sets_json = Json::array();
  for (const auto& s : sets) {
    for (Eigen::Index k = 0; k < s.lower.size(); ++k) {
      sets_csv << to_string(s.kind) << "," << format_double(s.level) << "," << k << ","
               << format_double(s.lower[k]) << "," << format_double(s.upper[k]) << ","
               << (s.degenerate ? "true" : "false") << "\n";
      sets_json.push_back({{"kind", to_string(s.kind)},
                           {"level", s.level},
                           {"coordinate", k},
                           {"lower", s.lower[k]},
                           {"upper", s.upper[k]},
                           {"degenerate", s.degenerate}});
    }
  }
  write_text_file(out_dir / "confidence_sets.csv", sets_csv.str());

  Json j = provenance_json("bootstrap", echo);
  j["dataset"] = data_path;
  j["scheme"] = run.scheme.to_string();
  j["n"] = run.n;
  j["B"] = run.B;
  j["c2"] = run.c2;
  j["seed"] = run.seed;
  j["usable_replicates"] = run.usable();
  j["excluded_count"] = run.excluded.size();
  j["excluded_replicates"] = run.excluded;
  j["unstable"] = run.unstable;
  j["theta_hat"] = vector_json(base.theta_hat);
  j["sigma_star"] = matrix_json(sigma_star);
  j["sigma_source"] = to_string(e.sigma);
  j["sigma_hat"] = matrix_json(sigma_hat);
  j["degenerate"] = degenerate;
  j["confidence_sets"] = std::move(sets_json);
  write_text_file(out_dir / "bootstrap_report.json", dump(j));

  out << "scheme " << run.scheme.to_string() << ", B = " << run.B << ", c2 = "
      << format_double(run.c2) << "\n";
  out << "excluded replicates: " << run.excluded.size() << " of " << run.B
      << (run.unstable ? " (above threshold)" : "") << "\n";
  for (Eigen::Index k = 0; k < sigma_star.rows(); ++k) {
    out << "sigma_star[" << k << "] = " << format_double(sigma_star(k, k)) << "\n";
  }
  for (const auto& s : sets) {
    for (Eigen::Index k = 0; k < s.lower.size(); ++k) {
      out << to_string(s.kind) << "[" << k << "] = [" << format_double(s.lower[k]) << ", "
          << format_double(s.upper[k]) << "]\n";
    }
  }
  if (degenerate) out << "degenerate: bootstrap spread is identically zero\n";
  return kPass;
}

// ---------------------------------------------------------------------------
// verify

std::vector<ReportRecord> weight_records(const WeightConditionReport& report) {
  std::vector<ReportRecord> records;
  auto add = [&](std::size_t n, std::string stat, double value, std::optional<double> se = {},
                 std::optional<double> target = {}, std::optional<bool> pass = {}) {
    records.push_back({"weights", n, std::move(stat), -1, value, se, target, pass});
  };
  for (const auto& d : report.per_n) {
    add(d.n, "empirical_c2", d.empirical_c2, d.empirical_c2_se, d.finite_c2);
    add(d.n, "theoretical_c2", d.theoretical_c2);
    add(d.n, "fifth_moment", d.fifth_moment, d.fifth_moment_se, report.fifth_moment_bound,
        d.fifth_moment <= report.fifth_moment_bound + 3.0 * d.fifth_moment_se);
    add(d.n, "fifth_moment_exact", d.fifth_moment_exact);
    add(d.n, "l21_norm", d.l21_norm_estimate, {}, report.l21_bound,
        d.l21_norm_estimate <= report.l21_bound);
    add(d.n, "l21_power_norm", d.l21_power_estimate);
    for (const auto& t : d.tail_profile) add(d.n, "tail_sup_lambda_" + format_double(t.lambda), t.value);
  }
  add(0, "c2_tracks", report.c2_tracks ? 1.0 : 0.0, {}, 1.0, report.c2_tracks);
  add(0, "fifth_moment_bounded", report.fifth_moment_bounded ? 1.0 : 0.0, {}, 1.0,
      report.fifth_moment_bounded);
  add(0, "l21_bounded", report.l21_bounded ? 1.0 : 0.0, {}, 1.0, report.l21_bounded);
  add(0, "tail_decays", report.tail_decays ? 1.0 : 0.0, {}, 1.0, report.tail_decays);
  return records;
}

std::vector<ReportRecord> inequality_records(const RunConfig& config) {
  const auto& e = config.experiment;
  const RandomStream root(e.seed);
  const std::vector<double> powers{2.5, 3.0, 4.0};
  std::vector<ReportRecord> records;

  const std::size_t laws = config.inequality_laws;
  std::vector<NormInequalityMargin> margins(laws * powers.size());
  parallel_for(margins.size(), e.threads, [&](std::size_t cell) {
    const std::size_t law_index = cell / powers.size();
    RandomStream law_stream = root.substream("law", law_index);
    const PositiveLaw law = random_gamma_mixture(law_stream);
    RandomStream sample_stream = root.substream("sandwich", cell);
    margins[cell] = norm_inequality_check(law, powers[cell % powers.size()],
                                          config.inequality_sample_size, sample_stream);
  });
  for (std::size_t r = 0; r < powers.size(); ++r) {
    std::size_t violations = 0;
    double worst_lower = std::numeric_limits<double>::infinity();
    double worst_upper = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < laws; ++l) {
      const auto& m = margins[l * powers.size() + r];
      violations += m.violation ? 1 : 0;
      worst_lower = std::min(worst_lower, m.lower_margin);
      worst_upper = std::min(worst_upper, m.upper_margin);
    }
    const std::string suffix = "_r" + sanitize(format_double(powers[r]));
    records.push_back({"inequalities", config.inequality_sample_size, "sandwich_violations" + suffix,
                       -1, static_cast<double>(violations), {}, 0.0, violations == 0});
    records.push_back({"inequalities", config.inequality_sample_size,
                       "sandwich_min_lower_margin" + suffix, -1, worst_lower, {}, {}, {}});
    records.push_back({"inequalities", config.inequality_sample_size,
                       "sandwich_min_upper_margin" + suffix, -1, worst_upper, {}, {}, {}});
  }

  const auto schemes = standard_schemes();
  const std::vector<int> orders{1, 2, 3};
  const std::vector<std::size_t> sizes{50, 200};
  const auto function_class = polynomial_class();
  const std::size_t cells = schemes.size() * orders.size() * sizes.size();
  std::vector<MultiplierResult> results(cells);
  parallel_for(cells, e.threads, [&](std::size_t cell) {
    MultiplierCheck check;
    check.scheme = schemes[cell / (orders.size() * sizes.size())];
    check.p = orders[(cell / sizes.size()) % orders.size()];
    check.n = sizes[cell % sizes.size()];
    check.n0 = 5;
    check.mc_draws = config.multiplier_draws;
    RandomStream stream = root.substream("multiplier", cell);
    results[cell] = multiplier_inequality_check(check, function_class, stream);
  });
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const auto& scheme = schemes[cell / (orders.size() * sizes.size())];
    const int p = orders[(cell / sizes.size()) % orders.size()];
    const std::size_t n = sizes[cell % sizes.size()];
    const auto& res = results[cell];
    const std::string stat = "multiplier_" + sanitize(scheme.to_string()) + "_p" + std::to_string(p);
    records.push_back({"inequalities", n, stat + "_lhs", -1, res.lhs, res.lhs_se, {}, {}});
    records.push_back({"inequalities", n, stat + "_rhs", -1, res.rhs, res.rhs_se, {}, {}});
    records.push_back({"inequalities", n, stat + "_margin", -1, res.rhs - res.lhs,
                       std::hypot(res.lhs_se, res.rhs_se), 0.0, res.holds});
  }
  return records;
}

std::vector<ReportRecord> filter_prefixes(const std::vector<ReportRecord>& records,
                                          const std::vector<std::string>& prefixes) {
  std::vector<ReportRecord> out;
  for (const auto& r : records) {
    for (const auto& p : prefixes) {
      if (r.statistic.rfind(p, 0) == 0) {
        out.push_back(r);
        break;
      }
    }
  }
  return out;
}

int cmd_verify(const RunConfig& config, const std::string& kind, const fs::path& out_dir,
               std::ostream& out) {
  const auto& e = config.experiment;
  std::vector<ReportRecord> records;
  if (kind == "weights") {
    RandomStream rng = RandomStream(e.seed).substream("verify-weights");
    records = weight_records(
        check_weight_conditions(e.scheme, config.weight_n_grid, config.weight_options, rng));
  } else if (kind == "distribution") {
    records = distribution_consistency_experiment(e).records;
  } else if (kind == "variance") {
    records = filter_prefixes(variance_and_moment_experiment(e).records,
                              {"mc_variance", "sigma_star", "plugin_sigma", "ratio_", "usable",
                               "excluded"});
  } else if (kind == "moments") {
    records = filter_prefixes(variance_and_moment_experiment(e).records,
                              {"moment_", "usable", "excluded"});
  } else if (kind == "coverage") {
    records = coverage_experiment(e).records;
  } else if (kind == "inequalities") {
    records = inequality_records(config);
  } else {
    throw ConfigError("verify", "unknown check '" + kind + "'");
  }

  ensure_directory(out_dir);
  const std::string command = "verify " + kind;
  const std::string echo = echo_run_config(config);
  Json j = provenance_json(command, echo);
  Json rows = Json::array();
  bool all_pass = true;
  std::size_t checks = 0;
  for (const auto& r : records) {
    rows.push_back(record_json(r));
    if (r.pass) {
      ++checks;
      all_pass = all_pass && *r.pass;
    }
  }
  j["records"] = std::move(rows);
  j["checks"] = checks;
  j["all_pass"] = all_pass;
  write_text_file(out_dir / ("verify_" + kind + ".json"), dump(j));
  write_statistic_tables(out_dir, "verify_" + kind, records, provenance_comment(command, echo));

  for (const auto& r : records) {
    const bool bookkeeping = r.statistic == "usable_datasets" ||
                             r.statistic == "excluded_bootstrap_replicates";
    if (!r.pass && !bookkeeping) continue;
    out << (r.pass ? (*r.pass ? "PASS " : "FAIL ") : "INFO ") << r.statistic << " n=" << r.n;
    if (r.coordinate >= 0) out << " coord=" << r.coordinate;
    out << " value=" << format_double(r.value);
    if (r.mc_se) out << " se=" << format_double(*r.mc_se);
    if (r.target) out << " target=" << format_double(*r.target);
    out << "\n";
  }
  out << (all_pass ? "PASS" : "FAIL") << " verify " << kind << " (" << checks << " checks)\n";
  return all_pass ? kPass : kCheckFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exchangeably weighted bootstrap for the Cox proportional hazards model", "ewboot"};
  app.set_version_flag("--version", std::string(EWBOOT_VERSION));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  Overrides o;
  app.add_option("--config", g.config_path, "Sectioned key = value config file");
  app.add_option("--set", g.overrides, "Override one config value: section.key=value");
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--strict", g.strict, "Escalate flagged bootstrap instability to an error");

  std::string out_path, data_path, out_dir, verify_kind;
  std::vector<double> fix_theta;

  auto* simulate = app.add_subcommand("simulate", "Simulate a right-censored Cox dataset");
  simulate->add_option("--out", out_path, "Output CSV")->required();
  simulate->add_option("--n", o.n, "Sample size");

  auto* fit_cmd = app.add_subcommand("fit", "Fit the Cox model to a dataset");
  fit_cmd->add_option("--data", data_path, "Dataset CSV")->required();
  fit_cmd->add_option("--out", out_path, "Report file (stdout when omitted)");
  fit_cmd->add_option("--fix-theta", fix_theta, "Evaluate at a fixed theta instead of fitting")
      ->delimiter(',');

  auto* boot = app.add_subcommand("bootstrap", "Weighted bootstrap with confidence sets");
  boot->add_option("--data", data_path, "Dataset CSV")->required();
  boot->add_option("--out-dir", out_dir, "Output directory")->required();
  boot->add_option("--scheme", o.scheme, "Weight scheme, e.g. efron or polya(alpha=1)");
  boot->add_option("--B", o.B, "Bootstrap replicates");
  boot->add_option("--alpha", o.alpha, "Confidence sets at level 1 - alpha");
  boot->add_option("--sigma", o.sigma, "Studentization: plugin, profile or bootstrap");

  auto* verify = app.add_subcommand("verify", "Run a verification experiment");
  verify->add_option("kind", verify_kind, "weights, distribution, variance, coverage, moments, inequalities")
      ->required()
      ->check(CLI::IsMember({"weights", "distribution", "variance", "coverage", "moments",
                             "inequalities"}));
  verify->add_option("--out-dir", out_dir, "Output directory")->required();
  verify->add_option("--scheme", o.scheme, "Weight scheme");
  verify->add_option("--B", o.B, "Bootstrap replicates");
  verify->add_option("--alpha", o.alpha, "Nominal level 1 - alpha");
  verify->add_option("--sigma", o.sigma, "Studentization: plugin, profile or bootstrap");
  verify->add_option("--n", o.n, "Single sample size");
  verify->add_option("--mc-reps", o.mc_reps, "Monte Carlo datasets per sample size");

  std::vector<const char*> argv{"ewboot"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kPass : kConfigError;
  }

  try {
    const RunConfig config = resolve_config(g, o);
    if (*simulate) return cmd_simulate(config, out_path, out);
    if (*fit_cmd) return cmd_fit(config, data_path, fix_theta, out_path, out);
    if (*boot) return cmd_bootstrap(config, data_path, out_dir, out);
    if (*verify) return cmd_verify(config, verify_kind, out_dir, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << "\n";
    return kIoError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kCheckFailed;
  }
  return kConfigError;
}

}  // namespace ewboot::cli
