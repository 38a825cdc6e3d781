// Command-line front end: simulate / fit / scores / pve / tune / benchmark.
//
// Every command reads an optional JSON config (--config) whose keys mirror
// the long flag names with underscores; explicit flags win over config
// values, unknown config keys are rejected, and the fully resolved
// configuration is echoed to <out>/resolved_config.json so a run can be
// replayed byte for byte. Exit codes: 0 success, 1 runtime or numerical
// error, 2 configuration error.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ipca/dataset.hpp"
#include "ipca/estimators.hpp"
#include "ipca/ipca.hpp"
#include "ipca/simulation.hpp"
#include "ipca/tuning.hpp"

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr int kSchemaVersion = 1;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  for (const std::string& item : split_list(csv)) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("cannot parse number '" + item + "'");
    }
  }
  return out;
}

// Ladder spec "lo:hi:count", log-spaced inclusive.
std::vector<double> parse_ladder(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.size() != 3) {
    throw ConfigError("grid spec must look like lo:hi:count, got '" + spec + "'");
  }
  double lo = 0.0, hi = 0.0;
  int count = 0;
  try {
    lo = std::stod(parts[0]);
    hi = std::stod(parts[1]);
    count = std::stoi(parts[2]);
  } catch (const std::exception&) {
    throw ConfigError("cannot parse grid spec '" + spec + "'");
  }
  if (!(lo > 0.0) || !(hi >= lo) || count < 1) {
    throw ConfigError("grid spec needs 0 < lo <= hi and count >= 1");
  }
  std::vector<double> ladder;
  if (count == 1) {
    ladder.push_back(lo);
    return ladder;
  }
  for (int i = 0; i < count; ++i) {
    ladder.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
  }
  return ladder;
}

ipca::PenaltyFamily parse_family(const std::string& name) {
  if (name == "mult-frob") return ipca::PenaltyFamily::MultiplicativeFrobenius;
  if (name == "add-frob") return ipca::PenaltyFamily::AdditiveFrobenius;
  if (name == "l1-cov") return ipca::PenaltyFamily::AdditiveL1Cov;
  if (name == "l1-corr") return ipca::PenaltyFamily::AdditiveL1Corr;
  if (name == "none") return ipca::PenaltyFamily::None;
  throw ConfigError("unknown penalty '" + name +
                    "' (expected mult-frob|add-frob|l1-cov|l1-corr|none)");
}

// Applies config-file values to options the user did not set on the command
// line, and rejects keys that match no option of the subcommand.
void merge_config(CLI::App* cmd, const std::string& config_path) {
  if (config_path.empty()) return;
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open config file '" + config_path + "'");
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
  }
  if (!cfg.is_object()) throw ConfigError("config file must hold a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    if (key == "schema_version") {
      if (!value.is_number_integer() || value.get<int>() != kSchemaVersion) {
        throw ConfigError("unsupported schema_version in config");
      }
      continue;
    }
    if (key == "command") {
      if (!value.is_string() || value.get<std::string>() != cmd->get_name()) {
        throw ConfigError("config command does not match '" + cmd->get_name() + "'");
      }
      continue;
    }
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    CLI::Option* opt = nullptr;
    try {
      opt = cmd->get_option(flag);
    } catch (const CLI::OptionNotFound&) {
      throw ConfigError("unknown config key '" + key + "' for command " + cmd->get_name());
    }
    if (opt->count() > 0) continue;  // explicit flag wins
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_boolean()) {
      text = value.get<bool>() ? "true" : "false";
    } else {
      text = value.dump();
    }
    opt->add_result(text);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ipca::IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw ipca::IoError("failed while writing '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& value) {
  write_text(path, value.dump(2) + "\n");
}

fs::path prepare_out_dir(const std::string& out) {
  if (out.empty()) throw ConfigError("--out is required");
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string family_cli_name(ipca::PenaltyFamily family) {
  return ipca::penalty_family_name(family);
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string config;
  std::string scenario = "base";
  std::uint64_t seed = 0;
  double noise_b = -1.0;  // < 0 keeps the scenario default
  std::string out;
};

int run_simulate(const SimulateArgs& args) {
  fs::path dir = prepare_out_dir(args.out);
  ipca::SimScenario scenario = ipca::make_scenario(args.scenario, args.seed);
  if (args.noise_b >= 0.0) scenario.laplace_b = args.noise_b;
  ipca::SimulatedData sim = ipca::simulate_scenario(scenario);

  json resolved;
  resolved["schema_version"] = kSchemaVersion;
  resolved["command"] = "simulate";
  resolved["scenario"] = args.scenario;
  resolved["seed"] = args.seed;
  resolved["noise_b"] = scenario.laplace_b;
  resolved["out"] = args.out;
  write_json(dir / "resolved_config.json", resolved);

  std::vector<std::string> files;
  for (int k = 0; k < sim.data.view_count(); ++k) {
    const std::string name = "view_" + std::to_string(k) + ".csv";
    ipca::write_csv(sim.data.view(k), (dir / name).string(), sim.data.sample_ids(),
                    sim.data.feature_names(k));
    files.push_back(name);
  }
  ipca::write_csv(sim.truth.joint_basis, (dir / "truth_basis.csv").string(),
                  sim.data.sample_ids());
  files.push_back("truth_basis.csv");
  if (!sim.truth.cluster_labels.empty()) {
    ipca::Matrix labels(static_cast<ipca::Index>(sim.truth.cluster_labels.size()), 1);
    for (size_t i = 0; i < sim.truth.cluster_labels.size(); ++i) {
      labels(static_cast<ipca::Index>(i), 0) = sim.truth.cluster_labels[i];
    }
    ipca::write_csv(labels, (dir / "truth_labels.csv").string(), sim.data.sample_ids(),
                    {"cluster"});
    files.push_back("truth_labels.csv");
  }

  json manifest;
  manifest["schema_version"] = kSchemaVersion;
  manifest["command"] = "simulate";
  manifest["scenario"] = {{"name", scenario.name},
                          {"n", scenario.n},
                          {"p_k", scenario.p_k},
                          {"seed", scenario.seed},
                          {"laplace_b", scenario.laplace_b},
                          {"obscure_joint_signal", scenario.obscure_joint_signal}};
  manifest["files"] = files;
  write_json(dir / "manifest.json", manifest);
  std::cout << "simulated scenario '" << scenario.name << "' into " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string config;
  std::string views;
  std::string penalty = "mult-frob";
  std::string lambda;          // comma list, or "auto"
  double lambda_sigma = -1.0;  // < 0 means unset
  bool assume_centered = false;
  int max_iter = 100;
  double rel_tol = 1e-6;
  std::string grid = "1e-3:1e3:7";
  bool greedy = false;
  double fraction = 0.05;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out;
};

ipca::PenaltySpec resolve_penalty(ipca::PenaltyFamily family, int view_count,
                                  const std::string& lambda_text, double lambda_sigma) {
  if (family == ipca::PenaltyFamily::None) return ipca::PenaltySpec::none();
  std::vector<double> lambdas = parse_doubles(lambda_text);
  if (lambdas.empty()) throw ConfigError("--lambda is required for penalized fits");
  if (lambdas.size() == 1) lambdas.assign(view_count, lambdas[0]);
  if (static_cast<int>(lambdas.size()) != view_count) {
    throw ConfigError("--lambda needs 1 or " + std::to_string(view_count) + " values");
  }
  switch (family) {
    case ipca::PenaltyFamily::MultiplicativeFrobenius:
      return ipca::PenaltySpec::multiplicative_frobenius(lambdas);
    case ipca::PenaltyFamily::AdditiveFrobenius:
      if (lambda_sigma < 0.0) throw ConfigError("--lambda-sigma is required for add-frob");
      return ipca::PenaltySpec::additive_frobenius(lambda_sigma, lambdas);
    case ipca::PenaltyFamily::AdditiveL1Cov:
      if (lambda_sigma < 0.0) throw ConfigError("--lambda-sigma is required for l1-cov");
      return ipca::PenaltySpec::additive_l1_cov(lambda_sigma, lambdas);
    case ipca::PenaltyFamily::AdditiveL1Corr:
      if (lambda_sigma < 0.0) throw ConfigError("--lambda-sigma is required for l1-corr");
      return ipca::PenaltySpec::additive_l1_corr(lambda_sigma, lambdas);
    default:
      throw ConfigError("unsupported penalty family");
  }
}

json penalty_to_json(const ipca::PenaltySpec& spec) {
  json j;
  j["family"] = family_cli_name(spec.family);
  if (spec.lambda_sigma) j["lambda_sigma"] = *spec.lambda_sigma;
  j["lambda_k"] = spec.lambda_k;
  return j;
}

ipca::MultiViewDataset load_views(const std::string& views, bool assume_centered) {
  std::vector<std::string> paths = split_list(views);
  if (paths.empty()) throw ConfigError("--views is required");
  ipca::MultiViewDataset data = ipca::load_csv(paths);
  if (!assume_centered) return data;
  std::vector<ipca::Matrix> copies;
  std::vector<std::vector<std::string>> names;
  for (int k = 0; k < data.view_count(); ++k) {
    copies.push_back(data.view(k));
    names.push_back(data.feature_names(k));
  }
  return ipca::MultiViewDataset::from_centered_views(std::move(copies), {}, data.sample_ids(),
                                                     std::move(names));
}

int run_fit(const FitArgs& args) {
  fs::path dir = prepare_out_dir(args.out);
  ipca::MultiViewDataset data = load_views(args.views, args.assume_centered);
  const int view_count = data.view_count();
  ipca::PenaltyFamily family = parse_family(args.penalty);

  ipca::FitOptions options;
  options.max_iter = args.max_iter;
  options.rel_tol = args.rel_tol;

  const bool auto_lambda = args.lambda == "auto";
  ipca::PenaltySpec spec = ipca::PenaltySpec::none();
  std::optional<ipca::TuningReport> tuned;
  if (family != ipca::PenaltyFamily::None) {
    if (auto_lambda) {
      ipca::TuningGrid grid = ipca::TuningGrid::default_grid(family, view_count);
      std::vector<double> ladder = parse_ladder(args.grid);
      if (!grid.sigma_ladder.empty()) grid.sigma_ladder = ladder;
      grid.view_ladders.assign(view_count, ladder);
      tuned = ipca::select_penalties(data, grid, args.greedy ? ipca::TuneMode::Greedy
                                                              : ipca::TuneMode::Full,
                                     args.fraction, args.seed, options, args.jobs);
      spec = tuned->best();
      std::cout << "auto-selected penalty: " << penalty_to_json(spec).dump() << "\n";
    } else {
      spec = resolve_penalty(family, view_count, args.lambda, args.lambda_sigma);
    }
  }

  json resolved;
  resolved["schema_version"] = kSchemaVersion;
  resolved["command"] = "fit";
  resolved["views"] = split_list(args.views);
  resolved["penalty"] = args.penalty;
  resolved["lambda"] = args.lambda;
  if (args.lambda_sigma >= 0.0) resolved["lambda_sigma"] = args.lambda_sigma;
  resolved["assume_centered"] = args.assume_centered;
  resolved["max_iter"] = args.max_iter;
  resolved["rel_tol"] = args.rel_tol;
  resolved["grid"] = args.grid;
  resolved["greedy"] = args.greedy;
  resolved["fraction"] = args.fraction;
  resolved["seed"] = args.seed;
  resolved["jobs"] = args.jobs;
  resolved["out"] = args.out;
  write_json(dir / "resolved_config.json", resolved);

  ipca::CovarianceFit fit = family == ipca::PenaltyFamily::None
                                ? ipca::fit_unpenalized(data, data.centered(), options)
                                : ipca::fit(data, spec, options);
  ipca::IpcaModel model = ipca::extract(fit);

  ipca::write_csv(fit.sigma_hat.mat(), (dir / "sigma_hat.csv").string(), data.sample_ids(),
                  data.sample_ids());
  std::vector<std::string> pc_names(data.n());
  for (ipca::Index i = 0; i < data.n(); ++i) pc_names[i] = "pc" + std::to_string(i + 1);
  ipca::write_csv(model.scores, (dir / "scores.csv").string(), data.sample_ids(), pc_names);
  ipca::write_csv(model.sigma_eigenvalues, (dir / "sigma_eigenvalues.csv").string(), pc_names,
                  {"eigenvalue"});
  for (int k = 0; k < view_count; ++k) {
    const std::string tag = std::to_string(k);
    ipca::write_csv(fit.delta_hat[k].mat(), (dir / ("delta_hat_" + tag + ".csv")).string(),
                    data.feature_names(k), data.feature_names(k));
    std::vector<std::string> load_names(data.view_dim(k));
    for (ipca::Index j = 0; j < data.view_dim(k); ++j) {
      load_names[j] = "pc" + std::to_string(j + 1);
    }
    ipca::write_csv(model.loadings[k], (dir / ("loadings_" + tag + ".csv")).string(),
                    data.feature_names(k), load_names);
    ipca::write_csv(model.delta_eigenvalues[k],
                    (dir / ("delta_eigenvalues_" + tag + ".csv")).string(), load_names,
                    {"eigenvalue"});
    ipca::write_csv(fit.mu_hat[k], (dir / ("mu_hat_" + tag + ".csv")).string(),
                    data.feature_names(k), {"mean"});
  }
  ipca::Matrix trace(static_cast<ipca::Index>(fit.objective_trace.size()), 1);
  for (size_t i = 0; i < fit.objective_trace.size(); ++i) {
    trace(static_cast<ipca::Index>(i), 0) = fit.objective_trace[i];
  }
  ipca::write_csv(trace, (dir / "objective_trace.csv").string(), {}, {"objective"});

  json convergence;
  convergence["schema_version"] = kSchemaVersion;
  convergence["converged"] = fit.converged;
  convergence["iterations"] = fit.iterations;
  convergence["penalty"] = penalty_to_json(fit.penalty);
  convergence["sigma_scale"] = fit.sigma_scale;
  convergence["n"] = data.n();
  json pk = json::array();
  for (int k = 0; k < view_count; ++k) pk.push_back(data.view_dim(k));
  convergence["p_k"] = pk;
  if (tuned) {
    convergence["tuning"] = {{"mode", args.greedy ? "greedy" : "full"},
                             {"seed", tuned->seed},
                             {"fraction", tuned->fraction},
                             {"best_error", tuned->errors[tuned->best_index]},
                             {"evaluations", tuned->errors.size()}};
  }
  write_json(dir / "convergence.json", convergence);
  std::cout << "fit " << family_cli_name(fit.penalty.family) << ": converged="
            << (fit.converged ? "true" : "false") << " iterations=" << fit.iterations << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// scores

struct ScoresArgs {
  std::string config;
  std::string fit_dir;
  int m = 2;
  std::string out;
};

int run_scores(const ScoresArgs& args) {
  if (args.fit_dir.empty()) throw ConfigError("--fit is required");
  if (args.out.empty()) throw ConfigError("--out is required");
  ipca::CsvMatrix scores = ipca::read_csv_matrix((fs::path(args.fit_dir) / "scores.csv").string());
  if (args.m < 1 || args.m > scores.values.cols()) {
    throw ConfigError("--m outside [1, " + std::to_string(scores.values.cols()) + "]");
  }
  std::vector<std::string> col_names(scores.col_names.begin(), scores.col_names.begin() + args.m);
  ipca::write_csv(scores.values.leftCols(args.m), args.out, scores.row_ids, col_names);
  std::cout << "wrote top-" << args.m << " scores to " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// pve

struct PveArgs {
  std::string config;
  std::string views;
  std::string fit_dir;
  int m = 0;  // 0: up to min(n, p_k) per view
  std::string out;
};

int run_pve(const PveArgs& args) {
  if (args.fit_dir.empty()) throw ConfigError("--fit is required");
  fs::path dir = prepare_out_dir(args.out);
  fs::path fit_dir(args.fit_dir);
  ipca::MultiViewDataset raw = load_views(args.views, false);

  // Center with the fitted means so the table matches the fit.
  std::vector<ipca::Matrix> centered_views;
  std::vector<ipca::Vector> means;
  for (int k = 0; k < raw.view_count(); ++k) {
    ipca::CsvMatrix mu =
        ipca::read_csv_matrix((fit_dir / ("mu_hat_" + std::to_string(k) + ".csv")).string());
    if (mu.values.rows() != raw.view_dim(k)) {
      throw ipca::ShapeError("fitted means do not match view " + std::to_string(k));
    }
    ipca::Vector mu_k = mu.values.col(0);
    centered_views.push_back(raw.view(k).rowwise() - mu_k.transpose());
    means.push_back(std::move(mu_k));
  }
  ipca::MultiViewDataset data = ipca::MultiViewDataset::from_centered_views(
      std::move(centered_views), std::move(means), raw.sample_ids());

  ipca::IpcaModel model;
  ipca::CsvMatrix scores = ipca::read_csv_matrix((fit_dir / "scores.csv").string());
  model.scores = scores.values;
  ipca::CsvMatrix sig_vals = ipca::read_csv_matrix((fit_dir / "sigma_eigenvalues.csv").string());
  model.sigma_eigenvalues = sig_vals.values.col(0);
  for (int k = 0; k < raw.view_count(); ++k) {
    ipca::CsvMatrix load =
        ipca::read_csv_matrix((fit_dir / ("loadings_" + std::to_string(k) + ".csv")).string());
    model.loadings.push_back(load.values);
    ipca::CsvMatrix vals = ipca::read_csv_matrix(
        (fit_dir / ("delta_eigenvalues_" + std::to_string(k) + ".csv")).string());
    model.delta_eigenvalues.push_back(vals.values.col(0));
  }

  json resolved;
  resolved["schema_version"] = kSchemaVersion;
  resolved["command"] = "pve";
  resolved["views"] = split_list(args.views);
  resolved["fit"] = args.fit_dir;
  resolved["m"] = args.m;
  resolved["out"] = args.out;
  write_json(dir / "resolved_config.json", resolved);

  std::ostringstream table;
  table << "view,m,cumulative,marginal\n";
  for (int k = 0; k < data.view_count(); ++k) {
    const int limit = static_cast<int>(std::min(data.n(), data.view_dim(k)));
    const int top = args.m > 0 ? std::min(args.m, limit) : limit;
    for (int m = 1; m <= top; ++m) {
      table << k << ',' << m << ',' << format_double(ipca::pve(data, model, k, m)) << ','
            << format_double(ipca::mpve(data, model, k, m)) << '\n';
    }
  }
  write_text(dir / "pve.csv", table.str());
  std::cout << "wrote " << (dir / "pve.csv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// tune

struct TuneArgs {
  std::string config;
  std::string views;
  std::string penalty = "mult-frob";
  std::string grid = "1e-3:1e3:7";
  bool greedy = false;
  double fraction = 0.05;
  std::uint64_t seed = 0;
  int jobs = 1;
  int max_iter = 100;
  double rel_tol = 1e-6;
  std::string out;
};

int run_tune(const TuneArgs& args) {
  fs::path dir = prepare_out_dir(args.out);
  ipca::MultiViewDataset data = load_views(args.views, false);
  ipca::PenaltyFamily family = parse_family(args.penalty);
  if (family == ipca::PenaltyFamily::None) {
    throw ConfigError("nothing to tune for --penalty none");
  }

  ipca::TuningGrid grid = ipca::TuningGrid::default_grid(family, data.view_count());
  std::vector<double> ladder = parse_ladder(args.grid);
  if (!grid.sigma_ladder.empty()) grid.sigma_ladder = ladder;
  grid.view_ladders.assign(data.view_count(), ladder);

  ipca::FitOptions options;
  options.max_iter = args.max_iter;
  options.rel_tol = args.rel_tol;

  json resolved;
  resolved["schema_version"] = kSchemaVersion;
  resolved["command"] = "tune";
  resolved["views"] = split_list(args.views);
  resolved["penalty"] = args.penalty;
  resolved["grid"] = args.grid;
  resolved["greedy"] = args.greedy;
  resolved["fraction"] = args.fraction;
  resolved["seed"] = args.seed;
  resolved["jobs"] = args.jobs;
  resolved["max_iter"] = args.max_iter;
  resolved["rel_tol"] = args.rel_tol;
  resolved["out"] = args.out;
  write_json(dir / "resolved_config.json", resolved);

  ipca::TuningReport report = ipca::select_penalties(
      data, grid, args.greedy ? ipca::TuneMode::Greedy : ipca::TuneMode::Full, args.fraction,
      args.seed, options, args.jobs);

  const bool has_sigma = family != ipca::PenaltyFamily::MultiplicativeFrobenius;
  std::ostringstream table;
  table << "index";
  if (has_sigma) table << ",lambda_sigma";
  for (int k = 0; k < data.view_count(); ++k) table << ",lambda_" << k;
  table << ",error\n";
  for (size_t i = 0; i < report.grid.size(); ++i) {
    table << i;
    if (has_sigma) table << ',' << format_double(*report.grid[i].lambda_sigma);
    for (double l : report.grid[i].lambda_k) table << ',' << format_double(l);
    table << ',' << format_double(report.errors[i]) << '\n';
  }
  write_text(dir / "report.csv", table.str());

  json summary;
  summary["schema_version"] = kSchemaVersion;
  summary["mode"] = args.greedy ? "greedy" : "full";
  summary["seed"] = report.seed;
  summary["fraction"] = report.fraction;
  summary["best_index"] = report.best_index;
  summary["best_error"] = report.errors[report.best_index];
  summary["best"] = penalty_to_json(report.best());
  summary["evaluations"] = report.errors.size();
  write_json(dir / "summary.json", summary);
  std::cout << "tuned " << args.penalty << ": best error "
            << report.errors[report.best_index] << " at index " << report.best_index << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// benchmark

struct BenchmarkArgs {
  std::string config;
  std::string scenario = "base-desk";
  int trials = 5;
  std::string methods = "mult-frob,concat-pca,mfa";
  int d = 0;  // 0: dimension of the simulated joint basis
  std::uint64_t seed = 0;
  int jobs = 1;
  double noise_b = -1.0;
  std::string grid = "1e-3:1e3:7";
  std::string lambda;          // optional fixed per-view penalties
  double lambda_sigma = -1.0;  // optional fixed shared penalty
  int max_iter = 100;
  double rel_tol = 1e-6;
  double fraction = 0.05;
  std::string out;
};

bool is_ipca_method(const std::string& method) {
  return method == "mult-frob" || method == "add-frob" || method == "l1-cov" ||
         method == "l1-corr";
}

ipca::Matrix benchmark_basis(const std::string& method, const ipca::MultiViewDataset& data,
                             int d, const BenchmarkArgs& args, std::uint64_t trial_seed) {
  if (method == "concat-pca") return ipca::baseline_concatenated_pca(data, d);
  if (method == "mfa") return ipca::baseline_mfa(data, d);
  if (method.rfind("pca-", 0) == 0) {
    const int k = std::stoi(method.substr(4));
    return ipca::baseline_individual_pca(data, k, d);
  }
  if (!is_ipca_method(method)) {
    throw ConfigError("unknown method '" + method + "'");
  }
  ipca::PenaltyFamily family = parse_family(method);
  ipca::FitOptions options;
  options.max_iter = args.max_iter;
  options.rel_tol = args.rel_tol;

  ipca::PenaltySpec spec = ipca::PenaltySpec::none();
  if (!args.lambda.empty()) {
    spec = resolve_penalty(family, data.view_count(), args.lambda, args.lambda_sigma);
  } else {
    ipca::TuningGrid grid = ipca::TuningGrid::default_grid(family, data.view_count());
    std::vector<double> ladder = parse_ladder(args.grid);
    if (!grid.sigma_ladder.empty()) grid.sigma_ladder = ladder;
    grid.view_ladders.assign(data.view_count(), ladder);
    ipca::TuningReport report = ipca::select_penalties(
        data, grid, ipca::TuneMode::Greedy, args.fraction,
        ipca::substream_seed(trial_seed, "tune-" + method), options, 1);
    spec = report.best();
  }
  ipca::CovarianceFit fit = ipca::fit(data, spec, options);
  return ipca::top_scores(ipca::extract(fit), d);
}

int run_benchmark(const BenchmarkArgs& args) {
  fs::path dir = prepare_out_dir(args.out);
  std::vector<std::string> methods = split_list(args.methods);
  if (methods.empty()) throw ConfigError("--methods is required");
  if (args.trials < 1) throw ConfigError("--trials must be positive");

  ipca::SimScenario base = ipca::make_scenario(args.scenario, args.seed);
  if (args.noise_b >= 0.0) base.laplace_b = args.noise_b;

  json resolved;
  resolved["schema_version"] = kSchemaVersion;
  resolved["command"] = "benchmark";
  resolved["scenario"] = args.scenario;
  resolved["trials"] = args.trials;
  resolved["methods"] = methods;
  resolved["d"] = args.d;
  resolved["seed"] = args.seed;
  resolved["jobs"] = args.jobs;
  resolved["noise_b"] = base.laplace_b;
  resolved["grid"] = args.grid;
  resolved["lambda"] = args.lambda;
  if (args.lambda_sigma >= 0.0) resolved["lambda_sigma"] = args.lambda_sigma;
  resolved["max_iter"] = args.max_iter;
  resolved["rel_tol"] = args.rel_tol;
  resolved["fraction"] = args.fraction;
  resolved["out"] = args.out;
  write_json(dir / "resolved_config.json", resolved);

  struct Row {
    std::string method;
    std::uint64_t seed;
    double error;
  };
  std::vector<Row> rows(methods.size() * args.trials);

  std::atomic<int> next{0};
  const int total = args.trials;
  const int workers = std::max(1, std::min(args.jobs, total));
  auto run_trial = [&](int t) {
    ipca::SimScenario scenario = base;
    scenario.seed = args.seed + static_cast<std::uint64_t>(t);
    ipca::SimulatedData sim = ipca::simulate_scenario(scenario);
    const int d = args.d > 0 ? args.d : static_cast<int>(sim.truth.joint_basis.cols());
    for (size_t m = 0; m < methods.size(); ++m) {
      ipca::Matrix basis = benchmark_basis(methods[m], sim.data, d, args, scenario.seed);
      const double err =
          ipca::subspace_recovery_error(sim.truth.joint_basis.leftCols(d), basis);
      rows[t * methods.size() + m] = {methods[m], scenario.seed, err};
    }
  };
  if (workers == 1) {
    for (int t = 0; t < total; ++t) run_trial(t);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int t = next.fetch_add(1); t < total; t = next.fetch_add(1)) run_trial(t);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::ostringstream table;
  table << "scenario,method,seed,error\n";
  for (const Row& row : rows) {
    table << args.scenario << ',' << row.method << ',' << row.seed << ','
          << format_double(row.error) << '\n';
  }
  write_text(dir / "results.csv", table.str());

  json summary;
  summary["schema_version"] = kSchemaVersion;
  summary["scenario"] = {{"name", base.name},
                         {"n", base.n},
                         {"p_k", base.p_k},
                         {"laplace_b", base.laplace_b},
                         {"obscure_joint_signal", base.obscure_joint_signal}};
  summary["trials"] = args.trials;
  json per_method = json::object();
  for (const std::string& method : methods) {
    double sum = 0.0, sum_sq = 0.0;
    int count = 0;
    for (const Row& row : rows) {
      if (row.method != method) continue;
      sum += row.error;
      sum_sq += row.error * row.error;
      ++count;
    }
    const double mean = sum / count;
    const double var = count > 1 ? (sum_sq - count * mean * mean) / (count - 1) : 0.0;
    per_method[method] = {{"mean", mean}, {"sd", std::sqrt(std::max(0.0, var))},
                          {"trials", count}};
  }
  summary["methods"] = per_method;
  write_json(dir / "summary.json", summary);
  std::cout << "benchmark complete: " << rows.size() << " rows in "
            << (dir / "results.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"integrated principal components toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim_args;
  CLI::App* sim = app.add_subcommand("simulate", "generate a named scenario");
  sim->add_option("--config", sim_args.config, "JSON config file");
  sim->add_option("--scenario", sim_args.scenario, "base|base-desk|sparse|sparse-large");
  sim->add_option("--seed", sim_args.seed, "random seed");
  sim->add_option("--noise-b", sim_args.noise_b, "Laplace noise scale override");
  sim->add_option("--out", sim_args.out, "output directory");

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand("fit", "estimate covariances and components");
  fit->add_option("--config", fit_args.config, "JSON config file");
  fit->add_option("--views", fit_args.views, "comma-separated view CSV paths");
  fit->add_option("--penalty", fit_args.penalty, "mult-frob|add-frob|l1-cov|l1-corr|none");
  fit->add_option("--lambda", fit_args.lambda, "per-view penalties, or 'auto'");
  fit->add_option("--lambda-sigma", fit_args.lambda_sigma, "shared penalty (additive families)");
  fit->add_flag("--assume-centered", fit_args.assume_centered,
                "treat inputs as pre-centered with known means");
  fit->add_option("--max-iter", fit_args.max_iter, "sweep limit");
  fit->add_option("--rel-tol", fit_args.rel_tol, "relative objective tolerance");
  fit->add_option("--grid", fit_args.grid, "lo:hi:count ladder for --lambda auto");
  fit->add_flag("--greedy", fit_args.greedy, "greedy parameter sweeps for --lambda auto");
  fit->add_option("--fraction", fit_args.fraction, "held-out fraction for --lambda auto");
  fit->add_option("--seed", fit_args.seed, "random seed");
  fit->add_option("--jobs", fit_args.jobs, "worker threads");
  fit->add_option("--out", fit_args.out, "output directory");

  ScoresArgs scores_args;
  CLI::App* scores = app.add_subcommand("scores", "slice top components from a fit");
  scores->add_option("--config", scores_args.config, "JSON config file");
  scores->add_option("--fit", scores_args.fit_dir, "fit output directory");
  scores->add_option("--m", scores_args.m, "number of components");
  scores->add_option("--out", scores_args.out, "output CSV path");

  PveArgs pve_args;
  CLI::App* pve = app.add_subcommand("pve", "variance-explained table for a fit");
  pve->add_option("--config", pve_args.config, "JSON config file");
  pve->add_option("--views", pve_args.views, "comma-separated view CSV paths");
  pve->add_option("--fit", pve_args.fit_dir, "fit output directory");
  pve->add_option("--m", pve_args.m, "largest component count (0 = all)");
  pve->add_option("--out", pve_args.out, "output directory");

  TuneArgs tune_args;
  CLI::App* tune = app.add_subcommand("tune", "select penalties by held-out imputation");
  tune->add_option("--config", tune_args.config, "JSON config file");
  tune->add_option("--views", tune_args.views, "comma-separated view CSV paths");
  tune->add_option("--penalty", tune_args.penalty, "penalty family");
  tune->add_option("--grid", tune_args.grid, "lo:hi:count ladder per parameter");
  tune->add_flag("--greedy", tune_args.greedy, "sweep parameters one at a time");
  tune->add_option("--fraction", tune_args.fraction, "held-out fraction");
  tune->add_option("--seed", tune_args.seed, "random seed");
  tune->add_option("--jobs", tune_args.jobs, "worker threads");
  tune->add_option("--max-iter", tune_args.max_iter, "sweep limit per fit");
  tune->add_option("--rel-tol", tune_args.rel_tol, "relative objective tolerance");
  tune->add_option("--out", tune_args.out, "output directory");

  BenchmarkArgs bench_args;
  CLI::App* bench = app.add_subcommand("benchmark", "subspace recovery across methods");
  bench->add_option("--config", bench_args.config, "JSON config file");
  bench->add_option("--scenario", bench_args.scenario, "scenario name");
  bench->add_option("--trials", bench_args.trials, "seed replicates");
  bench->add_option("--methods", bench_args.methods, "comma-separated method list");
  bench->add_option("--d", bench_args.d, "subspace dimension (0 = truth)");
  bench->add_option("--seed", bench_args.seed, "base seed");
  bench->add_option("--jobs", bench_args.jobs, "worker threads");
  bench->add_option("--noise-b", bench_args.noise_b, "Laplace noise scale override");
  bench->add_option("--grid", bench_args.grid, "tuning ladder for the model methods");
  bench->add_option("--lambda", bench_args.lambda, "fixed per-view penalties (skip tuning)");
  bench->add_option("--lambda-sigma", bench_args.lambda_sigma, "fixed shared penalty");
  bench->add_option("--max-iter", bench_args.max_iter, "sweep limit per fit");
  bench->add_option("--rel-tol", bench_args.rel_tol, "relative objective tolerance");
  bench->add_option("--fraction", bench_args.fraction, "held-out fraction for tuning");
  bench->add_option("--out", bench_args.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sim->parsed()) {
      merge_config(sim, sim_args.config);
      return run_simulate(sim_args);
    }
    if (fit->parsed()) {
      merge_config(fit, fit_args.config);
      return run_fit(fit_args);
    }
    if (scores->parsed()) {
      merge_config(scores, scores_args.config);
      return run_scores(scores_args);
    }
    if (pve->parsed()) {
      merge_config(pve, pve_args.config);
      return run_pve(pve_args);
    }
    if (tune->parsed()) {
      merge_config(tune, tune_args.config);
      return run_tune(tune_args);
    }
    if (bench->parsed()) {
      merge_config(bench, bench_args.config);
      return run_benchmark(bench_args);
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const ipca::InvalidInput& e) {
    // Bad scenario names and malformed requests are configuration mistakes.
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const ipca::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
