// Command-line front end: tune / fit / simulate / benchmark / generate.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sppca/sppca.hpp"

namespace fs = std::filesystem;
using namespace sppca;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

// Raised for argument combinations that parse but make no sense.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string input;
  double alpha = 0.05;
  double ell = 0.20;
  std::size_t grid_size = 0;
  double tol = 1e-8;
  int max_iter = 500;
  bool full_mahalanobis = false;
  bool no_standardize = false;
  int k = 3;
  double tau = 0.0;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out_dir = ".";
  std::string criterion = "slope";

  // fit
  std::optional<double> a;
  std::string tuning_path;

  // simulate / generate
  Index n = 250;
  Index p = 50;
  std::vector<double> nu{10.0};
  std::vector<double> pi{0.0};
  std::vector<double> c{0.0};
  int replicates = 20;
  std::vector<std::string> methods{"sppca_astar", "sppca_opt", "tme"};
  bool separable = false;
  double grid_lo = 0.2;
  double grid_hi = 3.0;
  std::optional<double> truncate_radius;

  WeightSpec weight_spec() const { return {alpha, WeightKind::HardThresholdExponential}; }
  FitOptions fit_options() const { return {tol, max_iter, !full_mahalanobis}; }

  SelectionCriterion selection() const {
    if (criterion == "slope") return SelectionCriterion::SlopeMinimum;
    if (criterion == "curve") return SelectionCriterion::CurveMinimum;
    throw UsageError("--criterion must be 'slope' or 'curve'");
  }
};

void print_error(const std::string& kind, const std::string& message) {
  const json err = {{"error", {{"kind", kind}, {"message", message}}}};
  std::cerr << err.dump() << '\n';
}

fs::path out_path(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  return fs::path(cfg.out_dir) / name;
}

void write_json(const RunConfig& cfg, const std::string& name, const json& j) {
  write_file(out_path(cfg, name).string(), j.dump(2) + "\n");
}

DataSet load_input(const RunConfig& cfg) {
  if (cfg.input.empty()) throw UsageError("an input CSV is required");
  return load_csv(cfg.input, !cfg.no_standardize);
}

TuneOutcome run_tune(const DataSet& data, const RunConfig& cfg) {
  TuneOptions t;
  t.ell = cfg.ell;
  t.grid_size = cfg.grid_size;
  t.criterion = cfg.selection();
  t.threads = cfg.threads;
  return tune(data, cfg.weight_spec(), cfg.fit_options(), t);
}

int cmd_tune(const RunConfig& cfg) {
  const DataSet data = load_input(cfg);
  const TuneOutcome out = run_tune(data, cfg);
  write_json(cfg, "ar_curve.json", ar_curve_json(out.curve));
  write_json(cfg, "tuning.json", tuning_json(out.result, out.spline));
  if (!out.spline.warning.empty()) std::cerr << "warning: " << out.spline.warning << '\n';
  return 0;
}

int cmd_fit(const RunConfig& cfg) {
  const DataSet data = load_input(cfg);
  if (cfg.k < 1 || cfg.k > data.p()) {
    throw UsageError("--k must lie in [1, " + std::to_string(data.p()) + "]");
  }
  double a = 0.0;
  if (cfg.a) {
    a = *cfg.a;
  } else if (!cfg.tuning_path.empty()) {
    a = json::parse(read_file(cfg.tuning_path)).at("a_star").get<double>();
  } else {
    a = run_tune(data, cfg).result.a_star;
  }
  if (!(a > 0.0)) throw UsageError("scale a must be positive");
  const WeightSpec spec = cfg.weight_spec();
  const FitOptions fo = cfg.fit_options();
  const FitResult fit = cfg.tau > 0.0 ? fit_regularized(data, a, cfg.tau, spec, fo)
                                      : fit_sppca(data, a, scaled_init(initial_estimate(data), a), spec, fo);
  if (!fit.converged) {
    std::cerr << "warning: fit did not converge in " << fit.iterations << " iterations (last change "
              << fit.residual << ")\n";
  }
  const PCAModel model = pca(fit.ls, cfg.k);
  write_json(cfg, "model.json", model_json(fit, model, spec));
  write_file(out_path(cfg, "scores.csv").string(), scores_csv(data, fit, model));
  write_file(out_path(cfg, "weights.csv").string(), weights_csv(data, fit, spec));
  return 0;
}

std::vector<SimConfig> config_grid(const RunConfig& cfg) {
  if (cfg.nu.empty() || cfg.pi.empty() || cfg.c.empty()) throw UsageError("config grid lists must be nonempty");
  std::vector<SimConfig> grid;
  for (double nu : cfg.nu) {
    for (double pi : cfg.pi) {
      for (double c : cfg.c) {
        SimConfig s;
        s.n = cfg.n;
        s.p = cfg.p;
        s.k = cfg.k;
        s.nu = nu;
        s.pi = pi;
        s.c = c;
        s.seed = cfg.seed;
        s.truncate_radius = cfg.truncate_radius;
        try {
          s.validate();
        } catch (const Error& e) {
          throw UsageError(std::string("invalid config grid: ") + e.what());
        }
        grid.push_back(s);
      }
    }
  }
  return grid;
}

ExperimentOptions experiment_options(const RunConfig& cfg) {
  ExperimentOptions o;
  o.methods.clear();
  try {
    for (const auto& m : cfg.methods) o.methods.push_back(parse_method(m));
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (o.methods.empty()) throw UsageError("at least one method is required");
  if (cfg.replicates < 1) throw UsageError("--replicates must be at least 1");
  if (!(cfg.grid_hi > cfg.grid_lo && cfg.grid_lo > 0.0)) throw UsageError("grid bounds must satisfy 0 < lo < hi");
  o.replicates = cfg.replicates;
  o.spec = cfg.weight_spec();
  o.fit = cfg.fit_options();
  o.grid_points = cfg.grid_size ? cfg.grid_size : 50;
  if (o.grid_points < 4) throw UsageError("--grid-size must be at least 4");
  o.grid_lo = cfg.grid_lo;
  o.grid_hi = cfg.grid_hi;
  o.criterion = cfg.selection();
  o.separable = cfg.separable;
  o.threads = cfg.threads;
  return o;
}

int cmd_simulate(const RunConfig& cfg, bool timed) {
  const auto grid = config_grid(cfg);
  const ExperimentOptions opts = experiment_options(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentTable table = run_experiment(grid, opts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_file(out_path(cfg, "experiment.csv").string(), experiment_csv(table));
  write_json(cfg, "experiment.json", experiment_json(table));
  if (timed) {
    write_json(cfg, "timing.json",
               {{"seconds", secs},
                {"configs", grid.size()},
                {"replicates", cfg.replicates},
                {"threads", resolve_threads(cfg.threads)}});
  }
  for (const auto& row : table.rows) {
    if (!row.valid) {
      std::cerr << "warning: config (nu=" << row.config.nu << ", pi=" << row.config.pi << ", c=" << row.config.c
                << ") method " << method_name(row.method) << " failed on " << row.n_fail << " replicates\n";
    }
  }
  return 0;
}

int cmd_generate(const RunConfig& cfg) {
  if (cfg.nu.size() != 1 || cfg.pi.size() != 1 || cfg.c.size() != 1) {
    throw UsageError("generate takes a single nu, pi and c");
  }
  const SimConfig s = config_grid(cfg).front();
  const auto [data, truth] = cfg.separable ? gen_separable_mixture(s) : gen_mixture(s);
  write_file(out_path(cfg, "data.csv").string(), matrix_csv(data.X, {}));
  json labels = json::array();
  for (auto l : truth.labels) labels.push_back(l == Origin::Contaminant ? 1 : 0);
  json gamma = json::array();
  for (Index j = 0; j < truth.Gamma_k.cols(); ++j) gamma.push_back(to_json_array(VectorXd(truth.Gamma_k.col(j))));
  write_json(cfg, "truth.json",
             {{"eigenvalues", to_json_array(truth.eigenvalues)},
              {"gamma_k", gamma},
              {"mu_out", to_json_array(truth.mu_out)},
              {"contaminant", labels}});
  return 0;
}

void add_common(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--alpha", cfg.alpha, "Weight threshold alpha in (0,1)")->capture_default_str();
  sub->add_option("--tol", cfg.tol, "Relative-change tolerance")->capture_default_str();
  sub->add_option("--max-iter", cfg.max_iter, "Fixed-point iteration cap")->capture_default_str();
  sub->add_flag("--full-mahalanobis", cfg.full_mahalanobis, "Use the full scatter in distances");
  sub->add_option("--threads", cfg.threads, "Worker threads (default: ROBUST_SCATTER_THREADS or 1)");
  sub->add_option("--out-dir", cfg.out_dir, "Output directory")->capture_default_str();
  sub->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  sub->add_option("--criterion", cfg.criterion, "a* rule: slope or curve")->capture_default_str();
  sub->add_option("--grid-size", cfg.grid_size, "Grid size m (default n/5, at least 10; simulate: 50)");
  sub->add_option("--k", cfg.k, "Number of principal components")->capture_default_str();
}

void add_data_input(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("input", cfg.input, "CSV file with a header row")->required();
  sub->add_flag("--no-standardize", cfg.no_standardize, "Skip column standardization");
  sub->add_option("--ell", cfg.ell, "Lower active-ratio bound for the grid")->capture_default_str();
}

void add_simulation(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--n", cfg.n, "Sample size")->capture_default_str();
  sub->add_option("--p", cfg.p, "Dimension")->capture_default_str();
  sub->add_option("--nu", cfg.nu, "Main t degrees of freedom (list)")->capture_default_str();
  sub->add_option("--pi", cfg.pi, "Contamination proportion (list)")->capture_default_str();
  sub->add_option("--c", cfg.c, "Separation multiplier (list)")->capture_default_str();
  sub->add_flag("--separable", cfg.separable, "Truncate the contaminant to a ball around its center");
  sub->add_option("--radius", cfg.truncate_radius, "Truncation radius (default 0.5 c sqrt(p) with --separable)");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"Semiparametric robust PCA: tuning, fitting and simulation"};
  app.require_subcommand(1);

  auto* tune_cmd = app.add_subcommand("tune", "Active-ratio curve and a* selection");
  add_data_input(tune_cmd, cfg);
  add_common(tune_cmd, cfg);

  auto* fit_cmd = app.add_subcommand("fit", "Fit at a given or tuned scale and write the PCA model");
  fit_cmd->alias("pca");
  add_data_input(fit_cmd, cfg);
  add_common(fit_cmd, cfg);
  fit_cmd->add_option("--a", cfg.a, "Initialization scale a");
  fit_cmd->add_option("--tuning", cfg.tuning_path, "Take a from a tuning.json");
  fit_cmd->add_option("--tau", cfg.tau, "Ridge regularization tau >= 0")->capture_default_str();

  auto* sim_cmd = app.add_subcommand("simulate", "Replicate experiment over a config grid");
  auto* bench_cmd = app.add_subcommand("benchmark", "simulate plus wall-clock timing");
  for (auto* sub : {sim_cmd, bench_cmd}) {
    add_common(sub, cfg);
    add_simulation(sub, cfg);
    sub->add_option("--replicates", cfg.replicates, "Replicates per config")->capture_default_str();
    sub->add_option("--methods", cfg.methods, "sppca_astar, sppca_opt, tme")->capture_default_str();
    sub->add_option("--grid-lo", cfg.grid_lo, "SPPCA grid start, in units of p")->capture_default_str();
    sub->add_option("--grid-hi", cfg.grid_hi, "SPPCA grid end, in units of p")->capture_default_str();
  }

  auto* gen_cmd = app.add_subcommand("generate", "Write one simulated data set as CSV");
  add_common(gen_cmd, cfg);
  add_simulation(gen_cmd, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", e.what());
    return kExitUsage;
  }

  try {
    if (cfg.threads < 0) throw UsageError("--threads must be nonnegative");
    if (*tune_cmd) return cmd_tune(cfg);
    if (*fit_cmd) return cmd_fit(cfg);
    if (*sim_cmd) return cmd_simulate(cfg, false);
    if (*bench_cmd) return cmd_simulate(cfg, true);
    if (*gen_cmd) return cmd_generate(cfg);
  } catch (const UsageError& e) {
    print_error("UsageError", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    print_error(e.kind(), e.what());
    return kExitError;
  } catch (const json::exception& e) {
    print_error("ParseError", e.what());
    return kExitError;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what());
    return kExitError;
  }
  return kExitUsage;
}
