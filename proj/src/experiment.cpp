#include "modered/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>

#include "modered/csv.hpp"
#include "modered/errors.hpp"
#include "modered/hermite.hpp"
#include "modered/kv.hpp"
#include "modered/mz.hpp"

namespace modered {

namespace fs = std::filesystem;

namespace {

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

// True when `a` is a positive integer multiple of `b` (to grid tolerance).
bool is_multiple(double a, double b) {
  if (!(a > 0) || !(b > 0)) return false;
  const double r = a / b;
  const double k = std::round(r);
  return k >= 1.0 && std::fabs(r - k) <= 1e-9 * k;
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

}  // namespace

// ---------------------------------------------------------------------------
// ExperimentSpec
// ---------------------------------------------------------------------------

void ExperimentSpec::validate() const {
  config.validate();
  require(!out_dir.empty(), ErrorCode::invalid_argument,
          "spec: out_dir must not be empty");
  require(threads >= 0, ErrorCode::invalid_argument,
          "spec: threads must be >= 0");
  require(n_truth >= 2 && n_kernel >= 2 && n_amrs >= 2 && n_mz >= 2 &&
              n_ou_fit >= 2,
          ErrorCode::invalid_argument,
          "spec: every ensemble size must be at least 2");
  require(is_multiple(lag_step, dt_full) && is_multiple(lag_step, dt_reduced) &&
              is_multiple(lag_step, dt_mz),
          ErrorCode::grid_mismatch,
          "spec: every integrator step must divide lag_step");
  require(is_multiple(lag_max, lag_step), ErrorCode::grid_mismatch,
          "spec: lag_step must divide lag_max");
  require(is_multiple(kernel_step, dt_full), ErrorCode::grid_mismatch,
          "spec: dt_full must divide kernel_step");
  require(is_multiple(kernel_step, dt_mz), ErrorCode::grid_mismatch,
          "spec: dt_mz must divide kernel_step");
  require(is_multiple(t0, kernel_step), ErrorCode::grid_mismatch,
          "spec: kernel_step must divide t0");
  require(is_multiple(noise_horizon, kernel_step), ErrorCode::grid_mismatch,
          "spec: kernel_step must divide noise_horizon");
  require(noise_horizon >= t0 - 1e-12, ErrorCode::invalid_argument,
          "spec: noise_horizon must cover t0");
  require(alpha >= 0, ErrorCode::invalid_argument,
          "spec: alpha must be >= 0");
}

std::string ExperimentSpec::to_text() const {
  KeyValueFile kv;
  kv.comment("experiment configuration");
  kv.set("case", to_string(config.model_case));
  kv.set("lambda_a", config.lambda_a);
  kv.set("lambda_m", config.lambda_m);
  kv.set("n_modes", static_cast<std::int64_t>(config.n_modes));
  kv.set("n_active", static_cast<std::int64_t>(config.n_active));
  kv.set("beta", config.beta);
  kv.set("seed", seed);
  kv.set("threads", static_cast<std::int64_t>(threads));
  kv.set("out_dir", out_dir);
  kv.set("procedure", to_string(procedure));
  kv.set("c1", c1);
  kv.set("n_ou_fit", static_cast<std::uint64_t>(n_ou_fit));
  kv.set("n_truth", static_cast<std::uint64_t>(n_truth));
  kv.set("n_kernel", static_cast<std::uint64_t>(n_kernel));
  kv.set("n_amrs", static_cast<std::uint64_t>(n_amrs));
  kv.set("n_mz", static_cast<std::uint64_t>(n_mz));
  kv.set("dt_full", dt_full);
  kv.set("dt_reduced", dt_reduced);
  kv.set("dt_mz", dt_mz);
  kv.set("lag_step", lag_step);
  kv.set("lag_max", lag_max);
  kv.set("t0", t0);
  kv.set("kernel_step", kernel_step);
  kv.set("noise_horizon", noise_horizon);
  kv.set("ma_taps", static_cast<std::uint64_t>(ma_taps));
  kv.set("taper", static_cast<std::int64_t>(taper ? 1 : 0));
  kv.set("alpha", alpha);
  return kv.to_string();
}

ExperimentSpec ExperimentSpec::from_text(const std::string& text,
                                         const std::string& context) {
  const KeyValueFile kv = KeyValueFile::parse(text, context);
  ExperimentSpec spec;
  spec.config.model_case = model_case_from_string(kv.get("case"));
  spec.config.lambda_a = kv.get_double_or("lambda_a", spec.config.lambda_a);
  spec.config.lambda_m = kv.get_double_or("lambda_m", spec.config.lambda_m);
  spec.config.n_modes = static_cast<int>(
      kv.get_int_or("n_modes", spec.config.n_modes));
  spec.config.n_active = static_cast<int>(
      kv.get_int_or("n_active", spec.config.n_active));
  spec.config.beta = kv.get_double_or("beta", spec.config.beta);
  spec.seed = kv.get_uint_or("seed", spec.seed);
  spec.threads = static_cast<int>(kv.get_int_or("threads", spec.threads));
  spec.out_dir = kv.get_or("out_dir", spec.out_dir);
  spec.procedure =
      ou_procedure_from_string(kv.get_or("procedure", to_string(spec.procedure)));
  spec.c1 = kv.get_double_or("c1", spec.c1);
  spec.n_ou_fit = kv.get_uint_or("n_ou_fit", spec.n_ou_fit);
  spec.n_truth = kv.get_uint_or("n_truth", spec.n_truth);
  spec.n_kernel = kv.get_uint_or("n_kernel", spec.n_kernel);
  spec.n_amrs = kv.get_uint_or("n_amrs", spec.n_amrs);
  spec.n_mz = kv.get_uint_or("n_mz", spec.n_mz);
  spec.dt_full = kv.get_double_or("dt_full", spec.dt_full);
  spec.dt_reduced = kv.get_double_or("dt_reduced", spec.dt_reduced);
  spec.dt_mz = kv.get_double_or("dt_mz", spec.dt_mz);
  spec.lag_step = kv.get_double_or("lag_step", spec.lag_step);
  spec.lag_max = kv.get_double_or("lag_max", spec.lag_max);
  spec.t0 = kv.get_double_or("t0", spec.t0);
  spec.kernel_step = kv.get_double_or("kernel_step", spec.kernel_step);
  spec.noise_horizon = kv.get_double_or("noise_horizon", spec.noise_horizon);
  spec.ma_taps = kv.get_uint_or("ma_taps", spec.ma_taps);
  spec.taper = kv.get_int_or("taper", spec.taper ? 1 : 0) != 0;
  spec.alpha = kv.get_double_or("alpha", spec.alpha);
  spec.validate();
  return spec;
}

ExperimentSpec ExperimentSpec::load(const std::string& path) {
  return from_text(read_text_file(path), path);
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::couplings: return "couplings";
    case Stage::truth: return "truth";
    case Stage::fit_ou: return "fit-ou";
    case Stage::amrs: return "amrs";
    case Stage::kernels: return "kernels";
    case Stage::mz: return "mz";
    case Stage::delta_mz: return "delta-mz";
    case Stage::compare: return "compare";
  }
  fail(ErrorCode::invalid_argument, "unknown stage");
}

Stage stage_from_string(const std::string& name) {
  if (name == "couplings" || name == "gen-couplings") return Stage::couplings;
  if (name == "truth") return Stage::truth;
  if (name == "fit-ou") return Stage::fit_ou;
  if (name == "amrs") return Stage::amrs;
  if (name == "kernels") return Stage::kernels;
  if (name == "mz") return Stage::mz;
  if (name == "delta-mz") return Stage::delta_mz;
  if (name == "compare") return Stage::compare;
  fail(ErrorCode::invalid_argument, "unknown stage '" + name + "'");
}

// ---------------------------------------------------------------------------
// ComparisonReport
// ---------------------------------------------------------------------------

std::size_t ComparisonReport::method_index(const std::string& name) const {
  for (std::size_t i = 0; i < methods.size(); ++i)
    if (methods[i] == name) return i;
  fail(ErrorCode::invalid_argument, "report has no method '" + name + "'");
}

std::size_t ComparisonReport::observable_index(const std::string& name) const {
  for (std::size_t i = 0; i < observables.size(); ++i)
    if (observables[i] == name) return i;
  fail(ErrorCode::invalid_argument, "report has no observable '" + name + "'");
}

double ComparisonReport::mean_rel_err(const std::string& method,
                                      const std::string& observable,
                                      double t_lo, double t_hi) const {
  const auto& row = rel_err[method_index(method)][observable_index(observable)];
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t l = 0; l < lags.size(); ++l) {
    if (lags[l] < t_lo - 1e-9 || lags[l] > t_hi + 1e-9) continue;
    if (!std::isfinite(row[l])) continue;
    sum += row[l];
    ++count;
  }
  return count == 0 ? nan_value : sum / static_cast<double>(count);
}

double ComparisonReport::max_rel_err(const std::string& method,
                                     const std::string& observable,
                                     double t_lo, double t_hi) const {
  const auto& row = rel_err[method_index(method)][observable_index(observable)];
  double worst = nan_value;
  for (std::size_t l = 0; l < lags.size(); ++l) {
    if (lags[l] < t_lo - 1e-9 || lags[l] > t_hi + 1e-9) continue;
    if (!std::isfinite(row[l])) continue;
    if (!std::isfinite(worst) || row[l] > worst) worst = row[l];
  }
  return worst;
}

std::string ComparisonReport::to_csv() const {
  CsvTable table;
  table.columns.push_back("lag");
  table.data.push_back(lags);
  for (std::size_t o = 0; o < observables.size(); ++o) {
    table.columns.push_back("truth_" + observables[o]);
    table.data.push_back(truth[o]);
    table.columns.push_back("truth_se_" + observables[o]);
    table.data.push_back(truth_se[o]);
  }
  for (std::size_t i = 0; i < methods.size(); ++i)
    for (std::size_t o = 0; o < observables.size(); ++o) {
      table.columns.push_back(methods[i] + "_" + observables[o]);
      table.data.push_back(estimate[i][o]);
      table.columns.push_back(methods[i] + "_se_" + observables[o]);
      table.data.push_back(estimate_se[i][o]);
      table.columns.push_back(methods[i] + "_relerr_" + observables[o]);
      table.data.push_back(rel_err[i][o]);
    }
  return csv_to_string(table);
}

ComparisonReport compare(
    const CorrelationEstimate& truth,
    const std::vector<std::pair<std::string, CorrelationEstimate>>& estimates) {
  require(!estimates.empty(), ErrorCode::invalid_argument,
          "compare: no estimates given");
  ComparisonReport report;
  report.lag_step = truth.lag_step;
  report.lags = truth.lags;
  report.observables = estimates.front().second.names;

  for (const auto& [name, est] : estimates) {
    require(est.n_lags() == truth.n_lags() &&
                std::fabs(est.lag_step - truth.lag_step) <=
                    1e-12 * truth.lag_step,
            ErrorCode::grid_mismatch,
            "compare: estimate '" + name + "' is on a different lag grid");
    report.methods.push_back(name);
  }

  for (const auto& obs : report.observables) {
    const std::size_t row = truth.find(obs);
    report.truth.push_back(truth.corr[row]);
    report.truth_se.push_back(truth.se[row]);
  }

  const std::size_t n_lags = truth.n_lags();
  for (const auto& [name, est] : estimates) {
    std::vector<std::vector<double>> values, errors, rel;
    for (std::size_t o = 0; o < report.observables.size(); ++o) {
      const std::size_t row = est.find(report.observables[o]);
      values.push_back(est.corr[row]);
      errors.push_back(est.se[row]);
      std::vector<double> r(n_lags, nan_value);
      for (std::size_t l = 0; l < n_lags; ++l) {
        const double t = report.truth[o][l];
        if (std::fabs(t) > 10.0 * report.truth_se[o][l])
          r[l] = std::fabs(est.corr[row][l] - t) / std::fabs(t);
      }
      rel.push_back(std::move(r));
    }
    report.estimate.push_back(std::move(values));
    report.estimate_se.push_back(std::move(errors));
    report.rel_err.push_back(std::move(rel));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Experiment pipeline
// ---------------------------------------------------------------------------

Experiment::Experiment(ExperimentSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
}

std::string Experiment::stage_dir(Stage stage) const {
  return (fs::path(spec_.out_dir) / to_string(stage)).string();
}

std::uint64_t Experiment::stage_seed(Stage stage) const {
  return RngStream::derive(spec_.seed, static_cast<std::uint64_t>(stage))
      .next_u64();
}

std::vector<std::string> Experiment::stage_outputs(Stage stage) const {
  const fs::path dir(stage_dir(stage));
  switch (stage) {
    case Stage::couplings: return {(dir / "couplings.txt").string()};
    case Stage::truth: return {(dir / "correlations.csv").string()};
    case Stage::fit_ou: return {(dir / "ou_params.txt").string()};
    case Stage::amrs:
      return {(dir / "params.txt").string(),
              (dir / "correlations.csv").string(),
              (dir / "diagnostics.txt").string()};
    case Stage::kernels:
      return {(dir / "estimate.csv").string(),
              (dir / "screening.csv").string()};
    case Stage::mz:
      return {(dir / "model" / "manifest.txt").string(),
              (dir / "correlations.csv").string()};
    case Stage::delta_mz:
      return {(dir / "model.txt").string(),
              (dir / "correlations.csv").string()};
    case Stage::compare:
      return {(dir / "report.csv").string(), (dir / "summary.txt").string()};
  }
  fail(ErrorCode::invalid_argument, "unknown stage");
}

void Experiment::record_timing(const std::string& key, double seconds) {
  const std::string path =
      (fs::path(spec_.out_dir) / "timings.txt").string();
  KeyValueFile kv;
  if (fs::exists(path)) {
    kv = KeyValueFile::load(path);
  } else {
    kv.comment("wall-clock seconds per pipeline stage");
  }
  kv.set(key, seconds);
  kv.save(path);
}

void Experiment::prepare_output_dir() {
  fs::create_directories(spec_.out_dir);
  write_text_file((fs::path(spec_.out_dir) / "manifest.txt").string(),
                  spec_.to_text());
}

StageResult Experiment::run_stage(Stage stage) {
  prepare_output_dir();
  StageResult result;
  result.stage = stage;
  const std::vector<std::string> outputs = stage_outputs(stage);
  result.skipped = std::all_of(outputs.begin(), outputs.end(),
                               [](const std::string& p) {
                                 return fs::exists(p);
                               });
  if (result.skipped) return result;

  fs::create_directories(stage_dir(stage));
  const auto start = std::chrono::steady_clock::now();
  try {
    switch (stage) {
      case Stage::couplings: run_couplings(); break;
      case Stage::truth: run_truth(); break;
      case Stage::fit_ou: run_fit_ou(); break;
      case Stage::amrs: run_amrs(); break;
      case Stage::kernels: run_kernels(); break;
      case Stage::mz: run_mz(); break;
      case Stage::delta_mz: run_delta_mz(); break;
      case Stage::compare: run_compare(); break;
    }
  } catch (const std::exception& e) {
    fail(ErrorCode::stage_failed,
         "stage " + to_string(stage) + ": " + e.what());
  }
  result.seconds = elapsed_seconds(start);
  record_timing(to_string(stage) + "_seconds", result.seconds);
  return result;
}

std::vector<StageResult> Experiment::run_all() {
  std::vector<StageResult> results;
  for (int i = 0; i < n_stages; ++i)
    results.push_back(run_stage(static_cast<Stage>(i)));
  return results;
}

TriadCoupling Experiment::load_couplings() const {
  const std::string path =
      (fs::path(stage_dir(Stage::couplings)) / "couplings.txt").string();
  return TriadCoupling::from_text(read_text_file(path), path);
}

CorrelationEstimate Experiment::load_truth() const {
  const std::string path =
      (fs::path(stage_dir(Stage::truth)) / "correlations.csv").string();
  return CorrelationEstimate::from_csv(read_text_file(path), path);
}

OuParams Experiment::load_ou() const {
  const std::string path =
      (fs::path(stage_dir(Stage::fit_ou)) / "ou_params.txt").string();
  return OuParams::from_text(read_text_file(path), path);
}

void Experiment::run_couplings() const {
  const TriadCoupling coupling =
      generate_couplings(spec_.config, stage_seed(Stage::couplings));
  write_text_file(
      (fs::path(stage_dir(Stage::couplings)) / "couplings.txt").string(),
      coupling.to_text());
}

void Experiment::run_truth() const {
  FullCorrelationRequest req;
  req.dt = spec_.dt_full;
  req.lag_step = spec_.lag_step;
  req.lag_max = spec_.lag_max;
  req.n_samples = spec_.n_truth;
  req.seed = stage_seed(Stage::truth);
  req.threads = spec_.threads;
  for (int j = 1; j <= spec_.config.n_resolved(); ++j)
    req.observables.push_back("x" + std::to_string(j));
  for (int k = 1; k <= spec_.config.n_active; ++k) {
    req.observables.push_back("y" + std::to_string(k));
    req.observables.push_back("z" + std::to_string(k));
  }
  const CorrelationEstimate corr =
      full_system_correlation(spec_.config, load_couplings(), req);
  write_text_file(
      (fs::path(stage_dir(Stage::truth)) / "correlations.csv").string(),
      corr.to_csv());
}

void Experiment::run_fit_ou() const {
  OuFitOptions options;
  options.procedure = spec_.procedure;
  options.c1 = spec_.c1;
  options.dt = spec_.dt_full;
  options.lag_step = spec_.lag_step;
  options.lag_max = spec_.lag_max;
  options.n_samples = spec_.n_ou_fit;
  options.seed = stage_seed(Stage::fit_ou);
  options.threads = spec_.threads;

  CorrelationEstimate bath;
  const CorrelationEstimate* bath_ptr = nullptr;
  if (spec_.procedure != OuProcedure::p1) {
    bath = load_truth();
    bath_ptr = &bath;
  }
  const OuParams params =
      fit_ou_parameters(spec_.config, load_couplings(), bath_ptr, options);
  write_text_file(
      (fs::path(stage_dir(Stage::fit_ou)) / "ou_params.txt").string(),
      params.to_text());
}

void Experiment::run_amrs() const {
  const TriadCoupling coupling = load_couplings();
  const OuParams ou = load_ou();
  const ModelConfig& config = spec_.config;

  std::string params_text;
  double lambda_eff = 0.0;
  const AmrsStepper stepper = [&]() -> AmrsStepper {
    switch (config.model_case) {
      case ModelCase::additive: {
        const AmrsAdditiveParams params = compute_additive_params(
            coupling, ou, config.lambda_a, config.beta);
        params_text = params.to_text();
        lambda_eff = config.lambda_a;
        return AmrsStepper(params);
      }
      case ModelCase::multiplicative: {
        const AmrsMultiplicativeParams params = compute_multiplicative_params(
            coupling, ou, config.lambda_m, config.beta);
        params_text = params.to_text();
        lambda_eff = config.lambda_m;
        return AmrsStepper(params);
      }
      case ModelCase::combined: {
        const AmrsCombinedParams params = compute_combined_params(
            coupling, ou, config.lambda_a, config.lambda_m, config.beta);
        params_text = params.to_text();
        lambda_eff = std::max(config.lambda_a, config.lambda_m);
        return AmrsStepper(params);
      }
    }
    fail(ErrorCode::invalid_argument, "unknown model case");
  }();
  const fs::path dir(stage_dir(Stage::amrs));
  write_text_file((dir / "params.txt").string(), params_text);

  ReducedCorrelationRequest req;
  req.dt = spec_.dt_reduced;
  req.lag_step = spec_.lag_step;
  req.lag_max = spec_.lag_max;
  req.n_samples = spec_.n_amrs;
  req.seed = stage_seed(Stage::amrs);
  req.threads = spec_.threads;
  const CorrelationEstimate corr = amrs_correlation(stepper, config.beta, req);
  write_text_file((dir / "correlations.csv").string(), corr.to_csv());

  KeyValueFile diag;
  diag.comment("scale-separation diagnostic");
  diag.set("lambda_eff", lambda_eff);
  diag.set("gamma_1", ou.gamma[0]);
  diag.set("epsilon",
           epsilon_diagnostic(lambda_eff, ou.gamma[0], config.beta));
  diag.save((dir / "diagnostics.txt").string());
}

void Experiment::run_kernels() const {
  const TriadCoupling coupling = load_couplings();
  const HermiteBasis basis =
      HermiteBasis::for_case(spec_.config, spec_.alpha);
  KernelRequest req;
  req.dt = spec_.dt_full;
  req.ds = spec_.kernel_step;
  req.horizon = spec_.noise_horizon;
  req.n_samples = spec_.n_kernel;
  req.seed = stage_seed(Stage::kernels);
  req.threads = spec_.threads;
  const KernelEstimate estimate =
      estimate_memory_kernels(spec_.config, coupling, basis, req);
  const fs::path dir(stage_dir(Stage::kernels));
  write_text_file((dir / "estimate.csv").string(),
                  kernel_estimate_to_csv(estimate));

  std::string screening = "equation,term,value,se\n";
  for (const ScreeningRow& row : screen_basis_terms(estimate))
    screening += "x" + std::to_string(row.equation + 1) + "," + row.term +
                 "," + format_sig17(row.value) + "," + format_sig17(row.se) +
                 "\n";
  write_text_file((dir / "screening.csv").string(), screening);
}

void Experiment::run_mz() {
  const std::string estimate_path =
      (fs::path(stage_dir(Stage::kernels)) / "estimate.csv").string();
  const KernelEstimate estimate = kernel_estimate_from_csv(
      read_text_file(estimate_path), estimate_path);
  const HermiteBasis basis =
      HermiteBasis::for_case(spec_.config, spec_.alpha);

  MzBuildOptions options;
  options.t0 = spec_.t0;
  options.taper = spec_.taper;
  options.ma_taps = spec_.ma_taps;

  const auto build_start = std::chrono::steady_clock::now();
  const MzModel model =
      assemble_mz_model(spec_.config, basis, estimate, options);
  record_timing("mz_build_seconds", elapsed_seconds(build_start));

  const fs::path dir(stage_dir(Stage::mz));
  model.save((dir / "model").string());

  ReducedCorrelationRequest req;
  req.dt = spec_.dt_mz;
  req.lag_step = spec_.lag_step;
  req.lag_max = spec_.lag_max;
  req.n_samples = spec_.n_mz;
  req.seed = stage_seed(Stage::mz);
  req.threads = spec_.threads;
  const auto sim_start = std::chrono::steady_clock::now();
  const CorrelationEstimate corr = mz_correlation(model, req);
  record_timing("mz_sim_seconds", elapsed_seconds(sim_start));
  write_text_file((dir / "correlations.csv").string(), corr.to_csv());
}

void Experiment::run_delta_mz() {
  const MzModel model =
      MzModel::load((fs::path(stage_dir(Stage::mz)) / "model").string());
  const DeltaMzModel delta = reduce_to_delta_mz(model);
  const fs::path dir(stage_dir(Stage::delta_mz));
  write_text_file((dir / "model.txt").string(), delta.to_text());

  ReducedCorrelationRequest req;
  req.dt = spec_.dt_mz;
  req.lag_step = spec_.lag_step;
  req.lag_max = spec_.lag_max;
  req.n_samples = spec_.n_mz;
  // The parent model's seed on purpose: the delta simplification is judged
  // against the memory model under common noise draws.
  req.seed = stage_seed(Stage::mz);
  req.threads = spec_.threads;
  const auto sim_start = std::chrono::steady_clock::now();
  const CorrelationEstimate corr = delta_mz_correlation(delta, req);
  record_timing("delta_sim_seconds", elapsed_seconds(sim_start));
  write_text_file((dir / "correlations.csv").string(), corr.to_csv());
}

ComparisonReport Experiment::report() const {
  const auto load = [this](Stage stage) {
    const std::string path =
        (fs::path(stage_dir(stage)) / "correlations.csv").string();
    return CorrelationEstimate::from_csv(read_text_file(path), path);
  };
  return compare(load_truth(), {{"amrs", load(Stage::amrs)},
                                {"mz", load(Stage::mz)},
                                {"delta_mz", load(Stage::delta_mz)}});
}

void Experiment::run_compare() const {
  const ComparisonReport report = this->report();
  const fs::path dir(stage_dir(Stage::compare));
  write_text_file((dir / "report.csv").string(), report.to_csv());

  KeyValueFile summary;
  summary.comment("relative errors over unmasked lags; late = second half");
  const double half = 0.5 * spec_.lag_max;
  for (const auto& method : report.methods)
    for (const auto& obs : report.observables) {
      const std::string tag = method + "_" + obs;
      summary.set(tag + "_mean",
                  report.mean_rel_err(method, obs, 0.0, spec_.lag_max));
      summary.set(tag + "_max",
                  report.max_rel_err(method, obs, 0.0, spec_.lag_max));
      summary.set(tag + "_late_mean",
                  report.mean_rel_err(method, obs, half, spec_.lag_max));
    }

  const std::string timings_path =
      (fs::path(spec_.out_dir) / "timings.txt").string();
  if (fs::exists(timings_path)) {
    const KeyValueFile timings = KeyValueFile::load(timings_path);
    if (timings.has("mz_sim_seconds") && timings.has("delta_sim_seconds")) {
      const double mz_s = timings.get_double("mz_sim_seconds");
      const double delta_s = timings.get_double("delta_sim_seconds");
      summary.set("mz_sim_seconds", mz_s);
      summary.set("delta_sim_seconds", delta_s);
      if (delta_s > 0) summary.set("delta_speedup", mz_s / delta_s);
    }
  }
  const std::string diag_path =
      (fs::path(stage_dir(Stage::amrs)) / "diagnostics.txt").string();
  if (fs::exists(diag_path)) {
    const KeyValueFile diag = KeyValueFile::load(diag_path);
    summary.set("epsilon", diag.get_double("epsilon"));
  }
  summary.save((dir / "summary.txt").string());
}

ComparisonReport run_experiment(const ExperimentSpec& spec) {
  Experiment experiment(spec);
  experiment.run_all();
  return experiment.report();
}

}  // namespace modered
