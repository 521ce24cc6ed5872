// Configuration-driven pipeline: truth ensembles, bath-surrogate fitting,
// both reduced-model families, and the comparison report, with every stage
// persisting its artifact before the next begins so runs resume for free.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "modered/amrs.hpp"
#include "modered/model.hpp"
#include "modered/stats.hpp"

namespace modered {

struct ExperimentSpec {
  ModelConfig config;

  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency; 1 = bitwise reproducible
  std::string out_dir = "out";

  // Bath-surrogate fitting.
  OuProcedure procedure = OuProcedure::p2;
  double c1 = 1.0;               // scale constant (procedure P1)
  std::size_t n_ou_fit = 4000;   // hybrid ensembles per P3 iteration

  // Ensemble sizes.
  std::size_t n_truth = 10000;
  std::size_t n_kernel = 20000;
  std::size_t n_amrs = 100000;
  std::size_t n_mz = 10000;  // shared by the delta model (common noise)

  // Grids.
  double dt_full = 1e-3;     // full-system integrator step
  double dt_reduced = 1e-2;  // reduced-SDE integrator step
  double dt_mz = 1e-3;       // memory-equation integrator step
  double lag_step = 0.05;    // correlation lag spacing
  double lag_max = 10.0;     // last correlation lag

  // Memory model.
  double t0 = 1.0;              // kernel truncation horizon
  double kernel_step = 0.01;    // kernel lag spacing
  double noise_horizon = 10.0;  // last kernel/noise lag estimated
  std::size_t ma_taps = 0;      // noise moving-average taps; 0 = automatic
  bool taper = true;            // cosine-taper kernel tails
  double alpha = 0.0;           // basis scaling factor

  void validate() const;
  std::string to_text() const;
  static ExperimentSpec from_text(const std::string& text,
                                  const std::string& context);
  static ExperimentSpec load(const std::string& path);
};

// Pipeline stages, in execution order.  Each consumes the artifacts of the
// stages before it (loaded from disk, never from memory), so any stage can
// be rerun in a fresh process.
enum class Stage {
  couplings = 0,
  truth,
  fit_ou,
  amrs,
  kernels,
  mz,
  delta_mz,
  compare,
};

inline constexpr int n_stages = 8;

std::string to_string(Stage stage);
Stage stage_from_string(const std::string& name);

struct StageResult {
  Stage stage = Stage::couplings;
  bool skipped = false;   // artifacts already present
  double seconds = 0.0;
};

// Per-lag comparison of reduced-model autocorrelations against the truth
// run.  Relative errors are defined only where the truth is resolved
// (|truth| > 10 x stderr); masked lags hold NaN and serialize as empty
// cells.
struct ComparisonReport {
  double lag_step = 0.0;
  std::vector<double> lags;
  std::vector<std::string> observables;
  std::vector<std::string> methods;
  std::vector<std::vector<double>> truth;     // [obs][lag]
  std::vector<std::vector<double>> truth_se;  // [obs][lag]
  std::vector<std::vector<std::vector<double>>> estimate;     // [method][obs][lag]
  std::vector<std::vector<std::vector<double>>> estimate_se;  // [method][obs][lag]
  std::vector<std::vector<std::vector<double>>> rel_err;      // NaN = masked

  std::size_t method_index(const std::string& name) const;
  std::size_t observable_index(const std::string& name) const;

  // Statistics of the relative error over the unmasked lags inside
  // [t_lo, t_hi]; NaN when the window holds no unmasked lag.
  double mean_rel_err(const std::string& method, const std::string& observable,
                      double t_lo, double t_hi) const;
  double max_rel_err(const std::string& method, const std::string& observable,
                     double t_lo, double t_hi) const;

  std::string to_csv() const;
};

// Assembles the report; every estimate must share the truth's lag grid and
// contain all its own observables in the truth estimate as well.
ComparisonReport compare(
    const CorrelationEstimate& truth,
    const std::vector<std::pair<std::string, CorrelationEstimate>>& estimates);

class Experiment {
 public:
  explicit Experiment(ExperimentSpec spec);

  const ExperimentSpec& spec() const { return spec_; }

  // Runs one stage, skipping it when all its artifacts already exist.
  // Timings accumulate in <out_dir>/timings.txt.
  StageResult run_stage(Stage stage);
  std::vector<StageResult> run_all();

  // Rebuilds the comparison report from the persisted correlation artifacts
  // (truth, amrs, mz, delta-mz stages must have run).
  ComparisonReport report() const;

  std::string stage_dir(Stage stage) const;

 private:
  std::uint64_t stage_seed(Stage stage) const;
  std::vector<std::string> stage_outputs(Stage stage) const;
  void record_timing(const std::string& key, double seconds);
  void prepare_output_dir();

  void run_couplings() const;
  void run_truth() const;
  void run_fit_ou() const;
  void run_amrs() const;
  void run_kernels() const;
  void run_mz();
  void run_delta_mz();
  void run_compare() const;

  TriadCoupling load_couplings() const;
  CorrelationEstimate load_truth() const;
  OuParams load_ou() const;

  ExperimentSpec spec_;
};

// Full pipeline in one call: all stages (resuming past completed ones),
// then the assembled report.
ComparisonReport run_experiment(const ExperimentSpec& spec);

}  // namespace modered
