// Short-memory reduced models of the resolved variables: memory kernels over
// a Hermite basis, a fitted colored-noise forcing, and the delta-function
// simplification that collapses each kernel to its time integral.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "modered/amrs.hpp"
#include "modered/hermite.hpp"
#include "modered/integrators.hpp"
#include "modered/model.hpp"
#include "modered/rng.hpp"
#include "modered/stats.hpp"

namespace modered {

// Integrodifferential reduced model
//   dphi_j/dt = -int_0^{min(t, t0)} sum_f K_{j,f}(s) h^f(phi(t-s)) ds + F_j(t)
// with one kernel per (equation, owned basis function) pair and an
// independent stationary colored-noise process F_j per resolved variable,
// fitted so its autocovariance matches the measured target.
//
// The noise is synthesised on the kernel grid (spacing ds) and interpolated
// linearly to integrator substeps, so a path's random-draw sequence depends
// only on ds and the seed — not on dt.  Refining dt therefore reuses the
// same noise path (the order-two convergence check below relies on this),
// and the delta model consumes the identical sequence, which makes
// common-random-number comparisons between the two models meaningful.
struct MzModel {
  ModelCase model_case = ModelCase::additive;
  double beta = 50.0;
  double t0 = 1.0;        // memory horizon
  bool tapered = true;    // cosine taper applied over the last 10% of [0, t0]
  HermiteBasis basis;
  MemoryModel memory;     // kernels on [0, t0], one term per owned pair
  std::vector<ColoredNoiseModel> noise;  // one per resolved variable

  std::size_t n_resolved() const { return basis.n_resolved; }
  void validate() const;

  // Directory layout: manifest.txt (shape, grids, basis), kernels.csv
  // (lag column plus one column per memory term), noise_x<j>.txt per
  // resolved variable.
  void save(const std::string& dir) const;
  static MzModel load(const std::string& dir);
};

// Memoryless simplification: each kernel replaced by a delta function
// carrying its time integral,
//   dphi_j/dt = -sum_f c_{j,f} h^f(phi(t)) + F_j(t),
// with the same noise processes as the parent model.
struct DeltaMzModel {
  ModelCase model_case = ModelCase::additive;
  double beta = 50.0;
  double ds = 0.0;  // noise grid spacing (inherited from the parent model)
  HermiteBasis basis;
  std::vector<int> variable;      // equation driven by each coefficient
  std::vector<int> basis_index;   // basis function of each coefficient
  std::vector<double> c;          // kernel time integrals
  std::vector<ColoredNoiseModel> noise;

  std::size_t n_resolved() const { return basis.n_resolved; }
  std::string to_text() const;  // coefficient summary (report artifact)
};

// ---------------------------------------------------------------------------
// Model construction
// ---------------------------------------------------------------------------

struct MzBuildOptions {
  double t0 = 1.0;
  bool taper = true;
  std::size_t ma_taps = 0;  // moving-average tap count; 0 = automatic
  KernelRequest kernel;     // estimation grid, ensemble size, seed, threads
};

// Assembles a model from an existing kernel estimate: keeps the owned
// (equation, basis) kernels restricted to [0, t0], applies the optional
// taper, and fits one noise model per equation to the measured
// autocovariance target over its full horizon.
MzModel assemble_mz_model(const ModelConfig& config, const HermiteBasis& basis,
                          const KernelEstimate& estimate,
                          const MzBuildOptions& options);

// One-call construction: runs estimate_memory_kernels, then assembles.
MzModel build_mz_model(const ModelConfig& config, const TriadCoupling& coupling,
                       const HermiteBasis& basis, const MzBuildOptions& options);

// c_{j,f} = trapezoidal integral of each kernel over [0, t0].
DeltaMzModel reduce_to_delta_mz(const MzModel& model);

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

// Advances the resolved state from x0 over the grid; returns the trajectory
// including the initial row.  grid.dt must divide the kernel spacing.
// The memory window grows as [0, t] until t reaches t0 (no history padding).
// Throws numerical_blowup if the state leaves the finite range.
std::vector<std::vector<double>> simulate_mz(const MzModel& model,
                                             std::span<const double> x0,
                                             const TimeGrid& grid,
                                             RngStream& rng);

std::vector<std::vector<double>> simulate_delta_mz(const DeltaMzModel& model,
                                                   std::span<const double> x0,
                                                   const TimeGrid& grid,
                                                   RngStream& rng);

// Ensemble autocorrelation of the resolved variables under each model,
// started from equilibrium draws; observables "x1", "x2".
CorrelationEstimate mz_correlation(const MzModel& model,
                                   const ReducedCorrelationRequest& req);

CorrelationEstimate delta_mz_correlation(const DeltaMzModel& model,
                                         const ReducedCorrelationRequest& req);

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

// Monte Carlo inner products of state functionals against every basis
// function under the invariant density: estimate[r][f] ~ E[ g_r(X) h^f(x) ].
struct ProjectionTable {
  std::vector<std::string> row_names;
  std::vector<std::string> term_names;
  std::vector<std::vector<double>> estimate;  // [row][term]
  std::vector<std::vector<double>> se;        // stderr of each estimate
  std::size_t n_samples = 0;

  // True when every entry lies within n_se standard errors of zero.
  bool within(double n_se) const;
  std::string to_csv() const;
};

using StateFunctional = std::function<double(const FullState& state)>;

ProjectionTable project_onto_basis(
    const ModelConfig& config,
    const std::vector<std::pair<std::string, StateFunctional>>& rows,
    const HermiteBasis& basis, std::size_t n_samples, std::uint64_t seed,
    int threads);

// The reduced models assume the resolved drift has no component inside the
// resolved space: (dx_j/dt, h^f) = 0 for every equation j and basis
// function f.  Estimates all of them; the check passes when every entry is
// within three standard errors of zero.
ProjectionTable check_projection_conditions(const ModelConfig& config,
                                            const TriadCoupling& coupling,
                                            const HermiteBasis& basis,
                                            std::size_t n_samples,
                                            std::uint64_t seed, int threads);

// Ranks every (equation, basis function) pair of a kernel estimate by the
// magnitude of its lag-0 value — the criterion used to decide which basis
// terms a case's reduced equations keep.
struct ScreeningRow {
  int equation = 0;
  std::string term;
  double value = 0.0;  // kernel at lag 0
  double se = 0.0;
};

std::vector<ScreeningRow> screen_basis_terms(const KernelEstimate& estimate);

}  // namespace modered
