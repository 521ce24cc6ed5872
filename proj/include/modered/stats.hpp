// Ensemble statistics: lagged correlation estimation over independent
// trajectories, memory-kernel and noise-autocovariance estimation for the
// projected dynamics, damping rates from correlation areas, and synthesis of
// stationary Gaussian noise with a prescribed autocovariance.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "modered/hermite.hpp"
#include "modered/model.hpp"
#include "modered/rng.hpp"

namespace modered {

// Composite trapezoid rule on an arbitrary abscissa grid.
double trapezoid(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Lagged ensemble correlations
// ---------------------------------------------------------------------------

// Per-observable lag-zero products against later lags, averaged over
// independent samples:  corr[o][l] ~ E[ A_o(l * lag_step) A_o(0) ].
struct CorrelationEstimate {
  double lag_step = 0.0;
  std::vector<std::string> names;         // one per observable
  std::vector<double> lags;               // l * lag_step
  std::vector<std::vector<double>> corr;  // [obs][lag] mean product
  std::vector<std::vector<double>> se;    // [obs][lag] stderr of the mean
  std::size_t n_samples = 0;              // samples that entered the average
  std::size_t n_skipped = 0;              // samples dropped as non-finite

  std::size_t n_lags() const { return lags.size(); }
  std::size_t find(const std::string& name) const;  // throws if absent

  std::string to_csv() const;
  static CorrelationEstimate from_csv(const std::string& text,
                                      const std::string& context);
};

// Fills matrix[o * n_lags + l] with observable o at lag l for one sample.
// Returning false drops the sample (counted, not averaged).
using SampleRunner =
    std::function<bool(std::size_t sample, std::span<double> matrix)>;

// Runs `n_samples` independent samples (parallelised over contiguous chunks)
// and averages lag products.  Deterministic for a fixed thread count; the
// per-sample work must derive its randomness from the sample index alone so
// that results do not depend on the parallel schedule.
CorrelationEstimate ensemble_correlation(std::vector<std::string> names,
                                         std::size_t n_lags, double lag_step,
                                         std::size_t n_samples, int threads,
                                         const SampleRunner& runner);

// Ensemble autocorrelation of the named linear observables of the full
// triad system, started from exact equilibrium draws.  Observables are
// "x1", "x2", ..., "y<k>", "z<k>".
struct FullCorrelationRequest {
  double dt = 1e-3;          // integrator step
  double lag_step = 0.05;    // spacing of recorded lags (multiple of dt)
  double lag_max = 10.0;     // last recorded lag
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  int threads = 0;
  std::vector<std::string> observables;
};

CorrelationEstimate full_system_correlation(const ModelConfig& config,
                                            const TriadCoupling& coupling,
                                            const FullCorrelationRequest& req);

// Damping rate of an exponentially correlated signal from the area under
// its raw autocovariance: gamma = C(0) / integral_0^T C(s) ds, with the
// normalisation C(0) = 1/(2 beta) enforced analytically for bath modes.
double gamma_from_area(std::span<const double> lags,
                       std::span<const double> corr, double beta);

// ---------------------------------------------------------------------------
// Memory kernels and projected noise autocovariance
// ---------------------------------------------------------------------------

// Inner products of the evolved resolved time derivative against basis
// images of the generator, estimated over an equilibrium ensemble:
//   kernels[j][f][l] ~ E[ (L x_j)(phi_s x) * (L h^f)(x) ],  s = l * ds,
//   noise_acf[j][l]  ~ E[ (L x_j)(phi_s x) * (L x_j)(x) ].
// Both families come from one pass over the same trajectories.
struct KernelEstimate {
  double ds = 0.0;
  std::vector<double> lags;
  std::vector<std::string> term_names;                  // per basis function
  std::vector<std::vector<std::vector<double>>> k;      // [eq][basis][lag]
  std::vector<std::vector<std::vector<double>>> k_se;   // stderr
  std::vector<std::vector<double>> noise_acf;           // [eq][lag]
  std::vector<std::vector<double>> noise_se;            // stderr
  std::size_t n_samples = 0;
  std::size_t n_skipped = 0;
};

struct KernelRequest {
  double dt = 1e-3;       // integrator step
  double ds = 0.01;       // lag spacing of the estimates (multiple of dt)
  double horizon = 10.0;  // last recorded lag
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  int threads = 0;
};

KernelEstimate estimate_memory_kernels(const ModelConfig& config,
                                       const TriadCoupling& coupling,
                                       const HermiteBasis& basis,
                                       const KernelRequest& req);

std::string kernel_estimate_to_csv(const KernelEstimate& est);
KernelEstimate kernel_estimate_from_csv(const std::string& text,
                                        const std::string& context);

// ---------------------------------------------------------------------------
// Stationary Gaussian noise with prescribed autocovariance
// ---------------------------------------------------------------------------

// Moving-average representation F_t = sum_{i=0}^{M} taps[i] xi_{t-i} with
// unit white draws xi on the step grid `dt`.
struct ColoredNoiseModel {
  double dt = 0.0;
  std::vector<double> taps;

  std::string to_text() const;
  static ColoredNoiseModel from_text(const std::string& text,
                                     const std::string& context);
};

// Fits the moving-average taps to autocovariance samples r[0..n-1] on grid
// spacing dt via spectral factorisation: the minimum-phase (causal) root of
// the even spectral extension, computed with the real cepstrum.  n_taps = 0
// picks the count from the integral correlation time (5 tau / dt, clamped
// to [8, n-1]).  The taps are rescaled so the lag-0 variance matches r[0]
// exactly.  Throws invalid_correlation if more than 1% of the spectral mass
// is negative.
ColoredNoiseModel fit_ma_coefficients(std::span<const double> acf, double dt,
                                      std::size_t n_taps = 0);

// Autocovariance of the fitted representation at lags 0..(n-1)*dt,
// r[m] = sum_i taps[i] taps[i+m]; used for verification and reporting.
std::vector<double> ma_autocovariance(const ColoredNoiseModel& model,
                                      std::size_t n_lags);

// Streaming sampler: after construction the generator is warmed up (the
// white-noise ring is filled), so the first next() already has the
// stationary distribution.
class ColoredNoiseGenerator {
 public:
  ColoredNoiseGenerator(const ColoredNoiseModel& model, RngStream& rng);

  double next(RngStream& rng);

 private:
  std::vector<double> taps_;
  std::vector<double> ring_;  // past white draws, ring_[head_] = newest
  std::size_t head_ = 0;
};

}  // namespace modered
