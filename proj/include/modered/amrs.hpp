// The asymptotic reduction path: fit the bath surrogate (per-mode damping
// rates with fluctuation-dissipation-pinned noise), turn coupling
// coefficients plus surrogate rates into reduced-model parameters for each
// case, and simulate the reduced stochastic systems.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "modered/integrators.hpp"
#include "modered/model.hpp"
#include "modered/stats.hpp"

namespace modered {

enum class OuProcedure { p1, p2, p3 };

std::string to_string(OuProcedure procedure);
OuProcedure ou_procedure_from_string(const std::string& text);

// Per-mode Ornstein-Uhlenbeck surrogate of the bath: relaxation rates
// gamma[k-1] for modes k = 1..n_modes, with sigma pinned to sqrt(gamma/beta)
// so every mode keeps the equilibrium variance 1/(2 beta).
struct OuParams {
  OuProcedure procedure = OuProcedure::p2;
  double beta = 50.0;
  double c1 = 0.0;        // scale constant (procedure P1 only)
  bool converged = true;  // false when P3 hit its iteration cap
  std::vector<double> gamma;
  std::vector<double> sigma;

  double gamma_k(int k) const { return gamma.at(static_cast<std::size_t>(k - 1)); }
  void validate() const;

  std::string to_text() const;
  static OuParams from_text(const std::string& text,
                            const std::string& context);
};

struct OuFitOptions {
  OuProcedure procedure = OuProcedure::p2;
  double c1 = 1.0;  // P1 scale

  // P3 refinement loop: hybrid-system ensembles measured on this grid.
  std::size_t max_iterations = 10;
  double tolerance = 0.05;
  double dt = 1e-3;
  double lag_step = 0.05;
  double lag_max = 10.0;
  std::size_t n_samples = 4000;
  std::uint64_t seed = 0;
  int threads = 0;
};

// Rates for the coupled modes come from the measured bath correlations
// (areas of the y and z autocovariances averaged, P2/P3) or the scaling law
// (P1); uncoupled modes are extended linearly in k from gamma[0].
// `bath_corr` must contain observables y<k> and z<k> for k = 1..n_active
// (P2/P3); it is ignored by P1.
OuParams fit_ou_parameters(const ModelConfig& config,
                           const TriadCoupling& coupling,
                           const CorrelationEstimate* bath_corr,
                           const OuFitOptions& options);

// Reduced-model parameter sets.  The 2x2 noise factors are the symmetric
// positive-semidefinite square roots of their defining covariance matrices.
using Matrix2 = std::array<std::array<double, 2>, 2>;

Matrix2 symmetric_sqrt_2x2(double a11, double a12, double a22);

struct AmrsAdditiveParams {
  double lambda = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double sigma = 0.0;  // sqrt(gamma/beta)

  std::string to_text() const;
  static AmrsAdditiveParams from_text(const std::string& text,
                                      const std::string& context);
};

struct AmrsMultiplicativeParams {
  double lambda = 0.0;
  double beta = 0.0;
  double a = 0.0, b = 0.0, c = 0.0;  // covariance entries [[a, c], [c, b]]
  double gamma_bar = 0.0;            // -c/2
  double n1 = 0.0, n2 = 0.0;         // beta (a + c), beta (b + c)
  Matrix2 sigma_bar{};               // symmetric sqrt of [[a, c], [c, b]]

  std::string to_text() const;
  static AmrsMultiplicativeParams from_text(const std::string& text,
                                            const std::string& context);
};

struct AmrsCombinedParams {
  AmrsMultiplicativeParams mul;  // lambda field holds lambda_m
  double lambda_a = 0.0;
  double gamma_11 = 0.0, gamma_22 = 0.0, gamma_12 = 0.0;
  Matrix2 sigma_add{};  // symmetric sqrt of [[g11, g12], [g12, g22]] / beta

  std::string to_text() const;
  static AmrsCombinedParams from_text(const std::string& text,
                                      const std::string& context);
};

AmrsAdditiveParams compute_additive_params(const TriadCoupling& coupling,
                                           const OuParams& ou, double lambda,
                                           double beta);
AmrsMultiplicativeParams compute_multiplicative_params(
    const TriadCoupling& coupling, const OuParams& ou, double lambda,
    double beta);
AmrsCombinedParams compute_combined_params(const TriadCoupling& coupling,
                                           const OuParams& ou, double lambda_a,
                                           double lambda_m, double beta);

// One-step form of the reduced stochastic systems; `gaussians` supplies
// n_noise() unit normal draws per step.  Additive advances with
// Euler-Maruyama, the other two cases with the Lie-split Heun/Milstein
// scheme (nonlinear drift first, then linear drift plus noise).
class AmrsStepper {
 public:
  explicit AmrsStepper(const AmrsAdditiveParams& params);
  explicit AmrsStepper(const AmrsMultiplicativeParams& params);
  explicit AmrsStepper(const AmrsCombinedParams& params);

  std::size_t n_state() const { return n_state_; }
  std::size_t n_noise() const { return n_noise_; }

  void step(double dt, std::span<const double> gaussians,
            std::span<double> state, SdeWorkspace& ws) const;

 private:
  std::size_t n_state_ = 0;
  std::size_t n_noise_ = 0;
  bool split_ = false;
  SdeDrift nonlinear_;
  SdeDrift linear_;
  SdeDiffusion diffusion_;
};

// Full trajectory from x0, recorded at every grid point (n_steps + 1 rows
// of n_state values, starting with x0 itself).  Throws numerical_blowup if
// the state stops being finite.
std::vector<std::vector<double>> simulate_amrs(const AmrsStepper& stepper,
                                               std::span<const double> x0,
                                               const TimeGrid& grid,
                                               RngStream& rng);

// Ensemble autocorrelation of the resolved variables of the reduced model,
// started from the projected invariant density (independent Gaussians with
// variance 1/(2 beta)).
struct ReducedCorrelationRequest {
  double dt = 1e-2;
  double lag_step = 0.05;
  double lag_max = 10.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  int threads = 0;
};

CorrelationEstimate amrs_correlation(const AmrsStepper& stepper, double beta,
                                     const ReducedCorrelationRequest& req);

// Scale-separation diagnostic lambda_eff / (gamma_1 sqrt(2 beta)).
double epsilon_diagnostic(double lambda_eff, double gamma_1, double beta);

}  // namespace modered
