// Tests for the asymptotic reduction path: bath-surrogate fitting, the
// closed-form reduced-model parameters, the matrix square root they rely
// on, and the reduced stochastic integrators.
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "doctest.h"
#include "modered/amrs.hpp"
#include "modered/errors.hpp"
#include "modered/model.hpp"
#include "modered/rng.hpp"
#include "modered/stats.hpp"

using namespace modered;

namespace {

ModelConfig amrs_config(ModelCase model_case, int n_modes, int n_active) {
  ModelConfig config;
  config.model_case = model_case;
  config.n_modes = n_modes;
  config.n_active = n_active;
  config.beta = 50.0;
  config.lambda_a = 4.0;
  config.lambda_m = 3.0;
  return config;
}

OuParams pinned_ou(double beta, std::vector<double> gamma) {
  OuParams params;
  params.beta = beta;
  params.gamma = std::move(gamma);
  params.sigma.resize(params.gamma.size());
  for (std::size_t i = 0; i < params.gamma.size(); ++i)
    params.sigma[i] = std::sqrt(params.gamma[i] / beta);
  return params;
}

// Coupling with every family present for the case but all coefficients
// zero; the zero-sum constraint holds trivially.
TriadCoupling zero_coupling(const ModelConfig& config) {
  TriadCoupling cpl;
  cpl.model_case = config.model_case;
  cpl.n_active = config.n_active;
  const auto na = static_cast<std::size_t>(config.n_active);
  const std::vector<double> zeros(na, 0.0);
  if (config.model_case != ModelCase::multiplicative) {
    cpl.x1_yz = zeros;
    cpl.y_1z = zeros;
    cpl.z_1y = zeros;
  }
  if (config.model_case == ModelCase::combined) {
    cpl.x2_yz = zeros;
    cpl.y_2z = zeros;
    cpl.z_2y = zeros;
  }
  if (config.model_case != ModelCase::additive) {
    cpl.x1_2y = zeros;
    cpl.x2_1y = zeros;
    cpl.y_12 = zeros;
    cpl.x1_2z = zeros;
    cpl.x2_1z = zeros;
    cpl.z_12 = zeros;
  }
  return cpl;
}

// Synthetic bath autocorrelation with exact exponential decay: mode k's y
// component decays at rate rates_y[k-1] and its z component at
// rates_z[k-1], both from the equilibrium variance 1/(2 beta).
CorrelationEstimate analytic_bath_corr(const std::vector<double>& rates_y,
                                       const std::vector<double>& rates_z,
                                       double beta, double lag_step,
                                       double lag_max) {
  CorrelationEstimate corr;
  corr.lag_step = lag_step;
  const auto n_lags =
      static_cast<std::size_t>(std::llround(lag_max / lag_step)) + 1;
  for (std::size_t l = 0; l < n_lags; ++l)
    corr.lags.push_back(static_cast<double>(l) * lag_step);
  const double var = 1.0 / (2.0 * beta);
  auto add_row = [&](const std::string& name, double rate) {
    corr.names.push_back(name);
    std::vector<double> row(n_lags), err(n_lags, 0.0);
    for (std::size_t l = 0; l < n_lags; ++l)
      row[l] = var * std::exp(-rate * corr.lags[l]);
    corr.corr.push_back(std::move(row));
    corr.se.push_back(std::move(err));
  };
  for (std::size_t k = 0; k < rates_y.size(); ++k)
    add_row("y" + std::to_string(k + 1), rates_y[k]);
  for (std::size_t k = 0; k < rates_z.size(); ++k)
    add_row("z" + std::to_string(k + 1), rates_z[k]);
  corr.n_samples = 1;
  return corr;
}

double sample_mean(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double sample_variance(const std::vector<double>& values) {
  const double mean = sample_mean(values);
  double sum = 0.0;
  for (double v : values) sum += (v - mean) * (v - mean);
  return sum / static_cast<double>(values.size() - 1);
}

}  // namespace

TEST_CASE("fitting procedure names round-trip") {
  CHECK(to_string(OuProcedure::p1) == "P1");
  CHECK(to_string(OuProcedure::p2) == "P2");
  CHECK(to_string(OuProcedure::p3) == "P3");
  CHECK(ou_procedure_from_string("P1") == OuProcedure::p1);
  CHECK(ou_procedure_from_string("p2") == OuProcedure::p2);
  CHECK(ou_procedure_from_string("P3") == OuProcedure::p3);
  CHECK_THROWS_AS(ou_procedure_from_string("P4"), Error);
}

TEST_CASE("surrogate parameters enforce the variance pin and serialize") {
  OuParams params = pinned_ou(50.0, {0.4, 0.9, 1.7});
  params.procedure = OuProcedure::p2;
  CHECK_NOTHROW(params.validate());
  CHECK(params.gamma_k(2) == doctest::Approx(0.9).epsilon(1e-15));

  SUBCASE("sigma off the fluctuation-dissipation value is rejected") {
    OuParams bad = params;
    bad.sigma[1] *= 1.0 + 1e-6;
    CHECK_THROWS_AS(bad.validate(), Error);
  }
  SUBCASE("nonpositive rates are rejected") {
    OuParams bad = params;
    bad.gamma[0] = -0.4;
    CHECK_THROWS_AS(bad.validate(), Error);
  }
  SUBCASE("size mismatch is rejected") {
    OuParams bad = params;
    bad.sigma.pop_back();
    CHECK_THROWS_AS(bad.validate(), Error);
  }
  SUBCASE("empty parameter set is rejected") {
    OuParams bad;
    bad.beta = 50.0;
    CHECK_THROWS_AS(bad.validate(), Error);
  }
  SUBCASE("text round-trip preserves every number") {
    params.procedure = OuProcedure::p3;
    params.converged = false;
    params.c1 = 1.25;
    const OuParams back = OuParams::from_text(params.to_text(), "test");
    CHECK(back.procedure == OuProcedure::p3);
    CHECK(back.converged == false);
    CHECK(back.beta == params.beta);
    CHECK(back.c1 == params.c1);
    REQUIRE(back.gamma.size() == params.gamma.size());
    for (std::size_t i = 0; i < params.gamma.size(); ++i) {
      CHECK(back.gamma[i] == params.gamma[i]);
      CHECK(back.sigma[i] == params.sigma[i]);
    }
    CHECK_THROWS_AS(OuParams::from_text("nonsense = 1\n", "test"),
                    Error);
  }
}

TEST_CASE("scaling-law fit produces rates linear in the wavenumber") {
  const ModelConfig config = amrs_config(ModelCase::additive, 6, 3);
  const TriadCoupling coupling = generate_couplings(config, 11);
  OuFitOptions options;
  options.procedure = OuProcedure::p1;
  options.c1 = 2.5;

  const OuParams params = fit_ou_parameters(config, coupling, nullptr, options);
  CHECK(params.procedure == OuProcedure::p1);
  CHECK(params.c1 == 2.5);
  CHECK(params.converged);
  REQUIRE(params.gamma.size() == 6);
  for (std::size_t k = 0; k < 6; ++k) {
    const double expected =
        2.5 * static_cast<double>(k + 1) / std::sqrt(config.beta);
    CHECK(params.gamma[k] == doctest::Approx(expected).epsilon(1e-14));
    CHECK(params.sigma[k] ==
          doctest::Approx(std::sqrt(expected / config.beta)).epsilon(1e-14));
  }

  options.c1 = 0.0;
  CHECK_THROWS_AS(fit_ou_parameters(config, coupling, nullptr, options),
                  Error);
}

TEST_CASE("area-based fit inverts the measured correlation areas") {
  const ModelConfig config = amrs_config(ModelCase::additive, 6, 2);
  const TriadCoupling coupling = generate_couplings(config, 12);
  // Distinct y and z decay rates per mode exercise the averaging.
  const std::vector<double> rates_y = {0.8, 1.6};
  const std::vector<double> rates_z = {1.2, 2.4};
  const CorrelationEstimate corr =
      analytic_bath_corr(rates_y, rates_z, config.beta, 0.05, 12.0);

  OuFitOptions options;
  options.procedure = OuProcedure::p2;
  const OuParams params =
      fit_ou_parameters(config, coupling, &corr, options);

  CHECK(params.procedure == OuProcedure::p2);
  CHECK(params.converged);
  REQUIRE(params.gamma.size() == 6);
  for (std::size_t k = 0; k < 2; ++k) {
    const std::size_t oy = corr.find("y" + std::to_string(k + 1));
    const std::size_t oz = corr.find("z" + std::to_string(k + 1));
    const double area = 0.5 * (trapezoid(corr.lags, corr.corr[oy]) +
                               trapezoid(corr.lags, corr.corr[oz]));
    const double expected = 1.0 / (2.0 * config.beta * area);
    CHECK(params.gamma[k] == doctest::Approx(expected).epsilon(1e-14));
    // The trapezoid area of the truncated exponentials is close to the
    // exact harmonic-mean-of-rates value.
    const double exact = 2.0 / (1.0 / rates_y[k] + 1.0 / rates_z[k]);
    CHECK(params.gamma[k] == doctest::Approx(exact).epsilon(5e-3));
  }
  // Uncoupled modes extend linearly in k from the first fitted rate.
  for (std::size_t k = 2; k < 6; ++k)
    CHECK(params.gamma[k] ==
          doctest::Approx(params.gamma[0] * static_cast<double>(k + 1))
              .epsilon(1e-14));
  for (std::size_t k = 0; k < 6; ++k)
    CHECK(params.sigma[k] ==
          doctest::Approx(std::sqrt(params.gamma[k] / config.beta))
              .epsilon(1e-14));

  SUBCASE("missing measured correlations are rejected") {
    bool caught = false;
    try {
      fit_ou_parameters(config, coupling, nullptr, options);
    } catch (const Error& err) {
      caught = true;
      CHECK(err.code() == ErrorCode::invalid_argument);
    }
    CHECK(caught);
  }
  SUBCASE("nonpositive correlation areas are rejected") {
    CorrelationEstimate bad = corr;
    for (auto& v : bad.corr[bad.find("y1")]) v = -v;
    bool caught = false;
    try {
      fit_ou_parameters(config, coupling, &bad, options);
    } catch (const Error& err) {
      caught = true;
      CHECK(err.code() == ErrorCode::nonpositive_area);
    }
    CHECK(caught);
  }
  SUBCASE("correlations must cover every active mode") {
    const CorrelationEstimate narrow =
        analytic_bath_corr({0.8}, {1.2}, config.beta, 0.05, 12.0);
    CHECK_THROWS_AS(fit_ou_parameters(config, coupling, &narrow, options),
                    Error);
  }
}

TEST_CASE("iterative refinement accepts an already-consistent surrogate") {
  // With zero triad coupling the hybrid system is exactly the surrogate
  // bath, so the first measured rates match the targets (up to Monte Carlo
  // noise well inside the tolerance) and the loop stops without touching
  // the initial iterate.
  const ModelConfig config = amrs_config(ModelCase::additive, 4, 2);
  const TriadCoupling coupling = zero_coupling(config);
  const CorrelationEstimate corr =
      analytic_bath_corr({2.0, 3.0}, {2.0, 3.0}, config.beta, 0.05, 4.0);

  OuFitOptions options;
  options.procedure = OuProcedure::p3;
  options.dt = 2e-3;
  options.lag_step = 0.05;
  options.lag_max = 4.0;
  options.n_samples = 4000;
  options.seed = 91;

  const OuParams params = fit_ou_parameters(config, coupling, &corr, options);
  CHECK(params.converged);
  REQUIRE(params.gamma.size() == 4);
  for (std::size_t k = 0; k < 2; ++k) {
    const std::size_t oy = corr.find("y" + std::to_string(k + 1));
    const std::size_t oz = corr.find("z" + std::to_string(k + 1));
    const double area = 0.5 * (trapezoid(corr.lags, corr.corr[oy]) +
                               trapezoid(corr.lags, corr.corr[oz]));
    const double target = 1.0 / (2.0 * config.beta * area);
    // Converging on the first pass leaves the targets untouched.
    CHECK(params.gamma[k] == target);
  }

  SUBCASE("an unreachable tolerance reports non-convergence") {
    OuFitOptions strict = options;
    strict.tolerance = 1e-12;
    strict.max_iterations = 1;
    const OuParams failed =
        fit_ou_parameters(config, coupling, &corr, strict);
    CHECK_FALSE(failed.converged);
    CHECK(failed.gamma[0] != params.gamma[0]);  // one corrective update ran
    CHECK_NOTHROW(failed.validate());
  }
}

TEST_CASE("symmetric matrix square root matches its defining covariance") {
  SUBCASE("hand-computed reference") {
    const Matrix2 s = symmetric_sqrt_2x2(0.02, 0.01, 0.02);
    CHECK(s[0][0] == doctest::Approx(0.136603).epsilon(1e-4));
    CHECK(s[0][1] == doctest::Approx(0.036603).epsilon(1e-4));
    CHECK(s[1][0] == doctest::Approx(s[0][1]).epsilon(1e-15));
    CHECK(s[1][1] == doctest::Approx(s[0][0]).epsilon(1e-15));
  }
  SUBCASE("squaring recovers random positive semidefinite matrices") {
    RngStream rng(515);
    for (int trial = 0; trial < 50; ++trial) {
      const double g11 = rng.gaussian(), g12 = rng.gaussian();
      const double g21 = rng.gaussian(), g22 = rng.gaussian();
      const double a11 = g11 * g11 + g12 * g12;
      const double a12 = g11 * g21 + g12 * g22;
      const double a22 = g21 * g21 + g22 * g22;
      const Matrix2 s = symmetric_sqrt_2x2(a11, a12, a22);
      CHECK(s[0][1] == s[1][0]);
      const double scale = std::max({a11, a22, 1.0});
      CHECK(s[0][0] * s[0][0] + s[0][1] * s[0][1] ==
            doctest::Approx(a11).epsilon(1e-12).scale(scale));
      CHECK(s[0][0] * s[0][1] + s[0][1] * s[1][1] ==
            doctest::Approx(a12).epsilon(1e-12).scale(scale));
      CHECK(s[0][1] * s[0][1] + s[1][1] * s[1][1] ==
            doctest::Approx(a22).epsilon(1e-12).scale(scale));
    }
  }
  SUBCASE("degenerate rank-one matrix") {
    const Matrix2 s = symmetric_sqrt_2x2(0.04, 0.04, 0.04);
    const double r = std::sqrt(0.02);
    CHECK(s[0][0] == doctest::Approx(r).epsilon(1e-12));
    CHECK(s[0][1] == doctest::Approx(r).epsilon(1e-12));
    CHECK(s[1][1] == doctest::Approx(r).epsilon(1e-12));
  }
  SUBCASE("zero matrix maps to zero") {
    const Matrix2 s = symmetric_sqrt_2x2(0.0, 0.0, 0.0);
    CHECK(s[0][0] == 0.0);
    CHECK(s[0][1] == 0.0);
    CHECK(s[1][0] == 0.0);
    CHECK(s[1][1] == 0.0);
  }
  SUBCASE("tiny negative round-off on the diagonal is forgiven") {
    const Matrix2 s = symmetric_sqrt_2x2(-1e-14, 0.0, 1.0);
    CHECK(std::isfinite(s[0][0]));
    CHECK(s[1][1] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("genuinely indefinite matrices are rejected") {
    CHECK_THROWS_AS(symmetric_sqrt_2x2(-0.5, 0.0, 1.0), Error);
    CHECK_THROWS_AS(symmetric_sqrt_2x2(1.0, 2.0, 1.0), Error);
  }
}

TEST_CASE("reduced additive parameters follow the quadrature formula") {
  const ModelConfig config = amrs_config(ModelCase::additive, 5, 3);
  const TriadCoupling coupling = generate_couplings(config, 21);
  const OuParams ou = pinned_ou(config.beta, {0.3, 0.7, 1.1, 1.6, 2.2});
  const double lambda = 4.0;

  const AmrsAdditiveParams params =
      compute_additive_params(coupling, ou, lambda, config.beta);
  double sum = 0.0;
  for (std::size_t k = 0; k < 3; ++k)
    sum += coupling.x1_yz[k] * coupling.x1_yz[k] / ou.gamma[k];
  const double expected = lambda * lambda / (4.0 * config.beta) * sum;
  CHECK(params.gamma == doctest::Approx(expected).epsilon(1e-14));
  CHECK(params.sigma ==
        doctest::Approx(std::sqrt(expected / config.beta)).epsilon(1e-14));
  CHECK(params.lambda == lambda);
  CHECK(params.beta == config.beta);

  SUBCASE("wrong coupling case is rejected") {
    const ModelConfig other = amrs_config(ModelCase::multiplicative, 5, 3);
    const TriadCoupling mul = generate_couplings(other, 21);
    CHECK_THROWS_AS(compute_additive_params(mul, ou, lambda, config.beta),
                    Error);
  }
  SUBCASE("text round-trip preserves every number") {
    const AmrsAdditiveParams back =
        AmrsAdditiveParams::from_text(params.to_text(), "test");
    CHECK(back.lambda == params.lambda);
    CHECK(back.beta == params.beta);
    CHECK(back.gamma == params.gamma);
    CHECK(back.sigma == params.sigma);
  }
}

TEST_CASE("reduced multiplicative parameters assemble the covariance data") {
  const ModelConfig config = amrs_config(ModelCase::multiplicative, 5, 3);
  const TriadCoupling coupling = generate_couplings(config, 22);
  const OuParams ou = pinned_ou(config.beta, {0.3, 0.7, 1.1, 1.6, 2.2});
  const double lambda = 3.0;

  const AmrsMultiplicativeParams params =
      compute_multiplicative_params(coupling, ou, lambda, config.beta);

  double a = 0.0, b = 0.0, c = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    a += (coupling.x1_2y[k] * coupling.x1_2y[k] +
          coupling.x1_2z[k] * coupling.x1_2z[k]) / ou.gamma[k];
    b += (coupling.x2_1y[k] * coupling.x2_1y[k] +
          coupling.x2_1z[k] * coupling.x2_1z[k]) / ou.gamma[k];
    c += (coupling.x1_2y[k] * coupling.x2_1y[k] +
          coupling.x1_2z[k] * coupling.x2_1z[k]) / ou.gamma[k];
  }
  a /= config.beta;
  b /= config.beta;
  c /= config.beta;

  CHECK(params.a == doctest::Approx(a).epsilon(1e-14));
  CHECK(params.b == doctest::Approx(b).epsilon(1e-14));
  CHECK(params.c == doctest::Approx(c).epsilon(1e-14));
  CHECK(params.gamma_bar == doctest::Approx(-0.5 * c).epsilon(1e-14));
  CHECK(params.n1 == doctest::Approx(config.beta * (a + c)).epsilon(1e-14));
  CHECK(params.n2 == doctest::Approx(config.beta * (b + c)).epsilon(1e-14));

  // The noise factor squares back to the covariance [[a, c], [c, b]]
  // (positive semidefinite by the Cauchy-Schwarz inequality).
  const Matrix2 s = params.sigma_bar;
  CHECK(s[0][0] * s[0][0] + s[0][1] * s[0][1] ==
        doctest::Approx(a).epsilon(1e-12));
  CHECK(s[0][0] * s[0][1] + s[0][1] * s[1][1] ==
        doctest::Approx(c).epsilon(1e-12).scale(std::max(a, b)));
  CHECK(s[0][1] * s[0][1] + s[1][1] * s[1][1] ==
        doctest::Approx(b).epsilon(1e-12));

  SUBCASE("combined-case couplings are accepted") {
    const ModelConfig both = amrs_config(ModelCase::combined, 5, 3);
    const TriadCoupling cpl = generate_couplings(both, 23);
    CHECK_NOTHROW(compute_multiplicative_params(cpl, ou, lambda, config.beta));
  }
  SUBCASE("additive couplings are rejected") {
    const ModelConfig add = amrs_config(ModelCase::additive, 5, 3);
    const TriadCoupling cpl = generate_couplings(add, 24);
    CHECK_THROWS_AS(
        compute_multiplicative_params(cpl, ou, lambda, config.beta),
        Error);
  }
  SUBCASE("text round-trip rebuilds the derived fields") {
    const AmrsMultiplicativeParams back =
        AmrsMultiplicativeParams::from_text(params.to_text(), "test");
    CHECK(back.lambda == params.lambda);
    CHECK(back.beta == params.beta);
    CHECK(back.a == params.a);
    CHECK(back.b == params.b);
    CHECK(back.c == params.c);
    CHECK(back.gamma_bar == params.gamma_bar);
    CHECK(back.n1 == params.n1);
    CHECK(back.n2 == params.n2);
    for (int r = 0; r < 2; ++r)
      for (int col = 0; col < 2; ++col)
        CHECK(back.sigma_bar[r][col] == params.sigma_bar[r][col]);
  }
}

TEST_CASE("reduced combined parameters add the linear damping block") {
  const ModelConfig config = amrs_config(ModelCase::combined, 5, 3);
  const TriadCoupling coupling = generate_couplings(config, 25);
  const OuParams ou = pinned_ou(config.beta, {0.3, 0.7, 1.1, 1.6, 2.2});
  const double lambda_a = 4.0, lambda_m = 3.0;

  const AmrsCombinedParams params = compute_combined_params(
      coupling, ou, lambda_a, lambda_m, config.beta);

  // The multiplicative block matches the standalone computation.
  const AmrsMultiplicativeParams mul =
      compute_multiplicative_params(coupling, ou, lambda_m, config.beta);
  CHECK(params.mul.a == mul.a);
  CHECK(params.mul.b == mul.b);
  CHECK(params.mul.c == mul.c);
  CHECK(params.mul.lambda == lambda_m);

  const double scale = lambda_a * lambda_a / (4.0 * config.beta);
  double g11 = 0.0, g22 = 0.0, g12 = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    g11 += coupling.x1_yz[k] * coupling.x1_yz[k] / ou.gamma[k];
    g22 += coupling.x2_yz[k] * coupling.x2_yz[k] / ou.gamma[k];
    g12 += coupling.x1_yz[k] * coupling.x2_yz[k] / ou.gamma[k];
  }
  CHECK(params.gamma_11 == doctest::Approx(scale * g11).epsilon(1e-14));
  CHECK(params.gamma_22 == doctest::Approx(scale * g22).epsilon(1e-14));
  CHECK(params.gamma_12 == doctest::Approx(scale * g12).epsilon(1e-14));
  CHECK(params.lambda_a == lambda_a);

  const Matrix2 s = params.sigma_add;
  const double beta = config.beta;
  CHECK(s[0][0] * s[0][0] + s[0][1] * s[0][1] ==
        doctest::Approx(params.gamma_11 / beta).epsilon(1e-12));
  CHECK(s[0][0] * s[0][1] + s[0][1] * s[1][1] ==
        doctest::Approx(params.gamma_12 / beta)
            .epsilon(1e-12)
            .scale(params.gamma_11 / beta + params.gamma_22 / beta));
  CHECK(s[0][1] * s[0][1] + s[1][1] * s[1][1] ==
        doctest::Approx(params.gamma_22 / beta).epsilon(1e-12));

  SUBCASE("non-combined couplings are rejected") {
    const ModelConfig add = amrs_config(ModelCase::additive, 5, 3);
    const TriadCoupling cpl = generate_couplings(add, 26);
    CHECK_THROWS_AS(
        compute_combined_params(cpl, ou, lambda_a, lambda_m, config.beta),
        Error);
  }
  SUBCASE("text round-trip rebuilds the derived fields") {
    const AmrsCombinedParams back =
        AmrsCombinedParams::from_text(params.to_text(), "test");
    CHECK(back.lambda_a == params.lambda_a);
    CHECK(back.gamma_11 == params.gamma_11);
    CHECK(back.gamma_22 == params.gamma_22);
    CHECK(back.gamma_12 == params.gamma_12);
    CHECK(back.mul.a == params.mul.a);
    CHECK(back.mul.n1 == params.mul.n1);
    for (int r = 0; r < 2; ++r)
      for (int col = 0; col < 2; ++col) {
        CHECK(back.sigma_add[r][col] == params.sigma_add[r][col]);
        CHECK(back.mul.sigma_bar[r][col] == params.mul.sigma_bar[r][col]);
      }
  }
}

TEST_CASE("stepper shapes match the case structure") {
  AmrsAdditiveParams add;
  add.lambda = 4.0;
  add.beta = 50.0;
  add.gamma = 0.5;
  add.sigma = std::sqrt(add.gamma / add.beta);
  const AmrsStepper s_add(add);
  CHECK(s_add.n_state() == 1);
  CHECK(s_add.n_noise() == 1);

  AmrsMultiplicativeParams mul = AmrsMultiplicativeParams::from_text(
      "lambda = 3\nbeta = 50\na = 0.02\nb = 0.03\nc = 0.01\n", "test");
  const AmrsStepper s_mul(mul);
  CHECK(s_mul.n_state() == 2);
  CHECK(s_mul.n_noise() == 2);

  AmrsCombinedParams both;
  both.mul = mul;
  both.lambda_a = 4.0;
  both.gamma_11 = 0.4;
  both.gamma_22 = 0.5;
  both.gamma_12 = 0.1;
  both.sigma_add = symmetric_sqrt_2x2(both.gamma_11 / 50.0,
                                      both.gamma_12 / 50.0,
                                      both.gamma_22 / 50.0);
  const AmrsStepper s_both(both);
  CHECK(s_both.n_state() == 2);
  CHECK(s_both.n_noise() == 4);
}

TEST_CASE("additive reduced dynamics reproduce the exact relaxation curve") {
  AmrsAdditiveParams params;
  params.lambda = 4.0;
  params.beta = 50.0;
  params.gamma = 0.5;
  params.sigma = std::sqrt(params.gamma / params.beta);
  const AmrsStepper stepper(params);

  ReducedCorrelationRequest req;
  req.dt = 0.01;
  req.lag_step = 0.05;
  req.lag_max = 2.0;
  req.n_samples = 20000;
  req.seed = 606;
  const CorrelationEstimate corr = amrs_correlation(stepper, params.beta, req);

  REQUIRE(corr.names.size() == 1);
  CHECK(corr.names[0] == "x1");
  CHECK(corr.n_samples == 20000);
  const double var = 1.0 / (2.0 * params.beta);
  for (std::size_t l = 0; l < corr.n_lags(); ++l) {
    const double expected = var * std::exp(-params.gamma * corr.lags[l]);
    // 3 standard errors plus a small Euler-Maruyama discretization
    // allowance (relative bias of order gamma * dt / 2 per unit lag).
    const double tol = 3.0 * corr.se[0][l] + 3e-3 * expected + 1e-6;
    CHECK(std::fabs(corr.corr[0][l] - expected) <= tol);
  }
}

TEST_CASE("coupled reduced dynamics preserve the equilibrium variance") {
  // The invariant product Gaussian is an exact stationary law of both
  // two-dimensional reduced systems; evolving an equilibrium ensemble must
  // keep the per-component variance at 1/(2 beta).
  const double beta = 50.0;
  const double var = 1.0 / (2.0 * beta);
  const std::size_t n_paths = 4000;
  const TimeGrid grid{0.0, 2e-3, 250};  // T = 0.5

  const auto terminal_variances = [&](const AmrsStepper& stepper,
                                      std::uint64_t seed) {
    std::vector<std::vector<double>> finals(stepper.n_state());
    for (std::size_t p = 0; p < n_paths; ++p) {
      RngStream rng = RngStream::derive(seed, p);
      std::vector<double> x0(stepper.n_state());
      for (auto& v : x0) v = rng.gaussian(0.0, std::sqrt(var));
      const auto path = simulate_amrs(stepper, x0, grid, rng);
      REQUIRE(path.size() == grid.n_steps + 1);
      for (std::size_t j = 0; j < stepper.n_state(); ++j)
        finals[j].push_back(path.back()[j]);
    }
    std::vector<double> out;
    for (const auto& column : finals) out.push_back(sample_variance(column));
    return out;
  };
  // 3.5 standard errors of a Gaussian variance estimate plus a weak-order
  // discretization allowance.
  const double tol =
      3.5 * var * std::sqrt(2.0 / static_cast<double>(n_paths)) + 0.02 * var;

  SUBCASE("multiplicative case") {
    const ModelConfig config = amrs_config(ModelCase::multiplicative, 5, 3);
    const OuParams ou = pinned_ou(beta, {0.3, 0.7, 1.1, 1.6, 2.2});
    const AmrsMultiplicativeParams params = compute_multiplicative_params(
        generate_couplings(config, 31), ou, 3.0, beta);
    const auto vars = terminal_variances(AmrsStepper(params), 717);
    for (double v : vars) CHECK(std::fabs(v - var) <= tol);
  }
  SUBCASE("combined case") {
    const ModelConfig config = amrs_config(ModelCase::combined, 5, 3);
    const OuParams ou = pinned_ou(beta, {0.3, 0.7, 1.1, 1.6, 2.2});
    const AmrsCombinedParams params = compute_combined_params(
        generate_couplings(config, 32), ou, 4.0, 3.0, beta);
    const auto vars = terminal_variances(AmrsStepper(params), 718);
    for (double v : vars) CHECK(std::fabs(v - var) <= tol);
  }
}

TEST_CASE("trajectory recorder keeps the grid and flags blow-ups") {
  AmrsAdditiveParams params;
  params.lambda = 4.0;
  params.beta = 50.0;
  params.gamma = 0.5;
  params.sigma = std::sqrt(params.gamma / params.beta);
  const AmrsStepper stepper(params);

  RngStream rng(44);
  const std::vector<double> x0 = {0.17};
  const TimeGrid grid{0.0, 0.01, 25};
  const auto path = simulate_amrs(stepper, x0, grid, rng);
  REQUIRE(path.size() == 26);
  CHECK(path[0][0] == 0.17);
  for (const auto& row : path) {
    REQUIRE(row.size() == 1);
    CHECK(std::isfinite(row[0]));
  }

  SUBCASE("wrong initial-state size is rejected") {
    const std::vector<double> bad = {0.1, 0.2};
    RngStream rng2(45);
    CHECK_THROWS_AS(simulate_amrs(stepper, bad, grid, rng2), Error);
  }
  SUBCASE("runaway trajectories raise a blow-up error") {
    // gamma dt >> 2 makes the explicit update violently unstable.
    AmrsAdditiveParams stiff;
    stiff.lambda = 4.0;
    stiff.beta = 50.0;
    stiff.gamma = 1e8;
    stiff.sigma = std::sqrt(stiff.gamma / stiff.beta);
    const AmrsStepper unstable(stiff);
    RngStream rng3(46);
    const std::vector<double> start = {1.0};
    bool caught = false;
    try {
      simulate_amrs(unstable, start, TimeGrid{0.0, 1.0, 100}, rng3);
    } catch (const Error& err) {
      caught = true;
      CHECK(err.code() == ErrorCode::numerical_blowup);
    }
    CHECK(caught);
  }
}

TEST_CASE("reduced correlation demands a commensurate grid") {
  AmrsAdditiveParams params;
  params.lambda = 4.0;
  params.beta = 50.0;
  params.gamma = 0.5;
  params.sigma = std::sqrt(params.gamma / params.beta);
  const AmrsStepper stepper(params);

  ReducedCorrelationRequest req;
  req.dt = 0.02;  // 0.05 / 0.02 is not an integer
  req.lag_step = 0.05;
  req.lag_max = 0.5;
  req.n_samples = 4;
  bool caught = false;
  try {
    amrs_correlation(stepper, params.beta, req);
  } catch (const Error& err) {
    caught = true;
    CHECK(err.code() == ErrorCode::grid_mismatch);
  }
  CHECK(caught);

  req.dt = 0.01;
  CHECK_THROWS_AS(amrs_correlation(stepper, -1.0, req), Error);
}

TEST_CASE("scale-separation diagnostic follows its definition") {
  CHECK(epsilon_diagnostic(4.0, 2.0, 50.0) ==
        doctest::Approx(4.0 / (2.0 * 10.0)).epsilon(1e-15));
  CHECK_THROWS_AS(epsilon_diagnostic(4.0, 0.0, 50.0), Error);
  CHECK_THROWS_AS(epsilon_diagnostic(4.0, 1.0, -2.0), Error);
}
