#include "modered/amrs.hpp"

#include <cmath>

#include "modered/errors.hpp"
#include "modered/kv.hpp"

namespace modered {

std::string to_string(OuProcedure procedure) {
  switch (procedure) {
    case OuProcedure::p1: return "P1";
    case OuProcedure::p2: return "P2";
    case OuProcedure::p3: return "P3";
  }
  fail(ErrorCode::invalid_argument, "unknown OU procedure");
}

OuProcedure ou_procedure_from_string(const std::string& text) {
  if (text == "P1" || text == "p1") return OuProcedure::p1;
  if (text == "P2" || text == "p2") return OuProcedure::p2;
  if (text == "P3" || text == "p3") return OuProcedure::p3;
  fail(ErrorCode::invalid_argument, "unknown OU procedure '" + text + "'");
}

void OuParams::validate() const {
  require(beta > 0, ErrorCode::invalid_argument, "OuParams: beta must be > 0");
  require(!gamma.empty() && gamma.size() == sigma.size(),
          ErrorCode::dimension_mismatch, "OuParams: gamma/sigma size mismatch");
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    require(gamma[i] > 0, ErrorCode::invalid_argument,
            "OuParams: gamma must be positive");
    const double pinned = std::sqrt(gamma[i] / beta);
    require(std::fabs(sigma[i] - pinned) <= 1e-12 * pinned,
            ErrorCode::invalid_argument,
            "OuParams: sigma must equal sqrt(gamma/beta)");
  }
}

std::string OuParams::to_text() const {
  KeyValueFile kv;
  kv.comment("bath surrogate: per-mode relaxation rates, variance-pinned noise");
  kv.set("procedure", to_string(procedure));
  kv.set("beta", beta);
  kv.set("c1", c1);
  kv.set("converged", static_cast<long>(converged ? 1 : 0));
  kv.set("n_modes", static_cast<long>(gamma.size()));
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    const std::string k = std::to_string(i + 1);
    kv.set("gamma[" + k + "]", gamma[i]);
    kv.set("sigma[" + k + "]", sigma[i]);
  }
  return kv.to_string();
}

OuParams OuParams::from_text(const std::string& text,
                             const std::string& context) {
  KeyValueFile kv = KeyValueFile::parse(text, context);
  OuParams params;
  params.procedure = ou_procedure_from_string(kv.get("procedure"));
  params.beta = kv.get_double("beta");
  params.c1 = kv.get_double("c1");
  params.converged = kv.get_int("converged") != 0;
  const long n = kv.get_int("n_modes");
  require(n >= 1, ErrorCode::io_failure, context + ": n_modes must be >= 1");
  params.gamma.resize(static_cast<std::size_t>(n));
  params.sigma.resize(static_cast<std::size_t>(n));
  for (long k = 1; k <= n; ++k) {
    params.gamma[static_cast<std::size_t>(k - 1)] =
        kv.get_double("gamma[" + std::to_string(k) + "]");
    params.sigma[static_cast<std::size_t>(k - 1)] =
        kv.get_double("sigma[" + std::to_string(k) + "]");
  }
  params.validate();
  return params;
}

// ---------------------------------------------------------------------------
// Surrogate fitting
// ---------------------------------------------------------------------------

namespace {

// Average damping rate of mode k from the measured y_k / z_k autocovariance
// areas.
double gamma_target(const CorrelationEstimate& corr, int k, double beta) {
  const std::size_t oy = corr.find("y" + std::to_string(k));
  const std::size_t oz = corr.find("z" + std::to_string(k));
  const double area =
      0.5 * (trapezoid(corr.lags, corr.corr[oy]) +
             trapezoid(corr.lags, corr.corr[oz]));
  require(area > 0, ErrorCode::nonpositive_area,
          "bath mode " + std::to_string(k) +
              ": correlation area is not positive");
  return 1.0 / (2.0 * beta * area);
}

// Drift of the hybrid system: resolved variables coupled to the first
// n_active bath modes, with the bath self-interaction replaced by the
// per-mode relaxation.  Compact layout [x..., y_1..y_na, z_1..z_na].
void hybrid_drift(const ModelConfig& config, const TriadCoupling& coupling,
                  std::span<const double> gamma_active,
                  std::span<const double> state, std::span<double> out) {
  const std::size_t m = config.n_resolved();
  const auto na = static_cast<std::size_t>(config.n_active);
  const double* y = state.data() + m;
  const double* z = y + na;
  double* dy = out.data() + m;
  double* dz = dy + na;

  for (auto& v : out) v = 0.0;
  for (std::size_t i = 0; i < na; ++i) {
    dy[i] = -gamma_active[i] * y[i];
    dz[i] = -gamma_active[i] * z[i];
  }
  const double la = config.lambda_a;
  const double lm = config.lambda_m;
  switch (config.model_case) {
    case ModelCase::additive: {
      const double x1 = state[0];
      double dx1 = 0.0;
      for (std::size_t i = 0; i < na; ++i) {
        dx1 += coupling.x1_yz[i] * y[i] * z[i];
        dy[i] += la * coupling.y_1z[i] * x1 * z[i];
        dz[i] += la * coupling.z_1y[i] * x1 * y[i];
      }
      out[0] = la * dx1;
      break;
    }
    case ModelCase::multiplicative: {
      const double x1 = state[0], x2 = state[1];
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t i = 0; i < na; ++i) {
        s1 += coupling.x1_2y[i] * y[i] + coupling.x1_2z[i] * z[i];
        s2 += coupling.x2_1y[i] * y[i] + coupling.x2_1z[i] * z[i];
        dy[i] += lm * coupling.y_12[i] * x1 * x2;
        dz[i] += lm * coupling.z_12[i] * x1 * x2;
      }
      out[0] = lm * s1 * x2;
      out[1] = lm * s2 * x1;
      break;
    }
    case ModelCase::combined: {
      const double x1 = state[0], x2 = state[1];
      double a1 = 0.0, a2 = 0.0, s1 = 0.0, s2 = 0.0;
      for (std::size_t i = 0; i < na; ++i) {
        a1 += coupling.x1_yz[i] * y[i] * z[i];
        a2 += coupling.x2_yz[i] * y[i] * z[i];
        s1 += coupling.x1_2y[i] * y[i] + coupling.x1_2z[i] * z[i];
        s2 += coupling.x2_1y[i] * y[i] + coupling.x2_1z[i] * z[i];
        dy[i] += la * (coupling.y_1z[i] * x1 + coupling.y_2z[i] * x2) * z[i] +
                 lm * coupling.y_12[i] * x1 * x2;
        dz[i] += la * (coupling.z_1y[i] * x1 + coupling.z_2y[i] * x2) * y[i] +
                 lm * coupling.z_12[i] * x1 * x2;
      }
      out[0] = la * a1 + lm * s1 * x2;
      out[1] = la * a2 + lm * s2 * x1;
      break;
    }
  }
}

// Measured surrogate damping rates of the hybrid system's bath modes.
std::vector<double> hybrid_gamma(const ModelConfig& config,
                                 const TriadCoupling& coupling,
                                 const std::vector<double>& gamma_active,
                                 const OuFitOptions& options,
                                 std::uint64_t seed) {
  const std::size_t m = config.n_resolved();
  const auto na = static_cast<std::size_t>(config.n_active);
  const std::size_t dim = m + 2 * na;
  const double root_var = std::sqrt(1.0 / (2.0 * config.beta));
  std::vector<double> sigma_active(na);
  for (std::size_t i = 0; i < na; ++i)
    sigma_active[i] = std::sqrt(gamma_active[i] / config.beta);

  std::vector<std::string> names;
  for (std::size_t i = 1; i <= na; ++i) names.push_back("y" + std::to_string(i));
  for (std::size_t i = 1; i <= na; ++i) names.push_back("z" + std::to_string(i));

  const auto every =
      static_cast<std::size_t>(std::llround(options.lag_step / options.dt));
  require(every >= 1 && std::fabs(options.lag_step -
                                  static_cast<double>(every) * options.dt) <
                            1e-9 * options.lag_step,
          ErrorCode::grid_mismatch, "OU fit: dt must divide lag_step");
  const auto n_lags = static_cast<std::size_t>(
      std::llround(options.lag_max / options.lag_step)) + 1;

  const SdeDrift drift = [&](std::span<const double> x,
                             std::span<double> out) {
    hybrid_drift(config, coupling, gamma_active, x, out);
  };
  const SdeDiffusion diffusion = [&, dim](std::span<const double>,
                                          std::span<double> out) {
    for (auto& v : out) v = 0.0;
    const std::size_t q = 2 * na;
    for (std::size_t i = 0; i < na; ++i) {
      out[(m + i) * q + i] = sigma_active[i];
      out[(m + na + i) * q + na + i] = sigma_active[i];
    }
  };

  const SampleRunner runner = [&, dim, every, n_lags](
                                  std::size_t sample,
                                  std::span<double> matrix) {
    RngStream rng = RngStream::derive(seed, sample);
    std::vector<double> state(dim);
    for (auto& v : state) v = rng.gaussian(0.0, root_var);
    SdeWorkspace ws;
    std::vector<double> draws(2 * na);
    for (std::size_t l = 0; l < n_lags; ++l) {
      if (l > 0)
        for (std::size_t s = 0; s < every; ++s) {
          for (auto& g : draws) g = rng.gaussian();
          euler_maruyama_step(drift, diffusion, draws.size(), options.dt,
                              draws, state, ws);
        }
      for (std::size_t o = 0; o < 2 * na; ++o)
        matrix[o * n_lags + l] = state[m + o];
    }
    return true;
  };

  const CorrelationEstimate corr =
      ensemble_correlation(names, n_lags, options.lag_step, options.n_samples,
                           options.threads, runner);
  std::vector<double> out(na);
  for (std::size_t i = 0; i < na; ++i)
    out[i] = gamma_target(corr, static_cast<int>(i + 1), config.beta);
  return out;
}

// Uncoupled modes follow the bath scaling law (rate linear in k), anchored
// at the fitted rate of mode 1.
void extend_and_pin(const ModelConfig& config, std::vector<double>& gamma,
                    OuParams& params) {
  gamma.resize(static_cast<std::size_t>(config.n_modes), 0.0);
  for (std::size_t i = static_cast<std::size_t>(config.n_active);
       i < gamma.size(); ++i)
    gamma[i] = gamma[0] * static_cast<double>(i + 1);
  params.gamma = gamma;
  params.sigma.resize(gamma.size());
  for (std::size_t i = 0; i < gamma.size(); ++i)
    params.sigma[i] = std::sqrt(gamma[i] / params.beta);
  params.validate();
}

}  // namespace

OuParams fit_ou_parameters(const ModelConfig& config,
                           const TriadCoupling& coupling,
                           const CorrelationEstimate* bath_corr,
                           const OuFitOptions& options) {
  config.validate();
  coupling.validate(config);
  OuParams params;
  params.procedure = options.procedure;
  params.beta = config.beta;

  if (options.procedure == OuProcedure::p1) {
    require(options.c1 > 0, ErrorCode::invalid_argument,
            "OU fit: P1 requires a positive c1");
    params.c1 = options.c1;
    std::vector<double> gamma(static_cast<std::size_t>(config.n_modes));
    for (std::size_t i = 0; i < gamma.size(); ++i)
      gamma[i] = options.c1 * static_cast<double>(i + 1) /
                 std::sqrt(config.beta);
    params.gamma = gamma;
    params.sigma.resize(gamma.size());
    for (std::size_t i = 0; i < gamma.size(); ++i)
      params.sigma[i] = std::sqrt(gamma[i] / config.beta);
    params.validate();
    return params;
  }

  require(bath_corr != nullptr, ErrorCode::invalid_argument,
          "OU fit: P2/P3 need measured bath correlations");
  const auto na = static_cast<std::size_t>(config.n_active);
  std::vector<double> target(na);
  for (std::size_t i = 0; i < na; ++i)
    target[i] =
        gamma_target(*bath_corr, static_cast<int>(i + 1), config.beta);

  std::vector<double> gamma = target;
  if (options.procedure == OuProcedure::p3) {
    params.converged = false;
    for (std::size_t iteration = 0;
         iteration < options.max_iterations && !params.converged;
         ++iteration) {
      const std::vector<double> surrogate = hybrid_gamma(
          config, coupling, gamma, options,
          RngStream::derive(options.seed, iteration).next_u64());
      double worst = 0.0;
      for (std::size_t i = 0; i < na; ++i)
        worst = std::max(worst, std::fabs(target[i] / surrogate[i] - 1.0));
      if (worst <= options.tolerance) {
        params.converged = true;
      } else {
        for (std::size_t i = 0; i < na; ++i)
          gamma[i] *= target[i] / surrogate[i];
      }
    }
  }
  extend_and_pin(config, gamma, params);
  return params;
}

// ---------------------------------------------------------------------------
// Reduced-model parameters
// ---------------------------------------------------------------------------

Matrix2 symmetric_sqrt_2x2(double a11, double a12, double a22) {
  const double scale = std::max({std::fabs(a11), std::fabs(a22),
                                 std::fabs(a12), 1e-300});
  require(a11 >= -1e-12 * scale && a22 >= -1e-12 * scale,
          ErrorCode::invalid_argument,
          "symmetric_sqrt_2x2: negative diagonal");
  double det = a11 * a22 - a12 * a12;
  require(det >= -1e-12 * scale * scale, ErrorCode::invalid_argument,
          "symmetric_sqrt_2x2: matrix is not positive semidefinite");
  det = std::max(det, 0.0);
  const double s = std::sqrt(det);
  const double t2 = a11 + a22 + 2.0 * s;
  Matrix2 out{};
  if (t2 <= 0.0) return out;  // zero matrix
  const double t = std::sqrt(t2);
  out[0][0] = (a11 + s) / t;
  out[0][1] = a12 / t;
  out[1][0] = a12 / t;
  out[1][1] = (a22 + s) / t;
  return out;
}

AmrsAdditiveParams compute_additive_params(const TriadCoupling& coupling,
                                           const OuParams& ou, double lambda,
                                           double beta) {
  require(coupling.model_case == ModelCase::additive,
          ErrorCode::invalid_argument,
          "additive parameters need an additive-case coupling");
  ou.validate();
  AmrsAdditiveParams params;
  params.lambda = lambda;
  params.beta = beta;
  double sum = 0.0;
  for (std::size_t i = 0; i < coupling.x1_yz.size(); ++i)
    sum += coupling.x1_yz[i] * coupling.x1_yz[i] / ou.gamma[i];
  params.gamma = lambda * lambda / (4.0 * beta) * sum;
  params.sigma = std::sqrt(params.gamma / beta);
  return params;
}

namespace {

AmrsMultiplicativeParams finish_multiplicative(double lambda, double beta,
                                               double a, double b, double c) {
  AmrsMultiplicativeParams params;
  params.lambda = lambda;
  params.beta = beta;
  params.a = a;
  params.b = b;
  params.c = c;
  params.gamma_bar = -0.5 * c;
  params.n1 = beta * (a + c);
  params.n2 = beta * (b + c);
  params.sigma_bar = symmetric_sqrt_2x2(a, c, b);
  return params;
}

}  // namespace

AmrsMultiplicativeParams compute_multiplicative_params(
    const TriadCoupling& coupling, const OuParams& ou, double lambda,
    double beta) {
  require(coupling.model_case == ModelCase::multiplicative ||
              coupling.model_case == ModelCase::combined,
          ErrorCode::invalid_argument,
          "multiplicative parameters need x1-x2 coupling families");
  ou.validate();
  double a = 0.0, b = 0.0, c = 0.0;
  for (std::size_t i = 0; i < coupling.x1_2y.size(); ++i) {
    const double inv_gamma = 1.0 / ou.gamma[i];
    a += inv_gamma * (coupling.x1_2y[i] * coupling.x1_2y[i] +
                      coupling.x1_2z[i] * coupling.x1_2z[i]);
    b += inv_gamma * (coupling.x2_1y[i] * coupling.x2_1y[i] +
                      coupling.x2_1z[i] * coupling.x2_1z[i]);
    c += inv_gamma * (coupling.x1_2y[i] * coupling.x2_1y[i] +
                      coupling.x1_2z[i] * coupling.x2_1z[i]);
  }
  return finish_multiplicative(lambda, beta, a / beta, b / beta, c / beta);
}

AmrsCombinedParams compute_combined_params(const TriadCoupling& coupling,
                                           const OuParams& ou, double lambda_a,
                                           double lambda_m, double beta) {
  require(coupling.model_case == ModelCase::combined,
          ErrorCode::invalid_argument,
          "combined parameters need a combined-case coupling");
  AmrsCombinedParams params;
  params.mul = compute_multiplicative_params(coupling, ou, lambda_m, beta);
  params.lambda_a = lambda_a;
  const double scale = lambda_a * lambda_a / (4.0 * beta);
  double g11 = 0.0, g22 = 0.0, g12 = 0.0;
  for (std::size_t i = 0; i < coupling.x1_yz.size(); ++i) {
    const double inv_gamma = 1.0 / ou.gamma[i];
    g11 += inv_gamma * coupling.x1_yz[i] * coupling.x1_yz[i];
    g22 += inv_gamma * coupling.x2_yz[i] * coupling.x2_yz[i];
    g12 += inv_gamma * coupling.x1_yz[i] * coupling.x2_yz[i];
  }
  params.gamma_11 = scale * g11;
  params.gamma_22 = scale * g22;
  params.gamma_12 = scale * g12;
  params.sigma_add = symmetric_sqrt_2x2(params.gamma_11 / beta,
                                        params.gamma_12 / beta,
                                        params.gamma_22 / beta);
  return params;
}

// ---------------------------------------------------------------------------
// Serialization of reduced-model parameters
// ---------------------------------------------------------------------------

std::string AmrsAdditiveParams::to_text() const {
  KeyValueFile kv;
  kv.comment("reduced additive model: relaxation rate and noise amplitude");
  kv.set("lambda", lambda);
  kv.set("beta", beta);
  kv.set("gamma", gamma);
  kv.set("sigma", sigma);
  return kv.to_string();
}

AmrsAdditiveParams AmrsAdditiveParams::from_text(const std::string& text,
                                                 const std::string& context) {
  KeyValueFile kv = KeyValueFile::parse(text, context);
  AmrsAdditiveParams params;
  params.lambda = kv.get_double("lambda");
  params.beta = kv.get_double("beta");
  params.gamma = kv.get_double("gamma");
  params.sigma = kv.get_double("sigma");
  return params;
}

std::string AmrsMultiplicativeParams::to_text() const {
  KeyValueFile kv;
  kv.comment("reduced multiplicative model: covariance entries; derived");
  kv.comment("fields are rebuilt on load");
  kv.set("lambda", lambda);
  kv.set("beta", beta);
  kv.set("a", a);
  kv.set("b", b);
  kv.set("c", c);
  kv.set("gamma_bar", gamma_bar);
  kv.set("n1", n1);
  kv.set("n2", n2);
  for (int r = 0; r < 2; ++r)
    for (int col = 0; col < 2; ++col)
      kv.set("sigma_bar[" + std::to_string(r + 1) + "][" +
                 std::to_string(col + 1) + "]",
             sigma_bar[static_cast<std::size_t>(r)]
                      [static_cast<std::size_t>(col)]);
  return kv.to_string();
}

AmrsMultiplicativeParams AmrsMultiplicativeParams::from_text(
    const std::string& text, const std::string& context) {
  KeyValueFile kv = KeyValueFile::parse(text, context);
  return finish_multiplicative(kv.get_double("lambda"), kv.get_double("beta"),
                               kv.get_double("a"), kv.get_double("b"),
                               kv.get_double("c"));
}

std::string AmrsCombinedParams::to_text() const {
  KeyValueFile kv;
  kv.comment("reduced combined model: multiplicative block plus additive");
  kv.comment("damping; derived fields are rebuilt on load");
  kv.set("lambda_m", mul.lambda);
  kv.set("beta", mul.beta);
  kv.set("a", mul.a);
  kv.set("b", mul.b);
  kv.set("c", mul.c);
  kv.set("lambda_a", lambda_a);
  kv.set("gamma_11", gamma_11);
  kv.set("gamma_22", gamma_22);
  kv.set("gamma_12", gamma_12);
  return kv.to_string();
}

AmrsCombinedParams AmrsCombinedParams::from_text(const std::string& text,
                                                 const std::string& context) {
  KeyValueFile kv = KeyValueFile::parse(text, context);
  AmrsCombinedParams params;
  params.mul = finish_multiplicative(
      kv.get_double("lambda_m"), kv.get_double("beta"), kv.get_double("a"),
      kv.get_double("b"), kv.get_double("c"));
  params.lambda_a = kv.get_double("lambda_a");
  params.gamma_11 = kv.get_double("gamma_11");
  params.gamma_22 = kv.get_double("gamma_22");
  params.gamma_12 = kv.get_double("gamma_12");
  params.sigma_add = symmetric_sqrt_2x2(params.gamma_11 / params.mul.beta,
                                        params.gamma_12 / params.mul.beta,
                                        params.gamma_22 / params.mul.beta);
  return params;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

AmrsStepper::AmrsStepper(const AmrsAdditiveParams& params)
    : n_state_(1), n_noise_(1), split_(false) {
  const double gamma = params.gamma;
  const double sigma = params.sigma;
  linear_ = [gamma](std::span<const double> x, std::span<double> out) {
    out[0] = -gamma * x[0];
  };
  diffusion_ = [sigma](std::span<const double>, std::span<double> out) {
    out[0] = sigma;
  };
}

AmrsStepper::AmrsStepper(const AmrsMultiplicativeParams& params)
    : n_state_(2), n_noise_(2), split_(true) {
  const double l2 = params.lambda * params.lambda;
  const double n1 = params.n1, n2 = params.n2, gb = params.gamma_bar;
  const double lambda = params.lambda;
  const Matrix2 sb = params.sigma_bar;
  nonlinear_ = [l2, n1, n2](std::span<const double> x, std::span<double> out) {
    out[0] = -l2 * n1 * x[1] * x[1] * x[0];
    out[1] = -l2 * n2 * x[0] * x[0] * x[1];
  };
  linear_ = [l2, gb](std::span<const double> x, std::span<double> out) {
    out[0] = -l2 * gb * x[0];
    out[1] = -l2 * gb * x[1];
  };
  diffusion_ = [lambda, sb](std::span<const double> x, std::span<double> out) {
    out[0] = lambda * sb[0][0] * x[1];
    out[1] = lambda * sb[0][1] * x[1];
    out[2] = lambda * sb[1][0] * x[0];
    out[3] = lambda * sb[1][1] * x[0];
  };
}

AmrsStepper::AmrsStepper(const AmrsCombinedParams& params)
    : n_state_(2), n_noise_(4), split_(true) {
  const double l2 = params.mul.lambda * params.mul.lambda;
  const double n1 = params.mul.n1, n2 = params.mul.n2;
  const double gb = params.mul.gamma_bar;
  const double lambda_m = params.mul.lambda;
  const Matrix2 sb = params.mul.sigma_bar;
  const Matrix2 sa = params.sigma_add;
  const double g11 = params.gamma_11, g22 = params.gamma_22,
               g12 = params.gamma_12;
  nonlinear_ = [l2, n1, n2](std::span<const double> x, std::span<double> out) {
    out[0] = -l2 * n1 * x[1] * x[1] * x[0];
    out[1] = -l2 * n2 * x[0] * x[0] * x[1];
  };
  linear_ = [l2, gb, g11, g22, g12](std::span<const double> x,
                                    std::span<double> out) {
    out[0] = -l2 * gb * x[0] - g11 * x[0] - g12 * x[1];
    out[1] = -l2 * gb * x[1] - g12 * x[0] - g22 * x[1];
  };
  diffusion_ = [lambda_m, sb, sa](std::span<const double> x,
                                  std::span<double> out) {
    out[0] = lambda_m * sb[0][0] * x[1];
    out[1] = lambda_m * sb[0][1] * x[1];
    out[2] = sa[0][0];
    out[3] = sa[0][1];
    out[4] = lambda_m * sb[1][0] * x[0];
    out[5] = lambda_m * sb[1][1] * x[0];
    out[6] = sa[1][0];
    out[7] = sa[1][1];
  };
}

void AmrsStepper::step(double dt, std::span<const double> gaussians,
                       std::span<double> state, SdeWorkspace& ws) const {
  if (split_)
    split_milstein_step(nonlinear_, linear_, diffusion_, n_noise_, dt,
                        gaussians, state, ws);
  else
    euler_maruyama_step(linear_, diffusion_, n_noise_, dt, gaussians, state,
                        ws);
}

std::vector<std::vector<double>> simulate_amrs(const AmrsStepper& stepper,
                                               std::span<const double> x0,
                                               const TimeGrid& grid,
                                               RngStream& rng) {
  grid.validate();
  require(x0.size() == stepper.n_state(), ErrorCode::dimension_mismatch,
          "simulate_amrs: wrong initial-state size");
  std::vector<std::vector<double>> trajectory;
  trajectory.reserve(grid.n_steps + 1);
  std::vector<double> state(x0.begin(), x0.end());
  trajectory.emplace_back(state);
  SdeWorkspace ws;
  std::vector<double> draws(stepper.n_noise());
  for (std::size_t i = 0; i < grid.n_steps; ++i) {
    for (auto& g : draws) g = rng.gaussian();
    stepper.step(grid.dt, draws, state, ws);
    for (double v : state)
      require(std::isfinite(v), ErrorCode::numerical_blowup,
              "simulate_amrs: state left the finite range at step " +
                  std::to_string(i + 1));
    trajectory.emplace_back(state);
  }
  return trajectory;
}

CorrelationEstimate amrs_correlation(const AmrsStepper& stepper, double beta,
                                     const ReducedCorrelationRequest& req) {
  require(beta > 0, ErrorCode::invalid_argument,
          "amrs_correlation: beta must be > 0");
  const auto every =
      static_cast<std::size_t>(std::llround(req.lag_step / req.dt));
  require(every >= 1 &&
              std::fabs(req.lag_step - static_cast<double>(every) * req.dt) <
                  1e-9 * req.lag_step,
          ErrorCode::grid_mismatch, "amrs_correlation: dt must divide lag_step");
  const auto n_lags =
      static_cast<std::size_t>(std::llround(req.lag_max / req.lag_step)) + 1;
  const std::size_t m = stepper.n_state();
  const double root_var = std::sqrt(1.0 / (2.0 * beta));

  std::vector<std::string> names;
  for (std::size_t j = 1; j <= m; ++j) names.push_back("x" + std::to_string(j));

  const SampleRunner runner = [&, every, n_lags](std::size_t sample,
                                                 std::span<double> matrix) {
    RngStream rng = RngStream::derive(req.seed, sample);
    std::vector<double> state(m);
    for (auto& v : state) v = rng.gaussian(0.0, root_var);
    SdeWorkspace ws;
    std::vector<double> draws(stepper.n_noise());
    for (std::size_t l = 0; l < n_lags; ++l) {
      if (l > 0)
        for (std::size_t s = 0; s < every; ++s) {
          for (auto& g : draws) g = rng.gaussian();
          stepper.step(req.dt, draws, state, ws);
        }
      for (std::size_t o = 0; o < m; ++o) {
        if (!std::isfinite(state[o])) return false;
        matrix[o * n_lags + l] = state[o];
      }
    }
    return true;
  };
  return ensemble_correlation(names, n_lags, req.lag_step, req.n_samples,
                              req.threads, runner);
}

double epsilon_diagnostic(double lambda_eff, double gamma_1, double beta) {
  require(gamma_1 > 0 && beta > 0, ErrorCode::invalid_argument,
          "epsilon_diagnostic: gamma_1 and beta must be positive");
  return lambda_eff / (gamma_1 * std::sqrt(2.0 * beta));
}

}  // namespace modered
