#include "modered/stats.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "modered/csv.hpp"
#include "modered/errors.hpp"
#include "modered/integrators.hpp"
#include "modered/kv.hpp"
#include "modered/threading.hpp"

namespace modered {

double trapezoid(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorCode::dimension_mismatch,
          "trapezoid: grid and values differ in length");
  double area = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i)
    area += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return area;
}

// ---------------------------------------------------------------------------
// Generic ensemble matrix averaging
// ---------------------------------------------------------------------------

namespace {

struct MatrixMean {
  std::vector<double> mean;  // row-major [row][lag]
  std::vector<double> se;
  std::size_t n_samples = 0;
  std::size_t n_skipped = 0;
};

// Averages runner-filled matrices over independent samples.  One partial
// accumulator per chunk, merged in chunk order, keeps the result
// deterministic for a fixed thread count.
MatrixMean ensemble_matrix_mean(std::size_t n_rows, std::size_t n_lags,
                                std::size_t n_samples, int threads,
                                const SampleRunner& runner) {
  require(n_rows >= 1 && n_lags >= 1, ErrorCode::invalid_argument,
          "ensemble averaging: empty matrix");
  require(n_samples >= 1, ErrorCode::invalid_argument,
          "ensemble averaging: need at least one sample");
  const int resolved = resolve_thread_count(threads);
  const std::size_t n_chunks =
      std::min<std::size_t>(std::max(resolved, 1), n_samples);
  const std::size_t cells = n_rows * n_lags;

  std::vector<std::vector<double>> sums(n_chunks), sumsqs(n_chunks);
  std::vector<std::size_t> used(n_chunks, 0), skipped(n_chunks, 0);

  parallel_chunks(n_samples, resolved,
                  [&](std::size_t chunk, std::size_t begin, std::size_t end) {
                    auto& sum = sums[chunk];
                    auto& sumsq = sumsqs[chunk];
                    sum.assign(cells, 0.0);
                    sumsq.assign(cells, 0.0);
                    std::vector<double> matrix(cells);
                    for (std::size_t s = begin; s < end; ++s) {
                      std::fill(matrix.begin(), matrix.end(), 0.0);
                      bool ok = runner(s, matrix);
                      if (ok)
                        for (double v : matrix)
                          if (!std::isfinite(v)) {
                            ok = false;
                            break;
                          }
                      if (!ok) {
                        ++skipped[chunk];
                        continue;
                      }
                      ++used[chunk];
                      for (std::size_t c = 0; c < cells; ++c) {
                        sum[c] += matrix[c];
                        sumsq[c] += matrix[c] * matrix[c];
                      }
                    }
                  });

  MatrixMean out;
  out.mean.assign(cells, 0.0);
  out.se.assign(cells, 0.0);
  for (std::size_t chunk = 0; chunk < n_chunks; ++chunk) {
    out.n_samples += used[chunk];
    out.n_skipped += skipped[chunk];
    if (sums[chunk].empty()) continue;
    for (std::size_t c = 0; c < cells; ++c) {
      out.mean[c] += sums[chunk][c];
      out.se[c] += sumsqs[chunk][c];
    }
  }
  require(out.n_samples >= 1, ErrorCode::numerical_blowup,
          "ensemble averaging: every sample was skipped");
  const double n = static_cast<double>(out.n_samples);
  for (std::size_t c = 0; c < cells; ++c) {
    const double mean = out.mean[c] / n;
    double var = 0.0;
    if (out.n_samples >= 2)
      var = std::max(0.0, (out.se[c] - n * mean * mean) / (n - 1.0));
    out.mean[c] = mean;
    out.se[c] = std::sqrt(var / n);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// CorrelationEstimate
// ---------------------------------------------------------------------------

std::size_t CorrelationEstimate::find(const std::string& name) const {
  for (std::size_t o = 0; o < names.size(); ++o)
    if (names[o] == name) return o;
  fail(ErrorCode::invalid_argument,
       "correlation estimate has no observable named '" + name + "'");
}

std::string CorrelationEstimate::to_csv() const {
  CsvTable table;
  table.columns.push_back("lag");
  table.data.push_back(lags);
  for (std::size_t o = 0; o < names.size(); ++o) {
    table.columns.push_back("corr_" + names[o]);
    table.data.push_back(corr[o]);
    table.columns.push_back("se_" + names[o]);
    table.data.push_back(se[o]);
  }
  return csv_to_string(table);
}

CorrelationEstimate CorrelationEstimate::from_csv(const std::string& text,
                                                  const std::string& context) {
  const CsvTable table = csv_from_string(text, context);
  require(!table.columns.empty() && table.columns[0] == "lag",
          ErrorCode::io_failure, context + ": first column must be 'lag'");
  require(table.columns.size() % 2 == 1, ErrorCode::io_failure,
          context + ": expected corr/se column pairs");
  CorrelationEstimate est;
  est.lags = table.data[0];
  require(est.lags.size() >= 2, ErrorCode::io_failure,
          context + ": need at least two lags");
  est.lag_step = est.lags[1] - est.lags[0];
  for (std::size_t c = 1; c + 1 < table.columns.size() + 1; c += 2) {
    const std::string& corr_name = table.columns[c];
    const std::string& se_name = table.columns[c + 1];
    require(corr_name.rfind("corr_", 0) == 0 && se_name.rfind("se_", 0) == 0,
            ErrorCode::io_failure, context + ": unexpected column names");
    const std::string name = corr_name.substr(5);
    require(se_name.substr(3) == name, ErrorCode::io_failure,
            context + ": corr/se columns out of order");
    est.names.push_back(name);
    est.corr.push_back(table.data[c]);
    est.se.push_back(table.data[c + 1]);
  }
  return est;
}

CorrelationEstimate ensemble_correlation(std::vector<std::string> names,
                                         std::size_t n_lags, double lag_step,
                                         std::size_t n_samples, int threads,
                                         const SampleRunner& runner) {
  const std::size_t n_obs = names.size();
  // The runner records raw observable values; products against lag zero are
  // formed here so every caller gets identical conventions.
  const SampleRunner product_runner = [&](std::size_t sample,
                                          std::span<double> matrix) {
    if (!runner(sample, matrix)) return false;
    for (std::size_t o = 0; o < n_obs; ++o) {
      double* row = matrix.data() + o * n_lags;
      const double at_zero = row[0];
      for (std::size_t l = n_lags; l-- > 0;) row[l] *= at_zero;
    }
    return true;
  };
  const MatrixMean mm = ensemble_matrix_mean(n_obs, n_lags, n_samples, threads,
                                             product_runner);
  CorrelationEstimate est;
  est.lag_step = lag_step;
  est.names = std::move(names);
  est.n_samples = mm.n_samples;
  est.n_skipped = mm.n_skipped;
  est.lags.resize(n_lags);
  for (std::size_t l = 0; l < n_lags; ++l)
    est.lags[l] = static_cast<double>(l) * lag_step;
  est.corr.resize(n_obs);
  est.se.resize(n_obs);
  for (std::size_t o = 0; o < n_obs; ++o) {
    est.corr[o].assign(mm.mean.begin() + o * n_lags,
                       mm.mean.begin() + (o + 1) * n_lags);
    est.se[o].assign(mm.se.begin() + o * n_lags,
                     mm.se.begin() + (o + 1) * n_lags);
  }
  return est;
}

// ---------------------------------------------------------------------------
// Full-system observables and correlation
// ---------------------------------------------------------------------------

namespace {

// Flat state index of "x<j>", "y<k>" or "z<k>".
std::size_t observable_index(const ModelConfig& config,
                             const std::string& name) {
  require(name.size() >= 2, ErrorCode::invalid_argument,
          "bad observable name '" + name + "'");
  const char kind = name[0];
  const long num = parse_int(name.substr(1), "observable '" + name + "'");
  const long m = static_cast<long>(config.n_resolved());
  if (kind == 'x') {
    require(num >= 1 && num <= m, ErrorCode::invalid_argument,
            "observable '" + name + "' out of range");
    return static_cast<std::size_t>(num - 1);
  }
  require(num >= 1 && num <= config.n_modes, ErrorCode::invalid_argument,
          "observable '" + name + "' out of range");
  if (kind == 'y') return static_cast<std::size_t>(m + num - 1);
  require(kind == 'z', ErrorCode::invalid_argument,
          "observable '" + name + "' must start with x, y or z");
  return static_cast<std::size_t>(m + config.n_modes + num - 1);
}

}  // namespace

CorrelationEstimate full_system_correlation(const ModelConfig& config,
                                            const TriadCoupling& coupling,
                                            const FullCorrelationRequest& req) {
  config.validate();
  coupling.validate(config);
  require(req.dt > 0 && req.lag_step > 0 && req.lag_max > 0,
          ErrorCode::invalid_argument, "correlation request: bad grid");
  require(!req.observables.empty(), ErrorCode::invalid_argument,
          "correlation request: no observables");
  const auto every = static_cast<std::size_t>(
      std::llround(req.lag_step / req.dt));
  require(every >= 1 &&
              std::fabs(req.lag_step - static_cast<double>(every) * req.dt) <
                  1e-9 * req.lag_step,
          ErrorCode::grid_mismatch,
          "correlation request: dt must divide lag_step");
  const auto n_lags = static_cast<std::size_t>(
      std::llround(req.lag_max / req.lag_step)) + 1;

  std::vector<std::size_t> index;
  index.reserve(req.observables.size());
  for (const auto& name : req.observables)
    index.push_back(observable_index(config, name));
  const std::size_t n_obs = index.size();

  const SampleRunner runner = [&, every, n_lags](std::size_t sample,
                                                 std::span<double> matrix) {
    RngStream rng = RngStream::derive(req.seed, sample);
    FullState state = sample_initial_state(config, rng);
    Rk4Workspace ws;
    const auto rhs = [&](double, std::span<const double> x,
                         std::span<double> dxdt) {
      full_rhs(config, coupling, x, dxdt);
    };
    for (std::size_t l = 0; l < n_lags; ++l) {
      if (l > 0)
        for (std::size_t s = 0; s < every; ++s)
          rk4_step(rhs, 0.0, req.dt, state.data, ws);
      for (std::size_t o = 0; o < n_obs; ++o)
        matrix[o * n_lags + l] = state.data[index[o]];
    }
    return true;
  };
  return ensemble_correlation(req.observables, n_lags, req.lag_step,
                              req.n_samples, req.threads, runner);
}

double gamma_from_area(std::span<const double> lags,
                       std::span<const double> corr, double beta) {
  require(beta > 0, ErrorCode::invalid_argument,
          "gamma_from_area: beta must be > 0");
  const double area = trapezoid(lags, corr);
  require(area > 0, ErrorCode::nonpositive_area,
          "gamma_from_area: correlation area is not positive");
  return 1.0 / (2.0 * beta * area);
}

// ---------------------------------------------------------------------------
// Memory kernels
// ---------------------------------------------------------------------------

KernelEstimate estimate_memory_kernels(const ModelConfig& config,
                                       const TriadCoupling& coupling,
                                       const HermiteBasis& basis,
                                       const KernelRequest& req) {
  config.validate();
  coupling.validate(config);
  basis.validate();
  require(req.dt > 0 && req.ds > 0 && req.horizon > 0,
          ErrorCode::invalid_argument, "kernel request: bad grid");
  const auto every = static_cast<std::size_t>(std::llround(req.ds / req.dt));
  require(every >= 1 &&
              std::fabs(req.ds - static_cast<double>(every) * req.dt) <
                  1e-9 * req.ds,
          ErrorCode::grid_mismatch, "kernel request: dt must divide ds");
  const auto n_lags =
      static_cast<std::size_t>(std::llround(req.horizon / req.ds)) + 1;

  const std::size_t n_eq = config.n_resolved();
  const std::size_t n_f = basis.size();
  // Row layout: noise rows (one per equation) first, then kernel rows in
  // equation-major order over all basis functions.
  const std::size_t n_rows = n_eq + n_eq * n_f;

  const SampleRunner runner = [&, every, n_lags](std::size_t sample,
                                                 std::span<double> matrix) {
    RngStream rng = RngStream::derive(req.seed, sample);
    FullState state = sample_initial_state(config, rng);
    Rk4Workspace ws;
    const auto rhs = [&](double, std::span<const double> x,
                         std::span<double> dxdt) {
      full_rhs(config, coupling, x, dxdt);
    };

    // Weights at time zero: v_j = (L x_j)(x0) and w_f = (L h^f)(x0), the
    // latter via the chain rule over resolved variables only.
    std::vector<double> v0(n_eq), w0(n_f);
    resolved_rhs(config, coupling, state.data, v0);
    std::span<const double> resolved(state.data.data(), n_eq);
    for (std::size_t f = 0; f < n_f; ++f) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n_eq; ++j)
        acc += v0[j] * basis.derivative(f, j, resolved);
      w0[f] = acc;
    }

    std::vector<double> u(n_eq);
    for (std::size_t l = 0; l < n_lags; ++l) {
      if (l > 0)
        for (std::size_t s = 0; s < every; ++s)
          rk4_step(rhs, 0.0, req.dt, state.data, ws);
      resolved_rhs(config, coupling, state.data, u);
      for (std::size_t j = 0; j < n_eq; ++j) {
        matrix[j * n_lags + l] = u[j] * v0[j];
        for (std::size_t f = 0; f < n_f; ++f)
          matrix[(n_eq + j * n_f + f) * n_lags + l] = u[j] * w0[f];
      }
    }
    return true;
  };

  const MatrixMean mm =
      ensemble_matrix_mean(n_rows, n_lags, req.n_samples, req.threads, runner);

  KernelEstimate est;
  est.ds = req.ds;
  est.n_samples = mm.n_samples;
  est.n_skipped = mm.n_skipped;
  est.lags.resize(n_lags);
  for (std::size_t l = 0; l < n_lags; ++l)
    est.lags[l] = static_cast<double>(l) * req.ds;
  est.term_names.resize(n_f);
  for (std::size_t f = 0; f < n_f; ++f) est.term_names[f] = basis.term_name(f);

  const auto row = [&](std::size_t r) {
    return std::vector<double>(mm.mean.begin() + r * n_lags,
                               mm.mean.begin() + (r + 1) * n_lags);
  };
  const auto row_se = [&](std::size_t r) {
    return std::vector<double>(mm.se.begin() + r * n_lags,
                               mm.se.begin() + (r + 1) * n_lags);
  };
  est.noise_acf.resize(n_eq);
  est.noise_se.resize(n_eq);
  est.k.resize(n_eq);
  est.k_se.resize(n_eq);
  for (std::size_t j = 0; j < n_eq; ++j) {
    est.noise_acf[j] = row(j);
    est.noise_se[j] = row_se(j);
    est.k[j].resize(n_f);
    est.k_se[j].resize(n_f);
    for (std::size_t f = 0; f < n_f; ++f) {
      est.k[j][f] = row(n_eq + j * n_f + f);
      est.k_se[j][f] = row_se(n_eq + j * n_f + f);
    }
  }
  return est;
}

std::string kernel_estimate_to_csv(const KernelEstimate& est) {
  CsvTable table;
  table.columns.push_back("lag");
  table.data.push_back(est.lags);
  const std::size_t n_eq = est.noise_acf.size();
  for (std::size_t j = 0; j < n_eq; ++j) {
    const std::string eq = "x" + std::to_string(j + 1);
    table.columns.push_back("noise_" + eq);
    table.data.push_back(est.noise_acf[j]);
    table.columns.push_back("noise_se_" + eq);
    table.data.push_back(est.noise_se[j]);
  }
  for (std::size_t j = 0; j < n_eq; ++j) {
    const std::string eq = "x" + std::to_string(j + 1);
    for (std::size_t f = 0; f < est.term_names.size(); ++f) {
      table.columns.push_back("k_" + eq + "_" + est.term_names[f]);
      table.data.push_back(est.k[j][f]);
      table.columns.push_back("k_se_" + eq + "_" + est.term_names[f]);
      table.data.push_back(est.k_se[j][f]);
    }
  }
  return csv_to_string(table);
}

KernelEstimate kernel_estimate_from_csv(const std::string& text,
                                        const std::string& context) {
  const CsvTable table = csv_from_string(text, context);
  require(!table.columns.empty() && table.columns[0] == "lag",
          ErrorCode::io_failure, context + ": first column must be 'lag'");
  KernelEstimate est;
  est.lags = table.data[0];
  require(est.lags.size() >= 2, ErrorCode::io_failure,
          context + ": need at least two lags");
  est.ds = est.lags[1] - est.lags[0];

  std::size_t c = 1;
  while (c < table.columns.size() &&
         table.columns[c].rfind("noise_x", 0) == 0) {
    require(c + 1 < table.columns.size() &&
                table.columns[c + 1].rfind("noise_se_x", 0) == 0,
            ErrorCode::io_failure, context + ": missing noise stderr column");
    est.noise_acf.push_back(table.data[c]);
    est.noise_se.push_back(table.data[c + 1]);
    c += 2;
  }
  const std::size_t n_eq = est.noise_acf.size();
  require(n_eq >= 1, ErrorCode::io_failure, context + ": no noise columns");

  est.k.resize(n_eq);
  est.k_se.resize(n_eq);
  for (std::size_t j = 0; j < n_eq; ++j) {
    const std::string prefix = "k_x" + std::to_string(j + 1) + "_";
    const std::string se_prefix = "k_se_x" + std::to_string(j + 1) + "_";
    while (c < table.columns.size() &&
           table.columns[c].rfind(prefix, 0) == 0) {
      const std::string term = table.columns[c].substr(prefix.size());
      require(c + 1 < table.columns.size() &&
                  table.columns[c + 1] == se_prefix + term,
              ErrorCode::io_failure,
              context + ": missing kernel stderr column for " + term);
      if (j == 0) est.term_names.push_back(term);
      est.k[j].push_back(table.data[c]);
      est.k_se[j].push_back(table.data[c + 1]);
      c += 2;
    }
    require(est.k[j].size() == est.term_names.size(), ErrorCode::io_failure,
            context + ": kernel column count differs between equations");
  }
  require(c == table.columns.size(), ErrorCode::io_failure,
          context + ": unexpected trailing columns");
  return est;
}

// ---------------------------------------------------------------------------
// Colored noise
// ---------------------------------------------------------------------------

std::string ColoredNoiseModel::to_text() const {
  KeyValueFile kv;
  kv.comment("moving-average noise representation");
  kv.set("dt", dt);
  kv.set("n_taps", static_cast<long>(taps.size()));
  for (std::size_t i = 0; i < taps.size(); ++i)
    kv.set("tap[" + std::to_string(i) + "]", taps[i]);
  return kv.to_string();
}

ColoredNoiseModel ColoredNoiseModel::from_text(const std::string& text,
                                               const std::string& context) {
  KeyValueFile kv = KeyValueFile::parse(text, context);
  ColoredNoiseModel model;
  model.dt = kv.get_double("dt");
  const long n = kv.get_int("n_taps");
  require(n >= 1, ErrorCode::io_failure, context + ": n_taps must be >= 1");
  model.taps.resize(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i)
    model.taps[static_cast<std::size_t>(i)] =
        kv.get_double("tap[" + std::to_string(i) + "]");
  return model;
}

namespace {

// Direct discrete Fourier transforms; the grids here are a few thousand
// points, so the quadratic cost is negligible next to the simulations.
std::vector<std::complex<double>> dft(
    std::span<const std::complex<double>> x, int sign) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  const double base = sign * 2.0 * std::numbers::pi / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      const double angle = base * static_cast<double>(k) *
                           static_cast<double>(m);
      acc += x[m] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace

ColoredNoiseModel fit_ma_coefficients(std::span<const double> acf, double dt,
                                      std::size_t n_taps) {
  const std::size_t n = acf.size();
  require(n >= 2, ErrorCode::invalid_argument,
          "fit_ma_coefficients: need at least two autocovariance lags");
  require(dt > 0, ErrorCode::invalid_argument,
          "fit_ma_coefficients: dt must be > 0");
  require(acf[0] > 0, ErrorCode::invalid_correlation,
          "fit_ma_coefficients: lag-0 variance must be positive");

  // Spectrum of the even periodic extension of the autocovariance.
  const std::size_t half = n - 1;
  const std::size_t big_n = 2 * half;
  std::vector<double> spectrum(big_n);
  for (std::size_t k = 0; k < big_n; ++k) {
    double s = acf[0] + (k % 2 == 0 ? acf[half] : -acf[half]);
    for (std::size_t m = 1; m < half; ++m)
      s += 2.0 * acf[m] *
           std::cos(2.0 * std::numbers::pi * static_cast<double>(k) *
                    static_cast<double>(m) / static_cast<double>(big_n));
    spectrum[k] = s;
  }
  double positive = 0.0, negative = 0.0, peak = 0.0;
  for (double s : spectrum) {
    positive += std::max(s, 0.0);
    negative += std::max(-s, 0.0);
    peak = std::max(peak, s);
  }
  require(negative <= 0.01 * positive, ErrorCode::invalid_correlation,
          "fit_ma_coefficients: spectrum has too much negative mass");
  const double floor = 1e-12 * peak;
  for (double& s : spectrum) s = std::max(s, floor);

  // Real cepstrum of the half-log spectrum, folded onto causal lags; its
  // spectrum exponentiates to the minimum-phase square root.
  std::vector<std::complex<double>> log_half(big_n);
  for (std::size_t k = 0; k < big_n; ++k)
    log_half[k] = 0.5 * std::log(spectrum[k]);
  std::vector<std::complex<double>> cepstrum = dft(log_half, +1);
  for (auto& c : cepstrum) c /= static_cast<double>(big_n);
  std::vector<std::complex<double>> folded(big_n, 0.0);
  folded[0] = cepstrum[0];
  for (std::size_t m = 1; m < half; ++m) folded[m] = 2.0 * cepstrum[m];
  folded[half] = cepstrum[half];
  std::vector<std::complex<double>> factor_log = dft(folded, -1);
  std::vector<std::complex<double>> factor(big_n);
  for (std::size_t k = 0; k < big_n; ++k)
    factor[k] = std::exp(factor_log[k]);
  std::vector<std::complex<double>> impulse = dft(factor, +1);

  std::size_t m_taps = n_taps;
  if (m_taps == 0) {
    double weight = 0.0;
    for (double r : acf) weight += std::fabs(r);
    const double ratio = 5.0 * weight / acf[0];
    m_taps = static_cast<std::size_t>(std::ceil(ratio)) + 1;
    m_taps = std::clamp<std::size_t>(m_taps, 8, n - 1);
  }
  require(m_taps >= 1 && m_taps <= big_n, ErrorCode::invalid_argument,
          "fit_ma_coefficients: tap count out of range");

  ColoredNoiseModel model;
  model.dt = dt;
  model.taps.resize(m_taps);
  for (std::size_t i = 0; i < m_taps; ++i)
    model.taps[i] = impulse[i].real() / static_cast<double>(big_n);

  double mass = 0.0;
  for (double a : model.taps) mass += a * a;
  require(mass > 0, ErrorCode::invalid_correlation,
          "fit_ma_coefficients: degenerate factorisation");
  const double scale = std::sqrt(acf[0] / mass);
  for (double& a : model.taps) a *= scale;
  return model;
}

std::vector<double> ma_autocovariance(const ColoredNoiseModel& model,
                                      std::size_t n_lags) {
  std::vector<double> acf(n_lags, 0.0);
  const std::size_t m = model.taps.size();
  for (std::size_t lag = 0; lag < n_lags; ++lag)
    for (std::size_t i = 0; i + lag < m; ++i)
      acf[lag] += model.taps[i] * model.taps[i + lag];
  return acf;
}

ColoredNoiseGenerator::ColoredNoiseGenerator(const ColoredNoiseModel& model,
                                             RngStream& rng)
    : taps_(model.taps), ring_(model.taps.size()) {
  require(!taps_.empty(), ErrorCode::invalid_argument,
          "ColoredNoiseGenerator: empty tap list");
  for (auto& slot : ring_) slot = rng.gaussian();
  head_ = ring_.size() - 1;
}

double ColoredNoiseGenerator::next(RngStream& rng) {
  head_ = (head_ + 1) % ring_.size();
  ring_[head_] = rng.gaussian();
  double out = 0.0;
  const std::size_t m = ring_.size();
  for (std::size_t i = 0; i < m; ++i)
    out += taps_[i] * ring_[(head_ + m - i) % m];
  return out;
}

}  // namespace modered
