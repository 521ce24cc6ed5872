#include "modered/mz.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "modered/csv.hpp"
#include "modered/errors.hpp"
#include "modered/kv.hpp"
#include "modered/threading.hpp"

namespace modered {

namespace {

std::vector<double> lag_grid(double ds, std::size_t n) {
  std::vector<double> lags(n);
  for (std::size_t i = 0; i < n; ++i) lags[i] = ds * static_cast<double>(i);
  return lags;
}

std::string term_column(const HermiteBasis& basis, const MemoryTerm& term) {
  return "k_x" + std::to_string(term.variable + 1) + "_" +
         basis.term_name(static_cast<std::size_t>(term.basis_index));
}

}  // namespace

void MzModel::validate() const {
  basis.validate();
  require(beta > 0 && t0 > 0 && memory.ds > 0, ErrorCode::invalid_argument,
          "MzModel: beta, t0 and the kernel spacing must be positive");
  require(std::fabs(basis.beta - beta) <= 1e-12 * beta,
          ErrorCode::invalid_argument,
          "MzModel: basis and model disagree on beta");
  require(noise.size() == basis.n_resolved, ErrorCode::dimension_mismatch,
          "MzModel: one noise model per resolved variable");
  for (const auto& model : noise)
    require(std::fabs(model.dt - memory.ds) <= 1e-12 * memory.ds,
            ErrorCode::grid_mismatch,
            "MzModel: noise grid must match the kernel grid");
  require(!memory.terms.empty(), ErrorCode::invalid_argument,
          "MzModel: no memory terms");
  const std::size_t n_lags = memory.n_lags();
  require(n_lags >= 2, ErrorCode::invalid_argument,
          "MzModel: kernels need at least two lags");
  require(std::fabs(static_cast<double>(n_lags - 1) * memory.ds - t0) <=
              1e-9 * t0,
          ErrorCode::grid_mismatch,
          "MzModel: kernel horizon must equal t0");
  for (const auto& term : memory.terms) {
    require(term.variable >= 0 &&
                term.variable < static_cast<int>(basis.n_resolved),
            ErrorCode::invalid_argument, "MzModel: term variable out of range");
    require(term.basis_index >= 0 &&
                term.basis_index < static_cast<int>(basis.size()),
            ErrorCode::invalid_argument, "MzModel: term basis out of range");
  }
  require(memory.cached_offset == static_cast<int>(basis.n_resolved),
          ErrorCode::invalid_argument,
          "MzModel: history payloads must cache basis values after the state");
}

// ---------------------------------------------------------------------------
// Directory serialization
// ---------------------------------------------------------------------------

void MzModel::save(const std::string& dir) const {
  validate();
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  KeyValueFile manifest;
  manifest.comment("reduced-model manifest: shape, grids, basis, file map");
  manifest.set("case", to_string(model_case));
  manifest.set("beta", beta);
  manifest.set("alpha", basis.alpha);
  manifest.set("n_resolved", static_cast<std::int64_t>(basis.n_resolved));
  manifest.set("t0", t0);
  manifest.set("tapered", static_cast<std::int64_t>(tapered ? 1 : 0));
  manifest.set("ds", memory.ds);
  manifest.set("n_lags", static_cast<std::int64_t>(memory.n_lags()));
  manifest.set("n_basis", static_cast<std::int64_t>(basis.size()));
  for (std::size_t f = 0; f < basis.size(); ++f) {
    const std::string tag = "[" + std::to_string(f + 1) + "]";
    manifest.set("basis" + tag, basis.term_name(f));
    manifest.set("owner" + tag,
                 static_cast<std::int64_t>(basis.owner[f] + 1));
  }
  manifest.set("n_terms", static_cast<std::int64_t>(memory.terms.size()));
  for (std::size_t i = 0; i < memory.terms.size(); ++i) {
    const std::string tag = "term[" + std::to_string(i + 1) + "]";
    manifest.set(tag + ".variable",
                 static_cast<std::int64_t>(memory.terms[i].variable + 1));
    manifest.set(tag + ".basis",
                 static_cast<std::int64_t>(memory.terms[i].basis_index + 1));
  }
  manifest.save((fs::path(dir) / "manifest.txt").string());

  CsvTable table;
  table.columns.push_back("lag");
  table.data.push_back(lag_grid(memory.ds, memory.n_lags()));
  for (const auto& term : memory.terms) {
    table.columns.push_back(term_column(basis, term));
    table.data.push_back(term.kernel);
  }
  write_csv((fs::path(dir) / "kernels.csv").string(), table);

  for (std::size_t j = 0; j < noise.size(); ++j)
    write_text_file(
        (fs::path(dir) / ("noise_x" + std::to_string(j + 1) + ".txt")).string(),
        noise[j].to_text());
}

MzModel MzModel::load(const std::string& dir) {
  namespace fs = std::filesystem;
  const std::string manifest_path = (fs::path(dir) / "manifest.txt").string();
  KeyValueFile manifest = KeyValueFile::load(manifest_path);

  MzModel model;
  model.model_case = model_case_from_string(manifest.get("case"));
  model.beta = manifest.get_double("beta");
  model.t0 = manifest.get_double("t0");
  model.tapered = manifest.get_int("tapered") != 0;
  model.memory.ds = manifest.get_double("ds");

  const auto n_resolved =
      static_cast<std::size_t>(manifest.get_int("n_resolved"));
  const auto n_basis = static_cast<std::size_t>(manifest.get_int("n_basis"));
  model.basis.beta = model.beta;
  model.basis.alpha = manifest.get_double("alpha");
  model.basis.n_resolved = n_resolved;
  for (std::size_t f = 0; f < n_basis; ++f) {
    const std::string tag = "[" + std::to_string(f + 1) + "]";
    const std::string digits = manifest.get("basis" + tag);
    require(digits.size() == n_resolved, ErrorCode::io_failure,
            manifest_path + ": basis" + tag + " has the wrong index count");
    std::vector<int> index;
    for (char digit : digits) {
      require(digit >= '0' && digit <= '9', ErrorCode::io_failure,
              manifest_path + ": basis" + tag + " has a non-digit order");
      index.push_back(digit - '0');
    }
    model.basis.indices.push_back(std::move(index));
    model.basis.owner.push_back(
        static_cast<int>(manifest.get_int("owner" + tag)) - 1);
  }
  model.basis.validate();

  const auto n_lags = static_cast<std::size_t>(manifest.get_int("n_lags"));
  const auto n_terms = static_cast<std::size_t>(manifest.get_int("n_terms"));
  const CsvTable table = read_csv((fs::path(dir) / "kernels.csv").string());
  for (std::size_t i = 0; i < n_terms; ++i) {
    const std::string tag = "term[" + std::to_string(i + 1) + "]";
    MemoryTerm term;
    term.variable =
        static_cast<int>(manifest.get_int(tag + ".variable")) - 1;
    term.basis_index =
        static_cast<int>(manifest.get_int(tag + ".basis")) - 1;
    term.kernel = table.col(term_column(model.basis, term));
    require(term.kernel.size() == n_lags, ErrorCode::io_failure,
            dir + "/kernels.csv: wrong row count");
    model.memory.terms.push_back(std::move(term));
  }
  model.memory.cached_offset = static_cast<int>(n_resolved);

  for (std::size_t j = 0; j < n_resolved; ++j) {
    const std::string path =
        (fs::path(dir) / ("noise_x" + std::to_string(j + 1) + ".txt")).string();
    model.noise.push_back(
        ColoredNoiseModel::from_text(read_text_file(path), path));
  }
  model.validate();
  return model;
}

std::string DeltaMzModel::to_text() const {
  KeyValueFile kv;
  kv.comment("memoryless reduction: kernel time integrals per basis term");
  kv.set("case", to_string(model_case));
  kv.set("beta", beta);
  kv.set("ds", ds);
  kv.set("n_coefficients", static_cast<std::int64_t>(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i)
    kv.set("c_x" + std::to_string(variable[i] + 1) + "_" +
               basis.term_name(static_cast<std::size_t>(basis_index[i])),
           c[i]);
  return kv.to_string();
}

// ---------------------------------------------------------------------------
// Model construction
// ---------------------------------------------------------------------------

MzModel assemble_mz_model(const ModelConfig& config, const HermiteBasis& basis,
                          const KernelEstimate& estimate,
                          const MzBuildOptions& options) {
  config.validate();
  basis.validate();
  require(static_cast<int>(basis.n_resolved) == config.n_resolved(),
          ErrorCode::dimension_mismatch,
          "assemble_mz_model: basis and config disagree on resolved count");
  require(std::fabs(basis.beta - config.beta) <= 1e-12 * config.beta,
          ErrorCode::invalid_argument,
          "assemble_mz_model: basis and config disagree on beta");
  require(options.t0 > 0, ErrorCode::invalid_argument,
          "assemble_mz_model: t0 must be positive");
  const double ds = estimate.ds;
  require(ds > 0, ErrorCode::invalid_argument,
          "assemble_mz_model: kernel estimate has no grid");
  const auto n_keep =
      static_cast<std::size_t>(std::llround(options.t0 / ds)) + 1;
  require(n_keep >= 2 && std::fabs(static_cast<double>(n_keep - 1) * ds -
                                   options.t0) <= 1e-9 * options.t0,
          ErrorCode::grid_mismatch,
          "assemble_mz_model: t0 must be a multiple of the kernel spacing");
  require(estimate.lags.size() >= n_keep, ErrorCode::invalid_argument,
          "assemble_mz_model: kernel estimate is shorter than t0");

  const auto m = static_cast<std::size_t>(config.n_resolved());
  require(estimate.k.size() == m && estimate.noise_acf.size() == m,
          ErrorCode::dimension_mismatch,
          "assemble_mz_model: estimate has the wrong equation count");
  require(estimate.term_names.size() == basis.size(),
          ErrorCode::dimension_mismatch,
          "assemble_mz_model: estimate has the wrong basis size");
  for (std::size_t f = 0; f < basis.size(); ++f)
    require(estimate.term_names[f] == basis.term_name(f),
            ErrorCode::invalid_argument,
            "assemble_mz_model: estimate was made for a different basis");

  MzModel model;
  model.model_case = config.model_case;
  model.beta = config.beta;
  model.t0 = options.t0;
  model.tapered = options.taper;
  model.basis = basis;
  model.memory.ds = ds;
  model.memory.cached_offset = static_cast<int>(m);

  const double s_taper = 0.9 * options.t0;
  for (std::size_t f = 0; f < basis.size(); ++f) {
    const auto j = static_cast<std::size_t>(basis.owner[f]);
    require(estimate.k[j].size() == basis.size(),
            ErrorCode::dimension_mismatch,
            "assemble_mz_model: estimate has the wrong kernel count");
    MemoryTerm term;
    term.variable = basis.owner[f];
    term.basis_index = static_cast<int>(f);
    term.kernel.assign(estimate.k[j][f].begin(),
                       estimate.k[j][f].begin() +
                           static_cast<std::ptrdiff_t>(n_keep));
    if (options.taper) {
      for (std::size_t l = 0; l < n_keep; ++l) {
        const double s = static_cast<double>(l) * ds;
        if (s <= s_taper) continue;
        const double u =
            std::min(1.0, (s - s_taper) / (options.t0 - s_taper));
        term.kernel[l] *= 0.5 * (1.0 + std::cos(std::numbers::pi * u));
      }
    }
    model.memory.terms.push_back(std::move(term));
  }

  for (std::size_t j = 0; j < m; ++j) {
    const std::vector<double>& target = estimate.noise_acf[j];
    require(!target.empty(), ErrorCode::invalid_argument,
            "assemble_mz_model: empty noise target");
    if (target[0] <= 0.0) {
      // Degenerate (decoupled) equation: noiseless forcing.
      ColoredNoiseModel silent;
      silent.dt = ds;
      silent.taps = {0.0};
      model.noise.push_back(std::move(silent));
    } else {
      model.noise.push_back(fit_ma_coefficients(target, ds, options.ma_taps));
    }
  }
  model.validate();
  return model;
}

MzModel build_mz_model(const ModelConfig& config, const TriadCoupling& coupling,
                       const HermiteBasis& basis,
                       const MzBuildOptions& options) {
  const KernelEstimate estimate =
      estimate_memory_kernels(config, coupling, basis, options.kernel);
  return assemble_mz_model(config, basis, estimate, options);
}

DeltaMzModel reduce_to_delta_mz(const MzModel& model) {
  model.validate();
  DeltaMzModel delta;
  delta.model_case = model.model_case;
  delta.beta = model.beta;
  delta.ds = model.memory.ds;
  delta.basis = model.basis;
  delta.noise = model.noise;
  const std::vector<double> lags =
      lag_grid(model.memory.ds, model.memory.n_lags());
  for (const auto& term : model.memory.terms) {
    delta.variable.push_back(term.variable);
    delta.basis_index.push_back(term.basis_index);
    delta.c.push_back(trapezoid(lags, term.kernel));
  }
  return delta;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

namespace {

// Stationary forcing sampled once per kernel cell per variable and
// interpolated linearly to integrator substeps, so the draw sequence depends
// only on the cell grid and the stream — not on dt.
class NoisePath {
 public:
  NoisePath(const std::vector<ColoredNoiseModel>& models, RngStream& rng) {
    gens_.reserve(models.size());
    for (const auto& model : models) gens_.emplace_back(model, rng);
    f_now_.resize(models.size());
    f_next_.resize(models.size());
    for (std::size_t j = 0; j < gens_.size(); ++j)
      f_now_[j] = gens_[j].next(rng);
    for (std::size_t j = 0; j < gens_.size(); ++j)
      f_next_[j] = gens_[j].next(rng);
  }

  void advance_cell(RngStream& rng) {
    for (std::size_t j = 0; j < gens_.size(); ++j) {
      f_now_[j] = f_next_[j];
      f_next_[j] = gens_[j].next(rng);
    }
  }

  // Values at substeps s and s+1 of the current cell of `ratio` substeps.
  void at(std::size_t s, std::size_t ratio, std::span<double> now,
          std::span<double> next) const {
    const double u0 = static_cast<double>(s) / static_cast<double>(ratio);
    const double u1 = static_cast<double>(s + 1) / static_cast<double>(ratio);
    for (std::size_t j = 0; j < f_now_.size(); ++j) {
      const double step = f_next_[j] - f_now_[j];
      now[j] = f_now_[j] + u0 * step;
      next[j] = f_now_[j] + u1 * step;
    }
  }

 private:
  std::vector<ColoredNoiseGenerator> gens_;
  std::vector<double> f_now_, f_next_;
};

// Shared trajectory driver for the full and the delta models.  Calls
// observe(i, state) with the initial state (i = 0) and after every step;
// returns false as soon as the state stops being finite.
template <typename Observe>
bool run_memory_path(const MemoryModel& memory, const SdeDrift& markov,
                     const HermiteBasis& basis,
                     const std::vector<ColoredNoiseModel>& noise_models,
                     std::span<const double> x0, double dt,
                     std::size_t n_steps, RngStream& rng, Observe&& observe) {
  const std::size_t m = basis.n_resolved;
  require(x0.size() == m, ErrorCode::dimension_mismatch,
          "reduced-model simulation: wrong initial-state size");
  require(dt > 0 && memory.ds > 0, ErrorCode::invalid_argument,
          "reduced-model simulation: dt and the noise grid must be positive");
  const double r = memory.ds / dt;
  const auto ratio = static_cast<std::size_t>(std::llround(r));
  require(ratio >= 1 &&
              std::fabs(r - static_cast<double>(ratio)) <
                  1e-9 * static_cast<double>(ratio),
          ErrorCode::grid_mismatch,
          "reduced-model simulation: dt must divide the noise grid spacing");

  const bool with_memory = !memory.terms.empty();
  HistoryBuffer history;
  std::vector<double> payload;
  if (with_memory) {
    const std::size_t depth = (memory.n_lags() - 1) * ratio + 1;
    history = HistoryBuffer(depth, m + basis.size());
    payload.resize(m + basis.size());
  }
  std::vector<double> state(x0.begin(), x0.end());
  const auto push = [&] {
    if (!with_memory) return;
    std::copy(state.begin(), state.end(), payload.begin());
    for (std::size_t f = 0; f < basis.size(); ++f)
      payload[m + f] = basis.value(f, state);
    history.push(payload);
  };
  const BasisFromPayload from_payload =
      [&basis, m](std::span<const double> stored, int b) {
        return basis.value(static_cast<std::size_t>(b), stored.first(m));
      };
  const BasisFromState from_state = [&basis](std::span<const double> endpoint,
                                             int b) {
    return basis.value(static_cast<std::size_t>(b), endpoint);
  };

  push();
  observe(std::size_t{0}, std::span<const double>(state));
  NoisePath noise(noise_models, rng);
  MemoryStepWorkspace ws;
  std::vector<double> now(m), next(m);
  for (std::size_t i = 0; i < n_steps; ++i) {
    const std::size_t s = i % ratio;
    if (i > 0 && s == 0) noise.advance_cell(rng);
    noise.at(s, ratio, now, next);
    memory_step(markov, memory, history, from_payload, from_state, now, next,
                static_cast<double>(i) * dt, dt, state, ws);
    for (double v : state)
      if (!std::isfinite(v)) return false;
    push();
    observe(i + 1, std::span<const double>(state));
  }
  return true;
}

SdeDrift delta_drift(const DeltaMzModel& model) {
  return [&model](std::span<const double> x, std::span<double> out) {
    for (auto& v : out) v = 0.0;
    for (std::size_t i = 0; i < model.c.size(); ++i)
      out[model.variable[i]] -=
          model.c[i] *
          model.basis.value(static_cast<std::size_t>(model.basis_index[i]), x);
  };
}

// Empty-kernel stand-in that keeps the delta model on the same step and
// noise grids as its parent.
MemoryModel no_memory(double ds) {
  MemoryModel memory;
  memory.ds = ds;
  return memory;
}

void check_delta(const DeltaMzModel& model) {
  model.basis.validate();
  require(model.ds > 0, ErrorCode::invalid_argument,
          "delta model: noise grid spacing must be positive");
  require(model.noise.size() == model.basis.n_resolved,
          ErrorCode::dimension_mismatch,
          "delta model: one noise model per resolved variable");
  require(model.variable.size() == model.c.size() &&
              model.basis_index.size() == model.c.size(),
          ErrorCode::dimension_mismatch,
          "delta model: coefficient arrays disagree");
}

template <typename Step>
CorrelationEstimate reduced_correlation(std::size_t m, double beta,
                                        const ReducedCorrelationRequest& req,
                                        const Step& run_sample) {
  require(beta > 0, ErrorCode::invalid_argument,
          "reduced correlation: beta must be > 0");
  const auto every =
      static_cast<std::size_t>(std::llround(req.lag_step / req.dt));
  require(every >= 1 &&
              std::fabs(req.lag_step - static_cast<double>(every) * req.dt) <
                  1e-9 * req.lag_step,
          ErrorCode::grid_mismatch,
          "reduced correlation: dt must divide lag_step");
  const auto n_lags =
      static_cast<std::size_t>(std::llround(req.lag_max / req.lag_step)) + 1;
  const std::size_t n_steps = every * (n_lags - 1);
  const double root_var = std::sqrt(1.0 / (2.0 * beta));

  std::vector<std::string> names;
  for (std::size_t j = 1; j <= m; ++j) names.push_back("x" + std::to_string(j));

  const SampleRunner runner = [&, every, n_lags, n_steps, root_var](
                                  std::size_t sample,
                                  std::span<double> matrix) {
    RngStream rng = RngStream::derive(req.seed, sample);
    std::vector<double> x0(m);
    for (auto& v : x0) v = rng.gaussian(0.0, root_var);
    const auto record = [&](std::size_t i, std::span<const double> state) {
      if (i % every != 0) return;
      const std::size_t l = i / every;
      for (std::size_t o = 0; o < m; ++o) matrix[o * n_lags + l] = state[o];
    };
    return run_sample(x0, req.dt, n_steps, rng, record);
  };
  return ensemble_correlation(names, n_lags, req.lag_step, req.n_samples,
                              req.threads, runner);
}

}  // namespace

std::vector<std::vector<double>> simulate_mz(const MzModel& model,
                                             std::span<const double> x0,
                                             const TimeGrid& grid,
                                             RngStream& rng) {
  model.validate();
  grid.validate();
  std::vector<std::vector<double>> trajectory;
  trajectory.reserve(grid.n_steps + 1);
  const bool finite = run_memory_path(
      model.memory, SdeDrift{}, model.basis, model.noise, x0, grid.dt,
      grid.n_steps, rng, [&](std::size_t, std::span<const double> state) {
        trajectory.emplace_back(state.begin(), state.end());
      });
  require(finite, ErrorCode::numerical_blowup,
          "simulate_mz: state left the finite range after " +
              std::to_string(trajectory.size()) + " steps");
  return trajectory;
}

std::vector<std::vector<double>> simulate_delta_mz(const DeltaMzModel& model,
                                                   std::span<const double> x0,
                                                   const TimeGrid& grid,
                                                   RngStream& rng) {
  check_delta(model);
  grid.validate();
  const MemoryModel memory = no_memory(model.ds);
  const SdeDrift drift = delta_drift(model);
  std::vector<std::vector<double>> trajectory;
  trajectory.reserve(grid.n_steps + 1);
  const bool finite = run_memory_path(
      memory, drift, model.basis, model.noise, x0, grid.dt, grid.n_steps, rng,
      [&](std::size_t, std::span<const double> state) {
        trajectory.emplace_back(state.begin(), state.end());
      });
  require(finite, ErrorCode::numerical_blowup,
          "simulate_delta_mz: state left the finite range after " +
              std::to_string(trajectory.size()) + " steps");
  return trajectory;
}

CorrelationEstimate mz_correlation(const MzModel& model,
                                   const ReducedCorrelationRequest& req) {
  model.validate();
  return reduced_correlation(
      model.n_resolved(), model.beta, req,
      [&](std::span<const double> x0, double dt, std::size_t n_steps,
          RngStream& rng, const auto& record) {
        return run_memory_path(model.memory, SdeDrift{}, model.basis,
                               model.noise, x0, dt, n_steps, rng, record);
      });
}

CorrelationEstimate delta_mz_correlation(const DeltaMzModel& model,
                                         const ReducedCorrelationRequest& req) {
  check_delta(model);
  const MemoryModel memory = no_memory(model.ds);
  const SdeDrift drift = delta_drift(model);
  return reduced_correlation(
      model.n_resolved(), model.beta, req,
      [&](std::span<const double> x0, double dt, std::size_t n_steps,
          RngStream& rng, const auto& record) {
        return run_memory_path(memory, drift, model.basis, model.noise, x0,
                               dt, n_steps, rng, record);
      });
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

bool ProjectionTable::within(double n_se) const {
  for (std::size_t r = 0; r < estimate.size(); ++r)
    for (std::size_t f = 0; f < estimate[r].size(); ++f)
      if (std::fabs(estimate[r][f]) > n_se * se[r][f]) return false;
  return true;
}

std::string ProjectionTable::to_csv() const {
  std::string out = "row,term,estimate,se\n";
  for (std::size_t r = 0; r < estimate.size(); ++r)
    for (std::size_t f = 0; f < estimate[r].size(); ++f)
      out += row_names[r] + "," + term_names[f] + "," +
             format_sig17(estimate[r][f]) + "," + format_sig17(se[r][f]) +
             "\n";
  return out;
}

ProjectionTable project_onto_basis(
    const ModelConfig& config,
    const std::vector<std::pair<std::string, StateFunctional>>& rows,
    const HermiteBasis& basis, std::size_t n_samples, std::uint64_t seed,
    int threads) {
  config.validate();
  basis.validate();
  require(static_cast<int>(basis.n_resolved) == config.n_resolved(),
          ErrorCode::dimension_mismatch,
          "project_onto_basis: basis and config disagree on resolved count");
  require(!rows.empty(), ErrorCode::invalid_argument,
          "project_onto_basis: no functionals given");
  require(n_samples >= 2, ErrorCode::invalid_argument,
          "project_onto_basis: need at least two samples");

  const std::size_t n_rows = rows.size();
  const std::size_t n_terms = basis.size();
  const std::size_t cells = n_rows * n_terms;
  const int n_threads = resolve_thread_count(threads);
  const auto n_chunks = static_cast<std::size_t>(
      std::min<std::size_t>(static_cast<std::size_t>(n_threads), n_samples));
  std::vector<std::vector<double>> sums(n_chunks),
      squares(n_chunks);

  parallel_chunks(
      n_samples, static_cast<int>(n_chunks),
      [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        std::vector<double>& sum = sums[chunk];
        std::vector<double>& square = squares[chunk];
        sum.assign(cells, 0.0);
        square.assign(cells, 0.0);
        std::vector<double> h(n_terms);
        for (std::size_t sample = begin; sample < end; ++sample) {
          RngStream rng = RngStream::derive(seed, sample);
          const FullState state = sample_initial_state(config, rng);
          const std::span<const double> resolved(state.data.data(),
                                                 basis.n_resolved);
          for (std::size_t f = 0; f < n_terms; ++f)
            h[f] = basis.value(f, resolved);
          for (std::size_t r = 0; r < n_rows; ++r) {
            const double g = rows[r].second(state);
            for (std::size_t f = 0; f < n_terms; ++f) {
              const double v = g * h[f];
              sum[r * n_terms + f] += v;
              square[r * n_terms + f] += v * v;
            }
          }
        }
      });

  ProjectionTable table;
  for (const auto& row : rows) table.row_names.push_back(row.first);
  for (std::size_t f = 0; f < n_terms; ++f)
    table.term_names.push_back(basis.term_name(f));
  table.n_samples = n_samples;
  table.estimate.assign(n_rows, std::vector<double>(n_terms, 0.0));
  table.se.assign(n_rows, std::vector<double>(n_terms, 0.0));
  const auto n = static_cast<double>(n_samples);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    double sum = 0.0, square = 0.0;
    for (std::size_t chunk = 0; chunk < n_chunks; ++chunk) {
      sum += sums[chunk][cell];
      square += squares[chunk][cell];
    }
    const double mean = sum / n;
    const double var =
        std::max(0.0, (square - n * mean * mean) / (n - 1.0));
    table.estimate[cell / n_terms][cell % n_terms] = mean;
    table.se[cell / n_terms][cell % n_terms] = std::sqrt(var / n);
  }
  return table;
}

ProjectionTable check_projection_conditions(const ModelConfig& config,
                                            const TriadCoupling& coupling,
                                            const HermiteBasis& basis,
                                            std::size_t n_samples,
                                            std::uint64_t seed, int threads) {
  coupling.validate(config);
  std::vector<std::pair<std::string, StateFunctional>> rows;
  const auto m = static_cast<std::size_t>(config.n_resolved());
  for (std::size_t j = 0; j < m; ++j) {
    rows.emplace_back(
        "Lx" + std::to_string(j + 1),
        [&config, &coupling, j, m](const FullState& state) {
          double drift[2] = {0.0, 0.0};
          resolved_rhs(config, coupling, state.data, {drift, m});
          return drift[j];
        });
  }
  return project_onto_basis(config, rows, basis, n_samples, seed, threads);
}

std::vector<ScreeningRow> screen_basis_terms(const KernelEstimate& estimate) {
  std::vector<ScreeningRow> rows;
  for (std::size_t j = 0; j < estimate.k.size(); ++j)
    for (std::size_t f = 0; f < estimate.k[j].size(); ++f) {
      require(!estimate.k[j][f].empty(), ErrorCode::invalid_argument,
              "screen_basis_terms: empty kernel");
      ScreeningRow row;
      row.equation = static_cast<int>(j);
      row.term = estimate.term_names[f];
      row.value = estimate.k[j][f][0];
      row.se = estimate.k_se[j][f][0];
      rows.push_back(std::move(row));
    }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ScreeningRow& a, const ScreeningRow& b) {
                     return std::fabs(a.value) > std::fabs(b.value);
                   });
  return rows;
}

}  // namespace modered
