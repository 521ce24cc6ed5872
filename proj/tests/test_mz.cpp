// Tests for the short-memory reduced models: model assembly from kernel
// estimates, directory serialization, the delta simplification, the shared
// noise-path design (one draw sequence per kernel cell, reused across time
// steps and across the two models), and the projection diagnostics.
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "modered/errors.hpp"
#include "modered/hermite.hpp"
#include "modered/integrators.hpp"
#include "modered/model.hpp"
#include "modered/mz.hpp"
#include "modered/rng.hpp"
#include "modered/stats.hpp"

using namespace modered;

namespace {

ModelConfig one_mode_config() {
  ModelConfig config;
  config.model_case = ModelCase::additive;
  config.n_modes = 4;
  config.n_active = 2;
  config.beta = 50.0;
  return config;
}

// Hand-built single-equation model: kernel 0.8 exp(-2 s) on [0, 1] with
// spacing 0.05, and a noise process fitted to an exponential target.
MzModel exponential_model(bool silent_noise = false,
                          double kernel_scale = 0.8) {
  const ModelConfig config = one_mode_config();
  MzModel model;
  model.model_case = config.model_case;
  model.beta = config.beta;
  model.t0 = 1.0;
  model.tapered = false;
  model.basis = HermiteBasis::for_case(config);
  model.memory.ds = 0.05;
  model.memory.cached_offset = 1;

  MemoryTerm term;
  term.variable = 0;
  term.basis_index = 0;
  for (int l = 0; l <= 20; ++l)
    term.kernel.push_back(kernel_scale *
                          std::exp(-2.0 * 0.05 * static_cast<double>(l)));
  model.memory.terms.push_back(std::move(term));

  if (silent_noise) {
    ColoredNoiseModel quiet;
    quiet.dt = 0.05;
    quiet.taps = {0.0};
    model.noise.push_back(std::move(quiet));
  } else {
    std::vector<double> target;
    for (int l = 0; l <= 40; ++l)
      target.push_back(0.01 *
                       std::exp(-0.05 * static_cast<double>(l) / 0.2));
    model.noise.push_back(fit_ma_coefficients(target, 0.05, 0));
  }
  model.validate();
  return model;
}

// Kernel estimate with exact values so assembly is checkable by hand:
// k[0][0][l] = 0.5 exp(-l ds), noise target 0.01 exp(-s / 0.2).
KernelEstimate synthetic_estimate(double ds, std::size_t n_lags) {
  KernelEstimate est;
  est.ds = ds;
  est.term_names = {"1"};
  std::vector<double> kernel(n_lags), se(n_lags, 1e-4), noise(n_lags);
  for (std::size_t l = 0; l < n_lags; ++l) {
    const double s = static_cast<double>(l) * ds;
    est.lags.push_back(s);
    kernel[l] = 0.5 * std::exp(-s);
    noise[l] = 0.01 * std::exp(-s / 0.2);
  }
  est.k = {{kernel}};
  est.k_se = {{se}};
  est.noise_acf = {noise};
  est.noise_se = {se};
  est.n_samples = 1000;
  return est;
}

std::filesystem::path scratch_dir(const std::string& leaf) {
  const auto dir = std::filesystem::temp_directory_path() / leaf;
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("model validation rejects inconsistent pieces") {
  MzModel model = exponential_model();
  CHECK_NOTHROW(model.validate());

  SUBCASE("noise grid must match the kernel grid") {
    model.noise[0].dt = 0.04;
    bool caught = false;
    try {
      model.validate();
    } catch (const Error& err) {
      caught = true;
      CHECK(err.code() == ErrorCode::grid_mismatch);
    }
    CHECK(caught);
  }
  SUBCASE("kernel horizon must equal the memory span") {
    model.t0 = 0.9;
    CHECK_THROWS_AS(model.validate(), Error);
  }
  SUBCASE("at least one memory term is required") {
    model.memory.terms.clear();
    CHECK_THROWS_AS(model.validate(), Error);
  }
  SUBCASE("one noise model per resolved variable") {
    model.noise.clear();
    CHECK_THROWS_AS(model.validate(), Error);
  }
  SUBCASE("term indices must address the basis") {
    model.memory.terms[0].basis_index = 5;
    CHECK_THROWS_AS(model.validate(), Error);
  }
  SUBCASE("history payloads must cache the basis block") {
    model.memory.cached_offset = -1;
    CHECK_THROWS_AS(model.validate(), Error);
  }
}

TEST_CASE("directory serialization round-trips the model") {
  const MzModel model = exponential_model();
  const auto dir = scratch_dir("modered_mz_roundtrip");
  model.save(dir.string());

  CHECK(std::filesystem::exists(dir / "manifest.txt"));
  CHECK(std::filesystem::exists(dir / "kernels.csv"));
  CHECK(std::filesystem::exists(dir / "noise_x1.txt"));

  const MzModel back = MzModel::load(dir.string());
  CHECK(back.model_case == model.model_case);
  CHECK(back.beta == model.beta);
  CHECK(back.t0 == model.t0);
  CHECK(back.tapered == model.tapered);
  CHECK(back.memory.ds == model.memory.ds);
  CHECK(back.memory.cached_offset == model.memory.cached_offset);
  CHECK(back.basis.alpha == model.basis.alpha);
  CHECK(back.basis.indices == model.basis.indices);
  CHECK(back.basis.owner == model.basis.owner);
  REQUIRE(back.memory.terms.size() == model.memory.terms.size());
  for (std::size_t i = 0; i < model.memory.terms.size(); ++i) {
    CHECK(back.memory.terms[i].variable == model.memory.terms[i].variable);
    CHECK(back.memory.terms[i].basis_index ==
          model.memory.terms[i].basis_index);
    CHECK(back.memory.terms[i].kernel == model.memory.terms[i].kernel);
  }
  REQUIRE(back.noise.size() == 1);
  CHECK(back.noise[0].dt == model.noise[0].dt);
  CHECK(back.noise[0].taps == model.noise[0].taps);

  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(MzModel::load(dir.string()), Error);
}

TEST_CASE("assembly truncates, tapers and fits the noise") {
  const ModelConfig config = one_mode_config();
  const HermiteBasis basis = HermiteBasis::for_case(config);
  const KernelEstimate est = synthetic_estimate(0.05, 41);  // horizon 2

  MzBuildOptions options;
  options.t0 = 1.0;
  options.taper = false;
  const MzModel plain = assemble_mz_model(config, basis, est, options);
  REQUIRE(plain.memory.terms.size() == 1);
  REQUIRE(plain.memory.terms[0].kernel.size() == 21);  // [0, 1] inclusive
  for (std::size_t l = 0; l < 21; ++l)
    CHECK(plain.memory.terms[0].kernel[l] == est.k[0][0][l]);
  CHECK(plain.noise.size() == 1);
  CHECK(plain.noise[0].dt == 0.05);
  CHECK(plain.noise[0].taps.size() >= 2);  // colored, not white

  SUBCASE("cosine taper damps the last tenth of the window") {
    MzBuildOptions tapered = options;
    tapered.taper = true;
    const MzModel soft = assemble_mz_model(config, basis, est, tapered);
    const auto& kernel = soft.memory.terms[0].kernel;
    // Untouched before 0.9 t0; half weight at s = 0.95; zero at s = t0.
    for (std::size_t l = 0; l <= 17; ++l) CHECK(kernel[l] == est.k[0][0][l]);
    CHECK(kernel[19] ==
          doctest::Approx(0.5 * est.k[0][0][19]).epsilon(1e-9));
    CHECK(kernel[20] == doctest::Approx(0.0).scale(est.k[0][0][20]).epsilon(1e-9));
  }
  SUBCASE("horizon must sit on the kernel grid") {
    MzBuildOptions off = options;
    off.t0 = 1.02;
    CHECK_THROWS_AS(assemble_mz_model(config, basis, est, off), Error);
  }
  SUBCASE("estimate shorter than the horizon is rejected") {
    MzBuildOptions longwin = options;
    longwin.t0 = 3.0;
    CHECK_THROWS_AS(assemble_mz_model(config, basis, est, longwin),
                    Error);
  }
  SUBCASE("estimate made for a different basis is rejected") {
    KernelEstimate wrong = est;
    wrong.term_names = {"2"};
    CHECK_THROWS_AS(assemble_mz_model(config, basis, wrong, options),
                    Error);
  }
  SUBCASE("nonpositive noise variance yields a silent forcing") {
    KernelEstimate quiet = est;
    for (auto& v : quiet.noise_acf[0]) v = 0.0;
    const MzModel model = assemble_mz_model(config, basis, quiet, options);
    REQUIRE(model.noise.size() == 1);
    CHECK(model.noise[0].taps == std::vector<double>{0.0});
  }
}

TEST_CASE("delta reduction integrates each kernel over its window") {
  const MzModel model = exponential_model();
  const DeltaMzModel delta = reduce_to_delta_mz(model);
  REQUIRE(delta.c.size() == 1);
  CHECK(delta.variable[0] == 0);
  CHECK(delta.basis_index[0] == 0);
  CHECK(delta.ds == model.memory.ds);

  std::vector<double> lags;
  for (int l = 0; l <= 20; ++l) lags.push_back(0.05 * static_cast<double>(l));
  const double expected = trapezoid(lags, model.memory.terms[0].kernel);
  CHECK(delta.c[0] == expected);
  // Close to the exact integral of 0.8 exp(-2 s) over [0, 1].
  CHECK(delta.c[0] ==
        doctest::Approx(0.4 * (1.0 - std::exp(-2.0))).epsilon(1e-3));

  const std::string text = delta.to_text();
  CHECK(text.find("c_x1_1") != std::string::npos);
}

TEST_CASE("zero kernels and silent noise freeze the state exactly") {
  MzModel model = exponential_model(/*silent_noise=*/true);
  for (auto& v : model.memory.terms[0].kernel) v = 0.0;
  const DeltaMzModel delta = reduce_to_delta_mz(model);

  const std::vector<double> x0 = {0.3};
  const TimeGrid grid{0.0, 0.05, 40};
  RngStream rng1(7), rng2(7);
  const auto path = simulate_mz(model, x0, grid, rng1);
  const auto fast = simulate_delta_mz(delta, x0, grid, rng2);
  REQUIRE(path.size() == 41);
  REQUIRE(fast.size() == 41);
  for (std::size_t i = 0; i < path.size(); ++i) {
    CHECK(path[i][0] == 0.3);
    CHECK(fast[i][0] == 0.3);
  }
}

TEST_CASE("parent and delta models consume one shared noise sequence") {
  // With the kernels zeroed both models reduce to dphi/dt = F(t); because
  // the forcing is drawn per kernel cell from the same stream, the two
  // trajectories must agree bit for bit under a common seed.
  MzModel model = exponential_model();
  for (auto& v : model.memory.terms[0].kernel) v = 0.0;
  const DeltaMzModel delta = reduce_to_delta_mz(model);
  CHECK(delta.c[0] == 0.0);

  const std::vector<double> x0 = {0.1};
  const TimeGrid grid{0.0, 0.05, 60};
  RngStream rng1(99), rng2(99);
  const auto slow = simulate_mz(model, x0, grid, rng1);
  const auto fast = simulate_delta_mz(delta, x0, grid, rng2);
  REQUIRE(slow.size() == fast.size());
  for (std::size_t i = 0; i < slow.size(); ++i)
    CHECK(slow[i][0] == fast[i][0]);

  SUBCASE("refining the step keeps the same noise path") {
    // dphi/dt = F(t) with piecewise-linear F is integrated exactly by the
    // Heun corrector, so halving dt must leave shared grid points unchanged
    // up to round-off — the draw sequence depends only on the cell grid.
    RngStream rng3(99);
    const TimeGrid fine{0.0, 0.025, 120};
    const auto refined = simulate_mz(model, x0, fine, rng3);
    REQUIRE(refined.size() == 121);
    for (std::size_t i = 0; i < slow.size(); ++i)
      CHECK(refined[2 * i][0] ==
            doctest::Approx(slow[i][0]).epsilon(1e-12));
  }
}

TEST_CASE("memory trajectories converge at second order in the step") {
  const MzModel model = exponential_model();
  const std::vector<double> x0 = {0.15};
  const auto endpoint = [&](double dt, std::size_t n_steps) {
    RngStream rng(4242);
    const TimeGrid grid{0.0, dt, n_steps};
    return simulate_mz(model, x0, grid, rng).back()[0];
  };
  // Common noise path across refinements leaves only the O(dt^2)
  // integrator error, so Richardson quotients sit near 4.
  const double f1 = endpoint(0.05, 40);
  const double f2 = endpoint(0.025, 80);
  const double f4 = endpoint(0.0125, 160);
  const double ratio = (f1 - f2) / (f2 - f4);
  CHECK(ratio > 2.5);
  CHECK(ratio < 6.5);
}

TEST_CASE("simulation guards its grids and detects blow-ups") {
  const MzModel model = exponential_model();
  const std::vector<double> x0 = {0.1};

  SUBCASE("dt must divide the kernel spacing") {
    RngStream rng(1);
    bool caught = false;
    try {
      simulate_mz(model, x0, TimeGrid{0.0, 0.04, 10}, rng);
    } catch (const Error& err) {
      caught = true;
      CHECK(err.code() == ErrorCode::grid_mismatch);
    }
    CHECK(caught);
  }
  SUBCASE("dt coarser than the kernel grid is rejected") {
    RngStream rng(2);
    CHECK_THROWS_AS(simulate_mz(model, x0, TimeGrid{0.0, 0.1, 10}, rng),
                    Error);
  }
  SUBCASE("wrong initial-state size is rejected") {
    RngStream rng(3);
    const std::vector<double> bad = {0.1, 0.2};
    CHECK_THROWS_AS(simulate_mz(model, bad, TimeGrid{0.0, 0.05, 10}, rng),
                    Error);
  }
  SUBCASE("anti-damping kernels blow up and are reported") {
    MzModel unstable = exponential_model(/*silent_noise=*/true);
    for (auto& v : unstable.memory.terms[0].kernel) v = -50.0;
    RngStream rng(4);
    const std::vector<double> start = {1.0};
    bool caught = false;
    try {
      simulate_mz(unstable, start, TimeGrid{0.0, 0.05, 700}, rng);
    } catch (const Error& err) {
      caught = true;
      CHECK(err.code() == ErrorCode::numerical_blowup);
    }
    CHECK(caught);
  }
}

TEST_CASE("reduced correlations share conventions across the two models") {
  MzModel model = exponential_model();
  for (auto& v : model.memory.terms[0].kernel) v = 0.0;
  const DeltaMzModel delta = reduce_to_delta_mz(model);

  ReducedCorrelationRequest req;
  req.dt = 0.05;
  req.lag_step = 0.05;
  req.lag_max = 0.3;
  req.n_samples = 300;
  req.seed = 140;
  const CorrelationEstimate full = mz_correlation(model, req);
  const CorrelationEstimate fast = delta_mz_correlation(delta, req);

  REQUIRE(full.names == std::vector<std::string>{"x1"});
  CHECK(full.n_samples == 300);
  REQUIRE(full.n_lags() == 7);
  // Identical paths imply identical averages, bit for bit.
  for (std::size_t l = 0; l < full.n_lags(); ++l)
    CHECK(full.corr[0][l] == fast.corr[0][l]);
  // Lag zero is the equilibrium variance of the initial draw.
  const double var = 1.0 / (2.0 * 50.0);
  CHECK(std::fabs(full.corr[0][0] - var) <= 4.0 * full.se[0][0]);

  SUBCASE("lag grid must sit on the step grid") {
    ReducedCorrelationRequest bad = req;
    bad.dt = 0.02;
    bad.lag_step = 0.05;
    CHECK_THROWS_AS(mz_correlation(model, bad), Error);
  }
}

TEST_CASE("projection inner products recover a known overlap") {
  const ModelConfig config = one_mode_config();
  const HermiteBasis basis = HermiteBasis::for_case(config);
  std::vector<std::pair<std::string, StateFunctional>> rows;
  rows.emplace_back("x1", [](const FullState& state) { return state.data[0]; });

  const ProjectionTable table =
      project_onto_basis(config, rows, basis, 20000, 2026, 0);
  REQUIRE(table.row_names == std::vector<std::string>{"x1"});
  REQUIRE(table.term_names == std::vector<std::string>{"1"});
  CHECK(table.n_samples == 20000);
  // E[x1 * h^1(x1)] = sqrt(2 beta) Var(x1) = 1 / sqrt(2 beta) = 0.1.
  const double expected = 1.0 / std::sqrt(2.0 * config.beta);
  CHECK(std::fabs(table.estimate[0][0] - expected) <= 3.5 * table.se[0][0]);
  CHECK(table.se[0][0] < 2e-3);
  // A strongly nonzero overlap must fail the consistency gate.
  CHECK_FALSE(table.within(3.0));

  const std::string csv = table.to_csv();
  CHECK(csv.find("row,term,estimate,se") != std::string::npos);
  CHECK(csv.find("x1,1,") != std::string::npos);

  SUBCASE("degenerate requests are rejected") {
    CHECK_THROWS_AS(project_onto_basis(config, {}, basis, 100, 1, 0),
                    Error);
    CHECK_THROWS_AS(project_onto_basis(config, rows, basis, 1, 1, 0),
                    Error);
  }
}

TEST_CASE("resolved drifts have no component inside the basis span") {
  // The identity E[(L x_j)(x) h^f(x)] = 0 under the invariant density is
  // what licenses the reduced models; the Monte Carlo check must accept all
  // three cases.
  for (const ModelCase model_case :
       {ModelCase::additive, ModelCase::multiplicative, ModelCase::combined}) {
    ModelConfig config;
    config.model_case = model_case;
    config.n_modes = 6;
    config.n_active = 3;
    config.beta = 50.0;
    config.lambda_a = 4.0;
    config.lambda_m = 3.0;
    const TriadCoupling coupling = generate_couplings(config, 55);
    const HermiteBasis basis = HermiteBasis::for_case(config);
    const ProjectionTable table =
        check_projection_conditions(config, coupling, basis, 20000, 2040, 0);
    CHECK(table.n_samples == 20000);
    CHECK(table.within(3.5));
    for (const auto& se_row : table.se)
      for (double se : se_row) CHECK(se > 0.0);
  }
}

TEST_CASE("screening ranks kernel terms by their initial magnitude") {
  KernelEstimate est;
  est.ds = 0.1;
  est.lags = {0.0, 0.1};
  est.term_names = {"10", "12"};
  est.k = {{{0.5, 0.1}, {-2.0, 0.3}}, {{1.0, 0.0}, {-0.25, 0.1}}};
  est.k_se = {{{0.01, 0.01}, {0.02, 0.01}}, {{0.03, 0.01}, {0.04, 0.01}}};
  est.noise_acf = {{1.0, 0.5}, {1.0, 0.5}};
  est.noise_se = {{0.1, 0.1}, {0.1, 0.1}};

  const auto rows = screen_basis_terms(est);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].equation == 0);
  CHECK(rows[0].term == "12");
  CHECK(rows[0].value == -2.0);
  CHECK(rows[0].se == 0.02);
  CHECK(rows[1].equation == 1);
  CHECK(rows[1].term == "10");
  CHECK(rows[1].value == 1.0);
  CHECK(rows[2].value == 0.5);
  CHECK(rows[3].value == -0.25);

  est.k[0][0].clear();
  CHECK_THROWS_AS(screen_basis_terms(est), Error);
}
