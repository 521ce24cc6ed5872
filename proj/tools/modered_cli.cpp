// Command-line front end: one subcommand per pipeline stage plus `all`,
// driving the shared library through its C interface.
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "modered.h"

namespace {

int fail_now(mr_experiment* experiment) {
  std::fprintf(stderr, "error: %s\n", mr_last_error_message());
  mr_experiment_close(experiment);
  return 1;
}

int run_one(mr_experiment* experiment, mr_stage stage) {
  int skipped = 0;
  double seconds = 0.0;
  if (mr_run_stage(experiment, stage, &skipped, &seconds) != MR_OK) return 1;
  if (skipped != 0)
    std::printf("stage %-13s skipped (artifacts exist)\n",
                mr_stage_name(stage));
  else
    std::printf("stage %-13s finished in %.2f s\n", mr_stage_name(stage),
                seconds);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Stochastic mode-reduction laboratory: truth ensembles, reduced "
      "models, and comparison reports for triad-coupled test systems."};
  app.fallthrough();
  app.require_subcommand(1);

  std::string spec_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--spec", spec_path,
                 "experiment configuration file (flat key = value lines)")
      ->required()
      ->check(CLI::ExistingFile);
  CLI::Option* seed_opt =
      app.add_option("--seed", seed, "override the master seed");
  CLI::Option* threads_opt = app.add_option(
      "--threads", threads,
      "override worker threads (0 = all cores, 1 = bitwise reproducible)");
  CLI::Option* out_opt =
      app.add_option("--out", out_dir, "override the output directory");

  app.add_subcommand("gen-couplings",
                     "draw the seeded interaction coefficients");
  app.add_subcommand("truth", "full-system ensemble autocorrelations");
  app.add_subcommand("fit-ou", "fit the bath surrogate relaxation rates");
  app.add_subcommand("amrs",
                     "reduced stochastic model: parameters and correlations");
  app.add_subcommand("kernels",
                     "estimate memory kernels and the noise autocovariance");
  app.add_subcommand("mz", "assemble and simulate the memory model");
  app.add_subcommand("delta-mz",
                     "memoryless simplification of the memory model");
  app.add_subcommand("compare", "per-lag comparison against the truth run");
  app.add_subcommand("all", "run every stage in order, resuming past "
                            "completed ones");

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  mr_experiment* experiment = nullptr;
  if (mr_experiment_open(spec_path.c_str(), &experiment) != MR_OK)
    return fail_now(experiment);
  if (seed_opt->count() > 0 &&
      mr_experiment_set_seed(experiment, seed) != MR_OK)
    return fail_now(experiment);
  if (threads_opt->count() > 0 &&
      mr_experiment_set_threads(experiment, threads) != MR_OK)
    return fail_now(experiment);
  if (out_opt->count() > 0 &&
      mr_experiment_set_out_dir(experiment, out_dir.c_str()) != MR_OK)
    return fail_now(experiment);

  if (command == "all") {
    for (int i = 0; i < MR_STAGE_COUNT; ++i)
      if (run_one(experiment, static_cast<mr_stage>(i)) != 0)
        return fail_now(experiment);
  } else {
    mr_stage stage = MR_STAGE_COUPLINGS;
    if (mr_stage_from_name(command.c_str(), &stage) != MR_OK)
      return fail_now(experiment);
    if (run_one(experiment, stage) != 0) return fail_now(experiment);
  }
  std::printf("artifacts in %s\n", mr_experiment_out_dir(experiment));
  mr_experiment_close(experiment);
  return 0;
}
