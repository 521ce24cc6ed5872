#include "modered.h"

#include <exception>
#include <string>
#include <utility>

#include "modered/errors.hpp"
#include "modered/experiment.hpp"
#include "modered/kv.hpp"

struct mr_experiment {
  modered::ExperimentSpec spec;
};

namespace {

thread_local std::string last_error;

mr_status map_code(modered::ErrorCode code) {
  using modered::ErrorCode;
  switch (code) {
    case ErrorCode::ok: return MR_OK;
    case ErrorCode::invalid_argument: return MR_ERR_INVALID_ARGUMENT;
    case ErrorCode::dimension_mismatch: return MR_ERR_DIMENSION_MISMATCH;
    case ErrorCode::grid_mismatch: return MR_ERR_GRID_MISMATCH;
    case ErrorCode::insufficient_history: return MR_ERR_INSUFFICIENT_HISTORY;
    case ErrorCode::generation_failed: return MR_ERR_GENERATION_FAILED;
    case ErrorCode::nonpositive_area: return MR_ERR_NONPOSITIVE_AREA;
    case ErrorCode::invalid_correlation: return MR_ERR_INVALID_CORRELATION;
    case ErrorCode::numerical_blowup: return MR_ERR_NUMERICAL_BLOWUP;
    case ErrorCode::io_failure: return MR_ERR_IO;
    case ErrorCode::stage_failed: return MR_ERR_STAGE_FAILED;
    case ErrorCode::unknown: return MR_ERR_UNKNOWN;
  }
  return MR_ERR_UNKNOWN;
}

template <typename Body>
mr_status guarded(Body&& body) {
  try {
    body();
    last_error.clear();
    return MR_OK;
  } catch (const modered::Error& e) {
    last_error = e.what();
    return map_code(e.code());
  } catch (const std::exception& e) {
    last_error = e.what();
    return MR_ERR_UNKNOWN;
  } catch (...) {
    last_error = "unknown failure";
    return MR_ERR_UNKNOWN;
  }
}

mr_status invalid(const char* message) {
  last_error = message;
  return MR_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* mr_version(void) { return "0.1.0"; }

const char* mr_last_error_message(void) { return last_error.c_str(); }

const char* mr_stage_name(mr_stage stage) {
  if (stage < 0 || stage >= MR_STAGE_COUNT) return "";
  thread_local std::string name;
  name = modered::to_string(static_cast<modered::Stage>(stage));
  return name.c_str();
}

mr_status mr_stage_from_name(const char* name, mr_stage* out_stage) {
  if (name == nullptr || out_stage == nullptr)
    return invalid("mr_stage_from_name: NULL argument");
  return guarded([&] {
    *out_stage =
        static_cast<mr_stage>(modered::stage_from_string(name));
  });
}

mr_status mr_experiment_open(const char* spec_path, mr_experiment** out) {
  if (spec_path == nullptr || out == nullptr)
    return invalid("mr_experiment_open: NULL argument");
  *out = nullptr;
  return guarded([&] {
    auto spec = modered::ExperimentSpec::load(spec_path);
    *out = new mr_experiment{std::move(spec)};
  });
}

mr_status mr_experiment_open_text(const char* spec_text, mr_experiment** out) {
  if (spec_text == nullptr || out == nullptr)
    return invalid("mr_experiment_open_text: NULL argument");
  *out = nullptr;
  return guarded([&] {
    auto spec =
        modered::ExperimentSpec::from_text(spec_text, "configuration text");
    *out = new mr_experiment{std::move(spec)};
  });
}

void mr_experiment_close(mr_experiment* experiment) { delete experiment; }

mr_status mr_experiment_set_seed(mr_experiment* experiment, uint64_t seed) {
  if (experiment == nullptr)
    return invalid("mr_experiment_set_seed: NULL handle");
  experiment->spec.seed = seed;
  last_error.clear();
  return MR_OK;
}

mr_status mr_experiment_set_threads(mr_experiment* experiment, int threads) {
  if (experiment == nullptr)
    return invalid("mr_experiment_set_threads: NULL handle");
  if (threads < 0)
    return invalid("mr_experiment_set_threads: threads must be >= 0");
  experiment->spec.threads = threads;
  last_error.clear();
  return MR_OK;
}

mr_status mr_experiment_set_out_dir(mr_experiment* experiment,
                                    const char* out_dir) {
  if (experiment == nullptr || out_dir == nullptr || out_dir[0] == '\0')
    return invalid("mr_experiment_set_out_dir: NULL or empty argument");
  experiment->spec.out_dir = out_dir;
  last_error.clear();
  return MR_OK;
}

const char* mr_experiment_out_dir(const mr_experiment* experiment) {
  if (experiment == nullptr) return "";
  return experiment->spec.out_dir.c_str();
}

mr_status mr_run_stage(mr_experiment* experiment, mr_stage stage,
                       int* out_skipped, double* out_seconds) {
  if (experiment == nullptr) return invalid("mr_run_stage: NULL handle");
  if (stage < 0 || stage >= MR_STAGE_COUNT)
    return invalid("mr_run_stage: stage out of range");
  return guarded([&] {
    modered::Experiment runner(experiment->spec);
    const modered::StageResult result =
        runner.run_stage(static_cast<modered::Stage>(stage));
    if (out_skipped != nullptr) *out_skipped = result.skipped ? 1 : 0;
    if (out_seconds != nullptr) *out_seconds = result.seconds;
  });
}

mr_status mr_run_all(mr_experiment* experiment) {
  if (experiment == nullptr) return invalid("mr_run_all: NULL handle");
  return guarded([&] {
    modered::Experiment runner(experiment->spec);
    runner.run_all();
  });
}

}  // extern "C"
