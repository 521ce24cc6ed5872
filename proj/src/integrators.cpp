#include "modered/integrators.hpp"

#include <cmath>
#include <cstring>

#include "modered/errors.hpp"

namespace modered {

void TimeGrid::validate() const {
  require(dt > 0 && std::isfinite(dt) && std::isfinite(t0),
          ErrorCode::invalid_argument, "TimeGrid: bad spacing or origin");
}

void Rk4Workspace::resize(std::size_t n) {
  k1.resize(n);
  k2.resize(n);
  k3.resize(n);
  k4.resize(n);
  tmp.resize(n);
}

void rk4_step(const OdeRhs& rhs, double t, double dt, std::span<double> state,
              Rk4Workspace& ws) {
  const std::size_t n = state.size();
  ws.resize(n);
  const double half = 0.5 * dt;

  rhs(t, state, ws.k1);
  for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = state[i] + half * ws.k1[i];
  rhs(t + half, ws.tmp, ws.k2);
  for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = state[i] + half * ws.k2[i];
  rhs(t + half, ws.tmp, ws.k3);
  for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = state[i] + dt * ws.k3[i];
  rhs(t + dt, ws.tmp, ws.k4);

  const double w = dt / 6.0;
  for (std::size_t i = 0; i < n; ++i)
    state[i] += w * (ws.k1[i] + 2.0 * (ws.k2[i] + ws.k3[i]) + ws.k4[i]);
}

void SdeWorkspace::resize(std::size_t n, std::size_t q) {
  drift.resize(n);
  diffusion.resize(n * q);
  bumped.resize(n);
  diff_plus.resize(n * q);
  diff_minus.resize(n * q);
}

void euler_maruyama_step(const SdeDrift& drift, const SdeDiffusion& diffusion,
                         std::size_t n_noise, double dt,
                         std::span<const double> gaussians,
                         std::span<double> state, SdeWorkspace& ws) {
  const std::size_t n = state.size();
  require(gaussians.size() == n_noise, ErrorCode::dimension_mismatch,
          "euler_maruyama_step: wrong number of noise draws");
  ws.resize(n, n_noise);
  drift(state, std::span<double>(ws.drift.data(), n));
  diffusion(state, std::span<double>(ws.diffusion.data(), n * n_noise));
  const double root_dt = std::sqrt(dt);
  for (std::size_t i = 0; i < n; ++i) {
    double noise = 0.0;
    for (std::size_t j = 0; j < n_noise; ++j)
      noise += ws.diffusion[i * n_noise + j] * gaussians[j];
    state[i] += ws.drift[i] * dt + root_dt * noise;
  }
}

void split_milstein_step(const SdeDrift& nonlinear_drift,
                         const SdeDrift& linear_drift,
                         const SdeDiffusion& diffusion, std::size_t n_noise,
                         double dt, std::span<const double> gaussians,
                         std::span<double> state, SdeWorkspace& ws) {
  const std::size_t n = state.size();
  require(gaussians.size() == n_noise, ErrorCode::dimension_mismatch,
          "split_milstein_step: wrong number of noise draws");
  ws.resize(n, n_noise);
  std::span<double> k1(ws.drift.data(), n);
  std::span<double> tmp(ws.bumped.data(), n);

  // Heun substep for the nonlinear drift.
  nonlinear_drift(state, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + dt * k1[i];
  std::vector<double>& k2 = ws.diff_plus;  // reuse as scratch (resized >= n)
  nonlinear_drift(tmp, std::span<double>(k2.data(), n));
  for (std::size_t i = 0; i < n; ++i)
    state[i] += 0.5 * dt * (k1[i] + k2[i]);

  // Milstein substep for the linear drift plus noise, evaluated at the
  // post-Heun state.
  linear_drift(state, k1);
  std::span<double> b(ws.diffusion.data(), n * n_noise);
  diffusion(state, b);
  const double root_dt = std::sqrt(dt);

  // Same-channel corrections: for channel j the coefficient is the
  // derivative of B's column j in the direction of that same column,
  // obtained by central differences (exact for linear B).
  for (std::size_t i = 0; i < n; ++i) {
    double incr = k1[i] * dt;
    for (std::size_t j = 0; j < n_noise; ++j)
      incr += b[i * n_noise + j] * root_dt * gaussians[j];
    tmp[i] = incr;
  }
  for (std::size_t j = 0; j < n_noise; ++j) {
    double col_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      col_norm = std::max(col_norm, std::fabs(b[i * n_noise + j]));
    if (col_norm == 0.0) continue;
    double state_norm = 1.0;
    for (std::size_t i = 0; i < n; ++i)
      state_norm = std::max(state_norm, std::fabs(state[i]));
    const double h = 1e-5 * state_norm / col_norm;

    std::span<double> bumped(ws.bumped.data(), n);  // careful: tmp aliased
    // tmp currently holds the pending increment; use a separate buffer for
    // the bumped state by composing on the fly.
    std::vector<double>& plus = ws.diff_plus;
    std::vector<double>& minus = ws.diff_minus;
    plus.resize(n * n_noise);
    minus.resize(n * n_noise);
    std::vector<double> bump_state(n);
    for (std::size_t i = 0; i < n; ++i)
      bump_state[i] = state[i] + h * b[i * n_noise + j];
    diffusion(bump_state, std::span<double>(plus.data(), n * n_noise));
    for (std::size_t i = 0; i < n; ++i)
      bump_state[i] = state[i] - h * b[i * n_noise + j];
    diffusion(bump_state, std::span<double>(minus.data(), n * n_noise));

    const double xi = gaussians[j];
    const double bracket = 0.5 * (dt * xi * xi - dt);
    for (std::size_t i = 0; i < n; ++i) {
      const double deriv =
          (plus[i * n_noise + j] - minus[i * n_noise + j]) / (2.0 * h);
      tmp[i] += deriv * bracket;
    }
    (void)bumped;
  }
  for (std::size_t i = 0; i < n; ++i) state[i] += tmp[i];
}

HistoryBuffer::HistoryBuffer(std::size_t depth, std::size_t width)
    : depth_(depth), width_(width), store_(depth * width) {
  require(depth >= 1 && width >= 1, ErrorCode::invalid_argument,
          "HistoryBuffer: depth and width must be positive");
}

void HistoryBuffer::clear() {
  size_ = 0;
  head_ = 0;
}

void HistoryBuffer::push(std::span<const double> payload) {
  require(payload.size() == width_, ErrorCode::dimension_mismatch,
          "HistoryBuffer: payload width mismatch");
  std::memcpy(store_.data() + head_ * width_, payload.data(),
              width_ * sizeof(double));
  head_ = (head_ + 1) % depth_;
  if (size_ < depth_) ++size_;
}

std::span<const double> HistoryBuffer::back(std::size_t steps_back) const {
  require(steps_back < size_, ErrorCode::insufficient_history,
          "HistoryBuffer: not enough stored history");
  const std::size_t slot = (head_ + depth_ - 1 - steps_back) % depth_;
  return {store_.data() + slot * width_, width_};
}

std::size_t MemoryModel::n_lags() const {
  std::size_t n = 0;
  for (const auto& term : terms) {
    if (n == 0) n = term.kernel.size();
    require(term.kernel.size() == n, ErrorCode::dimension_mismatch,
            "MemoryModel: kernels must share one grid");
  }
  return n;
}

void MemoryStepWorkspace::resize(std::size_t m) {
  g1.resize(m);
  g2.resize(m);
  predicted.resize(m);
}

namespace {

// Evaluates the full right-hand side of the memory equation at step index
// `step` (time step*dt).  The newest history entry is phi(step0*dt) where
// step0 = step - offset; offset = 0 evaluates at the stored state, offset =
// 1 at a provisional endpoint supplied through `endpoint`.
void memory_rhs(const SdeDrift& markov_rhs, const MemoryModel& model,
                const HistoryBuffer& history,
                const BasisFromPayload& basis_from_payload,
                const BasisFromState& basis_from_state,
                std::span<const double> endpoint, std::size_t step,
                std::size_t offset, std::size_t ratio,
                std::span<const double> noise, std::span<double> out) {
  for (auto& v : out) v = 0.0;
  if (markov_rhs) markov_rhs(endpoint, out);
  for (std::size_t j = 0; j < out.size() && j < noise.size(); ++j)
    out[j] += noise[j];

  const std::size_t n_lags = model.n_lags();
  if (n_lags == 0) return;
  const double ds = model.ds;
  const int cache = model.cached_offset;
  const auto from_payload = [&](std::span<const double> payload,
                                int b) -> double {
    return cache >= 0 ? payload[static_cast<std::size_t>(cache + b)]
                      : basis_from_payload(payload, b);
  };
  // Complete trapezoid cells available within the growing window [0, t] and
  // the kernel horizon.
  const std::size_t full = std::min(step / ratio, n_lags - 1);
  const bool partial = (step % ratio) != 0 && step < ratio * (n_lags - 1);

  for (const auto& term : model.terms) {
    const double* kernel = term.kernel.data();
    double integral = 0.0;
    if (full >= 1) {
      // Endpoint s = 0.
      const double h0 =
          offset == 0 ? from_payload(history.back(0), term.basis_index)
                      : basis_from_state(endpoint, term.basis_index);
      integral += 0.5 * kernel[0] * h0;
      for (std::size_t i = 1; i < full; ++i)
        integral += kernel[i] * from_payload(history.back(i * ratio - offset),
                                             term.basis_index);
      integral += 0.5 * kernel[full] *
                  from_payload(history.back(full * ratio - offset),
                                     term.basis_index);
      integral *= ds;
    }
    if (partial) {
      // Leftover piece [full*ds, t] at the start of a run when dt is a
      // strict divisor of ds: linearly interpolated kernel, oldest state.
      const double frac =
          static_cast<double>(step - full * ratio) / static_cast<double>(ratio);
      const double k_t = kernel[full] * (1.0 - frac) + kernel[full + 1] * frac;
      const double h_old = from_payload(history.back(step - offset),
                                              term.basis_index);
      double h_lo;
      if (full == 0)
        h_lo = offset == 0
                   ? from_payload(history.back(0), term.basis_index)
                   : basis_from_state(endpoint, term.basis_index);
      else
        h_lo = from_payload(history.back(full * ratio - offset),
                                  term.basis_index);
      integral += 0.5 * (frac * ds) * (kernel[full] * h_lo + k_t * h_old);
    }
    out[term.variable] -= integral;
  }
}

}  // namespace

void memory_step(const SdeDrift& markov_rhs, const MemoryModel& model,
                 const HistoryBuffer& history,
                 const BasisFromPayload& basis_from_payload,
                 const BasisFromState& basis_from_state,
                 std::span<const double> noise_now,
                 std::span<const double> noise_next, double t, double dt,
                 std::span<double> state, MemoryStepWorkspace& ws) {
  require(dt > 0, ErrorCode::invalid_argument, "memory_step: dt must be > 0");
  std::size_t ratio = 1;
  if (!model.terms.empty()) {
    const double r = model.ds / dt;
    ratio = static_cast<std::size_t>(std::llround(r));
    require(ratio >= 1 && std::fabs(r - static_cast<double>(ratio)) <
                              1e-9 * static_cast<double>(ratio),
            ErrorCode::grid_mismatch,
            "memory_step: dt must divide the kernel grid spacing");
  }
  const std::size_t step = static_cast<std::size_t>(std::llround(t / dt));
  require(std::fabs(static_cast<double>(step) * dt - t) <= 1e-9 * dt + 1e-12,
          ErrorCode::grid_mismatch, "memory_step: t is off the dt grid");

  const std::size_t m = state.size();
  ws.resize(m);
  std::span<double> g1(ws.g1.data(), m);
  std::span<double> g2(ws.g2.data(), m);
  std::span<double> predicted(ws.predicted.data(), m);

  memory_rhs(markov_rhs, model, history, basis_from_payload, basis_from_state,
             state, step, 0, ratio, noise_now, g1);
  for (std::size_t i = 0; i < m; ++i) predicted[i] = state[i] + dt * g1[i];
  memory_rhs(markov_rhs, model, history, basis_from_payload, basis_from_state,
             predicted, step + 1, 1, ratio, noise_next, g2);
  for (std::size_t i = 0; i < m; ++i)
    state[i] += 0.5 * dt * (g1[i] + g2[i]);
}

}  // namespace modered
