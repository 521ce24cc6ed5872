#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace modered {

// Uniform time grid: points t0 + i*dt for i = 0..n_steps.
struct TimeGrid {
  double t0 = 0.0;
  double dt = 0.0;
  std::size_t n_steps = 0;

  double time_at(std::size_t i) const { return t0 + dt * static_cast<double>(i); }
  void validate() const;
};

using OdeRhs =
    std::function<void(double t, std::span<const double> x, std::span<double> dxdt)>;

// Drift: out has the state's size.  Diffusion: writes the n x q matrix
// row-major (row = state component, column = noise channel).
using SdeDrift =
    std::function<void(std::span<const double> x, std::span<double> out)>;
using SdeDiffusion =
    std::function<void(std::span<const double> x, std::span<double> out_matrix)>;

struct Rk4Workspace {
  std::vector<double> k1, k2, k3, k4, tmp;
  void resize(std::size_t n);
};

// Classical fourth-order Runge-Kutta, one step in place.
void rk4_step(const OdeRhs& rhs, double t, double dt, std::span<double> state,
              Rk4Workspace& ws);

struct SdeWorkspace {
  std::vector<double> drift, diffusion, bumped, diff_plus, diff_minus;
  void resize(std::size_t n, std::size_t q);
};

// x += a(x) dt + B(x) sqrt(dt) xi, with xi the supplied standard normals
// (one per noise channel).
void euler_maruyama_step(const SdeDrift& drift, const SdeDiffusion& diffusion,
                         std::size_t n_noise, double dt,
                         std::span<const double> gaussians,
                         std::span<double> state, SdeWorkspace& ws);

// Splitting step for dx = [f(x) + g(x)] dt + B(x) dW: a Heun (explicit
// trapezoid) substep advances the nonlinear drift f, then a Milstein substep
// advances the linear drift g plus noise, adding the same-channel correction
//   1/2 * (B_col_j . grad) B_ij * (dW_j^2 - dt)
// per channel j.  Cross-channel terms (Levy areas) are omitted; the
// directional derivative is formed by central differences along B's columns,
// exact whenever B is linear in x (every use here).
void split_milstein_step(const SdeDrift& nonlinear_drift,
                         const SdeDrift& linear_drift,
                         const SdeDiffusion& diffusion, std::size_t n_noise,
                         double dt, std::span<const double> gaussians,
                         std::span<double> state, SdeWorkspace& ws);

// Fixed-depth ring buffer of payload vectors (newest pushed last), used as
// the trajectory history of the memory integrodifferential stepper.
class HistoryBuffer {
 public:
  HistoryBuffer() = default;
  HistoryBuffer(std::size_t depth, std::size_t width);

  void clear();
  void push(std::span<const double> payload);
  // steps_back = 0 is the newest entry.
  std::span<const double> back(std::size_t steps_back) const;
  std::size_t size() const { return size_; }
  std::size_t depth() const { return depth_; }
  std::size_t width() const { return width_; }

 private:
  std::size_t depth_ = 0, width_ = 0, size_ = 0, head_ = 0;
  std::vector<double> store_;
};

// One memory term: kernel values K(s) on the uniform s-grid (lag 0 first)
// driving one resolved equation through one basis function.
struct MemoryTerm {
  int variable = 0;
  int basis_index = 0;
  std::vector<double> kernel;
};

struct MemoryModel {
  double ds = 0.0;  // kernel grid spacing
  std::vector<MemoryTerm> terms;

  // When >= 0, history payloads carry precomputed basis values: the value
  // for basis index b is read straight from payload[cached_offset + b] and
  // the basis_from_payload callback is bypassed, keeping the innermost lag
  // loop free of indirect calls.
  int cached_offset = -1;

  std::size_t n_lags() const;
};

// Basis evaluators: from a stored history payload (which the caller may have
// augmented with cached values) and from a bare state vector (used for the
// provisional endpoint inside the corrector).
using BasisFromPayload =
    std::function<double(std::span<const double> payload, int basis_index)>;
using BasisFromState =
    std::function<double(std::span<const double> state, int basis_index)>;

struct MemoryStepWorkspace {
  std::vector<double> g1, g2, predicted;
  void resize(std::size_t m);
};

// Heun predictor-corrector step of the memory equation
//   dphi_j/dt = markov_j(phi) - sum_terms int_0^{min(t, t0)} K(s) h(phi(t-s)) ds
//               + F_j(t),
// with the integral evaluated by the trapezoidal rule on the kernel grid and
// the window growing as [0, t] until t reaches the kernel horizon.
//
// Contract: `state` is phi(t) and the newest history entry is its payload
// (already pushed by the caller); on return `state` is phi(t+dt) and the
// caller pushes the new payload.  dt must divide the kernel spacing ds.
// markov_rhs may be empty (treated as zero).
void memory_step(const SdeDrift& markov_rhs, const MemoryModel& model,
                 const HistoryBuffer& history,
                 const BasisFromPayload& basis_from_payload,
                 const BasisFromState& basis_from_state,
                 std::span<const double> noise_now,
                 std::span<const double> noise_next, double t, double dt,
                 std::span<double> state, MemoryStepWorkspace& ws);

}  // namespace modered
