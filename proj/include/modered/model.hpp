#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "modered/rng.hpp"

namespace modered {

// The three test systems share one shape: a handful of resolved variables
// coupled by energy-conserving triads to a spectrally truncated inviscid
// Burgers bath with modes u_k = y_k + i z_k, k = 1..n_modes (u_0 = 0,
// u_{-k} = conj(u_k)).  They differ in how many resolved variables exist and
// which triads are switched on.
enum class ModelCase {
  additive,        // x1 driven by y_k z_k products (additive forcing)
  multiplicative,  // x1, x2 driven by x_other * bath products
  combined,        // both mechanisms at once
};

std::string to_string(ModelCase c);
ModelCase model_case_from_string(const std::string& name);

// Number of resolved (slow) variables for a case: 1 or 2.
int resolved_count(ModelCase c);

struct ModelConfig {
  ModelCase model_case = ModelCase::additive;
  double lambda_a = 4.0;  // strength of the x-y-z (additive) triads
  double lambda_m = 3.0;  // strength of the x-x-bath (multiplicative) triads
  int n_modes = 50;       // bath truncation: wavenumbers 1..n_modes
  int n_active = 5;       // modes carrying nonzero triad coefficients
  double beta = 50.0;     // inverse temperature; every variable has
                          // stationary variance 1/(2 beta)

  int n_resolved() const { return resolved_count(model_case); }
  int state_size() const { return n_resolved() + 2 * n_modes; }
  void validate() const;
};

// Flat state layout: [x_0..x_{m-1} | y_1..y_n | z_1..z_n].  The split y/z
// blocks keep the convolution loops unit-stride.
struct FullState {
  int n_resolved = 0;
  int n_modes = 0;
  std::vector<double> data;

  static FullState zero(const ModelConfig& config);

  double& resolved(int j) { return data[j]; }
  double resolved(int j) const { return data[j]; }
  double& y(int k) { return data[n_resolved + (k - 1)]; }  // k is 1-based
  double y(int k) const { return data[n_resolved + (k - 1)]; }
  double& z(int k) { return data[n_resolved + n_modes + (k - 1)]; }
  double z(int k) const { return data[n_resolved + n_modes + (k - 1)]; }
};

// Interaction coefficients.  Each triple couples three distinct variables,
// one coefficient per equation, and sums to zero so the coupling conserves
// the total quadratic energy.  Vectors are indexed by mode (0-based entry
// for wavenumber k = index + 1) and sized n_active; modes beyond n_active
// carry no coupling.
//
// Naming: family "1|yz" is the coefficient in x1's equation of the term
// y_k z_k, family "y|1z" the coefficient in y_k's equation of x1 z_k, etc.
struct TriadCoupling {
  ModelCase model_case = ModelCase::additive;
  int n_active = 0;

  // x-y-z triads (additive and combined cases); per resolved variable j:
  // x_j equation gets a_x * y_k z_k, y_k gets a_y * x_j z_k,
  // z_k gets a_z * x_j y_k.
  std::vector<double> x1_yz, y_1z, z_1y;
  std::vector<double> x2_yz, y_2z, z_2y;  // combined only

  // x1-x2-bath triads (multiplicative and combined cases), one family per
  // bath component: x1 gets b1 * x2 * w_k, x2 gets b2 * x1 * w_k, and w_k
  // gets bw * x1 * x2, where w is y or z.
  std::vector<double> x1_2y, x2_1y, y_12;
  std::vector<double> x1_2z, x2_1z, z_12;

  void validate(const ModelConfig& config) const;

  std::string to_text() const;
  static TriadCoupling from_text(const std::string& text,
                                 const std::string& context);
};

// Draws every triple as: two members uniform in magnitude on [0.5, 1.5] with
// random signs, third member the negated sum, redrawn while the third's
// magnitude falls outside [0.1, 3] (at most 1000 redraws per triple).
TriadCoupling generate_couplings(const ModelConfig& config,
                                 std::uint64_t seed);

// Independent N(0, 1/(2 beta)) draws for every variable, in data order.
FullState sample_initial_state(const ModelConfig& config, RngStream& rng);

// Time derivative of the full system: bath convolution plus triad coupling.
void full_rhs(const ModelConfig& config, const TriadCoupling& coupling,
              std::span<const double> state, std::span<double> dxdt);

// Only the resolved equations (no bath convolution needed); out has size
// n_resolved().  This is Lx_j evaluated at the given state.
void resolved_rhs(const ModelConfig& config, const TriadCoupling& coupling,
                  std::span<const double> state, std::span<double> out);

// Total quadratic energy sum_j x_j^2 + sum_k (y_k^2 + z_k^2); conserved by
// full_rhs exactly (bath Galerkin structure + triad zero sums).
double energy(std::span<const double> state);

}  // namespace modered
