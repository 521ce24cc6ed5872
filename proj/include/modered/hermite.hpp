// Gaussian-orthonormal Hermite functions used as the projection basis for
// the reduced resolved variables, plus the tensor-product basis sets each
// model case couples into its resolved equations.
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "modered/model.hpp"

namespace modered {

// One-dimensional basis function of order kappa >= 0:
//   Htilde_kappa(x) = (1 + 2 alpha)^{1/4} exp(-alpha beta x^2) H_kappa(u),
//   u = sqrt(2 beta (1 + 2 alpha)) x,
// where H_kappa are the orthonormal Hermite polynomials (H0 = 1, H1 = u,
// H_k = (u H_{k-1} - sqrt(k-1) H_{k-2}) / sqrt(k)).  For alpha = 0 these are
// orthonormal under the equilibrium marginal N(0, 1/(2 beta)); alpha > 0
// adds a Gaussian taper that damps the polynomial growth in the tails.
double hermite_value(int kappa, double beta, double alpha, double x);

// d/dx of hermite_value:
//   sqrt(kappa) sqrt(2 beta (1 + 2 alpha)) Htilde_{kappa-1}(x)
//     - 2 alpha beta x Htilde_kappa(x).
double hermite_derivative(int kappa, double beta, double alpha, double x);

// Tensor products Htilde_{kappa_1}(x_1) ... Htilde_{kappa_m}(x_m) over the
// resolved variables, one multi-index per basis function, with the resolved
// equation each function drives recorded alongside.
struct HermiteBasis {
  double beta = 50.0;
  double alpha = 0.0;
  std::size_t n_resolved = 1;
  std::vector<std::vector<int>> indices;  // indices[f][j] = order in x_j
  std::vector<int> owner;                 // equation basis function f drives

  std::size_t size() const { return indices.size(); }

  // h^kappa(x) for basis function `term`.
  double value(std::size_t term, std::span<const double> resolved) const;

  // d h^kappa / d x_var.
  double derivative(std::size_t term, std::size_t var,
                    std::span<const double> resolved) const;

  // Multi-index digits joined, e.g. "1" or "12"; used in artifact names.
  std::string term_name(std::size_t term) const;

  // Indices of the basis functions driving equation j, in declaration order.
  std::vector<std::size_t> terms_for(int equation) const;

  void validate() const;

  // The projection sets used by the three model cases:
  //   one resolved mode:  x_1 couples through (1);
  //   two resolved modes: x_1 through (1,0) and (1,2),
  //                       x_2 through (0,1) and (2,1).
  static HermiteBasis for_case(const ModelConfig& config, double alpha = 0.0);
};

}  // namespace modered
