#include "modered/hermite.hpp"

#include <cmath>

#include "modered/errors.hpp"

namespace modered {

namespace {

// Orthonormal Hermite polynomial H_kappa(u) (standard Gaussian weight).
double hermite_poly(int kappa, double u) {
  if (kappa == 0) return 1.0;
  double prev = 1.0;
  double cur = u;
  for (int k = 2; k <= kappa; ++k) {
    const double next =
        (u * cur - std::sqrt(static_cast<double>(k - 1)) * prev) /
        std::sqrt(static_cast<double>(k));
    prev = cur;
    cur = next;
  }
  return cur;
}

void check_params(int kappa, double beta, double alpha) {
  require(kappa >= 0, ErrorCode::invalid_argument,
          "hermite: order must be nonnegative");
  require(beta > 0, ErrorCode::invalid_argument, "hermite: beta must be > 0");
  require(alpha >= 0, ErrorCode::invalid_argument,
          "hermite: alpha must be >= 0");
}

}  // namespace

double hermite_value(int kappa, double beta, double alpha, double x) {
  check_params(kappa, beta, alpha);
  const double stretch = 1.0 + 2.0 * alpha;
  const double u = std::sqrt(2.0 * beta * stretch) * x;
  const double envelope =
      std::pow(stretch, 0.25) * std::exp(-alpha * beta * x * x);
  return envelope * hermite_poly(kappa, u);
}

double hermite_derivative(int kappa, double beta, double alpha, double x) {
  check_params(kappa, beta, alpha);
  const double stretch = 1.0 + 2.0 * alpha;
  double lower = 0.0;
  if (kappa >= 1)
    lower = std::sqrt(static_cast<double>(kappa)) *
            std::sqrt(2.0 * beta * stretch) *
            hermite_value(kappa - 1, beta, alpha, x);
  return lower - 2.0 * alpha * beta * x * hermite_value(kappa, beta, alpha, x);
}

double HermiteBasis::value(std::size_t term,
                           std::span<const double> resolved) const {
  require(term < indices.size(), ErrorCode::invalid_argument,
          "HermiteBasis: term out of range");
  require(resolved.size() >= n_resolved, ErrorCode::dimension_mismatch,
          "HermiteBasis: state too short");
  double product = 1.0;
  for (std::size_t j = 0; j < n_resolved; ++j)
    product *= hermite_value(indices[term][j], beta, alpha, resolved[j]);
  return product;
}

double HermiteBasis::derivative(std::size_t term, std::size_t var,
                                std::span<const double> resolved) const {
  require(term < indices.size() && var < n_resolved,
          ErrorCode::invalid_argument, "HermiteBasis: term or var out of range");
  require(resolved.size() >= n_resolved, ErrorCode::dimension_mismatch,
          "HermiteBasis: state too short");
  double product = 1.0;
  for (std::size_t j = 0; j < n_resolved; ++j) {
    const int kappa = indices[term][j];
    product *= j == var ? hermite_derivative(kappa, beta, alpha, resolved[j])
                        : hermite_value(kappa, beta, alpha, resolved[j]);
  }
  return product;
}

std::string HermiteBasis::term_name(std::size_t term) const {
  require(term < indices.size(), ErrorCode::invalid_argument,
          "HermiteBasis: term out of range");
  std::string name;
  for (int kappa : indices[term]) name += std::to_string(kappa);
  return name;
}

std::vector<std::size_t> HermiteBasis::terms_for(int equation) const {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < owner.size(); ++f)
    if (owner[f] == equation) out.push_back(f);
  return out;
}

void HermiteBasis::validate() const {
  require(beta > 0 && alpha >= 0, ErrorCode::invalid_argument,
          "HermiteBasis: bad beta or alpha");
  require(indices.size() == owner.size(), ErrorCode::dimension_mismatch,
          "HermiteBasis: indices and owner sizes differ");
  for (std::size_t f = 0; f < indices.size(); ++f) {
    require(indices[f].size() == n_resolved, ErrorCode::dimension_mismatch,
            "HermiteBasis: multi-index length mismatch");
    require(owner[f] >= 0 && static_cast<std::size_t>(owner[f]) < n_resolved,
            ErrorCode::invalid_argument, "HermiteBasis: owner out of range");
    for (int kappa : indices[f])
      require(kappa >= 0, ErrorCode::invalid_argument,
              "HermiteBasis: negative order");
  }
}

HermiteBasis HermiteBasis::for_case(const ModelConfig& config, double alpha) {
  HermiteBasis basis;
  basis.beta = config.beta;
  basis.alpha = alpha;
  basis.n_resolved = config.n_resolved();
  if (basis.n_resolved == 1) {
    basis.indices = {{1}};
    basis.owner = {0};
  } else {
    basis.indices = {{1, 0}, {1, 2}, {0, 1}, {2, 1}};
    basis.owner = {0, 0, 1, 1};
  }
  basis.validate();
  return basis;
}

}  // namespace modered
