#include "modered/model.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "modered/errors.hpp"
#include "modered/kv.hpp"

namespace modered {

std::string to_string(ModelCase c) {
  switch (c) {
    case ModelCase::additive: return "additive";
    case ModelCase::multiplicative: return "multiplicative";
    case ModelCase::combined: return "combined";
  }
  fail(ErrorCode::invalid_argument, "bad ModelCase");
}

ModelCase model_case_from_string(const std::string& name) {
  if (name == "additive") return ModelCase::additive;
  if (name == "multiplicative") return ModelCase::multiplicative;
  if (name == "combined") return ModelCase::combined;
  fail(ErrorCode::invalid_argument, "unknown model case: " + name);
}

int resolved_count(ModelCase c) {
  return c == ModelCase::additive ? 1 : 2;
}

void ModelConfig::validate() const {
  require(n_modes >= 1, ErrorCode::invalid_argument, "n_modes must be >= 1");
  require(n_active >= 1 && n_active <= n_modes, ErrorCode::invalid_argument,
          "n_active must lie in [1, n_modes]");
  require(beta > 0, ErrorCode::invalid_argument, "beta must be positive");
  const bool uses_additive = model_case != ModelCase::multiplicative;
  const bool uses_mult = model_case != ModelCase::additive;
  require(!uses_additive || lambda_a > 0, ErrorCode::invalid_argument,
          "lambda_a must be positive for this case");
  require(!uses_mult || lambda_m > 0, ErrorCode::invalid_argument,
          "lambda_m must be positive for this case");
}

FullState FullState::zero(const ModelConfig& config) {
  FullState s;
  s.n_resolved = config.n_resolved();
  s.n_modes = config.n_modes;
  s.data.assign(config.state_size(), 0.0);
  return s;
}

namespace {

struct TripleRef {
  const char* first;   // family names, in draw order
  const char* second;
  const char* third;
  std::vector<double>* a;
  std::vector<double>* b;
  std::vector<double>* c;
};

// The triples of each case, in generation and serialization order.  The
// first two members are drawn, the third closes the zero sum.
std::vector<TripleRef> triples_of(TriadCoupling& cpl) {
  switch (cpl.model_case) {
    case ModelCase::additive:
      return {{"1|yz", "y|1z", "z|1y", &cpl.x1_yz, &cpl.y_1z, &cpl.z_1y}};
    case ModelCase::multiplicative:
      return {{"1|2y", "2|1y", "y|12", &cpl.x1_2y, &cpl.x2_1y, &cpl.y_12},
              {"1|2z", "2|1z", "z|12", &cpl.x1_2z, &cpl.x2_1z, &cpl.z_12}};
    case ModelCase::combined:
      return {{"1|yz", "y|1z", "z|1y", &cpl.x1_yz, &cpl.y_1z, &cpl.z_1y},
              {"2|yz", "y|2z", "z|2y", &cpl.x2_yz, &cpl.y_2z, &cpl.z_2y},
              {"1|2y", "2|1y", "y|12", &cpl.x1_2y, &cpl.x2_1y, &cpl.y_12},
              {"1|2z", "2|1z", "z|12", &cpl.x1_2z, &cpl.x2_1z, &cpl.z_12}};
  }
  fail(ErrorCode::invalid_argument, "bad ModelCase");
}

std::vector<TripleRef> triples_of(const TriadCoupling& cpl) {
  return triples_of(const_cast<TriadCoupling&>(cpl));
}

}  // namespace

void TriadCoupling::validate(const ModelConfig& config) const {
  require(model_case == config.model_case, ErrorCode::invalid_argument,
          "coupling/config case mismatch");
  require(n_active == config.n_active, ErrorCode::dimension_mismatch,
          "coupling n_active mismatch");
  for (const auto& t : triples_of(*this)) {
    require(t.a->size() == static_cast<std::size_t>(n_active) &&
                t.b->size() == t.a->size() && t.c->size() == t.a->size(),
            ErrorCode::dimension_mismatch, "coupling family size mismatch");
    for (int k = 0; k < n_active; ++k) {
      const double sum = ((*t.a)[k] + (*t.b)[k]) + (*t.c)[k];
      require(std::isfinite(sum) && sum == 0.0, ErrorCode::invalid_argument,
              "triad zero-sum violated");
    }
  }
}

TriadCoupling generate_couplings(const ModelConfig& config,
                                 std::uint64_t seed) {
  config.validate();
  TriadCoupling cpl;
  cpl.model_case = config.model_case;
  cpl.n_active = config.n_active;
  RngStream rng(seed);

  auto draw_member = [&rng]() {
    const double magnitude = 0.5 + rng.uniform01();  // (0.5, 1.5]
    return (rng.next_u64() & 1) ? magnitude : -magnitude;
  };

  for (auto& t : triples_of(cpl)) {
    t.a->resize(config.n_active);
    t.b->resize(config.n_active);
    t.c->resize(config.n_active);
    for (int k = 0; k < config.n_active; ++k) {
      int attempts = 0;
      for (;;) {
        const double a = draw_member();
        const double b = draw_member();
        const double c = -(a + b);
        const double mag = std::fabs(c);
        if (mag >= 0.1 && mag <= 3.0) {
          (*t.a)[k] = a;
          (*t.b)[k] = b;
          (*t.c)[k] = c;
          break;
        }
        require(++attempts < 1000, ErrorCode::generation_failed,
                "coupling generation exceeded 1000 redraws");
      }
    }
  }
  return cpl;
}

FullState sample_initial_state(const ModelConfig& config, RngStream& rng) {
  FullState s = FullState::zero(config);
  const double sd = std::sqrt(1.0 / (2.0 * config.beta));
  for (auto& v : s.data) v = rng.gaussian(0.0, sd);
  return s;
}

namespace {

// Convolution of the truncated quadratic advection term.  With the bath in
// one-sided complex form the sum over interacting wavenumber pairs reduces
// to two positive-index ranges:
//   S_k = sum_{j=1}^{k-1} u_j u_{k-j} + 2 sum_{j=k+1}^{n} u_j conj(u_{j-k})
// and du_k/dt = -(i k / 2) S_k, i.e. ydot_k = (k/2) Im S_k,
// zdot_k = -(k/2) Re S_k.
void bath_rhs(int n, const double* y, const double* z, double* ydot,
              double* zdot) {
  for (int k = 1; k <= n; ++k) {
    double re = 0.0, im = 0.0;
    // u_j u_{k-j}: second index runs backwards, pairs (j, k-j).
    for (int j = 1; j < k; ++j) {
      const double yj = y[j - 1], zj = z[j - 1];
      const double ym = y[k - j - 1], zm = z[k - j - 1];
      re += yj * ym - zj * zm;
      im += yj * zm + zj * ym;
    }
    // 2 u_j conj(u_{j-k}): both indices run forward with offset k.
    double re2 = 0.0, im2 = 0.0;
    for (int j = k + 1; j <= n; ++j) {
      const double yj = y[j - 1], zj = z[j - 1];
      const double ym = y[j - k - 1], zm = z[j - k - 1];
      re2 += yj * ym + zj * zm;
      im2 += zj * ym - yj * zm;
    }
    re += 2.0 * re2;
    im += 2.0 * im2;
    ydot[k - 1] = 0.5 * k * im;
    zdot[k - 1] = -0.5 * k * re;
  }
}

}  // namespace

void full_rhs(const ModelConfig& config, const TriadCoupling& coupling,
              std::span<const double> state, std::span<double> dxdt) {
  const int m = config.n_resolved();
  const int n = config.n_modes;
  require(state.size() == static_cast<std::size_t>(m + 2 * n) &&
              dxdt.size() == state.size(),
          ErrorCode::dimension_mismatch, "full_rhs: state size mismatch");

  const double* y = state.data() + m;
  const double* z = y + n;
  double* ydot = dxdt.data() + m;
  double* zdot = ydot + n;
  bath_rhs(n, y, z, ydot, zdot);

  const int na = coupling.n_active;
  switch (config.model_case) {
    case ModelCase::additive: {
      const double lam = config.lambda_a;
      const double x1 = state[0];
      double acc = 0.0;
      for (int k = 0; k < na; ++k) {
        acc += coupling.x1_yz[k] * y[k] * z[k];
        ydot[k] += lam * coupling.y_1z[k] * x1 * z[k];
        zdot[k] += lam * coupling.z_1y[k] * x1 * y[k];
      }
      dxdt[0] = lam * acc;
      break;
    }
    case ModelCase::multiplicative: {
      const double lam = config.lambda_m;
      const double x1 = state[0], x2 = state[1];
      double acc1 = 0.0, acc2 = 0.0;
      for (int k = 0; k < na; ++k) {
        acc1 += coupling.x1_2y[k] * y[k] + coupling.x1_2z[k] * z[k];
        acc2 += coupling.x2_1y[k] * y[k] + coupling.x2_1z[k] * z[k];
        ydot[k] += lam * coupling.y_12[k] * x1 * x2;
        zdot[k] += lam * coupling.z_12[k] * x1 * x2;
      }
      dxdt[0] = lam * x2 * acc1;
      dxdt[1] = lam * x1 * acc2;
      break;
    }
    case ModelCase::combined: {
      const double la = config.lambda_a;
      const double lm = config.lambda_m;
      const double x1 = state[0], x2 = state[1];
      double add1 = 0.0, add2 = 0.0, mul1 = 0.0, mul2 = 0.0;
      for (int k = 0; k < na; ++k) {
        const double yz = y[k] * z[k];
        add1 += coupling.x1_yz[k] * yz;
        add2 += coupling.x2_yz[k] * yz;
        mul1 += coupling.x1_2y[k] * y[k] + coupling.x1_2z[k] * z[k];
        mul2 += coupling.x2_1y[k] * y[k] + coupling.x2_1z[k] * z[k];
        ydot[k] += la * (coupling.y_1z[k] * x1 + coupling.y_2z[k] * x2) * z[k] +
                   lm * coupling.y_12[k] * x1 * x2;
        zdot[k] += la * (coupling.z_1y[k] * x1 + coupling.z_2y[k] * x2) * y[k] +
                   lm * coupling.z_12[k] * x1 * x2;
      }
      dxdt[0] = la * add1 + lm * x2 * mul1;
      dxdt[1] = la * add2 + lm * x1 * mul2;
      break;
    }
  }
}

void resolved_rhs(const ModelConfig& config, const TriadCoupling& coupling,
                  std::span<const double> state, std::span<double> out) {
  const int m = config.n_resolved();
  const int n = config.n_modes;
  require(state.size() == static_cast<std::size_t>(m + 2 * n) &&
              out.size() == static_cast<std::size_t>(m),
          ErrorCode::dimension_mismatch, "resolved_rhs: size mismatch");
  const double* y = state.data() + m;
  const double* z = y + n;
  const int na = coupling.n_active;

  switch (config.model_case) {
    case ModelCase::additive: {
      double acc = 0.0;
      for (int k = 0; k < na; ++k) acc += coupling.x1_yz[k] * y[k] * z[k];
      out[0] = config.lambda_a * acc;
      break;
    }
    case ModelCase::multiplicative: {
      double acc1 = 0.0, acc2 = 0.0;
      for (int k = 0; k < na; ++k) {
        acc1 += coupling.x1_2y[k] * y[k] + coupling.x1_2z[k] * z[k];
        acc2 += coupling.x2_1y[k] * y[k] + coupling.x2_1z[k] * z[k];
      }
      out[0] = config.lambda_m * state[1] * acc1;
      out[1] = config.lambda_m * state[0] * acc2;
      break;
    }
    case ModelCase::combined: {
      double add1 = 0.0, add2 = 0.0, mul1 = 0.0, mul2 = 0.0;
      for (int k = 0; k < na; ++k) {
        const double yz = y[k] * z[k];
        add1 += coupling.x1_yz[k] * yz;
        add2 += coupling.x2_yz[k] * yz;
        mul1 += coupling.x1_2y[k] * y[k] + coupling.x1_2z[k] * z[k];
        mul2 += coupling.x2_1y[k] * y[k] + coupling.x2_1z[k] * z[k];
      }
      out[0] = config.lambda_a * add1 + config.lambda_m * state[1] * mul1;
      out[1] = config.lambda_a * add2 + config.lambda_m * state[0] * mul2;
      break;
    }
  }
}

double energy(std::span<const double> state) {
  double e = 0.0;
  for (const double v : state) e += v * v;
  return e;
}

std::string TriadCoupling::to_text() const {
  KeyValueFile kv;
  kv.comment("triad coupling coefficients; b[k].<family> with k the mode");
  kv.set("case", to_string(model_case));
  kv.set("n_active", static_cast<std::int64_t>(n_active));
  for (const auto& t : triples_of(*this))
    for (int k = 0; k < n_active; ++k) {
      const std::string tag = "b[" + std::to_string(k + 1) + "].";
      kv.set(tag + t.first, (*t.a)[k]);
      kv.set(tag + t.second, (*t.b)[k]);
      kv.set(tag + t.third, (*t.c)[k]);
    }
  return kv.to_string();
}

TriadCoupling TriadCoupling::from_text(const std::string& text,
                                       const std::string& context) {
  const KeyValueFile kv = KeyValueFile::parse(text, context);
  TriadCoupling cpl;
  cpl.model_case = model_case_from_string(kv.get("case"));
  cpl.n_active = static_cast<int>(kv.get_int("n_active"));
  require(cpl.n_active >= 1, ErrorCode::invalid_argument,
          context + ": n_active must be >= 1");
  for (auto& t : triples_of(cpl)) {
    t.a->resize(cpl.n_active);
    t.b->resize(cpl.n_active);
    t.c->resize(cpl.n_active);
    for (int k = 0; k < cpl.n_active; ++k) {
      const std::string tag = "b[" + std::to_string(k + 1) + "].";
      (*t.a)[k] = kv.get_double(tag + t.first);
      (*t.b)[k] = kv.get_double(tag + t.second);
      (*t.c)[k] = kv.get_double(tag + t.third);
    }
  }
  return cpl;
}

}  // namespace modered
