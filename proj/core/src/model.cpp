#include "dsbm/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dsbm {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace

Rates derive_rates(double c, double epsilon, int k) {
  require(k >= 2, "derive_rates: k must be >= 2");
  require(c > 0, "derive_rates: c must be positive");
  require(epsilon >= 0 && epsilon <= 1, "derive_rates: epsilon must lie in [0,1]");
  Rates r;
  r.c_in = k * c / (1.0 + (k - 1) * epsilon);
  r.c_out = epsilon * r.c_in;
  r.lambda = (1.0 - epsilon) / (1.0 + (k - 1) * epsilon);
  return r;
}

double ks_margin(double c, double lambda, double eta) {
  require(c > 0, "ks_margin: c must be positive");
  require(lambda >= 0 && lambda <= 1, "ks_margin: lambda must lie in [0,1]");
  require(eta >= 0 && eta <= 1, "ks_margin: eta must lie in [0,1]");
  const double e2 = eta * eta;
  return c * lambda * lambda * (1.0 + e2) - (1.0 - e2);
}

double branching_eigenvalue(double c, double lambda, double eta) {
  require(c > 0, "branching_eigenvalue: c must be positive");
  require(lambda >= 0 && lambda <= 1, "branching_eigenvalue: lambda must lie in [0,1]");
  require(eta >= 0 && eta <= 1, "branching_eigenvalue: eta must lie in [0,1]");
  // char. polynomial of [[a, a], [2b, b]] is x^2 - (a+b)x - ab
  const double a = c * lambda * lambda;
  const double b = eta * eta;
  return 0.5 * ((a + b) + std::sqrt((a + b) * (a + b) + 4.0 * a * b));
}

CriticalEpsilon critical_epsilon(double c, double eta, int k) {
  require(k >= 2, "critical_epsilon: k must be >= 2");
  require(c > 0, "critical_epsilon: c must be positive");
  require(eta >= 0 && eta <= 1, "critical_epsilon: eta must lie in [0,1]");
  const double e2 = eta * eta;
  const double rhs = (1.0 - e2) / (1.0 + e2);
  CriticalEpsilon out;
  if (!(c > rhs)) {
    out.value = 0.0;
    out.always_undetectable = true;
    return out;
  }
  const double lambda_c = std::sqrt(rhs / c);
  out.value = (1.0 - lambda_c) / (1.0 + (k - 1) * lambda_c);
  return out;
}

ModelParams ModelParams::make(int n, int T, int k, double eta, double c, double epsilon,
                              std::vector<double> prior) {
  ModelParams p;
  p.n = n;
  p.T = T;
  p.k = k;
  p.eta = eta;
  p.c = c;
  p.epsilon = epsilon;
  p.prior = std::move(prior);
  p.validate();
  return p;
}

void ModelParams::validate() const {
  require(n >= 1, "ModelParams: n must be >= 1");
  require(T >= 1, "ModelParams: T must be >= 1");
  require(k >= 1, "ModelParams: k must be >= 1");
  require(eta >= 0 && eta <= 1, "ModelParams: eta must lie in [0,1]");
  require(c > 0, "ModelParams: c must be positive");
  require(epsilon >= 0 && epsilon <= 1, "ModelParams: epsilon must lie in [0,1]");
  if (!prior.empty()) {
    require(static_cast<int>(prior.size()) == k, "ModelParams: prior must have k entries");
    double sum = 0;
    for (double q : prior) {
      require(q >= 0, "ModelParams: prior entries must be nonnegative");
      sum += q;
    }
    require(std::abs(sum - 1.0) <= 1e-12, "ModelParams: prior must sum to 1");
  }
  require(c_in() <= static_cast<double>(n) + 1e-12,
          "ModelParams: c_in exceeds n, edge probability would exceed 1");
}

bool ModelParams::uniform_prior() const {
  if (prior.empty()) return true;
  for (double q : prior) {
    if (std::abs(q - 1.0 / k) > 1e-12) return false;
  }
  return true;
}

double ModelParams::prior_of(int r) const { return prior.empty() ? 1.0 / k : prior[r]; }

double ModelParams::c_in() const { return k * c / (1.0 + (k - 1) * epsilon); }

double ModelParams::c_out() const { return k == 1 ? c : epsilon * c_in(); }

double ModelParams::lambda() const {
  return k == 1 ? 0.0 : (1.0 - epsilon) / (1.0 + (k - 1) * epsilon);
}

double ModelParams::c_rs(int r, int s) const {
  if (k == 1) return c;
  return r == s ? c_in() : c_out();
}

double ModelParams::edge_prob(int r, int s) const { return c_rs(r, s) / n; }

std::vector<double> ModelParams::sigma() const {
  const double l = lambda();
  std::vector<double> m(static_cast<std::size_t>(k) * k, (1.0 - l) / k);
  for (int r = 0; r < k; ++r) m[static_cast<std::size_t>(r) * k + r] += l;
  return m;
}

std::vector<double> ModelParams::tau() const {
  std::vector<double> m(static_cast<std::size_t>(k) * k, (1.0 - eta) / k);
  for (int r = 0; r < k; ++r) m[static_cast<std::size_t>(r) * k + r] += eta;
  return m;
}

ThresholdReport threshold_report(const ModelParams& params) {
  params.validate();
  require(params.k >= 2, "threshold_report: k must be >= 2");
  require(params.uniform_prior(), "threshold_report: requires the uniform prior");
  ThresholdReport rep;
  const double l = params.lambda();
  rep.ks_margin = ks_margin(params.c, l, params.eta);
  rep.branching_eigenvalue = branching_eigenvalue(params.c, l, params.eta);
  const CriticalEpsilon ce = critical_epsilon(params.c, params.eta, params.k);
  rep.epsilon_critical = ce.value;
  rep.always_undetectable = ce.always_undetectable;
  rep.detectable = rep.ks_margin > 0;
  return rep;
}

}  // namespace dsbm
