#pragma once

#include <vector>

namespace dsbm {

// Affinity scale derived from (c, epsilon, k):
//   c_in = k*c / (1 + (k-1)*epsilon),  c_out = epsilon * c_in,
//   lambda = (c_in - c_out) / (k*c) = (1 - epsilon) / (1 + (k-1)*epsilon).
// lambda is the second eigenvalue of the spatial channel sigma = lambda*I + (1-lambda)*J/k.
struct Rates {
  double c_in = 0;
  double c_out = 0;
  double lambda = 0;
};

Rates derive_rates(double c, double epsilon, int k);

// Kesten-Stigum margin c*lambda^2*(1+eta^2) - (1-eta^2); detectable iff > 0.
double ks_margin(double c, double lambda, double eta);

// Largest eigenvalue of the two-type branching matrix [[c*lambda^2, c*lambda^2],
// [2*eta^2, eta^2]]; community structure is detectable iff it exceeds 1.
double branching_eigenvalue(double c, double lambda, double eta);

struct CriticalEpsilon {
  double value = 0;
  // Set when c <= (1-eta^2)/(1+eta^2): no epsilon in [0,1) is detectable and
  // value is reported as 0.
  bool always_undetectable = false;
};

// Detectability boundary: epsilon_c = (1-lambda_c)/(1+(k-1)*lambda_c) with
// lambda_c = sqrt((1-eta^2) / ((1+eta^2)*c)).
CriticalEpsilon critical_epsilon(double c, double eta, int k);

// Parameters of the dynamic block model: n nodes, T snapshots, k groups,
// persistence eta, mean degree c, affinity ratio epsilon, group prior.
struct ModelParams {
  int n = 0;
  int T = 0;
  int k = 2;
  double eta = 0;
  double c = 0;
  double epsilon = 1;
  std::vector<double> prior;  // empty means uniform 1/k

  static ModelParams make(int n, int T, int k, double eta, double c, double epsilon,
                          std::vector<double> prior = {});

  // Throws std::invalid_argument on out-of-range values, a prior that does not
  // sum to 1, or c_in > n (which would need an edge probability above 1).
  void validate() const;

  bool uniform_prior() const;
  double prior_of(int r) const;

  double c_in() const;
  double c_out() const;
  double lambda() const;

  // group-to-group rate: c_in on the diagonal, c_out off it (c for k == 1)
  double c_rs(int r, int s) const;
  // per-snapshot edge probability c_rs / n
  double edge_prob(int r, int s) const;

  // k x k row-major channel matrices
  std::vector<double> sigma() const;  // lambda*I + (1-lambda)*J/k
  std::vector<double> tau() const;    // eta*I + (1-eta)*J/k
};

struct ThresholdReport {
  double ks_margin = 0;
  double branching_eigenvalue = 0;
  double epsilon_critical = 0;
  bool detectable = false;
  bool always_undetectable = false;
};

// Requires k >= 2 and a uniform prior; the linearization behind these
// quantities assumes the symmetric phase.
ThresholdReport threshold_report(const ModelParams& params);

}  // namespace dsbm
