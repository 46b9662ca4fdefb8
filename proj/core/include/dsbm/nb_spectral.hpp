#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <complex>
#include <cstdint>
#include <vector>

#include "dsbm/model.hpp"
#include "dsbm/network.hpp"

namespace dsbm {

// Linearization of BP around the factorized fixed point, compressed to four
// aggregate coordinates per node-time (deviation sums over incoming/outgoing
// spatial messages and incoming/outgoing temporal messages, the temporal pair
// carrying an eta/lambda scale).  With A/D the spatial adjacency/degree over
// node-times (block diagonal per snapshot), At/Dt their temporal counterparts
// (Dt is 2 in the interior, 1 at t = 0 and T-1, 0 when T = 1), the operator in
// block form is
//
//     [ lambda*A       -lambda*I   lambda*A        0         ]
//     [ lambda*(D-I)    0          lambda*D        0         ]
//     [ eta*At          0          eta*At         -eta*I     ]
//     [ eta*Dt          0          eta*(Dt-I)      0         ]
//
// Instability of the uniform fixed point (an eigenvalue beyond 1) marks the
// detectable phase; the corresponding eigenvector's first block carries the
// community signal.
struct NonBacktrackingOperator {
  int n = 0;
  int T = 0;
  double lambda = 0;
  double eta = 0;
  Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;  // 4nT x 4nT

  Eigen::Index dim() const { return matrix.rows(); }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return matrix * x; }
};

NonBacktrackingOperator build_operator(const SpatioTemporalGraph& graph,
                                       const ModelParams& params);

struct EigenPair {
  std::complex<double> value;
  Eigen::VectorXd vector;  // real eigenvector, unit norm
  double residual = 0;     // ||B'v - xv|| / ||v|| recomputed against the operator
  bool is_real = true;
  // no snapshot of the spatial block shows both signs at a material level: the
  // mode carries no community information (covers the ferromagnetic branch and
  // its temporal harmonics, which flip sign across time but not within a
  // snapshot, and lambda = 0 modes with no spatial weight)
  bool is_ferromagnetic = false;
  bool converged = false;
};

struct EigsOptions {
  int krylov_dim = 64;
  int max_restarts = 12;
  double tol = 1e-10;
  std::uint64_t seed = 7;
  int dense_cutoff = 600;  // below this dimension fall back to a dense solve
  // Solve P B' P instead of B', where P removes the per-snapshot mean from
  // every block.  The ferromagnetic branch (fundamental plus its temporal
  // harmonics) lives on the within-snapshot-uniform subspace, so this pushes
  // it into the bulk and lifts the community modes to the top -- use it when
  // extracting eigenvectors for partitioning.
  bool regularize = false;
};

// The m largest-modulus eigenpairs restricted to (numerically) real
// eigenvalues, via explicitly restarted Arnoldi with full reorthogonalization;
// small operators are solved densely.  Pairs that failed to reach tol are
// still returned with converged = false and the achieved residual.
std::vector<EigenPair> leading_real_eigenpairs(const NonBacktrackingOperator& op, int m,
                                               const EigsOptions& options = {});

struct SpectrumSummary {
  std::vector<std::complex<double>> eigenvalues;  // all 4nT of them
  double bulk_radius = 0;                         // largest modulus among non-real eigenvalues
  std::vector<double> reals_outside_bulk;         // sorted by modulus, descending
};

// Dense eigenvalue sweep of the full operator (LAPACK dgeev).  Throws
// std::invalid_argument when dim() exceeds limit.
SpectrumSummary full_spectrum(const NonBacktrackingOperator& op, int limit = 8000);

struct SpectralPartition {
  bool structure_found = false;           // false when only ferromagnetic modes exist
  std::vector<std::int32_t> labels;       // per node-time t*n + i, valid when found
  std::vector<double> used_eigenvalues;
};

// Hard partition from the informative (non-ferromagnetic) real eigenvectors'
// spatial blocks (entries [0, nT), one per node-time): sign split for k = 2,
// seeded k-means on the top k-1 blocks otherwise.  Feed it eigenpairs computed
// with regularize = true; on the raw operator, ferromagnetic temporal
// harmonics sit among (and hybridize with) the community modes.
SpectralPartition spectral_partition(const NonBacktrackingOperator& op,
                                     const std::vector<EigenPair>& pairs, int k,
                                     std::uint64_t kmeans_seed = 1);

}  // namespace dsbm
