#include "dsbm/nb_spectral.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dsbm/philox.hpp"

namespace dsbm {

namespace {

bool numerically_real(std::complex<double> z) {
  return std::abs(z.imag()) <= 1e-6 * std::abs(z) + 1e-12;
}

// a mode carries community signal only when some snapshot shows both signs at
// a material fraction of the peak spatial weight; ferromagnetic chain
// harmonics flip sign across time but stay single-sign within each snapshot,
// and lambda = 0 modes have no spatial weight at all
bool sign_free_mode(const Eigen::VectorXd& v, int n, int T) {
  double peak = 0;
  for (int i = 0; i < n * T; ++i) peak = std::max(peak, std::abs(v[i]));
  if (peak <= 1e-8 * v.lpNorm<Eigen::Infinity>()) return true;  // empty spatial block
  const double tol = 0.05 * peak;
  for (int t = 0; t < T; ++t) {
    bool pos = false, neg = false;
    for (int i = 0; i < n; ++i) {
      const double x = v[static_cast<Eigen::Index>(t) * n + i];
      if (x > tol) pos = true;
      if (x < -tol) neg = true;
    }
    if (pos && neg) return false;
  }
  return true;
}

// remove the per-snapshot mean from every block: the projection P of P B' P
void center_blocks(Eigen::VectorXd& x, int n, int T) {
  for (int seg = 0; seg < 4 * T; ++seg) {
    auto span = x.segment(static_cast<Eigen::Index>(seg) * n, n);
    span.array() -= span.mean();
  }
}

Eigen::VectorXd apply_op(const NonBacktrackingOperator& op, bool regularize, Eigen::VectorXd x) {
  if (regularize) center_blocks(x, op.n, op.T);
  Eigen::VectorXd y = op.apply(x);
  if (regularize) center_blocks(y, op.n, op.T);
  return y;
}

EigenPair finish_pair(const NonBacktrackingOperator& op, bool regularize, double value,
                      Eigen::VectorXd vec, double tol) {
  vec.normalize();
  EigenPair p;
  p.value = value;
  p.residual = (apply_op(op, regularize, vec) - value * vec).norm();
  p.vector = std::move(vec);
  p.is_real = true;
  p.is_ferromagnetic = sign_free_mode(p.vector, op.n, op.T);
  p.converged = p.residual <= tol * std::max(1.0, std::abs(value));
  return p;
}

std::vector<EigenPair> dense_real_eigenpairs(const NonBacktrackingOperator& op, int m,
                                             const EigsOptions& opt) {
  Eigen::MatrixXd dense(op.matrix);
  if (opt.regularize) {
    const int n = op.n;
    for (int seg = 0; seg < 4 * op.T; ++seg) {
      const Eigen::Index s0 = static_cast<Eigen::Index>(seg) * n;
      const Eigen::VectorXd colmean = dense.middleCols(s0, n).rowwise().mean();
      dense.middleCols(s0, n).colwise() -= colmean;
      const Eigen::RowVectorXd rowmean = dense.middleRows(s0, n).colwise().mean();
      dense.middleRows(s0, n).rowwise() -= rowmean;
    }
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(dense, /*computeEigenvectors=*/true);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("leading_real_eigenpairs: dense eigensolver failed");

  std::vector<int> idx;
  for (int j = 0; j < dense.rows(); ++j)
    if (numerically_real(es.eigenvalues()[j])) idx.push_back(j);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    return std::abs(es.eigenvalues()[a]) > std::abs(es.eigenvalues()[b]);
  });
  if (static_cast<int>(idx.size()) > m) idx.resize(m);

  std::vector<EigenPair> out;
  for (int j : idx) {
    const Eigen::VectorXd v = es.eigenvectors().col(j).real();
    out.push_back(
        finish_pair(op, opt.regularize, es.eigenvalues()[j].real(), v, std::max(opt.tol, 1e-9)));
  }
  return out;
}

struct RitzCandidate {
  std::complex<double> value;
  double residual_estimate = 0;
  int column = 0;
};

}  // namespace

NonBacktrackingOperator build_operator(const SpatioTemporalGraph& graph,
                                       const ModelParams& params) {
  params.validate();
  if (graph.n != params.n || graph.T != params.T)
    throw std::invalid_argument("build_operator: graph and model disagree on (n, T)");

  const int n = graph.n, T = graph.T;
  const int nT = n * T;
  const double lam = params.lambda();
  const double eta = params.eta;

  NonBacktrackingOperator op;
  op.n = n;
  op.T = T;
  op.lambda = lam;
  op.eta = eta;

  using Trip = Eigen::Triplet<double>;
  std::vector<Trip> trips;
  trips.reserve(static_cast<std::size_t>(4) * graph.neighbors.size() + 10 * nT);

  auto temporal_degree = [&](int t) {
    if (T == 1) return 0;
    return (t == 0 || t == T - 1) ? 1 : 2;
  };

  for (int v = 0; v < nT; ++v) {
    const int t = v / n, i = v - t * n;
    const int d = graph.degree(v);
    const int dt = temporal_degree(t);

    // block row 1: lambda*A*s - lambda*shat + lambda*A*r
    for (int e = graph.offsets[v]; e < graph.offsets[v + 1]; ++e) {
      const int u = graph.vertex(graph.neighbors[e], t);
      trips.emplace_back(v, u, lam);
      trips.emplace_back(v, 2 * nT + u, lam);
    }
    trips.emplace_back(v, nT + v, -lam);

    // block row 2: lambda*(D - I)*s + lambda*D*r
    trips.emplace_back(nT + v, v, lam * (d - 1));
    if (d != 0) trips.emplace_back(nT + v, 2 * nT + v, lam * d);

    // block row 3: eta*At*s + eta*At*r - eta*rhat
    if (t > 0) {
      const int u = graph.vertex(i, t - 1);
      trips.emplace_back(2 * nT + v, u, eta);
      trips.emplace_back(2 * nT + v, 2 * nT + u, eta);
    }
    if (t < T - 1) {
      const int u = graph.vertex(i, t + 1);
      trips.emplace_back(2 * nT + v, u, eta);
      trips.emplace_back(2 * nT + v, 2 * nT + u, eta);
    }
    trips.emplace_back(2 * nT + v, 3 * nT + v, -eta);

    // block row 4: eta*Dt*s + eta*(Dt - I)*r
    if (dt != 0) trips.emplace_back(3 * nT + v, v, eta * dt);
    trips.emplace_back(3 * nT + v, 2 * nT + v, eta * (dt - 1));
  }

  op.matrix.resize(4 * nT, 4 * nT);
  op.matrix.setFromTriplets(trips.begin(), trips.end());
  op.matrix.makeCompressed();
  return op;
}

std::vector<EigenPair> leading_real_eigenpairs(const NonBacktrackingOperator& op, int m,
                                               const EigsOptions& options) {
  if (m < 1) throw std::invalid_argument("leading_real_eigenpairs: m must be >= 1");
  const Eigen::Index dim = op.dim();
  if (dim == 0) return {};
  if (dim <= options.dense_cutoff || dim <= 3 * m + 4) return dense_real_eigenpairs(op, m, options);

  const int mk = std::min<Eigen::Index>(std::max(options.krylov_dim, 3 * m + 4), dim - 1);
  Eigen::MatrixXd V(dim, mk + 1);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(mk + 1, mk);

  Philox rng(options.seed, 0x6e627370);
  Eigen::VectorXd v0(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v0[i] = 2.0 * rng.uniform01() - 1.0;
  if (options.regularize) center_blocks(v0, op.n, op.T);
  v0.normalize();

  std::vector<EigenPair> best;
  for (int restart = 0; restart < std::max(1, options.max_restarts); ++restart) {
    H.setZero();
    V.col(0) = v0;
    int span = mk;
    bool invariant = false;
    for (int j = 0; j < mk; ++j) {
      Eigen::VectorXd w = apply_op(op, options.regularize, V.col(j));
      const double scale = std::max(w.norm(), 1e-300);
      // modified Gram-Schmidt plus a second pass for safety
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= j; ++i) {
          const double h = V.col(i).dot(w);
          w -= h * V.col(i);
          H(i, j) += h;
        }
      }
      H(j + 1, j) = w.norm();
      if (H(j + 1, j) <= 1e-12 * scale) {
        span = j + 1;
        invariant = true;
        break;
      }
      V.col(j + 1) = w / H(j + 1, j);
    }

    const Eigen::MatrixXd Hm = H.topLeftCorner(span, span);
    Eigen::EigenSolver<Eigen::MatrixXd> es(Hm, /*computeEigenvectors=*/true);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("leading_real_eigenpairs: Hessenberg eigensolver failed");

    std::vector<RitzCandidate> cands(span);
    const double hsub = invariant ? 0.0 : H(span, span - 1);
    for (int j = 0; j < span; ++j) {
      cands[j].value = es.eigenvalues()[j];
      cands[j].residual_estimate = std::abs(hsub) * std::abs(es.eigenvectors()(span - 1, j));
      cands[j].column = j;
    }
    std::sort(cands.begin(), cands.end(), [](const RitzCandidate& a, const RitzCandidate& b) {
      return std::abs(a.value) > std::abs(b.value);
    });

    // the top of the spectrum counts as resolved when the m+1 largest Ritz
    // values (of any type) have small residual estimates
    bool top_resolved = true;
    for (int j = 0; j < std::min<int>(m + 1, span); ++j)
      if (cands[j].residual_estimate >
          options.tol * std::max(1.0, std::abs(cands[j].value)))
        top_resolved = false;

    std::vector<EigenPair> current;
    for (const RitzCandidate& cand : cands) {
      if (static_cast<int>(current.size()) == m) break;
      if (!numerically_real(cand.value)) continue;
      Eigen::VectorXd x = V.leftCols(span) * es.eigenvectors().col(cand.column).real();
      if (x.norm() <= 1e-300) continue;
      current.push_back(
          finish_pair(op, options.regularize, cand.value.real(), std::move(x), options.tol));
    }

    const auto converged_count = [](const std::vector<EigenPair>& ps) {
      std::size_t c = 0;
      for (const auto& p : ps) c += p.converged ? 1 : 0;
      return c;
    };
    if (best.empty() || converged_count(current) > converged_count(best) ||
        (converged_count(current) == converged_count(best) && current.size() > best.size()))
      best = current;

    bool all_converged = static_cast<int>(current.size()) == m;
    for (const auto& p : current) all_converged = all_converged && p.converged;
    if (invariant || top_resolved || all_converged) break;

    // restart from a blend of the leading Ritz directions
    Eigen::VectorXd next = Eigen::VectorXd::Zero(dim);
    const int keep = std::min<int>(m + 2, span);
    for (int j = 0; j < keep; ++j) {
      const Eigen::VectorXd dir = V.leftCols(span) * es.eigenvectors().col(cands[j].column).real();
      if (dir.norm() > 1e-300) next += std::abs(cands[j].value) * dir.normalized();
    }
    if (next.norm() <= 1e-12) {
      for (Eigen::Index i = 0; i < dim; ++i) next[i] = 2.0 * rng.uniform01() - 1.0;
    } else {
      for (Eigen::Index i = 0; i < dim; ++i)
        next[i] += 1e-3 * (2.0 * rng.uniform01() - 1.0) * next.norm() / std::sqrt(double(dim));
    }
    if (options.regularize) center_blocks(next, op.n, op.T);
    v0 = next.normalized();
  }
  return best;
}

SpectrumSummary full_spectrum(const NonBacktrackingOperator& op, int limit) {
  const Eigen::Index dim = op.dim();
  if (dim > limit)
    throw std::invalid_argument("full_spectrum: operator dimension exceeds the dense limit");

  Eigen::MatrixXd dense(op.matrix);  // column-major copy, destroyed by dgeev
  std::vector<double> wr(dim), wi(dim);
  const lapack_int info =
      LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', 'N', static_cast<lapack_int>(dim), dense.data(),
                    static_cast<lapack_int>(std::max<Eigen::Index>(dim, 1)), wr.data(), wi.data(),
                    nullptr, 1, nullptr, 1);
  if (info != 0) throw std::runtime_error("full_spectrum: dgeev failed to converge");

  SpectrumSummary summary;
  summary.eigenvalues.reserve(dim);
  for (Eigen::Index j = 0; j < dim; ++j) summary.eigenvalues.emplace_back(wr[j], wi[j]);

  double bulk = 0;
  for (const auto& z : summary.eigenvalues)
    if (z.imag() != 0.0) bulk = std::max(bulk, std::abs(z));
  summary.bulk_radius = bulk;

  for (const auto& z : summary.eigenvalues)
    if (z.imag() == 0.0 && std::abs(z.real()) > bulk)
      summary.reals_outside_bulk.push_back(z.real());
  std::sort(summary.reals_outside_bulk.begin(), summary.reals_outside_bulk.end(),
            [](double a, double b) { return std::abs(a) > std::abs(b); });
  return summary;
}

namespace {

// plain Lloyd iterations with k-means++ seeding; returns labels minimizing
// inertia over the given number of restarts
std::vector<std::int32_t> kmeans(const Eigen::MatrixXd& X, int k, int restarts,
                                 std::uint64_t seed) {
  const Eigen::Index npts = X.rows();
  std::vector<std::int32_t> best(npts, 0);
  if (npts == 0) return best;
  if (npts <= k) {
    for (Eigen::Index i = 0; i < npts; ++i) best[i] = static_cast<std::int32_t>(i % k);
    return best;
  }

  double best_inertia = -1;
  for (int attempt = 0; attempt < restarts; ++attempt) {
    Philox rng(seed, 0x6b6d + attempt);
    Eigen::MatrixXd centers(k, X.cols());
    centers.row(0) = X.row(rng.uniform_below(npts));
    Eigen::VectorXd d2 = (X.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
      const double total = d2.sum();
      double pick = rng.uniform01() * (total > 0 ? total : 1);
      Eigen::Index chosen = 0;
      for (Eigen::Index i = 0; i < npts; ++i) {
        pick -= total > 0 ? d2[i] : 1.0 / npts;
        if (pick <= 0) {
          chosen = i;
          break;
        }
      }
      centers.row(c) = X.row(chosen);
      d2 = d2.cwiseMin((X.rowwise() - centers.row(c)).rowwise().squaredNorm());
    }

    std::vector<std::int32_t> labels(npts, 0);
    for (int iter = 0; iter < 100; ++iter) {
      bool changed = false;
      for (Eigen::Index i = 0; i < npts; ++i) {
        int arg = 0;
        double bestd = (X.row(i) - centers.row(0)).squaredNorm();
        for (int c = 1; c < k; ++c) {
          const double d = (X.row(i) - centers.row(c)).squaredNorm();
          if (d < bestd) {
            bestd = d;
            arg = c;
          }
        }
        if (labels[i] != arg) {
          labels[i] = arg;
          changed = true;
        }
      }
      centers.setZero();
      std::vector<int> counts(k, 0);
      for (Eigen::Index i = 0; i < npts; ++i) {
        centers.row(labels[i]) += X.row(i);
        ++counts[labels[i]];
      }
      for (int c = 0; c < k; ++c) {
        if (counts[c] > 0) {
          centers.row(c) /= counts[c];
        } else {
          // revive an empty cluster at the point farthest from its center
          Eigen::Index far = 0;
          double fard = -1;
          for (Eigen::Index i = 0; i < npts; ++i) {
            const double d = (X.row(i) - centers.row(labels[i])).squaredNorm();
            if (d > fard) {
              fard = d;
              far = i;
            }
          }
          centers.row(c) = X.row(far);
          changed = true;
        }
      }
      if (!changed) break;
    }

    double inertia = 0;
    for (Eigen::Index i = 0; i < npts; ++i)
      inertia += (X.row(i) - centers.row(labels[i])).squaredNorm();
    if (best_inertia < 0 || inertia < best_inertia) {
      best_inertia = inertia;
      best = labels;
    }
  }
  return best;
}

}  // namespace

SpectralPartition spectral_partition(const NonBacktrackingOperator& op,
                                     const std::vector<EigenPair>& pairs, int k,
                                     std::uint64_t kmeans_seed) {
  if (k < 2) throw std::invalid_argument("spectral_partition: k must be >= 2");
  const int n = op.n, T = op.T;
  const Eigen::Index nT = static_cast<Eigen::Index>(n) * T;
  SpectralPartition part;

  std::vector<const EigenPair*> informative;
  for (const auto& p : pairs) {
    if (!p.is_real || p.is_ferromagnetic) continue;
    if (p.vector.size() < 4 * nT) continue;
    informative.push_back(&p);
  }
  std::sort(informative.begin(), informative.end(), [](const EigenPair* a, const EigenPair* b) {
    return std::abs(a->value) > std::abs(b->value);
  });
  if (informative.empty()) return part;

  part.structure_found = true;
  if (k == 2) {
    const Eigen::VectorXd& v = informative.front()->vector;
    part.used_eigenvalues.push_back(informative.front()->value.real());
    part.labels.resize(nT);
    for (Eigen::Index i = 0; i < nT; ++i) part.labels[i] = v[i] > 0 ? 0 : 1;
    return part;
  }

  const int cols = std::min<int>(k - 1, static_cast<int>(informative.size()));
  Eigen::MatrixXd embed(nT, cols);
  for (int c = 0; c < cols; ++c) {
    Eigen::VectorXd block = informative[c]->vector.head(nT);
    const double norm = block.norm();
    if (norm > 0) block /= norm;
    embed.col(c) = block;
    part.used_eigenvalues.push_back(informative[c]->value.real());
  }
  part.labels = kmeans(embed, k, 10, kmeans_seed);
  return part;
}

}  // namespace dsbm
