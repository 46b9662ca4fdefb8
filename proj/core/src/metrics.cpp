#include "dsbm/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dsbm {

namespace {

std::vector<std::int64_t> confusion(std::span<const std::int32_t> truth,
                                    std::span<const std::int32_t> inferred, int k) {
  if (truth.size() != inferred.size())
    throw std::invalid_argument("overlap: label arrays differ in length");
  std::vector<std::int64_t> counts(static_cast<std::size_t>(k) * k, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const std::int32_t a = truth[i], b = inferred[i];
    if (a < 0 || a >= k || b < 0 || b >= k)
      throw std::invalid_argument("overlap: label out of range");
    ++counts[static_cast<std::size_t>(a) * k + b];
  }
  return counts;
}

}  // namespace

std::vector<int> assignment_brute_force(std::span<const std::int64_t> score, int k) {
  std::vector<int> perm(k), best(k);
  std::iota(perm.begin(), perm.end(), 0);
  best = perm;
  std::int64_t best_sum = std::numeric_limits<std::int64_t>::min();
  do {
    std::int64_t sum = 0;
    for (int r = 0; r < k; ++r) sum += score[static_cast<std::size_t>(r) * k + perm[r]];
    if (sum > best_sum) {
      best_sum = sum;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

std::vector<int> assignment_hungarian(std::span<const std::int64_t> score, int k) {
  // potentials formulation on the minimization problem with cost = -score;
  // 1-based scratch arrays, O(k^3)
  const int n = k;
  std::vector<std::int64_t> u(n + 1, 0), v(n + 1, 0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  auto cost = [&](int i, int j) {
    return -score[static_cast<std::size_t>(i - 1) * k + (j - 1)];
  };
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<std::int64_t> minv(n + 1, std::numeric_limits<std::int64_t>::max());
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      int j1 = 0;
      std::int64_t delta = std::numeric_limits<std::int64_t>::max();
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const std::int64_t cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> result(n);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) result[p[j] - 1] = j - 1;
  return result;
}

OverlapReport overlap_score(std::span<const std::int32_t> truth,
                            std::span<const std::int32_t> inferred, int k) {
  if (k < 1) throw std::invalid_argument("overlap: k must be >= 1");
  const auto counts = confusion(truth, inferred, k);
  OverlapReport rep;
  rep.permutation = k <= 8 ? assignment_brute_force(counts, k) : assignment_hungarian(counts, k);
  std::int64_t agree = 0;
  for (int r = 0; r < k; ++r) agree += counts[static_cast<std::size_t>(r) * k + rep.permutation[r]];
  const double total = static_cast<double>(truth.size());
  rep.raw_agreement = total > 0 ? static_cast<double>(agree) / total : 0.0;
  rep.overlap = k == 1 ? rep.raw_agreement
                       : (rep.raw_agreement - 1.0 / k) / (1.0 - 1.0 / k);
  return rep;
}

std::vector<double> overlap_per_snapshot(std::span<const std::int32_t> truth,
                                         std::span<const std::int32_t> inferred, int k, int n,
                                         int T) {
  if (truth.size() != static_cast<std::size_t>(n) * T)
    throw std::invalid_argument("overlap_per_snapshot: array length must be n*T");
  const OverlapReport joint = overlap_score(truth, inferred, k);
  std::vector<double> out(T, 0.0);
  for (int t = 0; t < T; ++t) {
    std::int64_t agree = 0;
    for (int i = 0; i < n; ++i) {
      const std::size_t idx = static_cast<std::size_t>(t) * n + i;
      if (joint.permutation[truth[idx]] == inferred[idx]) ++agree;
    }
    const double frac = static_cast<double>(agree) / n;
    out[t] = k == 1 ? frac : (frac - 1.0 / k) / (1.0 - 1.0 / k);
  }
  return out;
}

}  // namespace dsbm
