#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dsbm {

struct OverlapReport {
  double overlap = 0;        // (agreement - 1/k) / (1 - 1/k), clamped at 0 by maximization
  double raw_agreement = 0;  // best fraction of node-times labeled identically
  std::vector<int> permutation;  // truth group r corresponds to inferred group permutation[r]
};

// Chance-normalized agreement maximized over all k! group relabelings,
// computed jointly over every node-time.  Inputs are flat arrays of equal
// length with entries in [0, k).  Exhaustive search for k <= 8, Hungarian
// assignment beyond that.
OverlapReport overlap_score(std::span<const std::int32_t> truth,
                            std::span<const std::int32_t> inferred, int k);

// Per-snapshot agreement under the single permutation that is optimal for the
// whole run (diagnostic; entries are normalized like overlap_score).
std::vector<double> overlap_per_snapshot(std::span<const std::int32_t> truth,
                                         std::span<const std::int32_t> inferred, int k, int n,
                                         int T);

// Assignment maximizers over a k x k score matrix (row-major): returns the
// column picked for each row.  Exposed separately so they can be checked
// against each other.
std::vector<int> assignment_brute_force(std::span<const std::int64_t> score, int k);
std::vector<int> assignment_hungarian(std::span<const std::int64_t> score, int k);

}  // namespace dsbm
