#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "dsbm/model.hpp"

namespace dsbm {

// Group assignments for every (node, snapshot) pair, indexed t*n + i.
struct LabelTrajectory {
  int n = 0;
  int T = 0;
  std::vector<std::int32_t> labels;

  std::int32_t at(int i, int t) const { return labels[static_cast<std::size_t>(t) * n + i]; }
  std::int32_t& at(int i, int t) { return labels[static_cast<std::size_t>(t) * n + i]; }
};

using Edge = std::pair<std::int32_t, std::int32_t>;  // u < v within a snapshot

// A sampled instance: per-snapshot edge lists (each sorted, u < v, no
// duplicates, no self loops) plus the ground-truth trajectory when known.
struct DynamicNetwork {
  ModelParams params;
  std::vector<std::vector<Edge>> snapshots;
  std::optional<LabelTrajectory> trajectory;
  std::uint64_t seed = 0;

  std::int64_t total_edges() const {
    std::int64_t m = 0;
    for (const auto& s : snapshots) m += static_cast<std::int64_t>(s.size());
    return m;
  }
};

// Markov label dynamics: g_i(0) ~ prior; afterwards each node keeps its label
// with probability eta, otherwise redraws from the prior.
LabelTrajectory sample_label_trajectories(const ModelParams& params, std::uint64_t seed);

// Draws each snapshot's edges independently with P(edge) = c_{g_u g_v} / n.
// Runs in O(edges) via geometric jumps through each group-pair's pair universe,
// exactly matching the naive per-pair Bernoulli distribution.
DynamicNetwork sample_edges(const LabelTrajectory& traj, const ModelParams& params,
                            std::uint64_t seed);

// Convenience: trajectories + edges from a single seed.
DynamicNetwork generate_network(const ModelParams& params, std::uint64_t seed);

// The T-layer graph BP and the linearized operator run on: spatial adjacency
// per snapshot in CSR form over node-times v = t*n + i, plus implicit temporal
// edges (i,t)-(i,t+1).
struct SpatioTemporalGraph {
  int n = 0;
  int T = 0;
  std::vector<std::int32_t> offsets;       // size n*T + 1
  std::vector<std::int32_t> neighbors;     // same-snapshot neighbor node ids
  std::vector<std::int32_t> reverse_edge;  // CSR slot of the opposite direction

  int vertices() const { return n * T; }
  int vertex(int i, int t) const { return t * n + i; }
  std::int64_t spatial_directed() const { return static_cast<std::int64_t>(neighbors.size()); }
  std::int64_t temporal_undirected() const { return static_cast<std::int64_t>(n) * (T - 1); }
  int degree(int v) const { return offsets[v + 1] - offsets[v]; }
};

SpatioTemporalGraph build_spatiotemporal_graph(const DynamicNetwork& net);

}  // namespace dsbm
