#include "dsbm/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dsbm/philox.hpp"

namespace dsbm {

namespace {

// stream ids: labels use 0, snapshot t's edges use 1 + t
constexpr std::uint64_t kLabelStream = 0;

int draw_from_prior(const ModelParams& p, Philox& rng) {
  if (p.uniform_prior()) return static_cast<int>(rng.uniform_below(p.k));
  double u = rng.uniform01();
  double acc = 0;
  for (int r = 0; r < p.k; ++r) {
    acc += p.prior_of(r);
    if (u < acc) return r;
  }
  return p.k - 1;
}

// geometric number of skipped Bernoulli(p) failures before the next success
double skip_length(double p, Philox& rng) {
  if (p >= 1.0) return 0.0;
  const double u = rng.uniform01_open();
  return std::floor(std::log(u) / std::log1p(-p));
}

// colex pair decoding: index L over unordered pairs {a < b} with b minimal
// first, i.e. L = C(b,2) + a
std::pair<std::int64_t, std::int64_t> decode_pair(std::int64_t L) {
  auto choose2 = [](std::int64_t b) { return b * (b - 1) / 2; };
  std::int64_t b = static_cast<std::int64_t>((1.0 + std::sqrt(1.0 + 8.0 * static_cast<double>(L))) / 2.0);
  while (choose2(b + 1) <= L) ++b;
  while (b > 0 && choose2(b) > L) --b;
  return {L - choose2(b), b};
}

// All successes of a Bernoulli(p) process over {0,...,universe-1}.
template <typename Emit>
void enumerate_hits(std::int64_t universe, double p, Philox& rng, Emit&& emit) {
  if (p <= 0.0 || universe <= 0) return;
  std::int64_t idx = -1;
  for (;;) {
    const double skip = skip_length(p, rng);
    if (skip >= static_cast<double>(universe)) return;  // also guards int64 overflow
    idx += 1 + static_cast<std::int64_t>(skip);
    if (idx >= universe) return;
    emit(idx);
  }
}

}  // namespace

LabelTrajectory sample_label_trajectories(const ModelParams& params, std::uint64_t seed) {
  params.validate();
  LabelTrajectory traj;
  traj.n = params.n;
  traj.T = params.T;
  traj.labels.resize(static_cast<std::size_t>(params.n) * params.T);
  Philox rng(seed, kLabelStream);
  for (int i = 0; i < params.n; ++i) traj.at(i, 0) = draw_from_prior(params, rng);
  for (int t = 1; t < params.T; ++t) {
    for (int i = 0; i < params.n; ++i) {
      const bool keep = rng.uniform01() < params.eta;
      traj.at(i, t) = keep ? traj.at(i, t - 1) : draw_from_prior(params, rng);
    }
  }
  return traj;
}

DynamicNetwork sample_edges(const LabelTrajectory& traj, const ModelParams& params,
                            std::uint64_t seed) {
  params.validate();
  if (traj.n != params.n || traj.T != params.T)
    throw std::invalid_argument("sample_edges: trajectory shape does not match params");
  for (int r = 0; r < params.k; ++r)
    for (int s = r; s < params.k; ++s)
      if (params.edge_prob(r, s) > 1.0)
        throw std::invalid_argument("sample_edges: edge probability above 1");

  DynamicNetwork net;
  net.params = params;
  net.seed = seed;
  net.snapshots.resize(params.T);

  std::vector<std::vector<std::int32_t>> buckets(params.k);
  for (int t = 0; t < params.T; ++t) {
    Philox rng(seed, 1 + static_cast<std::uint64_t>(t));
    for (auto& b : buckets) b.clear();
    for (int i = 0; i < params.n; ++i) buckets[traj.at(i, t)].push_back(i);

    auto& edges = net.snapshots[t];
    for (int r = 0; r < params.k; ++r) {
      const auto& br = buckets[r];
      const std::int64_t mr = static_cast<std::int64_t>(br.size());
      // within-group pairs
      enumerate_hits(mr * (mr - 1) / 2, params.edge_prob(r, r), rng, [&](std::int64_t L) {
        const auto [a, b] = decode_pair(L);
        edges.emplace_back(br[a], br[b]);
      });
      // cross-group pairs, r < s
      for (int s = r + 1; s < params.k; ++s) {
        const auto& bs = buckets[s];
        const std::int64_t ms = static_cast<std::int64_t>(bs.size());
        enumerate_hits(mr * ms, params.edge_prob(r, s), rng, [&](std::int64_t L) {
          const std::int32_t u = br[L / ms];
          const std::int32_t v = bs[L % ms];
          edges.emplace_back(std::min(u, v), std::max(u, v));
        });
      }
    }
    std::sort(edges.begin(), edges.end());
  }

  net.trajectory = traj;
  return net;
}

DynamicNetwork generate_network(const ModelParams& params, std::uint64_t seed) {
  return sample_edges(sample_label_trajectories(params, seed), params, seed);
}

SpatioTemporalGraph build_spatiotemporal_graph(const DynamicNetwork& net) {
  const int n = net.params.n;
  const int T = net.params.T;
  if (static_cast<int>(net.snapshots.size()) != T)
    throw std::invalid_argument("build_spatiotemporal_graph: snapshot count != T");

  SpatioTemporalGraph g;
  g.n = n;
  g.T = T;
  g.offsets.assign(static_cast<std::size_t>(n) * T + 1, 0);

  for (int t = 0; t < T; ++t) {
    for (const auto& [u, v] : net.snapshots[t]) {
      if (u < 0 || v < 0 || u >= n || v >= n || u == v)
        throw std::invalid_argument("build_spatiotemporal_graph: bad edge endpoint");
      ++g.offsets[g.vertex(u, t) + 1];
      ++g.offsets[g.vertex(v, t) + 1];
    }
  }
  for (std::size_t v = 1; v < g.offsets.size(); ++v) g.offsets[v] += g.offsets[v - 1];

  g.neighbors.resize(g.offsets.back());
  g.reverse_edge.resize(g.offsets.back());
  std::vector<std::int32_t> cursor(g.offsets.begin(), g.offsets.end() - 1);
  for (int t = 0; t < T; ++t) {
    for (const auto& [u, v] : net.snapshots[t]) {
      const std::int32_t eu = cursor[g.vertex(u, t)]++;
      const std::int32_t ev = cursor[g.vertex(v, t)]++;
      g.neighbors[eu] = v;
      g.neighbors[ev] = u;
      g.reverse_edge[eu] = ev;
      g.reverse_edge[ev] = eu;
    }
  }
  return g;
}

}  // namespace dsbm
