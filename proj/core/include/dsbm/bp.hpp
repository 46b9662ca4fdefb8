#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dsbm/model.hpp"
#include "dsbm/network.hpp"
#include "dsbm/philox.hpp"

namespace dsbm {

struct BpOptions {
  int max_iters = 1000;
  double tol = 1e-6;          // convergence threshold on the max message change
  double init_noise = 0.1;    // multiplicative perturbation around uniform
  double damping = 0.0;       // 0 = plain updates
  bool exact_nonedges = false;  // keep messages on every same-snapshot pair (O(n^2 T), oracle use)
};

// Message storage.  Spatial messages live on directed CSR slots of the
// spatiotemporal graph: entry e in vertex v's range holds mu^{v -> neighbors[e]}.
// Temporal messages are stored pre-lift (the sending node's belief with the
// receiving factor removed); they pass through the persistence channel on
// consumption.  fwd(i,t) is the message (i,t) -> (i,t+1), bwd(i,t) the message
// (i,t+1) -> (i,t), both defined for t in [0, T-2].  In exact mode spatial
// messages instead live on all ordered same-snapshot pairs,
// dense[((t*n + dst)*n + src)*k + r].
struct MessageState {
  int n = 0, T = 0, k = 0;
  std::vector<double> spatial;
  std::vector<double> dense;
  std::vector<double> fwd, bwd;
  std::vector<double> marginals;  // (t*n + i)*k + r
  std::vector<double> fields;     // t*k + r

  std::size_t fwd_index(int i, int t) const {
    return (static_cast<std::size_t>(t) * n + i) * k;
  }
};

struct BpResult {
  std::vector<double> marginals;
  std::vector<std::int32_t> partition;  // argmax marginals, ties to the smallest group
  bool converged = false;
  int iterations = 0;
  double final_delta = 0;
};

// Persistence channel applied to a normalized message:
//   out_r = eta * mu_r + (1 - eta) * sum_u mu_u * prior_u.
void temporal_lift(std::span<const double> mu, double eta, std::span<const double> prior,
                   std::span<double> out);

// Adaptive external field from current marginals:
//   h_r(t) = (1/n) * sum_s c_rs * sum_i mu^i_s(t), returned as a T x k array.
std::vector<double> compute_external_field(std::span<const double> marginals,
                                           const ModelParams& params);

// Sum-product engine on the spatiotemporal graph with the sparse-graph
// external-field approximation for non-edges (or exact non-edge messages when
// options.exact_nonedges is set).  One sweep visits every node-time once in a
// fresh random order and rewrites all of its outgoing messages in place.
class BpEngine {
public:
  BpEngine(const SpatioTemporalGraph& graph, const ModelParams& params, BpOptions options);

  // uniform messages with +/- init_noise multiplicative jitter, marginals and
  // fields refreshed to match
  void init_messages(std::uint64_t seed);
  void set_uniform_messages();

  // asynchronous sweep over a random permutation of node-times; updates
  // marginals opportunistically; returns the max absolute message change
  double sweep();
  // Jacobi-style sweep: every new message is computed from the pre-sweep
  // state; fields and marginals are left untouched (used to study the
  // linearization around a fixed point)
  double sweep_synchronous();

  void refresh_fields();
  void refresh_marginals();

  // full schedule: init, then sweeps with a field refresh before each one,
  // until the message change drops below tol or max_iters is hit
  BpResult run(std::uint64_t seed);

  MessageState& state() { return st_; }
  const MessageState& state() const { return st_; }
  const ModelParams& params() const { return params_; }

private:
  void node_update(int v, bool write_messages, bool update_marginal, double* delta);
  void node_update_exact(int v, bool write_messages, bool update_marginal, double* delta);
  void gather_lifts(int i, int t, double* lift_past, double* lift_future) const;
  void base_term(int t, double* out) const;

  const SpatioTemporalGraph& graph_;
  ModelParams params_;
  BpOptions opt_;
  MessageState st_;
  const MessageState* in_;  // message source; &st_ except inside sweep_synchronous
  std::vector<double> prior_;
  double c_in_ = 0, c_out_ = 0;
  Philox rng_;
  std::vector<std::int32_t> perm_;
  std::vector<double> fac_, pre_, suf_, scratch_, val_;
};

// Hard decision from marginals: argmax per node-time, ties broken toward the
// smallest group index.
std::vector<std::int32_t> marginalize_partition(std::span<const double> marginals, int k);

// Chain-consistency gauge fix.  BP on a chain of weakly coupled snapshots has
// metastable fixed points where whole snapshots carry the labeling under a
// permuted gauge (domain walls); for any eta > 0 the persistence channel makes
// consecutive snapshots agree on more than a 1/k fraction of nodes, so the
// repair picks per-snapshot label permutations maximizing total
// consecutive-snapshot agreement (dynamic program over S_k along the chain,
// snapshot 0 pinned to the identity) and applies them to the labels and, when
// given, the matching marginals.  A labeling that is already chain-consistent
// is left untouched.  Skipped for k > 6 (k! states).
void align_snapshot_gauge(std::vector<std::int32_t>& labels, std::vector<double>& marginals,
                          int n, int T, int k);

BpResult run_bp(const SpatioTemporalGraph& graph, const ModelParams& params,
                const BpOptions& options, std::uint64_t seed);

}  // namespace dsbm
