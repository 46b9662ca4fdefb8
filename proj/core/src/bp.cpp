#include "dsbm/bp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dsbm {

namespace {

constexpr std::uint64_t kBpStream = 0x62703031;

void normalize_or_throw(double* v, int k) {
  double sum = 0;
  for (int r = 0; r < k; ++r) sum += v[r];
  if (!(sum > 0) || !std::isfinite(sum))
    throw std::runtime_error("BP: message vanished or became non-finite");
  const double inv = 1.0 / sum;
  for (int r = 0; r < k; ++r) v[r] *= inv;
}

// channel applied in the direction of time: sum_u mu_u (eta*delta_ur + (1-eta) q_r)
void lift_forward(const double* mu, double eta, const double* prior, int k, double* out) {
  for (int r = 0; r < k; ++r) out[r] = eta * mu[r] + (1.0 - eta) * prior[r];
}

// channel applied against time: sum_u mu_u (eta*delta_ru + (1-eta) q_u);
// identical to lift_forward under the uniform prior
void lift_backward(const double* mu, double eta, const double* prior, int k, double* out) {
  double dot = 0;
  for (int u = 0; u < k; ++u) dot += mu[u] * prior[u];
  for (int r = 0; r < k; ++r) out[r] = eta * mu[r] + (1.0 - eta) * dot;
}

}  // namespace

void temporal_lift(std::span<const double> mu, double eta, std::span<const double> prior,
                   std::span<double> out) {
  if (mu.size() != prior.size() || mu.size() != out.size())
    throw std::invalid_argument("temporal_lift: size mismatch");
  lift_backward(mu.data(), eta, prior.data(), static_cast<int>(mu.size()), out.data());
}

std::vector<double> compute_external_field(std::span<const double> marginals,
                                           const ModelParams& params) {
  const int n = params.n, T = params.T, k = params.k;
  if (marginals.size() != static_cast<std::size_t>(n) * T * k)
    throw std::invalid_argument("compute_external_field: marginals must be n*T*k");
  const double dc = params.c_in() - params.c_out();
  const double c_out = params.c_out();
  std::vector<double> fields(static_cast<std::size_t>(T) * k, 0.0);
  std::vector<double> mass(k);
  for (int t = 0; t < T; ++t) {
    std::fill(mass.begin(), mass.end(), 0.0);
    const double* base = marginals.data() + static_cast<std::size_t>(t) * n * k;
    for (int i = 0; i < n; ++i)
      for (int r = 0; r < k; ++r) mass[r] += base[static_cast<std::size_t>(i) * k + r];
    double total = 0;
    for (int r = 0; r < k; ++r) total += mass[r];
    for (int r = 0; r < k; ++r)
      fields[static_cast<std::size_t>(t) * k + r] = (dc * mass[r] + c_out * total) / n;
  }
  return fields;
}

BpEngine::BpEngine(const SpatioTemporalGraph& graph, const ModelParams& params, BpOptions options)
    : graph_(graph), params_(params), opt_(options), in_(&st_), rng_(0, kBpStream) {
  params_.validate();
  if (graph.n != params_.n || graph.T != params_.T)
    throw std::invalid_argument("BpEngine: graph and model disagree on (n, T)");
  if (opt_.max_iters < 1) throw std::invalid_argument("BpEngine: max_iters must be >= 1");
  if (!(opt_.tol > 0)) throw std::invalid_argument("BpEngine: tol must be positive");
  if (opt_.init_noise < 0 || opt_.init_noise >= 1)
    throw std::invalid_argument("BpEngine: init_noise must lie in [0, 1)");
  if (opt_.damping < 0 || opt_.damping >= 1)
    throw std::invalid_argument("BpEngine: damping must lie in [0, 1)");

  const int n = params_.n, T = params_.T, k = params_.k;
  st_.n = n;
  st_.T = T;
  st_.k = k;
  prior_.resize(k);
  for (int r = 0; r < k; ++r) prior_[r] = params_.prior_of(r);
  c_in_ = params_.c_in();
  c_out_ = params_.c_out();

  int max_factors;
  if (opt_.exact_nonedges) {
    const double bytes = static_cast<double>(n) * n * T * k * 8.0;
    if (bytes > 2e9)
      throw std::invalid_argument("BpEngine: exact_nonedges state would exceed 2 GB");
    st_.dense.assign(static_cast<std::size_t>(n) * n * T * k, 0.0);
    max_factors = n - 1;
  } else {
    st_.spatial.assign(graph_.neighbors.size() * k, 0.0);
    max_factors = 0;
    for (int v = 0; v < graph_.vertices(); ++v)
      max_factors = std::max(max_factors, graph_.degree(v));
  }
  st_.fwd.assign(static_cast<std::size_t>(n) * (T - 1) * k, 0.0);
  st_.bwd.assign(static_cast<std::size_t>(n) * (T - 1) * k, 0.0);
  st_.marginals.assign(static_cast<std::size_t>(n) * T * k, 0.0);
  st_.fields.assign(static_cast<std::size_t>(T) * k, 0.0);

  perm_.resize(graph_.vertices());
  fac_.resize(static_cast<std::size_t>(std::max(max_factors, 1)) * k);
  pre_.resize(static_cast<std::size_t>(max_factors + 1) * k);
  suf_.resize(static_cast<std::size_t>(max_factors + 1) * k);
  scratch_.resize(static_cast<std::size_t>(4) * k);
  val_.resize(k);
}

void BpEngine::init_messages(std::uint64_t seed) {
  rng_.reseed(seed, kBpStream);
  const int k = st_.k;
  auto fill_noisy = [&](std::vector<double>& arr) {
    for (std::size_t b = 0; b + k <= arr.size(); b += k) {
      for (int r = 0; r < k; ++r)
        arr[b + r] = 1.0 + opt_.init_noise * (2.0 * rng_.uniform01() - 1.0);
      normalize_or_throw(arr.data() + b, k);
    }
  };
  fill_noisy(st_.spatial);
  fill_noisy(st_.dense);
  fill_noisy(st_.fwd);
  fill_noisy(st_.bwd);
  refresh_marginals();
  refresh_fields();
}

void BpEngine::set_uniform_messages() {
  const double q = 1.0 / st_.k;
  std::fill(st_.spatial.begin(), st_.spatial.end(), q);
  std::fill(st_.dense.begin(), st_.dense.end(), q);
  std::fill(st_.fwd.begin(), st_.fwd.end(), q);
  std::fill(st_.bwd.begin(), st_.bwd.end(), q);
  refresh_marginals();
  refresh_fields();
}

void BpEngine::refresh_fields() {
  if (opt_.exact_nonedges) return;  // non-edges are handled exactly, no field term
  st_.fields = compute_external_field(st_.marginals, params_);
}

void BpEngine::gather_lifts(int i, int t, double* lift_past, double* lift_future) const {
  const int k = st_.k;
  if (t > 0)
    lift_forward(in_->fwd.data() + st_.fwd_index(i, t - 1), params_.eta, prior_.data(), k,
                 lift_past);
  else
    std::fill(lift_past, lift_past + k, 1.0);
  if (t < st_.T - 1)
    lift_backward(in_->bwd.data() + st_.fwd_index(i, t), params_.eta, prior_.data(), k,
                  lift_future);
  else
    std::fill(lift_future, lift_future + k, 1.0);
}

void BpEngine::base_term(int t, double* out) const {
  const int k = st_.k;
  // the prior is a t = 0 factor only; later snapshots feel it through the
  // redraw part of the persistence channel
  if (opt_.exact_nonedges) {
    if (t == 0)
      std::copy(prior_.begin(), prior_.end(), out);
    else
      std::fill(out, out + k, 1.0);
    return;
  }
  // shift by the smallest field so exp() cannot underflow; the shift cancels
  // in the final normalization
  const double* h = st_.fields.data() + static_cast<std::size_t>(t) * k;
  double hmin = h[0];
  for (int r = 1; r < k; ++r) hmin = std::min(hmin, h[r]);
  for (int r = 0; r < k; ++r) out[r] = (t == 0 ? prior_[r] : 1.0) * std::exp(-(h[r] - hmin));
}

// Recomputes everything vertex v = (i, t) sends: one message per incident
// spatial edge, the two temporal messages, and optionally its belief.
// Incoming messages are read from *in_ (usually st_ itself).
void BpEngine::node_update(int v, bool write_messages, bool update_marginal, double* delta) {
  const int n = st_.n, k = st_.k;
  const int t = v / n, i = v - t * n;
  const double dc = c_in_ - c_out_;

  const std::int32_t off = graph_.offsets[v];
  const int d = graph_.degree(v);

  double* lift_past = scratch_.data();
  double* lift_future = scratch_.data() + k;
  double* ebase = scratch_.data() + 2 * k;
  double* tmp = scratch_.data() + 3 * k;
  gather_lifts(i, t, lift_past, lift_future);
  base_term(t, ebase);

  for (int jj = 0; jj < d; ++jj) {
    const double* mu =
        in_->spatial.data() + static_cast<std::size_t>(graph_.reverse_edge[off + jj]) * k;
    double* f = fac_.data() + static_cast<std::size_t>(jj) * k;
    for (int r = 0; r < k; ++r) f[r] = c_out_ + dc * mu[r];
  }

  // leave-one-out products via normalized prefix/suffix arrays
  double* pre = pre_.data();
  double* suf = suf_.data();
  std::fill(pre, pre + k, 1.0);
  for (int jj = 0; jj < d; ++jj) {
    const double* f = fac_.data() + static_cast<std::size_t>(jj) * k;
    const double* src = pre + static_cast<std::size_t>(jj) * k;
    double* dst = pre + static_cast<std::size_t>(jj + 1) * k;
    for (int r = 0; r < k; ++r) dst[r] = src[r] * f[r];
    normalize_or_throw(dst, k);
  }
  std::fill(suf + static_cast<std::size_t>(d) * k, suf + static_cast<std::size_t>(d + 1) * k, 1.0);
  for (int jj = d - 1; jj >= 0; --jj) {
    const double* f = fac_.data() + static_cast<std::size_t>(jj) * k;
    const double* src = suf + static_cast<std::size_t>(jj + 1) * k;
    double* dst = suf + static_cast<std::size_t>(jj) * k;
    for (int r = 0; r < k; ++r) dst[r] = src[r] * f[r];
    normalize_or_throw(dst, k);
  }
  const double* full = pre + static_cast<std::size_t>(d) * k;

  auto emit = [&](double* stored, const double* value) {
    for (int r = 0; r < k; ++r) tmp[r] = value[r];
    normalize_or_throw(tmp, k);
    if (opt_.damping > 0) {
      for (int r = 0; r < k; ++r)
        tmp[r] = (1.0 - opt_.damping) * tmp[r] + opt_.damping * stored[r];
      normalize_or_throw(tmp, k);
    }
    if (delta)
      for (int r = 0; r < k; ++r) *delta = std::max(*delta, std::abs(tmp[r] - stored[r]));
    std::copy(tmp, tmp + k, stored);
  };

  double* val = val_.data();
  if (write_messages) {
    for (int jj = 0; jj < d; ++jj) {
      const double* p = pre + static_cast<std::size_t>(jj) * k;
      const double* s = suf + static_cast<std::size_t>(jj + 1) * k;
      for (int r = 0; r < k; ++r)
        val[r] = ebase[r] * lift_past[r] * lift_future[r] * p[r] * s[r];
      emit(st_.spatial.data() + static_cast<std::size_t>(off + jj) * k, val);
    }
    if (t < st_.T - 1) {
      for (int r = 0; r < k; ++r) val[r] = ebase[r] * lift_past[r] * full[r];
      emit(st_.fwd.data() + st_.fwd_index(i, t), val);
    }
    if (t > 0) {
      for (int r = 0; r < k; ++r) val[r] = ebase[r] * lift_future[r] * full[r];
      emit(st_.bwd.data() + st_.fwd_index(i, t - 1), val);
    }
  }

  if (update_marginal) {
    double* marg = st_.marginals.data() + static_cast<std::size_t>(v) * k;
    for (int r = 0; r < k; ++r) marg[r] = ebase[r] * lift_past[r] * lift_future[r] * full[r];
    normalize_or_throw(marg, k);
  }
}

// Same update without the non-edge mean-field shortcut: every ordered
// same-snapshot pair carries a message, non-neighbors contribute the factor
// sum_s (1 - c_rs/n) mu_s.  Quadratic in n; used to validate the fast path.
void BpEngine::node_update_exact(int v, bool write_messages, bool update_marginal,
                                 double* delta) {
  const int n = st_.n, k = st_.k;
  const int t = v / n, i = v - t * n;
  const double dc = c_in_ - c_out_;
  const double p_in = c_in_ / n, p_out = c_out_ / n;
  const double dp = p_in - p_out;

  double* lift_past = scratch_.data();
  double* lift_future = scratch_.data() + k;
  double* ebase = scratch_.data() + 2 * k;
  double* tmp = scratch_.data() + 3 * k;
  gather_lifts(i, t, lift_past, lift_future);
  base_term(t, ebase);

  const std::int32_t off = graph_.offsets[v];
  const int d = graph_.degree(v);
  std::vector<std::int32_t> nbrs(graph_.neighbors.begin() + off,
                                 graph_.neighbors.begin() + off + d);
  std::sort(nbrs.begin(), nbrs.end());

  const double* in_block = in_->dense.data() + (static_cast<std::size_t>(t) * n + i) * n * k;
  int ptr = 0;
  for (int l = 0, pos = 0; l < n; ++l) {
    if (l == i) continue;
    const double* mu = in_block + static_cast<std::size_t>(l) * k;
    double* f = fac_.data() + static_cast<std::size_t>(pos) * k;
    if (ptr < d && nbrs[ptr] == l) {
      for (int r = 0; r < k; ++r) f[r] = c_out_ + dc * mu[r];
      ++ptr;
    } else {
      for (int r = 0; r < k; ++r) f[r] = 1.0 - p_out - dp * mu[r];
    }
    ++pos;
  }

  const int m = n - 1;
  double* pre = pre_.data();
  double* suf = suf_.data();
  std::fill(pre, pre + k, 1.0);
  for (int jj = 0; jj < m; ++jj) {
    const double* f = fac_.data() + static_cast<std::size_t>(jj) * k;
    const double* src = pre + static_cast<std::size_t>(jj) * k;
    double* dst = pre + static_cast<std::size_t>(jj + 1) * k;
    for (int r = 0; r < k; ++r) dst[r] = src[r] * f[r];
    normalize_or_throw(dst, k);
  }
  std::fill(suf + static_cast<std::size_t>(m) * k, suf + static_cast<std::size_t>(m + 1) * k, 1.0);
  for (int jj = m - 1; jj >= 0; --jj) {
    const double* f = fac_.data() + static_cast<std::size_t>(jj) * k;
    const double* src = suf + static_cast<std::size_t>(jj + 1) * k;
    double* dst = suf + static_cast<std::size_t>(jj) * k;
    for (int r = 0; r < k; ++r) dst[r] = src[r] * f[r];
    normalize_or_throw(dst, k);
  }
  const double* full = pre + static_cast<std::size_t>(m) * k;

  auto emit = [&](double* stored, const double* value) {
    for (int r = 0; r < k; ++r) tmp[r] = value[r];
    normalize_or_throw(tmp, k);
    if (opt_.damping > 0) {
      for (int r = 0; r < k; ++r)
        tmp[r] = (1.0 - opt_.damping) * tmp[r] + opt_.damping * stored[r];
      normalize_or_throw(tmp, k);
    }
    if (delta)
      for (int r = 0; r < k; ++r) *delta = std::max(*delta, std::abs(tmp[r] - stored[r]));
    std::copy(tmp, tmp + k, stored);
  };

  double* val = val_.data();
  if (write_messages) {
    for (int l = 0, pos = 0; l < n; ++l) {
      if (l == i) continue;
      const double* p = pre + static_cast<std::size_t>(pos) * k;
      const double* s = suf + static_cast<std::size_t>(pos + 1) * k;
      for (int r = 0; r < k; ++r)
        val[r] = ebase[r] * lift_past[r] * lift_future[r] * p[r] * s[r];
      emit(st_.dense.data() + ((static_cast<std::size_t>(t) * n + l) * n + i) * k, val);
      ++pos;
    }
    if (t < st_.T - 1) {
      for (int r = 0; r < k; ++r) val[r] = ebase[r] * lift_past[r] * full[r];
      emit(st_.fwd.data() + st_.fwd_index(i, t), val);
    }
    if (t > 0) {
      for (int r = 0; r < k; ++r) val[r] = ebase[r] * lift_future[r] * full[r];
      emit(st_.bwd.data() + st_.fwd_index(i, t - 1), val);
    }
  }

  if (update_marginal) {
    double* marg = st_.marginals.data() + static_cast<std::size_t>(v) * k;
    for (int r = 0; r < k; ++r) marg[r] = ebase[r] * lift_past[r] * lift_future[r] * full[r];
    normalize_or_throw(marg, k);
  }
}

double BpEngine::sweep() {
  const int nv = graph_.vertices();
  for (int v = 0; v < nv; ++v) perm_[v] = v;
  for (int j = nv - 1; j > 0; --j)
    std::swap(perm_[j], perm_[rng_.uniform_below(static_cast<std::uint64_t>(j) + 1)]);
  double delta = 0;
  if (opt_.exact_nonedges)
    for (int j = 0; j < nv; ++j) node_update_exact(perm_[j], true, true, &delta);
  else
    for (int j = 0; j < nv; ++j) node_update(perm_[j], true, true, &delta);
  return delta;
}

double BpEngine::sweep_synchronous() {
  const MessageState frozen = st_;
  in_ = &frozen;
  double delta = 0;
  const int nv = graph_.vertices();
  try {
    if (opt_.exact_nonedges)
      for (int v = 0; v < nv; ++v) node_update_exact(v, true, false, &delta);
    else
      for (int v = 0; v < nv; ++v) node_update(v, true, false, &delta);
  } catch (...) {
    in_ = &st_;
    throw;
  }
  in_ = &st_;
  return delta;
}

void BpEngine::refresh_marginals() {
  const int nv = graph_.vertices();
  if (opt_.exact_nonedges)
    for (int v = 0; v < nv; ++v) node_update_exact(v, false, true, nullptr);
  else
    for (int v = 0; v < nv; ++v) node_update(v, false, true, nullptr);
}

BpResult BpEngine::run(std::uint64_t seed) {
  init_messages(seed);
  BpResult res;
  double delta = 0;
  int it = 0;
  bool converged = false;
  while (it < opt_.max_iters) {
    refresh_fields();
    delta = sweep();
    ++it;
    if (delta < opt_.tol) {
      converged = true;
      break;
    }
  }
  refresh_fields();
  refresh_marginals();
  res.marginals = st_.marginals;
  res.partition = marginalize_partition(res.marginals, st_.k);
  res.converged = converged;
  res.iterations = it;
  res.final_delta = delta;
  return res;
}

std::vector<std::int32_t> marginalize_partition(std::span<const double> marginals, int k) {
  if (k < 1 || marginals.size() % k != 0)
    throw std::invalid_argument("marginalize_partition: length must be a multiple of k");
  const std::size_t count = marginals.size() / k;
  std::vector<std::int32_t> part(count);
  for (std::size_t v = 0; v < count; ++v) {
    const double* m = marginals.data() + v * k;
    int best = 0;
    for (int r = 1; r < k; ++r)
      if (m[r] > m[best]) best = r;
    part[v] = best;
  }
  return part;
}

void align_snapshot_gauge(std::vector<std::int32_t>& labels, std::vector<double>& marginals,
                          int n, int T, int k) {
  if (n < 1 || T < 1 || k < 1) throw std::invalid_argument("align_snapshot_gauge: bad shape");
  if (labels.size() != static_cast<std::size_t>(n) * T)
    throw std::invalid_argument("align_snapshot_gauge: labels size must be n*T");
  if (!marginals.empty() && marginals.size() != labels.size() * static_cast<std::size_t>(k))
    throw std::invalid_argument("align_snapshot_gauge: marginals size must be n*T*k");
  for (const std::int32_t g : labels)
    if (g < 0 || g >= k) throw std::invalid_argument("align_snapshot_gauge: label out of range");
  if (T < 2 || k < 2 || k > 6) return;

  std::vector<std::vector<int>> perms;
  std::vector<int> p(k);
  std::iota(p.begin(), p.end(), 0);
  do perms.push_back(p); while (std::next_permutation(p.begin(), p.end()));
  const int np = static_cast<int>(perms.size());
  std::vector<std::vector<int>> inv(np, std::vector<int>(k));
  for (int a = 0; a < np; ++a)
    for (int r = 0; r < k; ++r) inv[a][perms[a][r]] = r;

  // score[t*np + b]: most agreements achievable over snapshots 0..t with
  // gauge b at snapshot t; snapshot 0 is pinned to the identity
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<double> score(static_cast<std::size_t>(T) * np, ninf);
  std::vector<int> parent(static_cast<std::size_t>(T) * np, -1);
  score[0] = 0.0;
  std::vector<std::int64_t> pair_count(static_cast<std::size_t>(k) * k);
  for (int t = 0; t + 1 < T; ++t) {
    std::fill(pair_count.begin(), pair_count.end(), 0);
    for (int i = 0; i < n; ++i)
      ++pair_count[static_cast<std::size_t>(labels[t * n + i]) * k + labels[(t + 1) * n + i]];
    for (int b = 0; b < np; ++b) {
      double best = ninf;
      int arg = -1;
      for (int a = 0; a < np; ++a) {
        const double base = score[static_cast<std::size_t>(t) * np + a];
        if (base == ninf) continue;
        // agreement under (a, b): pi_a(r) == pi_b(s)  <=>  s == inv_b(pi_a(r))
        double agree = 0;
        for (int r = 0; r < k; ++r)
          agree += static_cast<double>(pair_count[static_cast<std::size_t>(r) * k +
                                                  inv[b][perms[a][r]]]);
        if (base + agree > best) {
          best = base + agree;
          arg = a;
        }
      }
      score[static_cast<std::size_t>(t + 1) * np + b] = best;
      parent[static_cast<std::size_t>(t + 1) * np + b] = arg;
    }
  }

  std::vector<int> gauge(T, 0);
  for (int b = 1; b < np; ++b)
    if (score[static_cast<std::size_t>(T - 1) * np + b] >
        score[static_cast<std::size_t>(T - 1) * np + gauge[T - 1]])
      gauge[T - 1] = b;
  for (int t = T - 1; t > 0; --t) gauge[t - 1] = parent[static_cast<std::size_t>(t) * np + gauge[t]];

  std::vector<double> tmp(k);
  for (int t = 0; t < T; ++t) {
    const std::vector<int>& pi = perms[gauge[t]];
    if (gauge[t] == 0) continue;
    for (int i = 0; i < n; ++i) {
      const std::size_t v = static_cast<std::size_t>(t) * n + i;
      labels[v] = static_cast<std::int32_t>(pi[labels[v]]);
      if (marginals.empty()) continue;
      double* m = marginals.data() + v * k;
      for (int r = 0; r < k; ++r) tmp[pi[r]] = m[r];
      std::copy(tmp.begin(), tmp.end(), m);
    }
  }
}

BpResult run_bp(const SpatioTemporalGraph& graph, const ModelParams& params,
                const BpOptions& options, std::uint64_t seed) {
  BpEngine engine(graph, params, options);
  return engine.run(seed);
}

}  // namespace dsbm
