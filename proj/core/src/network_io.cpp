#include "dsbm/network_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dsbm {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::runtime_error("network file: " + what);
}

// token stream that strips '#' comments
struct Tokens {
  std::istream& in;

  bool next(std::string& tok) {
    while (in >> tok) {
      if (tok[0] == '#') {
        in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
        continue;
      }
      return true;
    }
    return false;
  }

  std::string expect(const char* what) {
    std::string tok;
    if (!next(tok)) fail(std::string("unexpected end of file, wanted ") + what);
    return tok;
  }

  long long expect_int(const char* what) {
    const std::string tok = expect(what);
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(tok, &used);
    } catch (const std::exception&) {
      fail(std::string("expected integer for ") + what + ", got '" + tok + "'");
    }
    if (used != tok.size()) fail(std::string("expected integer for ") + what + ", got '" + tok + "'");
    return v;
  }

  unsigned long long expect_uint(const char* what) {
    const std::string tok = expect(what);
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(tok, &used);
    } catch (const std::exception&) {
      fail(std::string("expected unsigned integer for ") + what + ", got '" + tok + "'");
    }
    if (used != tok.size())
      fail(std::string("expected unsigned integer for ") + what + ", got '" + tok + "'");
    return v;
  }

  double expect_real(const char* what) {
    const std::string tok = expect(what);
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      fail(std::string("expected real for ") + what + ", got '" + tok + "'");
    }
    if (used != tok.size()) fail(std::string("expected real for ") + what + ", got '" + tok + "'");
    return v;
  }
};

}  // namespace

void save_network(const DynamicNetwork& net, std::ostream& out) {
  const ModelParams& p = net.params;
  out.precision(std::numeric_limits<double>::max_digits10);
  out << "dsbm-network v1\n";
  out << "n " << p.n << "\n";
  out << "T " << p.T << "\n";
  out << "k " << p.k << "\n";
  out << "eta " << p.eta << "\n";
  out << "c " << p.c << "\n";
  out << "epsilon " << p.epsilon << "\n";
  out << "seed " << net.seed << "\n";
  if (!p.uniform_prior()) {
    out << "prior";
    for (int r = 0; r < p.k; ++r) out << ' ' << p.prior_of(r);
    out << "\n";
  }
  out << "edges " << net.total_edges() << "\n";
  for (int t = 0; t < p.T; ++t)
    for (const auto& [u, v] : net.snapshots[t]) out << t << ' ' << u << ' ' << v << "\n";
  if (net.trajectory) {
    const LabelTrajectory& traj = *net.trajectory;
    out << "labels " << static_cast<std::int64_t>(traj.labels.size()) << "\n";
    for (int t = 0; t < traj.T; ++t)
      for (int i = 0; i < traj.n; ++i) out << i << ' ' << t << ' ' << traj.at(i, t) << "\n";
  }
  if (!out) fail("write failed");
}

void save_network(const DynamicNetwork& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot open '" + path + "' for writing");
  save_network(net, out);
}

DynamicNetwork load_network(std::istream& in) {
  Tokens tok{in};
  if (tok.expect("magic") != "dsbm-network" || tok.expect("version") != "v1")
    fail("bad magic, expected 'dsbm-network v1'");

  DynamicNetwork net;
  ModelParams p;
  bool have_n = false, have_T = false, have_k = false, have_eta = false, have_c = false,
       have_eps = false, have_seed = false;

  std::string key = tok.expect("header key");
  while (key != "edges") {
    if (key == "n") {
      p.n = static_cast<int>(tok.expect_int("n"));
      have_n = true;
    } else if (key == "T") {
      p.T = static_cast<int>(tok.expect_int("T"));
      have_T = true;
    } else if (key == "k") {
      p.k = static_cast<int>(tok.expect_int("k"));
      have_k = true;
    } else if (key == "eta") {
      p.eta = tok.expect_real("eta");
      have_eta = true;
    } else if (key == "c") {
      p.c = tok.expect_real("c");
      have_c = true;
    } else if (key == "epsilon") {
      p.epsilon = tok.expect_real("epsilon");
      have_eps = true;
    } else if (key == "seed") {
      net.seed = tok.expect_uint("seed");
      have_seed = true;
    } else if (key == "prior") {
      if (!have_k) fail("prior must come after k");
      p.prior.resize(p.k);
      for (int r = 0; r < p.k; ++r) p.prior[r] = tok.expect_real("prior entry");
    } else {
      fail("unknown header key '" + key + "'");
    }
    key = tok.expect("header key");
  }
  if (!(have_n && have_T && have_k && have_eta && have_c && have_eps && have_seed))
    fail("missing header fields (need n, T, k, eta, c, epsilon, seed)");

  try {
    p.validate();
  } catch (const std::exception& e) {
    fail(std::string("invalid parameters: ") + e.what());
  }
  net.params = p;
  net.snapshots.resize(p.T);

  const long long edge_count = tok.expect_int("edge count");
  if (edge_count < 0) fail("negative edge count");
  long long last_t = -1;
  Edge last_edge(-1, -1);
  for (long long e = 0; e < edge_count; ++e) {
    const long long t = tok.expect_int("edge snapshot");
    const long long u = tok.expect_int("edge endpoint");
    const long long v = tok.expect_int("edge endpoint");
    if (t < 0 || t >= p.T) fail("edge snapshot out of range");
    if (u < 0 || v < 0 || u >= p.n || v >= p.n) fail("edge endpoint out of range");
    if (u == v) fail("self loop");
    if (u > v) fail("edge endpoints must satisfy u < v");
    const Edge edge(static_cast<std::int32_t>(u), static_cast<std::int32_t>(v));
    if (t < last_t || (t == last_t && !(last_edge < edge)))
      fail("edges must be sorted by (t, u, v)");
    last_t = t;
    last_edge = edge;
    net.snapshots[t].push_back(edge);
  }

  std::string section;
  if (tok.next(section)) {
    if (section != "labels") fail("unexpected trailing section '" + section + "'");
    const long long label_count = tok.expect_int("label count");
    if (label_count != static_cast<long long>(p.n) * p.T)
      fail("label count must equal n*T");
    LabelTrajectory traj;
    traj.n = p.n;
    traj.T = p.T;
    traj.labels.assign(static_cast<std::size_t>(p.n) * p.T, -1);
    for (long long r = 0; r < label_count; ++r) {
      const long long i = tok.expect_int("label node");
      const long long t = tok.expect_int("label snapshot");
      const long long g = tok.expect_int("label group");
      if (i < 0 || i >= p.n || t < 0 || t >= p.T) fail("label index out of range");
      if (g < 0 || g >= p.k) fail("label group out of range");
      traj.at(static_cast<int>(i), static_cast<int>(t)) = static_cast<std::int32_t>(g);
    }
    for (std::int32_t g : traj.labels)
      if (g < 0) fail("labels section leaves some (i, t) unset");
    net.trajectory = std::move(traj);
    if (tok.next(section)) fail("unexpected trailing token '" + section + "'");
  }
  return net;
}

DynamicNetwork load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path + "'");
  return load_network(in);
}

void save_labels(const LabelTrajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot open '" + path + "' for writing");
  for (int t = 0; t < traj.T; ++t)
    for (int i = 0; i < traj.n; ++i) out << i << ' ' << t << ' ' << traj.at(i, t) << "\n";
  if (!out) fail("write failed");
}

LabelTrajectory load_labels(const std::string& path, int n, int T, int k) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path + "'");
  Tokens tok{in};
  LabelTrajectory traj;
  traj.n = n;
  traj.T = T;
  traj.labels.assign(static_cast<std::size_t>(n) * T, -1);
  std::string first;
  while (tok.next(first)) {
    std::size_t used = 0;
    long long i = 0;
    try {
      i = std::stoll(first, &used);
    } catch (const std::exception&) {
      fail("expected node index, got '" + first + "'");
    }
    if (used != first.size()) fail("expected node index, got '" + first + "'");
    const long long t = tok.expect_int("label snapshot");
    const long long g = tok.expect_int("label group");
    if (i < 0 || i >= n || t < 0 || t >= T) fail("label index out of range");
    if (g < 0 || g >= k) fail("label group out of range");
    traj.at(static_cast<int>(i), static_cast<int>(t)) = static_cast<std::int32_t>(g);
  }
  for (std::int32_t g : traj.labels)
    if (g < 0) fail("label file leaves some (i, t) unset");
  return traj;
}

}  // namespace dsbm
