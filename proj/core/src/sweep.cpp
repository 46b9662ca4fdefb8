#include "dsbm/sweep.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "dsbm/metrics.hpp"
#include "dsbm/network.hpp"
#include "dsbm/philox.hpp"

namespace dsbm {

namespace {

using nlohmann::json;

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

ModelParams cell_params(const RunConfig& cfg, double epsilon, double eta) {
  return ModelParams::make(cfg.n, cfg.T, cfg.k, eta, cfg.c, epsilon, cfg.prior);
}

void write_rows_csv(const std::string& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.precision(12);
  out << "eps_idx,eta_idx,epsilon,eta,replicate,seed,algorithm,overlap,converged,iterations,"
         "wall_ms,status\n";
  for (const auto& r : rows) {
    out << r.eps_idx << ',' << r.eta_idx << ',' << r.epsilon << ',' << r.eta << ','
        << r.replicate << ',' << r.seed << ',' << r.algorithm << ',' << r.overlap << ','
        << (r.converged ? 1 : 0) << ',' << r.iterations << ',' << r.wall_ms << ',' << r.status
        << "\n";
  }
}

json cell_to_json(const CellSummary& c) {
  return json{{"algorithm", c.algorithm},
              {"eps_idx", c.eps_idx},
              {"eta_idx", c.eta_idx},
              {"epsilon", c.epsilon},
              {"eta", c.eta},
              {"mean_overlap", c.mean_overlap},
              {"stderr_overlap", c.stderr_overlap},
              {"mean_iterations", c.mean_iterations},
              {"converged_fraction", c.converged_fraction},
              {"rows_ok", c.rows_ok}};
}

json eta_to_json(const EtaSummary& e) {
  return json{{"eta_idx", e.eta_idx},
              {"eta", e.eta},
              {"epsilon_critical", e.epsilon_critical},
              {"always_undetectable", e.always_undetectable},
              {"transition_epsilon", e.transition_epsilon},
              {"transition_found", e.transition_found}};
}

json config_to_json(const RunConfig& cfg) {
  json j{{"n", cfg.n},
         {"T", cfg.T},
         {"k", cfg.k},
         {"c", cfg.c},
         {"epsilon_grid", cfg.epsilon_grid},
         {"eta_grid", cfg.eta_grid},
         {"replicates", cfg.replicates},
         {"algorithm", to_string(cfg.algorithm)},
         {"base_seed", cfg.base_seed},
         {"workers", cfg.workers},
         {"bp", json{{"max_iters", cfg.bp.max_iters},
                     {"tol", cfg.bp.tol},
                     {"init_noise", cfg.bp.init_noise},
                     {"damping", cfg.bp.damping}}},
         {"eigs", json{{"krylov_dim", cfg.eigs.krylov_dim},
                       {"max_restarts", cfg.eigs.max_restarts},
                       {"tol", cfg.eigs.tol},
                       {"dense_cutoff", cfg.eigs.dense_cutoff}}}};
  if (!cfg.prior.empty()) j["prior"] = cfg.prior;
  return j;
}

void write_summary_json(const std::string& path, const RunConfig& cfg, const SweepResult& res) {
  json j;
  j["config"] = config_to_json(cfg);
  j["cells"] = json::array();
  for (const auto& c : res.cells) j["cells"].push_back(cell_to_json(c));
  j["eta_summaries"] = json::array();
  for (const auto& e : res.eta_summaries) j["eta_summaries"].push_back(eta_to_json(e));
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
}

struct CellAccumulator {
  std::vector<double> overlaps;
  double iters = 0;
  int converged = 0;
};

std::vector<CellSummary> summarize_cells(const RunConfig& cfg, const std::vector<ResultRow>& rows,
                                         const std::string& algo) {
  const std::size_t ne = cfg.epsilon_grid.size(), nh = cfg.eta_grid.size();
  std::vector<CellAccumulator> acc(ne * nh);
  for (const auto& r : rows) {
    if (r.algorithm != algo) continue;
    if (r.status != "ok" && r.status != "no_structure") continue;
    auto& a = acc[static_cast<std::size_t>(r.eta_idx) * ne + r.eps_idx];
    a.overlaps.push_back(r.overlap);
    a.iters += r.iterations;
    a.converged += r.converged ? 1 : 0;
  }
  std::vector<CellSummary> cells;
  for (std::size_t ih = 0; ih < nh; ++ih) {
    for (std::size_t ie = 0; ie < ne; ++ie) {
      const auto& a = acc[ih * ne + ie];
      CellSummary c;
      c.algorithm = algo;
      c.eps_idx = static_cast<int>(ie);
      c.eta_idx = static_cast<int>(ih);
      c.epsilon = cfg.epsilon_grid[ie];
      c.eta = cfg.eta_grid[ih];
      c.rows_ok = static_cast<int>(a.overlaps.size());
      if (!a.overlaps.empty()) {
        double mean = 0;
        for (double o : a.overlaps) mean += o;
        mean /= a.overlaps.size();
        double var = 0;
        for (double o : a.overlaps) var += (o - mean) * (o - mean);
        var = a.overlaps.size() > 1 ? var / (a.overlaps.size() - 1) : 0.0;
        c.mean_overlap = mean;
        c.stderr_overlap = std::sqrt(var / a.overlaps.size());
        c.mean_iterations = a.iters / a.overlaps.size();
        c.converged_fraction = static_cast<double>(a.converged) / a.overlaps.size();
      }
      cells.push_back(std::move(c));
    }
  }
  return cells;
}

std::vector<EtaSummary> summarize_etas(const RunConfig& cfg,
                                       const std::vector<CellSummary>& cells) {
  // prefer BP cells for the empirical transition, fall back to spectral
  const std::string algo = cfg.algorithm == Algorithm::spectral ? "spectral" : "bp";
  std::vector<EtaSummary> out;
  for (std::size_t ih = 0; ih < cfg.eta_grid.size(); ++ih) {
    EtaSummary e;
    e.eta_idx = static_cast<int>(ih);
    e.eta = cfg.eta_grid[ih];
    if (cfg.k >= 2) {
      const CriticalEpsilon ce = critical_epsilon(cfg.c, e.eta, cfg.k);
      e.epsilon_critical = ce.value;
      e.always_undetectable = ce.always_undetectable;
    }
    double best = 0;
    bool found = false;
    for (const auto& c : cells) {
      if (c.algorithm != algo || c.eta_idx != static_cast<int>(ih) || c.rows_ok == 0) continue;
      if (c.mean_overlap > 0.05 && (!found || c.epsilon > best)) {
        best = c.epsilon;
        found = true;
      }
    }
    e.transition_epsilon = best;
    e.transition_found = found;
    out.push_back(e);
  }
  return out;
}

// everything produced by one generated instance
struct ItemResult {
  ResultRow bp;
  ResultRow spectral;
  bool has_bp = false;
  bool has_spectral = false;
};

ItemResult run_item(const RunConfig& cfg, int ie, int ih, int rep) {
  const double epsilon = cfg.epsilon_grid[ie];
  const double eta = cfg.eta_grid[ih];
  const std::uint64_t seed = replicate_seed(cfg.base_seed, ie, ih, rep);

  ItemResult item;
  auto fill_common = [&](ResultRow& r, const char* algo) {
    r.eps_idx = ie;
    r.eta_idx = ih;
    r.epsilon = epsilon;
    r.eta = eta;
    r.replicate = rep;
    r.seed = seed;
    r.algorithm = algo;
  };
  fill_common(item.bp, "bp");
  fill_common(item.spectral, "spectral");
  item.has_bp = cfg.algorithm != Algorithm::spectral;
  item.has_spectral = cfg.algorithm != Algorithm::bp;

  DynamicNetwork net;
  SpatioTemporalGraph graph;
  try {
    const ModelParams params = cell_params(cfg, epsilon, eta);
    net = generate_network(params, seed);
    graph = build_spatiotemporal_graph(net);
  } catch (const std::exception& e) {
    const std::string status = std::string("generate: ") + e.what();
    item.bp.status = status;
    item.spectral.status = status;
    item.bp.overlap = item.spectral.overlap = std::numeric_limits<double>::quiet_NaN();
    return item;
  }
  const auto& truth = net.trajectory->labels;

  if (item.has_bp) {
    const double t0 = now_ms();
    try {
      BpResult bp =
          run_bp(graph, net.params, cfg.bp, Philox::splitmix64(seed ^ 0xb9bffa93902cf95eULL));
      // random inits can land in domain-wall fixed points (whole snapshots
      // labeled under a permuted gauge); score the chain-consistent gauge
      align_snapshot_gauge(bp.partition, bp.marginals, cfg.n, cfg.T, cfg.k);
      const OverlapReport rep_overlap = overlap_score(truth, bp.partition, cfg.k);
      item.bp.overlap = rep_overlap.overlap;
      item.bp.converged = bp.converged;
      item.bp.iterations = bp.iterations;
      item.bp.status = "ok";
    } catch (const std::exception& e) {
      item.bp.status = std::string("bp: ") + e.what();
      item.bp.overlap = std::numeric_limits<double>::quiet_NaN();
    }
    item.bp.wall_ms = now_ms() - t0;
  }

  if (item.has_spectral) {
    const double t0 = now_ms();
    try {
      const NonBacktrackingOperator op = build_operator(graph, net.params);
      EigsOptions eigs = cfg.eigs;
      eigs.seed = Philox::splitmix64(seed ^ 0x18f6710c19f812e1ULL);
      eigs.regularize = true;  // suppress the ferromagnetic branch before partitioning
      const std::vector<EigenPair> pairs = leading_real_eigenpairs(op, cfg.k, eigs);
      const SpectralPartition part =
          spectral_partition(op, pairs, cfg.k, Philox::splitmix64(seed ^ 0x7a0c8ab7f1a3c2d4ULL));
      bool conv = !pairs.empty();
      for (const auto& p : pairs) conv = conv && p.converged;
      item.spectral.converged = conv;
      if (part.structure_found) {
        const OverlapReport rep_overlap = overlap_score(truth, part.labels, cfg.k);
        item.spectral.overlap = rep_overlap.overlap;
        item.spectral.status = "ok";
      } else {
        item.spectral.overlap = 0.0;
        item.spectral.status = "no_structure";
      }
    } catch (const std::exception& e) {
      item.spectral.status = std::string("spectral: ") + e.what();
      item.spectral.overlap = std::numeric_limits<double>::quiet_NaN();
    }
    item.spectral.wall_ms = now_ms() - t0;
  }
  return item;
}

SweepResult execute_grid(const RunConfig& cfg) {
  cfg.validate();
  const std::size_t ne = cfg.epsilon_grid.size();
  const std::size_t nh = cfg.eta_grid.size();
  const std::size_t reps = static_cast<std::size_t>(cfg.replicates);
  const std::size_t count = ne * nh * reps;

  std::vector<ItemResult> items(count);
  parallel_for(count, resolve_workers(cfg.workers), [&](std::size_t idx) {
    const int ie = static_cast<int>(idx / (nh * reps));
    const int ih = static_cast<int>((idx / reps) % nh);
    const int rep = static_cast<int>(idx % reps);
    items[idx] = run_item(cfg, ie, ih, rep);
  });

  SweepResult res;
  res.rows.reserve(count * 2);
  for (const auto& item : items) {
    if (item.has_bp) res.rows.push_back(item.bp);
    if (item.has_spectral) res.rows.push_back(item.spectral);
  }
  if (cfg.algorithm != Algorithm::spectral) {
    auto cells = summarize_cells(cfg, res.rows, "bp");
    res.cells.insert(res.cells.end(), cells.begin(), cells.end());
  }
  if (cfg.algorithm != Algorithm::bp) {
    auto cells = summarize_cells(cfg, res.rows, "spectral");
    res.cells.insert(res.cells.end(), cells.begin(), cells.end());
  }
  res.eta_summaries = summarize_etas(cfg, res.cells);
  return res;
}

std::filesystem::path prepare_output_dir(const RunConfig& cfg) {
  std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::bp: return "bp";
    case Algorithm::spectral: return "spectral";
    case Algorithm::both: return "both";
  }
  return "both";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "bp") return Algorithm::bp;
  if (s == "spectral") return Algorithm::spectral;
  if (s == "both") return Algorithm::both;
  throw std::invalid_argument("unknown algorithm '" + s + "' (want bp, spectral, or both)");
}

void RunConfig::validate() const {
  ModelParams::make(n, T, k, 0.0, c, 1.0, prior);  // range-checks n, T, k, c, prior
  if (epsilon_grid.empty()) throw std::invalid_argument("RunConfig: epsilon_grid is empty");
  if (eta_grid.empty()) throw std::invalid_argument("RunConfig: eta_grid is empty");
  for (double e : epsilon_grid)
    if (e < 0 || e > 1) throw std::invalid_argument("RunConfig: epsilon outside [0,1]");
  for (double h : eta_grid)
    if (h < 0 || h > 1) throw std::invalid_argument("RunConfig: eta outside [0,1]");
  if (replicates < 1) throw std::invalid_argument("RunConfig: replicates must be >= 1");
  if (workers < 0) throw std::invalid_argument("RunConfig: workers must be >= 0");
  if (dense_limit < 1) throw std::invalid_argument("RunConfig: dense_limit must be >= 1");
}

std::uint64_t replicate_seed(std::uint64_t base_seed, int eps_idx, int eta_idx, int replicate) {
  std::uint64_t h = Philox::splitmix64(base_seed ^ 0x8f1b5c1e0d2a7b43ULL);
  h = Philox::splitmix64(h ^ (0x100000001b3ULL * (static_cast<std::uint64_t>(eps_idx) + 1)));
  h = Philox::splitmix64(h ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(eta_idx) + 1)));
  h = Philox::splitmix64(h ^ (0xc2b2ae3d27d4eb4fULL * (static_cast<std::uint64_t>(replicate) + 1)));
  return h;
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  workers = std::max(1, std::min<int>(workers, static_cast<int>(count)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DSBM_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

SweepResult run_sweep(const RunConfig& config) {
  SweepResult res = execute_grid(config);
  if (!config.output_dir.empty()) {
    const auto dir = prepare_output_dir(config);
    write_rows_csv((dir / "rows.csv").string(), res.rows);
    write_summary_json((dir / "summary.json").string(), config, res);
  }
  return res;
}

HeatmapResult run_heatmap(const RunConfig& config) {
  HeatmapResult hm;
  hm.sweep = execute_grid(config);
  const std::size_t ne = config.epsilon_grid.size();
  const std::size_t nh = config.eta_grid.size();
  hm.bp_matrix.assign(ne * nh, std::numeric_limits<double>::quiet_NaN());
  hm.spectral_matrix.assign(ne * nh, std::numeric_limits<double>::quiet_NaN());
  for (const auto& c : hm.sweep.cells) {
    const std::size_t at = static_cast<std::size_t>(c.eta_idx) * ne + c.eps_idx;
    if (c.rows_ok == 0) continue;
    (c.algorithm == "bp" ? hm.bp_matrix : hm.spectral_matrix)[at] = c.mean_overlap;
  }

  if (!config.output_dir.empty()) {
    const auto dir = prepare_output_dir(config);
    write_rows_csv((dir / "rows.csv").string(), hm.sweep.rows);
    write_summary_json((dir / "summary.json").string(), config, hm.sweep);

    auto write_matrix = [&](const std::string& name, const std::vector<double>& mat) {
      std::ofstream out((dir / name).string());
      if (!out) throw std::runtime_error("cannot open heatmap matrix file");
      out.precision(12);
      out << "eta\\epsilon";
      for (double e : config.epsilon_grid) out << ',' << e;
      out << "\n";
      for (std::size_t ih = 0; ih < nh; ++ih) {
        out << config.eta_grid[ih];
        for (std::size_t ie = 0; ie < ne; ++ie) out << ',' << mat[ih * ne + ie];
        out << "\n";
      }
    };
    if (config.algorithm != Algorithm::spectral) write_matrix("heatmap_bp.csv", hm.bp_matrix);
    if (config.algorithm != Algorithm::bp) write_matrix("heatmap_spectral.csv", hm.spectral_matrix);

    if (config.k >= 2) {
      std::ofstream out((dir / "threshold_curve.csv").string());
      out.precision(12);
      out << "eta,epsilon_critical,always_undetectable\n";
      for (int s = 0; s <= 100; ++s) {
        const double eta = s / 100.0;
        const CriticalEpsilon ce = critical_epsilon(config.c, eta, config.k);
        out << eta << ',' << ce.value << ',' << (ce.always_undetectable ? 1 : 0) << "\n";
      }
    }
  }
  return hm;
}

SpectrumDump dump_spectrum(const RunConfig& config) {
  config.validate();
  SpectrumDump dump;
  dump.epsilon = config.epsilon_grid.front();
  dump.eta = config.eta_grid.front();
  dump.seed = replicate_seed(config.base_seed, 0, 0, 0);

  const ModelParams params = cell_params(config, dump.epsilon, dump.eta);
  const DynamicNetwork net = generate_network(params, dump.seed);
  const SpatioTemporalGraph graph = build_spatiotemporal_graph(net);
  const NonBacktrackingOperator op = build_operator(graph, params);
  dump.summary = full_spectrum(op, config.dense_limit);

  if (!config.output_dir.empty()) {
    const auto dir = prepare_output_dir(config);
    std::ofstream txt((dir / "spectrum.txt").string());
    if (!txt) throw std::runtime_error("cannot open spectrum.txt for writing");
    txt.precision(12);
    for (const auto& z : dump.summary.eigenvalues) txt << z.real() << ' ' << z.imag() << "\n";

    json j{{"epsilon", dump.epsilon},
           {"eta", dump.eta},
           {"seed", dump.seed},
           {"n", config.n},
           {"T", config.T},
           {"k", config.k},
           {"c", config.c},
           {"dim", 4 * config.n * config.T},
           {"bulk_radius", dump.summary.bulk_radius},
           {"reals_outside_bulk", dump.summary.reals_outside_bulk}};
    std::ofstream js((dir / "spectrum_summary.json").string());
    if (!js) throw std::runtime_error("cannot open spectrum_summary.json for writing");
    js << j.dump(2) << "\n";
  }
  return dump;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config '" + path + "': " + e.what());
  }

  RunConfig cfg;
  auto grid_from = [&](const json& node, const char* what) {
    std::vector<double> grid;
    if (node.is_array()) {
      for (const auto& v : node) grid.push_back(v.get<double>());
    } else if (node.is_object()) {
      const double from = node.at("from").get<double>();
      const double to = node.at("to").get<double>();
      const double step = node.at("step").get<double>();
      if (step <= 0) throw std::runtime_error(std::string(what) + ": step must be positive");
      for (double x = from; x <= to + 1e-12; x += step) grid.push_back(std::min(x, to));
    } else if (node.is_number()) {
      grid.push_back(node.get<double>());
    } else {
      throw std::runtime_error(std::string(what) + ": expected number, array, or range object");
    }
    return grid;
  };

  try {
    if (j.contains("n")) cfg.n = j["n"].get<int>();
    if (j.contains("T")) cfg.T = j["T"].get<int>();
    if (j.contains("k")) cfg.k = j["k"].get<int>();
    if (j.contains("c")) cfg.c = j["c"].get<double>();
    if (j.contains("prior")) cfg.prior = j["prior"].get<std::vector<double>>();
    if (j.contains("epsilon_grid")) cfg.epsilon_grid = grid_from(j["epsilon_grid"], "epsilon_grid");
    if (j.contains("eta_grid")) cfg.eta_grid = grid_from(j["eta_grid"], "eta_grid");
    if (j.contains("replicates")) cfg.replicates = j["replicates"].get<int>();
    if (j.contains("algorithm")) cfg.algorithm = algorithm_from_string(j["algorithm"].get<std::string>());
    if (j.contains("base_seed")) cfg.base_seed = j["base_seed"].get<std::uint64_t>();
    if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
    if (j.contains("dense_limit")) cfg.dense_limit = j["dense_limit"].get<int>();
    if (j.contains("bp")) {
      const json& b = j["bp"];
      if (b.contains("max_iters")) cfg.bp.max_iters = b["max_iters"].get<int>();
      if (b.contains("tol")) cfg.bp.tol = b["tol"].get<double>();
      if (b.contains("init_noise")) cfg.bp.init_noise = b["init_noise"].get<double>();
      if (b.contains("damping")) cfg.bp.damping = b["damping"].get<double>();
    }
    if (j.contains("eigs")) {
      const json& e = j["eigs"];
      if (e.contains("krylov_dim")) cfg.eigs.krylov_dim = e["krylov_dim"].get<int>();
      if (e.contains("max_restarts")) cfg.eigs.max_restarts = e["max_restarts"].get<int>();
      if (e.contains("tol")) cfg.eigs.tol = e["tol"].get<double>();
      if (e.contains("dense_cutoff")) cfg.eigs.dense_cutoff = e["dense_cutoff"].get<int>();
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("config '" + path + "': " + e.what());
  }
  return cfg;
}

}  // namespace dsbm
