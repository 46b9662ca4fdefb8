// Command-line front end: generate instances, sweep parameter grids, dump
// operator spectra, and score inferred labels against ground truth.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "dsbm/metrics.hpp"
#include "dsbm/model.hpp"
#include "dsbm/network.hpp"
#include "dsbm/network_io.hpp"
#include "dsbm/sweep.hpp"

namespace {

struct GridFlags {
  std::string config_path;
  std::vector<double> epsilons;
  std::vector<double> etas;
  dsbm::RunConfig cfg;
  std::string algorithm;
};

void add_grid_options(CLI::App* cmd, GridFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file (flags override its values)");
  cmd->add_option("--n", f.cfg.n, "nodes per snapshot");
  cmd->add_option("--T", f.cfg.T, "snapshots");
  cmd->add_option("--k", f.cfg.k, "groups");
  cmd->add_option("--c", f.cfg.c, "mean degree");
  cmd->add_option("--epsilons", f.epsilons, "epsilon grid values")->delimiter(',');
  cmd->add_option("--etas", f.etas, "eta grid values")->delimiter(',');
  cmd->add_option("--replicates", f.cfg.replicates, "replicates per grid cell");
  cmd->add_option("--algorithm", f.algorithm, "bp, spectral, or both");
  cmd->add_option("--base-seed", f.cfg.base_seed, "base seed for the replicate seed derivation");
  cmd->add_option("--out-dir", f.cfg.output_dir, "output directory");
  cmd->add_option("--workers", f.cfg.workers, "worker threads (0 = $DSBM_WORKERS or hardware)");
  cmd->add_option("--bp-max-iters", f.cfg.bp.max_iters, "BP sweep cap");
  cmd->add_option("--bp-tol", f.cfg.bp.tol, "BP convergence tolerance");
  cmd->add_option("--bp-damping", f.cfg.bp.damping, "BP damping factor");
  cmd->add_option("--dense-limit", f.cfg.dense_limit, "dense spectrum size cap");
}

dsbm::RunConfig resolve_grid(const GridFlags& f, const CLI::App* cmd) {
  dsbm::RunConfig cfg = f.cfg;
  if (!f.config_path.empty()) {
    dsbm::RunConfig file_cfg = dsbm::load_run_config(f.config_path);
    // explicit flags win over the file
    auto keep = [&](const char* flag) { return cmd->count(flag) > 0; };
    if (!keep("--n")) cfg.n = file_cfg.n;
    if (!keep("--T")) cfg.T = file_cfg.T;
    if (!keep("--k")) cfg.k = file_cfg.k;
    if (!keep("--c")) cfg.c = file_cfg.c;
    if (!keep("--replicates")) cfg.replicates = file_cfg.replicates;
    if (!keep("--base-seed")) cfg.base_seed = file_cfg.base_seed;
    if (!keep("--out-dir")) cfg.output_dir = file_cfg.output_dir;
    if (!keep("--workers")) cfg.workers = file_cfg.workers;
    if (!keep("--bp-max-iters")) cfg.bp.max_iters = file_cfg.bp.max_iters;
    if (!keep("--bp-tol")) cfg.bp.tol = file_cfg.bp.tol;
    if (!keep("--bp-damping")) cfg.bp.damping = file_cfg.bp.damping;
    if (!keep("--dense-limit")) cfg.dense_limit = file_cfg.dense_limit;
    cfg.prior = file_cfg.prior;
    cfg.bp.init_noise = file_cfg.bp.init_noise;
    cfg.eigs = file_cfg.eigs;
    if (!keep("--algorithm")) cfg.algorithm = file_cfg.algorithm;
    if (!keep("--epsilons")) cfg.epsilon_grid = file_cfg.epsilon_grid;
    if (!keep("--etas")) cfg.eta_grid = file_cfg.eta_grid;
  }
  if (cmd->count("--epsilons") > 0) cfg.epsilon_grid = f.epsilons;
  if (cmd->count("--etas") > 0) cfg.eta_grid = f.etas;
  if (cmd->count("--algorithm") > 0) cfg.algorithm = dsbm::algorithm_from_string(f.algorithm);
  return cfg;
}

int cmd_generate(int n, int T, int k, double eta, double c, double epsilon,
                 std::uint64_t seed, const std::string& out, bool with_labels) {
  const dsbm::ModelParams params = dsbm::ModelParams::make(n, T, k, eta, c, epsilon);
  dsbm::DynamicNetwork net = dsbm::generate_network(params, seed);
  if (!with_labels) net.trajectory.reset();
  dsbm::save_network(net, out);
  std::cout << "wrote " << out << " (" << net.total_edges() << " edges)\n";
  return 0;
}

int cmd_score(const std::string& network_path, const std::string& labels_path) {
  const dsbm::DynamicNetwork net = dsbm::load_network(network_path);
  if (!net.trajectory)
    throw std::runtime_error("score: network file has no labels section to score against");
  const dsbm::ModelParams& p = net.params;
  const dsbm::LabelTrajectory inferred = dsbm::load_labels(labels_path, p.n, p.T, p.k);
  const dsbm::OverlapReport rep =
      dsbm::overlap_score(net.trajectory->labels, inferred.labels, p.k);
  const auto per_t =
      dsbm::overlap_per_snapshot(net.trajectory->labels, inferred.labels, p.k, p.n, p.T);
  nlohmann::json j{{"overlap", rep.overlap},
                   {"raw_agreement", rep.raw_agreement},
                   {"permutation", rep.permutation},
                   {"per_snapshot", per_t}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic stochastic block model benchmark"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "sample an instance and write a network file");
  int g_n = 512, g_T = 40, g_k = 2;
  double g_eta = 0.5, g_c = 16, g_eps = 0.3;
  std::uint64_t g_seed = 1;
  std::string g_out = "network.dsbm";
  bool g_nolabels = false;
  gen->add_option("--n", g_n, "nodes per snapshot");
  gen->add_option("--T", g_T, "snapshots");
  gen->add_option("--k", g_k, "groups");
  gen->add_option("--eta", g_eta, "label persistence");
  gen->add_option("--c", g_c, "mean degree");
  gen->add_option("--epsilon", g_eps, "affinity ratio c_out/c_in");
  gen->add_option("--seed", g_seed, "seed");
  gen->add_option("--out", g_out, "output path");
  gen->add_flag("--no-labels", g_nolabels, "omit the ground-truth labels section");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "overlap vs (epsilon, eta) grid, CSV/JSON outputs");
  GridFlags sf;
  add_grid_options(sweep, sf);

  // heatmap
  auto* heat = app.add_subcommand("heatmap", "grid sweep plus per-algorithm overlap matrices");
  GridFlags hf;
  add_grid_options(heat, hf);

  // spectrum
  auto* spec = app.add_subcommand("spectrum", "dense spectrum of one instance's operator");
  GridFlags pf;
  double p_eps = 0.05, p_eta = 0.5;
  add_grid_options(spec, pf);
  spec->add_option("--epsilon", p_eps, "instance epsilon");
  spec->add_option("--eta", p_eta, "instance eta");

  // score
  auto* score = app.add_subcommand("score", "overlap of inferred labels against a network file");
  std::string s_net, s_labels;
  score->add_option("--network", s_net, "network file with a labels section")->required();
  score->add_option("--labels", s_labels, "inferred labels, 'i t g' per line")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_generate(g_n, g_T, g_k, g_eta, g_c, g_eps, g_seed, g_out, !g_nolabels);
    if (sweep->parsed()) {
      dsbm::RunConfig cfg = resolve_grid(sf, sweep);
      const dsbm::SweepResult res = dsbm::run_sweep(cfg);
      std::cout << "sweep: " << res.rows.size() << " rows";
      if (!cfg.output_dir.empty()) std::cout << " -> " << cfg.output_dir;
      std::cout << "\n";
      for (const auto& e : res.eta_summaries) {
        std::cout << "eta=" << e.eta << " epsilon_c=" << e.epsilon_critical;
        if (e.always_undetectable) std::cout << " (undetectable for all epsilon)";
        if (e.transition_found) std::cout << " empirical=" << e.transition_epsilon;
        std::cout << "\n";
      }
      return 0;
    }
    if (heat->parsed()) {
      dsbm::RunConfig cfg = resolve_grid(hf, heat);
      const dsbm::HeatmapResult res = dsbm::run_heatmap(cfg);
      std::cout << "heatmap: " << res.sweep.rows.size() << " rows";
      if (!cfg.output_dir.empty()) std::cout << " -> " << cfg.output_dir;
      std::cout << "\n";
      return 0;
    }
    if (spec->parsed()) {
      dsbm::RunConfig cfg = resolve_grid(pf, spec);
      if (spec->count("--epsilon") || cfg.epsilon_grid.empty()) cfg.epsilon_grid = {p_eps};
      if (spec->count("--eta") || cfg.eta_grid.empty()) cfg.eta_grid = {p_eta};
      const dsbm::SpectrumDump dump = dsbm::dump_spectrum(cfg);
      std::cout << "spectrum: dim=" << dump.summary.eigenvalues.size()
                << " bulk_radius=" << dump.summary.bulk_radius << " reals_outside=[";
      for (std::size_t i = 0; i < dump.summary.reals_outside_bulk.size(); ++i)
        std::cout << (i ? ", " : "") << dump.summary.reals_outside_bulk[i];
      std::cout << "]\n";
      return 0;
    }
    if (score->parsed()) return cmd_score(s_net, s_labels);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
