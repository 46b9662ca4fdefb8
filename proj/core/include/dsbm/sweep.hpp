#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dsbm/bp.hpp"
#include "dsbm/model.hpp"
#include "dsbm/nb_spectral.hpp"

namespace dsbm {

enum class Algorithm { bp, spectral, both };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

// One experiment: a (epsilon, eta) grid at fixed (n, T, k, c), several
// replicates per cell, BP and/or the spectral method on the same instances.
struct RunConfig {
  int n = 512;
  int T = 40;
  int k = 2;
  double c = 16.0;
  std::vector<double> prior;  // empty = uniform

  std::vector<double> epsilon_grid;
  std::vector<double> eta_grid;
  int replicates = 10;
  Algorithm algorithm = Algorithm::both;

  BpOptions bp;
  EigsOptions eigs;

  std::uint64_t base_seed = 1;
  std::string output_dir;  // empty: return results without writing files
  int workers = 0;         // 0: $DSBM_WORKERS, then hardware concurrency
  int dense_limit = 8000;  // spectrum dumps only

  void validate() const;
};

// Pure function of the grid coordinates: replicate seeds do not depend on
// scheduling, worker count, or which grid subsets run.
std::uint64_t replicate_seed(std::uint64_t base_seed, int eps_idx, int eta_idx, int replicate);

struct ResultRow {
  int eps_idx = 0;
  int eta_idx = 0;
  double epsilon = 0;
  double eta = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  std::string algorithm;
  double overlap = 0;
  bool converged = false;
  int iterations = 0;  // BP sweeps; 0 for spectral rows
  double wall_ms = 0;
  std::string status;  // "ok", "no_structure", or an error message
};

struct CellSummary {
  std::string algorithm;
  int eps_idx = 0;
  int eta_idx = 0;
  double epsilon = 0;
  double eta = 0;
  double mean_overlap = 0;
  double stderr_overlap = 0;
  double mean_iterations = 0;
  double converged_fraction = 0;
  int rows_ok = 0;
};

struct EtaSummary {
  int eta_idx = 0;
  double eta = 0;
  double epsilon_critical = 0;
  bool always_undetectable = false;
  // largest grid epsilon whose mean overlap exceeds 0.05 (BP when available)
  double transition_epsilon = 0;
  bool transition_found = false;
};

struct SweepResult {
  std::vector<ResultRow> rows;
  std::vector<CellSummary> cells;
  std::vector<EtaSummary> eta_summaries;
};

// Runs the grid; when config.output_dir is set, writes rows.csv and
// summary.json there.  Replicate failures are recorded in their row's status
// and skipped by the summaries; they never abort the run.
SweepResult run_sweep(const RunConfig& config);

struct HeatmapResult {
  SweepResult sweep;
  // mean overlap matrices indexed eta_idx * epsilon_grid.size() + eps_idx
  std::vector<double> bp_matrix;
  std::vector<double> spectral_matrix;
};

// Same grid executor; additionally writes one matrix CSV per algorithm and the
// theoretical detectability boundary (threshold_curve.csv).
HeatmapResult run_heatmap(const RunConfig& config);

struct SpectrumDump {
  double epsilon = 0;
  double eta = 0;
  std::uint64_t seed = 0;
  SpectrumSummary summary;
};

// Full dense spectrum of one instance at (epsilon_grid[0], eta_grid[0]);
// writes spectrum.txt ("re im" per line) and spectrum_summary.json.
SpectrumDump dump_spectrum(const RunConfig& config);

// Reads the JSON schema documented in the README into a RunConfig.
RunConfig load_run_config(const std::string& path);

// Bounded pool running fn(0..count-1); results must be written to
// preassigned slots so output does not depend on the worker count.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

int resolve_workers(int requested);

}  // namespace dsbm
