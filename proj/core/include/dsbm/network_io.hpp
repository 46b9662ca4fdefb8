#pragma once

#include <iosfwd>
#include <string>

#include "dsbm/network.hpp"

namespace dsbm {

// Plain-text network format:
//
//   dsbm-network v1
//   n 512
//   T 40
//   k 2
//   eta 0.5
//   c 16
//   epsilon 0.3
//   seed 42
//   prior 0.5 0.5            (optional; uniform when absent)
//   edges <count>
//   t u v                    (one per line, sorted by (t, u, v), u < v)
//   labels <count>           (optional section)
//   i t g                    (one per line)
//
// '#' starts a comment that runs to the end of the line.  Reals are written
// with max_digits10 so a save/load round trip is bit exact.
void save_network(const DynamicNetwork& net, std::ostream& out);
void save_network(const DynamicNetwork& net, const std::string& path);

DynamicNetwork load_network(std::istream& in);
DynamicNetwork load_network(const std::string& path);

// Standalone label file: "i t g" per line, same comment rules.
void save_labels(const LabelTrajectory& traj, const std::string& path);
LabelTrajectory load_labels(const std::string& path, int n, int T, int k);

}  // namespace dsbm
