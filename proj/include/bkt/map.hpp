#ifndef BKT_MAP_HPP
#define BKT_MAP_HPP

#include <cstdint>
#include <vector>

#include "bkt/model.hpp"

namespace bkt {

struct MapOptions {
  std::size_t max_iterations = 500;
  double gradient_tolerance = 1e-6;  // infinity norm
  std::size_t restarts = 4;
  std::uint64_t seed = 0;
  std::size_t history = 7;  // L-BFGS memory
};

struct OptimizeResult {
  std::vector<double> point;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// L-BFGS ascent of `target` from one start.
OptimizeResult maximize_lbfgs(const Target& target, std::vector<double> start,
                              const MapOptions& options);

struct MapResult {
  std::vector<double> point;  // unconstrained
  double objective = 0.0;
  bool converged = false;
  std::size_t best_restart = 0;
  std::vector<double> restart_objectives;
};

/// Best of `restarts` L-BFGS runs from Uniform(-2, 2) starts. Throws
/// FitError when no start has a finite objective.
MapResult fit_map(const Target& target, const MapOptions& options);

}  // namespace bkt

#endif  // BKT_MAP_HPP
