#ifndef BKT_EM_HPP
#define BKT_EM_HPP

#include <cstdint>
#include <vector>

#include "bkt/data.hpp"
#include "bkt/model_core.hpp"

namespace bkt {

struct EmOptions {
  std::size_t max_iterations = 200;
  double tolerance = 1e-6;   // absolute change in total log-likelihood
  std::size_t restarts = 4;  // additional random starts
  std::uint64_t seed = 0;
  /// Lower projection bound for guess and slip.
  double epsilon = 1e-6;
};

struct EmResult {
  BktParams params;
  double log_lik = 0.0;
  std::vector<double> trace;  // log-likelihood before each M-step, plus the final value
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t best_restart = 0;
};

/// Baum-Welch over every sequence of one KC, run from `restarts + 1`
/// uniform random starts; the run with the highest final log-likelihood wins.
EmResult fit_em(const KcSequences& data, const EmOptions& options, const FixedMask& fixed = {});

/// One Baum-Welch run from a given start.
EmResult run_em(const KcSequences& data, const BktParams& start, const EmOptions& options,
                const FixedMask& fixed = {});

}  // namespace bkt

#endif  // BKT_EM_HPP
