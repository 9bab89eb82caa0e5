#ifndef BKT_VI_HPP
#define BKT_VI_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "bkt/draws.hpp"
#include "bkt/model.hpp"

namespace bkt {

struct ViOptions {
  std::size_t gradient_samples = 8;
  std::size_t max_iterations = 10000;
  /// Relative change of the window-averaged ELBO that counts as converged.
  double tolerance = 1e-4;
  std::size_t window = 100;
  /// Base step sizes tried during the short tuning phase.
  std::vector<double> eta_candidates{1.0, 0.1, 0.01};
  std::size_t tuning_iterations = 100;
  std::size_t output_draws = 1000;
  std::uint64_t seed = 0;
};

struct ViResult {
  std::vector<double> mean;  // unconstrained
  std::vector<double> sd;
  std::vector<double> elbo_trace;  // window averages
  double eta = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  PosteriorDraws draws;  // tagged approximate
};

/// Mean-field Gaussian ADVI with reparameterized stochastic gradients and an
/// adaptive step sequence. The returned moments average the iterates of the
/// second half of the run. Mean-field fits tend to understate posterior spread.
ViResult fit_vi(const Target& target, const std::vector<std::string>& names,
                const ViOptions& options);

}  // namespace bkt

#endif  // BKT_VI_HPP
