#ifndef BKT_NUTS_HPP
#define BKT_NUTS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "bkt/draws.hpp"
#include "bkt/model.hpp"

namespace bkt {

struct NutsOptions {
  std::size_t chains = 4;
  std::size_t warmup = 1000;
  std::size_t sampling = 1000;
  double target_accept = 0.8;
  int max_depth = 10;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  /// Optional starting points, one per chain; otherwise Uniform(-2, 2).
  std::vector<std::vector<double>> inits;
};

struct ChainAdaptation {
  double step_size = 0.0;
  std::vector<double> inverse_metric;
  std::size_t warmup_divergences = 0;
};

struct NutsResult {
  PosteriorDraws draws;
  std::vector<ChainAdaptation> adaptation;
};

/// Multinomial NUTS with diagonal metric. Chain c uses RNG substream c of
/// the seed, so output is independent of the thread count.
NutsResult fit_nuts(const Target& target, const std::vector<std::string>& names,
                    const NutsOptions& options);

/// Step-size dual averaging in log space.
class DualAveraging {
 public:
  explicit DualAveraging(double target, double gamma = 0.05, double t0 = 10.0, double kappa = 0.75)
      : target_(target), gamma_(gamma), t0_(t0), kappa_(kappa) {}

  void restart(double step_size);
  /// Feed one acceptance statistic; returns the next step size to use.
  double update(double accept_stat);
  /// Averaged step size, used once adaptation ends.
  double final_step_size() const;

 private:
  double target_, gamma_, t0_, kappa_;
  double mu_ = 0.0;
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
  double counter_ = 0.0;
};

/// Warmup phases: initial step-size buffer (15%), doubling metric windows
/// starting at 25 iterations, terminal step-size buffer (10%).
class WarmupSchedule {
 public:
  explicit WarmupSchedule(std::size_t warmup, std::size_t base_window = 25);

  bool adapts_metric() const noexcept { return adapt_metric_; }
  /// Whether iteration `i` (0-based) contributes to the variance estimate.
  bool in_window(std::size_t i) const noexcept;
  /// Whether the metric is updated after iteration `i`.
  bool window_end(std::size_t i) const noexcept;
  const std::vector<std::size_t>& window_ends() const noexcept { return ends_; }

 private:
  std::size_t warmup_;
  std::size_t init_ = 0, term_ = 0;
  bool adapt_metric_ = false;
  std::vector<std::size_t> ends_;
};

}  // namespace bkt

#endif  // BKT_NUTS_HPP
