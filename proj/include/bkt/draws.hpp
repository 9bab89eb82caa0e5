#ifndef BKT_DRAWS_HPP
#define BKT_DRAWS_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace bkt {

struct DrawStats {
  double step_size = 0.0;
  int tree_depth = 0;
  std::size_t n_leapfrog = 0;
  bool divergent = false;
  double accept_stat = 0.0;
  double log_density = 0.0;
};

struct ChainDraws {
  std::vector<std::vector<double>> draws;  // draw -> unconstrained vector
  std::vector<DrawStats> stats;            // empty for non-MCMC methods
};

/// Unconstrained draws of every free parameter, chain by chain.
struct PosteriorDraws {
  std::vector<std::string> names;
  std::vector<ChainDraws> chains;
  std::string method;        // "nuts" or "vi"
  bool approximate = false;  // true for variational draws
  std::size_t warmup = 0;
  std::size_t sampling = 0;
  std::uint64_t seed = 0;

  std::size_t dimension() const noexcept { return names.size(); }
  std::size_t draws_per_chain() const noexcept {
    return chains.empty() ? 0 : chains.front().draws.size();
  }
  std::size_t total_draws() const noexcept;
  std::size_t divergences() const noexcept;
  /// Throws ConfigError when chains disagree in size or dimension.
  void validate() const;
  /// Column `param` of chain `chain`.
  std::vector<double> column(std::size_t chain, std::size_t param) const;
  /// Every draw in chain-major order.
  std::vector<std::vector<double>> flatten() const;
};

}  // namespace bkt

#endif  // BKT_DRAWS_HPP
