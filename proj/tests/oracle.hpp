#ifndef BKT_TESTS_ORACLE_HPP
#define BKT_TESTS_ORACLE_HPP

// Independent reference computations used by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "bkt/model_core.hpp"
#include "bkt/rng.hpp"

namespace oracle {

struct Enumeration {
  double log_lik = 0.0;
  std::vector<double> smoothed;  // P(L_t = 1 | y)
};

// Sum over all 2^T latent paths in probability space.
inline Enumeration enumerate(const std::vector<std::uint8_t>& y, const bkt::BktParams& p) {
  const std::size_t T = y.size();
  double total = 0.0;
  std::vector<double> known(T, 0.0);
  for (std::uint64_t path = 0; path < (std::uint64_t{1} << T); ++path) {
    double w = 1.0;
    for (std::size_t t = 0; t < T; ++t) {
      const int s = (path >> t) & 1;
      if (t == 0) {
        w *= s ? p.pi_know : 1.0 - p.pi_know;
      } else {
        const int prev = (path >> (t - 1)) & 1;
        const double to_known = prev ? 1.0 - p.forget : p.learn;
        w *= s ? to_known : 1.0 - to_known;
      }
      const double correct = s ? 1.0 - p.slip : p.guess;
      w *= y[t] ? correct : 1.0 - correct;
    }
    total += w;
    for (std::size_t t = 0; t < T; ++t) {
      if ((path >> t) & 1) known[t] += w;
    }
  }
  Enumeration e;
  e.log_lik = std::log(total);
  for (auto& k : known) e.smoothed.push_back(k / total);
  return e;
}

inline bkt::BktParams random_params(bkt::Rng& rng) {
  return {bkt::uniform(rng, 0.01, 0.99), bkt::uniform(rng, 0.01, 0.99),
          bkt::uniform(rng, 0.01, 0.49), bkt::uniform(rng, 0.01, 0.49),
          bkt::uniform(rng, 0.01, 0.99)};
}

inline std::vector<std::uint8_t> random_responses(bkt::Rng& rng, std::size_t T) {
  std::vector<std::uint8_t> y(T);
  for (auto& v : y) v = bkt::bernoulli(rng, 0.5) ? 1 : 0;
  return y;
}

// Central differences of f at x with step h.
inline std::vector<double> finite_difference(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
    double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double up = f(x);
    x[i] = xi - h;
    const double down = f(x);
    x[i] = xi;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Largest |analytic - numeric| / max(|analytic|, |numeric|, 1) over coordinates.
inline double max_relative_error(const std::vector<double>& analytic,
                                 const std::vector<double>& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1.0});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
  }
  return worst;
}

}  // namespace oracle

#endif  // BKT_TESTS_ORACLE_HPP
