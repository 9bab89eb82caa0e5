#include "bkt/map.hpp"

#include <cmath>
#include <deque>

#include "bkt/error.hpp"
#include "bkt/rng.hpp"

namespace bkt {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(const std::vector<double>& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

OptimizeResult maximize_lbfgs(const Target& target, std::vector<double> x,
                              const MapOptions& options) {
  const std::size_t n = target.dimension;
  // Minimize f = -log density.
  std::vector<double> g(n);
  double f = -target.log_density(x, g);
  for (auto& v : g) v = -v;
  OptimizeResult r;
  if (!std::isfinite(f)) {
    r.point = std::move(x);
    r.objective = -f;
    return r;
  }

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::vector<double> d(n), x_new(n), g_new(n), alpha(options.history);
  std::size_t stalled = 0;

  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    r.iterations = it + 1;
    if (inf_norm(g) < options.gradient_tolerance) {
      r.converged = true;
      break;
    }
    // Two-loop recursion.
    d = g;
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      alpha[i] = rho_hist[i] * dot(s_hist[i], d);
      for (std::size_t k = 0; k < n; ++k) d[k] -= alpha[i] * y_hist[i][k];
    }
    const double gamma = s_hist.empty() ? 1.0 / std::max(1.0, inf_norm(g))
                                        : dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
    for (auto& v : d) v *= gamma;
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * dot(y_hist[i], d);
      for (std::size_t k = 0; k < n; ++k) d[k] += s_hist[i][k] * (alpha[i] - beta);
    }
    for (auto& v : d) v = -v;
    double slope = dot(g, d);
    if (!(slope < 0.0)) {
      // Not a descent direction: reset memory, use steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t k = 0; k < n; ++k) d[k] = -g[k] / std::max(1.0, inf_norm(g));
      slope = dot(g, d);
    }

    // Backtracking line search with the Armijo condition.
    double step = 1.0;
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t k = 0; k < n; ++k) x_new[k] = x[k] + step * d[k];
      f_new = -target.log_density(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    for (auto& v : g_new) v = -v;

    std::vector<double> s(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
      s[k] = x_new[k] - x[k];
      y[k] = g_new[k] - g[k];
    }
    const double sy = dot(s, y);
    if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > options.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    const double decrease = f - f_new;
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    // Flat tails (parameters drifting to a boundary) stop once progress vanishes.
    stalled = decrease < 1e-13 * std::max(1.0, std::abs(f)) ? stalled + 1 : 0;
    if (stalled >= 10) {
      r.converged = true;
      break;
    }
  }
  r.point = std::move(x);
  r.objective = -f;
  return r;
}

MapResult fit_map(const Target& target, const MapOptions& options) {
  if (target.dimension == 0) {
    throw ConfigError("model has no free parameters; all are fixed; fit with method \"fixed\" to predict directly");
  }
  Rng rng = make_rng(options.seed, 0x6d6170);
  MapResult best;
  bool have = false;
  const std::size_t runs = std::max<std::size_t>(1, options.restarts);
  for (std::size_t r = 0; r < runs; ++r) {
    std::vector<double> start = random_initial_point(target.dimension, rng);
    OptimizeResult run = maximize_lbfgs(target, std::move(start), options);
    best.restart_objectives.push_back(run.objective);
    if (std::isfinite(run.objective) && (!have || run.objective > best.objective)) {
      best.point = std::move(run.point);
      best.objective = run.objective;
      best.converged = run.converged;
      best.best_restart = r;
      have = true;
    }
  }
  if (!have) throw FitError("no finite starting point found in " + std::to_string(runs) + " restarts");
  return best;
}

}  // namespace bkt
