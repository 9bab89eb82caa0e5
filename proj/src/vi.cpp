#include "bkt/vi.hpp"

#include <cmath>
#include <numbers>

#include "bkt/error.hpp"
#include "bkt/rng.hpp"

namespace bkt {

namespace {

struct Run {
  std::vector<double> mu, omega;
  std::vector<double> mu_avg, omega_avg;
  std::vector<double> window_means;
  std::vector<std::vector<double>> window_mu, window_omega;
  std::size_t iterations = 0;
  bool converged = false;
  bool diverged = false;
};

class Advi {
 public:
  Advi(const Target& target, const ViOptions& opt) : target_(target), opt_(opt) {}

  // Returns the single-iteration ELBO estimate, or NaN when every sample failed.
  double gradient(Rng& rng, const std::vector<double>& mu, const std::vector<double>& omega,
                  std::vector<double>& g_mu, std::vector<double>& g_omega) {
    const std::size_t d = target_.dimension;
    std::fill(g_mu.begin(), g_mu.end(), 0.0);
    std::fill(g_omega.begin(), g_omega.end(), 0.0);
    std::vector<double> eps(d), z(d), g(d);
    double total = 0.0;
    std::size_t used = 0;
    for (std::size_t s = 0; s < opt_.gradient_samples; ++s) {
      for (int attempt = 0; attempt < 10; ++attempt) {
        for (std::size_t i = 0; i < d; ++i) {
          eps[i] = std_normal(rng);
          z[i] = mu[i] + std::exp(omega[i]) * eps[i];
        }
        const double lp = target_.log_density(z, g);
        if (!std::isfinite(lp)) continue;
        for (std::size_t i = 0; i < d; ++i) {
          g_mu[i] += g[i];
          g_omega[i] += g[i] * eps[i] * std::exp(omega[i]);
        }
        total += lp;
        ++used;
        break;
      }
    }
    if (used == 0) return std::nan("");
    const double inv = 1.0 / static_cast<double>(used);
    double entropy = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      g_mu[i] *= inv;
      g_omega[i] = g_omega[i] * inv + 1.0;
      entropy += omega[i];
    }
    return total * inv + entropy +
           0.5 * static_cast<double>(d) * (1.0 + std::log(2.0 * std::numbers::pi));
  }

  Run run(Rng& rng, std::vector<double> mu, std::vector<double> omega, double eta,
          std::size_t max_iter, bool check_convergence) {
    const std::size_t d = target_.dimension;
    Run r;
    r.mu = std::move(mu);
    r.omega = std::move(omega);
    std::vector<double> g_mu(d), g_omega(d), s_mu(d, 0.0), s_omega(d, 0.0);
    std::vector<double> sum_mu(d, 0.0), sum_omega(d, 0.0);
    double window_sum = 0.0;
    std::size_t in_window = 0;
    constexpr double kAlpha = 0.1, kTau = 1.0;
    for (std::size_t k = 1; k <= max_iter; ++k) {
      const double elbo = gradient(rng, r.mu, r.omega, g_mu, g_omega);
      if (!std::isfinite(elbo)) {
        r.diverged = true;
        break;
      }
      const double decay = eta * std::pow(static_cast<double>(k), -0.5 + 1e-16);
      for (std::size_t i = 0; i < d; ++i) {
        s_mu[i] = k == 1 ? g_mu[i] * g_mu[i] : kAlpha * g_mu[i] * g_mu[i] + (1 - kAlpha) * s_mu[i];
        s_omega[i] = k == 1 ? g_omega[i] * g_omega[i]
                            : kAlpha * g_omega[i] * g_omega[i] + (1 - kAlpha) * s_omega[i];
        r.mu[i] += decay / (kTau + std::sqrt(s_mu[i])) * g_mu[i];
        r.omega[i] += decay / (kTau + std::sqrt(s_omega[i])) * g_omega[i];
        sum_mu[i] += r.mu[i];
        sum_omega[i] += r.omega[i];
      }
      r.iterations = k;
      window_sum += elbo;
      if (++in_window == opt_.window) {
        r.window_means.push_back(window_sum / static_cast<double>(opt_.window));
        for (std::size_t i = 0; i < d; ++i) {
          sum_mu[i] /= static_cast<double>(opt_.window);
          sum_omega[i] /= static_cast<double>(opt_.window);
        }
        r.window_mu.push_back(sum_mu);
        r.window_omega.push_back(sum_omega);
        std::fill(sum_mu.begin(), sum_mu.end(), 0.0);
        std::fill(sum_omega.begin(), sum_omega.end(), 0.0);
        window_sum = 0.0;
        in_window = 0;
        const std::size_t n = r.window_means.size();
        if (check_convergence && n >= 2) {
          const double cur = r.window_means[n - 1], prev = r.window_means[n - 2];
          if (std::abs(cur - prev) / std::abs(cur) < opt_.tolerance) {
            r.converged = true;
            break;
          }
        }
      }
    }
    // Average the iterates of the second half of the run.
    const std::size_t n = r.window_mu.size();
    const std::size_t tail = (n + 1) / 2;
    if (tail == 0) {
      r.mu_avg = r.mu;
      r.omega_avg = r.omega;
      return r;
    }
    r.mu_avg.assign(d, 0.0);
    r.omega_avg.assign(d, 0.0);
    for (std::size_t w = n - tail; w < n; ++w) {
      for (std::size_t i = 0; i < d; ++i) {
        r.mu_avg[i] += r.window_mu[w][i] / static_cast<double>(tail);
        r.omega_avg[i] += r.window_omega[w][i] / static_cast<double>(tail);
      }
    }
    return r;
  }

  double estimate_elbo(Rng& rng, const std::vector<double>& mu, const std::vector<double>& omega,
                       std::size_t samples) {
    const std::size_t d = target_.dimension;
    std::vector<double> z(d), g(d);
    double total = 0.0, entropy = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      for (std::size_t i = 0; i < d; ++i) z[i] = mu[i] + std::exp(omega[i]) * std_normal(rng);
      const double lp = target_.log_density(z, g);
      if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
      total += lp;
    }
    for (double w : omega) entropy += w;
    return total / static_cast<double>(samples) + entropy;
  }

 private:
  const Target& target_;
  const ViOptions& opt_;
};

}  // namespace

ViResult fit_vi(const Target& target, const std::vector<std::string>& names,
                const ViOptions& options) {
  const std::size_t d = target.dimension;
  if (d == 0) throw ConfigError("model has no free parameters; all are fixed; fit with method \"fixed\" to predict directly");
  if (names.size() != d) throw ConfigError("parameter names do not match dimension");
  if (options.gradient_samples == 0 || options.window == 0) {
    throw ConfigError("VI needs positive gradient samples and window length");
  }
  Rng rng = make_rng(options.seed, 0x7669);
  Advi advi(target, options);

  std::vector<double> mu0;
  {
    std::vector<double> g(d);
    for (int attempt = 0; attempt < 100; ++attempt) {
      mu0 = random_initial_point(d, rng);
      if (std::isfinite(target.log_density(mu0, g))) break;
      mu0.clear();
    }
    if (mu0.empty()) throw FitError("no finite initial point found for VI");
  }
  const std::vector<double> omega0(d, 0.0);

  // Tune the base step size on short runs from the same start.
  double eta = options.eta_candidates.empty() ? 0.1 : options.eta_candidates.front();
  if (options.eta_candidates.size() > 1) {
    double best = -std::numeric_limits<double>::infinity();
    for (double candidate : options.eta_candidates) {
      Rng tune_rng = make_rng(options.seed, 0x7475);
      Run r = advi.run(tune_rng, mu0, omega0, candidate, options.tuning_iterations, false);
      if (r.diverged) continue;
      const double elbo = advi.estimate_elbo(tune_rng, r.mu, r.omega, 100);
      if (elbo > best) {
        best = elbo;
        eta = candidate;
      }
    }
    if (!std::isfinite(best)) throw FitError("ELBO was non-finite for every step size");
  }

  Run r = advi.run(rng, mu0, omega0, eta, options.max_iterations, true);
  if (r.diverged) {
    std::string last;
    for (std::size_t i = 0; i < d; ++i) last += (i ? ", " : "") + names[i] + "=" + std::to_string(r.mu[i]);
    throw FitError("ELBO became non-finite; last finite mean: " + last);
  }

  ViResult out;
  out.mean = r.mu_avg;
  out.sd.resize(d);
  for (std::size_t i = 0; i < d; ++i) out.sd[i] = std::exp(r.omega_avg[i]);
  out.elbo_trace = r.window_means;
  out.eta = eta;
  out.iterations = r.iterations;
  out.converged = r.converged;

  out.draws.names = names;
  out.draws.method = "vi";
  out.draws.approximate = true;
  out.draws.sampling = options.output_draws;
  out.draws.seed = options.seed;
  ChainDraws chain;
  chain.draws.reserve(options.output_draws);
  for (std::size_t s = 0; s < options.output_draws; ++s) {
    std::vector<double> z(d);
    for (std::size_t i = 0; i < d; ++i) z[i] = out.mean[i] + out.sd[i] * std_normal(rng);
    chain.draws.push_back(std::move(z));
  }
  out.draws.chains.push_back(std::move(chain));
  return out;
}

}  // namespace bkt
