#include "bkt/nuts.hpp"

#include <cmath>
#include <exception>
#include <thread>

#include "bkt/error.hpp"
#include "bkt/numeric.hpp"
#include "bkt/rng.hpp"

namespace bkt {

void DualAveraging::restart(double step_size) {
  mu_ = std::log(10.0 * step_size);
  s_bar_ = 0.0;
  x_bar_ = 0.0;
  counter_ = 0.0;
}

double DualAveraging::update(double accept_stat) {
  counter_ += 1.0;
  accept_stat = std::min(1.0, accept_stat);
  const double eta = 1.0 / (counter_ + t0_);
  s_bar_ = (1.0 - eta) * s_bar_ + eta * (target_ - accept_stat);
  const double x = mu_ - s_bar_ * std::sqrt(counter_) / gamma_;
  const double w = std::pow(counter_, -kappa_);
  x_bar_ = (1.0 - w) * x_bar_ + w * x;
  return std::exp(x);
}

double DualAveraging::final_step_size() const { return std::exp(x_bar_); }

WarmupSchedule::WarmupSchedule(std::size_t warmup, std::size_t base_window) : warmup_(warmup) {
  if (warmup < 20) return;
  adapt_metric_ = true;
  init_ = static_cast<std::size_t>(0.15 * static_cast<double>(warmup));
  term_ = static_cast<std::size_t>(0.1 * static_cast<double>(warmup));
  std::size_t size = base_window;
  if (init_ + size + term_ > warmup) size = warmup - init_ - term_;
  const std::size_t last = warmup - term_ - 1;
  std::size_t next = init_ + size - 1;
  while (true) {
    ends_.push_back(next);
    if (next == last) break;
    size *= 2;
    std::size_t candidate = next + size;
    if (candidate != last && candidate + 2 * size >= warmup - term_) candidate = last;
    next = candidate;
  }
}

bool WarmupSchedule::in_window(std::size_t i) const noexcept {
  return adapt_metric_ && i >= init_ && i < warmup_ - term_;
}

bool WarmupSchedule::window_end(std::size_t i) const noexcept {
  if (!adapt_metric_) return false;
  for (std::size_t e : ends_) {
    if (e == i) return true;
  }
  return false;
}

namespace {

constexpr double kMaxDeltaH = 1000.0;

struct PhasePoint {
  std::vector<double> q, p, g;
  double logp = 0.0;
};

class Chain {
 public:
  Chain(const Target& target, Rng rng, int max_depth)
      : target_(target), rng_(std::move(rng)), max_depth_(max_depth),
        inv_metric_(target.dimension, 1.0) {}

  void initialize(std::vector<double> q) {
    z_.q = std::move(q);
    z_.p.assign(dim(), 0.0);
    z_.g.assign(dim(), 0.0);
    z_.logp = target_.log_density(z_.q, z_.g);
  }

  bool initialized_finite() const {
    if (!std::isfinite(z_.logp)) return false;
    for (double x : z_.g) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  void init_step_size() {
    const PhasePoint start = z_;
    sample_momentum();
    double h0 = hamiltonian(z_);
    leapfrog(z_, eps_);
    double delta = h0 - finite_or_inf(hamiltonian(z_));
    const int direction = delta > std::log(0.8) ? 1 : -1;
    while (true) {
      z_ = start;
      sample_momentum();
      h0 = hamiltonian(z_);
      leapfrog(z_, eps_);
      delta = h0 - finite_or_inf(hamiltonian(z_));
      if (direction == 1 && !(delta > std::log(0.8))) break;
      if (direction == -1 && !(delta < std::log(0.8))) break;
      eps_ = direction == 1 ? 2.0 * eps_ : 0.5 * eps_;
      if (eps_ > 1e7) throw FitError("step size diverged to infinity; posterior may be improper");
      if (eps_ == 0.0) throw FitError("step size collapsed to zero");
    }
    z_ = start;
  }

  DrawStats transition() {
    sample_momentum();
    divergent_ = false;
    PhasePoint z_fwd = z_, z_bck = z_, z_sample = z_, z_propose = z_;
    std::vector<double> p_fwd_fwd = z_.p, p_fwd_bck = z_.p, p_bck_fwd = z_.p, p_bck_bck = z_.p;
    std::vector<double> ps_fwd_fwd = sharp(z_.p);
    std::vector<double> ps_fwd_bck = ps_fwd_fwd, ps_bck_fwd = ps_fwd_fwd, ps_bck_bck = ps_fwd_fwd;
    std::vector<double> rho = z_.p;
    double log_sum_weight = 0.0;
    const double h0 = hamiltonian(z_);
    std::size_t n_leapfrog = 0;
    double sum_metro = 0.0;
    int depth = 0;

    while (depth < max_depth_) {
      std::vector<double> rho_fwd(dim(), 0.0), rho_bck(dim(), 0.0);
      bool valid = false;
      double lsw_subtree = kNegInf;
      if (uniform01(rng_) > 0.5) {
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        ps_bck_fwd = ps_fwd_bck;
        z_ = z_fwd;
        valid = build_tree(depth, z_propose, ps_fwd_bck, ps_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd,
                           h0, 1.0, n_leapfrog, lsw_subtree, sum_metro);
        z_fwd = z_;
      } else {
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        ps_fwd_bck = ps_bck_fwd;
        z_ = z_bck;
        valid = build_tree(depth, z_propose, ps_bck_fwd, ps_bck_bck, rho_bck, p_bck_fwd, p_bck_bck,
                           h0, -1.0, n_leapfrog, lsw_subtree, sum_metro);
        z_bck = z_;
      }
      if (!valid) break;
      ++depth;
      if (lsw_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (uniform01(rng_) < std::exp(lsw_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

      for (std::size_t i = 0; i < dim(); ++i) rho[i] = rho_bck[i] + rho_fwd[i];
      bool persist = criterion(ps_bck_bck, ps_fwd_fwd, rho);
      std::vector<double> ext(dim());
      for (std::size_t i = 0; i < dim(); ++i) ext[i] = rho_bck[i] + p_fwd_bck[i];
      persist = persist && criterion(ps_bck_bck, ps_fwd_bck, ext);
      for (std::size_t i = 0; i < dim(); ++i) ext[i] = rho_fwd[i] + p_bck_fwd[i];
      persist = persist && criterion(ps_bck_fwd, ps_fwd_fwd, ext);
      if (!persist) break;
    }
    z_ = z_sample;
    DrawStats s;
    s.step_size = eps_;
    s.tree_depth = depth;
    s.n_leapfrog = n_leapfrog;
    s.divergent = divergent_;
    s.accept_stat = n_leapfrog ? sum_metro / static_cast<double>(n_leapfrog) : 0.0;
    s.log_density = z_.logp;
    return s;
  }

  const std::vector<double>& position() const noexcept { return z_.q; }
  double step_size() const noexcept { return eps_; }
  void set_step_size(double e) noexcept { eps_ = e; }
  std::vector<double>& inverse_metric() noexcept { return inv_metric_; }

 private:
  std::size_t dim() const noexcept { return target_.dimension; }

  static double finite_or_inf(double h) {
    return std::isnan(h) ? std::numeric_limits<double>::infinity() : h;
  }

  void sample_momentum() {
    for (std::size_t i = 0; i < dim(); ++i) z_.p[i] = std_normal(rng_) / std::sqrt(inv_metric_[i]);
  }

  double hamiltonian(const PhasePoint& z) const {
    double k = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) k += inv_metric_[i] * z.p[i] * z.p[i];
    return -z.logp + 0.5 * k;
  }

  std::vector<double> sharp(const std::vector<double>& p) const {
    std::vector<double> out(dim());
    for (std::size_t i = 0; i < dim(); ++i) out[i] = inv_metric_[i] * p[i];
    return out;
  }

  void leapfrog(PhasePoint& z, double eps) {
    for (std::size_t i = 0; i < dim(); ++i) z.p[i] += 0.5 * eps * z.g[i];
    for (std::size_t i = 0; i < dim(); ++i) z.q[i] += eps * inv_metric_[i] * z.p[i];
    z.logp = target_.log_density(z.q, z.g);
    for (std::size_t i = 0; i < dim(); ++i) z.p[i] += 0.5 * eps * z.g[i];
  }

  static bool criterion(const std::vector<double>& ps_minus, const std::vector<double>& ps_plus,
                        const std::vector<double>& rho) {
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
      a += ps_plus[i] * rho[i];
      b += ps_minus[i] * rho[i];
    }
    return a > 0.0 && b > 0.0;
  }

  bool build_tree(int depth, PhasePoint& z_propose, std::vector<double>& ps_beg,
                  std::vector<double>& ps_end, std::vector<double>& rho, std::vector<double>& p_beg,
                  std::vector<double>& p_end, double h0, double sign, std::size_t& n_leapfrog,
                  double& log_sum_weight, double& sum_metro) {
    if (depth == 0) {
      leapfrog(z_, sign * eps_);
      ++n_leapfrog;
      const double h = finite_or_inf(hamiltonian(z_));
      if (!(h - h0 <= kMaxDeltaH)) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro += h0 - h > 0.0 ? 1.0 : std::exp(h0 - h);
      z_propose = z_;
      ps_beg = sharp(z_.p);
      ps_end = ps_beg;
      for (std::size_t i = 0; i < dim(); ++i) rho[i] += z_.p[i];
      p_beg = z_.p;
      p_end = p_beg;
      return !divergent_;
    }

    double lsw_init = kNegInf;
    std::vector<double> p_init_end(dim()), ps_init_end(dim()), rho_init(dim(), 0.0);
    if (!build_tree(depth - 1, z_propose, ps_beg, ps_init_end, rho_init, p_beg, p_init_end, h0, sign,
                    n_leapfrog, lsw_init, sum_metro)) {
      return false;
    }

    PhasePoint z_propose_final = z_;
    double lsw_final = kNegInf;
    std::vector<double> p_final_beg(dim()), ps_final_beg(dim()), rho_final(dim(), 0.0);
    if (!build_tree(depth - 1, z_propose_final, ps_final_beg, ps_end, rho_final, p_final_beg, p_end,
                    h0, sign, n_leapfrog, lsw_final, sum_metro)) {
      return false;
    }

    const double lsw_subtree = log_sum_exp(lsw_init, lsw_final);
    log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
    if (lsw_final > lsw_subtree) {
      z_propose = z_propose_final;
    } else if (uniform01(rng_) < std::exp(lsw_final - lsw_subtree)) {
      z_propose = z_propose_final;
    }

    std::vector<double> rho_subtree(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
      rho_subtree[i] = rho_init[i] + rho_final[i];
      rho[i] += rho_subtree[i];
    }
    bool persist = criterion(ps_beg, ps_end, rho_subtree);
    std::vector<double> ext(dim());
    for (std::size_t i = 0; i < dim(); ++i) ext[i] = rho_init[i] + p_final_beg[i];
    persist = persist && criterion(ps_beg, ps_final_beg, ext);
    for (std::size_t i = 0; i < dim(); ++i) ext[i] = rho_final[i] + p_init_end[i];
    persist = persist && criterion(ps_init_end, ps_end, ext);
    return persist;
  }

  const Target& target_;
  Rng rng_;
  int max_depth_;
  std::vector<double> inv_metric_;
  PhasePoint z_;
  double eps_ = 1.0;
  bool divergent_ = false;
};

// Welford accumulator for the diagonal metric.
class VarianceEstimator {
 public:
  explicit VarianceEstimator(std::size_t dim) : mean_(dim, 0.0), m2_(dim, 0.0) {}
  void add(const std::vector<double>& x) {
    ++n_;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - mean_[i];
      mean_[i] += d / static_cast<double>(n_);
      m2_[i] += d * (x[i] - mean_[i]);
    }
  }
  /// Sample variance shrunk towards 1e-3, as in Stan's regularization.
  std::vector<double> regularized() const {
    const double n = static_cast<double>(n_);
    std::vector<double> v(m2_.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double var = n > 1 ? m2_[i] / (n - 1.0) : 1.0;
      v[i] = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
    }
    return v;
  }
  void restart() {
    n_ = 0;
    std::fill(mean_.begin(), mean_.end(), 0.0);
    std::fill(m2_.begin(), m2_.end(), 0.0);
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> mean_, m2_;
};

struct ChainOutput {
  ChainDraws draws;
  ChainAdaptation adaptation;
};

ChainOutput run_chain(const Target& target, const NutsOptions& opt, std::size_t chain_id) {
  Rng rng = make_rng(opt.seed, chain_id + 1);
  Rng init_rng = make_rng(opt.seed, 0x1000 + chain_id);
  Chain chain(target, std::move(rng), opt.max_depth);

  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    if (attempt == 0 && chain_id < opt.inits.size()) {
      if (opt.inits[chain_id].size() != target.dimension) {
        throw ConfigError("initial point has the wrong dimension");
      }
      chain.initialize(opt.inits[chain_id]);
    } else {
      chain.initialize(random_initial_point(target.dimension, init_rng));
    }
    ok = chain.initialized_finite();
  }
  if (!ok) throw FitError("no finite initial point found after 100 attempts");

  ChainOutput out;
  DualAveraging da(opt.target_accept);
  const WarmupSchedule schedule(opt.warmup);
  VarianceEstimator var(target.dimension);
  if (opt.warmup > 0) {
    chain.init_step_size();
    da.restart(chain.step_size());
  }
  for (std::size_t it = 0; it < opt.warmup; ++it) {
    const DrawStats s = chain.transition();
    out.adaptation.warmup_divergences += s.divergent;
    chain.set_step_size(da.update(s.accept_stat));
    if (schedule.in_window(it)) var.add(chain.position());
    if (schedule.window_end(it)) {
      chain.inverse_metric() = var.regularized();
      var.restart();
      chain.init_step_size();
      da.restart(chain.step_size());
    }
  }
  if (opt.warmup > 0) {
    if (out.adaptation.warmup_divergences == opt.warmup) {
      throw FitError("every warmup iteration diverged in chain " + std::to_string(chain_id) +
                     "; check priors or reparameterize");
    }
    chain.set_step_size(da.final_step_size());
  }
  out.draws.draws.reserve(opt.sampling);
  out.draws.stats.reserve(opt.sampling);
  for (std::size_t it = 0; it < opt.sampling; ++it) {
    out.draws.stats.push_back(chain.transition());
    out.draws.draws.push_back(chain.position());
  }
  out.adaptation.step_size = chain.step_size();
  out.adaptation.inverse_metric = chain.inverse_metric();
  return out;
}

}  // namespace

NutsResult fit_nuts(const Target& target, const std::vector<std::string>& names,
                    const NutsOptions& options) {
  if (target.dimension == 0) {
    throw ConfigError("model has no free parameters; all are fixed; fit with method \"fixed\" to predict directly");
  }
  if (names.size() != target.dimension) throw ConfigError("parameter names do not match dimension");
  if (options.chains == 0) throw ConfigError("at least one chain is required");
  if (!(options.target_accept > 0.0 && options.target_accept < 1.0)) {
    throw ConfigError("target acceptance must lie in (0, 1)");
  }
  if (options.max_depth < 1) throw ConfigError("max tree depth must be positive");

  std::vector<ChainOutput> outputs(options.chains);
  std::vector<std::exception_ptr> errors(options.chains);
  const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, options.chains));
  if (threads == 1) {
    for (std::size_t c = 0; c < options.chains; ++c) outputs[c] = run_chain(target, options, c);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < options.chains; c += threads) {
          try {
            outputs[c] = run_chain(target, options, c);
          } catch (...) {
            errors[c] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  NutsResult result;
  result.draws.names = names;
  result.draws.method = "nuts";
  result.draws.warmup = options.warmup;
  result.draws.sampling = options.sampling;
  result.draws.seed = options.seed;
  for (auto& o : outputs) {
    result.draws.chains.push_back(std::move(o.draws));
    result.adaptation.push_back(std::move(o.adaptation));
  }
  return result;
}

}  // namespace bkt
