#include "bkt/em.hpp"

#include <algorithm>
#include <cmath>

#include "bkt/error.hpp"
#include "bkt/rng.hpp"

namespace bkt {

namespace {

SequenceStats total_stats(const KcSequences& data, const BktParams& p) {
  SequenceStats total;
  for (const auto& s : data.sequences) total += expected_counts(s.responses, p);
  return total;
}

BktParams maximize(const SequenceStats& s, double n_sequences, const BktParams& prev,
                   const EmOptions& options, const FixedMask& fixed) {
  BktParams next = prev;
  auto ratio = [](double num, double den, double fallback) {
    return den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : fallback;
  };
  next.pi_know = ratio(s.first_known, n_sequences, prev.pi_know);
  next.learn = ratio(s.learned, s.unknown_occ, prev.learn);
  next.forget = ratio(s.forgot, s.known_occ, prev.forget);
  next.guess = std::clamp(ratio(s.unknown_correct, s.unknown_total, prev.guess), options.epsilon, 0.5);
  next.slip = std::clamp(ratio(s.known_wrong, s.known_total, prev.slip), options.epsilon, 0.5);
  fixed.apply(next);
  return next;
}

}  // namespace

EmResult run_em(const KcSequences& data, const BktParams& start, const EmOptions& options,
                const FixedMask& fixed) {
  if (data.sequences.empty()) throw ConfigError("EM needs at least one sequence");
  if (!(options.tolerance > 0.0)) throw ConfigError("EM tolerance must be positive");
  EmResult r;
  r.params = start;
  fixed.apply(r.params);
  const double n = static_cast<double>(data.sequences.size());
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    const SequenceStats s = total_stats(data, r.params);
    if (!std::isfinite(s.log_lik)) throw FitError("EM reached a zero-likelihood parameter set");
    r.trace.push_back(s.log_lik);
    r.iterations = it + 1;
    if (it > 0 && std::abs(s.log_lik - r.trace[it - 1]) < options.tolerance) {
      r.converged = true;
      break;
    }
    r.params = maximize(s, n, r.params, options, fixed);
  }
  if (!r.converged) {
    r.trace.push_back(total_stats(data, r.params).log_lik);
  }
  r.log_lik = r.trace.back();
  return r;
}

EmResult fit_em(const KcSequences& data, const EmOptions& options, const FixedMask& fixed) {
  if (data.sequences.empty()) throw ConfigError("EM needs at least one sequence");
  Rng rng = make_rng(options.seed, 0x656d);
  EmResult best;
  bool have = false;
  for (std::size_t r = 0; r <= options.restarts; ++r) {
    BktParams start;
    start.learn = uniform(rng, 0.05, 0.95);
    start.forget = uniform(rng, 0.05, 0.95);
    start.pi_know = uniform(rng, 0.05, 0.95);
    start.guess = uniform(rng, 0.05, 0.45);
    start.slip = uniform(rng, 0.05, 0.45);
    EmResult run = run_em(data, start, options, fixed);
    run.best_restart = r;
    if (!have || run.log_lik > best.log_lik) {
      best = std::move(run);
      have = true;
    }
  }
  return best;
}

}  // namespace bkt
