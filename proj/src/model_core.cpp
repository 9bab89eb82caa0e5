#include "bkt/model_core.hpp"

#include <cmath>

#include "bkt/error.hpp"
#include "bkt/numeric.hpp"

namespace bkt {

namespace {

constexpr std::array<std::string_view, kNumParams> kNames{"learn", "forget", "guess", "slip",
                                                          "pi_know"};

// Log transition and emission tables for one parameter set.
struct LogTables {
  double trans[2][2];  // [from][to]
  double emit[2][2];   // [state][y]

  explicit LogTables(const BktParams& p) {
    trans[0][0] = safe_log(1.0 - p.learn);
    trans[0][1] = safe_log(p.learn);
    trans[1][0] = safe_log(p.forget);
    trans[1][1] = safe_log(1.0 - p.forget);
    emit[0][0] = safe_log(1.0 - p.guess);
    emit[0][1] = safe_log(p.guess);
    emit[1][0] = safe_log(p.slip);
    emit[1][1] = safe_log(1.0 - p.slip);
  }
};

void require_nonempty(Responses y) {
  if (y.empty()) throw ConfigError("response sequence must not be empty");
}

// Fills alpha (2 entries per step) and returns the log-likelihood.
double forward(Responses y, const BktParams& p, const LogTables& lt, std::vector<double>& alpha) {
  const std::size_t n = y.size();
  alpha.resize(2 * n);
  alpha[0] = safe_log(1.0 - p.pi_know) + lt.emit[0][y[0]];
  alpha[1] = safe_log(p.pi_know) + lt.emit[1][y[0]];
  for (std::size_t t = 1; t < n; ++t) {
    const double a0 = alpha[2 * t - 2];
    const double a1 = alpha[2 * t - 1];
    const int yt = y[t];
    alpha[2 * t] = log_sum_exp(a0 + lt.trans[0][0], a1 + lt.trans[1][0]) + lt.emit[0][yt];
    alpha[2 * t + 1] = log_sum_exp(a0 + lt.trans[0][1], a1 + lt.trans[1][1]) + lt.emit[1][yt];
  }
  return log_sum_exp(alpha[2 * n - 2], alpha[2 * n - 1]);
}

}  // namespace

std::string_view param_name(Param p) noexcept { return kNames[index(p)]; }

std::optional<Param> parse_param(std::string_view name) noexcept {
  for (Param p : kAllParams) {
    if (kNames[index(p)] == name) return p;
  }
  if (name == "pi" || name == "prior") return Param::pi_know;
  return std::nullopt;
}

double BktParams::get(Param p) const noexcept {
  switch (p) {
    case Param::learn: return learn;
    case Param::forget: return forget;
    case Param::guess: return guess;
    case Param::slip: return slip;
    case Param::pi_know: return pi_know;
  }
  return 0.0;
}

void BktParams::set(Param p, double v) noexcept {
  switch (p) {
    case Param::learn: learn = v; break;
    case Param::forget: forget = v; break;
    case Param::guess: guess = v; break;
    case Param::slip: slip = v; break;
    case Param::pi_know: pi_know = v; break;
  }
}

std::array<double, kNumParams> BktParams::to_array() const noexcept {
  return {learn, forget, guess, slip, pi_know};
}

BktParams BktParams::from_array(const std::array<double, kNumParams>& a) noexcept {
  return {a[0], a[1], a[2], a[3], a[4]};
}

double constrain_one(Param p, double z) noexcept { return upper_bound(p) * inv_logit(z); }

double unconstrain_one(Param p, double v) noexcept { return logit(v / upper_bound(p)); }

BktParams constrain(const ZVector& z) {
  BktParams out;
  for (Param p : kAllParams) {
    const double zi = z[index(p)];
    if (!std::isfinite(zi)) {
      throw ConfigError("non-finite unconstrained value for " + std::string(param_name(p)));
    }
    out.set(p, constrain_one(p, zi));
  }
  return out;
}

ZVector unconstrain(const BktParams& params) {
  ZVector z{};
  for (Param p : kAllParams) {
    const double v = params.get(p);
    if (!(v > 0.0 && v < upper_bound(p))) {
      throw ConfigError(std::string(param_name(p)) + " outside its open range");
    }
    z[index(p)] = unconstrain_one(p, v);
  }
  return z;
}

void FixedMask::fix(Param p, double value) {
  if (!(value >= 0.0 && value <= upper_bound(p))) {
    throw ConfigError("fixed " + std::string(param_name(p)) + "=" + std::to_string(value) +
                      " outside [0, " + (upper_bound(p) == 0.5 ? "0.5" : "1") + "]");
  }
  values_[index(p)] = value;
}

std::size_t FixedMask::count() const noexcept {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.has_value();
  return n;
}

std::optional<BktParams> FixedMask::as_params() const {
  if (!all_fixed()) return std::nullopt;
  BktParams p;
  apply(p);
  return p;
}

void FixedMask::apply(BktParams& p) const noexcept {
  for (Param q : kAllParams) {
    if (values_[index(q)]) p.set(q, *values_[index(q)]);
  }
}

FilterStep filter_update(const MasteryState& state, int y, const BktParams& params,
                         NumericalEvents* events) {
  const double pl = state.p_know;
  double num, den;
  if (y == 1) {
    num = pl * (1.0 - params.slip);
    den = num + (1.0 - pl) * params.guess;
  } else {
    num = pl * params.slip;
    den = num + (1.0 - pl) * (1.0 - params.guess);
  }
  double conditional;
  if (den == 0.0) {
    conditional = pl;
    if (events) ++events->zero_denominator;
  } else {
    conditional = num / den;
  }
  const double next = conditional * (1.0 - params.forget) + (1.0 - conditional) * params.learn;
  return {conditional, {next, state.t + 1}};
}

double predict_correct(double p_know, const BktParams& params) noexcept {
  return p_know * (1.0 - params.slip) + (1.0 - p_know) * params.guess;
}

double predict_correct(const MasteryState& state, const BktParams& params) noexcept {
  return predict_correct(state.p_know, params);
}

double log_likelihood(Responses y, const BktParams& params) {
  require_nonempty(y);
  thread_local std::vector<double> alpha;
  return forward(y, params, LogTables(params), alpha);
}

std::vector<FilteredStep> filter_sequence(Responses y, const BktParams& params,
                                          NumericalEvents* events) {
  require_nonempty(y);
  std::vector<FilteredStep> out;
  out.reserve(y.size());
  MasteryState state{params.pi_know, 1};
  for (std::uint8_t yt : y) {
    out.push_back({state.p_know, predict_correct(state, params)});
    state = filter_update(state, yt, params, events).next;
  }
  return out;
}

std::vector<double> smooth_sequence(Responses y, const BktParams& params) {
  require_nonempty(y);
  const LogTables lt(params);
  std::vector<double> alpha;
  const double ll = forward(y, params, lt, alpha);
  const std::size_t n = y.size();
  std::vector<double> out(n);
  double b0 = 0.0, b1 = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    if (t + 1 < n) {
      const int yn = y[t + 1];
      const double e0 = lt.emit[0][yn] + b0;
      const double e1 = lt.emit[1][yn] + b1;
      const double nb0 = log_sum_exp(lt.trans[0][0] + e0, lt.trans[0][1] + e1);
      const double nb1 = log_sum_exp(lt.trans[1][0] + e0, lt.trans[1][1] + e1);
      b0 = nb0;
      b1 = nb1;
    }
    // Normalize the pair directly so an impossible sequence cannot yield NaN.
    const double l0 = alpha[2 * t] + b0;
    const double l1 = alpha[2 * t + 1] + b1;
    const double norm = std::isfinite(ll) ? ll : log_sum_exp(l0, l1);
    out[t] = norm == kNegInf ? params.pi_know : std::exp(l1 - norm);
  }
  return out;
}

SequenceStats& SequenceStats::operator+=(const SequenceStats& o) noexcept {
  log_lik += o.log_lik;
  first_known += o.first_known;
  learned += o.learned;
  forgot += o.forgot;
  unknown_occ += o.unknown_occ;
  known_occ += o.known_occ;
  unknown_total += o.unknown_total;
  unknown_correct += o.unknown_correct;
  known_total += o.known_total;
  known_wrong += o.known_wrong;
  return *this;
}

SequenceStats expected_counts(Responses y, const BktParams& params) {
  require_nonempty(y);
  const LogTables lt(params);
  thread_local std::vector<double> alpha;
  SequenceStats s;
  s.log_lik = forward(y, params, lt, alpha);
  if (!std::isfinite(s.log_lik)) return s;
  const double ll = s.log_lik;
  const std::size_t n = y.size();
  double b0 = 0.0, b1 = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double a0 = alpha[2 * t];
    const double a1 = alpha[2 * t + 1];
    if (t + 1 < n) {
      const int yn = y[t + 1];
      const double e0 = lt.emit[0][yn] + b0;
      const double e1 = lt.emit[1][yn] + b1;
      s.learned += std::exp(a0 + lt.trans[0][1] + e1 - ll);
      s.forgot += std::exp(a1 + lt.trans[1][0] + e0 - ll);
      b0 = log_sum_exp(lt.trans[0][0] + e0, lt.trans[0][1] + e1);
      b1 = log_sum_exp(lt.trans[1][0] + e0, lt.trans[1][1] + e1);
    }
    const double g1 = std::exp(a1 + b1 - ll);
    const double g0 = std::exp(a0 + b0 - ll);
    if (t + 1 < n) {
      s.unknown_occ += g0;
      s.known_occ += g1;
    }
    s.unknown_total += g0;
    s.known_total += g1;
    if (y[t]) {
      s.unknown_correct += g0;
    } else {
      s.known_wrong += g1;
    }
    if (t == 0) s.first_known = g1;
  }
  return s;
}

ZVector gradient_wrt_z(const SequenceStats& s, const BktParams& p) noexcept {
  ZVector g{};
  g[index(Param::pi_know)] = s.first_known - p.pi_know;
  g[index(Param::learn)] = s.learned - p.learn * s.unknown_occ;
  g[index(Param::forget)] = s.forgot - p.forget * s.known_occ;
  // guess = 0.5 * sigmoid(z): d log g / dz = 1 - 2g, d log(1-g) / dz = -g(1-2g)/(1-g)
  {
    const double q = p.guess;
    const double wrong = s.unknown_total - s.unknown_correct;
    g[index(Param::guess)] =
        (1.0 - 2.0 * q) * (s.unknown_correct - (q < 1.0 ? q * wrong / (1.0 - q) : 0.0));
  }
  {
    const double q = p.slip;
    const double right = s.known_total - s.known_wrong;
    g[index(Param::slip)] =
        (1.0 - 2.0 * q) * (s.known_wrong - (q < 1.0 ? q * right / (1.0 - q) : 0.0));
  }
  return g;
}

}  // namespace bkt
