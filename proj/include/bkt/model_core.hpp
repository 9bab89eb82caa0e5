#ifndef BKT_MODEL_CORE_HPP
#define BKT_MODEL_CORE_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bkt {

/// The five BKT parameters in a fixed order used by every array-valued API.
enum class Param : std::size_t { learn = 0, forget = 1, guess = 2, slip = 3, pi_know = 4 };
inline constexpr std::size_t kNumParams = 5;
inline constexpr std::array<Param, kNumParams> kAllParams{Param::learn, Param::forget, Param::guess,
                                                          Param::slip, Param::pi_know};

constexpr std::size_t index(Param p) noexcept { return static_cast<std::size_t>(p); }
std::string_view param_name(Param p) noexcept;
std::optional<Param> parse_param(std::string_view name) noexcept;

/// Guess and slip live on (0, 0.5); the rest on (0, 1).
constexpr double upper_bound(Param p) noexcept {
  return (p == Param::guess || p == Param::slip) ? 0.5 : 1.0;
}

struct BktParams {
  double learn = 0.0;
  double forget = 0.0;
  double guess = 0.0;
  double slip = 0.0;
  double pi_know = 0.0;

  double get(Param p) const noexcept;
  void set(Param p, double v) noexcept;
  std::array<double, kNumParams> to_array() const noexcept;
  static BktParams from_array(const std::array<double, kNumParams>& a) noexcept;

  bool operator==(const BktParams&) const = default;
};

/// Unconstrained coordinates of the five core parameters.
using ZVector = std::array<double, kNumParams>;

/// logistic for learn/forget/pi_know, half-scaled logistic for guess/slip.
/// Throws ConfigError on a non-finite coordinate.
BktParams constrain(const ZVector& z);
/// Inverse of constrain. Values must lie strictly inside each parameter's range.
ZVector unconstrain(const BktParams& p);

double constrain_one(Param p, double z) noexcept;
double unconstrain_one(Param p, double v) noexcept;

/// Per-parameter optional fixed values. Fixed values may sit on the closed
/// range boundary, which free parameters never reach.
class FixedMask {
 public:
  FixedMask() = default;
  void fix(Param p, double value);
  void release(Param p) noexcept { values_[index(p)].reset(); }
  bool is_fixed(Param p) const noexcept { return values_[index(p)].has_value(); }
  double value(Param p) const { return *values_[index(p)]; }
  const std::optional<double>& get(Param p) const noexcept { return values_[index(p)]; }
  std::size_t count() const noexcept;
  bool all_fixed() const noexcept { return count() == kNumParams; }
  /// Fixed parameters as a full BktParams, or nullopt unless all are fixed.
  std::optional<BktParams> as_params() const;
  /// Overwrite fixed coordinates of `p`.
  void apply(BktParams& p) const noexcept;

 private:
  std::array<std::optional<double>, kNumParams> values_{};
};

/// Tallies of degenerate Bayes-rule denominators encountered while filtering.
struct NumericalEvents {
  std::size_t zero_denominator = 0;
};

struct MasteryState {
  double p_know = 0.0;
  std::size_t t = 1;
};

struct FilterStep {
  double conditional;  // P(L_t | Y_t)
  MasteryState next;   // P(L_{t+1}) before Y_{t+1}
};

/// Bayes update on one response followed by the learn/forget transition.
/// A zero denominator leaves the mastery unchanged and bumps `events`.
FilterStep filter_update(const MasteryState& state, int y, const BktParams& params,
                         NumericalEvents* events = nullptr);

/// One-step-ahead probability of a correct response.
double predict_correct(const MasteryState& state, const BktParams& params) noexcept;
double predict_correct(double p_know, const BktParams& params) noexcept;

using Responses = std::span<const std::uint8_t>;

/// ln P(Y_{1:T} | params) by the log-space forward recursion.
double log_likelihood(Responses y, const BktParams& params);

struct FilteredStep {
  double prior_mastery;      // P(L_t | Y_{1:t-1})
  double predicted_correct;  // P(Y_t = 1 | Y_{1:t-1})
};

std::vector<FilteredStep> filter_sequence(Responses y, const BktParams& params,
                                          NumericalEvents* events = nullptr);

/// P(L_t = 1 | Y_{1:T}) for t = 1..T by log-space forward-backward.
std::vector<double> smooth_sequence(Responses y, const BktParams& params);

/// Expected sufficient statistics of one sequence under `params`.
/// occupancy counts over t < T feed the transition terms, emission counts
/// run over all t.
struct SequenceStats {
  double log_lik = 0.0;
  double first_known = 0.0;     // gamma_1(1)
  double learned = 0.0;         // sum_t xi_t(0 -> 1)
  double forgot = 0.0;          // sum_t xi_t(1 -> 0)
  double unknown_occ = 0.0;     // sum_{t<T} gamma_t(0)
  double known_occ = 0.0;       // sum_{t<T} gamma_t(1)
  double unknown_total = 0.0;   // sum_t gamma_t(0)
  double unknown_correct = 0.0; // sum_t gamma_t(0) y_t
  double known_total = 0.0;     // sum_t gamma_t(1)
  double known_wrong = 0.0;     // sum_t gamma_t(1) (1 - y_t)

  SequenceStats& operator+=(const SequenceStats& o) noexcept;
};

SequenceStats expected_counts(Responses y, const BktParams& params);

/// d log-likelihood / d z for each core coordinate, from expected counts.
ZVector gradient_wrt_z(const SequenceStats& stats, const BktParams& params) noexcept;

}  // namespace bkt

#endif  // BKT_MODEL_CORE_HPP
