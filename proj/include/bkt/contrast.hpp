#ifndef BKT_CONTRAST_HPP
#define BKT_CONTRAST_HPP

#include <map>
#include <string>
#include <vector>

namespace bkt {

/// Labels each condition with one level per factor.
struct FactorialDesign {
  std::vector<std::string> factors;
  std::map<std::string, std::map<std::string, std::string>> conditions;  // condition -> factor -> level

  /// Throws ConfigError when a condition misses a factor.
  void validate() const;
  /// Levels of `factor` in sorted order.
  std::vector<std::string> levels(const std::string& factor) const;
};

/// Per-draw values of one factor's levels: level -> draws.
using Marginals = std::map<std::string, std::vector<double>>;

/// Average the per-condition draws of every condition sharing a level of
/// `factor`. Conditions with more draws are truncated to the shortest.
Marginals marginal_effects(const std::map<std::string, std::vector<double>>& draws_by_condition,
                           const FactorialDesign& design, const std::string& factor);

struct ContrastResult {
  std::string parameter;
  std::string factor;
  std::string level;
  double mean = 0.0;
  double median = 0.0;
  double level_prob = 0.95;
  double lo = 0.0;
  double hi = 0.0;
  bool excludes_zero = false;
};

/// Differences of every non-neutral level against `neutral`, draw by draw.
std::vector<ContrastResult> contrast_vs_neutral(const Marginals& marginals,
                                                const std::string& neutral, double level,
                                                const std::string& parameter = {},
                                                const std::string& factor = {});

}  // namespace bkt

#endif  // BKT_CONTRAST_HPP
