#include "bkt/contrast.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

#include "bkt/error.hpp"
#include "bkt/summary.hpp"

namespace bkt {

void FactorialDesign::validate() const {
  if (factors.empty()) throw ConfigError("design declares no factors");
  if (conditions.empty()) throw ConfigError("design declares no conditions");
  for (const auto& [cond, levels] : conditions) {
    for (const auto& f : factors) {
      if (!levels.count(f)) {
        throw ConfigError("condition '" + cond + "' has no level for factor '" + f + "'");
      }
    }
  }
}

std::vector<std::string> FactorialDesign::levels(const std::string& factor) const {
  std::set<std::string> out;
  for (const auto& [cond, lv] : conditions) {
    auto it = lv.find(factor);
    if (it != lv.end()) out.insert(it->second);
  }
  return {out.begin(), out.end()};
}

Marginals marginal_effects(const std::map<std::string, std::vector<double>>& draws_by_condition,
                           const FactorialDesign& design, const std::string& factor) {
  design.validate();
  if (std::find(design.factors.begin(), design.factors.end(), factor) == design.factors.end()) {
    throw ConfigError("unknown factor '" + factor + "'");
  }
  if (draws_by_condition.empty()) throw ConfigError("no conditions supplied");
  std::size_t n = std::numeric_limits<std::size_t>::max();
  for (const auto& [cond, draws] : draws_by_condition) {
    if (!design.conditions.count(cond)) {
      throw ConfigError("condition '" + cond + "' is missing from the design");
    }
    n = std::min(n, draws.size());
  }
  if (n == 0) throw ConfigError("a condition has no draws");

  Marginals out;
  std::map<std::string, std::size_t> counts;
  for (const auto& [cond, draws] : draws_by_condition) {
    const std::string& lv = design.conditions.at(cond).at(factor);
    auto& acc = out[lv];
    acc.resize(n, 0.0);
    const double k = static_cast<double>(++counts[lv]);
    for (std::size_t i = 0; i < n; ++i) acc[i] += (draws[i] - acc[i]) / k;
  }
  return out;
}

std::vector<ContrastResult> contrast_vs_neutral(const Marginals& marginals,
                                                const std::string& neutral, double level,
                                                const std::string& parameter,
                                                const std::string& factor) {
  auto base = marginals.find(neutral);
  if (base == marginals.end()) throw ConfigError("unknown neutral level '" + neutral + "'");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("credible level must lie in (0, 1)");
  const double tail = 0.5 * (1.0 - level);

  std::vector<ContrastResult> out;
  for (const auto& [lv, draws] : marginals) {
    if (lv == neutral) continue;
    const std::size_t n = std::min(draws.size(), base->second.size());
    if (n == 0) throw ConfigError("level '" + lv + "' has no draws");
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = draws[i] - base->second[i];
    ContrastResult r;
    r.parameter = parameter;
    r.factor = factor;
    r.level = lv;
    r.level_prob = level;
    r.mean = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);
    std::sort(diff.begin(), diff.end());
    r.median = quantile_sorted(diff, 0.5);
    r.lo = quantile_sorted(diff, tail);
    r.hi = quantile_sorted(diff, 1.0 - tail);
    r.excludes_zero = (r.lo > 0.0 && r.hi > 0.0) || (r.lo < 0.0 && r.hi < 0.0);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace bkt
