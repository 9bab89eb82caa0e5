#ifndef BKT_SUMMARY_HPP
#define BKT_SUMMARY_HPP

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bkt/draws.hpp"
#include "bkt/model.hpp"

namespace bkt {

/// Linear interpolation between order statistics; `sorted` ascending.
double quantile_sorted(std::span<const double> sorted, double q);
double quantile(std::vector<double> values, double q);

using ChainColumns = std::vector<std::vector<double>>;  // chain -> draws of one quantity

/// Classic potential scale reduction on the chains as given.
double basic_rhat(const ChainColumns& chains);
/// Each chain cut into two halves (middle draw of odd chains dropped).
ChainColumns split_chains(const ChainColumns& chains);
/// Pooled ranks (ties averaged) mapped through the normal quantile function.
ChainColumns rank_normalize(const ChainColumns& chains);
/// Geyer initial-monotone-sequence ESS of the chains as given.
double ess(const ChainColumns& chains);

/// max(bulk, folded) rank-normalized split R-hat.
double rank_split_rhat(const ChainColumns& chains);
/// ESS of rank-normalized split chains.
double ess_bulk(const ChainColumns& chains);

struct Interval {
  double level = 0.95;
  double lo = 0.0;
  double hi = 0.0;
};

struct SummaryRow {
  std::string parameter;
  double mean = 0.0;
  double mcse = 0.0;
  double sd = 0.0;
  double median = 0.0;
  std::vector<Interval> intervals;
  double ess_bulk = 0.0;
  std::optional<double> rhat;
};

SummaryRow summarize_quantity(const std::string& name, const ChainColumns& chains,
                              std::span<const double> levels);

/// Summaries of the raw unconstrained coordinates.
std::vector<SummaryRow> summarize(const PosteriorDraws& draws, std::span<const double> levels);
/// Summaries of the model's constrained quantities, transforming each draw first.
std::vector<SummaryRow> summarize(const PosteriorDraws& draws, const BktModel& model,
                                  std::span<const double> levels);

/// Per-chain values of every model quantity: [quantity][chain][draw].
std::vector<ChainColumns> constrained_columns(const PosteriorDraws& draws, const BktModel& model);

/// "95" for 0.95, "97.5" for 0.975.
std::string level_label(double level);

}  // namespace bkt

#endif  // BKT_SUMMARY_HPP
