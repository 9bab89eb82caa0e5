#include "bkt/summary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "bkt/error.hpp"

namespace bkt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double var_of(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

std::vector<double> pooled(const ChainColumns& chains) {
  std::vector<double> all;
  for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
  return all;
}

double autocov(const std::vector<double>& x, double mean, std::size_t lag) {
  const std::size_t n = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - mean) * (x[i + lag] - mean);
  return s / static_cast<double>(n);
}

}  // namespace

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ConfigError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, q);
}

double basic_rhat(const ChainColumns& chains) {
  const std::size_t m = chains.size();
  if (m < 2) return kNaN;
  const std::size_t n = chains.front().size();
  if (n < 2) return kNaN;
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    means.push_back(mean_of(c));
    vars.push_back(var_of(c));
  }
  const double w = mean_of(vars);
  const double b_over_n = var_of(means);
  if (!(w > 0.0)) return kNaN;
  const double nd = static_cast<double>(n);
  const double var_hat = (nd - 1.0) / nd * w + b_over_n;
  return std::sqrt(var_hat / w);
}

ChainColumns split_chains(const ChainColumns& chains) {
  ChainColumns out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

ChainColumns rank_normalize(const ChainColumns& chains) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t c = 0, k = 0; c < chains.size(); ++c) {
    for (double v : chains[c]) all.emplace_back(v, k++);
  }
  std::sort(all.begin(), all.end());
  const double s = static_cast<double>(all.size());
  std::vector<double> z(all.size());
  const boost::math::normal_distribution<double> normal;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j + 1 < all.size() && all[j + 1].first == all[i].first) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;  // average 1-based rank
    const double value = boost::math::quantile(normal, (rank - 0.375) / (s + 0.25));
    for (std::size_t k = i; k <= j; ++k) z[all[k].second] = value;
    i = j + 1;
  }
  ChainColumns out;
  for (std::size_t c = 0, k = 0; c < chains.size(); ++c) {
    out.emplace_back(z.begin() + static_cast<std::ptrdiff_t>(k),
                     z.begin() + static_cast<std::ptrdiff_t>(k + chains[c].size()));
    k += chains[c].size();
  }
  return out;
}

double ess(const ChainColumns& chains) {
  const std::size_t m = chains.size();
  if (m == 0) return kNaN;
  const std::size_t n = chains.front().size();
  if (n < 4) return kNaN;
  const double md = static_cast<double>(m), nd = static_cast<double>(n);
  std::vector<double> means(m), acov0(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean_of(chains[c]);
    acov0[c] = autocov(chains[c], means[c], 0);
  }
  const double mean_var = mean_of(acov0) * nd / (nd - 1.0);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) var_plus += var_of(means);
  if (!(var_plus > 0.0)) return kNaN;

  auto mean_acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) s += autocov(chains[c], means[c], lag);
    return s / md;
  };
  std::vector<double> rho(n, 0.0);
  rho[0] = 1.0;
  double rho_even = 1.0;
  double rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho[1] = rho_odd;
  std::size_t t = 1;
  while (t < n - 3 && rho_even + rho_odd > 0.0) {
    rho_even = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
    rho_odd = 1.0 - (mean_var - mean_acov(t + 2)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[t + 1] = rho_even;
      rho[t + 2] = rho_odd;
    }
    t += 2;
  }
  const std::size_t max_t = t - 2;
  if (rho_even > 0.0) rho[max_t + 1] = rho_even;
  // Initial monotone sequence.
  for (std::size_t k = 1; k + 2 <= max_t; k += 2) {
    if (rho[k + 1] + rho[k + 2] > rho[k - 1] + rho[k]) {
      rho[k + 1] = (rho[k - 1] + rho[k]) / 2.0;
      rho[k + 2] = rho[k + 1];
    }
  }
  double sum = 0.0;
  for (std::size_t k = 0; k <= max_t; ++k) sum += rho[k];
  double tau = -1.0 + 2.0 * sum + (max_t + 1 < n ? rho[max_t + 1] : 0.0);
  const double total = md * nd;
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

double rank_split_rhat(const ChainColumns& chains) {
  const ChainColumns split = split_chains(chains);
  const double bulk = basic_rhat(rank_normalize(split));
  const std::vector<double> all = pooled(split);
  const double med = quantile(all, 0.5);
  ChainColumns folded = split;
  for (auto& c : folded) {
    for (auto& v : c) v = std::abs(v - med);
  }
  const double tail = basic_rhat(rank_normalize(folded));
  if (std::isnan(bulk)) return tail;
  if (std::isnan(tail)) return bulk;
  return std::max(bulk, tail);
}

double ess_bulk(const ChainColumns& chains) { return ess(rank_normalize(split_chains(chains))); }

std::string level_label(double level) {
  std::ostringstream os;
  os << level * 100.0;
  return os.str();
}

SummaryRow summarize_quantity(const std::string& name, const ChainColumns& chains,
                              std::span<const double> levels) {
  std::vector<double> all = pooled(chains);
  if (all.empty()) throw ConfigError("cannot summarize an empty set of draws");
  SummaryRow row;
  row.parameter = name;
  row.mean = mean_of(all);
  row.sd = std::sqrt(var_of(all));
  std::sort(all.begin(), all.end());
  row.median = quantile_sorted(all, 0.5);
  for (double level : levels) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("credible level must lie in (0, 1)");
    const double tail = 0.5 * (1.0 - level);
    row.intervals.push_back({level, quantile_sorted(all, tail), quantile_sorted(all, 1.0 - tail)});
  }
  std::size_t min_len = std::numeric_limits<std::size_t>::max();
  for (const auto& c : chains) min_len = std::min(min_len, c.size());
  row.ess_bulk = min_len >= 4 ? ess_bulk(chains) : kNaN;
  if (row.sd == 0.0) row.ess_bulk = kNaN;
  row.mcse = std::isfinite(row.ess_bulk) ? row.sd / std::sqrt(row.ess_bulk) : kNaN;
  if (chains.size() >= 2 && min_len >= 4 && row.sd > 0.0) row.rhat = rank_split_rhat(chains);
  return row;
}

std::vector<SummaryRow> summarize(const PosteriorDraws& draws, std::span<const double> levels) {
  draws.validate();
  if (draws.total_draws() == 0) throw ConfigError("no posterior draws to summarize");
  std::vector<SummaryRow> rows;
  for (std::size_t p = 0; p < draws.dimension(); ++p) {
    ChainColumns cols;
    for (std::size_t c = 0; c < draws.chains.size(); ++c) cols.push_back(draws.column(c, p));
    rows.push_back(summarize_quantity(draws.names[p], cols, levels));
  }
  return rows;
}

std::vector<ChainColumns> constrained_columns(const PosteriorDraws& draws, const BktModel& model) {
  const auto& names = model.quantity_names();
  std::vector<ChainColumns> out(names.size(), ChainColumns(draws.chains.size()));
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    for (const auto& d : draws.chains[c].draws) {
      const std::vector<double> q = model.quantities(d);
      for (std::size_t k = 0; k < q.size(); ++k) out[k][c].push_back(q[k]);
    }
  }
  return out;
}

std::vector<SummaryRow> summarize(const PosteriorDraws& draws, const BktModel& model,
                                  std::span<const double> levels) {
  draws.validate();
  if (draws.total_draws() == 0) throw ConfigError("no posterior draws to summarize");
  if (draws.dimension() != model.dimension()) {
    throw ConfigError("draws do not match the model's parameter layout");
  }
  const auto cols = constrained_columns(draws, model);
  std::vector<SummaryRow> rows;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    rows.push_back(summarize_quantity(model.quantity_names()[k], cols[k], levels));
  }
  return rows;
}

}  // namespace bkt
