#include "bkt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "bkt/error.hpp"

namespace bkt {

namespace {

void check(std::span<const double> predicted, std::span<const std::uint8_t> observed) {
  if (predicted.size() != observed.size()) {
    throw ConfigError("predicted and observed lengths differ (" + std::to_string(predicted.size()) +
                      " vs " + std::to_string(observed.size()) + ")");
  }
  if (predicted.empty()) throw ConfigError("metrics need at least one prediction");
}

}  // namespace

double accuracy(std::span<const double> predicted, std::span<const std::uint8_t> observed,
                double threshold) {
  check(predicted, observed);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    hits += (predicted[i] >= threshold) == (observed[i] != 0);
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double auc(std::span<const double> predicted, std::span<const std::uint8_t> observed) {
  check(predicted, observed);
  std::vector<std::size_t> order(predicted.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return predicted[a] < predicted[b]; });

  // Sum of positive ranks with ties averaged.
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && predicted[order[j + 1]] == predicted[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (observed[order[k]]) {
        rank_sum += rank;
        ++pos;
      }
    }
    i = j + 1;
  }
  const std::size_t neg = predicted.size() - pos;
  if (pos == 0 || neg == 0) throw ConfigError("AUC is undefined when only one class is present");
  const double np = static_cast<double>(pos), nn = static_cast<double>(neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double rmse(std::span<const double> predicted, std::span<const std::uint8_t> observed) {
  check(predicted, observed);
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - observed[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(predicted.size()));
}

MetricReport evaluate(std::span<const double> predicted, std::span<const std::uint8_t> observed,
                      double threshold) {
  return {accuracy(predicted, observed, threshold), auc(predicted, observed),
          rmse(predicted, observed), predicted.size(), threshold};
}

}  // namespace bkt
