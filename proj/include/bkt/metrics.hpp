#ifndef BKT_METRICS_HPP
#define BKT_METRICS_HPP

#include <cstdint>
#include <span>

namespace bkt {

/// Fraction of rows where (p >= threshold) matches the label.
double accuracy(std::span<const double> predicted, std::span<const std::uint8_t> observed,
                double threshold = 0.5);
/// Mann-Whitney AUC with half credit for ties. Needs both classes.
double auc(std::span<const double> predicted, std::span<const std::uint8_t> observed);
double rmse(std::span<const double> predicted, std::span<const std::uint8_t> observed);

struct MetricReport {
  double accuracy = 0.0;
  double auc = 0.0;
  double rmse = 0.0;
  std::size_t n = 0;
  double threshold = 0.5;
};

MetricReport evaluate(std::span<const double> predicted, std::span<const std::uint8_t> observed,
                      double threshold = 0.5);

}  // namespace bkt

#endif  // BKT_METRICS_HPP
