#ifndef BKT_PREDICTION_HPP
#define BKT_PREDICTION_HPP

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bkt/data.hpp"
#include "bkt/model.hpp"

namespace bkt {

enum class PredictMode { filtered, smoothed };
enum class PredictSource { point, posterior };

std::string_view mode_name(PredictMode m) noexcept;
std::string_view source_name(PredictSource s) noexcept;

/// Fitted parameters of one KC: unconstrained points under `model`
/// (posterior draws, or a single optimum), or a direct parameter set.
struct KcFit {
  std::shared_ptr<const BktModel> model;
  std::vector<std::vector<double>> points;
  std::optional<BktParams> params;

  /// Constrained parameters for `seq`, one entry per point.
  std::vector<BktParams> params_for(const Sequence& seq) const;
};

using FitSet = std::map<std::string, KcFit>;  // kc -> fit

struct StatSummary {
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct PredictionRecord {
  std::string kc;
  std::string student;
  std::string problem;
  std::size_t opportunity = 1;  // 1-based position within the sequence
  std::uint8_t correct = 0;
  PredictMode mode = PredictMode::filtered;
  PredictSource source = PredictSource::point;
  StatSummary mastery;      // P(L_t)
  StatSummary correctness;  // P(C_t)
};

/// Predictions at one parameter set per sequence, the constrained-scale
/// mean over the fit's points.
std::vector<PredictionRecord> predict_point(const FitSet& fits, const SequenceSet& data,
                                            PredictMode mode, NumericalEvents* events = nullptr);

/// Predictions under every point separately, summarized per interaction.
/// When `raw` is given, per-draw values are streamed to it as CSV.
std::vector<PredictionRecord> predict_posterior(const FitSet& fits, const SequenceSet& data,
                                                PredictMode mode, double level = 0.95,
                                                std::ostream* raw = nullptr,
                                                NumericalEvents* events = nullptr);

/// Mastery and correctness under one parameter set.
void predict_sequence(const Sequence& seq, const BktParams& params, PredictMode mode,
                      std::vector<double>& mastery, std::vector<double>& correctness,
                      NumericalEvents* events = nullptr);

void write_predictions(std::ostream& out, const std::vector<PredictionRecord>& records);

enum class TrajectoryGrouping { per_problem, per_opportunity };

struct TrajectoryRow {
  std::string key;
  std::size_t n = 0;
  double observed = 0.0;
  double predicted = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Observed vs predicted proportion correct per cell. The band is a normal
/// approximation adding Bernoulli noise to parameter uncertainty.
std::vector<TrajectoryRow> emit_trajectory_data(const std::vector<PredictionRecord>& predictions,
                                                TrajectoryGrouping grouping, double level = 0.95);

void write_trajectory(std::ostream& out, const std::vector<TrajectoryRow>& rows);

}  // namespace bkt

#endif  // BKT_PREDICTION_HPP
