#include "bkt/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <boost/math/distributions/normal.hpp>

#include "bkt/csv.hpp"
#include "bkt/error.hpp"
#include "bkt/summary.hpp"

namespace bkt {

std::string_view mode_name(PredictMode m) noexcept {
  return m == PredictMode::filtered ? "filtered" : "smoothed";
}

std::string_view source_name(PredictSource s) noexcept {
  return s == PredictSource::point ? "point" : "posterior";
}

std::vector<BktParams> KcFit::params_for(const Sequence& seq) const {
  if (params) return {*params};
  if (!model) throw ConfigError("fit for KC '" + seq.kc + "' has no parameters");
  if (points.empty()) throw ConfigError("fit for KC '" + seq.kc + "' has no draws");
  const Unit unit = model->unit_for(seq);
  std::vector<BktParams> out;
  out.reserve(points.size());
  for (const auto& u : points) out.push_back(model->params_for(u, unit));
  return out;
}

namespace {

void check_coverage(const FitSet& fits, const SequenceSet& data) {
  std::string missing;
  for (const auto& kc : data.kcs) {
    if (!fits.count(kc.kc)) missing += (missing.empty() ? "" : ", ") + kc.kc;
  }
  if (!missing.empty()) throw ConfigError("KCs absent from the fit: " + missing);
}

BktParams mean_params(const std::vector<BktParams>& ps) {
  std::array<double, kNumParams> acc{};
  for (const auto& p : ps) {
    const auto a = p.to_array();
    for (std::size_t k = 0; k < kNumParams; ++k) acc[k] += a[k];
  }
  for (auto& v : acc) v /= static_cast<double>(ps.size());
  return BktParams::from_array(acc);
}

StatSummary constant(double v) { return {v, 0.0, v, v, v}; }

StatSummary summarize_values(std::vector<double>& v, double level) {
  StatSummary s;
  const double n = static_cast<double>(v.size());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::sort(v.begin(), v.end());
  if (v.front() == v.back()) s.sd = 0.0;
  const double tail = 0.5 * (1.0 - level);
  s.median = quantile_sorted(v, 0.5);
  s.lo = quantile_sorted(v, tail);
  s.hi = quantile_sorted(v, 1.0 - tail);
  return s;
}

PredictionRecord base_record(const Sequence& seq, std::size_t t, PredictMode mode,
                             PredictSource source) {
  PredictionRecord r;
  r.kc = seq.kc;
  r.student = seq.student;
  r.problem = seq.problems[t];
  r.opportunity = t + 1;
  r.correct = seq.responses[t];
  r.mode = mode;
  r.source = source;
  return r;
}

}  // namespace

void predict_sequence(const Sequence& seq, const BktParams& params, PredictMode mode,
                      std::vector<double>& mastery, std::vector<double>& correctness,
                      NumericalEvents* events) {
  const std::size_t n = seq.size();
  mastery.resize(n);
  correctness.resize(n);
  if (mode == PredictMode::filtered) {
    const auto steps = filter_sequence(seq.responses, params, events);
    for (std::size_t t = 0; t < n; ++t) {
      mastery[t] = steps[t].prior_mastery;
      correctness[t] = steps[t].predicted_correct;
    }
  } else {
    mastery = smooth_sequence(seq.responses, params);
    for (std::size_t t = 0; t < n; ++t) {
      correctness[t] = mastery[t] * (1.0 - params.slip) + (1.0 - mastery[t]) * params.guess;
    }
  }
}

std::vector<PredictionRecord> predict_point(const FitSet& fits, const SequenceSet& data,
                                            PredictMode mode, NumericalEvents* events) {
  check_coverage(fits, data);
  std::vector<PredictionRecord> out;
  out.reserve(data.records());
  std::vector<double> pl, pc;
  for (const auto& kc : data.kcs) {
    const KcFit& fit = fits.at(kc.kc);
    for (const auto& seq : kc.sequences) {
      predict_sequence(seq, mean_params(fit.params_for(seq)), mode, pl, pc, events);
      for (std::size_t t = 0; t < seq.size(); ++t) {
        auto r = base_record(seq, t, mode, PredictSource::point);
        r.mastery = constant(pl[t]);
        r.correctness = constant(pc[t]);
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

std::vector<PredictionRecord> predict_posterior(const FitSet& fits, const SequenceSet& data,
                                                PredictMode mode, double level,
                                                std::ostream* raw, NumericalEvents* events) {
  check_coverage(fits, data);
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("credible level must lie in (0, 1)");
  if (raw) *raw << "kc_id,student_id,problem_id,opportunity,draw,pl,pc\n";
  std::vector<PredictionRecord> out;
  out.reserve(data.records());
  std::vector<double> pl, pc;
  for (const auto& kc : data.kcs) {
    const KcFit& fit = fits.at(kc.kc);
    for (const auto& seq : kc.sequences) {
      const auto params = fit.params_for(seq);
      const std::size_t n = seq.size();
      std::vector<std::vector<double>> pl_draws(n), pc_draws(n);
      for (std::size_t d = 0; d < params.size(); ++d) {
        predict_sequence(seq, params[d], mode, pl, pc, events);
        for (std::size_t t = 0; t < n; ++t) {
          pl_draws[t].push_back(pl[t]);
          pc_draws[t].push_back(pc[t]);
          if (raw) {
            csv::write_row(*raw, {seq.kc, seq.student, seq.problems[t], std::to_string(t + 1),
                                  std::to_string(d), csv::format_double(pl[t]),
                                  csv::format_double(pc[t])});
          }
        }
      }
      for (std::size_t t = 0; t < n; ++t) {
        auto r = base_record(seq, t, mode, PredictSource::posterior);
        r.mastery = summarize_values(pl_draws[t], level);
        r.correctness = summarize_values(pc_draws[t], level);
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

void write_predictions(std::ostream& out, const std::vector<PredictionRecord>& records) {
  out << "kc_id,student_id,problem_id,correct,mode,source,pl_mean,pl_sd,pl_median,pl_lo,pl_hi,"
         "pc_mean,pc_sd,pc_median,pc_lo,pc_hi\n";
  for (const auto& r : records) {
    const auto& m = r.mastery;
    const auto& c = r.correctness;
    csv::write_row(out, {r.kc, r.student, r.problem, std::to_string(r.correct),
                         std::string(mode_name(r.mode)), std::string(source_name(r.source)),
                         csv::format_double(m.mean), csv::format_double(m.sd),
                         csv::format_double(m.median), csv::format_double(m.lo),
                         csv::format_double(m.hi), csv::format_double(c.mean),
                         csv::format_double(c.sd), csv::format_double(c.median),
                         csv::format_double(c.lo), csv::format_double(c.hi)});
  }
}

std::vector<TrajectoryRow> emit_trajectory_data(const std::vector<PredictionRecord>& predictions,
                                                TrajectoryGrouping grouping, double level) {
  if (predictions.empty()) throw ConfigError("no predictions to aggregate");
  struct Cell {
    std::size_t n = 0;
    double correct = 0.0, predicted = 0.0, bernoulli = 0.0, param_sd = 0.0;
  };
  std::vector<std::string> order;
  std::map<std::string, Cell> cells;
  std::map<std::size_t, Cell> by_opportunity;
  for (const auto& r : predictions) {
    Cell* c;
    if (grouping == TrajectoryGrouping::per_problem) {
      auto [it, inserted] = cells.try_emplace(r.problem);
      if (inserted) order.push_back(r.problem);
      c = &it->second;
    } else {
      c = &by_opportunity[r.opportunity];
    }
    const double p = r.correctness.mean;
    ++c->n;
    c->correct += r.correct;
    c->predicted += p;
    c->bernoulli += p * (1.0 - p);
    c->param_sd += r.correctness.sd;
  }

  const double z =
      boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + 0.5 * level);
  auto row = [z](std::string key, const Cell& c) {
    const double n = static_cast<double>(c.n);
    TrajectoryRow r{std::move(key), c.n, c.correct / n, c.predicted / n, 0.0, 0.0};
    const double param = c.param_sd / n;
    const double half = z * std::sqrt(c.bernoulli / (n * n) + param * param);
    r.lo = std::max(0.0, r.predicted - half);
    r.hi = std::min(1.0, r.predicted + half);
    return r;
  };
  std::vector<TrajectoryRow> out;
  if (grouping == TrajectoryGrouping::per_problem) {
    for (const auto& key : order) out.push_back(row(key, cells.at(key)));
  } else {
    for (const auto& [t, c] : by_opportunity) out.push_back(row(std::to_string(t), c));
  }
  return out;
}

void write_trajectory(std::ostream& out, const std::vector<TrajectoryRow>& rows) {
  out << "key,n,observed,predicted,lo,hi\n";
  for (const auto& r : rows) {
    csv::write_row(out, {r.key, std::to_string(r.n), csv::format_double(r.observed),
                         csv::format_double(r.predicted), csv::format_double(r.lo),
                         csv::format_double(r.hi)});
  }
}

}  // namespace bkt
