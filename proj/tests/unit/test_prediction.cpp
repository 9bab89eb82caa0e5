#include <doctest.h>

#include <cmath>
#include <sstream>

#include "../oracle.hpp"
#include "bkt/error.hpp"
#include "bkt/prediction.hpp"
#include "bkt/sim.hpp"

using namespace bkt;
using doctest::Approx;

namespace {

FitSet point_fit(const std::string& kc, const BktParams& p) {
  KcFit f;
  f.params = p;
  return {{kc, f}};
}

SequenceSet small_data(std::uint64_t seed, std::size_t students = 8, std::size_t problems = 6) {
  return build_sequences(
      simulate(SimConfig::standard(students, problems, 1, 1.0, {0.2, 0.05, 0.2, 0.1, 0.4}, seed))
          .table);
}

// Draws of a standard model whose unconstrained coordinates are skewed.
FitSet skewed_fit(const std::string& kc, std::size_t n, std::uint64_t seed) {
  KcFit f;
  f.model = std::make_shared<const BktModel>(ModelLayout{}, ModelSpec{}, PriorSpec{});
  Rng rng = make_rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> u(5);
    for (auto& x : u) x = -1.0 + 1.5 * std_normal(rng);
    f.points.push_back(u);
  }
  return {{kc, f}};
}

}  // namespace

TEST_CASE("filtered point predictions start at pi_know") {
  const auto data = small_data(1);
  const BktParams p{0.2, 0.05, 0.2, 0.1, 0.4};
  const auto recs = predict_point(point_fit("kc_0", p), data, PredictMode::filtered);
  CHECK(recs.size() == data.records());
  for (const auto& r : recs) {
    if (r.opportunity == 1) {
      CHECK(r.mastery.mean == p.pi_know);
      CHECK(r.correctness.mean == Approx(predict_correct(p.pi_know, p)));
    }
    CHECK(r.source == PredictSource::point);
    CHECK(r.mastery.sd == 0.0);
  }
}

TEST_CASE("smoothed predictions match enumeration") {
  const auto data = small_data(2, 3, 5);
  const BktParams p{0.3, 0.1, 0.2, 0.15, 0.35};
  const auto recs = predict_point(point_fit("kc_0", p), data, PredictMode::smoothed);
  std::size_t i = 0;
  for (const auto& seq : data.kcs[0].sequences) {
    const auto ref = oracle::enumerate(seq.responses, p);
    for (std::size_t t = 0; t < seq.size(); ++t, ++i) {
      CHECK(std::abs(recs[i].mastery.mean - ref.smoothed[t]) < 1e-10);
      const double pc = ref.smoothed[t] * (1 - p.slip) + (1 - ref.smoothed[t]) * p.guess;
      CHECK(recs[i].correctness.mean == Approx(pc).epsilon(1e-12));
    }
  }
}

TEST_CASE("filtered output ignores later responses") {
  auto data = small_data(3, 1, 10);
  const BktParams p{0.2, 0.05, 0.2, 0.1, 0.4};
  const auto before = predict_point(point_fit("kc_0", p), data, PredictMode::filtered);
  auto& y = data.kcs[0].sequences[0].responses;
  for (std::size_t t = 6; t < y.size(); ++t) y[t] = 1 - y[t];
  const auto after = predict_point(point_fit("kc_0", p), data, PredictMode::filtered);
  for (std::size_t t = 0; t <= 6; ++t) CHECK(before[t].mastery.mean == after[t].mastery.mean);
}

TEST_CASE("identical draws collapse to the point prediction") {
  const auto data = small_data(4);
  KcFit f;
  f.model = std::make_shared<const BktModel>(ModelLayout{}, ModelSpec{}, PriorSpec{});
  const std::vector<double> u{-1.0, -3.0, -0.5, -1.2, 0.3};
  f.points.assign(50, u);
  const FitSet fits{{"kc_0", f}};
  const auto post = predict_posterior(fits, data, PredictMode::filtered);
  const auto point = predict_point(fits, data, PredictMode::filtered);
  for (std::size_t i = 0; i < post.size(); ++i) {
    CHECK(post[i].mastery.sd == 0.0);
    CHECK(post[i].correctness.sd == 0.0);
    CHECK(post[i].correctness.mean == Approx(point[i].correctness.mean).epsilon(1e-14));
  }
}

TEST_CASE("averaging predictions differs from predicting at averaged parameters") {
  const auto data = small_data(5);
  const FitSet fits = skewed_fit("kc_0", 400, 6);
  const auto post = predict_posterior(fits, data, PredictMode::filtered);
  const auto point = predict_point(fits, data, PredictMode::filtered);
  double worst = 0.0;
  for (std::size_t i = 0; i < post.size(); ++i) {
    worst = std::max(worst, std::abs(post[i].correctness.mean - point[i].correctness.mean));
  }
  CHECK(worst > 1e-3);
}

TEST_CASE("correctness stays inside the draws' guess and slip bounds") {
  const auto data = small_data(7);
  const FitSet fits = skewed_fit("kc_0", 200, 8);
  double lo = 1.0, hi = 0.0;
  const auto params = fits.at("kc_0").params_for(data.kcs[0].sequences[0]);
  for (const auto& p : params) {
    lo = std::min(lo, p.guess);
    hi = std::max(hi, 1.0 - p.slip);
  }
  for (PredictMode mode : {PredictMode::filtered, PredictMode::smoothed}) {
    for (const auto& r : predict_posterior(fits, data, mode)) {
      CHECK(r.correctness.lo >= lo);
      CHECK(r.correctness.hi <= hi);
      CHECK(r.mastery.lo >= 0.0);
      CHECK(r.mastery.hi <= 1.0);
    }
  }
}

TEST_CASE("missing KCs are listed") {
  const auto data = build_sequences(
      simulate(SimConfig::standard(3, 4, 3, 1.0, {0.2, 0.05, 0.2, 0.1, 0.4}, 9)).table);
  try {
    predict_point(point_fit("kc_1", {0.2, 0.05, 0.2, 0.1, 0.4}), data, PredictMode::filtered);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("kc_0") != std::string::npos);
    CHECK(msg.find("kc_2") != std::string::npos);
    CHECK(msg.find("kc_1") == std::string::npos);
  }
}

TEST_CASE("raw per-draw export") {
  const auto data = small_data(10, 2, 3);
  const FitSet fits = skewed_fit("kc_0", 4, 1);
  std::ostringstream raw;
  predict_posterior(fits, data, PredictMode::filtered, 0.9, &raw);
  std::size_t lines = 0;
  for (char c : raw.str()) lines += c == '\n';
  CHECK(lines == 1 + 4 * data.records());
}

TEST_CASE("trajectory table") {
  SUBCASE("one problem, one row") {
    const auto data = small_data(11, 5, 1);
    const auto recs =
        predict_point(point_fit("kc_0", {0.2, 0.05, 0.2, 0.1, 0.4}), data, PredictMode::filtered);
    const auto rows = emit_trajectory_data(recs, TrajectoryGrouping::per_problem);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].n == 5);
  }
  SUBCASE("calibrated predictions fall inside the band") {
    const BktParams truth{0.1, 0.02, 0.15, 0.08, 0.3};
    const auto data =
        build_sequences(simulate(SimConfig::standard(2000, 30, 1, 1.0, truth, 12)).table);
    const auto recs = predict_point(point_fit("kc_0", truth), data, PredictMode::filtered);
    const auto rows = emit_trajectory_data(recs, TrajectoryGrouping::per_problem);
    REQUIRE(rows.size() == 30);
    std::size_t inside = 0;
    for (const auto& r : rows) inside += r.observed >= r.lo && r.observed <= r.hi;
    CHECK(inside >= 27);
    CHECK(emit_trajectory_data(recs, TrajectoryGrouping::per_opportunity).size() == 30);
  }
  CHECK_THROWS_AS(emit_trajectory_data({}, TrajectoryGrouping::per_problem), ConfigError);
}
