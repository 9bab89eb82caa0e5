#include <doctest.h>

#include <cmath>

#include "bkt/error.hpp"
#include "bkt/metrics.hpp"
#include "bkt/rng.hpp"

using namespace bkt;

namespace {

using Labels = std::vector<std::uint8_t>;

double brute_force_auc(const std::vector<double>& p, const Labels& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (y[j]) continue;
      pairs += 1.0;
      wins += p[i] > p[j] ? 1.0 : (p[i] == p[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

}  // namespace

TEST_CASE("accuracy hand cases") {
  CHECK(accuracy(std::vector<double>{0.9, 0.1}, Labels{1, 0}) == 1.0);
  CHECK(accuracy(std::vector<double>{0.5}, Labels{1}) == 1.0);
  CHECK(accuracy(std::vector<double>{0.49}, Labels{1}) == 0.0);
  CHECK_THROWS_AS(accuracy(std::vector<double>{0.5}, Labels{1, 0}), ConfigError);
}

TEST_CASE("rmse hand cases") {
  CHECK(rmse(std::vector<double>{1.0, 0.0}, Labels{1, 0}) == 0.0);
  CHECK(rmse(std::vector<double>{0.5, 0.5}, Labels{1, 0}) == 0.5);
  CHECK_THROWS_AS(rmse(std::vector<double>{}, Labels{}), ConfigError);
}

TEST_CASE("auc edge cases") {
  CHECK(auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, Labels{0, 0, 1, 1}) == 1.0);
  CHECK(auc(std::vector<double>{0.3, 0.3, 0.3}, Labels{0, 1, 1}) == 0.5);
  CHECK_THROWS_AS(auc(std::vector<double>{0.3, 0.4}, Labels{1, 1}), ConfigError);
}

TEST_CASE("auc matches pairwise counting with ties") {
  Rng rng = make_rng(2);
  std::vector<double> p(1000);
  Labels y(1000);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::round(uniform01(rng) * 50.0) / 50.0;  // plenty of ties
    y[i] = bernoulli(rng, 0.3 + 0.4 * p[i]);
  }
  CHECK(std::abs(auc(p, y) - brute_force_auc(p, y)) < 1e-12);
}

TEST_CASE("auc invariances") {
  Rng rng = make_rng(3);
  std::vector<double> p(300), logit(300), flipped(300);
  Labels y(300), y_flip(300);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = uniform(rng, 0.01, 0.99);
    y[i] = bernoulli(rng, p[i]);
    logit[i] = 3.0 * std::log(p[i] / (1.0 - p[i])) + 7.0;
    flipped[i] = 1.0 - p[i];
    y_flip[i] = 1 - y[i];
  }
  CHECK(auc(logit, y) == auc(p, y));
  CHECK(std::abs(auc(flipped, y_flip) - auc(p, y)) < 1e-12);
}

TEST_CASE("zero error implies perfect accuracy") {
  const std::vector<double> p{1, 0, 1, 1};
  const Labels y{1, 0, 1, 1};
  const MetricReport r = evaluate(p, y);
  CHECK(r.rmse == 0.0);
  CHECK(r.accuracy == 1.0);
  CHECK(r.n == 4);
}
