#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "bkt/error.hpp"
#include "bkt/sim.hpp"

using namespace bkt;

TEST_CASE("retention keeps an ordered subset per student") {
  const auto sim = simulate(SimConfig::standard(50, 30, 1, 0.8, {0.04, 0.01, 0.1, 0.05, 0.4}, 1234));
  CHECK(sim.table.records.size() == 50 * 24);
  std::map<std::string, std::vector<int>> idx;
  for (const auto& r : sim.table.records) idx[r.student].push_back(std::stoi(r.problem.substr(5)));
  for (const auto& [s, v] : idx) {
    CHECK(v.size() == 24);
    CHECK(std::is_sorted(v.begin(), v.end()));
    CHECK(std::adjacent_find(v.begin(), v.end()) == v.end());
    CHECK(v.front() >= 0);
    CHECK(v.back() < 30);
  }
}

TEST_CASE("simulation is deterministic") {
  const auto cfg = SimConfig::standard(20, 10, 2, 0.5, {0.2, 0.1, 0.2, 0.1, 0.5}, 42);
  std::ostringstream a, b;
  write_interactions(a, simulate(cfg).table, simulated_mapping(false));
  write_interactions(b, simulate(cfg).table, simulated_mapping(false));
  CHECK(a.str() == b.str());
}

TEST_CASE("certain mastery gives all-correct responses") {
  const auto sim = simulate(SimConfig::standard(10, 20, 1, 1.0, {0.3, 0.0, 0.2, 0.0, 1.0}, 9));
  for (const auto& r : sim.table.records) CHECK(r.correct == 1);
}

TEST_CASE("learn rate is recovered from transitions") {
  const double learn = 0.3;
  const auto sim = simulate(SimConfig::standard(50'000, 2, 1, 1.0, {learn, 0.0, 0.2, 0.1, 0.0}, 17));
  std::size_t from0 = 0, to1 = 0;
  for (const auto& l : sim.latent) {
    if (l.known[0] == 0) {
      ++from0;
      to1 += l.known[1];
    }
  }
  const double n = static_cast<double>(from0);
  const double rate = static_cast<double>(to1) / n;
  CHECK(std::abs(rate - learn) < 3.0 * std::sqrt(learn * (1 - learn) / n));
}

TEST_CASE("slip rate matches among known steps") {
  const double slip = 0.07;
  const auto sim = simulate(SimConfig::standard(2'000, 20, 1, 1.0, {0.3, 0.02, 0.2, slip, 0.5}, 23));
  std::size_t known = 0, wrong = 0;
  for (const auto& l : sim.latent) {
    for (std::size_t t = 0; t < l.known.size(); ++t) {
      if (l.known[t]) {
        ++known;
        wrong += l.responses[t] == 0;
      }
    }
  }
  REQUIRE(known >= 10'000);
  const double n = static_cast<double>(known);
  CHECK(std::abs(wrong / n - slip) < 3.0 * std::sqrt(slip * (1 - slip) / n));
}

TEST_CASE("grouped simulation labels students") {
  SimConfig cfg;
  cfg.n_problems = 5;
  cfg.groups = {{"a", 3, {{0.2, 0.1, 0.2, 0.1, 0.5}}}, {"b", 2, {{0.2, 0.1, 0.4, 0.1, 0.5}}}};
  const auto sim = simulate(cfg);
  CHECK(sim.table.records.size() == 25);
  CHECK(sim.table.records.front().group == "a");
  CHECK(sim.table.records.back().group == "b");
}

TEST_CASE("invalid configurations") {
  auto cfg = SimConfig::standard(10, 10, 1, 1.5, {0.2, 0.1, 0.2, 0.1, 0.5}, 1);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.retention = 0.0;
  CHECK_THROWS_AS(simulate(cfg), ConfigError);
}
