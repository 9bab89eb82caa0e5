#include <doctest.h>

#include "bkt/contrast.hpp"
#include "bkt/error.hpp"
#include "bkt/rng.hpp"

using namespace bkt;
using doctest::Approx;

namespace {

FactorialDesign three_by_three() {
  FactorialDesign d;
  d.factors = {"spacing", "color"};
  for (const char* s : {"NS", "CS", "IS"}) {
    for (const char* c : {"NC", "CC", "IC"}) {
      d.conditions[std::string(s) + c] = {{"spacing", s}, {"color", c}};
    }
  }
  return d;
}

}  // namespace

TEST_CASE("identical conditions give the common value") {
  const auto design = three_by_three();
  const std::vector<double> common{0.1, 0.2, 0.3, 0.4};
  std::map<std::string, std::vector<double>> draws;
  for (const auto& [c, _] : design.conditions) draws[c] = common;
  const Marginals m = marginal_effects(draws, design, "color");
  CHECK(m.size() == 3);
  for (const auto& [lv, v] : m) CHECK(v == common);

  const auto res = contrast_vs_neutral(m, "NC", 0.95);
  REQUIRE(res.size() == 2);
  for (const auto& r : res) {
    CHECK(r.mean == 0.0);
    CHECK(r.lo == 0.0);
    CHECK(r.hi == 0.0);
    CHECK_FALSE(r.excludes_zero);
  }
}

TEST_CASE("marginals average over the complementary factor") {
  const auto design = three_by_three();
  // Spacing level means 0.1, 0.2, 0.3 built from uneven per-color values.
  const std::map<std::string, double> base{{"NS", 0.1}, {"CS", 0.2}, {"IS", 0.3}};
  const std::map<std::string, double> offset{{"NC", -0.05}, {"CC", 0.0}, {"IC", 0.05}};
  std::map<std::string, std::vector<double>> draws;
  for (const auto& [c, lv] : design.conditions) {
    const double v = base.at(lv.at("spacing")) + offset.at(lv.at("color"));
    draws[c] = {v, v, v};
  }
  const Marginals m = marginal_effects(draws, design, "spacing");
  for (int i = 0; i < 3; ++i) {
    CHECK(m.at("NS")[i] == Approx(0.1).epsilon(1e-12));
    CHECK(m.at("CS")[i] == Approx(0.2).epsilon(1e-12));
    CHECK(m.at("IS")[i] == Approx(0.3).epsilon(1e-12));
  }
}

TEST_CASE("single-factor marginals are the condition's own draws") {
  FactorialDesign d;
  d.factors = {"f"};
  d.conditions = {{"a", {{"f", "a"}}}, {"b", {{"f", "b"}}}, {"c", {{"f", "c"}}}};
  const std::map<std::string, std::vector<double>> draws{
      {"a", {1, 2}}, {"b", {3, 4}}, {"c", {5, 6}}};
  const Marginals m = marginal_effects(draws, d, "f");
  CHECK(m.at("b") == std::vector<double>{3, 4});
}

TEST_CASE("draw counts are truncated to the shortest condition") {
  FactorialDesign d;
  d.factors = {"f"};
  d.conditions = {{"a", {{"f", "x"}}}, {"b", {{"f", "x"}}}};
  const std::map<std::string, std::vector<double>> draws{{"a", {1, 2, 3}}, {"b", {3, 4}}};
  CHECK(marginal_effects(draws, d, "f").at("x") == std::vector<double>{2, 3});
}

TEST_CASE("contrasts scale linearly and detect clear effects") {
  Rng rng = make_rng(6);
  Marginals m;
  for (int i = 0; i < 4000; ++i) {
    m["neutral"].push_back(0.2 + 0.01 * std_normal(rng));
    m["shifted"].push_back(0.35 + 0.01 * std_normal(rng));
    m["same"].push_back(0.2 + 0.01 * std_normal(rng));
  }
  const auto r = contrast_vs_neutral(m, "neutral", 0.95, "guess", "f");
  REQUIRE(r.size() == 2);
  const auto& same = r[0].level == "same" ? r[0] : r[1];
  const auto& shifted = r[0].level == "shifted" ? r[0] : r[1];
  CHECK(shifted.excludes_zero);
  CHECK(shifted.mean == Approx(0.15).epsilon(0.02));
  CHECK_FALSE(same.excludes_zero);
  CHECK(shifted.lo <= shifted.median);
  CHECK(shifted.median <= shifted.hi);

  Marginals scaled = m;
  for (auto& [k, v] : scaled) {
    for (auto& x : v) x *= 3.0;
  }
  const auto rs = contrast_vs_neutral(scaled, "neutral", 0.95);
  for (std::size_t i = 0; i < r.size(); ++i) {
    CHECK(rs[i].mean == Approx(3.0 * r[i].mean).epsilon(1e-12));
    CHECK(rs[i].lo == Approx(3.0 * r[i].lo).epsilon(1e-12));
    CHECK(rs[i].hi == Approx(3.0 * r[i].hi).epsilon(1e-12));
  }
}

TEST_CASE("contrast errors") {
  const auto design = three_by_three();
  std::map<std::string, std::vector<double>> draws{{"XX", {1.0}}};
  CHECK_THROWS_AS(marginal_effects(draws, design, "color"), ConfigError);
  const Marginals m{{"a", {1.0}}, {"b", {2.0}}};
  CHECK_THROWS_AS(contrast_vs_neutral(m, "c", 0.95), ConfigError);
  FactorialDesign broken = design;
  broken.conditions["NSNC"].erase("color");
  CHECK_THROWS_AS(broken.validate(), ConfigError);
}
