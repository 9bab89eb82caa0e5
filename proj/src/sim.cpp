#include "bkt/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "bkt/csv.hpp"
#include "bkt/error.hpp"
#include "bkt/rng.hpp"

namespace bkt {

namespace {

void validate_params(const BktParams& p) {
  for (Param q : kAllParams) {
    const double v = p.get(q);
    if (!(v >= 0.0 && v <= upper_bound(q))) {
      throw ConfigError("simulation parameter " + std::string(param_name(q)) + " out of range");
    }
  }
}

}  // namespace

SimConfig SimConfig::standard(std::size_t n_students, std::size_t n_problems, std::size_t n_kcs,
                              double retention, const BktParams& params, std::uint64_t seed) {
  SimConfig c;
  c.groups.push_back({"", n_students, {params}});
  c.n_problems = n_problems;
  c.n_kcs = n_kcs;
  c.retention = retention;
  c.seed = seed;
  return c;
}

void SimConfig::validate() const {
  if (groups.empty()) throw ConfigError("simulation needs at least one student group");
  if (n_problems == 0) throw ConfigError("n_problems must be positive");
  if (n_kcs == 0) throw ConfigError("n_kcs must be positive");
  if (!(retention > 0.0 && retention <= 1.0)) throw ConfigError("retention fraction must lie in (0, 1]");
  if (kept_per_student() == 0) throw ConfigError("retention keeps no problems per student");
  for (const auto& g : groups) {
    if (g.n_students == 0) throw ConfigError("group '" + g.label + "' has no students");
    if (g.params.size() != 1 && g.params.size() != n_kcs) {
      throw ConfigError("group '" + g.label + "' needs 1 or n_kcs parameter sets");
    }
    for (const auto& p : g.params) validate_params(p);
  }
  if (groups.size() > 1) {
    for (const auto& g : groups) {
      if (g.label.empty()) throw ConfigError("every group needs a label when more than one is given");
    }
  }
}

std::size_t SimConfig::kept_per_student() const {
  return static_cast<std::size_t>(std::floor(retention * static_cast<double>(n_problems) + 1e-9));
}

SimulatedData simulate(const SimConfig& config) {
  config.validate();
  Rng rng = make_rng(config.seed);
  const std::size_t kept = config.kept_per_student();
  const bool grouped = config.groups.size() > 1 || !config.groups.front().label.empty();
  const std::int64_t base = *parse_timestamp("2024-01-01 00:00:00");
  constexpr std::int64_t kMinute = 60LL * 1000000LL;

  SimulatedData out;
  out.table.order_kind = OrderKind::timestamp;
  std::vector<std::size_t> pick(config.n_problems);

  for (std::size_t k = 0; k < config.n_kcs; ++k) {
    const std::string kc = "kc_" + std::to_string(k);
    std::size_t student = 0;
    for (const auto& group : config.groups) {
      const BktParams& p = group.params.size() == 1 ? group.params[0] : group.params[k];
      for (std::size_t j = 0; j < group.n_students; ++j, ++student) {
        SimulatedData::Latent lat;
        lat.kc = kc;
        lat.student = "stu_" + std::to_string(student);
        lat.known.resize(config.n_problems);
        lat.responses.resize(config.n_problems);
        bool known = bernoulli(rng, p.pi_know);
        for (std::size_t t = 0; t < config.n_problems; ++t) {
          lat.known[t] = known;
          lat.responses[t] = bernoulli(rng, known ? 1.0 - p.slip : p.guess);
          known = known ? !bernoulli(rng, p.forget) : bernoulli(rng, p.learn);
        }
        // Partial Fisher-Yates for the retained subset, then restore order.
        std::iota(pick.begin(), pick.end(), 0);
        if (kept < config.n_problems) {
          for (std::size_t i = 0; i < kept; ++i) {
            const std::size_t remaining = config.n_problems - i;
            auto r = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(remaining));
            std::swap(pick[i], pick[i + std::min(r, remaining - 1)]);
          }
          std::sort(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(kept));
        }
        for (std::size_t i = 0; i < kept; ++i) {
          const std::size_t t = pick[i];
          InteractionRecord rec;
          rec.student = lat.student;
          rec.problem = "prob_" + std::to_string(k * config.n_problems + t);
          rec.kc = kc;
          rec.correct = lat.responses[t];
          rec.order_key = base + static_cast<std::int64_t>(k * config.n_problems + t) * kMinute;
          if (grouped) rec.group = group.label;
          rec.row = out.table.records.size() + 1;
          out.table.records.push_back(std::move(rec));
        }
        out.latent.push_back(std::move(lat));
      }
    }
  }
  return out;
}

void write_latent_csv(std::ostream& out, const SimulatedData& data) {
  csv::write_row(out, {"kc_id", "student_id", "opportunity", "known", "correct"});
  for (const auto& lat : data.latent) {
    for (std::size_t t = 0; t < lat.known.size(); ++t) {
      csv::write_row(out, {lat.kc, lat.student, std::to_string(t), std::to_string(lat.known[t]),
                           std::to_string(lat.responses[t])});
    }
  }
}

ColumnMapping simulated_mapping(bool grouped) {
  ColumnMapping m;
  if (grouped) m.group_id = "group_id";
  return m;
}

}  // namespace bkt
