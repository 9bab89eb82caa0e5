#include "bkt/model.hpp"

#include <cmath>
#include <numbers>
#include <unordered_map>

#include "bkt/error.hpp"
#include "bkt/numeric.hpp"

namespace bkt {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double normal_lpdf(double x, const NormalPrior& p, double& dx) noexcept {
  const double r = (x - p.mu) / p.sd;
  dx = -r / p.sd;
  return -0.5 * r * r - std::log(p.sd) - kHalfLog2Pi;
}

}  // namespace

std::string_view variant_name(Variant v) noexcept {
  switch (v) {
    case Variant::standard: return "standard";
    case Variant::multi: return "multi";
    case Variant::hierarchical: return "hierarchical";
  }
  return "";
}

std::string_view pi_mode_name(PiMode m) noexcept {
  switch (m) {
    case PiMode::shared: return "shared";
    case PiMode::per_student: return "per_student";
    case PiMode::covariate: return "covariate";
  }
  return "";
}

Variant parse_variant(std::string_view s) {
  if (s == "standard") return Variant::standard;
  if (s == "multi") return Variant::multi;
  if (s == "hierarchical") return Variant::hierarchical;
  throw ConfigError("unknown model variant '" + std::string(s) + "'");
}

PiMode parse_pi_mode(std::string_view s) {
  if (s == "shared") return PiMode::shared;
  if (s == "per_student" || s == "student") return PiMode::per_student;
  if (s == "covariate") return PiMode::covariate;
  throw ConfigError("unknown pi_know mode '" + std::string(s) + "'");
}

void ModelSpec::validate() const {
  if (pi_mode != PiMode::shared && fixed.is_fixed(Param::pi_know)) {
    throw ConfigError("pi_know cannot be both fixed and individualized");
  }
}

PriorSpec PriorSpec::weak() {
  PriorSpec p;
  for (auto& c : p.core) c = NormalPrior{0.0, 2.0};
  return p;
}

void PriorSpec::validate() const {
  for (Param p : kAllParams) {
    const auto& c = core[index(p)];
    if (c && !(c->sd > 0.0 && std::isfinite(c->mu))) {
      throw ConfigError("prior sd for " + std::string(param_name(p)) + " must be positive");
    }
    if (!(group_sd_scale[index(p)] > 0.0)) {
      throw ConfigError("group sd scale for " + std::string(param_name(p)) + " must be positive");
    }
  }
  for (const auto& [name, c] : coefficients) {
    if (!(c.sd > 0.0)) throw ConfigError("prior sd for coefficient '" + name + "' must be positive");
  }
  if (!(coefficient_default.sd > 0.0)) throw ConfigError("default coefficient prior sd must be positive");
}

BktModel::BktModel(const KcSequences& data, ModelSpec spec, PriorSpec priors,
                   std::vector<std::string> covariate_names)
    : spec_(std::move(spec)), priors_(std::move(priors)) {
  layout_.covariates = std::move(covariate_names);
  std::unordered_map<std::string, std::size_t> groups, students;
  for (const auto& seq : data.sequences) {
    if (spec_.grouped()) {
      if (!seq.group) {
        throw ConfigError("student '" + seq.student + "' has no group; " +
                          std::string(variant_name(spec_.variant)) + " models need one");
      }
      if (groups.emplace(*seq.group, layout_.groups.size()).second) layout_.groups.push_back(*seq.group);
    }
    if (spec_.pi_mode == PiMode::per_student &&
        students.emplace(seq.student, layout_.students.size()).second) {
      layout_.students.push_back(seq.student);
    }
    if (spec_.pi_mode == PiMode::covariate && seq.covariates.size() != layout_.covariates.size()) {
      throw ConfigError("student '" + seq.student + "' lacks covariate values");
    }
  }
  build();
  observed_.reserve(data.sequences.size());
  for (const auto& seq : data.sequences) observed_.push_back({unit_for(seq), &seq});
}

BktModel::BktModel(ModelLayout layout, ModelSpec spec, PriorSpec priors)
    : spec_(std::move(spec)), priors_(std::move(priors)), layout_(std::move(layout)) {
  build();
}

void BktModel::build() {
  spec_.validate();
  priors_.validate();
  if (spec_.grouped() && layout_.groups.empty()) {
    throw ConfigError(std::string(variant_name(spec_.variant)) + " model needs at least one group");
  }
  if (spec_.pi_mode == PiMode::covariate && layout_.covariates.empty()) {
    throw ConfigError("covariate pi_know mode needs at least one covariate column");
  }
  names_.clear();
  quantity_names_.clear();
  for (Param p : kAllParams) {
    Slot& slot = slots_[index(p)];
    const std::string name(param_name(p));
    slot.base = names_.size();
    if (spec_.fixed.is_fixed(p)) {
      slot.kind = SlotKind::fixed;
    } else if (p == Param::pi_know && spec_.pi_mode == PiMode::per_student) {
      slot.kind = SlotKind::per_student;
      for (const auto& s : layout_.students) {
        names_.push_back(name + "[" + s + "]");
        quantity_names_.push_back(name + "[" + s + "]");
      }
      quantity_names_.push_back(name + "_mean");
    } else if (p == Param::pi_know && spec_.pi_mode == PiMode::covariate) {
      slot.kind = SlotKind::covariate;
      names_.push_back(name + "_beta[intercept]");
      quantity_names_.push_back(name + "_beta[intercept]");
      for (const auto& c : layout_.covariates) {
        names_.push_back(name + "_beta[" + c + "]");
        quantity_names_.push_back(name + "_beta[" + c + "]");
      }
    } else if (spec_.variant == Variant::standard) {
      slot.kind = SlotKind::single;
      names_.push_back(name);
      quantity_names_.push_back(name);
    } else if (spec_.variant == Variant::multi) {
      slot.kind = SlotKind::per_group;
      for (const auto& g : layout_.groups) {
        names_.push_back(name + "[" + g + "]");
        quantity_names_.push_back(name + "[" + g + "]");
      }
    } else {
      slot.kind = SlotKind::hierarchical;
      names_.push_back(name);
      slot.log_sd = names_.size();
      names_.push_back(name + "_log_sd");
      slot.eta = names_.size();
      for (const auto& g : layout_.groups) names_.push_back(name + "_eta[" + g + "]");
      quantity_names_.push_back(name);
      quantity_names_.push_back(name + "_sd");
      for (const auto& g : layout_.groups) quantity_names_.push_back(name + "[" + g + "]");
    }
  }
}

Unit BktModel::unit_for(const Sequence& seq) const {
  Unit u;
  if (spec_.grouped()) {
    if (!seq.group) throw ConfigError("student '" + seq.student + "' has no group");
    for (std::size_t i = 0; i < layout_.groups.size(); ++i) {
      if (layout_.groups[i] == *seq.group) u.group = i;
    }
    if (!u.group) throw ConfigError("group '" + *seq.group + "' was not present when fitting");
  }
  if (spec_.pi_mode == PiMode::per_student) {
    for (std::size_t i = 0; i < layout_.students.size(); ++i) {
      if (layout_.students[i] == seq.student) u.student = i;
    }
  }
  if (spec_.pi_mode == PiMode::covariate) {
    if (seq.covariates.size() != layout_.covariates.size()) {
      throw ConfigError("student '" + seq.student + "' lacks covariate values");
    }
    u.covariates = seq.covariates;
  }
  return u;
}

double BktModel::core_z(std::span<const double> u, Param p, const Unit& unit) const {
  const Slot& s = slots_[index(p)];
  switch (s.kind) {
    case SlotKind::single: return u[s.base];
    case SlotKind::per_group: return u[s.base + *unit.group];
    case SlotKind::hierarchical: return u[s.base] + std::exp(u[s.log_sd]) * u[s.eta + *unit.group];
    case SlotKind::per_student: return u[s.base + *unit.student];
    case SlotKind::covariate: {
      double z = u[s.base];
      for (std::size_t j = 0; j < unit.covariates.size(); ++j) z += unit.covariates[j] * u[s.base + 1 + j];
      return z;
    }
    case SlotKind::fixed: break;
  }
  return 0.0;
}

void BktModel::chain_gradient(std::span<const double> u, Param p, const Unit& unit, double dz,
                              std::span<double> g) const {
  const Slot& s = slots_[index(p)];
  switch (s.kind) {
    case SlotKind::single: g[s.base] += dz; break;
    case SlotKind::per_group: g[s.base + *unit.group] += dz; break;
    case SlotKind::hierarchical: {
      const double sd = std::exp(u[s.log_sd]);
      const double eta = u[s.eta + *unit.group];
      g[s.base] += dz;
      g[s.eta + *unit.group] += dz * sd;
      g[s.log_sd] += dz * sd * eta;
      break;
    }
    case SlotKind::per_student: g[s.base + *unit.student] += dz; break;
    case SlotKind::covariate:
      g[s.base] += dz;
      for (std::size_t j = 0; j < unit.covariates.size(); ++j) g[s.base + 1 + j] += dz * unit.covariates[j];
      break;
    case SlotKind::fixed: break;
  }
}

BktParams BktModel::params_for(std::span<const double> u, const Unit& unit) const {
  BktParams out;
  for (Param p : kAllParams) {
    const Slot& s = slots_[index(p)];
    if (s.kind == SlotKind::fixed) {
      out.set(p, spec_.fixed.value(p));
    } else if (s.kind == SlotKind::per_student && !unit.student) {
      // Unseen student: population average of the fitted students.
      double sum = 0.0;
      for (std::size_t i = 0; i < layout_.students.size(); ++i) sum += constrain_one(p, u[s.base + i]);
      out.set(p, layout_.students.empty() ? 0.5 : sum / static_cast<double>(layout_.students.size()));
    } else {
      out.set(p, constrain_one(p, core_z(u, p, unit)));
    }
  }
  return out;
}

double BktModel::prior_term(double z, const std::optional<NormalPrior>& prior, bool jacobian,
                            double& dz) const {
  if (prior) return normal_lpdf(z, *prior, dz);
  if (jacobian) {
    dz = 1.0 - 2.0 * inv_logit(z);
    return -softplus(z) - softplus(-z);
  }
  dz = 0.0;
  return 0.0;
}

PosteriorValue BktModel::log_posterior(std::span<const double> u, std::span<double> grad,
                                       bool jacobian) const {
  if (u.size() != dimension() || (!grad.empty() && grad.size() != dimension())) {
    throw ConfigError("parameter vector has the wrong dimension");
  }
  std::vector<double> local;
  std::span<double> g = grad;
  if (g.empty()) {
    local.assign(dimension(), 0.0);
    g = local;
  } else {
    std::fill(g.begin(), g.end(), 0.0);
  }
  auto fail = [&] {
    std::fill(g.begin(), g.end(), 0.0);
    return PosteriorValue{kNegInf, kNegInf, kNegInf, false};
  };
  for (double x : u) {
    if (!std::isfinite(x)) return fail();
  }

  PosteriorValue out;
  for (const auto& obs : observed_) {
    const BktParams theta = params_for(u, obs.unit);
    const SequenceStats stats = expected_counts(obs.sequence->responses, theta);
    if (!std::isfinite(stats.log_lik)) return fail();
    out.log_lik += stats.log_lik;
    const ZVector dz = gradient_wrt_z(stats, theta);
    for (Param p : kAllParams) {
      if (slots_[index(p)].kind != SlotKind::fixed) chain_gradient(u, p, obs.unit, dz[index(p)], g);
    }
  }

  double lp = 0.0;
  double d = 0.0;
  for (Param p : kAllParams) {
    const Slot& s = slots_[index(p)];
    const auto& prior = priors_.core[index(p)];
    switch (s.kind) {
      case SlotKind::fixed: break;
      case SlotKind::single:
        lp += prior_term(u[s.base], prior, jacobian, d);
        g[s.base] += d;
        break;
      case SlotKind::per_group:
        for (std::size_t i = 0; i < layout_.groups.size(); ++i) {
          lp += prior_term(u[s.base + i], prior, jacobian, d);
          g[s.base + i] += d;
        }
        break;
      case SlotKind::per_student:
        for (std::size_t i = 0; i < layout_.students.size(); ++i) {
          lp += prior_term(u[s.base + i], prior, jacobian, d);
          g[s.base + i] += d;
        }
        break;
      case SlotKind::hierarchical: {
        lp += prior_term(u[s.base], prior, jacobian, d);
        g[s.base] += d;
        // sd ~ half-normal(scale), sampled as log sd
        const double scale = priors_.group_sd_scale[index(p)];
        const double log_sd = u[s.log_sd];
        const double r = std::exp(log_sd) / scale;
        lp += std::log(2.0) - kHalfLog2Pi - std::log(scale) - 0.5 * r * r;
        g[s.log_sd] += -r * r;
        if (jacobian) {
          lp += log_sd;
          g[s.log_sd] += 1.0;
        }
        for (std::size_t i = 0; i < layout_.groups.size(); ++i) {
          const double eta = u[s.eta + i];
          lp += -0.5 * eta * eta - kHalfLog2Pi;
          g[s.eta + i] += -eta;
        }
        break;
      }
      case SlotKind::covariate: {
        auto coef_prior = [&](const std::string& name) {
          auto it = priors_.coefficients.find(name);
          return it == priors_.coefficients.end() ? priors_.coefficient_default : it->second;
        };
        lp += normal_lpdf(u[s.base], coef_prior("intercept"), d);
        g[s.base] += d;
        for (std::size_t j = 0; j < layout_.covariates.size(); ++j) {
          lp += normal_lpdf(u[s.base + 1 + j], coef_prior(layout_.covariates[j]), d);
          g[s.base + 1 + j] += d;
        }
        break;
      }
    }
  }
  out.log_prior = lp;
  out.value = out.log_lik + lp;
  if (!std::isfinite(out.value)) return fail();
  for (double x : g) {
    if (!std::isfinite(x)) return fail();
  }
  return out;
}

Target BktModel::sampling_target() const {
  return {dimension(), [this](std::span<const double> u, std::span<double> g) {
            return log_posterior(u, g, true).value;
          }};
}

Target BktModel::optimization_target() const {
  return {dimension(), [this](std::span<const double> u, std::span<double> g) {
            return log_posterior(u, g, false).value;
          }};
}

std::vector<double> BktModel::quantities(std::span<const double> u) const {
  std::vector<double> q;
  q.reserve(quantity_names_.size());
  for (Param p : kAllParams) {
    const Slot& s = slots_[index(p)];
    switch (s.kind) {
      case SlotKind::fixed: break;
      case SlotKind::single: q.push_back(constrain_one(p, u[s.base])); break;
      case SlotKind::per_group:
        for (std::size_t i = 0; i < layout_.groups.size(); ++i) q.push_back(constrain_one(p, u[s.base + i]));
        break;
      case SlotKind::per_student: {
        double sum = 0.0;
        for (std::size_t i = 0; i < layout_.students.size(); ++i) {
          const double v = constrain_one(p, u[s.base + i]);
          q.push_back(v);
          sum += v;
        }
        q.push_back(layout_.students.empty() ? 0.5 : sum / static_cast<double>(layout_.students.size()));
        break;
      }
      case SlotKind::covariate:
        for (std::size_t j = 0; j <= layout_.covariates.size(); ++j) q.push_back(u[s.base + j]);
        break;
      case SlotKind::hierarchical: {
        const double sd = std::exp(u[s.log_sd]);
        q.push_back(constrain_one(p, u[s.base]));
        q.push_back(sd);
        for (std::size_t i = 0; i < layout_.groups.size(); ++i) {
          q.push_back(constrain_one(p, u[s.base] + sd * u[s.eta + i]));
        }
        break;
      }
    }
  }
  return q;
}

std::vector<double> random_initial_point(std::size_t dimension, Rng& rng) {
  std::vector<double> x(dimension);
  for (auto& v : x) v = uniform(rng, -2.0, 2.0);
  return x;
}

}  // namespace bkt
