#include "bkt/config.hpp"

#include <fstream>
#include <set>

#include "bkt/error.hpp"

namespace bkt {

std::string_view method_name(Method m) noexcept {
  switch (m) {
    case Method::nuts: return "nuts";
    case Method::vi: return "vi";
    case Method::map: return "map";
    case Method::em: return "em";
    case Method::fixed: return "fixed";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  for (Method m : {Method::nuts, Method::vi, Method::map, Method::em, Method::fixed}) {
    if (s == method_name(m)) return m;
  }
  throw ConfigError("unknown method '" + std::string(s) + "' (expected nuts, vi, map, em or fixed)");
}

void FitConfig::propagate() {
  nuts.seed = vi.seed = map.seed = em.seed = seed;
  nuts.threads = threads;
}

void FitConfig::validate() const {
  spec.validate();
  priors.validate();
  mapping.validate();
  if (min_length == 0) throw ConfigError("min_length must be at least 1");
  if (spec.grouped() && !mapping.group_id) {
    throw ConfigError(std::string(variant_name(spec.variant)) + " model needs a group_id column");
  }
  if (spec.pi_mode == PiMode::covariate && mapping.covariates.empty()) {
    throw ConfigError("covariate pi_know needs at least one covariate column");
  }
  if (method == Method::em && (spec.variant != Variant::standard || spec.pi_mode != PiMode::shared)) {
    throw ConfigError("em supports only the standard model with a shared pi_know");
  }
  if (method == Method::fixed && !spec.fixed.all_fixed()) {
    throw ConfigError("method fixed needs all five parameters fixed");
  }
  if (method == Method::nuts) {
    if (nuts.chains == 0 || nuts.sampling == 0) throw ConfigError("nuts needs chains and samples > 0");
    if (!(nuts.target_accept > 0.0 && nuts.target_accept < 1.0)) {
      throw ConfigError("target_accept must lie in (0, 1)");
    }
    if (nuts.max_depth < 1) throw ConfigError("max_depth must be at least 1");
  }
}

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

template <class T>
void get_if(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

json prior_json(const NormalPrior& p) { return json{{"mu", p.mu}, {"sd", p.sd}}; }

NormalPrior prior_from(const json& j) {
  check_keys(j, {"mu", "sd"}, "prior");
  NormalPrior p;
  get_if(j, "mu", p.mu);
  get_if(j, "sd", p.sd);
  return p;
}

Param param_from(const std::string& key) {
  auto p = parse_param(key);
  if (!p) throw ConfigError("unknown parameter '" + key + "'");
  return *p;
}

}  // namespace

json to_json(const ModelSpec& spec) {
  json fixed = json::object();
  for (Param p : kAllParams) {
    if (spec.fixed.is_fixed(p)) fixed[std::string(param_name(p))] = spec.fixed.value(p);
  }
  return json{{"variant", variant_name(spec.variant)},
              {"pi_know", pi_mode_name(spec.pi_mode)},
              {"fixed", fixed}};
}

json to_json(const PriorSpec& priors) {
  json j = json::object();
  for (Param p : kAllParams) {
    const auto& prior = priors.core[index(p)];
    j[std::string(param_name(p))] = prior ? prior_json(*prior) : json(nullptr);
  }
  json scales = json::object();
  for (Param p : kAllParams) scales[std::string(param_name(p))] = priors.group_sd_scale[index(p)];
  j["group_sd_scale"] = scales;
  json coef = json::object();
  for (const auto& [name, prior] : priors.coefficients) coef[name] = prior_json(prior);
  j["coefficients"] = coef;
  j["coefficient_default"] = prior_json(priors.coefficient_default);
  return j;
}

json to_json(const ColumnMapping& m) {
  json j{{"student_id", m.student_id},   {"problem_id", m.problem_id}, {"kc_id", m.kc_id},
         {"correct", m.correctness},     {"order", m.order},
         {"group_id", m.group_id ? json(*m.group_id) : json(nullptr)},
         {"covariates", m.covariates}};
  return j;
}

json options_json(const FitConfig& c) {
  switch (c.method) {
    case Method::nuts:
      return json{{"chains", c.nuts.chains},
                  {"warmup", c.nuts.warmup},
                  {"samples", c.nuts.sampling},
                  {"target_accept", c.nuts.target_accept},
                  {"max_depth", c.nuts.max_depth}};
    case Method::vi:
      return json{{"gradient_samples", c.vi.gradient_samples},
                  {"max_iterations", c.vi.max_iterations},
                  {"tolerance", c.vi.tolerance},
                  {"output_draws", c.vi.output_draws}};
    case Method::map:
      return json{{"max_iterations", c.map.max_iterations},
                  {"gradient_tolerance", c.map.gradient_tolerance},
                  {"restarts", c.map.restarts}};
    case Method::em:
      return json{{"max_iterations", c.em.max_iterations},
                  {"tolerance", c.em.tolerance},
                  {"restarts", c.em.restarts}};
    case Method::fixed:
      return json::object();
  }
  return json::object();
}

json to_json(const FitConfig& c) {
  json j{{"method", method_name(c.method)},
         {"seed", c.seed},
         {"min_length", c.min_length},
         {"model", to_json(c.spec)},
         {"priors", to_json(c.priors)},
         {"mapping", to_json(c.mapping)}};
  j[std::string(method_name(c.method))] = options_json(c);
  return j;
}

void from_json(const json& j, ModelSpec& spec) {
  check_keys(j, {"variant", "pi_know", "fixed"}, "model");
  if (j.contains("variant")) spec.variant = parse_variant(j.at("variant").get<std::string>());
  if (j.contains("pi_know")) spec.pi_mode = parse_pi_mode(j.at("pi_know").get<std::string>());
  if (j.contains("fixed")) {
    const json& f = j.at("fixed");
    if (!f.is_object()) throw ConfigError("'fixed' must map parameter names to values");
    for (const auto& [k, v] : f.items()) {
      if (!v.is_number()) throw ConfigError("fixed value for '" + k + "' must be a number");
      spec.fixed.fix(param_from(k), v.get<double>());
    }
  }
}

void from_json(const json& j, PriorSpec& priors) {
  if (!j.is_object()) throw ConfigError("priors must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (k == "group_sd_scale") {
      if (!v.is_object()) throw ConfigError("'group_sd_scale' must be an object");
      for (const auto& [pk, pv] : v.items()) {
        if (!pv.is_number()) throw ConfigError("group_sd_scale for '" + pk + "' must be a number");
        priors.group_sd_scale[index(param_from(pk))] = pv.get<double>();
      }
    } else if (k == "coefficients") {
      if (!v.is_object()) throw ConfigError("'coefficients' must be an object");
      for (const auto& [ck, cv] : v.items()) priors.coefficients[ck] = prior_from(cv);
    } else if (k == "coefficient_default") {
      priors.coefficient_default = prior_from(v);
    } else {
      const Param p = param_from(k);
      if (v.is_null()) {
        priors.core[index(p)].reset();
      } else {
        priors.core[index(p)] = prior_from(v);
      }
    }
  }
}

void from_json(const json& j, ColumnMapping& m) {
  check_keys(j, {"student_id", "problem_id", "kc_id", "correct", "order", "group_id", "covariates"},
             "mapping");
  get_if(j, "student_id", m.student_id);
  get_if(j, "problem_id", m.problem_id);
  get_if(j, "kc_id", m.kc_id);
  get_if(j, "correct", m.correctness);
  get_if(j, "order", m.order);
  if (j.contains("group_id")) {
    const json& g = j.at("group_id");
    if (g.is_null()) {
      m.group_id.reset();
    } else {
      m.group_id = g.get<std::string>();
    }
  }
  get_if(j, "covariates", m.covariates);
}

void from_json(const json& j, FitConfig& c) {
  check_keys(j,
             {"method", "seed", "min_length", "threads", "model", "priors", "mapping", "nuts", "vi",
              "map", "em"},
             "fit config");
  if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
  get_if(j, "seed", c.seed);
  get_if(j, "min_length", c.min_length);
  get_if(j, "threads", c.threads);
  if (j.contains("model")) from_json(j.at("model"), c.spec);
  if (j.contains("priors")) from_json(j.at("priors"), c.priors);
  if (j.contains("mapping")) from_json(j.at("mapping"), c.mapping);
  if (j.contains("nuts")) {
    const json& n = j.at("nuts");
    check_keys(n, {"chains", "warmup", "samples", "target_accept", "max_depth"}, "nuts");
    get_if(n, "chains", c.nuts.chains);
    get_if(n, "warmup", c.nuts.warmup);
    get_if(n, "samples", c.nuts.sampling);
    get_if(n, "target_accept", c.nuts.target_accept);
    get_if(n, "max_depth", c.nuts.max_depth);
  }
  if (j.contains("vi")) {
    const json& v = j.at("vi");
    check_keys(v, {"gradient_samples", "max_iterations", "tolerance", "output_draws"}, "vi");
    get_if(v, "gradient_samples", c.vi.gradient_samples);
    get_if(v, "max_iterations", c.vi.max_iterations);
    get_if(v, "tolerance", c.vi.tolerance);
    get_if(v, "output_draws", c.vi.output_draws);
  }
  if (j.contains("map")) {
    const json& m = j.at("map");
    check_keys(m, {"max_iterations", "gradient_tolerance", "restarts"}, "map");
    get_if(m, "max_iterations", c.map.max_iterations);
    get_if(m, "gradient_tolerance", c.map.gradient_tolerance);
    get_if(m, "restarts", c.map.restarts);
  }
  if (j.contains("em")) {
    const json& e = j.at("em");
    check_keys(e, {"max_iterations", "tolerance", "restarts"}, "em");
    get_if(e, "max_iterations", c.em.max_iterations);
    get_if(e, "tolerance", c.em.tolerance);
    get_if(e, "restarts", c.em.restarts);
  }
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace bkt
