#include "bkt/bundle.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "bkt/csv.hpp"
#include "bkt/error.hpp"

namespace bkt {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormatVersion = "1";

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

json params_json(const BktParams& p) {
  json j = json::object();
  for (Param q : kAllParams) j[std::string(param_name(q))] = p.get(q);
  return j;
}

BktParams params_from(const json& j) {
  BktParams p;
  for (Param q : kAllParams) {
    const std::string key(param_name(q));
    if (!j.contains(key)) throw ConfigError("point.json lacks '" + key + "'");
    p.set(q, j.at(key).get<double>());
  }
  return p;
}

json layout_json(const KcResult& r) {
  return json{{"kc", r.kc},
              {"groups", r.layout.groups},
              {"students", r.layout.students},
              {"covariates", r.layout.covariates},
              {"parameters", r.parameter_names}};
}

std::string kc_dir(std::size_t i) { return "kc_" + std::to_string(i); }

KcResult fit_one(const KcSequences& kc, const FitConfig& config,
                 const std::vector<std::string>& covariates) {
  KcResult r;
  r.kc = kc.kc;
  const auto start = std::chrono::steady_clock::now();
  r.report["kc"] = kc.kc;
  r.report["sequences"] = kc.sequences.size();
  r.report["interactions"] = kc.interactions();

  if (config.method == Method::em) {
    const EmResult em = fit_em(kc, config.em, config.spec.fixed);
    r.params = em.params;
    r.report["log_lik"] = em.log_lik;
    r.report["iterations"] = em.iterations;
    r.report["converged"] = em.converged;
    r.report["best_restart"] = em.best_restart;
  } else if (config.method == Method::fixed) {
    r.params = *config.spec.fixed.as_params();
    double ll = 0.0;
    for (const auto& s : kc.sequences) ll += log_likelihood(s.responses, *r.params);
    r.report["log_lik"] = ll;
  } else {
    const BktModel model(kc, config.spec, config.priors, covariates);
    r.layout = model.layout();
    r.parameter_names = model.parameter_names();
    if (config.method == Method::map) {
      const MapResult map = fit_map(model.optimization_target(), config.map);
      r.point = map.point;
      std::vector<double> grad(model.dimension());
      const PosteriorValue v = model.log_posterior(map.point, grad, false);
      r.report["objective"] = map.objective;
      r.report["log_lik"] = v.log_lik;
      r.report["converged"] = map.converged;
      r.report["best_restart"] = map.best_restart;
    } else if (config.method == Method::nuts) {
      NutsResult nuts = fit_nuts(model.sampling_target(), r.parameter_names, config.nuts);
      r.report["divergences"] = nuts.draws.divergences();
      std::size_t warm = 0;
      json steps = json::array();
      for (const auto& a : nuts.adaptation) {
        warm += a.warmup_divergences;
        steps.push_back(a.step_size);
      }
      r.report["warmup_divergences"] = warm;
      r.report["step_size"] = steps;
      r.draws = std::move(nuts.draws);
    } else {
      ViResult vi = fit_vi(model.sampling_target(), r.parameter_names, config.vi);
      r.report["approximate"] = true;
      r.report["eta"] = vi.eta;
      r.report["iterations"] = vi.iterations;
      r.report["converged"] = vi.converged;
      r.draws = std::move(vi.draws);
    }
  }
  r.report["seconds"] = seconds_since(start);
  return r;
}

std::vector<std::string> string_list(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  return j.at(key).get<std::vector<std::string>>();
}

}  // namespace

const KcResult* FitBundle::find(std::string_view kc) const noexcept {
  for (const auto& r : kcs) {
    if (r.kc == kc) return &r;
  }
  return nullptr;
}

std::shared_ptr<const BktModel> FitBundle::model(const KcResult& kc) const {
  if (kc.params) return nullptr;
  auto m = std::make_shared<const BktModel>(kc.layout, config.spec, config.priors);
  if (m->parameter_names() != kc.parameter_names) {
    throw ConfigError("bundle for KC '" + kc.kc + "' does not match its model specification");
  }
  return m;
}

FitSet FitBundle::fit_set() const {
  FitSet out;
  for (const auto& r : kcs) {
    KcFit f;
    if (r.params) {
      f.params = r.params;
    } else {
      f.model = model(r);
      if (r.point) {
        f.points.push_back(*r.point);
      } else {
        f.points = r.draws->flatten();
      }
    }
    out.emplace(r.kc, std::move(f));
  }
  return out;
}

FitBundle run_fit(const SequenceSet& data, const FitConfig& config_in) {
  FitConfig config = config_in;
  config.propagate();
  config.validate();
  if (data.kcs.empty()) throw ConfigError("no sequences to fit");

  FitBundle bundle;
  bundle.config = config;
  bundle.covariate_names = data.covariate_names;
  const auto start = std::chrono::steady_clock::now();
  for (const auto& kc : data.kcs) bundle.kcs.push_back(fit_one(kc, config, data.covariate_names));

  json fixed = json::object();
  for (Param p : kAllParams) {
    if (config.spec.fixed.is_fixed(p)) fixed[std::string(param_name(p))] = config.spec.fixed.value(p);
  }
  std::size_t divergences = 0;
  json per_kc = json::array();
  for (const auto& r : bundle.kcs) {
    if (r.draws) divergences += r.draws->divergences();
    per_kc.push_back(r.report);
  }
  bundle.report = json{{"method", method_name(config.method)},
                       {"fit_seconds", seconds_since(start)},
                       {"divergences", divergences},
                       {"dropped", {{"sequences", data.dropped.sequences_dropped},
                                    {"records", data.dropped.records_dropped}}},
                       {"fixed", fixed},
                       {"kcs", per_kc}};
  return bundle;
}

void write_draws_csv(std::ostream& out, const PosteriorDraws& draws) {
  std::vector<std::string> header{"chain", "iteration"};
  header.insert(header.end(), draws.names.begin(), draws.names.end());
  csv::write_row(out, header);
  std::vector<std::string> row;
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const auto& chain = draws.chains[c].draws;
    for (std::size_t i = 0; i < chain.size(); ++i) {
      row.assign({std::to_string(c + 1), std::to_string(i + 1)});
      for (double v : chain[i]) row.push_back(csv::format_double(v));
      csv::write_row(out, row);
    }
  }
}

void write_sampler_csv(std::ostream& out, const PosteriorDraws& draws) {
  out << "chain,iteration,step_size,tree_depth,n_leapfrog,divergent,accept_stat,log_density\n";
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const auto& stats = draws.chains[c].stats;
    for (std::size_t i = 0; i < stats.size(); ++i) {
      const auto& s = stats[i];
      csv::write_row(out, {std::to_string(c + 1), std::to_string(i + 1),
                           csv::format_double(s.step_size), std::to_string(s.tree_depth),
                           std::to_string(s.n_leapfrog), s.divergent ? "1" : "0",
                           csv::format_double(s.accept_stat), csv::format_double(s.log_density)});
    }
  }
}

PosteriorDraws read_draws_csv(std::istream& in) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header || header->size() < 2 || (*header)[0] != "chain" || (*header)[1] != "iteration") {
    throw ConfigError("draws file must start with chain,iteration columns");
  }
  PosteriorDraws d;
  d.names.assign(header->begin() + 2, header->end());
  std::size_t line = 1;
  while (auto fields = reader.next()) {
    ++line;
    if (fields->size() == 1 && (*fields)[0].empty()) continue;
    if (fields->size() != header->size()) {
      throw ConfigError("draws row " + std::to_string(line) + " has the wrong field count");
    }
    const auto chain = csv::parse_double((*fields)[0]);
    if (!chain || *chain < 1 || *chain != static_cast<double>(static_cast<std::size_t>(*chain))) {
      throw ConfigError("draws row " + std::to_string(line) + " has a bad chain index");
    }
    const auto c = static_cast<std::size_t>(*chain) - 1;
    if (c > d.chains.size()) throw ConfigError("draws chains must appear in order");
    if (c == d.chains.size()) d.chains.emplace_back();
    std::vector<double> x;
    for (std::size_t k = 2; k < fields->size(); ++k) {
      const auto v = csv::parse_double((*fields)[k]);
      if (!v) throw ConfigError("draws row " + std::to_string(line) + " has a non-numeric value");
      x.push_back(*v);
    }
    d.chains[c].draws.push_back(std::move(x));
  }
  d.validate();
  return d;
}

void save_bundle(const FitBundle& bundle, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create " + dir.string() + ": " + ec.message());

  json manifest{{"format_version", kFormatVersion},
                {"config", to_json(bundle.config)},
                {"covariates", bundle.covariate_names}};
  json kcs = json::array();
  for (std::size_t i = 0; i < bundle.kcs.size(); ++i) {
    kcs.push_back(json{{"kc", bundle.kcs[i].kc}, {"path", kc_dir(i)}});
  }
  manifest["kcs"] = kcs;
  write_json(dir / "manifest.json", manifest);
  write_json(dir / "report.json", bundle.report);

  for (std::size_t i = 0; i < bundle.kcs.size(); ++i) {
    const KcResult& r = bundle.kcs[i];
    const fs::path sub = dir / kc_dir(i);
    fs::create_directories(sub, ec);
    if (ec) throw ConfigError("cannot create " + sub.string() + ": " + ec.message());
    write_json(sub / "layout.json", layout_json(r));
    if (r.draws) {
      std::ofstream draws(sub / "draws.csv");
      write_draws_csv(draws, *r.draws);
      json meta{{"method", r.draws->method},
                {"approximate", r.draws->approximate},
                {"warmup", r.draws->warmup},
                {"sampling", r.draws->sampling},
                {"seed", r.draws->seed}};
      write_json(sub / "draws_meta.json", meta);
      if (!r.draws->chains.empty() && !r.draws->chains.front().stats.empty()) {
        std::ofstream sampler(sub / "sampler.csv");
        write_sampler_csv(sampler, *r.draws);
      }
    } else {
      json point = json::object();
      if (r.point) point["unconstrained"] = *r.point;
      if (r.params) {
        point["params"] = params_json(*r.params);
      } else {
        const BktModel m(r.layout, bundle.config.spec, bundle.config.priors);
        json q = json::object();
        const auto values = m.quantities(*r.point);
        for (std::size_t k = 0; k < values.size(); ++k) q[m.quantity_names()[k]] = values[k];
        point["quantities"] = q;
      }
      write_json(sub / "point.json", point);
    }
  }
}

FitBundle load_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError(dir.string() + " is not a fit bundle directory");
  const json manifest = read_json(dir / "manifest.json");
  FitBundle b;
  try {
    if (manifest.value("format_version", "") != kFormatVersion) {
      throw ConfigError("unsupported bundle format in " + dir.string());
    }
    from_json(manifest.at("config"), b.config);
    b.covariate_names = string_list(manifest, "covariates");
    if (fs::exists(dir / "report.json")) b.report = read_json(dir / "report.json");
    for (const auto& entry : manifest.at("kcs")) {
      KcResult r;
      r.kc = entry.at("kc").get<std::string>();
      const fs::path sub = dir / entry.at("path").get<std::string>();
      const json layout = read_json(sub / "layout.json");
      r.layout.groups = string_list(layout, "groups");
      r.layout.students = string_list(layout, "students");
      r.layout.covariates = string_list(layout, "covariates");
      r.parameter_names = string_list(layout, "parameters");
      if (fs::exists(sub / "draws.csv")) {
        std::ifstream in(sub / "draws.csv");
        PosteriorDraws d = read_draws_csv(in);
        if (d.names != r.parameter_names) {
          throw ConfigError("draws columns of KC '" + r.kc + "' do not match its layout");
        }
        const json meta = read_json(sub / "draws_meta.json");
        d.method = meta.at("method").get<std::string>();
        d.approximate = meta.at("approximate").get<bool>();
        d.warmup = meta.at("warmup").get<std::size_t>();
        d.sampling = meta.at("sampling").get<std::size_t>();
        d.seed = meta.at("seed").get<std::uint64_t>();
        r.draws = std::move(d);
      } else {
        const json point = read_json(sub / "point.json");
        if (point.contains("params")) r.params = params_from(point.at("params"));
        if (point.contains("unconstrained")) {
          r.point = point.at("unconstrained").get<std::vector<double>>();
        }
        if (!r.params && !r.point) throw ConfigError("point.json of KC '" + r.kc + "' is empty");
      }
      b.kcs.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed bundle " + dir.string() + ": " + e.what());
  }
  if (b.kcs.empty()) throw ConfigError("bundle " + dir.string() + " holds no KCs");
  return b;
}

}  // namespace bkt
