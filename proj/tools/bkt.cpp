#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "bkt/bundle.hpp"
#include "bkt/config.hpp"
#include "bkt/contrast.hpp"
#include "bkt/csv.hpp"
#include "bkt/error.hpp"
#include "bkt/metrics.hpp"
#include "bkt/prediction.hpp"
#include "bkt/sim.hpp"
#include "bkt/summary.hpp"

namespace fs = std::filesystem;
using namespace bkt;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitFit = 3;

std::size_t default_threads() {
  if (const char* env = std::getenv("BKT_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring BKT_THREADS=" << env << '\n';
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

std::pair<Param, double> parse_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) throw ConfigError("expected name=value, got '" + s + "'");
  const auto p = parse_param(s.substr(0, eq));
  if (!p) throw ConfigError("unknown parameter '" + s.substr(0, eq) + "'");
  const auto v = csv::parse_double(s.substr(eq + 1));
  if (!v) throw ConfigError("bad value in '" + s + "'");
  return {*p, *v};
}

BktParams params_from_json(const json& j, BktParams p) {
  for (const auto& [k, v] : j.items()) {
    const auto q = parse_param(k);
    if (!q) throw ConfigError("unknown parameter '" + k + "'");
    p.set(*q, v.get<double>());
  }
  return p;
}

SequenceSet load_sequences(const fs::path& data, const FitConfig& config, std::size_t min_length) {
  const InteractionTable table = load_interactions(data, config.mapping);
  return build_sequences(table, config.spec.grouped(), min_length);
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config, output, latent;
  std::size_t students = 100, problems = 30, kcs = 1;
  double fraction = 0.8;
  std::uint64_t seed = 1234;
  BktParams params{0.04, 0.01, 0.1, 0.05, 0.4};
};

int cmd_simulate(const SimulateArgs& a, CLI::App& sub) {
  SimConfig cfg = SimConfig::standard(a.students, a.problems, a.kcs, a.fraction, a.params, a.seed);
  if (!a.config.empty()) {
    const json j = read_json(a.config);
    if (j.contains("n_problems") && !sub.count("--n-problems")) cfg.n_problems = j["n_problems"];
    if (j.contains("n_kcs") && !sub.count("--n-kcs")) cfg.n_kcs = j["n_kcs"];
    if (j.contains("fraction") && !sub.count("--fraction")) cfg.retention = j["fraction"];
    if (j.contains("seed") && !sub.count("--seed")) cfg.seed = j["seed"];
    if (j.contains("groups")) {
      cfg.groups.clear();
      for (const auto& g : j.at("groups")) {
        SimGroup group;
        group.label = g.value("label", "");
        group.n_students = g.at("n_students");
        const json& p = g.at("params");
        if (p.is_array()) {
          for (const auto& e : p) group.params.push_back(params_from_json(e, a.params));
        } else {
          group.params.push_back(params_from_json(p, a.params));
        }
        cfg.groups.push_back(std::move(group));
      }
    } else if (j.contains("params")) {
      cfg.groups.front().params = {params_from_json(j.at("params"), a.params)};
    }
  }
  const SimulatedData sim = simulate(cfg);
  const bool grouped = cfg.groups.size() > 1 || !cfg.groups.front().label.empty();
  auto out = open_out(a.output);
  write_interactions(out, sim.table, simulated_mapping(grouped));
  if (!a.latent.empty()) {
    auto lat = open_out(a.latent);
    write_latent_csv(lat, sim);
  }
  std::cerr << "wrote " << sim.table.records.size() << " interactions to " << a.output << '\n';
  return 0;
}

// ---------------------------------------------------------------- split

struct SplitArgs {
  std::string data, train, test, config;
  double fraction = 0.2;
  std::uint64_t seed = 0;
};

int cmd_split(const SplitArgs& a) {
  FitConfig config;
  if (!a.config.empty()) from_json(read_json(a.config), config);
  const InteractionTable table = load_interactions(a.data, config.mapping);
  const auto [train, test] = split_by_student(table, a.fraction, a.seed);
  auto tr = open_out(a.train);
  write_interactions(tr, train, config.mapping);
  auto te = open_out(a.test);
  write_interactions(te, test, config.mapping);
  return 0;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string data, output, config, priors, method, variant, pi_know, group_col;
  std::vector<std::string> fix, covariates;
  bool weak_priors = false;
  std::size_t chains = 4, warmup = 1000, samples = 1000, threads = 1, min_length = 1;
  std::size_t restarts = 4, max_iterations = 0;
  double target_accept = 0.8;
  int max_depth = 10;
  std::uint64_t seed = 0;
  std::string student_col, problem_col, kc_col, correct_col, order_col;
};

FitConfig fit_config(const FitArgs& a, const CLI::App& sub) {
  FitConfig c;
  if (!a.config.empty()) from_json(read_json(a.config), c);
  if (sub.count("--method")) c.method = parse_method(a.method);
  if (sub.count("--seed")) c.seed = a.seed;
  c.threads = sub.count("--threads") ? a.threads : default_threads();
  if (sub.count("--min-length")) c.min_length = a.min_length;
  if (sub.count("--variant")) c.spec.variant = parse_variant(a.variant);
  if (sub.count("--pi-know")) c.spec.pi_mode = parse_pi_mode(a.pi_know);
  for (const auto& f : a.fix) {
    const auto [p, v] = parse_assignment(f);
    c.spec.fixed.fix(p, v);
  }
  if (a.weak_priors) c.priors = PriorSpec::weak();
  if (!a.priors.empty()) from_json(read_json(a.priors), c.priors);
  if (sub.count("--group-column")) c.mapping.group_id = a.group_col;
  if (sub.count("--covariates")) c.mapping.covariates = a.covariates;
  if (sub.count("--student-column")) c.mapping.student_id = a.student_col;
  if (sub.count("--problem-column")) c.mapping.problem_id = a.problem_col;
  if (sub.count("--kc-column")) c.mapping.kc_id = a.kc_col;
  if (sub.count("--correct-column")) c.mapping.correctness = a.correct_col;
  if (sub.count("--order-column")) c.mapping.order = a.order_col;
  if (sub.count("--chains")) c.nuts.chains = a.chains;
  if (sub.count("--warmup")) c.nuts.warmup = a.warmup;
  if (sub.count("--samples")) c.nuts.sampling = c.vi.output_draws = a.samples;
  if (sub.count("--target-accept")) c.nuts.target_accept = a.target_accept;
  if (sub.count("--max-depth")) c.nuts.max_depth = a.max_depth;
  if (sub.count("--restarts")) c.map.restarts = c.em.restarts = a.restarts;
  if (sub.count("--max-iterations")) {
    c.map.max_iterations = c.em.max_iterations = c.vi.max_iterations = a.max_iterations;
  }
  c.propagate();
  c.validate();
  return c;
}

int cmd_fit(const FitArgs& a, const CLI::App& sub) {
  const FitConfig config = fit_config(a, sub);
  const SequenceSet data = load_sequences(a.data, config, config.min_length);
  if (data.dropped.sequences_dropped > 0) {
    std::cerr << "dropped " << data.dropped.sequences_dropped << " sequences ("
              << data.dropped.records_dropped << " interactions) shorter than "
              << config.min_length << '\n';
  }
  const FitBundle bundle = run_fit(data, config);
  save_bundle(bundle, a.output);
  std::cerr << method_name(config.method) << " fit of " << bundle.kcs.size() << " KC(s) in "
            << std::fixed << std::setprecision(1) << bundle.report["fit_seconds"].get<double>()
            << " s";
  if (config.method == Method::nuts) {
    std::cerr << ", " << bundle.report["divergences"].get<std::size_t>() << " divergent transitions";
  }
  std::cerr << "; bundle at " << a.output << '\n';
  return 0;
}

// ---------------------------------------------------------------- summary

struct SummaryArgs {
  std::string bundle, output, json_out;
  std::vector<double> levels{0.95};
  bool unconstrained = false;
};

json row_json(const std::string& kc, const SummaryRow& r) {
  json j{{"kc", kc}, {"parameter", r.parameter}, {"mean", r.mean}, {"mcse", r.mcse},
         {"sd", r.sd}, {"median", r.median}};
  for (const auto& iv : r.intervals) {
    j["q" + level_label(iv.level) + "_lo"] = iv.lo;
    j["q" + level_label(iv.level) + "_hi"] = iv.hi;
  }
  j["ess_bulk"] = std::isfinite(r.ess_bulk) ? json(r.ess_bulk) : json(nullptr);
  j["rhat"] = r.rhat && std::isfinite(*r.rhat) ? json(*r.rhat) : json(nullptr);
  return j;
}

int cmd_summary(const SummaryArgs& a) {
  const FitBundle bundle = load_bundle(a.bundle);
  std::vector<std::pair<std::string, SummaryRow>> rows;
  for (const auto& kc : bundle.kcs) {
    if (kc.draws) {
      std::vector<SummaryRow> s = a.unconstrained ? summarize(*kc.draws, a.levels)
                                                  : summarize(*kc.draws, *bundle.model(kc), a.levels);
      for (auto& r : s) rows.emplace_back(kc.kc, std::move(r));
      continue;
    }
    // Point estimates: a single value per quantity, no spread.
    std::vector<std::string> names;
    std::vector<double> values;
    if (kc.params) {
      for (Param p : kAllParams) {
        names.emplace_back(param_name(p));
        values.push_back(kc.params->get(p));
      }
    } else if (a.unconstrained) {
      names = kc.parameter_names;
      values = *kc.point;
    } else {
      const auto model = bundle.model(kc);
      names = model->quantity_names();
      values = model->quantities(*kc.point);
    }
    for (std::size_t k = 0; k < names.size(); ++k) {
      SummaryRow r;
      r.parameter = names[k];
      r.mean = r.median = values[k];
      r.sd = r.mcse = r.ess_bulk = std::numeric_limits<double>::quiet_NaN();
      for (double l : a.levels) r.intervals.push_back({l, values[k], values[k]});
      rows.emplace_back(kc.kc, std::move(r));
    }
  }

  std::vector<std::string> header{"kc_id", "parameter", "mean", "mcse", "sd", "median"};
  for (double l : a.levels) {
    header.push_back("q" + level_label(l) + "_lo");
    header.push_back("q" + level_label(l) + "_hi");
  }
  header.push_back("ess_bulk");
  header.push_back("rhat");
  auto csv_row = [](const std::string& kc, const SummaryRow& r) {
    std::vector<std::string> f{kc, r.parameter, csv::format_double(r.mean),
                               csv::format_double(r.mcse), csv::format_double(r.sd),
                               csv::format_double(r.median)};
    for (const auto& iv : r.intervals) {
      f.push_back(csv::format_double(iv.lo));
      f.push_back(csv::format_double(iv.hi));
    }
    f.push_back(csv::format_double(r.ess_bulk));
    f.push_back(r.rhat ? csv::format_double(*r.rhat) : "NA");
    return f;
  };
  if (!a.output.empty()) {
    auto out = open_out(a.output);
    csv::write_row(out, header);
    for (const auto& [kc, r] : rows) csv::write_row(out, csv_row(kc, r));
  }
  if (!a.json_out.empty()) {
    json j = json::array();
    for (const auto& [kc, r] : rows) j.push_back(row_json(kc, r));
    write_json(a.json_out, j);
  }

  std::cout << std::left << std::setw(10) << "kc" << std::setw(24) << "parameter" << std::right;
  for (const char* h : {"mean", "mcse", "sd", "median"}) std::cout << std::setw(9) << h;
  for (double l : a.levels) {
    std::cout << std::setw(9) << ("q" + level_label(l) + "lo") << std::setw(9)
              << ("q" + level_label(l) + "hi");
  }
  std::cout << std::setw(9) << "ess" << std::setw(8) << "rhat" << '\n';
  for (const auto& [kc, r] : rows) {
    auto cell = [](double v, int width, int precision) {
      std::ostringstream os;
      if (std::isfinite(v)) {
        os << std::fixed << std::setprecision(precision) << v;
      } else {
        os << "NA";
      }
      std::cout << std::setw(width) << os.str();
    };
    std::cout << std::left << std::setw(10) << kc << std::setw(24) << r.parameter << std::right;
    for (double v : {r.mean, r.mcse, r.sd, r.median}) cell(v, 9, 3);
    for (const auto& iv : r.intervals) {
      cell(iv.lo, 9, 3);
      cell(iv.hi, 9, 3);
    }
    cell(r.ess_bulk, 9, 0);
    cell(r.rhat.value_or(std::numeric_limits<double>::quiet_NaN()), 8, 3);
    std::cout << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  std::string bundle, data, output, raw, trajectory, by = "problem";
  bool smoothed = false, posterior = false;
  double level = 0.95;
};

int cmd_predict(const PredictArgs& a) {
  const FitBundle bundle = load_bundle(a.bundle);
  const SequenceSet data = load_sequences(a.data, bundle.config, 1);
  const FitSet fits = bundle.fit_set();
  const PredictMode mode = a.smoothed ? PredictMode::smoothed : PredictMode::filtered;
  NumericalEvents events;
  std::vector<PredictionRecord> records;
  if (a.posterior) {
    std::ofstream raw;
    if (!a.raw.empty()) raw = open_out(a.raw);
    records = predict_posterior(fits, data, mode, a.level, a.raw.empty() ? nullptr : &raw, &events);
  } else {
    if (!a.raw.empty()) throw ConfigError("--raw needs --posterior");
    records = predict_point(fits, data, mode, &events);
  }
  auto out = open_out(a.output);
  write_predictions(out, records);
  if (!a.trajectory.empty()) {
    TrajectoryGrouping g;
    if (a.by == "problem") {
      g = TrajectoryGrouping::per_problem;
    } else if (a.by == "opportunity") {
      g = TrajectoryGrouping::per_opportunity;
    } else {
      throw ConfigError("--by must be problem or opportunity");
    }
    auto traj = open_out(a.trajectory);
    write_trajectory(traj, emit_trajectory_data(records, g, a.level));
  }
  if (events.zero_denominator > 0) {
    std::cerr << "note: " << events.zero_denominator
              << " filtering steps had a zero-probability response and kept the prior mastery\n";
  }
  std::cerr << "wrote " << records.size() << " predictions to " << a.output << '\n';
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string predictions, data, output, column = "pc_mean";
  double threshold = 0.5;
};

int cmd_evaluate(const EvaluateArgs& a) {
  std::ifstream in(a.predictions);
  if (!in) throw ConfigError("cannot open " + a.predictions);
  csv::Reader reader(in);
  const auto header = reader.next();
  if (!header) throw ConfigError(a.predictions + " is empty");
  auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header->size(); ++i) {
      if ((*header)[i] == name) return i;
    }
    throw SchemaError("predictions lack column '" + name + "'");
  };
  const std::size_t c_correct = col("correct"), c_pred = col(a.column);
  std::vector<double> predicted;
  std::vector<std::uint8_t> observed;
  std::size_t row = 0;
  while (auto f = reader.next()) {
    ++row;
    if (f->size() != header->size()) throw RowError(row, "wrong field count");
    const auto p = csv::parse_double((*f)[c_pred]);
    if (!p || *p < 0.0 || *p > 1.0) throw RowError(row, "prediction is not a probability");
    const std::string& y = (*f)[c_correct];
    if (y != "0" && y != "1") throw RowError(row, "correct must be 0 or 1");
    predicted.push_back(*p);
    observed.push_back(y == "1");
  }
  if (!a.data.empty()) {
    FitConfig config;
    const InteractionTable table = load_interactions(a.data, config.mapping);
    if (table.records.size() != predicted.size()) {
      throw ConfigError("predictions cover " + std::to_string(predicted.size()) +
                        " interactions but the dataset has " +
                        std::to_string(table.records.size()));
    }
  }
  const MetricReport m = evaluate(predicted, observed, a.threshold);
  const json j{{"n", m.n}, {"threshold", m.threshold}, {"accuracy", m.accuracy},
               {"auc", m.auc}, {"rmse", m.rmse}, {"score_column", a.column}};
  if (!a.output.empty()) write_json(a.output, j);
  std::cout << std::fixed << std::setprecision(4) << "n         " << m.n << "\naccuracy  "
            << m.accuracy << "\nauc       " << m.auc << "\nrmse      " << m.rmse << '\n';
  return 0;
}

// ---------------------------------------------------------------- contrast

struct ContrastArgs {
  std::string design, output, kc;
  std::vector<std::string> bundles, parameters, neutral;
  double level = 0.95;
};

int cmd_contrast(const ContrastArgs& a) {
  const json dj = read_json(a.design);
  FactorialDesign design;
  std::map<std::string, std::string> paths;
  std::map<std::string, std::string> neutral;
  try {
    design.factors = dj.at("factors").get<std::vector<std::string>>();
    for (const auto& [cond, levels] : dj.at("conditions").items()) {
      design.conditions[cond] = levels.get<std::map<std::string, std::string>>();
    }
    if (dj.contains("bundles")) paths = dj.at("bundles").get<std::map<std::string, std::string>>();
    if (dj.contains("neutral")) neutral = dj.at("neutral").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed design file: " + std::string(e.what()));
  }
  const fs::path base = fs::path(a.design).parent_path();
  for (auto& [cond, p] : paths) {
    if (fs::path(p).is_relative()) p = (base / p).string();
  }
  for (const auto& b : a.bundles) {
    const auto eq = b.find('=');
    if (eq == std::string::npos) throw ConfigError("--bundle expects condition=path");
    paths[b.substr(0, eq)] = b.substr(eq + 1);
  }
  for (const auto& n : a.neutral) {
    const auto eq = n.find('=');
    if (eq == std::string::npos) throw ConfigError("--neutral expects factor=level");
    neutral[n.substr(0, eq)] = n.substr(eq + 1);
  }
  design.validate();
  if (paths.empty()) throw ConfigError("no condition bundles given");
  if (neutral.empty()) throw ConfigError("no neutral levels given");

  std::vector<std::string> parameters = a.parameters;
  if (parameters.empty()) {
    for (Param p : kAllParams) parameters.emplace_back(param_name(p));
  }

  // condition -> parameter -> pooled constrained draws
  std::map<std::string, std::map<std::string, std::vector<double>>> values;
  for (const auto& [cond, path] : paths) {
    const FitBundle bundle = load_bundle(path);
    const KcResult* kc = a.kc.empty() ? &bundle.kcs.front() : bundle.find(a.kc);
    if (!kc) throw ConfigError("bundle " + path + " has no KC '" + a.kc + "'");
    if (!kc->draws) throw ConfigError("bundle " + path + " holds a point estimate, not draws");
    const auto model = bundle.model(*kc);
    const auto cols = constrained_columns(*kc->draws, *model);
    for (const auto& name : parameters) {
      const auto& names = model->quantity_names();
      const auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) throw ConfigError("bundle " + path + " has no quantity '" + name + "'");
      std::vector<double> pooled;
      for (const auto& chain : cols[static_cast<std::size_t>(it - names.begin())]) {
        pooled.insert(pooled.end(), chain.begin(), chain.end());
      }
      values[cond][name] = std::move(pooled);
    }
  }

  std::vector<ContrastResult> results;
  for (const auto& name : parameters) {
    std::map<std::string, std::vector<double>> by_condition;
    for (const auto& [cond, per_param] : values) by_condition[cond] = per_param.at(name);
    for (const auto& factor : design.factors) {
      const auto nl = neutral.find(factor);
      if (nl == neutral.end()) continue;
      const Marginals m = marginal_effects(by_condition, design, factor);
      for (auto& r : contrast_vs_neutral(m, nl->second, a.level, name, factor)) {
        results.push_back(std::move(r));
      }
    }
  }

  const std::string label = level_label(a.level);
  auto write = [&](std::ostream& out) {
    csv::write_row(out, {"parameter", "factor", "level", "mean_difference", "median_difference",
                         "q" + label + "_lo", "q" + label + "_hi", "excludes_zero"});
    for (const auto& r : results) {
      csv::write_row(out, {r.parameter, r.factor, r.level, csv::format_double(r.mean),
                           csv::format_double(r.median), csv::format_double(r.lo),
                           csv::format_double(r.hi), r.excludes_zero ? "true" : "false"});
    }
  };
  if (!a.output.empty()) {
    auto out = open_out(a.output);
    write(out);
  } else {
    write(std::cout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian knowledge tracing: simulate, fit, summarize, predict, evaluate"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "simulate interaction data");
  s->add_option("-o,--output", sim.output, "dataset CSV")->required();
  s->add_option("--latent", sim.latent, "latent mastery CSV");
  s->add_option("--config", sim.config, "simulation JSON (groups, per-KC params)");
  s->add_option("--n-students", sim.students);
  s->add_option("--n-problems", sim.problems);
  s->add_option("--n-kcs", sim.kcs);
  s->add_option("--fraction", sim.fraction, "share of problems kept per student");
  s->add_option("--seed", sim.seed);
  s->add_option("--learn", sim.params.learn);
  s->add_option("--forget", sim.params.forget);
  s->add_option("--guess", sim.params.guess);
  s->add_option("--slip", sim.params.slip);
  s->add_option("--pi-know", sim.params.pi_know);

  SplitArgs split;
  auto* sp = app.add_subcommand("split", "split a dataset into train/test by student");
  sp->add_option("--data", split.data)->required();
  sp->add_option("--train", split.train)->required();
  sp->add_option("--test", split.test)->required();
  sp->add_option("--test-fraction", split.fraction);
  sp->add_option("--seed", split.seed);
  sp->add_option("--config", split.config, "fit config JSON supplying the column mapping");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "fit a model and write a fit bundle");
  f->add_option("--data", fit.data)->required();
  f->add_option("-o,--output", fit.output, "bundle directory")->required();
  f->add_option("--config", fit.config, "fit config JSON; flags override it");
  f->add_option("--method", fit.method, "nuts, vi, map, em or fixed");
  f->add_option("--priors", fit.priors, "prior JSON");
  f->add_flag("--weak-priors", fit.weak_priors, "Normal(0, 2) on every core parameter");
  f->add_option("--fix", fit.fix, "name=value, repeatable");
  f->add_option("--variant", fit.variant, "standard, multi or hierarchical");
  f->add_option("--pi-know", fit.pi_know, "shared, per_student or covariate");
  f->add_option("--group-column", fit.group_col);
  f->add_option("--covariates", fit.covariates);
  f->add_option("--student-column", fit.student_col);
  f->add_option("--problem-column", fit.problem_col);
  f->add_option("--kc-column", fit.kc_col);
  f->add_option("--correct-column", fit.correct_col);
  f->add_option("--order-column", fit.order_col);
  f->add_option("--min-length", fit.min_length);
  f->add_option("--chains", fit.chains);
  f->add_option("--warmup", fit.warmup);
  f->add_option("--samples", fit.samples);
  f->add_option("--target-accept", fit.target_accept);
  f->add_option("--max-depth", fit.max_depth);
  f->add_option("--restarts", fit.restarts);
  f->add_option("--max-iterations", fit.max_iterations);
  f->add_option("--seed", fit.seed);
  f->add_option("--threads", fit.threads, "worker threads (default: BKT_THREADS or all cores)");

  SummaryArgs summary;
  auto* su = app.add_subcommand("summary", "posterior summary of a fit bundle");
  su->add_option("--bundle", summary.bundle)->required();
  su->add_option("-o,--output", summary.output, "summary CSV");
  su->add_option("--json", summary.json_out, "summary JSON");
  su->add_option("--level", summary.levels, "credible level(s)");
  su->add_flag("--unconstrained", summary.unconstrained, "summarize raw coordinates");

  PredictArgs predict;
  auto* pr = app.add_subcommand("predict", "mastery and correctness predictions");
  pr->add_option("--bundle", predict.bundle)->required();
  pr->add_option("--data", predict.data)->required();
  pr->add_option("-o,--output", predict.output)->required();
  pr->add_flag("--smoothed", predict.smoothed, "condition on whole sequences");
  pr->add_flag("--posterior", predict.posterior, "predict under every draw");
  pr->add_option("--level", predict.level);
  pr->add_option("--raw", predict.raw, "per-draw CSV (with --posterior)");
  pr->add_option("--trajectory", predict.trajectory, "observed vs predicted table");
  pr->add_option("--by", predict.by, "trajectory grouping: problem or opportunity");

  EvaluateArgs eval;
  auto* ev = app.add_subcommand("evaluate", "accuracy, AUC and RMSE of predictions");
  ev->add_option("--predictions", eval.predictions)->required();
  ev->add_option("--data", eval.data, "dataset the predictions cover");
  ev->add_option("-o,--output", eval.output, "report JSON");
  ev->add_option("--threshold", eval.threshold);
  ev->add_option("--column", eval.column, "score column");

  ContrastArgs contrast;
  auto* co = app.add_subcommand("contrast", "marginal contrasts against neutral levels");
  co->add_option("--design", contrast.design, "design JSON")->required();
  co->add_option("--bundle", contrast.bundles, "condition=bundle, repeatable");
  co->add_option("--neutral", contrast.neutral, "factor=level, repeatable");
  co->add_option("--parameter", contrast.parameters, "repeatable; default all five");
  co->add_option("--kc", contrast.kc);
  co->add_option("--level", contrast.level);
  co->add_option("-o,--output", contrast.output);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (*s) return cmd_simulate(sim, *s);
    if (*sp) return cmd_split(split);
    if (*f) return cmd_fit(fit, *f);
    if (*su) return cmd_summary(summary);
    if (*pr) return cmd_predict(predict);
    if (*ev) return cmd_evaluate(eval);
    if (*co) return cmd_contrast(contrast);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const FitError& e) {
    std::cerr << "fit failed: " << e.what() << '\n';
    return kExitFit;
  } catch (const std::exception& e) {
    std::cerr << "fit failed: " << e.what() << '\n';
    return kExitFit;
  }
  return kExitConfig;
}
