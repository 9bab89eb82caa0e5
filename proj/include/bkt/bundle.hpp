#ifndef BKT_BUNDLE_HPP
#define BKT_BUNDLE_HPP

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bkt/config.hpp"
#include "bkt/draws.hpp"
#include "bkt/prediction.hpp"

namespace bkt {

/// Result for one KC. Exactly one of draws, point and params is set.
struct KcResult {
  std::string kc;
  ModelLayout layout;
  std::vector<std::string> parameter_names;
  std::optional<PosteriorDraws> draws;       // nuts, vi
  std::optional<std::vector<double>> point;  // map, unconstrained
  std::optional<BktParams> params;           // em, fixed
  json report = json::object();
};

/// A fit and everything needed to reuse it.
struct FitBundle {
  FitConfig config;
  std::vector<std::string> covariate_names;
  std::vector<KcResult> kcs;
  json report = json::object();

  const KcResult* find(std::string_view kc) const noexcept;
  std::shared_ptr<const BktModel> model(const KcResult& kc) const;
  FitSet fit_set() const;
};

/// Fit every KC independently.
FitBundle run_fit(const SequenceSet& data, const FitConfig& config);

/// Directory layout: manifest.json, report.json and kc_<i>/ holding
/// layout.json plus draws.csv and sampler.csv, or point.json.
void save_bundle(const FitBundle& bundle, const std::filesystem::path& dir);
FitBundle load_bundle(const std::filesystem::path& dir);

void write_draws_csv(std::ostream& out, const PosteriorDraws& draws);
void write_sampler_csv(std::ostream& out, const PosteriorDraws& draws);
PosteriorDraws read_draws_csv(std::istream& in);

}  // namespace bkt

#endif  // BKT_BUNDLE_HPP
