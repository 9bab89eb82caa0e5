#ifndef BKT_MODEL_HPP
#define BKT_MODEL_HPP

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bkt/data.hpp"
#include "bkt/model_core.hpp"
#include "bkt/rng.hpp"

namespace bkt {

enum class Variant { standard, multi, hierarchical };
enum class PiMode { shared, per_student, covariate };

std::string_view variant_name(Variant v) noexcept;
std::string_view pi_mode_name(PiMode m) noexcept;
Variant parse_variant(std::string_view s);
PiMode parse_pi_mode(std::string_view s);

struct ModelSpec {
  Variant variant = Variant::standard;
  PiMode pi_mode = PiMode::shared;
  FixedMask fixed;

  bool grouped() const noexcept { return variant != Variant::standard; }
  void validate() const;
};

struct NormalPrior {
  double mu = 0.0;
  double sd = 1.0;
};

/// Priors on the unconstrained scale. A missing core entry means a flat
/// prior on the probability scale.
struct PriorSpec {
  std::array<std::optional<NormalPrior>, kNumParams> core{};
  /// Half-normal scale of each hierarchical deviation sd.
  std::array<double, kNumParams> group_sd_scale{1.0, 1.0, 1.0, 1.0, 1.0};
  /// Covariate coefficients by name ("intercept" for the constant column).
  std::map<std::string, NormalPrior> coefficients;
  NormalPrior coefficient_default{0.0, 2.0};

  /// Normal(0, 2) on every core coordinate.
  static PriorSpec weak();
  void validate() const;
};

/// Structural labels a fitted model is indexed by.
struct ModelLayout {
  std::vector<std::string> groups;
  std::vector<std::string> students;
  std::vector<std::string> covariates;  // user columns, intercept excluded
};

/// Where one sequence's parameters come from.
struct Unit {
  std::optional<std::size_t> group;
  std::optional<std::size_t> student;  // nullopt: not seen during fitting
  std::vector<double> covariates;
};

struct PosteriorValue {
  double value = 0.0;
  double log_lik = 0.0;
  double log_prior = 0.0;
  bool finite = true;
};

/// Log density with gradient over R^d, the interface every estimator uses.
struct Target {
  std::size_t dimension = 0;
  std::function<double(std::span<const double>, std::span<double>)> log_density;
};

/// Unnormalized log posterior of one KC under a model variant.
class BktModel {
 public:
  /// Layout derived from `data`, which must outlive the model. Throws
  /// ConfigError on structural mismatch.
  BktModel(const KcSequences& data, ModelSpec spec, PriorSpec priors,
           std::vector<std::string> covariate_names = {});
  /// Rebuild a fitted structure without observations.
  BktModel(ModelLayout layout, ModelSpec spec, PriorSpec priors);

  std::size_t dimension() const noexcept { return names_.size(); }
  const std::vector<std::string>& parameter_names() const noexcept { return names_; }
  const ModelLayout& layout() const noexcept { return layout_; }
  const ModelSpec& spec() const noexcept { return spec_; }
  const PriorSpec& priors() const noexcept { return priors_; }
  std::size_t observed_sequences() const noexcept { return observed_.size(); }

  /// `jacobian` adds the log-Jacobian of the probability-scale flat priors
  /// and of the log-sd coordinates; samplers set it, optimizers do not.
  PosteriorValue log_posterior(std::span<const double> u, std::span<double> gradient,
                               bool jacobian) const;

  Target sampling_target() const;
  Target optimization_target() const;

  /// Resolve a sequence's labels. Unknown groups are an error; unknown
  /// students are allowed and use the population fallback.
  Unit unit_for(const Sequence& seq) const;
  BktParams params_for(std::span<const double> u, const Unit& unit) const;
  BktParams observed_params(std::span<const double> u, std::size_t sequence) const {
    return params_for(u, observed_[sequence].unit);
  }

  /// Constrained-scale quantities reported by summaries.
  const std::vector<std::string>& quantity_names() const noexcept { return quantity_names_; }
  std::vector<double> quantities(std::span<const double> u) const;

 private:
  enum class SlotKind { fixed, single, per_group, hierarchical, per_student, covariate };
  struct Slot {
    SlotKind kind = SlotKind::fixed;
    std::size_t base = 0;       // first coordinate (single/per_group/per_student/covariate/global)
    std::size_t log_sd = 0;     // hierarchical
    std::size_t eta = 0;        // hierarchical: first deviation coordinate
  };
  struct Observed {
    Unit unit;
    const Sequence* sequence;
  };

  void build();
  double core_z(std::span<const double> u, Param p, const Unit& unit) const;
  void chain_gradient(std::span<const double> u, Param p, const Unit& unit, double dz,
                      std::span<double> g) const;
  double prior_term(double z, const std::optional<NormalPrior>& prior, bool jacobian,
                    double& dz) const;

  ModelSpec spec_;
  PriorSpec priors_;
  ModelLayout layout_;
  std::array<Slot, kNumParams> slots_{};
  std::vector<std::string> names_;
  std::vector<std::string> quantity_names_;
  std::vector<Observed> observed_;
};

/// Uniform(-2, 2) per coordinate.
std::vector<double> random_initial_point(std::size_t dimension, Rng& rng);

}  // namespace bkt

#endif  // BKT_MODEL_HPP
