#ifndef BKT_CONFIG_HPP
#define BKT_CONFIG_HPP

#include <filesystem>
#include <string>

#include <json.hpp>

#include "bkt/data.hpp"
#include "bkt/em.hpp"
#include "bkt/map.hpp"
#include "bkt/model.hpp"
#include "bkt/nuts.hpp"
#include "bkt/vi.hpp"

namespace bkt {

using json = nlohmann::ordered_json;

enum class Method { nuts, vi, map, em, fixed };
std::string_view method_name(Method m) noexcept;
Method parse_method(std::string_view s);

/// Everything needed to reproduce a fit.
struct FitConfig {
  Method method = Method::nuts;
  ModelSpec spec;
  PriorSpec priors;
  ColumnMapping mapping;
  std::uint64_t seed = 0;
  std::size_t min_length = 1;
  std::size_t threads = 1;
  NutsOptions nuts;
  ViOptions vi;
  MapOptions map;
  EmOptions em;

  /// Copy the seed and thread count into the method options.
  void propagate();
  void validate() const;
};

json to_json(const ModelSpec& spec);
json to_json(const PriorSpec& priors);
json to_json(const ColumnMapping& mapping);
json options_json(const FitConfig& config);
json to_json(const FitConfig& config);

/// Parsers accept partial documents; unspecified fields keep their current
/// values. Unknown keys are a ConfigError.
void from_json(const json& j, ModelSpec& spec);
void from_json(const json& j, PriorSpec& priors);
void from_json(const json& j, ColumnMapping& mapping);
void from_json(const json& j, FitConfig& config);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);

}  // namespace bkt

#endif  // BKT_CONFIG_HPP
