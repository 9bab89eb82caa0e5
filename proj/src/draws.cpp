#include "bkt/draws.hpp"

#include "bkt/error.hpp"

namespace bkt {

std::size_t PosteriorDraws::total_draws() const noexcept {
  std::size_t n = 0;
  for (const auto& c : chains) n += c.draws.size();
  return n;
}

std::size_t PosteriorDraws::divergences() const noexcept {
  std::size_t n = 0;
  for (const auto& c : chains) {
    for (const auto& s : c.stats) n += s.divergent;
  }
  return n;
}

void PosteriorDraws::validate() const {
  const std::size_t per = draws_per_chain();
  for (const auto& c : chains) {
    if (c.draws.size() != per) throw ConfigError("chains hold different numbers of draws");
    for (const auto& d : c.draws) {
      if (d.size() != names.size()) throw ConfigError("draw dimension does not match parameter names");
    }
  }
}

std::vector<double> PosteriorDraws::column(std::size_t chain, std::size_t param) const {
  const auto& c = chains.at(chain);
  std::vector<double> out;
  out.reserve(c.draws.size());
  for (const auto& d : c.draws) out.push_back(d.at(param));
  return out;
}

std::vector<std::vector<double>> PosteriorDraws::flatten() const {
  std::vector<std::vector<double>> out;
  out.reserve(total_draws());
  for (const auto& c : chains) out.insert(out.end(), c.draws.begin(), c.draws.end());
  return out;
}

}  // namespace bkt
