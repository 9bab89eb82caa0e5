#ifndef BKT_SIM_HPP
#define BKT_SIM_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bkt/data.hpp"
#include "bkt/model_core.hpp"

namespace bkt {

/// A block of simulated students sharing one parameter set per KC.
struct SimGroup {
  std::string label;            // empty for ungrouped data
  std::size_t n_students = 0;
  std::vector<BktParams> params;  // one per KC, or a single entry shared by all KCs
};

struct SimConfig {
  std::vector<SimGroup> groups;
  std::size_t n_problems = 30;
  std::size_t n_kcs = 1;
  double retention = 1.0;  // fraction of problems kept per student, in (0, 1]
  std::uint64_t seed = 0;

  /// Single ungrouped block, the shape of the classical example.
  static SimConfig standard(std::size_t n_students, std::size_t n_problems, std::size_t n_kcs,
                            double retention, const BktParams& params, std::uint64_t seed);
  void validate() const;
  std::size_t kept_per_student() const;
};

struct SimulatedData {
  InteractionTable table;
  /// Latent mastery over all n_problems opportunities, one row per
  /// (kc, student) in record order, before retention.
  struct Latent {
    std::string kc;
    std::string student;
    std::vector<std::uint8_t> known;
    std::vector<std::uint8_t> responses;
  };
  std::vector<Latent> latent;
};

/// Draw order per (kc, student): initial state, then for each problem the
/// emission followed by the transition to the next problem, then the
/// retention subset. One RNG stream per call.
SimulatedData simulate(const SimConfig& config);

void write_latent_csv(std::ostream& out, const SimulatedData& data);

/// Column mapping matching the simulator's output headers.
ColumnMapping simulated_mapping(bool grouped);

}  // namespace bkt

#endif  // BKT_SIM_HPP
