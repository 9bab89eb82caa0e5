#ifndef BKT_DATA_HPP
#define BKT_DATA_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bkt {

/// Maps the logical fields onto column names of the input table.
struct ColumnMapping {
  std::string student_id = "student_id";
  std::string problem_id = "problem_id";
  std::string kc_id = "kc_id";
  std::string correctness = "correct";
  std::string order = "timestamp";
  std::optional<std::string> group_id;
  std::vector<std::string> covariates;

  /// Throws ConfigError on empty or duplicated names.
  void validate() const;
};

enum class OrderKind { automatic, integer, timestamp };

struct InteractionRecord {
  std::string student;
  std::string problem;
  std::string kc;
  std::uint8_t correct = 0;
  /// Integer order value, or microseconds since the Unix epoch for timestamps.
  std::int64_t order_key = 0;
  std::optional<std::string> group;
  std::vector<double> covariates;
  /// 1-based data row in the source file.
  std::size_t row = 0;
};

struct InteractionTable {
  std::vector<InteractionRecord> records;
  std::vector<std::string> covariate_names;
  OrderKind order_kind = OrderKind::integer;
};

/// Parses "YYYY-MM-DD[ T]HH:MM[:SS[.ffffff]][Z]" or a bare date into
/// microseconds since the Unix epoch.
std::optional<std::int64_t> parse_timestamp(std::string_view s);
std::string format_timestamp(std::int64_t micros);

InteractionTable load_interactions(std::istream& in, const ColumnMapping& mapping,
                                   OrderKind kind = OrderKind::automatic);
InteractionTable load_interactions(const std::filesystem::path& path, const ColumnMapping& mapping,
                                   OrderKind kind = OrderKind::automatic);

/// One (kc, student) response sequence, sorted by order key.
struct Sequence {
  std::string kc;
  std::string student;
  std::optional<std::string> group;
  std::vector<std::uint8_t> responses;
  std::vector<std::string> problems;
  std::vector<std::int64_t> order_keys;
  std::vector<std::size_t> source_rows;
  std::vector<double> covariates;

  std::size_t size() const noexcept { return responses.size(); }
};

struct KcSequences {
  std::string kc;
  std::vector<Sequence> sequences;

  std::size_t interactions() const noexcept;
};

struct DropReport {
  std::size_t sequences_dropped = 0;
  std::size_t records_dropped = 0;
};

struct SequenceSet {
  std::vector<KcSequences> kcs;  // first-appearance order
  std::vector<std::string> covariate_names;
  OrderKind order_kind = OrderKind::integer;
  DropReport dropped;

  std::size_t records() const noexcept;
  const KcSequences* find(std::string_view kc) const noexcept;
};

SequenceSet build_sequences(const InteractionTable& table, bool require_group = false,
                            std::size_t min_length = 1);

/// Partition students uniformly at random. Every student lands on exactly one side.
std::pair<InteractionTable, InteractionTable> split_by_student(const InteractionTable& table,
                                                               double test_fraction,
                                                               std::uint64_t seed);

/// Long-format CSV of raw records in their stored order.
void write_interactions(std::ostream& out, const InteractionTable& table,
                        const ColumnMapping& mapping);

/// Long-format CSV of a sequence set using the mapping's column names.
void write_long_format(std::ostream& out, const SequenceSet& set, const ColumnMapping& mapping);

}  // namespace bkt

#endif  // BKT_DATA_HPP
