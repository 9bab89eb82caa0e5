#ifndef BKT_CSV_HPP
#define BKT_CSV_HPP

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace bkt::csv {

/// Minimal RFC-4180 reader: comma delimiter, double-quote escaping,
/// CRLF or LF line ends.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  /// Next record, or nullopt at end of input.
  std::optional<std::vector<std::string>> next();

 private:
  std::istream& in_;
};

/// Quote a field only when it needs it.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest round-tripping decimal representation of a double.
std::string format_double(double v);
/// Whole-field decimal parse after trimming blanks; nullopt on any leftover.
std::optional<double> parse_double(std::string_view s);

}  // namespace bkt::csv

#endif  // BKT_CSV_HPP
