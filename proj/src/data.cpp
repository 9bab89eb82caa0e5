#include "bkt/data.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "bkt/csv.hpp"
#include "bkt/error.hpp"
#include "bkt/rng.hpp"

namespace bkt {

namespace {

// Howard Hinnant's days_from_civil.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

bool parse_uint(std::string_view s, std::size_t& pos, std::size_t width, unsigned& out) {
  if (pos + width > s.size()) return false;
  unsigned v = 0;
  for (std::size_t i = 0; i < width; ++i) {
    const char c = s[pos + i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + static_cast<unsigned>(c - '0');
  }
  pos += width;
  out = v;
  return true;
}

std::optional<std::int64_t> parse_integer(std::string_view s) {
  std::int64_t v = 0;
  if (s.empty()) return std::nullopt;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<std::uint8_t> parse_correct(std::string_view s) {
  s = trim(s);
  if (s == "0" || s == "0.0" || s == "0.") return 0;
  if (s == "1" || s == "1.0" || s == "1.") return 1;
  return std::nullopt;
}

}  // namespace

void ColumnMapping::validate() const {
  std::vector<std::string> names{student_id, problem_id, kc_id, correctness, order};
  if (group_id) names.push_back(*group_id);
  names.insert(names.end(), covariates.begin(), covariates.end());
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty()) throw ConfigError("column mapping contains an empty name");
    if (!seen.insert(n).second) throw ConfigError("column '" + n + "' mapped more than once");
  }
}

std::optional<std::int64_t> parse_timestamp(std::string_view s) {
  s = trim(s);
  std::size_t pos = 0;
  unsigned year, month, day;
  if (!parse_uint(s, pos, 4, year)) return std::nullopt;
  if (pos >= s.size() || s[pos++] != '-') return std::nullopt;
  if (!parse_uint(s, pos, 2, month)) return std::nullopt;
  if (pos >= s.size() || s[pos++] != '-') return std::nullopt;
  if (!parse_uint(s, pos, 2, day)) return std::nullopt;
  if (month < 1 || month > 12 || day < 1 || day > 31) return std::nullopt;
  unsigned hh = 0, mm = 0, ss = 0;
  std::int64_t micros = 0;
  if (pos < s.size()) {
    if (s[pos] != ' ' && s[pos] != 'T') return std::nullopt;
    ++pos;
    if (!parse_uint(s, pos, 2, hh)) return std::nullopt;
    if (pos >= s.size() || s[pos++] != ':') return std::nullopt;
    if (!parse_uint(s, pos, 2, mm)) return std::nullopt;
    if (pos < s.size() && s[pos] == ':') {
      ++pos;
      if (!parse_uint(s, pos, 2, ss)) return std::nullopt;
      if (pos < s.size() && s[pos] == '.') {
        ++pos;
        std::int64_t scale = 100000;
        std::size_t digits = 0;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
          if (scale > 0) micros += (s[pos] - '0') * scale;
          scale /= 10;
          ++pos;
          ++digits;
        }
        if (digits == 0) return std::nullopt;
      }
    }
    if (pos < s.size() && s[pos] == 'Z') ++pos;
    if (pos != s.size()) return std::nullopt;
    if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
  }
  const std::int64_t days = days_from_civil(year, month, day);
  const std::int64_t secs = days * 86400 + hh * 3600 + mm * 60 + ss;
  return secs * 1000000 + micros;
}

std::string format_timestamp(std::int64_t micros) {
  std::int64_t secs = micros / 1000000;
  std::int64_t frac = micros % 1000000;
  if (frac < 0) {
    frac += 1000000;
    --secs;
  }
  std::int64_t days = secs / 86400;
  std::int64_t rem = secs % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  std::int64_t y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[48];
  if (frac == 0) {
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02u %02lld:%02lld:%02lld",
                  static_cast<long long>(y), m, d, static_cast<long long>(rem / 3600),
                  static_cast<long long>((rem / 60) % 60), static_cast<long long>(rem % 60));
  } else {
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02u %02lld:%02lld:%02lld.%06lld",
                  static_cast<long long>(y), m, d, static_cast<long long>(rem / 3600),
                  static_cast<long long>((rem / 60) % 60), static_cast<long long>(rem % 60),
                  static_cast<long long>(frac));
  }
  return buf;
}

InteractionTable load_interactions(std::istream& in, const ColumnMapping& mapping, OrderKind kind) {
  mapping.validate();
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) throw SchemaError("input has no header row");
  if (!header->empty() && header->front().rfind("\xEF\xBB\xBF", 0) == 0) {
    header->front().erase(0, 3);
  }
  std::unordered_map<std::string, std::size_t> columns;
  for (std::size_t i = 0; i < header->size(); ++i) columns.emplace((*header)[i], i);
  auto column = [&](const std::string& name) {
    auto it = columns.find(name);
    if (it == columns.end()) throw SchemaError("missing required column '" + name + "'");
    return it->second;
  };
  const std::size_t c_student = column(mapping.student_id);
  const std::size_t c_problem = column(mapping.problem_id);
  const std::size_t c_kc = column(mapping.kc_id);
  const std::size_t c_correct = column(mapping.correctness);
  const std::size_t c_order = column(mapping.order);
  std::optional<std::size_t> c_group;
  if (mapping.group_id) c_group = column(*mapping.group_id);
  std::vector<std::size_t> c_cov;
  for (const auto& name : mapping.covariates) c_cov.push_back(column(name));

  InteractionTable table;
  table.covariate_names = mapping.covariates;
  std::optional<OrderKind> resolved;
  if (kind != OrderKind::automatic) resolved = kind;

  std::size_t row = 0;
  while (auto fields = reader.next()) {
    ++row;
    if (fields->size() == 1 && trim((*fields)[0]).empty()) continue;  // blank line
    if (fields->size() < header->size()) {
      throw RowError(row, "expected " + std::to_string(header->size()) + " fields, got " +
                              std::to_string(fields->size()));
    }
    InteractionRecord rec;
    rec.row = row;
    rec.student = (*fields)[c_student];
    rec.problem = (*fields)[c_problem];
    rec.kc = (*fields)[c_kc];
    if (rec.student.empty()) throw RowError(row, "empty " + mapping.student_id);
    if (rec.kc.empty()) throw RowError(row, "empty " + mapping.kc_id);
    auto correct = parse_correct((*fields)[c_correct]);
    if (!correct) {
      throw RowError(row, "correctness value '" + (*fields)[c_correct] + "' is not 0 or 1");
    }
    rec.correct = *correct;

    const std::string_view order_text = trim((*fields)[c_order]);
    if (!resolved) {
      resolved = parse_integer(order_text) ? OrderKind::integer : OrderKind::timestamp;
    }
    auto key = *resolved == OrderKind::integer ? parse_integer(order_text)
                                               : parse_timestamp(order_text);
    if (!key) {
      throw RowError(row, "cannot parse order value '" + std::string(order_text) + "' as " +
                              (*resolved == OrderKind::integer ? "integer" : "timestamp"));
    }
    rec.order_key = *key;

    if (c_group) {
      const std::string& g = (*fields)[*c_group];
      if (!trim(g).empty()) rec.group = g;
    }
    for (std::size_t i = 0; i < c_cov.size(); ++i) {
      auto v = csv::parse_double((*fields)[c_cov[i]]);
      if (!v) {
        throw RowError(row, "covariate '" + mapping.covariates[i] + "' value '" +
                                (*fields)[c_cov[i]] + "' is not numeric");
      }
      rec.covariates.push_back(*v);
    }
    table.records.push_back(std::move(rec));
  }
  table.order_kind = resolved.value_or(OrderKind::integer);
  return table;
}

InteractionTable load_interactions(const std::filesystem::path& path, const ColumnMapping& mapping,
                                   OrderKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return load_interactions(in, mapping, kind);
}

std::size_t KcSequences::interactions() const noexcept {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.size();
  return n;
}

std::size_t SequenceSet::records() const noexcept {
  std::size_t n = 0;
  for (const auto& k : kcs) n += k.interactions();
  return n;
}

const KcSequences* SequenceSet::find(std::string_view kc) const noexcept {
  for (const auto& k : kcs) {
    if (k.kc == kc) return &k;
  }
  return nullptr;
}

SequenceSet build_sequences(const InteractionTable& table, bool require_group,
                            std::size_t min_length) {
  if (min_length == 0) throw ConfigError("min_length must be positive");
  SequenceSet set;
  set.covariate_names = table.covariate_names;
  set.order_kind = table.order_kind;

  std::map<std::string, const std::vector<double>*> student_covariates;
  std::unordered_map<std::string, std::size_t> kc_index;
  std::vector<std::unordered_map<std::string, std::size_t>> student_index;
  std::vector<std::vector<std::vector<std::size_t>>> members;  // kc -> seq -> record idx

  for (std::size_t i = 0; i < table.records.size(); ++i) {
    const auto& r = table.records[i];
    if (require_group && !r.group) {
      throw RowError(r.row, "group column required by the model but empty");
    }
    if (!table.covariate_names.empty()) {
      auto [it, inserted] = student_covariates.emplace(r.student, &r.covariates);
      if (!inserted && *it->second != r.covariates) {
        throw RowError(r.row, "covariates for student '" + r.student + "' differ between records");
      }
    }
    auto [kit, knew] = kc_index.emplace(r.kc, set.kcs.size());
    if (knew) {
      set.kcs.push_back({r.kc, {}});
      student_index.emplace_back();
      members.emplace_back();
    }
    const std::size_t k = kit->second;
    auto [sit, snew] = student_index[k].emplace(r.student, members[k].size());
    if (snew) members[k].emplace_back();
    members[k][sit->second].push_back(i);
  }

  for (std::size_t k = 0; k < set.kcs.size(); ++k) {
    for (auto& idx : members[k]) {
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return table.records[a].order_key < table.records[b].order_key;
      });
      if (idx.size() < min_length) {
        ++set.dropped.sequences_dropped;
        set.dropped.records_dropped += idx.size();
        continue;
      }
      Sequence seq;
      const auto& first = table.records[idx.front()];
      seq.kc = first.kc;
      seq.student = first.student;
      seq.group = first.group;
      seq.covariates = first.covariates;
      for (std::size_t i : idx) {
        const auto& r = table.records[i];
        if (r.group != seq.group) {
          throw RowError(r.row, "student '" + r.student + "' assigned to more than one group in kc '" +
                                    r.kc + "'");
        }
        seq.responses.push_back(r.correct);
        seq.problems.push_back(r.problem);
        seq.order_keys.push_back(r.order_key);
        seq.source_rows.push_back(r.row);
      }
      set.kcs[k].sequences.push_back(std::move(seq));
    }
  }
  // KCs whose every sequence was filtered out carry no information.
  std::erase_if(set.kcs, [](const KcSequences& k) { return k.sequences.empty(); });
  return set;
}

std::pair<InteractionTable, InteractionTable> split_by_student(const InteractionTable& table,
                                                               double test_fraction,
                                                               std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test fraction must lie in (0, 1)");
  }
  std::vector<std::string> students;
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& r : table.records) {
    if (seen.emplace(r.student, students.size()).second) students.push_back(r.student);
  }
  if (students.size() < 2) throw ConfigError("splitting requires at least two students");

  Rng rng = make_rng(seed);
  std::vector<std::size_t> order(students.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * students.size()));
  n_test = std::clamp<std::size_t>(n_test, 1, students.size() - 1);
  std::vector<bool> is_test(students.size(), false);
  for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;

  InteractionTable train, test;
  train.covariate_names = test.covariate_names = table.covariate_names;
  train.order_kind = test.order_kind = table.order_kind;
  for (const auto& r : table.records) {
    (is_test[seen.at(r.student)] ? test : train).records.push_back(r);
  }
  return {std::move(train), std::move(test)};
}

void write_interactions(std::ostream& out, const InteractionTable& table,
                        const ColumnMapping& mapping) {
  std::vector<std::string> header{mapping.student_id, mapping.problem_id, mapping.kc_id,
                                  mapping.correctness, mapping.order};
  const bool with_group = mapping.group_id.has_value();
  if (with_group) header.push_back(*mapping.group_id);
  for (const auto& c : table.covariate_names) header.push_back(c);
  csv::write_row(out, header);
  for (const auto& r : table.records) {
    std::vector<std::string> row{r.student, r.problem, r.kc, std::to_string(r.correct),
                                 table.order_kind == OrderKind::timestamp
                                     ? format_timestamp(r.order_key)
                                     : std::to_string(r.order_key)};
    if (with_group) row.push_back(r.group.value_or(""));
    for (double c : r.covariates) row.push_back(csv::format_double(c));
    csv::write_row(out, row);
  }
}

void write_long_format(std::ostream& out, const SequenceSet& set, const ColumnMapping& mapping) {
  std::vector<std::string> header{mapping.student_id, mapping.problem_id, mapping.kc_id,
                                  mapping.correctness, mapping.order};
  const bool with_group = mapping.group_id.has_value();
  if (with_group) header.push_back(*mapping.group_id);
  for (const auto& c : set.covariate_names) header.push_back(c);
  csv::write_row(out, header);
  for (const auto& kc : set.kcs) {
    for (const auto& s : kc.sequences) {
      for (std::size_t t = 0; t < s.size(); ++t) {
        std::vector<std::string> row{s.student, s.problems[t], s.kc,
                                     std::to_string(s.responses[t]),
                                     set.order_kind == OrderKind::timestamp
                                         ? format_timestamp(s.order_keys[t])
                                         : std::to_string(s.order_keys[t])};
        if (with_group) row.push_back(s.group.value_or(""));
        for (double c : s.covariates) row.push_back(csv::format_double(c));
        csv::write_row(out, row);
      }
    }
  }
}

}  // namespace bkt
