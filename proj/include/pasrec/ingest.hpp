#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "pasrec/random.hpp"
#include "pasrec/text.hpp"
#include "pasrec/types.hpp"

namespace pasrec {

/// Error raised for a malformed input line; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Column layout of a delimiter-separated interaction log (0-based columns).
struct Schema {
  std::string delimiter = "::";
  int user_column = 0;
  int item_column = 1;
  std::optional<int> rating_column = 2;
  int timestamp_column = 3;
  bool has_header = false;

  static Schema movielens_dat() { return {}; }
  static Schema csv() { return Schema{",", 0, 1, 2, 3, false}; }
  static Schema tsv() { return Schema{"\t", 0, 1, 2, 3, false}; }

  void validate() const {
    if (delimiter.empty()) throw ParameterError("schema delimiter must not be empty");
    if (user_column < 0 || item_column < 0 || timestamp_column < 0 || (rating_column && *rating_column < 0)) {
      throw ParameterError("schema columns must be non-negative");
    }
    std::vector<int> cols{user_column, item_column, timestamp_column};
    if (rating_column) cols.push_back(*rating_column);
    std::sort(cols.begin(), cols.end());
    if (std::adjacent_find(cols.begin(), cols.end()) != cols.end()) {
      throw ParameterError("schema columns must be distinct");
    }
  }
};

enum class OnMalformed { fail, skip };

struct ParseResult {
  std::vector<InteractionRecord> records;
  std::size_t skipped = 0;
  std::optional<std::size_t> first_bad_line;
};

namespace detail {

// Accepts "5" as well as "5.0"-style integral reals (some exports store
// ratings and timestamps as floats).
inline std::optional<std::int64_t> parse_integral(std::string_view s) {
  if (auto v = text::parse_int<std::int64_t>(s)) return v;
  auto d = text::parse_double(s);
  if (!d || !std::isfinite(*d) || std::floor(*d) != *d || std::fabs(*d) > 9.0e15) return std::nullopt;
  return static_cast<std::int64_t>(*d);
}

inline std::optional<std::string> parse_line(std::string_view line, const Schema& schema,
                                             InteractionRecord& out) {
  const auto fields = text::split(line, schema.delimiter);
  const auto need = [&](int col) -> std::optional<std::string_view> {
    if (static_cast<std::size_t>(col) >= fields.size()) return std::nullopt;
    return text::trim(fields[static_cast<std::size_t>(col)]);
  };
  auto user = need(schema.user_column);
  auto item = need(schema.item_column);
  auto ts = need(schema.timestamp_column);
  if (!user || !item || !ts) return "expected at least " + std::to_string(1 + std::max({schema.user_column,
                                                                                        schema.item_column,
                                                                                        schema.timestamp_column,
                                                                                        schema.rating_column.value_or(0)})) +
                                    " fields, found " + std::to_string(fields.size());
  if (user->empty() || item->empty()) return std::string("empty user or item identifier");
  auto timestamp = parse_integral(*ts);
  if (!timestamp) return "timestamp is not an integer: '" + std::string(*ts) + "'";
  if (*timestamp < 0) return std::string("timestamp is negative");
  out.user = std::string(*user);
  out.item = std::string(*item);
  out.timestamp = *timestamp;
  out.rating.reset();
  if (schema.rating_column) {
    auto r = need(*schema.rating_column);
    if (!r) return std::string("missing rating column");
    auto rating = parse_integral(*r);
    if (!rating) return "rating is not an integer: '" + std::string(*r) + "'";
    out.rating = static_cast<int>(*rating);
  }
  return std::nullopt;
}

}  // namespace detail

/// One record per well-formed line, in file order. Blank lines are ignored.
inline ParseResult parse_interactions(std::istream& in, const Schema& schema,
                                      OnMalformed policy = OnMalformed::fail) {
  schema.validate();
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;
  InteractionRecord record;
  while (std::getline(in, line)) {
    ++line_no;
    if (schema.has_header && line_no == 1) continue;
    if (text::trim(line).empty()) continue;
    if (auto err = detail::parse_line(line, schema, record)) {
      if (policy == OnMalformed::fail) throw ParseError(line_no, *err);
      ++result.skipped;
      if (!result.first_bad_line) result.first_bad_line = line_no;
      continue;
    }
    result.records.push_back(record);
  }
  return result;
}

enum class FilterMode { rating_equals_5, all };

inline std::vector<InteractionRecord> filter_positive(std::vector<InteractionRecord> records, FilterMode mode) {
  if (mode == FilterMode::all) return records;
  std::vector<InteractionRecord> out;
  for (auto& r : records) {
    if (!r.rating) throw ParameterError("rating filter requested but record for user " + r.user + " has no rating");
    if (*r.rating == 5) out.push_back(std::move(r));
  }
  return out;
}

/// Keeps the earliest record of every (user, item) pair; equal timestamps
/// keep the first occurrence. Surviving records stay in input order.
inline std::vector<InteractionRecord> deduplicate(const std::vector<InteractionRecord>& records) {
  struct PairHash {
    std::size_t operator()(const std::pair<std::string_view, std::string_view>& p) const {
      const auto h = std::hash<std::string_view>{};
      return h(p.first) * 1000003u ^ h(p.second);
    }
  };
  std::unordered_map<std::pair<std::string_view, std::string_view>, std::size_t, PairHash> best;
  best.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto [it, inserted] = best.try_emplace({records[i].user, records[i].item}, i);
    if (!inserted && records[i].timestamp < records[it->second].timestamp) it->second = i;
  }
  std::vector<char> keep(records.size(), 0);
  for (const auto& [key, idx] : best) keep[idx] = 1;
  std::vector<InteractionRecord> out;
  out.reserve(best.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (keep[i]) out.push_back(records[i]);
  }
  return out;
}

/// Keeps every record of a seeded uniform subset of exactly `max_users`
/// users, or everything when there are at most `max_users` users.
inline std::vector<InteractionRecord> subsample_users(const std::vector<InteractionRecord>& records,
                                                      std::size_t max_users, std::uint64_t seed) {
  if (max_users < 1) throw ParameterError("max_users must be positive");
  std::vector<std::string> users;
  {
    std::unordered_set<std::string_view> seen;
    for (const auto& r : records) {
      if (seen.insert(r.user).second) users.push_back(r.user);
    }
  }
  if (users.size() <= max_users) return records;
  std::sort(users.begin(), users.end(), [](const auto& a, const auto& b) { return natural_less(a, b); });
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first max_users slots become the sample.
  for (std::size_t i = 0; i < max_users; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_below(rng, users.size() - i));
    std::swap(users[i], users[j]);
  }
  std::unordered_set<std::string_view> chosen(users.begin(), users.begin() + static_cast<std::ptrdiff_t>(max_users));
  std::vector<InteractionRecord> out;
  for (const auto& r : records) {
    if (chosen.count(r.user)) out.push_back(r);
  }
  return out;
}

struct DatasetStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t records = 0;
  double average_length = 0.0;
  std::size_t dropped_users = 0;
  std::size_t dropped_records = 0;

  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

/// Leave-last-two-out split. Index u in every per-user vector refers to
/// users.id(u); all of them hold at least one training item.
struct Dataset {
  IdMap users;
  IdMap items;
  std::vector<UserSequence> train;
  std::vector<std::vector<std::int64_t>> train_timestamps;
  std::vector<ItemIndex> validation;
  std::vector<ItemIndex> test;
  std::vector<std::int64_t> validation_timestamps;
  std::vector<std::int64_t> test_timestamps;
  DatasetStats stats;

  std::size_t n_users() const { return users.size(); }
  std::size_t n_items() const { return items.size(); }
};

inline constexpr std::size_t kMinInteractionsPerUser = 3;

/// Splits deduplicated records per user: chronologically last item to test,
/// second-to-last to validation, the rest to training. Users with fewer than
/// three interactions are dropped and counted.
inline Dataset build_dataset(const std::vector<InteractionRecord>& records) {
  std::map<std::string, std::vector<std::size_t>, decltype([](const std::string& a, const std::string& b) {
             return natural_less(a, b);
           })>
      by_user;
  for (std::size_t i = 0; i < records.size(); ++i) by_user[records[i].user].push_back(i);

  Dataset ds;
  std::vector<std::string> kept_users;
  std::vector<std::string> item_ids;
  for (auto& [user, idx] : by_user) {
    if (idx.size() < kMinInteractionsPerUser) {
      ++ds.stats.dropped_users;
      ds.stats.dropped_records += idx.size();
      continue;
    }
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const auto& ra = records[a];
      const auto& rb = records[b];
      if (ra.timestamp != rb.timestamp) return ra.timestamp < rb.timestamp;
      return natural_less(ra.item, rb.item);
    });
    kept_users.push_back(user);
    for (auto i : idx) item_ids.push_back(records[i].item);
  }
  ds.users = IdMap::from_ids(kept_users);
  ds.items = IdMap::from_ids(std::move(item_ids));

  for (std::size_t u = 0; u < ds.users.size(); ++u) {
    const auto& idx = by_user.at(ds.users.id(static_cast<std::uint32_t>(u)));
    std::vector<ItemIndex> items;
    std::vector<std::int64_t> times;
    for (std::size_t j = 0; j + 2 < idx.size(); ++j) {
      items.push_back(ds.items.at(records[idx[j]].item));
      times.push_back(records[idx[j]].timestamp);
    }
    const auto& valid = records[idx[idx.size() - 2]];
    const auto& test = records[idx.back()];
    try {
      ds.train.emplace_back(static_cast<UserIndex>(u), std::move(items));
    } catch (const ParameterError&) {
      throw ParameterError("build_dataset requires deduplicated records (user " + ds.users.id(static_cast<std::uint32_t>(u)) + ")");
    }
    ds.train_timestamps.push_back(std::move(times));
    ds.validation.push_back(ds.items.at(valid.item));
    ds.validation_timestamps.push_back(valid.timestamp);
    ds.test.push_back(ds.items.at(test.item));
    ds.test_timestamps.push_back(test.timestamp);
    ds.stats.records += idx.size();
  }
  ds.stats.users = ds.users.size();
  ds.stats.items = ds.items.size();
  ds.stats.average_length = ds.stats.users == 0 ? 0.0
                                                : static_cast<double>(ds.stats.records) / static_cast<double>(ds.stats.users);
  return ds;
}

// ---------------------------------------------------------------------------
// Persistence: train.tsv / valid.tsv / test.tsv plus stats.json.

inline constexpr int kDatasetFormatVersion = 1;

inline nlohmann::ordered_json stats_to_json(const DatasetStats& s) {
  nlohmann::ordered_json j;
  j["format_version"] = kDatasetFormatVersion;
  j["users"] = s.users;
  j["items"] = s.items;
  j["records"] = s.records;
  j["average_length"] = s.average_length;
  j["dropped_users"] = s.dropped_users;
  j["dropped_records"] = s.dropped_records;
  return j;
}

inline void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto header = "# pasrec dataset format " + std::to_string(kDatasetFormatVersion) + "\nuser\titem\ttimestamp\n";
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    out << header;
    return out;
  };
  auto train = open("train.tsv");
  auto valid = open("valid.tsv");
  auto test = open("test.tsv");
  for (std::size_t u = 0; u < ds.n_users(); ++u) {
    const auto& user = ds.users.id(static_cast<std::uint32_t>(u));
    const auto items = ds.train[u].items();
    for (std::size_t j = 0; j < items.size(); ++j) {
      train << user << '\t' << ds.items.id(items[j]) << '\t' << ds.train_timestamps[u][j] << '\n';
    }
    valid << user << '\t' << ds.items.id(ds.validation[u]) << '\t' << ds.validation_timestamps[u] << '\n';
    test << user << '\t' << ds.items.id(ds.test[u]) << '\t' << ds.test_timestamps[u] << '\n';
  }
  std::ofstream stats(dir / "stats.json", std::ios::binary);
  stats << stats_to_json(ds.stats).dump(2) << '\n';
  if (!train || !valid || !test || !stats) throw Error("failed writing dataset to " + dir.string());
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
  struct Row {
    std::string user, item;
    std::int64_t ts;
  };
  auto load = [&](const char* name) {
    std::ifstream in(dir / name, std::ios::binary);
    if (!in) throw Error("cannot read " + (dir / name).string());
    std::vector<Row> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#' || line.rfind("user\t", 0) == 0) continue;
      const auto f = text::split(line, "\t");
      std::optional<std::int64_t> ts;
      if (f.size() == 3) ts = text::parse_int<std::int64_t>(f[2]);
      if (!ts) throw ParseError(line_no, std::string("malformed row in ") + name);
      rows.push_back({std::string(f[0]), std::string(f[1]), *ts});
    }
    return rows;
  };
  const auto train = load("train.tsv");
  const auto valid = load("valid.tsv");
  const auto test = load("test.tsv");
  if (valid.size() != test.size()) throw Error("valid.tsv and test.tsv disagree on users");

  Dataset ds;
  std::vector<std::string> users, items;
  for (const auto* rows : {&train, &valid, &test}) {
    for (const auto& r : *rows) items.push_back(r.item);
  }
  for (const auto& r : valid) users.push_back(r.user);
  ds.users = IdMap::from_ids(users);
  ds.items = IdMap::from_ids(std::move(items));
  if (ds.users.size() != valid.size()) throw Error("valid.tsv lists a user twice");

  const auto n = ds.users.size();
  std::vector<std::vector<ItemIndex>> seqs(n);
  ds.train_timestamps.assign(n, {});
  ds.validation.assign(n, 0);
  ds.test.assign(n, 0);
  ds.validation_timestamps.assign(n, 0);
  ds.test_timestamps.assign(n, 0);
  for (const auto& r : train) {
    auto u = ds.users.find(r.user);
    if (!u) throw Error("train.tsv user " + r.user + " missing from valid.tsv");
    seqs[*u].push_back(ds.items.at(r.item));
    ds.train_timestamps[*u].push_back(r.ts);
  }
  for (const auto& r : valid) {
    const auto u = ds.users.at(r.user);
    ds.validation[u] = ds.items.at(r.item);
    ds.validation_timestamps[u] = r.ts;
  }
  for (const auto& r : test) {
    auto u = ds.users.find(r.user);
    if (!u) throw Error("test.tsv user " + r.user + " missing from valid.tsv");
    ds.test[*u] = ds.items.at(r.item);
    ds.test_timestamps[*u] = r.ts;
  }
  for (std::size_t u = 0; u < n; ++u) ds.train.emplace_back(static_cast<UserIndex>(u), std::move(seqs[u]));

  ds.stats.users = n;
  ds.stats.items = ds.items.size();
  ds.stats.records = train.size() + valid.size() + test.size();
  ds.stats.average_length = n == 0 ? 0.0 : static_cast<double>(ds.stats.records) / static_cast<double>(n);
  std::ifstream stats(dir / "stats.json");
  if (stats) {
    const auto j = nlohmann::json::parse(stats);
    ds.stats.dropped_users = j.value("dropped_users", std::size_t{0});
    ds.stats.dropped_records = j.value("dropped_records", std::size_t{0});
  }
  return ds;
}

}  // namespace pasrec
