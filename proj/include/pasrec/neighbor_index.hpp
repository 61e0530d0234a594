#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pasrec/parallel.hpp"
#include "pasrec/similarity.hpp"
#include "pasrec/text.hpp"
#include "pasrec/types.hpp"

namespace pasrec {

struct IndexHeader {
  Measure measure = Measure::pas;
  NeighborRanking ranking = NeighborRanking::bis;
  SimilarityParams params;

  bool position_dependent() const { return measure == Measure::pas || measure == Measure::pas_uni; }

  friend bool operator==(const IndexHeader&, const IndexHeader&) = default;
};

/// One entry of N_i. `base` is the position-independent similarity of the
/// entry: cosine for the cosine measure, BIS otherwise.
struct Neighbor {
  ItemIndex item = 0;
  double base = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Per target item i, its neighbor set N_i with the precomputed values
/// s_{i'->i} (one per window position t = 1..k for pas and pas_uni).
/// Immutable once built.
class NeighborIndex {
 public:
  struct Incoming {
    ItemIndex target;
    std::uint32_t entry;
  };

  NeighborIndex() = default;

  NeighborIndex(IndexHeader header, std::vector<std::size_t> offsets, std::vector<Neighbor> entries,
                std::vector<double> values, std::vector<std::string> item_ids = {})
      : header_(header),
        offsets_(std::move(offsets)),
        entries_(std::move(entries)),
        values_(std::move(values)),
        item_ids_(std::move(item_ids)) {
    if (offsets_.empty() || offsets_.front() != 0 || offsets_.back() != entries_.size() ||
        !std::is_sorted(offsets_.begin(), offsets_.end())) {
      throw Error("neighbor index offsets are inconsistent");
    }
    if (values_.size() != entries_.size() * static_cast<std::size_t>(values_per_entry())) {
      throw Error("neighbor index value table has the wrong size");
    }
    if (!item_ids_.empty() && item_ids_.size() != n_items()) throw Error("neighbor index item map has the wrong size");
    for (const auto& e : entries_) {
      if (e.item >= n_items()) throw Error("neighbor index refers to an unknown item");
    }
    build_reverse();
  }

  const IndexHeader& header() const { return header_; }
  Measure measure() const { return header_.measure; }
  const SimilarityParams& params() const { return header_.params; }
  int k() const { return header_.params.k(); }
  std::size_t n_items() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t entry_count() const { return entries_.size(); }
  const std::vector<std::string>& item_ids() const { return item_ids_; }

  int values_per_entry() const { return header_.position_dependent() ? header_.params.k() : 0; }

  std::span<const Neighbor> neighbors(ItemIndex target) const {
    if (target >= n_items()) return {};
    return std::span<const Neighbor>(entries_).subspan(offsets_[target], offsets_[target + 1] - offsets_[target]);
  }

  /// Global entry number of neighbors(target)[0].
  std::size_t first_entry(ItemIndex target) const { return offsets_.at(target); }

  std::span<const double> position_values(std::size_t entry) const {
    const auto m = static_cast<std::size_t>(values_per_entry());
    return std::span<const double>(values_).subspan(entry * m, m);
  }

  /// s_{i'->i} of `entry` when i' sits at window position t.
  double value(std::size_t entry, int t) const {
    if (header_.position_dependent()) return values_[entry * static_cast<std::size_t>(k()) + static_cast<std::size_t>(t - 1)];
    return entries_[entry].base;
  }

  std::optional<std::size_t> find(ItemIndex target, ItemIndex source) const {
    const auto row = neighbors(target);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j].item == source) return offsets_[target] + j;
    }
    return std::nullopt;
  }

  /// Targets whose neighbor set contains `source`, ascending by target.
  std::span<const Incoming> reverse(ItemIndex source) const {
    if (source >= n_items()) return {};
    return std::span<const Incoming>(reverse_).subspan(reverse_offsets_[source],
                                                       reverse_offsets_[source + 1] - reverse_offsets_[source]);
  }

  friend bool operator==(const NeighborIndex& a, const NeighborIndex& b) {
    return a.header_ == b.header_ && a.offsets_ == b.offsets_ && a.entries_ == b.entries_ && a.values_ == b.values_ &&
           a.item_ids_ == b.item_ids_;
  }

 private:
  void build_reverse() {
    reverse_offsets_.assign(n_items() + 1, 0);
    for (const auto& e : entries_) ++reverse_offsets_[e.item + 1];
    for (std::size_t i = 0; i < n_items(); ++i) reverse_offsets_[i + 1] += reverse_offsets_[i];
    reverse_.resize(entries_.size());
    auto cursor = reverse_offsets_;
    for (std::size_t t = 0; t < n_items(); ++t) {
      for (std::size_t e = offsets_[t]; e < offsets_[t + 1]; ++e) {
        reverse_[cursor[entries_[e].item]++] = Incoming{static_cast<ItemIndex>(t), static_cast<std::uint32_t>(e)};
      }
    }
  }

  IndexHeader header_;
  std::vector<std::size_t> offsets_{0};
  std::vector<Neighbor> entries_;
  std::vector<double> values_;
  std::vector<std::string> item_ids_;
  std::vector<std::size_t> reverse_offsets_;
  std::vector<Incoming> reverse_;
};

/// Keeps, for every target i, the n_neighbors sources i' with the highest
/// ranking score (ties: lower item first). Candidates scoring zero are not
/// kept, since all their stored values are zero as well.
///
/// Ranking score: bis -> BIS; cosine -> cosine; pas_uni -> PAS(uni) at t = k;
/// pas -> BIS, or the maximum PAS value over t with NeighborRanking::max_over_t.
inline NeighborIndex build_neighbor_index(const PairStore& store, const SimilarityParams& params, Measure measure,
                                          NeighborRanking ranking = NeighborRanking::bis, int workers = 1,
                                          std::vector<std::string> item_ids = {}) {
  params.validate();
  if (store.ell_max() < params.ell) {
    throw ParameterError("pair store ell_max " + std::to_string(store.ell_max()) + " is smaller than ell " +
                         std::to_string(params.ell));
  }
  IndexHeader header{measure, ranking, params};
  if (measure == Measure::pas_uni) header.params.lambda = 1.0;
  const int k = params.k();
  const std::size_t per_entry = header.position_dependent() ? static_cast<std::size_t>(k) : 0;
  const std::size_t n_items = store.n_items();
  const std::size_t cap = static_cast<std::size_t>(params.n_neighbors);

  struct Row {
    std::vector<Neighbor> entries;
    std::vector<double> values;
  };
  std::vector<Row> rows(n_items);

  parallel_chunks(n_items, workers, [&](std::size_t begin, std::size_t end, int) {
    struct Candidate {
      double score;
      Neighbor entry;
      std::vector<double> values;
    };
    std::vector<Candidate> cands;
    for (std::size_t target = begin; target < end; ++target) {
      const auto tgt = static_cast<ItemIndex>(target);
      const auto sources = store.sources_of(tgt);
      cands.clear();
      for (std::size_t j = 0; j < sources.size(); ++j) {
        const ItemIndex src = sources[j];
        if (src == tgt) continue;
        const PairStats ps = store.stats_at(tgt, j);
        Candidate c{0.0, {src, 0.0}, {}};
        if (measure == Measure::cosine) {
          c.entry.base = cosine_similarity(ps, store.item_users(tgt), store.item_users(src));
          c.score = c.entry.base;
        } else {
          c.entry.base = bis_similarity(ps, params.ell, params.rho);
          c.score = c.entry.base;
          if (per_entry > 0) {
            c.values.resize(per_entry);
            for (int t = 1; t <= k; ++t) {
              c.values[static_cast<std::size_t>(t - 1)] = pas_similarity(ps, header.params, t);
            }
            if (measure == Measure::pas_uni) {
              c.score = c.values.back();
            } else if (ranking == NeighborRanking::max_over_t) {
              c.score = *std::max_element(c.values.begin(), c.values.end());
            }
          }
        }
        if (c.score > 0.0) cands.push_back(std::move(c));
      }
      const auto better = [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.entry.item < b.entry.item;
      };
      const std::size_t keep = std::min(cap, cands.size());
      std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(), better);
      Row& row = rows[target];
      for (std::size_t j = 0; j < keep; ++j) {
        row.entries.push_back(cands[j].entry);
        row.values.insert(row.values.end(), cands[j].values.begin(), cands[j].values.end());
      }
    }
  });

  std::vector<std::size_t> offsets(n_items + 1, 0);
  std::vector<Neighbor> entries;
  std::vector<double> values;
  for (std::size_t t = 0; t < n_items; ++t) {
    offsets[t + 1] = offsets[t] + rows[t].entries.size();
    entries.insert(entries.end(), rows[t].entries.begin(), rows[t].entries.end());
    values.insert(values.end(), rows[t].values.begin(), rows[t].values.end());
  }
  return NeighborIndex(header, std::move(offsets), std::move(entries), std::move(values), std::move(item_ids));
}

// ---------------------------------------------------------------------------
// Text artifact. Numbers use the shortest round-trip decimal form, so
// save -> load reproduces every double exactly.

inline constexpr int kIndexFormatVersion = 1;

inline void save_index(const NeighborIndex& index, std::ostream& out) {
  const auto& h = index.header();
  out << "# pasrec neighbor index\n";
  out << "format_version\t" << kIndexFormatVersion << '\n';
  out << "measure\t" << to_string(h.measure) << '\n';
  out << "ranking\t" << to_string(h.ranking) << '\n';
  out << "ell\t" << h.params.ell << '\n';
  out << "k\t" << h.params.k() << '\n';
  out << "rho\t" << text::format_double(h.params.rho) << '\n';
  out << "lambda\t" << text::format_double(h.params.lambda) << '\n';
  out << "scaling\t" << to_string(h.params.scaling) << '\n';
  out << "w\t" << text::format_double(h.params.w) << '\n';
  out << "n_neighbors\t" << h.params.n_neighbors << '\n';
  out << "values_per_neighbor\t" << index.values_per_entry() << '\n';
  out << "items\t" << index.n_items() << '\n';
  for (std::size_t i = 0; i < index.n_items(); ++i) {
    out << "item\t" << i << '\t' << (index.item_ids().empty() ? std::to_string(i) : index.item_ids()[i]) << '\n';
  }
  out << "entries\t" << index.entry_count() << '\n';
  for (std::size_t t = 0; t < index.n_items(); ++t) {
    const auto row = index.neighbors(static_cast<ItemIndex>(t));
    for (std::size_t j = 0; j < row.size(); ++j) {
      out << "row\t" << t << '\t' << row[j].item << '\t' << text::format_double(row[j].base);
      for (double v : index.position_values(index.first_entry(static_cast<ItemIndex>(t)) + j)) {
        out << '\t' << text::format_double(v);
      }
      out << '\n';
    }
  }
}

inline NeighborIndex load_index(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) -> Error {
    return Error("index line " + std::to_string(line_no) + ": " + what);
  };
  auto next = [&]() -> std::vector<std::string_view> {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line[0] != '#') return text::split(line, "\t");
    }
    throw fail("unexpected end of file");
  };
  auto field = [&](std::string_view key) -> std::string {
    auto f = next();
    if (f.size() != 2 || f[0] != key) throw fail("expected '" + std::string(key) + "'");
    return std::string(f[1]);
  };
  auto as_int = [&](const std::string& s) {
    auto v = text::parse_int<long long>(s);
    if (!v) throw fail("not an integer: " + s);
    return *v;
  };
  auto as_double = [&](std::string_view s) {
    auto v = text::parse_double(s);
    if (!v) throw fail("not a number: " + std::string(s));
    return *v;
  };

  if (as_int(field("format_version")) != kIndexFormatVersion) throw fail("unsupported index format version");
  IndexHeader h;
  h.measure = parse_measure(field("measure"));
  h.ranking = parse_ranking(field("ranking"));
  h.params.ell = static_cast<int>(as_int(field("ell")));
  if (as_int(field("k")) != h.params.ell) throw fail("k must equal ell");
  h.params.rho = as_double(field("rho"));
  h.params.lambda = as_double(field("lambda"));
  h.params.scaling = parse_scaling(field("scaling"));
  h.params.w = as_double(field("w"));
  h.params.n_neighbors = static_cast<int>(as_int(field("n_neighbors")));
  h.params.validate();
  const auto per_entry = static_cast<std::size_t>(as_int(field("values_per_neighbor")));
  const auto n_items = static_cast<std::size_t>(as_int(field("items")));
  std::vector<std::string> ids(n_items);
  for (std::size_t i = 0; i < n_items; ++i) {
    auto f = next();
    if (f.size() != 3 || f[0] != "item" || as_int(std::string(f[1])) != static_cast<long long>(i)) throw fail("bad item row");
    ids[i] = std::string(f[2]);
  }
  const auto n_entries = static_cast<std::size_t>(as_int(field("entries")));
  std::vector<std::size_t> offsets(n_items + 1, 0);
  std::vector<Neighbor> entries;
  std::vector<double> values;
  entries.reserve(n_entries);
  values.reserve(n_entries * per_entry);
  std::size_t last_target = 0;
  for (std::size_t e = 0; e < n_entries; ++e) {
    auto f = next();
    if (f.size() != 4 + per_entry || f[0] != "row") throw fail("bad neighbor row");
    const auto target = static_cast<std::size_t>(as_int(std::string(f[1])));
    if (target >= n_items || target < last_target) throw fail("neighbor rows out of order");
    last_target = target;
    ++offsets[target + 1];
    entries.push_back({static_cast<ItemIndex>(as_int(std::string(f[2]))), as_double(f[3])});
    for (std::size_t m = 0; m < per_entry; ++m) values.push_back(as_double(f[4 + m]));
  }
  for (std::size_t i = 0; i < n_items; ++i) offsets[i + 1] += offsets[i];
  return NeighborIndex(h, std::move(offsets), std::move(entries), std::move(values), std::move(ids));
}

inline void save_index(const NeighborIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write index " + path.string());
  save_index(index, out);
  if (!out) throw Error("failed writing index " + path.string());
}

inline NeighborIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read index " + path.string());
  return load_index(in);
}

}  // namespace pasrec
