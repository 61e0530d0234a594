#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pasrec/ingest.hpp"
#include "pasrec/neighbor_index.hpp"
#include "pasrec/parallel.hpp"
#include "pasrec/predictor.hpp"
#include "pasrec/similarity.hpp"
#include "pasrec/text.hpp"
#include "pasrec/types.hpp"

namespace pasrec {

/// 1-based rank of the held-out item; nullopt for "not ranked".
using Rank = std::optional<std::size_t>;

/// Single relevant item: 1 / log2(rank + 1) inside the top K, else 0.
inline double ndcg_at_k(Rank rank, std::size_t K) {
  if (!rank || *rank < 1 || *rank > K) return 0.0;
  return 1.0 / std::log2(static_cast<double>(*rank) + 1.0);
}

inline int one_call_at_k(Rank rank, std::size_t K) { return rank && *rank >= 1 && *rank <= K ? 1 : 0; }

enum class Split { validation, test };

inline std::string_view to_string(Split s) { return s == Split::validation ? "validation" : "test"; }

inline Split parse_split(std::string_view s) {
  if (s == "validation" || s == "valid") return Split::validation;
  if (s == "test") return Split::test;
  throw ParameterError("unknown split: " + std::string(s));
}

struct EvalConfig {
  Measure measure = Measure::pas;
  SimilarityParams params;
  NeighborRanking ranking = NeighborRanking::bis;

  /// Method name in the style of published result tables.
  std::string method() const {
    const std::string sub = std::string(to_string(params.scaling)).substr(2);
    switch (measure) {
      case Measure::bis: return "BIS";
      case Measure::cosine: return "CS";
      case Measure::pas_uni: return "PAS_" + sub + "(uni)";
      case Measure::pas: return "PAS_" + sub + "(" + text::format_double(params.lambda) + ")";
    }
    return "?";
  }

  static EvalConfig from_index(const NeighborIndex& index) {
    return EvalConfig{index.measure(), index.params(), index.header().ranking};
  }

  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

struct EvalRow {
  EvalConfig config;
  std::string dataset;
  Split split = Split::validation;
  std::size_t K = 5;
  double ndcg = 0.0;
  double one_call = 0.0;
  std::size_t users = 0;
  std::size_t skipped_users = 0;
};

namespace detail {

inline void check_config(const NeighborIndex& index, const EvalConfig& expected) {
  const auto& have = index.params();
  const auto& want = expected.params;
  auto mismatch = [](const std::string& field, const std::string& has, const std::string& wants) {
    throw ConfigError("params mismatch: " + field + " (index has " + has + ", requested " + wants + ")");
  };
  const auto m = expected.measure;
  if (index.measure() != m) mismatch("measure", std::string(to_string(index.measure())), std::string(to_string(m)));
  if (have.ell != want.ell) mismatch("ell", std::to_string(have.ell), std::to_string(want.ell));
  if (have.n_neighbors != want.n_neighbors) {
    mismatch("n_neighbors", std::to_string(have.n_neighbors), std::to_string(want.n_neighbors));
  }
  if ((m == Measure::bis || m == Measure::pas) && have.rho != want.rho) {
    mismatch("rho", text::format_double(have.rho), text::format_double(want.rho));
  }
  if (m == Measure::pas && have.lambda != want.lambda) {
    mismatch("lambda", text::format_double(have.lambda), text::format_double(want.lambda));
  }
  if (m == Measure::pas || m == Measure::pas_uni) {
    if (have.scaling != want.scaling) {
      mismatch("scaling", std::string(to_string(have.scaling)), std::string(to_string(want.scaling)));
    }
    if (have.w != want.w) mismatch("w", text::format_double(have.w), text::format_double(want.w));
  }
  if (m == Measure::pas && index.header().ranking != expected.ranking) {
    mismatch("ranking", std::string(to_string(index.header().ranking)), std::string(to_string(expected.ranking)));
  }
}

inline void check_items(const Dataset& dataset, const NeighborIndex& index) {
  if (index.n_items() != dataset.n_items()) {
    throw ConfigError("params mismatch: items (index has " + std::to_string(index.n_items()) + ", dataset has " +
                      std::to_string(dataset.n_items()) + ")");
  }
  if (!index.item_ids().empty() && index.item_ids() != dataset.items.ids()) {
    throw ConfigError("params mismatch: items (index item mapping differs from the dataset)");
  }
}

}  // namespace detail

/// Rank of `held_out` among all items not in `known` (sorted), after
/// scorer.accumulate() has run for the user's window. Ties rank the lower
/// item first.
inline std::size_t rank_among_unknown(const Scorer& scorer, std::span<const ItemIndex> touched,
                                      std::span<const ItemIndex> known, ItemIndex held_out) {
  const double s = scorer.score(held_out);
  const auto is_known = [&](ItemIndex i) { return std::binary_search(known.begin(), known.end(), i); };
  std::size_t beat = 0;
  std::size_t touched_below = 0;
  for (ItemIndex t : touched) {
    if (t == held_out || is_known(t)) continue;
    const double st = scorer.score(t);
    if (st > s || (st == s && t < held_out)) ++beat;
    if (t < held_out) ++touched_below;
  }
  if (!(s > 0.0)) {
    // Untouched candidates score exactly 0 and tie with the held-out item.
    const auto known_below = static_cast<std::size_t>(std::lower_bound(known.begin(), known.end(), held_out) - known.begin());
    beat += held_out - known_below - touched_below;
  }
  return beat + 1;
}

/// Leave-one-out evaluation of every user on `split`. The window is the last
/// k training items (plus the validation item for the test split); the
/// held-out item is ranked against the whole catalog minus the user's history.
inline EvalRow evaluate(const Dataset& dataset, const NeighborIndex& index, Split split, std::size_t K = 5,
                        int workers = 1, const std::optional<EvalConfig>& expected = std::nullopt,
                        std::string dataset_label = {}) {
  if (K < 1) throw ParameterError("K must be positive");
  detail::check_items(dataset, index);
  if (expected) detail::check_config(index, *expected);

  const std::size_t n = dataset.n_users();
  std::vector<double> ndcg(n, 0.0);
  std::vector<int> hit(n, 0);
  std::vector<char> used(n, 0);

  parallel_chunks(n, workers, [&](std::size_t begin, std::size_t end, int) {
    Scorer scorer(index);
    std::vector<ItemIndex> history;
    std::vector<ItemIndex> known;
    for (std::size_t u = begin; u < end; ++u) {
      const auto train = dataset.train[u].items();
      history.assign(train.begin(), train.end());
      if (split == Split::test) history.push_back(dataset.validation[u]);
      if (history.empty()) continue;
      const ItemIndex held_out = split == Split::test ? dataset.test[u] : dataset.validation[u];
      known = history;
      std::sort(known.begin(), known.end());
      if (std::binary_search(known.begin(), known.end(), held_out)) continue;

      const auto window = make_session_window(history, index.k());
      const auto touched = scorer.accumulate(window);
      const Rank rank = rank_among_unknown(scorer, touched, known, held_out);
      ndcg[u] = ndcg_at_k(rank, K);
      hit[u] = one_call_at_k(rank, K);
      used[u] = 1;
    }
  });

  EvalRow row;
  row.config = EvalConfig::from_index(index);
  row.dataset = std::move(dataset_label);
  row.split = split;
  row.K = K;
  double ndcg_sum = 0.0;
  double hit_sum = 0.0;
  for (std::size_t u = 0; u < n; ++u) {
    if (!used[u]) {
      ++row.skipped_users;
      continue;
    }
    ++row.users;
    ndcg_sum += ndcg[u];
    hit_sum += hit[u];
  }
  if (row.users > 0) {
    row.ndcg = ndcg_sum / static_cast<double>(row.users);
    row.one_call = hit_sum / static_cast<double>(row.users);
  }
  return row;
}

// ---------------------------------------------------------------------------
// Grid search

struct GridSpec {
  Measure measure = Measure::pas;
  std::vector<int> ells{5, 10, 20, 40};
  std::vector<double> lambdas{0.5};
  std::vector<Scaling> scalings{Scaling::h_a};
  double rho = 0.2;
  double w = 2.0;
  int n_neighbors = 20;
  NeighborRanking ranking = NeighborRanking::bis;
};

/// Expands a grid description into configurations. Parameters a measure ignores are not
/// swept: bis and cosine vary only ell, pas_uni varies ell and scaling.
inline std::vector<EvalConfig> make_grid(const GridSpec& spec) {
  std::vector<EvalConfig> grid;
  const bool uses_lambda = spec.measure == Measure::pas;
  const bool uses_scaling = spec.measure == Measure::pas || spec.measure == Measure::pas_uni;
  const std::vector<double> lambdas = uses_lambda ? spec.lambdas
                                      : spec.measure == Measure::pas_uni ? std::vector<double>{1.0}
                                                                         : std::vector<double>{0.0};
  const std::vector<Scaling> scalings = uses_scaling ? spec.scalings : std::vector<Scaling>{Scaling::h_a};
  for (Scaling s : scalings) {
    for (double lambda : lambdas) {
      for (int ell : spec.ells) {
        EvalConfig c;
        c.measure = spec.measure;
        c.ranking = spec.ranking;
        c.params.ell = ell;
        c.params.rho = spec.rho;
        c.params.lambda = lambda;
        c.params.scaling = s;
        c.params.w = spec.w;
        c.params.n_neighbors = spec.n_neighbors;
        c.params.validate();
        grid.push_back(c);
      }
    }
  }
  return grid;
}

struct GridResult {
  std::vector<EvalRow> validation;
  std::size_t best = 0;
  EvalRow test;
};

/// Evaluates every configuration on validation, picks the best 1-call@K
/// (ties: smaller k, then smaller lambda, then grid order) and reports it on
/// test. One pair-count pass serves the whole grid.
inline GridResult grid_search(const Dataset& dataset, std::span<const EvalConfig> grid, std::size_t K = 5,
                              int workers = 1, std::string dataset_label = {}) {
  if (grid.empty()) throw ParameterError("grid must not be empty");
  int ell_max = 0;
  for (const auto& c : grid) ell_max = std::max(ell_max, c.params.ell);
  const PairStore store = count_pairs(dataset.train, ell_max, dataset.n_items(), workers);

  GridResult result;
  for (const auto& c : grid) {
    const auto index = build_neighbor_index(store, c.params, c.measure, c.ranking, workers);
    auto row = evaluate(dataset, index, Split::validation, K, workers, std::nullopt, dataset_label);
    row.config = c;
    result.validation.push_back(std::move(row));
  }
  for (std::size_t i = 1; i < result.validation.size(); ++i) {
    const auto& a = result.validation[i];
    const auto& b = result.validation[result.best];
    if (a.one_call > b.one_call ||
        (a.one_call == b.one_call &&
         (a.config.params.k() < b.config.params.k() ||
          (a.config.params.k() == b.config.params.k() && a.config.params.lambda < b.config.params.lambda)))) {
      result.best = i;
    }
  }
  const auto& chosen = grid[result.best];
  const auto index = build_neighbor_index(store, chosen.params, chosen.measure, chosen.ranking, workers);
  result.test = evaluate(dataset, index, Split::test, K, workers, std::nullopt, dataset_label);
  result.test.config = chosen;
  return result;
}

// ---------------------------------------------------------------------------
// Reports

inline constexpr int kReportFormatVersion = 1;

inline void write_report_tsv(std::span<const EvalRow> rows, std::ostream& out) {
  out << "# pasrec eval report format " << kReportFormatVersion << '\n';
  const std::string K = rows.empty() ? "K" : std::to_string(rows.front().K);
  out << "method\tdataset\tNDCG@" << K << "\t1-call@" << K
      << "\tsplit\tusers\tskipped_users\tmeasure\tk\tell\trho\tlambda\tscaling\tw\tn_neighbors\tranking\n";
  for (const auto& r : rows) {
    const auto& p = r.config.params;
    out << r.config.method() << '\t' << r.dataset << '\t' << text::format_double(r.ndcg) << '\t'
        << text::format_double(r.one_call) << '\t' << to_string(r.split) << '\t' << r.users << '\t'
        << r.skipped_users << '\t' << to_string(r.config.measure) << '\t' << p.k() << '\t' << p.ell << '\t'
        << text::format_double(p.rho) << '\t' << text::format_double(p.lambda) << '\t' << to_string(p.scaling)
        << '\t' << text::format_double(p.w) << '\t' << p.n_neighbors << '\t' << to_string(r.config.ranking) << '\n';
  }
}

inline nlohmann::ordered_json row_to_json(const EvalRow& r) {
  const auto& p = r.config.params;
  nlohmann::ordered_json j;
  j["method"] = r.config.method();
  j["dataset"] = r.dataset;
  j["split"] = std::string(to_string(r.split));
  j["K"] = r.K;
  j["ndcg"] = r.ndcg;
  j["one_call"] = r.one_call;
  j["users"] = r.users;
  j["skipped_users"] = r.skipped_users;
  j["measure"] = std::string(to_string(r.config.measure));
  j["k"] = p.k();
  j["ell"] = p.ell;
  j["rho"] = p.rho;
  j["lambda"] = p.lambda;
  j["scaling"] = std::string(to_string(p.scaling));
  j["w"] = p.w;
  j["n_neighbors"] = p.n_neighbors;
  j["ranking"] = std::string(to_string(r.config.ranking));
  return j;
}

inline nlohmann::ordered_json report_to_json(std::span<const EvalRow> rows) {
  nlohmann::ordered_json j;
  j["format_version"] = kReportFormatVersion;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) j["rows"].push_back(row_to_json(r));
  return j;
}

}  // namespace pasrec
