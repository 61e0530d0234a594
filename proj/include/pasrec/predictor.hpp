#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "pasrec/neighbor_index.hpp"
#include "pasrec/types.hpp"

namespace pasrec {

struct ScoredItem {
  ItemIndex item = 0;
  double score = 0.0;

  friend bool operator==(const ScoredItem&, const ScoredItem&) = default;
};

/// Ranking order: higher score first, then lower item.
inline bool ranks_before(const ScoredItem& a, const ScoredItem& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.item < b.item;
}

namespace detail {
inline void check_window(const SessionWindow& window, const NeighborIndex& index) {
  if (window.k() != index.k()) {
    throw ConfigError("window length k=" + std::to_string(window.k()) + " does not match index k=" +
                      std::to_string(index.k()));
  }
}
}  // namespace detail

/// r_ui: sum over window items i' in N_target of s_{i'->target}, using the
/// value stored for i''s window position. Items outside N_target add 0.
inline double score_item(const SessionWindow& window, ItemIndex target, const NeighborIndex& index) {
  detail::check_window(window, index);
  double score = 0.0;
  const auto items = window.items();
  for (std::size_t j = 0; j < items.size(); ++j) {
    if (auto e = index.find(target, items[j])) score += index.value(*e, window.position_at(j));
  }
  return score;
}

/// Scores every item reachable from a window through the reverse neighbor
/// lists. Items never touched score exactly 0. Reusable across windows;
/// not thread-safe, use one per thread.
class Scorer {
 public:
  explicit Scorer(const NeighborIndex& index) : index_(&index), acc_(index.n_items(), 0.0), seen_(index.n_items(), 0) {}

  /// Returns the touched items (in first-touch order). Their scores are
  /// available through score() until the next call.
  std::span<const ItemIndex> accumulate(const SessionWindow& window) {
    detail::check_window(window, *index_);
    for (ItemIndex t : touched_) {
      acc_[t] = 0.0;
      seen_[t] = 0;
    }
    touched_.clear();
    const auto items = window.items();
    // Window order matches score_item's summation order, so both paths
    // produce identical doubles.
    for (std::size_t j = 0; j < items.size(); ++j) {
      const int t = window.position_at(j);
      for (const auto& in : index_->reverse(items[j])) {
        if (!seen_[in.target]) {
          seen_[in.target] = 1;
          touched_.push_back(in.target);
        }
        acc_[in.target] += index_->value(in.entry, t);
      }
    }
    return touched_;
  }

  double score(ItemIndex item) const { return item < acc_.size() ? acc_[item] : 0.0; }
  const NeighborIndex& index() const { return *index_; }

 private:
  const NeighborIndex* index_;
  std::vector<double> acc_;
  std::vector<char> seen_;
  std::vector<ItemIndex> touched_;
};

/// The K best candidates, score descending, ties by item ascending.
/// `candidates` must be sorted ascending without duplicates.
inline std::vector<ScoredItem> recommend_top_k(const SessionWindow& window, std::span<const ItemIndex> candidates,
                                               const NeighborIndex& index, std::size_t K, Scorer& scorer) {
  if (candidates.empty()) throw ParameterError("candidate set must not be empty");
  if (K < 1) throw ParameterError("K must be positive");
  if (&scorer.index() != &index) throw ParameterError("scorer was built for a different index");
  const auto is_candidate = [&](ItemIndex i) { return std::binary_search(candidates.begin(), candidates.end(), i); };

  std::vector<ScoredItem> positive;
  for (ItemIndex t : scorer.accumulate(window)) {
    const double s = scorer.score(t);
    if (s > 0.0 && is_candidate(t)) positive.push_back({t, s});
  }
  const std::size_t take = std::min(K, positive.size());
  std::partial_sort(positive.begin(), positive.begin() + static_cast<std::ptrdiff_t>(take), positive.end(), ranks_before);
  positive.resize(take);

  // Fill with zero-score candidates, lowest identifiers first.
  for (std::size_t c = 0; c < candidates.size() && positive.size() < K; ++c) {
    if (!(scorer.score(candidates[c]) > 0.0)) positive.push_back({candidates[c], 0.0});
  }
  return positive;
}

inline std::vector<ScoredItem> recommend_top_k(const SessionWindow& window, std::span<const ItemIndex> candidates,
                                               const NeighborIndex& index, std::size_t K) {
  Scorer scorer(index);
  return recommend_top_k(window, candidates, index, K, scorer);
}

}  // namespace pasrec
