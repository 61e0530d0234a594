#pragma once

// Brute-force reference implementations. Everything here recomputes
// positions and user sets from the raw sequences on every call and shares no
// counting code with PairStore / NeighborIndex.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pasrec/types.hpp"

namespace pasrec::oracle {

namespace detail {

inline std::optional<long> position_of(const UserSequence& v, ItemIndex item) {
  const auto items = v.items();
  for (std::size_t j = 0; j < items.size(); ++j) {
    if (items[j] == item) return static_cast<long>(j) + 1;
  }
  return std::nullopt;
}

inline double threshold(int x, Scaling scaling, double w) {
  if (scaling == Scaling::h_a) return x;
  if (scaling == Scaling::h_b) return x / w;
  return w * std::floor(x / w);
}

}  // namespace detail

inline double oracle_bis(std::span<const UserSequence> sequences, ItemIndex source, ItemIndex target, int ell,
                         double rho) {
  double numerator = 0.0;
  std::size_t union_users = 0;
  for (const auto& v : sequences) {
    const auto pi = detail::position_of(v, target);
    const auto pj = detail::position_of(v, source);
    if (pi || pj) ++union_users;
    if (pi && pj) {
      const long gap = *pi - *pj;
      if (-rho * ell <= gap && gap <= ell) numerator += 1.0;
    }
  }
  return union_users == 0 ? 0.0 : numerator / static_cast<double>(union_users);
}

/// Per-user (1 - lambda) * bidirectional indicator + lambda * position-aware
/// indicator, summed, over the union size.
inline double oracle_pas(std::span<const UserSequence> sequences, ItemIndex source, ItemIndex target,
                         const SimilarityParams& params, int t) {
  const int k = params.k();
  if (t < 1 || t > k) throw ParameterError("window position out of range");
  const double h = detail::threshold(k - t, params.scaling, params.w);
  double numerator = 0.0;
  std::size_t union_users = 0;
  for (const auto& v : sequences) {
    const auto pi = detail::position_of(v, target);
    const auto pj = detail::position_of(v, source);
    if (pi || pj) ++union_users;
    if (!(pi && pj)) continue;
    const long gap = *pi - *pj;
    const double both_ways = (-params.rho * params.ell <= gap && gap <= params.ell) ? 1.0 : 0.0;
    const double forward = (h < gap && gap <= params.ell) ? 1.0 : 0.0;
    numerator += (1.0 - params.lambda) * both_ways + params.lambda * forward;
  }
  return union_users == 0 ? 0.0 : numerator / static_cast<double>(union_users);
}

inline double oracle_cosine(std::span<const UserSequence> sequences, ItemIndex source, ItemIndex target) {
  std::size_t with_source = 0, with_target = 0, both = 0;
  for (const auto& v : sequences) {
    const bool a = detail::position_of(v, source).has_value();
    const bool b = detail::position_of(v, target).has_value();
    with_source += a;
    with_target += b;
    both += a && b;
  }
  if (with_source == 0 || with_target == 0) return 0.0;
  return both / std::sqrt(static_cast<double>(with_target) * static_cast<double>(with_source));
}

/// s_{source -> target} as the predictor sees it for window position t.
inline double oracle_similarity(std::span<const UserSequence> sequences, ItemIndex source, ItemIndex target,
                                const SimilarityParams& params, Measure measure, int t) {
  switch (measure) {
    case Measure::bis: return oracle_bis(sequences, source, target, params.ell, params.rho);
    case Measure::cosine: return oracle_cosine(sequences, source, target);
    case Measure::pas: return oracle_pas(sequences, source, target, params, t);
    case Measure::pas_uni: {
      SimilarityParams p = params;
      p.lambda = 1.0;
      return oracle_pas(sequences, source, target, p, t);
    }
  }
  return 0.0;
}

/// N_target in ranking order, using the same criterion and tie rule as the
/// engine but recomputed from scratch.
inline std::vector<ItemIndex> oracle_neighbors(std::span<const UserSequence> sequences, std::size_t n_items,
                                               ItemIndex target, const SimilarityParams& params, Measure measure,
                                               NeighborRanking ranking = NeighborRanking::bis) {
  struct Scored {
    double score;
    ItemIndex item;
  };
  std::vector<Scored> all;
  const int k = params.k();
  for (ItemIndex src = 0; src < n_items; ++src) {
    if (src == target) continue;
    double score = 0.0;
    switch (measure) {
      case Measure::bis: score = oracle_bis(sequences, src, target, params.ell, params.rho); break;
      case Measure::cosine: score = oracle_cosine(sequences, src, target); break;
      case Measure::pas_uni: score = oracle_similarity(sequences, src, target, params, measure, k); break;
      case Measure::pas:
        if (ranking == NeighborRanking::bis) {
          score = oracle_bis(sequences, src, target, params.ell, params.rho);
        } else {
          for (int t = 1; t <= k; ++t) score = std::max(score, oracle_pas(sequences, src, target, params, t));
        }
        break;
    }
    if (score > 0.0) all.push_back({score, src});
  }
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
    return a.score != b.score ? a.score > b.score : a.item < b.item;
  });
  if (all.size() > static_cast<std::size_t>(params.n_neighbors)) all.resize(static_cast<std::size_t>(params.n_neighbors));
  std::vector<ItemIndex> out;
  for (const auto& s : all) out.push_back(s.item);
  return out;
}

/// r_ui for `target` given the user's chronological history.
inline double oracle_predict(std::span<const UserSequence> sequences, std::size_t n_items,
                             std::span<const ItemIndex> history, ItemIndex target, const SimilarityParams& params,
                             Measure measure, NeighborRanking ranking = NeighborRanking::bis) {
  const int k = params.k();
  const auto hood = oracle_neighbors(sequences, n_items, target, params, measure, ranking);
  const std::size_t len = std::min<std::size_t>(history.size(), static_cast<std::size_t>(k));
  double score = 0.0;
  for (std::size_t j = history.size() - len; j < history.size(); ++j) {
    const ItemIndex src = history[j];
    if (std::find(hood.begin(), hood.end(), src) == hood.end()) continue;
    const long distance = static_cast<long>(history.size() - j);  // 1 for the most recent item
    const int position = k - static_cast<int>(distance) + 1;
    score += oracle_similarity(sequences, src, target, params, measure, position);
  }
  return score;
}

}  // namespace pasrec::oracle
