#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pasrec/parallel.hpp"
#include "pasrec/types.hpp"

namespace pasrec {

/// Sufficient statistic for one ordered pair (source i', target i).
///
/// gap_counts holds, for every signed gap g = p_v(i) - p_v(i') with
/// 1 <= |g| <= ell_max, the number of users v showing that gap. Slots are
/// laid out as [-ell_max .. -1, +1 .. +ell_max]. An empty span means no user
/// has the pair within the band.
struct PairStats {
  int ell_max = 0;
  std::span<const std::uint32_t> gap_counts;
  std::uint32_t co_users = 0;
  std::uint32_t union_users = 0;

  static constexpr std::size_t slot(int gap, int ell_max) {
    return static_cast<std::size_t>(gap < 0 ? gap + ell_max : gap + ell_max - 1);
  }

  std::uint32_t count(int gap) const {
    if (gap == 0 || gap_counts.empty() || gap > ell_max || gap < -ell_max) return 0;
    return gap_counts[slot(gap, ell_max)];
  }
};

/// Threshold scaling h(x) applied to k - L_u(i').
inline double scale(int x, Scaling scaling, double w) {
  if (!(w > 1.0)) throw ParameterError("scaling parameter w must be greater than 1");
  if (x < 0) throw ParameterError("scale() expects a non-negative argument");
  const double v = static_cast<double>(x);
  switch (scaling) {
    case Scaling::h_a: return v;
    case Scaling::h_b: return v / w;
    case Scaling::h_c: return w * std::floor(v / w);
  }
  return v;
}

namespace detail {

inline void check_band(const PairStats& pair, int ell) {
  if (ell < 1) throw ParameterError("ell must be a positive integer");
  if (!pair.gap_counts.empty() && ell > pair.ell_max) {
    throw ParameterError("pair statistics were counted with ell_max " + std::to_string(pair.ell_max) +
                         " < ell " + std::to_string(ell));
  }
}

// Users with -rho*ell <= gap <= ell. The lower bound is real-valued and
// compared without rounding.
inline std::uint32_t bidirectional_count(const PairStats& pair, int ell, double rho) {
  std::uint32_t n = 0;
  if (pair.gap_counts.empty()) return 0;
  const double lower = -rho * ell;
  for (int g = -ell; g <= ell; ++g) {
    if (g != 0 && static_cast<double>(g) >= lower) n += pair.count(g);
  }
  return n;
}

// Users with threshold < gap <= ell.
inline std::uint32_t forward_count(const PairStats& pair, int ell, double threshold) {
  std::uint32_t n = 0;
  if (pair.gap_counts.empty()) return 0;
  for (int g = 1; g <= ell; ++g) {
    if (static_cast<double>(g) > threshold) n += pair.count(g);
  }
  return n;
}

inline void check_position(int k, int t) {
  if (k < 1) throw ParameterError("window length k must be positive");
  if (t < 1 || t > k) {
    throw ParameterError("window position t=" + std::to_string(t) + " outside 1.." + std::to_string(k));
  }
}

}  // namespace detail

/// BIS: share of users in the union whose gap lies in [-rho*ell, ell].
inline double bis_similarity(const PairStats& pair, int ell, double rho) {
  detail::check_band(pair, ell);
  if (pair.union_users == 0) return 0.0;
  return static_cast<double>(detail::bidirectional_count(pair, ell, rho)) / pair.union_users;
}

/// PAS(uni): share of users whose gap lies in (h(k - t), ell].
inline double pas_uni_similarity(const PairStats& pair, int ell, int k, int t, Scaling scaling, double w) {
  detail::check_band(pair, ell);
  detail::check_position(k, t);
  const double threshold = scale(k - t, scaling, w);
  if (pair.union_users == 0) return 0.0;
  return static_cast<double>(detail::forward_count(pair, ell, threshold)) / pair.union_users;
}

/// PAS at window position t: (1 - lambda) * BIS + lambda * PAS(uni). With
/// lambda = 0 or 1 this returns the BIS or PAS(uni) value bit for bit.
inline double pas_similarity(const PairStats& pair, const SimilarityParams& params, int t) {
  params.validate();
  detail::check_band(pair, params.ell);
  detail::check_position(params.k(), t);
  const double threshold = scale(params.k() - t, params.scaling, params.w);
  if (pair.union_users == 0) return 0.0;
  const double bis = detail::bidirectional_count(pair, params.ell, params.rho);
  const double uni = detail::forward_count(pair, params.ell, threshold);
  // The per-user indicators combine linearly, so mix the counts and divide
  // once. lambda = 0 (or 1) leaves the BIS (or PAS(uni)) count untouched.
  return ((1.0 - params.lambda) * bis + params.lambda * uni) / pair.union_users;
}

inline double cosine_similarity(const PairStats& pair, std::uint32_t count_i, std::uint32_t count_j) {
  if (count_i == 0 || count_j == 0) return 0.0;
  return pair.co_users / std::sqrt(static_cast<double>(count_i) * static_cast<double>(count_j));
}

/// Pair statistics for a training corpus, grouped by target item.
///
/// Every co-occurring ordered pair gets an entry with its co-user count;
/// only pairs seen within |gap| <= ell_max carry a gap histogram.
class PairStore {
 public:
  PairStore() = default;

  int ell_max() const { return ell_max_; }
  std::size_t n_items() const { return item_users_.size(); }
  std::size_t pair_count() const { return sources_.size(); }
  std::size_t banded_pair_count() const { return ell_max_ == 0 ? 0 : hist_.size() / (2 * static_cast<std::size_t>(ell_max_)); }

  /// |U_i|: number of users who interacted with `item`.
  std::uint32_t item_users(ItemIndex item) const { return item < item_users_.size() ? item_users_[item] : 0; }

  /// Sources i' co-occurring with `target`, ascending.
  std::span<const ItemIndex> sources_of(ItemIndex target) const {
    if (target >= n_items()) return {};
    return std::span<const ItemIndex>(sources_).subspan(offsets_[target], offsets_[target + 1] - offsets_[target]);
  }

  /// Statistics of the j-th entry of sources_of(target).
  PairStats stats_at(ItemIndex target, std::size_t j) const {
    const std::size_t e = offsets_[target] + j;
    return make_stats(sources_[e], target, e);
  }

  PairStats stats(ItemIndex source, ItemIndex target) const {
    const auto row = sources_of(target);
    auto it = std::lower_bound(row.begin(), row.end(), source);
    if (it == row.end() || *it != source) {
      PairStats none;
      none.ell_max = ell_max_;
      none.union_users = item_users(source) + item_users(target);
      return none;
    }
    return make_stats(source, target, offsets_[target] + static_cast<std::size_t>(it - row.begin()));
  }

  /// Single pass over the corpus. Workers split the users; partial counts are
  /// integer sums, so the result does not depend on `workers`.
  static PairStore count(std::span<const UserSequence> sequences, std::size_t n_items, int ell_max, int workers = 1) {
    if (ell_max < 1) throw ParameterError("ell_max must be a positive integer");
    for (const auto& s : sequences) {
      for (ItemIndex i : s.items()) {
        if (i >= n_items) n_items = static_cast<std::size_t>(i) + 1;
      }
    }
    const std::size_t width = 2 * static_cast<std::size_t>(ell_max);

    struct Partial {
      std::unordered_map<std::uint64_t, std::uint32_t> co;
      std::unordered_map<std::uint64_t, std::uint32_t> hist_slot;
      std::vector<std::uint32_t> hist;
      std::vector<std::uint32_t> item_users;
    };
    const int w = std::max(1, workers);
    std::vector<Partial> parts(static_cast<std::size_t>(w));

    parallel_chunks(sequences.size(), w, [&](std::size_t begin, std::size_t end, int id) {
      Partial& p = parts[static_cast<std::size_t>(id)];
      p.item_users.assign(n_items, 0);
      auto bump = [&](ItemIndex source, ItemIndex target, int gap) {
        const std::uint64_t key = key_of(source, target);
        ++p.co[key];
        if (gap >= -ell_max && gap <= ell_max) {
          auto [it, fresh] = p.hist_slot.try_emplace(key, static_cast<std::uint32_t>(p.hist.size() / width));
          if (fresh) p.hist.resize(p.hist.size() + width, 0);
          ++p.hist[it->second * width + PairStats::slot(gap, ell_max)];
        }
      };
      for (std::size_t u = begin; u < end; ++u) {
        const auto items = sequences[u].items();
        for (std::size_t a = 0; a < items.size(); ++a) {
          ++p.item_users[items[a]];
          for (std::size_t b = a + 1; b < items.size(); ++b) {
            const int gap = static_cast<int>(b - a);
            bump(items[a], items[b], gap);
            bump(items[b], items[a], -gap);
          }
        }
      }
    });

    // Merge: integer sums, order-independent.
    PairStore store;
    store.ell_max_ = ell_max;
    store.item_users_.assign(n_items, 0);
    std::unordered_map<std::uint64_t, std::uint32_t> co;
    std::unordered_map<std::uint64_t, std::uint32_t> slot;
    std::vector<std::uint32_t> hist;
    for (auto& p : parts) {
      if (p.item_users.empty()) continue;
      for (std::size_t i = 0; i < n_items; ++i) store.item_users_[i] += p.item_users[i];
      for (const auto& [key, c] : p.co) co[key] += c;
      for (const auto& [key, s] : p.hist_slot) {
        auto [it, fresh] = slot.try_emplace(key, static_cast<std::uint32_t>(hist.size() / width));
        if (fresh) hist.resize(hist.size() + width, 0);
        for (std::size_t g = 0; g < width; ++g) hist[it->second * width + g] += p.hist[s * width + g];
      }
      p = Partial{};
    }

    std::vector<std::uint64_t> keys;
    keys.reserve(co.size());
    for (const auto& [key, c] : co) keys.push_back(key);
    std::sort(keys.begin(), keys.end());

    store.offsets_.assign(n_items + 1, 0);
    store.sources_.reserve(keys.size());
    store.co_users_.reserve(keys.size());
    store.hist_index_.reserve(keys.size());
    store.hist_.reserve(slot.size() * width);
    for (std::uint64_t key : keys) {
      const auto target = static_cast<ItemIndex>(key >> 32);
      const auto source = static_cast<ItemIndex>(key & 0xffffffffu);
      ++store.offsets_[target + 1];
      store.sources_.push_back(source);
      store.co_users_.push_back(co.at(key));
      auto it = slot.find(key);
      if (it == slot.end()) {
        store.hist_index_.push_back(kNoHistogram);
      } else {
        store.hist_index_.push_back(static_cast<std::uint32_t>(store.hist_.size() / width));
        store.hist_.insert(store.hist_.end(), hist.begin() + static_cast<std::ptrdiff_t>(it->second * width),
                           hist.begin() + static_cast<std::ptrdiff_t>((it->second + 1) * width));
      }
    }
    for (std::size_t i = 0; i < n_items; ++i) store.offsets_[i + 1] += store.offsets_[i];
    return store;
  }

 private:
  static constexpr std::uint32_t kNoHistogram = 0xffffffffu;

  static std::uint64_t key_of(ItemIndex source, ItemIndex target) {
    return (static_cast<std::uint64_t>(target) << 32) | source;
  }

  PairStats make_stats(ItemIndex source, ItemIndex target, std::size_t e) const {
    PairStats s;
    s.ell_max = ell_max_;
    s.co_users = co_users_[e];
    s.union_users = item_users(source) + item_users(target) - s.co_users;
    if (hist_index_[e] != kNoHistogram) {
      const std::size_t width = 2 * static_cast<std::size_t>(ell_max_);
      s.gap_counts = std::span<const std::uint32_t>(hist_).subspan(hist_index_[e] * width, width);
    }
    return s;
  }

  int ell_max_ = 0;
  std::vector<std::uint32_t> item_users_;
  std::vector<std::size_t> offsets_;
  std::vector<ItemIndex> sources_;
  std::vector<std::uint32_t> co_users_;
  std::vector<std::uint32_t> hist_index_;
  std::vector<std::uint32_t> hist_;
};

inline PairStore count_pairs(std::span<const UserSequence> sequences, int ell_max, std::size_t n_items = 0,
                             int workers = 1) {
  return PairStore::count(sequences, n_items, ell_max, workers);
}

}  // namespace pasrec
