#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace pasrec {

using ItemIndex = std::uint32_t;
using UserIndex = std::uint32_t;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid hyperparameter or argument value.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Artifacts or parameters that do not fit together (e.g. index vs dataset).
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct InteractionRecord {
  std::string user;
  std::string item;
  std::optional<int> rating;
  std::int64_t timestamp = 0;

  friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

namespace detail {
inline bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}
}  // namespace detail

/// Ordering used for every "identifier ascending" tie rule. Purely numeric
/// identifiers compare by value and sort before non-numeric ones; everything
/// else compares lexicographically.
inline bool natural_less(std::string_view a, std::string_view b) {
  const bool na = detail::all_digits(a);
  const bool nb = detail::all_digits(b);
  if (na != nb) return na;
  if (na) {
    auto strip = [](std::string_view s) {
      const auto p = s.find_first_not_of('0');
      return p == std::string_view::npos ? std::string_view{"0"} : s.substr(p);
    };
    a = strip(a);
    b = strip(b);
    if (a.size() != b.size()) return a.size() < b.size();
  }
  return a < b;
}

/// Interns opaque string identifiers to dense indices. Indices follow
/// natural_less order, so comparing indices is comparing identifiers.
class IdMap {
 public:
  IdMap() = default;

  static IdMap from_ids(std::vector<std::string> ids) {
    std::sort(ids.begin(), ids.end(), [](const std::string& a, const std::string& b) {
      return natural_less(a, b);
    });
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    IdMap map;
    map.ids_ = std::move(ids);
    map.index_.reserve(map.ids_.size());
    for (std::size_t i = 0; i < map.ids_.size(); ++i) {
      map.index_.emplace(map.ids_[i], static_cast<std::uint32_t>(i));
    }
    return map;
  }

  std::optional<std::uint32_t> find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::uint32_t at(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error("unknown identifier: " + id);
    return it->second;
  }

  const std::string& id(std::uint32_t index) const { return ids_.at(index); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }

  friend bool operator==(const IdMap& a, const IdMap& b) { return a.ids_ == b.ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// A user's chronologically ordered item list. Items are unique; the
/// position of items()[j] is j + 1.
class UserSequence {
 public:
  UserSequence() = default;
  UserSequence(UserIndex user, std::vector<ItemIndex> items) : user_(user), items_(std::move(items)) {
    std::unordered_set<ItemIndex> seen;
    seen.reserve(items_.size());
    for (ItemIndex item : items_) {
      if (!seen.insert(item).second) {
        throw ParameterError("user sequence contains duplicate item " + std::to_string(item));
      }
    }
  }

  UserIndex user() const { return user_; }
  std::span<const ItemIndex> items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  /// 1-based position of `item`, if present.
  std::optional<std::size_t> position(ItemIndex item) const {
    auto it = std::find(items_.begin(), items_.end(), item);
    if (it == items_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - items_.begin()) + 1;
  }

  friend bool operator==(const UserSequence&, const UserSequence&) = default;

 private:
  UserIndex user_ = 0;
  std::vector<ItemIndex> items_;
};

enum class Scaling { h_a, h_b, h_c };

enum class Measure { bis, pas, pas_uni, cosine };

/// Criterion used to pick the neighbor set N_i when stored values depend
/// on the window position.
enum class NeighborRanking { bis, max_over_t };

inline std::string_view to_string(Scaling s) {
  switch (s) {
    case Scaling::h_a: return "h_a";
    case Scaling::h_b: return "h_b";
    case Scaling::h_c: return "h_c";
  }
  return "?";
}

inline std::string_view to_string(Measure m) {
  switch (m) {
    case Measure::bis: return "bis";
    case Measure::pas: return "pas";
    case Measure::pas_uni: return "pas_uni";
    case Measure::cosine: return "cosine";
  }
  return "?";
}

inline std::string_view to_string(NeighborRanking r) {
  return r == NeighborRanking::bis ? "bis" : "max_over_t";
}

inline Scaling parse_scaling(std::string_view s) {
  if (s == "h_a" || s == "a") return Scaling::h_a;
  if (s == "h_b" || s == "b") return Scaling::h_b;
  if (s == "h_c" || s == "c") return Scaling::h_c;
  throw ParameterError("unknown scaling function: " + std::string(s));
}

inline Measure parse_measure(std::string_view s) {
  if (s == "bis") return Measure::bis;
  if (s == "pas") return Measure::pas;
  if (s == "pas_uni") return Measure::pas_uni;
  if (s == "cosine" || s == "cs") return Measure::cosine;
  throw ParameterError("unknown measure: " + std::string(s));
}

inline NeighborRanking parse_ranking(std::string_view s) {
  if (s == "bis") return NeighborRanking::bis;
  if (s == "max_over_t" || s == "max") return NeighborRanking::max_over_t;
  throw ParameterError("unknown neighbor ranking: " + std::string(s));
}

/// Hyperparameters shared by every similarity measure. The session-window
/// length k is tied to the valid distance ell.
struct SimilarityParams {
  int ell = 10;
  double rho = 0.2;
  double lambda = 0.5;
  Scaling scaling = Scaling::h_a;
  double w = 2.0;
  int n_neighbors = 20;

  int k() const { return ell; }

  void validate() const {
    if (ell < 1) throw ParameterError("ell must be a positive integer");
    if (!(rho > 0.0 && rho < 1.0)) throw ParameterError("rho must lie in (0, 1)");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("lambda must lie in [0, 1]");
    if (!(w > 1.0)) throw ParameterError("w must be greater than 1");
    if (n_neighbors < 1) throw ParameterError("n_neighbors must be at least 1");
  }

  friend bool operator==(const SimilarityParams&, const SimilarityParams&) = default;
};

/// The latest k items before the prediction point, with target-anchored
/// positions: the most recent item has position k, the one before it k - 1.
class SessionWindow {
 public:
  SessionWindow(std::vector<ItemIndex> items, int k) : items_(std::move(items)), k_(k) {}

  std::span<const ItemIndex> items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  int k() const { return k_; }

  /// L_u of items()[j].
  int position_at(std::size_t j) const {
    return k_ - static_cast<int>(items_.size() - 1 - j);
  }

  std::optional<int> position(ItemIndex item) const {
    auto it = std::find(items_.begin(), items_.end(), item);
    if (it == items_.end()) return std::nullopt;
    return position_at(static_cast<std::size_t>(it - items_.begin()));
  }

 private:
  std::vector<ItemIndex> items_;
  int k_;
};

inline SessionWindow make_session_window(std::span<const ItemIndex> history, int k) {
  if (k < 1) throw ParameterError("window length k must be positive");
  if (history.empty()) throw Error("empty history");
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(k), history.size());
  return SessionWindow(std::vector<ItemIndex>(history.end() - static_cast<std::ptrdiff_t>(n), history.end()), k);
}

inline SessionWindow make_session_window(const UserSequence& sequence, int k) {
  return make_session_window(sequence.items(), k);
}

}  // namespace pasrec
