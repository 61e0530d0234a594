#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "pasrec/parallel.hpp"
#include "pasrec/random.hpp"
#include "pasrec/types.hpp"

namespace pasrec {

struct SynthConfig {
  std::size_t n_users = 1000;
  std::size_t n_items = 200;
  std::size_t min_length = 10;
  std::size_t max_length = 30;
  /// Probability that a step follows the planted successor map.
  double signal = 0.8;
  /// Probability that an adjacent pair of the finished walk is swapped.
  double reverse_noise = 0.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (n_users < 1 || n_items < 2) throw ParameterError("synth needs at least one user and two items");
    if (min_length < 3) throw ParameterError("synth min_length must be at least 3");
    if (max_length < min_length) throw ParameterError("synth max_length must be >= min_length");
    if (!(signal >= 0.0 && signal <= 1.0)) throw ParameterError("synth signal must lie in [0, 1]");
    if (!(reverse_noise >= 0.0 && reverse_noise <= 1.0)) throw ParameterError("synth reverse_noise must lie in [0, 1]");
  }
};

/// The planted first-order map: a single random cycle through every item.
/// successor[i] is the item that follows i.
inline std::vector<ItemIndex> planted_successors(const SynthConfig& config) {
  std::mt19937_64 rng(splitmix64(config.seed));
  std::vector<ItemIndex> order(config.n_items);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<ItemIndex>(i);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[static_cast<std::size_t>(uniform_below(rng, i + 1))]);
  }
  std::vector<ItemIndex> successor(config.n_items);
  for (std::size_t j = 0; j < order.size(); ++j) successor[order[j]] = order[(j + 1) % order.size()];
  return successor;
}

namespace detail {
inline constexpr int kCollisionRetries = 32;
}

/// Walk of one user, as item indices in interaction order.
inline std::vector<ItemIndex> synth_walk(const SynthConfig& config, const std::vector<ItemIndex>& successor,
                                         std::size_t user) {
  std::mt19937_64 rng(splitmix64(config.seed ^ splitmix64(static_cast<std::uint64_t>(user) + 1)));
  const std::size_t span = config.max_length - config.min_length + 1;
  const std::size_t length = config.min_length + static_cast<std::size_t>(uniform_below(rng, span));
  std::vector<ItemIndex> walk;
  std::vector<char> used(config.n_items, 0);
  auto uniform_item = [&] { return static_cast<ItemIndex>(uniform_below(rng, config.n_items)); };

  ItemIndex current = uniform_item();
  walk.push_back(current);
  used[current] = 1;
  while (walk.size() < length) {
    ItemIndex next = bernoulli(rng, config.signal) ? successor[current] : uniform_item();
    int retries = 0;
    while (used[next] && retries++ < detail::kCollisionRetries) next = uniform_item();
    if (used[next]) break;  // truncate
    walk.push_back(next);
    used[next] = 1;
    current = next;
  }
  for (std::size_t j = 0; j + 1 < walk.size();) {
    if (bernoulli(rng, config.reverse_noise)) {
      std::swap(walk[j], walk[j + 1]);
      j += 2;
    } else {
      ++j;
    }
  }
  return walk;
}

/// Synthetic log: user u's walk becomes records with user id "u+1",
/// item id "i+1", rating 5 and timestamps 1, 2, 3, ... Deterministic per
/// seed and independent of `workers`.
inline std::vector<InteractionRecord> generate(const SynthConfig& config, int workers = 1) {
  config.validate();
  const auto successor = planted_successors(config);
  std::vector<std::vector<ItemIndex>> walks(config.n_users);
  parallel_chunks(config.n_users, workers, [&](std::size_t begin, std::size_t end, int) {
    for (std::size_t u = begin; u < end; ++u) walks[u] = synth_walk(config, successor, u);
  });
  std::vector<InteractionRecord> records;
  for (std::size_t u = 0; u < walks.size(); ++u) {
    const std::string user = std::to_string(u + 1);
    for (std::size_t j = 0; j < walks[u].size(); ++j) {
      records.push_back({user, std::to_string(walks[u][j] + 1), 5, static_cast<std::int64_t>(j + 1)});
    }
  }
  return records;
}

/// Writes records in the delimiter-separated layout the ingest parser reads:
/// user, item, rating, timestamp.
inline void write_interactions(const std::vector<InteractionRecord>& records, std::ostream& out,
                               const std::string& delimiter = "::") {
  for (const auto& r : records) {
    out << r.user << delimiter << r.item << delimiter << r.rating.value_or(0) << delimiter << r.timestamp << '\n';
  }
}

}  // namespace pasrec
