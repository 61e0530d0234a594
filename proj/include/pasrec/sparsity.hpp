#pragma once

#include <array>
#include <ostream>
#include <vector>

#include "pasrec/neighbor_index.hpp"
#include "pasrec/similarity.hpp"
#include "pasrec/text.hpp"

namespace pasrec {

inline constexpr std::array<Scaling, 3> kAllScalings{Scaling::h_a, Scaling::h_b, Scaling::h_c};

/// Mean PAS(uni) over all (i, i' in N_i) at gap G = k - L_u(i'), one column
/// per scaling function.
struct SparsityRow {
  int gap = 0;
  std::array<double, 3> mean{};
};

struct SparsityReport {
  int k = 10;
  int n_neighbors = 20;
  double w = 2.0;
  std::array<std::size_t, 3> pairs{};
  std::vector<SparsityRow> rows;
};

inline SparsityReport sparsity_report(const PairStore& store, int k = 10, int n_neighbors = 20, double w = 2.0,
                                      int workers = 1) {
  SparsityReport report;
  report.k = k;
  report.n_neighbors = n_neighbors;
  report.w = w;
  report.rows.resize(static_cast<std::size_t>(k));
  for (int g = 0; g < k; ++g) report.rows[static_cast<std::size_t>(g)].gap = g;

  for (std::size_t s = 0; s < kAllScalings.size(); ++s) {
    SimilarityParams p;
    p.ell = k;
    p.lambda = 1.0;
    p.scaling = kAllScalings[s];
    p.w = w;
    p.n_neighbors = n_neighbors;
    const auto index = build_neighbor_index(store, p, Measure::pas_uni, NeighborRanking::bis, workers);
    const std::size_t entries = index.entry_count();
    report.pairs[s] = entries;
    for (int g = 0; g < k; ++g) {
      double sum = 0.0;
      for (std::size_t e = 0; e < entries; ++e) sum += index.value(e, k - g);
      report.rows[static_cast<std::size_t>(g)].mean[s] = entries == 0 ? 0.0 : sum / static_cast<double>(entries);
    }
  }
  return report;
}

inline void write_sparsity_tsv(const SparsityReport& r, std::ostream& out) {
  out << "# pasrec sparsity report format 1\n";
  out << "# k=" << r.k << " ell=" << r.k << " n_neighbors=" << r.n_neighbors << " w=" << text::format_double(r.w)
      << " pairs=" << r.pairs[0] << "," << r.pairs[1] << "," << r.pairs[2] << '\n';
  out << "G\tL\th_a\th_b\th_c\n";
  for (const auto& row : r.rows) {
    out << row.gap << '\t' << (r.k - row.gap);
    for (double v : row.mean) out << '\t' << text::format_double(v);
    out << '\n';
  }
}

}  // namespace pasrec
