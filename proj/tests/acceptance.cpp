// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <vector>

#include "pasrec/oracle.hpp"
#include "pasrec/pasrec.hpp"

namespace fs = std::filesystem;
using namespace pasrec;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  Outcome outcome;
  double seconds = 0.0;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

int hardware_workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PASREC_CLI_PATH) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Rows of every report emitted during the run, checked by criterion 7.
std::vector<EvalRow> g_emitted;

// ---------------------------------------------------------------------------
// Criteria 1-4: random corpora against the brute-force oracle.

struct OracleTallies {
  std::size_t corpora = 0;
  std::size_t similarity_checks = 0;
  std::size_t prediction_checks = 0;
  double worst_similarity = 0.0;
  double worst_prediction = 0.0;
  std::size_t reduction_checks = 0;
  std::size_t reduction_failures = 0;
  std::size_t monotone_checks = 0;
  std::size_t monotone_violations = 0;
  std::size_t dominance_checks = 0;
  std::size_t dominance_violations = 0;
  double seconds = 0.0;
};

OracleTallies run_oracle_instances(int n_corpora) {
  static constexpr int ks[] = {2, 3, 5};
  static constexpr double rhos[] = {0.2, 0.5};
  static constexpr double lambdas[] = {0.0, 0.5, 1.0};
  const auto start = std::chrono::steady_clock::now();
  OracleTallies t;
  std::mt19937_64 rng(20240601);
  for (int trial = 0; trial < n_corpora; ++trial) {
    const std::size_t n_items = 2 + rng() % 29;
    const std::size_t n_users = 1 + rng() % 50;
    std::vector<UserSequence> seqs;
    for (UserIndex u = 0; u < n_users; ++u) {
      std::vector<ItemIndex> items(n_items);
      std::iota(items.begin(), items.end(), 0u);
      std::shuffle(items.begin(), items.end(), rng);
      items.resize(1 + rng() % std::min<std::size_t>(20, n_items));
      seqs.emplace_back(u, items);
    }
    SimilarityParams p;
    p.ell = ks[rng() % 3];
    p.rho = rhos[rng() % 2];
    p.lambda = lambdas[rng() % 3];
    p.scaling = static_cast<Scaling>(rng() % 3);
    p.w = 2.0;
    p.n_neighbors = 1 + static_cast<int>(rng() % 8);
    const int k = p.k();
    ++t.corpora;

    const auto store = count_pairs(seqs, p.ell, n_items);
    for (ItemIndex i = 0; i < n_items; ++i) {
      for (ItemIndex j = 0; j < n_items; ++j) {
        if (i == j) continue;
        const auto pair = store.stats(j, i);
        const double bis = bis_similarity(pair, p.ell, p.rho);
        const double cos = cosine_similarity(pair, store.item_users(i), store.item_users(j));
        t.worst_similarity = std::max(t.worst_similarity, std::fabs(bis - oracle::oracle_bis(seqs, j, i, p.ell, p.rho)));
        t.worst_similarity = std::max(t.worst_similarity, std::fabs(cos - oracle::oracle_cosine(seqs, j, i)));
        t.similarity_checks += 2;

        SimilarityParams zero = p, one = p;
        zero.lambda = 0.0;
        one.lambda = 1.0;
        double prev_uni_a = -1.0;
        for (int pos = 1; pos <= k; ++pos) {
          const double pas = pas_similarity(pair, p, pos);
          const double uni = pas_uni_similarity(pair, p.ell, k, pos, p.scaling, p.w);
          t.worst_similarity = std::max(t.worst_similarity, std::fabs(pas - oracle::oracle_pas(seqs, j, i, p, pos)));
          t.worst_similarity = std::max(t.worst_similarity, std::fabs(uni - oracle::oracle_pas(seqs, j, i, one, pos)));
          t.similarity_checks += 2;

          // Criterion 2: exact reductions.
          t.reduction_checks += 2;
          if (pas_similarity(pair, zero, pos) != bis) ++t.reduction_failures;
          if (pas_similarity(pair, one, pos) != uni) ++t.reduction_failures;

          // Criterion 3: lambda = 1, h_a is non-decreasing in t.
          const double uni_a = pas_uni_similarity(pair, p.ell, k, pos, Scaling::h_a, p.w);
          if (pair.union_users > 0) {
            ++t.monotone_checks;
            if (uni_a < prev_uni_a) ++t.monotone_violations;
          }
          prev_uni_a = uni_a;

          // Criterion 4: h_b and h_c dominate h_a at w = 2.
          const double uni_b = pas_uni_similarity(pair, p.ell, k, pos, Scaling::h_b, 2.0);
          const double uni_c = pas_uni_similarity(pair, p.ell, k, pos, Scaling::h_c, 2.0);
          t.dominance_checks += 2;
          if (uni_b < uni_a) ++t.dominance_violations;
          if (uni_c < uni_a) ++t.dominance_violations;
        }
      }
    }

    for (auto measure : {Measure::bis, Measure::pas, Measure::pas_uni, Measure::cosine}) {
      const auto ranking = trial % 2 == 0 ? NeighborRanking::bis : NeighborRanking::max_over_t;
      const auto index = build_neighbor_index(store, p, measure, ranking);
      for (const auto& s : seqs) {
        const auto history = s.items();
        const auto window = make_session_window(history, k);
        for (ItemIndex target = 0; target < n_items; ++target) {
          const double got = score_item(window, target, index);
          const double want = oracle::oracle_predict(seqs, n_items, history, target, p, measure, ranking);
          t.worst_prediction = std::max(t.worst_prediction, std::fabs(got - want));
          ++t.prediction_checks;
        }
      }
    }
  }
  t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return t;
}

// ---------------------------------------------------------------------------
// Criterion 5: sparsity decay on a synthetic corpus.

Dataset synthetic(std::size_t users, std::size_t items, double signal, double reverse_noise, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_users = users;
  cfg.n_items = items;
  cfg.min_length = 10;
  cfg.max_length = 30;
  cfg.signal = signal;
  cfg.reverse_noise = reverse_noise;
  cfg.seed = seed;
  return build_dataset(generate(cfg, hardware_workers()));
}

Outcome criterion_sparsity() {
  const auto ds = synthetic(5000, 500, 0.8, 0.0, 7);
  const int k = 10;
  const auto store = count_pairs(ds.train, k, ds.n_items(), hardware_workers());
  const auto report = sparsity_report(store, k, 20, 2.0, hardware_workers());

  bool ok = true;
  std::ostringstream why;
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t g = 1; g < report.rows.size(); ++g) {
      if (report.rows[g].mean[s] > report.rows[g - 1].mean[s]) {
        ok = false;
        why << " increase in " << to_string(kAllScalings[s]) << " at G=" << g << ';';
      }
    }
  }
  const double a0 = report.rows.front().mean[0];
  const double a9 = report.rows.back().mean[0];
  if (!(a9 < 0.25 * a0)) {
    ok = false;
    why << " h_a(9)/h_a(0)=" << fmt(a9 / a0) << " not < 0.25;";
  }
  // At G = 0 every scaling gives h(0) = 0, so the columns coincide there;
  // strict dominance is required from G = 1 on.
  for (std::size_t g = 0; g < report.rows.size(); ++g) {
    const double a = report.rows[g].mean[0], b = report.rows[g].mean[1];
    if (g == 0 ? b != a : !(b > a)) {
      ok = false;
      why << " h_b vs h_a fails at G=" << g << ';';
    }
  }
  std::ostringstream detail;
  detail << "h_a G=0.." << (k - 1) << ": " << fmt(a0) << " -> " << fmt(a9) << " (ratio " << fmt(a9 / a0)
         << "), h_b: " << fmt(report.rows.front().mean[1]) << " -> " << fmt(report.rows.back().mean[1])
         << ", h_c: " << fmt(report.rows.front().mean[2]) << " -> " << fmt(report.rows.back().mean[2])
         << "; non-increasing in G, h_b = h_a at G=0 and h_b > h_a for G>=1" << why.str();
  return {ok, detail.str()};
}

// ---------------------------------------------------------------------------
// Criterion 6: directional quality after validation selection.

Outcome criterion_direction() {
  const auto ds = synthetic(5000, 500, 0.8, 0.1, 11);
  const std::vector<int> ells{5, 10, 20, 40};
  const auto run_grid = [&](Measure m, std::vector<Scaling> scalings) {
    GridSpec spec;
    spec.measure = m;
    spec.ells = ells;
    spec.lambdas = {0.5};
    spec.scalings = std::move(scalings);
    const auto grid = make_grid(spec);
    auto result = grid_search(ds, grid, 5, hardware_workers(), "synthetic");
    g_emitted.insert(g_emitted.end(), result.validation.begin(), result.validation.end());
    g_emitted.push_back(result.test);
    return result.test;
  };
  const auto pas = run_grid(Measure::pas, {Scaling::h_a, Scaling::h_b, Scaling::h_c});
  const auto cs = run_grid(Measure::cosine, {Scaling::h_a});
  const auto bis = run_grid(Measure::bis, {Scaling::h_a});
  const bool beats_cs = pas.one_call >= cs.one_call + 0.05;
  const bool keeps_bis = pas.one_call >= bis.one_call - 0.005;
  std::ostringstream detail;
  detail << "test 1-call@5: " << pas.config.method() << " k=" << pas.config.params.k() << " " << fmt(pas.one_call)
         << ", CS k=" << cs.config.params.k() << " " << fmt(cs.one_call) << ", BIS k=" << bis.config.params.k() << " "
         << fmt(bis.one_call) << "; PAS-CS=" << fmt(pas.one_call - cs.one_call) << " (need >= 0.05)"
         << ", PAS-BIS=" << fmt(pas.one_call - bis.one_call) << " (need >= -0.005)";
  return {beats_cs && keeps_bis, detail.str()};
}

// ---------------------------------------------------------------------------
// Criterion 8: CLI pipeline determinism.

std::vector<EvalRow> rows_from_json(const fs::path& path) {
  std::vector<EvalRow> rows;
  const auto j = nlohmann::json::parse(slurp(path));
  for (const auto& r : j["rows"]) {
    EvalRow row;
    row.ndcg = r["ndcg"].get<double>();
    row.one_call = r["one_call"].get<double>();
    row.K = r["K"].get<std::size_t>();
    row.dataset = r["dataset"].get<std::string>();
    rows.push_back(row);
  }
  return rows;
}

Outcome criterion_determinism(const fs::path& work) {
  const auto log = work / "log.dat";
  if (run_cli("synth --users 2000 --items 300 --reverse-noise 0.1 --seed 5 -o " + log.string()) != 0) {
    return {false, "synth failed"};
  }
  const std::vector<std::pair<std::string, int>> runs{{"run_a", 1}, {"run_b", 1}, {"run_c", 4}};
  const std::vector<std::string> outputs{"data/train.tsv", "data/valid.tsv", "data/test.tsv", "data/stats.json",
                                         "pas.idx",        "bis.idx",        "pas_test.tsv",   "pas_test.json",
                                         "pas_valid.tsv",  "bis_test.tsv",   "bis_test.json",  "sparsity.tsv"};
  for (const auto& [name, workers] : runs) {
    const auto dir = work / name;
    const std::string j = "--workers " + std::to_string(workers) + " ";
    const auto data = (dir / "data").string();
    const bool ok =
        run_cli(j + "prepare -i " + log.string() + " --seed 3 -o " + data) == 0 &&
        run_cli(j + "build-index -d " + data + " --measure pas -k 10 --scaling h_b -o " + (dir / "pas.idx").string()) == 0 &&
        run_cli(j + "build-index -d " + data + " --measure bis -k 10 -o " + (dir / "bis.idx").string()) == 0 &&
        run_cli(j + "evaluate -d " + data + " --index " + (dir / "pas.idx").string() + " --split test -o " +
                (dir / "pas_test").string()) == 0 &&
        run_cli(j + "evaluate -d " + data + " --index " + (dir / "pas.idx").string() + " --split validation -o " +
                (dir / "pas_valid").string()) == 0 &&
        run_cli(j + "evaluate -d " + data + " --index " + (dir / "bis.idx").string() + " --split test -o " +
                (dir / "bis_test").string()) == 0 &&
        run_cli(j + "sparsity-report -d " + data + " -o " + (dir / "sparsity.tsv").string()) == 0;
    if (!ok) return {false, "pipeline command failed in " + name};
  }
  for (const auto* r : {"pas_test.json", "pas_valid.json", "bis_test.json"}) {
    const auto rows = rows_from_json(work / "run_a" / r);
    g_emitted.insert(g_emitted.end(), rows.begin(), rows.end());
  }
  std::ostringstream diff;
  for (const auto& f : outputs) {
    const auto a = slurp(work / "run_a" / f);
    if (a.empty()) diff << " empty " << f << ';';
    if (a != slurp(work / "run_b" / f)) diff << " repeat differs: " << f << ';';
    if (a != slurp(work / "run_c" / f)) diff << " 1 vs 4 workers differs: " << f << ';';
  }
  const bool ok = diff.str().empty();
  return {ok, ok ? std::to_string(outputs.size()) + " artifacts byte-identical across 2 repeats and 1 vs 4 workers"
                 : diff.str()};
}

// ---------------------------------------------------------------------------
// Criterion 9: MovieLens-100K smoke run through the CLI.

Outcome criterion_real_data(const fs::path& work, double& seconds_out) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path input = PASREC_ML100K_PATH;
  if (!fs::exists(input)) return {false, "dataset not found at " + input.string()};
  const auto data = (work / "ml100k").string();
  const std::string j = "--workers " + std::to_string(hardware_workers()) + " ";
  const bool ok =
      run_cli(j + "prepare -i " + input.string() + " --format tsv --header --filter rating5 -o " + data) == 0 &&
      run_cli(j + "build-index -d " + data + " --measure pas -k 10 -o " + (work / "ml.idx").string()) == 0 &&
      run_cli(j + "evaluate -d " + data + " --index " + (work / "ml.idx").string() + " --split validation -o " +
              (work / "ml_valid").string()) == 0 &&
      run_cli(j + "evaluate -d " + data + " --index " + (work / "ml.idx").string() + " --split test -o " +
              (work / "ml_test").string()) == 0 &&
      run_cli(j + "grid -d " + data + " --measure pas --lambdas 0,0.5,1 --scalings h_a,h_b,h_c -o " +
              (work / "ml_grid").string()) == 0 &&
      run_cli(j + "sparsity-report -d " + data + " -o " + (work / "ml_sparsity.tsv").string()) == 0;
  seconds_out = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!ok) return {false, "pipeline command failed"};

  std::ostringstream why;
  std::size_t values = 0;
  const auto check_unit = [&](double v, const std::string& what) {
    ++values;
    if (!(v >= 0.0 && v <= 1.0)) why << ' ' << what << '=' << v << " outside [0,1];";
  };
  std::vector<EvalRow> rows;
  for (const auto* r : {"ml_valid.json", "ml_test.json", "ml_grid.json"}) {
    const auto part = rows_from_json(work / r);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  g_emitted.insert(g_emitted.end(), rows.begin(), rows.end());
  for (const auto& r : rows) {
    check_unit(r.ndcg, "NDCG");
    check_unit(r.one_call, "1-call");
  }
  std::istringstream sparsity(slurp(work / "ml_sparsity.tsv"));
  std::string line;
  while (std::getline(sparsity, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 'G') continue;
    const auto fields = text::split(line, "\t");
    for (std::size_t c = 2; c < fields.size(); ++c) check_unit(*text::parse_double(fields[c]), "sparsity");
  }
  const auto stats = nlohmann::json::parse(slurp(fs::path(data) / "stats.json"));
  const double users = stats["users"].get<double>();
  const double avg = stats["average_length"].get<double>();
  const double records = stats["records"].get<double>();
  const double rel = std::fabs(users * avg - records) / records;
  if (!(rel <= 0.01)) why << " users*avg_length deviates from records by " << fmt(rel) << ';';
  if (!(seconds_out < 300.0)) why << " took " << fmt(seconds_out) << " s;";

  std::ostringstream detail;
  detail << stats["users"] << " users, " << stats["items"] << " items, " << stats["records"]
         << " records, avg length " << fmt(avg) << " (users*avg vs records rel. error " << fmt(rel) << "); " << values
         << " reported values in [0,1]; test 1-call@5 " << fmt(rows[1].one_call) << "; " << fmt(seconds_out, 3)
         << " s (limit 300)" << why.str();
  return {why.str().empty(), detail.str()};
}

// ---------------------------------------------------------------------------
// Criterion 7: metric closed forms and NDCG <= 1-call on every report.

Outcome criterion_metrics() {
  bool ok = ndcg_at_k(1, 5) == 1.0 && ndcg_at_k(3, 5) == 0.5 && ndcg_at_k(6, 5) == 0.0 &&
            ndcg_at_k(std::nullopt, 5) == 0.0 && one_call_at_k(1, 5) == 1 && one_call_at_k(5, 5) == 1 &&
            one_call_at_k(6, 5) == 0 && one_call_at_k(std::nullopt, 5) == 0;
  std::ostringstream detail;
  detail << "closed forms " << (ok ? "exact" : "WRONG");
  std::size_t violations = 0;
  for (const auto& r : g_emitted) {
    if (r.ndcg > r.one_call) ++violations;
  }
  detail << "; NDCG@5 <= 1-call@5 on " << g_emitted.size() - violations << "/" << g_emitted.size() << " report rows";
  if (g_emitted.empty()) {
    ok = false;
    detail << " (no reports were emitted)";
  }
  return {ok && violations == 0, detail.str()};
}

template <class F>
Criterion timed(int id, std::string name, F&& f) {
  std::cerr << "running criterion " << id << " (" << name << ")..." << std::endl;
  const auto start = std::chrono::steady_clock::now();
  Criterion c{id, std::move(name), f(), 0.0};
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return c;
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "pasrec_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  std::vector<Criterion> results;
  OracleTallies tallies;
  auto c1 = timed(1, "oracle equivalence", [&] {
    tallies = run_oracle_instances(250);
    const double worst = std::max(tallies.worst_similarity, tallies.worst_prediction);
    const bool ok = worst <= 1e-12 && tallies.corpora >= 200 && tallies.seconds < 120.0;
    return Outcome{ok, std::to_string(tallies.corpora) + " corpora, " + std::to_string(tallies.similarity_checks) +
                           " similarity and " + std::to_string(tallies.prediction_checks) +
                           " prediction checks, max |engine - oracle| = " + fmt(worst) + " (tol 1e-12), " +
                           fmt(tallies.seconds, 3) + " s (limit 120)"};
  });
  results.push_back(c1);
  results.push_back({2, "reduction identities",
                     {tallies.reduction_failures == 0,
                      std::to_string(tallies.reduction_checks) + " exact comparisons, " +
                          std::to_string(tallies.reduction_failures) + " mismatches"},
                     0.0});
  results.push_back({3, "position monotonicity (lambda=1, h_a)",
                     {tallies.monotone_violations == 0 && tallies.monotone_checks > 0,
                      std::to_string(tallies.monotone_checks) + " steps checked, " +
                          std::to_string(tallies.monotone_violations) + " violations"},
                     0.0});
  results.push_back({4, "scaling dominance (w=2)",
                     {tallies.dominance_violations == 0 && tallies.dominance_checks > 0,
                      std::to_string(tallies.dominance_checks) + " comparisons, " +
                          std::to_string(tallies.dominance_violations) + " violations"},
                     0.0});

  auto c5 = timed(5, "sparsity decay shape", criterion_sparsity);
  if (c5.seconds >= 300.0) c5.outcome = {false, c5.outcome.detail + "; over the 300 s limit"};
  results.push_back(c5);

  auto c6 = timed(6, "directional quality", criterion_direction);
  if (c6.seconds >= 600.0) c6.outcome = {false, c6.outcome.detail + "; over the 600 s limit"};

  auto c8 = timed(8, "end-to-end determinism", [&] { return criterion_determinism(work / "determinism"); });
  double real_seconds = 0.0;
  auto c9 = timed(9, "MovieLens-100K smoke run", [&] { return criterion_real_data(work, real_seconds); });
  auto c7 = timed(7, "metric correctness", criterion_metrics);

  results.push_back(c6);
  results.push_back(c7);
  results.push_back(c8);
  results.push_back(c9);

  int failed = 0;
  for (const auto& c : results) {
    std::cout << (c.outcome.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name
              << "): " << c.outcome.detail;
    if (c.seconds > 0.0) std::cout << " [" << fmt(c.seconds, 3) << " s]";
    std::cout << '\n';
    failed += !c.outcome.pass;
  }
  std::cout << (failed == 0 ? "ALL CRITERIA PASS" : std::to_string(failed) + " CRITERIA FAILED") << std::endl;
  fs::remove_all(work);
  return failed == 0 ? 0 : 1;
}
