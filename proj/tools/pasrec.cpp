// pasrec command-line front end: prepare, build-index, evaluate, grid,
// sparsity-report and synth.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pasrec/pasrec.hpp"

namespace fs = std::filesystem;
using namespace pasrec;

namespace {

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

// Every run records the fully resolved options (defaults included) in a file
// that can be fed back through --config.
void write_snapshot(const CLI::App& app, const fs::path& path) {
  auto out = open_output(path);
  out << "# pasrec resolved configuration\n";
  for (const auto* opt : app.get_options()) {
    if (opt->get_configurable() && !opt->get_lnames().empty() && opt->get_lnames()[0] == "workers") {
      out << "workers=" << opt->as<int>() << '\n';
    }
  }
  for (const auto* sub : app.get_subcommands()) {
    out << '[' << sub->get_name() << "]\n" << sub->config_to_str(true, false);
  }
}

void write_reports(std::span<const EvalRow> rows, const fs::path& prefix) {
  {
    auto tsv = open_output(fs::path(prefix.string() + ".tsv"));
    write_report_tsv(rows, tsv);
  }
  auto json = open_output(fs::path(prefix.string() + ".json"));
  json << report_to_json(rows).dump(2) << '\n';
}

std::string default_label(const fs::path& dataset_dir) {
  auto p = dataset_dir;
  if (!p.has_filename()) p = p.parent_path();
  return p.filename().string();
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("dataset directory not found: " + dir.string());
  return read_dataset(dir);
}

// Similarity options shared by build-index, evaluate and grid.
struct ParamOptions {
  std::string measure = "pas";
  std::string ranking = "bis";
  int ell = 10;
  double rho = 0.2;
  double lambda = 0.5;
  std::string scaling = "h_a";
  double w = 2.0;
  int neighbors = 20;

  std::vector<CLI::Option*> options;

  void add(CLI::App* cmd, bool with_ell_and_lambda = true) {
    const auto measures = CLI::IsMember({"bis", "pas", "pas_uni", "cosine"});
    const auto scalings = CLI::IsMember({"h_a", "h_b", "h_c"});
    options.push_back(cmd->add_option("--measure", measure, "bis | pas | pas_uni | cosine")->check(measures)->capture_default_str());
    options.push_back(cmd->add_option("--ranking", ranking, "Neighbor ranking for pas: bis | max_over_t")
                          ->check(CLI::IsMember({"bis", "max_over_t"}))
                          ->capture_default_str());
    if (with_ell_and_lambda) {
      options.push_back(cmd->add_option("--ell,-k", ell, "Window length k = ell")->check(CLI::Range(1, 1000))->capture_default_str());
      options.push_back(cmd->add_option("--lambda", lambda, "Mixing weight")->check(CLI::Range(0.0, 1.0))->capture_default_str());
      options.push_back(cmd->add_option("--scaling", scaling, "h_a | h_b | h_c")->check(scalings)->capture_default_str());
    }
    options.push_back(cmd->add_option("--rho", rho, "Reverse factor")->check(CLI::Range(0.0, 1.0))->capture_default_str());
    options.push_back(cmd->add_option("--w", w, "Scaling width (> 1)")->capture_default_str());
    options.push_back(cmd->add_option("--neighbors,-n", neighbors, "Neighborhood size")->check(CLI::PositiveNumber)->capture_default_str());
  }

  bool any_given() const {
    for (const auto* o : options) {
      if (o->count() > 0) return true;
    }
    return false;
  }

  SimilarityParams params() const {
    SimilarityParams p;
    p.ell = ell;
    p.rho = rho;
    p.lambda = lambda;
    p.scaling = parse_scaling(scaling);
    p.w = w;
    p.n_neighbors = neighbors;
    p.validate();
    return p;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Position-aware similarity recommender: data preparation, indexing and evaluation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Key=value configuration file; command-line flags override it");
  int workers = 1;
  app.add_option("--workers,-j", workers, "Worker threads (0 = hardware concurrency)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  // synth ------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate a synthetic interaction log");
  SynthConfig sc;
  std::string synth_out;
  synth->add_option("--users", sc.n_users)->capture_default_str();
  synth->add_option("--items", sc.n_items)->capture_default_str();
  synth->add_option("--min-length", sc.min_length)->capture_default_str();
  synth->add_option("--max-length", sc.max_length)->capture_default_str();
  synth->add_option("--signal", sc.signal)->capture_default_str();
  synth->add_option("--reverse-noise", sc.reverse_noise)->capture_default_str();
  synth->add_option("--seed", sc.seed)->capture_default_str();
  synth->add_option("--out,-o", synth_out, "Output log (user::item::rating::timestamp)")->required();

  // prepare ----------------------------------------------------------------
  auto* prepare = app.add_subcommand("prepare", "Parse, filter, deduplicate, subsample and split a log");
  std::string input, out_dir, format = "dat", filter = "rating5", on_malformed = "fail";
  std::optional<std::string> delimiter;
  int user_col = 0, item_col = 1, rating_col = 2, time_col = 3;
  bool header = false;
  std::size_t max_users = 20000;
  std::uint64_t seed = 1;
  prepare->add_option("--input,-i", input, "Interaction log")->required();
  prepare->add_option("--out,-o", out_dir, "Output dataset directory")->required();
  prepare->add_option("--format", format, "dat (::) | csv | tsv")
      ->check(CLI::IsMember({"dat", "csv", "tsv"}))
      ->capture_default_str();
  prepare->add_option("--delimiter", delimiter, "Override the field delimiter");
  prepare->add_option("--user-col", user_col)->capture_default_str();
  prepare->add_option("--item-col", item_col)->capture_default_str();
  prepare->add_option("--rating-col", rating_col, "-1 when the log has no rating")->capture_default_str();
  prepare->add_option("--time-col", time_col)->capture_default_str();
  prepare->add_flag("--header", header, "Skip the first line");
  prepare->add_option("--filter", filter, "rating5 keeps rating == 5; all keeps every record")
      ->check(CLI::IsMember({"rating5", "all"}))
      ->capture_default_str();
  prepare->add_option("--on-malformed", on_malformed)->check(CLI::IsMember({"fail", "skip"}))->capture_default_str();
  prepare->add_option("--max-users", max_users)->check(CLI::PositiveNumber)->capture_default_str();
  prepare->add_option("--seed", seed)->capture_default_str();

  // build-index ------------------------------------------------------------
  auto* build = app.add_subcommand("build-index", "Count pairs and build the neighbor index");
  std::string dataset_dir, index_path;
  ParamOptions build_params;
  build->add_option("--dataset,-d", dataset_dir)->required();
  build->add_option("--out,-o", index_path, "Index artifact path")->required();
  build_params.add(build);

  // evaluate ---------------------------------------------------------------
  auto* eval = app.add_subcommand("evaluate", "Score a split with a built index");
  std::string eval_index, split = "test", report_prefix, label;
  std::size_t K = 5;
  ParamOptions eval_params;
  eval->add_option("--dataset,-d", dataset_dir)->required();
  eval->add_option("--index", eval_index)->required();
  eval->add_option("--split", split)->check(CLI::IsMember({"validation", "test"}))->capture_default_str();
  eval->add_option("--K", K, "Cut-off")->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--out,-o", report_prefix, "Report prefix; writes <prefix>.tsv and <prefix>.json")->required();
  eval->add_option("--label", label, "Dataset label in reports (default: dataset directory name)");
  eval_params.add(eval);
  eval->footer("Similarity flags, when given, must agree with the index or the run fails.");

  // grid -------------------------------------------------------------------
  auto* grid = app.add_subcommand("grid", "Validation grid search plus test row of the selected configuration");
  ParamOptions grid_params;
  std::vector<int> ells{5, 10, 20, 40};
  std::vector<double> lambdas{0.5};
  std::vector<std::string> scalings{"h_a"};
  grid->add_option("--dataset,-d", dataset_dir)->required();
  grid->add_option("--out,-o", report_prefix, "Report prefix")->required();
  grid->add_option("--K", K)->check(CLI::PositiveNumber)->capture_default_str();
  grid->add_option("--label", label);
  grid->add_option("--ells", ells, "Values of ell = k")->delimiter(',')->capture_default_str();
  grid->add_option("--lambdas", lambdas)->delimiter(',')->check(CLI::Range(0.0, 1.0))->capture_default_str();
  grid->add_option("--scalings", scalings)->delimiter(',')->check(CLI::IsMember({"h_a", "h_b", "h_c"}))->capture_default_str();
  grid_params.add(grid, false);

  // sparsity-report --------------------------------------------------------
  auto* sparsity = app.add_subcommand("sparsity-report", "Mean PAS(uni) per gap G for each scaling function");
  int sparsity_k = 10, sparsity_n = 20;
  double sparsity_w = 2.0;
  std::string sparsity_out;
  sparsity->add_option("--dataset,-d", dataset_dir)->required();
  sparsity->add_option("--out,-o", sparsity_out, "TSV output")->required();
  sparsity->add_option("--k", sparsity_k)->check(CLI::Range(1, 1000))->capture_default_str();
  sparsity->add_option("--neighbors,-n", sparsity_n)->check(CLI::PositiveNumber)->capture_default_str();
  sparsity->add_option("--w", sparsity_w)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const Timer timer;
      sc.validate();
      const auto records = generate(sc, workers);
      {
        auto out = open_output(synth_out);
        write_interactions(records, out);
      }
      write_snapshot(app, synth_out + ".config");
      std::cerr << "synth: " << records.size() << " records in " << timer.seconds() << " s\n";
    } else if (*prepare) {
      const Timer timer;
      Schema schema = format == "csv" ? Schema::csv() : format == "tsv" ? Schema::tsv() : Schema::movielens_dat();
      if (delimiter) schema.delimiter = *delimiter;
      schema.user_column = user_col;
      schema.item_column = item_col;
      schema.rating_column = rating_col < 0 ? std::nullopt : std::optional<int>(rating_col);
      schema.timestamp_column = time_col;
      schema.has_header = header;
      std::ifstream in(input, std::ios::binary);
      if (!in) throw Error("cannot read input: " + input);
      const auto parsed =
          parse_interactions(in, schema, on_malformed == "skip" ? OnMalformed::skip : OnMalformed::fail);
      if (parsed.skipped > 0) {
        std::cerr << "prepare: skipped " << parsed.skipped << " malformed lines (first at line " << *parsed.first_bad_line
                  << ")\n";
      }
      auto records = filter_positive(parsed.records, filter == "all" ? FilterMode::all : FilterMode::rating_equals_5);
      records = subsample_users(deduplicate(records), max_users, seed);
      const auto ds = build_dataset(records);
      if (ds.n_users() == 0) {
        throw Error("no eligible users after filtering (each user needs at least " +
                    std::to_string(kMinInteractionsPerUser) + " interactions)");
      }
      write_dataset(ds, out_dir);
      write_snapshot(app, fs::path(out_dir) / "config.ini");
      std::cerr << "prepare: " << ds.stats.users << " users, " << ds.stats.items << " items, " << ds.stats.records
                << " records in " << timer.seconds() << " s\n";
    } else if (*build) {
      const Timer timer;
      const auto ds = load_dataset(dataset_dir);
      const auto p = build_params.params();
      const auto store = count_pairs(ds.train, p.ell, ds.n_items(), workers);
      const auto index = build_neighbor_index(store, p, parse_measure(build_params.measure),
                                              parse_ranking(build_params.ranking), workers, ds.items.ids());
      save_index(index, fs::path(index_path));
      write_snapshot(app, index_path + ".config");
      std::cerr << "build-index: " << store.pair_count() << " co-occurring pairs, " << store.banded_pair_count()
                << " within ell, " << index.entry_count() << " neighbor entries, built in " << timer.seconds()
                << " s\n";
    } else if (*eval) {
      const Timer timer;
      const auto ds = load_dataset(dataset_dir);
      if (!fs::exists(eval_index)) throw Error("index not found: " + eval_index);
      const auto index = load_index(fs::path(eval_index));
      std::optional<EvalConfig> expected;
      if (eval_params.any_given()) {
        // Unspecified flags default to the index's own values.
        EvalConfig want = EvalConfig::from_index(index);
        const auto& opts = eval_params.options;
        const auto given = [&](std::string_view name) {
          for (const auto* o : opts) {
            if (o->check_name(std::string(name))) return o->count() > 0;
          }
          return false;
        };
        if (given("--measure")) want.measure = parse_measure(eval_params.measure);
        if (given("--ranking")) want.ranking = parse_ranking(eval_params.ranking);
        if (given("--ell")) want.params.ell = eval_params.ell;
        if (given("--rho")) want.params.rho = eval_params.rho;
        if (given("--lambda")) want.params.lambda = eval_params.lambda;
        if (given("--scaling")) want.params.scaling = parse_scaling(eval_params.scaling);
        if (given("--w")) want.params.w = eval_params.w;
        if (given("--neighbors")) want.params.n_neighbors = eval_params.neighbors;
        expected = want;
      }
      const auto row = evaluate(ds, index, parse_split(split), K, workers, expected,
                                label.empty() ? default_label(dataset_dir) : label);
      if (row.users == 0) throw Error("no users could be evaluated on the " + split + " split");
      const std::vector<EvalRow> rows{row};
      write_reports(rows, report_prefix);
      write_snapshot(app, report_prefix + ".config");
      std::cerr << "evaluate: " << row.config.method() << " " << split << " NDCG@" << K << "=" << row.ndcg
                << " 1-call@" << K << "=" << row.one_call << " over " << row.users << " users in " << timer.seconds()
                << " s\n";
    } else if (*grid) {
      const Timer timer;
      const auto ds = load_dataset(dataset_dir);
      GridSpec spec;
      spec.measure = parse_measure(grid_params.measure);
      spec.ranking = parse_ranking(grid_params.ranking);
      spec.ells = ells;
      spec.lambdas = lambdas;
      spec.scalings.clear();
      for (const auto& s : scalings) spec.scalings.push_back(parse_scaling(s));
      spec.rho = grid_params.rho;
      spec.w = grid_params.w;
      spec.n_neighbors = grid_params.neighbors;
      const auto configs = make_grid(spec);
      const auto result = grid_search(ds, configs, K, workers, label.empty() ? default_label(dataset_dir) : label);
      std::vector<EvalRow> rows = result.validation;
      rows.push_back(result.test);
      write_reports(rows, report_prefix);
      write_snapshot(app, report_prefix + ".config");
      std::cerr << "grid: " << configs.size() << " configurations, selected " << result.test.config.method()
                << " k=" << result.test.config.params.k() << ", test 1-call@" << K << "=" << result.test.one_call
                << " in " << timer.seconds() << " s\n";
    } else if (*sparsity) {
      const Timer timer;
      const auto ds = load_dataset(dataset_dir);
      const auto store = count_pairs(ds.train, sparsity_k, ds.n_items(), workers);
      const auto report = sparsity_report(store, sparsity_k, sparsity_n, sparsity_w, workers);
      {
        auto out = open_output(sparsity_out);
        write_sparsity_tsv(report, out);
      }
      write_snapshot(app, sparsity_out + ".config");
      std::cerr << "sparsity-report: done in " << timer.seconds() << " s\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "pasrec: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
