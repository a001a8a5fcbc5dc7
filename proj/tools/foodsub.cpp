// foodsub: command-line driver for the food-substitute pipeline.
//
// Exit codes: 0 success, 1 validation error, 2 I/O error.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "foodsub/pipeline.hpp"

namespace {

template <class T>
void apply(const std::optional<T>& flag, T& field) {
  if (flag) field = *flag;
}

struct Flags {
  std::optional<std::string> taxonomy, meals, out_dir, judgements, queries_file, query, rankings, ndcg_gain;
  std::optional<std::uint64_t> min_row_count, min_col_count, svd_seed, query_seed, synth_seed, judge_seed;
  std::optional<std::size_t> svd_k, oversampling, power_iters, rank_k, n_queries, judge_raters;
  std::optional<std::size_t> n_clusters, foods_per_cluster, n_meals, meal_size_min, meal_size_max, partners, n_users;
  std::optional<double> min_score, affinity, zipf, judge_noise;
  std::optional<std::vector<std::string>> query_filters, methods;
  std::optional<std::vector<double>> taus;
  bool keep_duplicates = false, skip_malformed = false, svd_cosine = false;

  void add_to(CLI::App& app) {
    auto* g = app.add_option_group("Run configuration");
    g->add_option("--taxonomy", taxonomy, "Taxonomy TSV");
    g->add_option("--meals", meals, "Meal log (JSON lines)");
    g->add_option("--out-dir", out_dir, "Directory for artifacts and the manifest");
    g->add_option("--judgements", judgements, "Judgements CSV");
    g->add_option("--queries-file", queries_file, "Query keys, one per line (instead of sampling)");
    g->add_option("--query", query, "Query food key for 'query'");
    g->add_option("--rankings", rankings, "Rankings TSV to read instead of <out-dir>/rankings.tsv");
    g->add_option("--min-row-count", min_row_count, "Minimum #(f) for a matrix row");
    g->add_option("--min-col-count", min_col_count, "Minimum #(c) for a matrix column");
    g->add_flag("--keep-duplicates", keep_duplicates, "Count repeated foods within a meal");
    g->add_flag("--skip-malformed", skip_malformed, "Skip malformed meal lines instead of aborting");
    g->add_option("--svd-k", svd_k, "SVD rank");
    g->add_option("--svd-seed", svd_seed, "SVD sketch seed");
    g->add_option("--oversampling", oversampling, "Extra sketch columns");
    g->add_option("--power-iters", power_iters, "Minimum subspace iterations");
    g->add_flag("--svd-cosine", svd_cosine, "Rank SVD candidates by cosine instead of dot product");
    g->add_option("--rank-k", rank_k, "Candidates per query");
    g->add_option("--n-queries", n_queries, "Number of sampled queries");
    g->add_option("--query-seed", query_seed, "Query sampling seed");
    g->add_option("--query-filters", query_filters, "Feature prefixes admitted as queries")->delimiter(',');
    g->add_option("--min-score", min_score, "Drop candidates scoring at or below this value");
    g->add_option("--methods", methods, "PPMI and/or SVD")->delimiter(',');
    g->add_option("--taus", taus, "Relevance thresholds")->delimiter(',');
    g->add_option("--ndcg-gain", ndcg_gain, "linear or exponential");
    g->add_option("--synth-clusters", n_clusters, "Synthetic clusters");
    g->add_option("--synth-foods-per-cluster", foods_per_cluster, "Foods per cluster");
    g->add_option("--synth-meals", n_meals, "Synthetic meals");
    g->add_option("--synth-meal-min", meal_size_min, "Smallest meal");
    g->add_option("--synth-meal-max", meal_size_max, "Largest meal");
    g->add_option("--synth-affinity", affinity, "Probability a companion comes from the anchor's partners");
    g->add_option("--synth-zipf", zipf, "Zipf exponent of cluster popularity");
    g->add_option("--synth-partners", partners, "Partner clusters per cluster");
    g->add_option("--synth-users", n_users, "Synthetic users");
    g->add_option("--synth-seed", synth_seed, "Synthetic corpus seed");
    g->add_option("--judge-raters", judge_raters, "Simulated raters per pair");
    g->add_option("--judge-seed", judge_seed, "Simulated rating seed");
    g->add_option("--judge-noise", judge_noise, "Simulated rating noise half-width");
  }

  void apply_to(foodsub::RunConfig& c) const {
    apply(taxonomy, c.taxonomy);
    apply(meals, c.meals);
    apply(out_dir, c.out_dir);
    apply(judgements, c.judgements);
    apply(queries_file, c.queries_file);
    apply(query, c.query);
    apply(rankings, c.rankings);
    apply(min_row_count, c.min_row_count);
    apply(min_col_count, c.min_col_count);
    if (keep_duplicates) c.keep_duplicates = true;
    if (skip_malformed) c.skip_malformed = true;
    apply(svd_k, c.svd_k);
    apply(svd_seed, c.svd_seed);
    apply(oversampling, c.oversampling);
    apply(power_iters, c.power_iters);
    if (svd_cosine) c.svd_cosine = true;
    apply(rank_k, c.rank_k);
    apply(n_queries, c.n_queries);
    apply(query_seed, c.query_seed);
    apply(query_filters, c.query_filters);
    if (min_score) c.min_score = *min_score;
    apply(methods, c.methods);
    apply(taus, c.taus);
    apply(ndcg_gain, c.ndcg_gain);
    apply(n_clusters, c.synth.n_clusters);
    apply(foods_per_cluster, c.synth.foods_per_cluster);
    apply(n_meals, c.synth.n_meals);
    apply(meal_size_min, c.synth.meal_size_min);
    apply(meal_size_max, c.synth.meal_size_max);
    apply(affinity, c.synth.within_cluster_context_affinity);
    apply(zipf, c.synth.zipf_exponent);
    apply(partners, c.synth.partners_per_cluster);
    apply(n_users, c.synth.n_users);
    apply(synth_seed, c.synth.seed);
    apply(judge_raters, c.judge_raters);
    apply(judge_seed, c.judge_seed);
    apply(judge_noise, c.judge_noise);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Food substitutes from meal logs via distributional similarity"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration; flags override it");
  Flags flags;
  flags.add_to(app);

  std::vector<std::pair<CLI::App*, foodsub::Stage>> singles;
  auto add_stage = [&](const char* name, foodsub::Stage stage, const char* help) {
    singles.emplace_back(app.add_subcommand(name, help), stage);
  };
  add_stage("ingest", foodsub::Stage::ingest, "Normalize meal entries against the taxonomy");
  add_stage("build-matrix", foodsub::Stage::build_matrix, "Count food-context pairs and build the PPMI matrix");
  add_stage("svd", foodsub::Stage::svd, "Truncated SVD of the PPMI matrix");
  add_stage("query", foodsub::Stage::query, "Print the top-k substitutes of one food key");
  add_stage("rank-all", foodsub::Stage::rank_all, "Sample queries and write rankings.tsv");
  add_stage("evaluate", foodsub::Stage::evaluate, "Score rankings against judgements");
  add_stage("heatmap", foodsub::Stage::heatmap, "Subcategory co-occurrence of ranked pairs");
  add_stage("synth", foodsub::Stage::synth, "Generate a planted-cluster corpus");
  add_stage("stats", foodsub::Stage::stats, "Report corpus shape");
  add_stage("judge", foodsub::Stage::judge, "Simulate rater judgements for rankings.tsv");

  std::vector<std::string> stage_names;
  auto* run = app.add_subcommand("run", "Run several stages (default: the full pipeline)");
  run->add_option("--stages", stage_names, "Comma-separated stage list")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    foodsub::RunConfig config;
    if (!config_path.empty()) config = foodsub::load_config(config_path);
    flags.apply_to(config);

    std::vector<foodsub::Stage> stages;
    for (const auto& [sub, stage] : singles)
      if (sub->parsed()) stages.push_back(stage);
    if (run->parsed()) {
      if (stage_names.empty()) {
        stages = foodsub::full_pipeline();
      } else {
        for (const auto& s : stage_names) stages.push_back(foodsub::parse_stage(s));
      }
    }
    foodsub::run_pipeline(config, stages);
  } catch (const foodsub::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const foodsub::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
