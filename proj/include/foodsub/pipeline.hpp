#ifndef FOODSUB_PIPELINE_HPP
#define FOODSUB_PIPELINE_HPP

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "foodsub/corpus.hpp"
#include "foodsub/error.hpp"
#include "foodsub/eval.hpp"
#include "foodsub/io.hpp"
#include "foodsub/ppmi.hpp"
#include "foodsub/ranker.hpp"
#include "foodsub/svd.hpp"
#include "foodsub/synth.hpp"
#include "foodsub/taxonomy.hpp"

namespace foodsub {

namespace fs = std::filesystem;

/// Every tunable of a run. Loaded from a JSON document whose keys are the
/// field names below; command-line flags override individual fields.
struct RunConfig {
  std::string taxonomy;
  std::string meals;
  std::string out_dir = "out";
  std::string judgements;
  std::string queries_file;
  std::string query;
  std::string rankings;

  std::uint64_t min_row_count = 5;
  std::uint64_t min_col_count = 1;
  bool keep_duplicates = false;
  bool skip_malformed = false;

  std::size_t svd_k = 500;
  std::uint64_t svd_seed = 0;
  std::size_t oversampling = 10;
  std::size_t power_iters = 4;
  bool svd_cosine = false;

  std::size_t rank_k = 10;
  std::size_t n_queries = 100;
  std::uint64_t query_seed = 0;
  std::vector<std::string> query_filters{"meats:", "beans and legumes:", "nuts and seeds:"};
  std::optional<double> min_score;
  std::vector<std::string> methods{"PPMI", "SVD"};

  std::vector<double> taus{3.0, 4.0};
  std::string ndcg_gain = "linear";

  SynthSpec synth;
  std::size_t judge_raters = 3;
  std::uint64_t judge_seed = 0;
  double judge_noise = 1.5;

  /// All problems at once; empty when the config is usable.
  std::vector<std::string> problems() const {
    std::vector<std::string> p;
    if (min_row_count < 1) p.push_back("min_row_count must be >= 1");
    if (min_col_count < 1) p.push_back("min_col_count must be >= 1");
    if (svd_k < 1) p.push_back("svd_k must be >= 1");
    if (power_iters < 1) p.push_back("power_iters must be >= 1");
    if (rank_k < 1) p.push_back("rank_k must be >= 1");
    if (n_queries < 1) p.push_back("n_queries must be >= 1");
    if (methods.empty()) p.push_back("methods must name PPMI and/or SVD");
    for (const auto& m : methods)
      if (m != "PPMI" && m != "SVD") p.push_back("unknown method '" + m + "'");
    if (taus.empty()) p.push_back("taus must be non-empty");
    if (ndcg_gain != "linear" && ndcg_gain != "exponential") p.push_back("ndcg_gain must be linear or exponential");
    if (out_dir.empty()) p.push_back("out_dir must be set");
    if (judge_raters < 1) p.push_back("judge_raters must be >= 1");
    try {
      synth.validate();
    } catch (const ValidationError& e) {
      p.push_back(e.what());
    }
    return p;
  }

  void validate() const {
    auto p = problems();
    if (!p.empty()) throw ValidationError("invalid configuration:\n  " + join(p, "\n  "));
  }

  bool uses(Method m) const {
    for (const auto& s : methods)
      if (parse_method(s) == m) return true;
    return false;
  }

  Gain gain() const { return ndcg_gain == "exponential" ? Gain::exponential : Gain::linear; }

  fs::path out(const std::string& name) const { return fs::path(out_dir) / name; }
};

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["taxonomy"] = c.taxonomy;
  j["meals"] = c.meals;
  j["out_dir"] = c.out_dir;
  j["judgements"] = c.judgements;
  j["queries_file"] = c.queries_file;
  j["query"] = c.query;
  j["rankings"] = c.rankings;
  j["min_row_count"] = c.min_row_count;
  j["min_col_count"] = c.min_col_count;
  j["keep_duplicates"] = c.keep_duplicates;
  j["skip_malformed"] = c.skip_malformed;
  j["svd_k"] = c.svd_k;
  j["svd_seed"] = c.svd_seed;
  j["oversampling"] = c.oversampling;
  j["power_iters"] = c.power_iters;
  j["svd_cosine"] = c.svd_cosine;
  j["rank_k"] = c.rank_k;
  j["n_queries"] = c.n_queries;
  j["query_seed"] = c.query_seed;
  j["query_filters"] = c.query_filters;
  j["min_score"] = c.min_score ? nlohmann::json(*c.min_score) : nlohmann::json(nullptr);
  j["methods"] = c.methods;
  j["taus"] = c.taus;
  j["ndcg_gain"] = c.ndcg_gain;
  j["synth"] = {{"n_clusters", c.synth.n_clusters},
                {"foods_per_cluster", c.synth.foods_per_cluster},
                {"n_meals", c.synth.n_meals},
                {"meal_size_min", c.synth.meal_size_min},
                {"meal_size_max", c.synth.meal_size_max},
                {"within_cluster_context_affinity", c.synth.within_cluster_context_affinity},
                {"zipf_exponent", c.synth.zipf_exponent},
                {"partners_per_cluster", c.synth.partners_per_cluster},
                {"n_users", c.synth.n_users},
                {"seed", c.synth.seed}};
  j["judge_raters"] = c.judge_raters;
  j["judge_seed"] = c.judge_seed;
  j["judge_noise"] = c.judge_noise;
  return j;
}

/// Overlays the keys present in `j` onto `base`. Unknown keys and type
/// mismatches are collected and reported together.
inline RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {}) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  std::vector<std::string> errs;
  const nlohmann::json known = to_json(base);
  auto take = [&](const nlohmann::json& src, const std::string& name, auto& field) {
    auto it = src.find(name);
    if (it == src.end()) return;
    try {
      it->get_to(field);
    } catch (const nlohmann::json::exception&) {
      errs.push_back("config field '" + name + "' has the wrong type");
    }
  };
  for (const auto& [k, _] : j.items())
    if (!known.contains(k)) errs.push_back("unknown config field '" + k + "'");

  RunConfig c = std::move(base);
  take(j, "taxonomy", c.taxonomy);
  take(j, "meals", c.meals);
  take(j, "out_dir", c.out_dir);
  take(j, "judgements", c.judgements);
  take(j, "queries_file", c.queries_file);
  take(j, "query", c.query);
  take(j, "rankings", c.rankings);
  take(j, "min_row_count", c.min_row_count);
  take(j, "min_col_count", c.min_col_count);
  take(j, "keep_duplicates", c.keep_duplicates);
  take(j, "skip_malformed", c.skip_malformed);
  take(j, "svd_k", c.svd_k);
  take(j, "svd_seed", c.svd_seed);
  take(j, "oversampling", c.oversampling);
  take(j, "power_iters", c.power_iters);
  take(j, "svd_cosine", c.svd_cosine);
  take(j, "rank_k", c.rank_k);
  take(j, "n_queries", c.n_queries);
  take(j, "query_seed", c.query_seed);
  take(j, "query_filters", c.query_filters);
  if (auto it = j.find("min_score"); it != j.end()) {
    if (it->is_null()) c.min_score.reset();
    else if (it->is_number()) c.min_score = it->get<double>();
    else errs.push_back("config field 'min_score' has the wrong type");
  }
  take(j, "methods", c.methods);
  take(j, "taus", c.taus);
  take(j, "ndcg_gain", c.ndcg_gain);
  if (auto it = j.find("synth"); it != j.end()) {
    if (!it->is_object()) {
      errs.push_back("config field 'synth' must be an object");
    } else {
      for (const auto& [k, _] : it->items())
        if (!known["synth"].contains(k)) errs.push_back("unknown config field 'synth." + k + "'");
      take(*it, "n_clusters", c.synth.n_clusters);
      take(*it, "foods_per_cluster", c.synth.foods_per_cluster);
      take(*it, "n_meals", c.synth.n_meals);
      take(*it, "meal_size_min", c.synth.meal_size_min);
      take(*it, "meal_size_max", c.synth.meal_size_max);
      take(*it, "within_cluster_context_affinity", c.synth.within_cluster_context_affinity);
      take(*it, "zipf_exponent", c.synth.zipf_exponent);
      take(*it, "partners_per_cluster", c.synth.partners_per_cluster);
      take(*it, "n_users", c.synth.n_users);
      take(*it, "seed", c.synth.seed);
    }
  }
  take(j, "judge_raters", c.judge_raters);
  take(j, "judge_seed", c.judge_seed);
  take(j, "judge_noise", c.judge_noise);
  if (!errs.empty()) throw ValidationError("invalid configuration:\n  " + join(errs, "\n  "));
  return c;
}

inline RunConfig load_config(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

/// Artifact file names inside out_dir.
namespace artifact {
inline constexpr const char* processed = "processed.jsonl";
inline constexpr const char* ingest_stats = "ingest_stats.json";
inline constexpr const char* rows = "rows.tsv";
inline constexpr const char* cols = "cols.tsv";
inline constexpr const char* matrix = "matrix.ppmi";
inline constexpr const char* model = "model.svd";
inline constexpr const char* queries = "queries.txt";
inline constexpr const char* rankings = "rankings.tsv";
inline constexpr const char* metrics = "metrics.tsv";
inline constexpr const char* heatmap = "heatmap.csv";
inline constexpr const char* stats = "stats.tsv";
inline constexpr const char* manifest = "manifest.json";
inline constexpr const char* synth_meals = "meals.jsonl";
inline constexpr const char* synth_clusters = "clusters.tsv";
inline constexpr const char* synth_taxonomy = "taxonomy.tsv";
inline constexpr const char* judgements = "judgements.csv";
}  // namespace artifact

enum class Stage { ingest, build_matrix, svd, rank_all, evaluate, heatmap, query, stats, synth, judge };

inline std::string to_string(Stage s) {
  switch (s) {
    case Stage::ingest: return "ingest";
    case Stage::build_matrix: return "build-matrix";
    case Stage::svd: return "svd";
    case Stage::rank_all: return "rank-all";
    case Stage::evaluate: return "evaluate";
    case Stage::heatmap: return "heatmap";
    case Stage::query: return "query";
    case Stage::stats: return "stats";
    case Stage::synth: return "synth";
    case Stage::judge: return "judge";
  }
  return "?";
}

inline Stage parse_stage(const std::string& s) {
  for (Stage st : {Stage::ingest, Stage::build_matrix, Stage::svd, Stage::rank_all, Stage::evaluate, Stage::heatmap,
                   Stage::query, Stage::stats, Stage::synth, Stage::judge})
    if (to_string(st) == s) return st;
  throw ValidationError("unknown stage '" + s + "'");
}

/// The stages of a full run, in dependency order.
inline std::vector<Stage> full_pipeline() {
  return {Stage::ingest, Stage::build_matrix, Stage::svd, Stage::rank_all, Stage::evaluate, Stage::heatmap};
}

class Pipeline {
public:
  explicit Pipeline(RunConfig config, std::ostream& log = std::cerr, std::ostream& out = std::cout)
      : config_(std::move(config)), log_(log), out_(out) {}

  const RunConfig& config() const noexcept { return config_; }

  /// Runs the stages in order and returns the updated manifest, which is
  /// also written to out_dir. Earlier stage entries of an existing manifest
  /// are kept unless re-run.
  nlohmann::json run(const std::vector<Stage>& stages) {
    config_.validate();
    nlohmann::json manifest = load_manifest();
    manifest["config"] = to_json(config_);
    if (!manifest.contains("stages")) manifest["stages"] = nlohmann::json::object();
    for (Stage s : stages) {
      inputs_.clear();
      outputs_.clear();
      const auto t0 = std::chrono::steady_clock::now();
      run_stage(s);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      nlohmann::json entry;
      entry["seconds"] = secs;
      entry["inputs"] = nlohmann::json::object();
      entry["outputs"] = nlohmann::json::object();
      for (const auto& p : inputs_) entry["inputs"][p.string()] = io::file_digest(p);
      for (const auto& p : outputs_) entry["outputs"][p.string()] = io::file_digest(p);
      manifest["stages"][to_string(s)] = entry;
      io::write_file(config_.out(artifact::manifest), manifest.dump(2) + "\n");
    }
    return manifest;
  }

private:
  nlohmann::json load_manifest() const {
    const auto path = config_.out(artifact::manifest);
    if (!fs::exists(path)) return nlohmann::json::object();
    try {
      auto j = nlohmann::json::parse(io::read_file(path));
      return j.is_object() ? j : nlohmann::json::object();
    } catch (const nlohmann::json::parse_error&) {
      return nlohmann::json::object();
    }
  }

  fs::path need(const fs::path& p, Stage producer) {
    if (!fs::exists(p))
      throw ValidationError("missing " + p.string() + "; run the '" + to_string(producer) + "' stage first");
    inputs_.push_back(p);
    return p;
  }

  fs::path need_input(const std::string& path, const char* field) {
    if (path.empty()) throw ValidationError(std::string("config field '") + field + "' is required for this stage");
    if (!fs::exists(path)) throw IoError("cannot open " + path);
    inputs_.push_back(path);
    return path;
  }

  void emit(const std::string& name, const std::string& content) {
    auto p = config_.out(name);
    io::write_file(p, content);
    outputs_.push_back(p);
  }

  void run_stage(Stage s) {
    log_ << "[foodsub] " << to_string(s) << '\n';
    switch (s) {
      case Stage::ingest: return ingest();
      case Stage::build_matrix: return build_matrix();
      case Stage::svd: return svd();
      case Stage::rank_all: return rank_all_stage();
      case Stage::evaluate: return evaluate();
      case Stage::heatmap: return heatmap();
      case Stage::query: return query();
      case Stage::stats: return stats();
      case Stage::synth: return synth();
      case Stage::judge: return judge();
    }
  }

  PreprocessResult preprocess(std::vector<MealRecord>& meals_out) {
    auto tax = load_taxonomy(need_input(config_.taxonomy, "taxonomy"));
    LoadOptions lo;
    lo.skip_malformed = config_.skip_malformed;
    lo.on_skip = [this](const ParseError& e) { log_ << "skipped: " << e.what() << '\n'; };
    meals_out = load_meals(need_input(config_.meals, "meals"), lo);
    return preprocess_corpus(meals_out, tax, config_.keep_duplicates);
  }

  void ingest() {
    std::vector<MealRecord> meals;
    auto pre = preprocess(meals);
    emit(artifact::processed, processed_meals_to_jsonl(pre.meals));
    nlohmann::json st = {{"meals", pre.stats.meals},
                         {"entries_total", pre.stats.entries_total},
                         {"entries_discarded", pre.stats.entries_discarded},
                         {"discard_rate", pre.stats.discard_rate()}};
    emit(artifact::ingest_stats, st.dump(2) + "\n");
    log_ << "meals=" << pre.stats.meals << " entries=" << pre.stats.entries_total
         << " discarded=" << pre.stats.entries_discarded << '\n';
  }

  void build_matrix() {
    auto path = need(config_.out(artifact::processed), Stage::ingest);
    auto meals = parse_processed_meals(io::read_file(path), path.string());
    auto cc = build_pair_counts(meals, config_.min_row_count, config_.min_col_count);
    auto m = build_ppmi_matrix(cc);
    emit(artifact::rows, vocabulary_to_tsv(cc.rows));
    emit(artifact::cols, vocabulary_to_tsv(cc.cols));
    emit(artifact::matrix, ppmi_to_text(m));
    log_ << "matrix " << m.rows() << "x" << m.cols() << " nnz=" << m.nnz() << " |D|=" << cc.counts.total << '\n';
  }

  PpmiMatrix read_matrix() {
    auto path = need(config_.out(artifact::matrix), Stage::build_matrix);
    return parse_ppmi(io::read_file(path), path.string());
  }

  Vocabulary read_rows() {
    auto path = need(config_.out(artifact::rows), Stage::build_matrix);
    return parse_vocabulary(io::read_file(path), path.string());
  }

  SvdModel read_model() {
    auto path = need(config_.out(artifact::model), Stage::svd);
    return parse_svd(io::read_file(path), path.string());
  }

  void svd() {
    auto m = read_matrix();
    SvdOptions o;
    o.k = config_.svd_k;
    o.seed = config_.svd_seed;
    o.oversampling = config_.oversampling;
    o.power_iters = config_.power_iters;
    auto model = truncated_svd(m, o);
    emit(artifact::model, svd_to_text(model));
    log_ << "svd k=" << model.k << " sigma1=" << model.singular_values.front() << " iterations=" << model.iterations
         << '\n';
  }

  RankOptions rank_options() const { return {config_.rank_k, config_.min_score}; }

  std::vector<FoodKey> queries(const Vocabulary& rows) {
    if (!config_.queries_file.empty()) {
      auto path = need_input(config_.queries_file, "queries_file");
      std::vector<FoodKey> qs;
      for (const auto& line : io::split_lines(io::read_file(path)))
        if (!io::trim(line).empty()) qs.push_back(FoodKey::parse(io::trim(line)));
      return qs;
    }
    return sample_queries(rows, config_.query_filters, config_.n_queries, config_.query_seed);
  }

  std::vector<RankedList> rank(const Vocabulary& rows, const std::vector<FoodKey>& qs) {
    std::vector<RankedList> lists;
    if (config_.uses(Method::ppmi)) {
      auto m = read_matrix();
      auto r = rank_all(PpmiScorer{m}, rows, qs, rank_options());
      lists.insert(lists.end(), r.begin(), r.end());
    }
    if (config_.uses(Method::svd)) {
      auto model = read_model();
      auto r = rank_all(SvdScorer{model, config_.svd_cosine}, rows, qs, rank_options());
      lists.insert(lists.end(), r.begin(), r.end());
    }
    return lists;
  }

  void rank_all_stage() {
    auto rows = read_rows();
    auto qs = queries(rows);
    std::string qtext;
    for (const auto& q : qs) qtext += q.str() + '\n';
    emit(artifact::queries, qtext);
    emit(artifact::rankings, rankings_to_tsv(rank(rows, qs)));
  }

  void query() {
    if (config_.query.empty()) throw ValidationError("config field 'query' is required for this stage");
    auto rows = read_rows();
    out_ << rankings_to_tsv(rank(rows, {FoodKey::parse(config_.query)}));
  }

  fs::path rankings_path() {
    if (!config_.rankings.empty()) return need_input(config_.rankings, "rankings");
    return need(config_.out(artifact::rankings), Stage::rank_all);
  }

  void evaluate() {
    auto rp = rankings_path();
    auto lists = parse_rankings(io::read_file(rp), rp.string());
    auto judgements = load_judgements(need_input(config_.judgements, "judgements"));
    auto judged = judge_lists(lists, judgements);
    emit(artifact::metrics, metrics_to_tsv(evaluate_lists(judged, config_.taus, config_.gain()), config_.gain()));
  }

  void heatmap() {
    auto rp = rankings_path();
    auto lists = parse_rankings(io::read_file(rp), rp.string());
    std::vector<std::pair<FoodKey, FoodKey>> pairs;
    for (const auto& l : lists)
      for (const auto& c : l.items) pairs.emplace_back(l.query, c.key);
    if (pairs.empty()) throw ValidationError("heatmap needs at least one ranked pair");
    emit(artifact::heatmap, cooccurrence_to_csv(subcategory_cooccurrence(pairs)));
  }

  void stats() {
    std::vector<MealRecord> meals;
    auto pre = preprocess(meals);
    auto s = corpus_stats(meals, pre);
    std::string t = "users\tmeals\traw_entries\tunique_raw_entries\tentries_discarded\tunique_foods\tmeals_with_pairs\n";
    t += std::to_string(s.users) + '\t' + std::to_string(s.meals) + '\t' + std::to_string(s.raw_entries) + '\t' +
         std::to_string(s.unique_raw_entries) + '\t' + std::to_string(s.entries_discarded) + '\t' +
         std::to_string(s.unique_foods) + '\t' + std::to_string(s.meals_with_pairs) + '\n';
    emit(artifact::stats, t);
    out_ << t;
  }

  void synth() {
    auto corpus = generate_corpus(config_.synth);
    if (!corpus.recovery_defined) log_ << "warning: every cluster has one food; planted recovery is undefined\n";
    emit(artifact::synth_meals, meals_to_jsonl(corpus.meals));
    emit(artifact::synth_clusters, clusters_to_tsv(corpus.cluster_of));
    emit(artifact::synth_taxonomy, corpus.taxonomy_tsv);
  }

  void judge() {
    auto rp = rankings_path();
    auto lists = parse_rankings(io::read_file(rp), rp.string());
    auto js = simulate_judgements(lists, config_.judge_raters, config_.judge_seed, config_.judge_noise);
    emit(artifact::judgements, judgements_to_csv(js));
  }

  RunConfig config_;
  std::ostream& log_;
  std::ostream& out_;
  std::vector<fs::path> inputs_;
  std::vector<fs::path> outputs_;
};

inline nlohmann::json run_pipeline(const RunConfig& config, const std::vector<Stage>& stages,
                                   std::ostream& log = std::cerr, std::ostream& out = std::cout) {
  return Pipeline(config, log, out).run(stages);
}

}  // namespace foodsub

#endif
