// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "foodsub/pipeline.hpp"
#include <nlohmann/json.hpp>
#include "support/jacobi_svd_oracle.hpp"
#include "support/test_data.hpp"

using namespace foodsub;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// 1. PPMI cells of the toy corpus against brute-force values.
Outcome toy_cells() {
  Outcome o;
  auto cc = build_pair_counts(testdata::toy_meals(), 1, 1);
  auto m = build_ppmi_matrix(cc);
  const double ab = 0.99655993182639069, ac = 0.49827996591319523;
  const char* names[] = {"A", "B", "C"};
  const double expect[3][3] = {{0, ab, ac}, {ab, 0, ac}, {ac, ac, 0}};
  double worst = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      auto r = cc.rows.find(std::string("x:y:") + names[i]);
      auto c = cc.cols.find(std::string("x:y:") + names[j]);
      o.check(r && c, "toy key missing");
      if (r && c) worst = std::max(worst, std::abs(m.at(*r, *c) - expect[i][j]));
    }
  o.check(worst <= 1e-9, "cell error " + fmt(worst));
  o.check(cc.counts.total == 8, "|D| != 8");
  o.check(pmi_sig_cell(3, 6, 4, 8) == 0.0, "clamp case not zero");
  o.check(pmi_sig_cell(1, 4, 4, 8) == 0.0, "negative PMI not clamped");
  o.check(pmi_sig_cell(0, 4, 4, 8) == 0.0, "zero pair not zero");
  PairCounts indep;
  indep.f_count = {4, 4};
  indep.c_count = {4, 4};
  indep.total = 8;
  indep.pairs = {{0, 0, 2}, {0, 1, 2}, {1, 0, 2}, {1, 1, 2}};
  o.check(build_ppmi_matrix(indep, 2, 2).nnz() == 0, "independence case stores weights");
  if (o.pass) o.detail = "max cell error " + fmt(worst);
  return o;
}

// 2. Randomized SVD against an exact Jacobi SVD.
Outcome svd_correctness() {
  Outcome o;
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_sv = 0, worst_fro = 0;
  bool monotone = true;
  for (int t = 0; t < 25; ++t) {
    const std::size_t rows = 5 + gen() % 36, cols = 5 + gen() % 36;
    oracle::Dense a(rows, std::vector<double>(cols));
    for (auto& r : a)
      for (auto& x : r) x = u(gen);
    auto m = testdata::dense_to_csr(a);
    auto full = oracle::jacobi_svd(a);
    double prev = INFINITY;
    for (std::size_t k = 1; k <= std::min(rows, cols); ++k) {
      SvdOptions opt;
      opt.k = k;
      opt.seed = static_cast<std::uint64_t>(t);
      auto model = truncated_svd(m, opt);
      for (std::size_t i = 0; i < k; ++i)
        worst_sv = std::max(worst_sv, std::abs(model.singular_values[i] - full.sigma[i]) / full.sigma[i]);
      auto mk = model.reconstruct();
      double err = 0;
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
          double d = a[i][j] - mk(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          err += d * d;
        }
      err = std::sqrt(err);
      worst_fro = std::max(worst_fro, std::abs(err - oracle::optimal_truncation_error(full.sigma, k)));
      if (err > prev + 1e-12) monotone = false;
      prev = err;
    }
  }
  o.check(worst_sv <= 1e-6, "singular value rel error " + fmt(worst_sv));
  o.check(worst_fro <= 1e-6, "Frobenius gap " + fmt(worst_fro));
  o.check(monotone, "truncation error not monotone in k");
  if (o.pass) o.detail = "max sv rel error " + fmt(worst_sv) + ", max Frobenius gap " + fmt(worst_fro);
  return o;
}

// 3. Metrics against hand values and the independent fixture script.
Outcome metric_fixtures() {
  Outcome o;
  auto l = [](std::vector<double> r) { return JudgedList{"q", Method::ppmi, std::move(r)}; };
  auto near = [&](double got, double want, double tol, const std::string& what) {
    o.check(std::abs(got - want) <= tol, what + " = " + fmt(got));
  };
  near(average_precision(l({5, 1, 6}), 3), 5.0 / 6.0, 1e-9, "AP ranks {1,3}");
  near(average_precision(l({5, 6, 7}), 3), 1.0, 1e-9, "AP all relevant");
  near(average_precision(l({1, 2, 3}), 3), 0.0, 1e-9, "AP none relevant");
  near(mean_average_precision({l({5}), l({1, 5})}, 3), 0.75, 1e-9, "MAP");
  near(ndcg(l({3, 7})), 0.8339912323981488, 1e-9, "NDCG [3,7]");
  near(ndcg(l({7, 5, 3})), 1.0, 1e-9, "NDCG sorted");
  near(ndcg(l({4, 4, 4})), 1.0, 1e-9, "NDCG uniform");
  near(precision_at_k(l({5, 1, 1}), 1, 3), 1.0, 1e-9, "prec@1");
  near(precision_at_k(l({5, 5, 5, 5, 5, 5, 5, 1, 1, 1}), 10, 3), 0.7, 1e-9, "prec@10");
  near(precision_at_k(l({5, 5, 5, 5, 5, 5, 5, 5}), 10, 3), 0.8, 1e-9, "prec@10 short list");
  near(cohen_kappa({"y", "n", "y"}, {"y", "n", "y"}), 1.0, 1e-9, "kappa identical");
  near(cohen_kappa({"y", "y", "y", "y"}, {"y", "y", "n", "n"}), 0.0, 1e-9, "kappa chance");

  std::ifstream in(testdata::dir() / "metric_fixtures.json");
  if (!in) {
    o.check(false, "metric_fixtures.json missing");
    return o;
  }
  auto fx = nlohmann::json::parse(in);
  double worst = 0;
  std::vector<JudgedList> lists;
  for (const auto& e : fx["lists"]) {
    JudgedList jl{"q", Method::ppmi, {}};
    for (const auto& raters : e["ratings"]) {
      Judgement j{"q", "c", Method::ppmi, raters.get<std::vector<int>>()};
      jl.ratings.push_back(j.avg_rating());
    }
    worst = std::max(worst, std::abs(ndcg(jl) - e["ndcg"].get<double>()));
    for (auto [name, tau] : {std::pair{"tau3", 3.0}, std::pair{"tau4", 4.0}}) {
      worst = std::max(worst, std::abs(precision_at_k(jl, 1, tau) - e[name]["prec1"].get<double>()));
      worst = std::max(worst, std::abs(precision_at_k(jl, 10, tau) - e[name]["prec10"].get<double>()));
      worst = std::max(worst, std::abs(average_precision(jl, tau) - e[name]["ap"].get<double>()));
    }
    lists.push_back(std::move(jl));
  }
  worst = std::max(worst, std::abs(mean_average_precision(lists, 3) - fx["map_tau3"].get<double>()));
  worst = std::max(worst, std::abs(mean_average_precision(lists, 4) - fx["map_tau4"].get<double>()));
  o.check(lists.size() == 20, "expected 20 fixture lists");
  o.check(worst <= 1e-12, "fixture error " + fmt(worst));
  if (o.pass) o.detail = "hand values within 1e-9, 20 fixture lists max error " + fmt(worst);
  return o;
}

struct SynthRun {
  RecoveryScore ppmi, svd;
  std::string rankings, metrics, model;
  Eigen::MatrixXd embeddings;
};

/// Full pipeline on the planted-cluster corpus: synth, ingest, matrix, SVD,
/// ranking of every food, simulated judging, evaluation, heatmap.
SynthRun synth_pipeline(const std::string& name, std::uint64_t svd_seed) {
  auto dir = testdata::scratch("acceptance_" + name);
  RunConfig c;
  c.out_dir = dir.string();
  c.synth = SynthSpec{};  // 50 x 10 foods, 100k meals, sizes 2..5, seed 7
  c.taxonomy = c.out(artifact::synth_taxonomy).string();
  c.meals = c.out(artifact::synth_meals).string();
  c.svd_k = 50;
  c.svd_seed = svd_seed;
  c.query_filters = {"synthetic:"};
  c.n_queries = c.synth.n_clusters * c.synth.foods_per_cluster;
  c.judgements = c.out(artifact::judgements).string();
  std::ostringstream log, out;
  Pipeline p(c, log, out);
  p.run({Stage::synth, Stage::ingest, Stage::build_matrix, Stage::svd, Stage::rank_all, Stage::judge, Stage::evaluate,
         Stage::heatmap});

  SynthRun r;
  r.rankings = io::read_file(c.out(artifact::rankings));
  r.metrics = io::read_file(c.out(artifact::metrics));
  r.model = io::read_file(c.out(artifact::model));
  r.embeddings = parse_svd(r.model).row_embeddings;
  auto clusters = parse_clusters(io::read_file(c.out(artifact::synth_clusters)));
  std::vector<RankedList> ppmi, svd;
  for (auto& l : parse_rankings(r.rankings)) (l.method == Method::ppmi ? ppmi : svd).push_back(std::move(l));
  r.ppmi = planted_recovery_score(ppmi, clusters);
  r.svd = planted_recovery_score(svd, clusters);
  return r;
}

SynthRun& base_run() {
  static SynthRun run = synth_pipeline("seed0", 0);
  return run;
}

// 4. Planted-substitute recovery.
Outcome planted_recovery() {
  Outcome o;
  const auto& r = base_run();
  o.check(r.ppmi.top1_rate >= 0.90, "PPMI top1 " + fmt(r.ppmi.top1_rate));
  o.check(r.svd.top1_rate >= 0.90, "SVD top1 " + fmt(r.svd.top1_rate));
  o.check(r.ppmi.top10_hit_rate >= 0.99, "PPMI top10 " + fmt(r.ppmi.top10_hit_rate));
  o.check(r.svd.top10_hit_rate >= 0.99, "SVD top10 " + fmt(r.svd.top10_hit_rate));
  if (o.pass)
    o.detail = "PPMI top1 " + fmt(r.ppmi.top1_rate) + " top10 " + fmt(r.ppmi.top10_hit_rate) + ", SVD top1 " +
               fmt(r.svd.top1_rate) + " top10 " + fmt(r.svd.top10_hit_rate) + ", baseline " + fmt(9.0 / 499.0);
  return o;
}

// 5. Discard rate on the bundled mini corpus.
Outcome mini_corpus_discards() {
  Outcome o;
  auto tax = load_taxonomy(testdata::dir() / "mini_taxonomy.tsv");
  auto meals = load_meals(testdata::dir() / "mini_meals.jsonl");
  auto pre = preprocess_corpus(meals, tax);
  const double rate = pre.stats.discard_rate();
  o.check(tax.entries().size() == 40, "taxonomy has " + std::to_string(tax.entries().size()) + " entities");
  o.check(pre.stats.entries_total >= 500, "only " + std::to_string(pre.stats.entries_total) + " raw entries");
  o.check(rate >= 0.05 && rate <= 0.15, "discard rate " + fmt(rate));
  o.check(pre.stats.entries_discarded == 59, "discarded " + std::to_string(pre.stats.entries_discarded) + " != 59");
  if (o.pass)
    o.detail = std::to_string(pre.stats.entries_discarded) + "/" + std::to_string(pre.stats.entries_total) +
               " discarded (" + fmt(rate) + ")";
  return o;
}

// 6. Threshold behaviour of the metrics report.
Outcome threshold_behaviour() {
  Outcome o;
  auto lines = io::split_lines(base_run().metrics);
  std::map<std::string, std::map<std::string, std::vector<std::string>>> rows;  // method -> tau -> fields
  for (std::size_t i = 2; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = io::split(lines[i], '\t');
    rows[f[0]][f[1]] = f;
  }
  o.check(rows.size() == 2, "expected PPMI and SVD rows");
  for (auto& [method, by_tau] : rows) {
    if (!by_tau.count("3") || !by_tau.count("4")) {
      o.check(false, method + " lacks tau 3 or 4");
      continue;
    }
    const auto& t3 = by_tau["3"];
    const auto& t4 = by_tau["4"];
    o.check(std::stod(t4[2]) <= std::stod(t3[2]), method + " prec@1 rises with tau");
    o.check(std::stod(t4[3]) <= std::stod(t3[3]), method + " prec@10 rises with tau");
    o.check(t3[5] == t4[5], method + " NDCG differs across tau");
  }
  if (o.pass) o.detail = "prec@k(tau=4) <= prec@k(tau=3); NDCG identical";
  return o;
}

// 7. Determinism and seed stability.
Outcome determinism() {
  Outcome o;
  const auto& a = base_run();
  auto b = synth_pipeline("seed0_again", 0);
  o.check(a.rankings == b.rankings, "rankings differ between identical runs");
  o.check(a.metrics == b.metrics, "metrics differ between identical runs");
  o.check(a.model == b.model, "SVD model differs between identical runs");
  auto c = synth_pipeline("seed1", 1);
  o.check(c.embeddings.rows() == a.embeddings.rows() && !c.embeddings.isApprox(a.embeddings, 0.0),
          "SVD seed change left the embeddings unchanged");
  const double d = std::max({std::abs(c.ppmi.top1_rate - a.ppmi.top1_rate), std::abs(c.svd.top1_rate - a.svd.top1_rate),
                             std::abs(c.ppmi.top10_hit_rate - a.ppmi.top10_hit_rate),
                             std::abs(c.svd.top10_hit_rate - a.svd.top10_hit_rate)});
  o.check(d <= 0.02, "rates moved by " + fmt(d));
  if (o.pass) o.detail = "byte-identical reruns; seed 1 SVD top1 " + fmt(c.svd.top1_rate) + ", max rate shift " + fmt(d);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "PPMI cells match brute-force oracle (1e-9)", 1.0, toy_cells},
      {2, "SVD matches exact oracle (1e-6)", 30.0, svd_correctness},
      {3, "metrics match hand values and fixture script", 5.0, metric_fixtures},
      {4, "planted-substitute recovery (top1 >= 0.90, top10 >= 0.99)", 300.0, planted_recovery},
      {5, "mini corpus discards 5-15% and equals recount", 60.0, mini_corpus_discards},
      {6, "tau=4 <= tau=3 for prec@k, NDCG tau-independent", 60.0, threshold_behaviour},
      {7, "deterministic runs, SVD seed stability (+-0.02)", 600.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) o.check(false, "over time budget " + fmt(c.budget_s) + " s");
    if (!o.pass) ++failed;
    std::printf("%s [%d] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu acceptance criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
