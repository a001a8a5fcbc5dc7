#ifndef FOODSUB_SYNTH_HPP
#define FOODSUB_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "foodsub/corpus.hpp"
#include "foodsub/error.hpp"
#include "foodsub/eval.hpp"
#include "foodsub/random.hpp"
#include "foodsub/ranker.hpp"

namespace foodsub {

/// Parameters of a planted-cluster meal corpus.
///
/// Every food belongs to one cluster. A meal picks an anchor cluster from a
/// Zipf distribution, fills the remaining slots with distinct clusters (drawn
/// from the anchor's partner clusters with probability
/// `within_cluster_context_affinity`, otherwise from the global Zipf
/// distribution) and then takes one uniformly chosen food per cluster. Foods
/// of one cluster therefore share contexts but never share a meal.
struct SynthSpec {
  std::size_t n_clusters = 50;
  std::size_t foods_per_cluster = 10;
  std::size_t n_meals = 100000;
  std::size_t meal_size_min = 2;
  std::size_t meal_size_max = 5;
  double within_cluster_context_affinity = 0.8;
  double zipf_exponent = 1.0;
  std::size_t partners_per_cluster = 6;
  std::size_t n_users = 200;
  std::uint64_t seed = 7;

  void validate() const {
    std::vector<std::string> errs;
    if (n_clusters < 1) errs.push_back("n_clusters must be >= 1");
    if (foods_per_cluster < 1) errs.push_back("foods_per_cluster must be >= 1");
    if (n_meals < 1) errs.push_back("n_meals must be >= 1");
    if (meal_size_min < 1 || meal_size_min > meal_size_max) errs.push_back("meal size range must satisfy 1 <= min <= max");
    if (meal_size_max > n_clusters)
      errs.push_back("meal size " + std::to_string(meal_size_max) + " exceeds n_clusters " + std::to_string(n_clusters));
    if (!(within_cluster_context_affinity >= 0.0 && within_cluster_context_affinity <= 1.0))
      errs.push_back("within_cluster_context_affinity must be in [0, 1]");
    if (!(zipf_exponent >= 0.0)) errs.push_back("zipf_exponent must be >= 0");
    if (n_users < 1) errs.push_back("n_users must be >= 1");
    if (!errs.empty()) throw ValidationError("infeasible synth spec: " + join(errs, "; "));
  }
};

struct SynthCorpus {
  std::vector<MealRecord> meals;
  std::map<std::string, std::size_t> cluster_of;  // food key -> cluster id
  std::string taxonomy_tsv;
  /// False when no cluster holds two foods, so planted recovery is undefined.
  bool recovery_defined = true;
};

namespace detail {

inline std::string padded(std::size_t v, std::size_t width) {
  std::string s = std::to_string(v);
  return std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

// Proleptic Gregorian date for days since 1970-01-01.
inline std::string civil_date(std::int64_t days) {
  days += 719468;
  const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
  const std::int64_t doe = days - era * 146097;
  const std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const std::int64_t mp = (5 * doy + 2) / 153;
  const std::int64_t d = doy - (153 * mp + 2) / 5 + 1;
  const std::int64_t m = mp < 10 ? mp + 3 : mp - 9;
  const std::int64_t y = yoe + era * 400 + (m <= 2);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04lld-%02lld-%02lld", static_cast<long long>(y), static_cast<long long>(m),
                static_cast<long long>(d));
  return buf;
}

}  // namespace detail

inline std::string synth_food_name(const SynthSpec& spec, std::size_t cluster, std::size_t member) {
  const std::size_t width = std::to_string(spec.n_clusters * spec.foods_per_cluster).size();
  return "food" + detail::padded(cluster * spec.foods_per_cluster + member, width);
}

inline std::string synth_cluster_name(const SynthSpec& spec, std::size_t cluster) {
  return "cluster" + detail::padded(cluster, std::to_string(spec.n_clusters).size());
}

/// The single-feature key of a synthetic food.
inline std::string synth_food_key(const SynthSpec& spec, std::size_t cluster, std::size_t member) {
  return "synthetic:" + synth_cluster_name(spec, cluster) + ":" + synth_food_name(spec, cluster, member);
}

inline SynthCorpus generate_corpus(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SynthCorpus out;
  out.recovery_defined = spec.foods_per_cluster > 1;

  for (std::size_t c = 0; c < spec.n_clusters; ++c)
    for (std::size_t f = 0; f < spec.foods_per_cluster; ++f) {
      out.cluster_of[synth_food_key(spec, c, f)] = c;
      out.taxonomy_tsv += "synthetic\t" + synth_cluster_name(spec, c) + '\t' + synth_food_name(spec, c, f) + "\t\n";
    }

  std::vector<double> zipf(spec.n_clusters);
  for (std::size_t c = 0; c < spec.n_clusters; ++c)
    zipf[c] = 1.0 / std::pow(static_cast<double>(c + 1), spec.zipf_exponent);

  std::vector<std::vector<std::size_t>> partners(spec.n_clusters);
  for (std::size_t c = 0; c < spec.n_clusters; ++c) {
    std::vector<std::size_t> others;
    for (std::size_t o = 0; o < spec.n_clusters; ++o)
      if (o != c) others.push_back(o);
    rng.shuffle(others);
    others.resize(std::min(spec.partners_per_cluster, others.size()));
    partners[c] = std::move(others);
  }

  static const char* const kMealNames[] = {"Breakfast", "Lunch", "Dinner", "Snacks"};
  const std::int64_t base_day = 16436;  // 2015-01-01
  out.meals.reserve(spec.n_meals);
  std::vector<std::size_t> chosen;
  std::vector<char> used(spec.n_clusters);
  for (std::size_t i = 0; i < spec.n_meals; ++i) {
    const auto size = static_cast<std::size_t>(
        rng.between(static_cast<std::int64_t>(spec.meal_size_min), static_cast<std::int64_t>(spec.meal_size_max)));
    chosen.clear();
    std::fill(used.begin(), used.end(), 0);
    const std::size_t anchor = rng.weighted(zipf);
    chosen.push_back(anchor);
    used[anchor] = 1;
    while (chosen.size() < size) {
      std::size_t next = spec.n_clusters;
      if (rng.uniform() < spec.within_cluster_context_affinity) {
        std::vector<std::size_t> open;
        for (auto p : partners[anchor])
          if (!used[p]) open.push_back(p);
        if (!open.empty()) next = open[rng.below(open.size())];
      }
      if (next == spec.n_clusters) {
        std::vector<double> w = zipf;
        for (std::size_t c = 0; c < spec.n_clusters; ++c)
          if (used[c]) w[c] = 0.0;
        next = rng.weighted(w);
      }
      chosen.push_back(next);
      used[next] = 1;
    }

    MealRecord m;
    const std::size_t user = i % spec.n_users;
    const std::size_t per_user = i / spec.n_users;
    m.user_id = "user" + detail::padded(user, std::to_string(spec.n_users).size());
    m.date = detail::civil_date(base_day + static_cast<std::int64_t>(per_user / 4));
    m.meal_name = kMealNames[per_user % 4];
    for (auto c : chosen) m.raw_entries.push_back(synth_food_name(spec, c, rng.below(spec.foods_per_cluster)));
    out.meals.push_back(std::move(m));
  }
  return out;
}

inline std::string meals_to_jsonl(const std::vector<MealRecord>& meals) {
  std::string out;
  for (const auto& m : meals) {
    out += meal_to_json(m);
    out += '\n';
  }
  return out;
}

/// `key<TAB>cluster_id` per line.
inline std::string clusters_to_tsv(const std::map<std::string, std::size_t>& cluster_of) {
  std::string out;
  for (const auto& [k, c] : cluster_of) out += k + '\t' + std::to_string(c) + '\n';
  return out;
}

inline std::map<std::string, std::size_t> parse_clusters(const std::string& text, const std::string& source = "clusters") {
  std::map<std::string, std::size_t> out;
  auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = io::split(lines[i], '\t');
    std::size_t c = 0;
    if (f.size() != 2 || !io::parse_int(f[1], c)) throw ParseError(source, i + 1, "expected key<TAB>cluster_id");
    out[f[0]] = c;
  }
  return out;
}

struct RecoveryScore {
  double top1_rate = 0.0;
  double top10_hit_rate = 0.0;
};

/// Fraction of queries whose rank-1 candidate shares the query's cluster, and
/// fraction with a same-cluster candidate anywhere in the top 10.
inline RecoveryScore planted_recovery_score(const std::vector<RankedList>& rankings,
                                            const std::map<std::string, std::size_t>& cluster_of) {
  if (rankings.empty()) throw ValidationError("planted_recovery_score: no rankings");
  auto cluster = [&](const FoodKey& k) {
    auto it = cluster_of.find(k.str());
    if (it == cluster_of.end()) throw ValidationError("key not in cluster map: " + k.str());
    return it->second;
  };
  std::size_t top1 = 0, hit10 = 0;
  for (const auto& l : rankings) {
    const auto qc = cluster(l.query);
    bool hit = false;
    for (std::size_t r = 0; r < l.items.size(); ++r) {
      const bool same = cluster(l.items[r].key) == qc;
      if (r == 0 && same) ++top1;
      if (r < 10 && same) hit = true;
    }
    if (hit) ++hit10;
  }
  const double n = static_cast<double>(rankings.size());
  return {static_cast<double>(top1) / n, static_cast<double>(hit10) / n};
}

/// Simulated rater panel for ranked lists: the expected rating grows with the
/// Jaccard overlap of the two foods' subcategory labels (1 for none, 7 for
/// identical), and each rater adds uniform noise in [-noise, noise] before
/// rounding and clamping to 1..7.
inline std::vector<Judgement> simulate_judgements(const std::vector<RankedList>& rankings, std::size_t raters,
                                                  std::uint64_t seed, double noise = 1.5) {
  if (raters < 1) throw ValidationError("simulate_judgements: raters must be >= 1");
  Rng rng(seed);
  std::vector<Judgement> out;
  std::set<std::tuple<std::string, std::string, Method>> seen;
  for (const auto& l : rankings) {
    const auto ql = l.query.subcategory_labels();
    for (const auto& c : l.items) {
      if (!seen.emplace(l.query.str(), c.key.str(), l.method).second) continue;
      const auto cl = c.key.subcategory_labels();
      std::vector<std::string> inter;
      std::set_intersection(ql.begin(), ql.end(), cl.begin(), cl.end(), std::back_inserter(inter));
      const double uni = static_cast<double>(ql.size() + cl.size() - inter.size());
      const double base = 1.0 + 6.0 * (uni > 0 ? static_cast<double>(inter.size()) / uni : 0.0);
      Judgement j{l.query.str(), c.key.str(), l.method, {}};
      for (std::size_t r = 0; r < raters; ++r) {
        double v = std::round(base + rng.uniform(-noise, noise));
        j.ratings.push_back(static_cast<int>(std::clamp(v, 1.0, 7.0)));
      }
      out.push_back(std::move(j));
    }
  }
  return out;
}

}  // namespace foodsub

#endif
