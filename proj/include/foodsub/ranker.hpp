#ifndef FOODSUB_RANKER_HPP
#define FOODSUB_RANKER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "foodsub/corpus.hpp"
#include "foodsub/error.hpp"
#include "foodsub/ppmi.hpp"
#include "foodsub/random.hpp"
#include "foodsub/svd.hpp"

namespace foodsub {

enum class Method { ppmi, svd };

inline std::string to_string(Method m) { return m == Method::ppmi ? "PPMI" : "SVD"; }

inline Method parse_method(const std::string& s) {
  if (s == "PPMI" || s == "ppmi") return Method::ppmi;
  if (s == "SVD" || s == "svd") return Method::svd;
  throw ValidationError("unknown method '" + s + "' (expected PPMI or SVD)");
}

struct Candidate {
  FoodKey key;
  double score = 0.0;
  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct RankedList {
  FoodKey query;
  Method method = Method::ppmi;
  std::vector<Candidate> items;
  friend bool operator==(const RankedList&, const RankedList&) = default;
};

/// Cosine over PPMI rows.
struct PpmiScorer {
  const PpmiMatrix& matrix;
  static constexpr Method method = Method::ppmi;
  std::size_t rows() const { return matrix.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return cosine_similarity(matrix, i, j); }
};

/// Dot product over SVD embeddings; cosine when `cosine` is set.
struct SvdScorer {
  const SvdModel& model;
  bool cosine = false;
  static constexpr Method method = Method::svd;
  std::size_t rows() const { return model.rows(); }
  double operator()(std::size_t i, std::size_t j) const {
    double d = dot_similarity(model, i, j);
    if (!cosine) return d;
    double n = model.embedding_norm(i) * model.embedding_norm(j);
    return n > 0 ? d / n : 0.0;
  }
};

struct RankOptions {
  std::size_t k = 10;
  /// When set, candidates scoring at or below this value are dropped instead
  /// of padding the list.
  std::optional<double> min_score;
};

namespace detail {

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace detail

inline std::size_t require_query(const Vocabulary& vocab, const std::string& query) {
  if (auto id = vocab.find(query)) return *id;
  std::vector<std::pair<std::size_t, std::string>> near;
  for (const auto& k : vocab.keys()) near.emplace_back(detail::edit_distance(query, k.str()), k.str());
  std::sort(near.begin(), near.end());
  std::string msg = "unknown query key '" + query + "'";
  if (!near.empty()) {
    msg += "; nearest:";
    for (std::size_t i = 0; i < std::min<std::size_t>(3, near.size()); ++i) msg += " '" + near[i].second + "'";
  }
  throw ValidationError(msg);
}

/// Scores every other row of the vocabulary against the query and keeps the
/// best k, by descending score and then ascending key.
template <class Scorer>
RankedList top_k_substitutes(const Scorer& scorer, const Vocabulary& vocab, const std::string& query,
                             const RankOptions& opt = {}) {
  if (opt.k < 1) throw ValidationError("ranking k must be >= 1");
  if (scorer.rows() != vocab.size()) throw ValidationError("model rows do not match the row vocabulary");
  const std::size_t qi = require_query(vocab, query);

  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(vocab.size());
  for (std::size_t j = 0; j < vocab.size(); ++j) {
    if (j == qi) continue;
    double s = scorer(qi, j);
    if (opt.min_score && !(s > *opt.min_score)) continue;
    scored.emplace_back(s, j);
  }
  auto better = [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return vocab.key(a.second) < vocab.key(b.second);
  };
  const std::size_t take = std::min(opt.k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);

  RankedList out{vocab.key(qi), Scorer::method, {}};
  for (std::size_t t = 0; t < take; ++t) out.items.push_back({vocab.key(scored[t].second), scored[t].first});
  return out;
}

template <class Scorer>
std::vector<RankedList> rank_all(const Scorer& scorer, const Vocabulary& vocab, const std::vector<FoodKey>& queries,
                                 const RankOptions& opt = {}) {
  std::vector<RankedList> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(top_k_substitutes(scorer, vocab, q.str(), opt));
  return out;
}

/// Uniform seeded sample of n distinct vocabulary keys having at least one
/// feature that starts with one of the prefixes. An empty prefix list admits
/// every key.
inline std::vector<FoodKey> sample_queries(const Vocabulary& vocab, const std::vector<std::string>& prefixes,
                                           std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("query sample size must be >= 1");
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto& key = vocab.key(i);
    if (prefixes.empty() ||
        std::any_of(prefixes.begin(), prefixes.end(), [&](const std::string& p) { return key.has_feature_prefix(p); }))
      pool.push_back(i);
  }
  if (pool.size() < n)
    throw ValidationError("query pool has " + std::to_string(pool.size()) + " keys, fewer than the " +
                          std::to_string(n) + " requested");
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  std::vector<FoodKey> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(vocab.key(pool[i]));
  return out;
}

/// `query_key<TAB>method<TAB>rank<TAB>candidate_key<TAB>score`, rank from 1.
inline std::string rankings_to_tsv(const std::vector<RankedList>& lists) {
  std::string out;
  for (const auto& l : lists)
    for (std::size_t r = 0; r < l.items.size(); ++r)
      out += l.query.str() + '\t' + to_string(l.method) + '\t' + std::to_string(r + 1) + '\t' + l.items[r].key.str() +
             '\t' + io::format_exact(l.items[r].score) + '\n';
  return out;
}

/// Groups consecutive rows by (query, method). A list must list its ranks
/// 1, 2, ... in order.
inline std::vector<RankedList> parse_rankings(const std::string& text, const std::string& source = "rankings") {
  std::vector<RankedList> lists;
  auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = io::split(lines[i], '\t');
    std::size_t rank = 0;
    double score = 0;
    if (f.size() != 5 || !io::parse_int(f[2], rank) || !io::parse_double(f[4], score))
      throw ParseError(source, i + 1, "expected query<TAB>method<TAB>rank<TAB>candidate<TAB>score");
    Method method;
    try {
      method = parse_method(f[1]);
    } catch (const ValidationError& e) {
      throw ParseError(source, i + 1, e.what());
    }
    if (rank == 1) {
      lists.push_back({FoodKey::parse(f[0]), method, {}});
    } else if (lists.empty() || lists.back().query.str() != f[0] || lists.back().method != method ||
               lists.back().items.size() + 1 != rank) {
      throw ParseError(source, i + 1, "ranks must be contiguous from 1 within a list");
    }
    lists.back().items.push_back({FoodKey::parse(f[3]), score});
  }
  return lists;
}

}  // namespace foodsub

#endif
