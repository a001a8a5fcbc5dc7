#ifndef FOODSUB_EVAL_HPP
#define FOODSUB_EVAL_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "foodsub/error.hpp"
#include "foodsub/io.hpp"
#include "foodsub/ranker.hpp"
#include "foodsub/taxonomy.hpp"

namespace foodsub {

/// Likert ratings (1..7) of one query/candidate pair from several raters.
struct Judgement {
  std::string query;
  std::string candidate;
  Method method = Method::ppmi;
  std::vector<int> ratings;

  double avg_rating() const {
    double s = 0;
    for (int r : ratings) s += r;
    return s / static_cast<double>(ratings.size());
  }
};

/// Parses judgements CSV with header `query_key,candidate_key,method,r1,r2,...`.
/// Rows may carry any positive number of rating columns.
inline std::vector<Judgement> parse_judgements(const std::string& text, const std::string& source = "judgements") {
  auto lines = io::split_lines(text);
  std::size_t first = 0;
  while (first < lines.size() && io::trim(lines[first]).empty()) ++first;
  if (first == lines.size()) return {};
  auto header = io::parse_csv_record(lines[first]);
  if (header.size() < 4 || io::trim(header[0]) != "query_key" || io::trim(header[1]) != "candidate_key" ||
      io::trim(header[2]) != "method")
    throw ParseError(source, first + 1, "expected header query_key,candidate_key,method,r1,...");

  std::vector<Judgement> out;
  std::set<std::tuple<std::string, std::string, Method>> seen;
  for (std::size_t i = first + 1; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    auto f = io::parse_csv_record(lines[i]);
    if (f.size() < 4) throw ParseError(source, i + 1, "expected at least one rating column");
    Judgement j;
    j.query = io::trim(f[0]);
    j.candidate = io::trim(f[1]);
    try {
      j.method = parse_method(io::trim(f[2]));
    } catch (const ValidationError& e) {
      throw ParseError(source, i + 1, e.what());
    }
    for (std::size_t c = 3; c < f.size(); ++c) {
      int r = 0;
      if (io::trim(f[c]).empty()) throw ParseError(source, i + 1, "empty rating cell");
      if (!io::parse_int(f[c], r)) throw ParseError(source, i + 1, "rating '" + f[c] + "' is not an integer");
      if (r < 1 || r > 7) throw ParseError(source, i + 1, "rating " + std::to_string(r) + " outside 1..7");
      j.ratings.push_back(r);
    }
    if (!seen.emplace(j.query, j.candidate, j.method).second)
      throw ParseError(source, i + 1, "duplicate judgement for (" + j.query + ", " + j.candidate + ", " + to_string(j.method) + ")");
    out.push_back(std::move(j));
  }
  return out;
}

inline std::vector<Judgement> load_judgements(const std::filesystem::path& path) {
  return parse_judgements(io::read_file(path), path.string());
}

inline std::string judgements_to_csv(const std::vector<Judgement>& js) {
  std::size_t width = 0;
  for (const auto& j : js) width = std::max(width, j.ratings.size());
  std::string out = "query_key,candidate_key,method";
  for (std::size_t r = 1; r <= std::max<std::size_t>(width, 1); ++r) out += ",r" + std::to_string(r);
  out += '\n';
  for (const auto& j : js) {
    out += io::csv_escape(j.query) + ',' + io::csv_escape(j.candidate) + ',' + to_string(j.method);
    for (int r : j.ratings) out += ',' + std::to_string(r);
    out += '\n';
  }
  return out;
}

/// Relevant iff the average rating is strictly greater than tau.
inline bool binarize(double avg_rating, double tau) { return avg_rating > tau; }

/// A system-ordered candidate list with the average rating of each candidate.
struct JudgedList {
  std::string query;
  Method method = Method::ppmi;
  std::vector<double> ratings;  // rank 1 first
};

/// Attaches judgements to ranked lists. Every candidate must be judged.
inline std::vector<JudgedList> judge_lists(const std::vector<RankedList>& lists, const std::vector<Judgement>& judgements) {
  std::map<std::tuple<std::string, std::string, Method>, double> avg;
  for (const auto& j : judgements) avg[{j.query, j.candidate, j.method}] = j.avg_rating();
  std::vector<JudgedList> out;
  for (const auto& l : lists) {
    JudgedList jl{l.query.str(), l.method, {}};
    for (const auto& c : l.items) {
      auto it = avg.find({l.query.str(), c.key.str(), l.method});
      if (it == avg.end())
        throw ValidationError("no judgement for (" + l.query.str() + ", " + c.key.str() + ", " + to_string(l.method) + ")");
      jl.ratings.push_back(it->second);
    }
    out.push_back(std::move(jl));
  }
  return out;
}

/// Relevant items among the top min(k, len), divided by k.
inline double precision_at_k(const JudgedList& list, std::size_t k, double tau) {
  if (k < 1) throw ValidationError("precision_at_k requires k >= 1");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, list.ratings.size()); ++i)
    if (binarize(list.ratings[i], tau)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(k);
}

/// Mean of precision@r over the ranks r holding relevant items, normalized by
/// the number of relevant items in the list. Zero when nothing is relevant.
inline double average_precision(const JudgedList& list, double tau) {
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < list.ratings.size(); ++i) {
    if (binarize(list.ratings[i], tau)) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return hits ? sum / static_cast<double>(hits) : 0.0;
}

inline double mean_average_precision(const std::vector<JudgedList>& lists, double tau) {
  if (lists.empty()) return 0.0;
  double s = 0.0;
  for (const auto& l : lists) s += average_precision(l, tau);
  return s / static_cast<double>(lists.size());
}

enum class Gain { linear, exponential };

inline double gain_of(double rating, Gain g) { return g == Gain::linear ? rating : std::exp2(rating) - 1.0; }

/// Graded NDCG over the judged list. The ideal ordering is the same
/// candidates sorted by rating; the relevance threshold plays no part.
inline double ndcg(const JudgedList& list, Gain gain = Gain::linear) {
  if (list.ratings.empty()) throw ValidationError("ndcg of an empty list");
  auto dcg = [&](const std::vector<double>& r) {
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) s += gain_of(r[i], gain) / std::log2(static_cast<double>(i) + 2.0);
    return s;
  };
  std::vector<double> ideal = list.ratings;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg(ideal);
  return idcg > 0 ? dcg(list.ratings) / idcg : 0.0;
}

/// Unweighted Cohen's kappa. Two constant, identical raters give 1.
inline double cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.size() != b.size()) throw ValidationError("cohen_kappa: label sequences differ in length");
  if (a.empty()) throw ValidationError("cohen_kappa: empty label sequences");
  const double n = static_cast<double>(a.size());
  std::map<std::string, double> ma, mb;
  double agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma[a[i]] += 1;
    mb[b[i]] += 1;
    if (a[i] == b[i]) agree += 1;
  }
  const double po = agree / n;
  double pe = 0.0;
  for (const auto& [label, ca] : ma) {
    auto it = mb.find(label);
    if (it != mb.end()) pe += (ca / n) * (it->second / n);
  }
  if (pe >= 1.0) return 1.0;
  return (po - pe) / (1.0 - pe);
}

/// Symmetric Jaccard-normalized co-occurrence of "category:subcategory" labels.
struct CooccurrenceMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> jaccard;  // labels x labels

  double at(const std::string& a, const std::string& b) const {
    auto ia = std::lower_bound(labels.begin(), labels.end(), a);
    auto ib = std::lower_bound(labels.begin(), labels.end(), b);
    if (ia == labels.end() || *ia != a || ib == labels.end() || *ib != b) return 0.0;
    return jaccard[static_cast<std::size_t>(ia - labels.begin())][static_cast<std::size_t>(ib - labels.begin())];
  }
};

/// For each pair, every label a of one food and b of the other co-occur once
/// (both orders). occ(x) counts the pairs mentioning x on either side and
/// J(a, b) = co(a, b) / (occ(a) + occ(b) - co(a, b)).
inline CooccurrenceMatrix subcategory_cooccurrence(const std::vector<std::pair<FoodKey, FoodKey>>& pairs) {
  std::map<std::pair<std::string, std::string>, double> co;
  std::map<std::string, double> occ;
  for (const auto& [x, y] : pairs) {
    auto lx = x.subcategory_labels(), ly = y.subcategory_labels();
    std::set<std::string> either(lx.begin(), lx.end());
    either.insert(ly.begin(), ly.end());
    for (const auto& l : either) occ[l] += 1;
    std::set<std::pair<std::string, std::string>> combos;
    for (const auto& a : lx)
      for (const auto& b : ly) combos.insert(std::minmax(a, b));
    for (const auto& [a, b] : combos) {
      co[{a, b}] += 1;
      if (a != b) co[{b, a}] += 1;
    }
  }
  CooccurrenceMatrix m;
  for (const auto& [l, _] : occ) m.labels.push_back(l);
  const std::size_t n = m.labels.size();
  m.jaccard.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      auto it = co.find({m.labels[i], m.labels[j]});
      if (it == co.end()) continue;
      double c = it->second;
      m.jaccard[i][j] = c / (occ[m.labels[i]] + occ[m.labels[j]] - c);
    }
  return m;
}

/// Square CSV with a label header row and a label first column.
inline std::string cooccurrence_to_csv(const CooccurrenceMatrix& m) {
  std::string out = "label";
  for (const auto& l : m.labels) out += ',' + io::csv_escape(l);
  out += '\n';
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    out += io::csv_escape(m.labels[i]);
    for (double v : m.jaccard[i]) out += ',' + io::format_double(v);
    out += '\n';
  }
  return out;
}

struct MetricRow {
  Method method;
  double tau;
  double prec1;
  double prec10;
  double map;
  double ndcg;
};

/// Per method and tau: mean prec@1, mean prec@10, MAP and mean NDCG.
inline std::vector<MetricRow> evaluate_lists(const std::vector<JudgedList>& lists, const std::vector<double>& taus,
                                             Gain gain = Gain::linear) {
  std::vector<MetricRow> rows;
  for (Method method : {Method::ppmi, Method::svd}) {
    std::vector<JudgedList> sel;
    for (const auto& l : lists)
      if (l.method == method) sel.push_back(l);
    if (sel.empty()) continue;
    double nd = 0;
    for (const auto& l : sel) nd += ndcg(l, gain);
    nd /= static_cast<double>(sel.size());
    for (double tau : taus) {
      double p1 = 0, p10 = 0;
      for (const auto& l : sel) {
        p1 += precision_at_k(l, 1, tau);
        p10 += precision_at_k(l, 10, tau);
      }
      rows.push_back({method, tau, p1 / static_cast<double>(sel.size()), p10 / static_cast<double>(sel.size()),
                      mean_average_precision(sel, tau), nd});
    }
  }
  return rows;
}

inline std::string metrics_to_tsv(const std::vector<MetricRow>& rows, Gain gain = Gain::linear) {
  std::string out = std::string("# ndcg_gain=") + (gain == Gain::linear ? "linear" : "exponential") + '\n';
  out += "method\ttau\tprec@1\tprec@10\tMAP\tNDCG\n";
  for (const auto& r : rows)
    out += to_string(r.method) + '\t' + io::format_double(r.tau) + '\t' + io::format_double(r.prec1) + '\t' +
           io::format_double(r.prec10) + '\t' + io::format_double(r.map) + '\t' + io::format_double(r.ndcg) + '\n';
  return out;
}

}  // namespace foodsub

#endif
