#ifndef FOODSUB_CORPUS_HPP
#define FOODSUB_CORPUS_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "foodsub/error.hpp"
#include "foodsub/io.hpp"
#include "foodsub/taxonomy.hpp"

namespace foodsub {

struct MealRecord {
  std::string user_id;
  std::string date;  // YYYY-MM-DD
  std::string meal_name;
  std::vector<std::string> raw_entries;
};

/// Foods of one meal after normalization: unique keys in ascending order,
/// unless duplicates were explicitly kept.
struct ProcessedMeal {
  std::vector<FoodKey> foods;
};

struct DiscardStats {
  std::size_t meals = 0;
  std::size_t entries_total = 0;
  std::size_t entries_discarded = 0;

  double discard_rate() const {
    return entries_total ? static_cast<double>(entries_discarded) / static_cast<double>(entries_total) : 0.0;
  }
};

namespace detail {

inline bool valid_iso_day(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (s[i] < '0' || s[i] > '9') return false;
  int month = (s[5] - '0') * 10 + (s[6] - '0');
  int day = (s[8] - '0') * 10 + (s[9] - '0');
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

inline MealRecord meal_from_json(const std::string& line, const std::string& source, std::size_t lineno) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source, lineno, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(source, lineno, "expected a JSON object");
  auto str_field = [&](const char* name) {
    auto it = j.find(name);
    if (it == j.end()) throw ParseError(source, lineno, std::string("missing \"") + name + "\"");
    if (!it->is_string()) throw ParseError(source, lineno, std::string("\"") + name + "\" must be a string");
    return it->get<std::string>();
  };
  MealRecord m;
  m.user_id = str_field("user_id");
  m.date = str_field("date");
  if (!valid_iso_day(m.date)) throw ParseError(source, lineno, "\"date\" must be YYYY-MM-DD");
  m.meal_name = str_field("meal_name");
  auto it = j.find("entries");
  if (it == j.end()) throw ParseError(source, lineno, "missing \"entries\"");
  if (!it->is_array()) throw ParseError(source, lineno, "\"entries\" must be an array");
  for (const auto& e : *it) {
    if (!e.is_string()) throw ParseError(source, lineno, "\"entries\" must contain strings");
    m.raw_entries.push_back(e.get<std::string>());
  }
  if (m.raw_entries.empty()) throw ParseError(source, lineno, "\"entries\" must be non-empty");
  return m;
}

}  // namespace detail

struct LoadOptions {
  bool skip_malformed = false;
  /// Receives one message per skipped line when skip_malformed is set.
  std::function<void(const ParseError&)> on_skip;
};

/// Parses meals.jsonl text. Blank lines are ignored. A malformed line aborts
/// with a ParseError unless options.skip_malformed is set.
inline std::vector<MealRecord> parse_meals(const std::string& text, const std::string& source = "meals",
                                           const LoadOptions& options = {}) {
  std::vector<MealRecord> meals;
  auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    try {
      meals.push_back(detail::meal_from_json(lines[i], source, i + 1));
    } catch (const ParseError& e) {
      if (!options.skip_malformed) throw;
      if (options.on_skip) options.on_skip(e);
    }
  }
  return meals;
}

inline std::vector<MealRecord> load_meals(const std::filesystem::path& path, const LoadOptions& options = {}) {
  return parse_meals(io::read_file(path), path.string(), options);
}

inline std::string meal_to_json(const MealRecord& m) {
  nlohmann::json j = {{"user_id", m.user_id}, {"date", m.date}, {"meal_name", m.meal_name}, {"entries", m.raw_entries}};
  return j.dump();
}

struct PreprocessResult {
  std::vector<ProcessedMeal> meals;
  DiscardStats stats;
};

/// Normalizes every raw entry to a FoodKey. Entries without salient features
/// are dropped and counted; within a meal duplicate keys collapse to one
/// unless keep_duplicates is set.
inline PreprocessResult preprocess_corpus(const std::vector<MealRecord>& meals, const Taxonomy& taxonomy,
                                          bool keep_duplicates = false) {
  PreprocessResult out;
  out.meals.reserve(meals.size());
  for (const auto& m : meals) {
    ProcessedMeal pm;
    for (const auto& entry : m.raw_entries) {
      ++out.stats.entries_total;
      auto features = taxonomy.extract(entry);
      if (features.empty()) {
        ++out.stats.entries_discarded;
        continue;
      }
      pm.foods.push_back(canonical_food_key(features));
    }
    std::sort(pm.foods.begin(), pm.foods.end());
    if (!keep_duplicates) pm.foods.erase(std::unique(pm.foods.begin(), pm.foods.end()), pm.foods.end());
    out.meals.push_back(std::move(pm));
    ++out.stats.meals;
  }
  return out;
}

/// Processed meals are stored one JSON array of keys per line.
inline std::string processed_meals_to_jsonl(const std::vector<ProcessedMeal>& meals) {
  std::string out;
  for (const auto& m : meals) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : m.foods) arr.push_back(f.str());
    out += arr.dump();
    out += '\n';
  }
  return out;
}

inline std::vector<ProcessedMeal> parse_processed_meals(const std::string& text, const std::string& source = "processed") {
  std::vector<ProcessedMeal> meals;
  auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source, i + 1, e.what());
    }
    if (!j.is_array()) throw ParseError(source, i + 1, "expected a JSON array of food keys");
    ProcessedMeal m;
    for (const auto& k : j) {
      if (!k.is_string()) throw ParseError(source, i + 1, "food keys must be strings");
      m.foods.push_back(FoodKey::parse(k.get<std::string>()));
    }
    meals.push_back(std::move(m));
  }
  return meals;
}

/// Keys with contiguous ids 0..size-1, ordered by descending count and then
/// ascending key.
class Vocabulary {
public:
  Vocabulary() = default;

  /// Builds from (key, count) pairs; the order of `items` is irrelevant.
  static Vocabulary from_counts(std::vector<std::pair<FoodKey, std::uint64_t>> items) {
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    Vocabulary v;
    for (auto& [k, c] : items) v.push_back(std::move(k), c);
    return v;
  }

  /// Builds preserving the given id order (used when reading vocab files).
  static Vocabulary from_ordered(std::vector<std::pair<FoodKey, std::uint64_t>> items) {
    Vocabulary v;
    for (auto& [k, c] : items) v.push_back(std::move(k), c);
    return v;
  }

  std::size_t size() const noexcept { return keys_.size(); }
  bool empty() const noexcept { return keys_.empty(); }
  const FoodKey& key(std::size_t id) const { return keys_.at(id); }
  std::uint64_t count(std::size_t id) const { return counts_.at(id); }
  const std::vector<FoodKey>& keys() const noexcept { return keys_; }

  std::optional<std::size_t> find(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.keys_ == b.keys_ && a.counts_ == b.counts_;
  }

private:
  void push_back(FoodKey k, std::uint64_t c) {
    if (!index_.emplace(k.str(), keys_.size()).second)
      throw ValidationError("duplicate vocabulary key " + k.str());
    keys_.push_back(std::move(k));
    counts_.push_back(c);
  }

  std::vector<FoodKey> keys_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// `id<TAB>key<TAB>count` per line.
inline std::string vocabulary_to_tsv(const Vocabulary& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out += std::to_string(i) + '\t' + v.key(i).str() + '\t' + std::to_string(v.count(i)) + '\n';
  return out;
}

inline Vocabulary parse_vocabulary(const std::string& text, const std::string& source = "vocab") {
  std::vector<std::pair<FoodKey, std::uint64_t>> items;
  auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto cols = io::split(lines[i], '\t');
    std::size_t id = 0;
    std::uint64_t count = 0;
    if (cols.size() != 3 || !io::parse_int(cols[0], id) || !io::parse_int(cols[2], count))
      throw ParseError(source, i + 1, "expected id<TAB>key<TAB>count");
    if (id != items.size()) throw ParseError(source, i + 1, "ids must be contiguous from 0");
    items.emplace_back(FoodKey::parse(cols[1]), count);
  }
  return Vocabulary::from_ordered(std::move(items));
}

/// Food-context pair counts over the multiset D. Entries are sorted by
/// (row, col) and every stored count is positive.
struct PairCounts {
  struct Entry {
    std::uint32_t row;
    std::uint32_t col;
    std::uint64_t count;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  std::vector<Entry> pairs;
  std::vector<std::uint64_t> f_count;
  std::vector<std::uint64_t> c_count;
  std::uint64_t total = 0;

  std::uint64_t count(std::size_t row, std::size_t col) const {
    auto it = std::lower_bound(pairs.begin(), pairs.end(), std::pair{row, col}, [](const Entry& e, const auto& rc) {
      return e.row != rc.first ? e.row < rc.first : e.col < rc.second;
    });
    return it != pairs.end() && it->row == row && it->col == col ? it->count : 0;
  }

  friend bool operator==(const PairCounts&, const PairCounts&) = default;
};

struct CountedCorpus {
  PairCounts counts;
  Vocabulary rows;
  Vocabulary cols;
};

/// Emits every ordered pair (x_i, x_j), i != j, of each meal into D, then
/// drops rows with #(f) < min_row_count and columns with #(c) < min_col_count
/// in a single pass and recounts the marginals on what is left. Keys left
/// with a zero count after the recount are not part of the vocabulary.
inline CountedCorpus build_pair_counts(const std::vector<ProcessedMeal>& meals, std::uint64_t min_row_count = 5,
                                       std::uint64_t min_col_count = 1) {
  if (min_row_count < 1 || min_col_count < 1) throw ValidationError("min counts must be >= 1");

  std::unordered_map<std::string, std::uint32_t> temp_id;
  std::vector<const FoodKey*> temp_key;
  std::unordered_map<std::uint64_t, std::uint64_t> raw;
  std::vector<std::uint32_t> ids;
  for (const auto& m : meals) {
    ids.clear();
    for (const auto& f : m.foods) {
      auto [it, inserted] = temp_id.emplace(f.str(), static_cast<std::uint32_t>(temp_key.size()));
      if (inserted) temp_key.push_back(&f);
      ids.push_back(it->second);
    }
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < ids.size(); ++j)
        if (i != j) ++raw[(std::uint64_t{ids[i]} << 32) | ids[j]];
  }

  const std::size_t n = temp_key.size();
  std::vector<std::uint64_t> f_raw(n, 0), c_raw(n, 0);
  for (const auto& [rc, c] : raw) {
    f_raw[rc >> 32] += c;
    c_raw[rc & 0xffffffffu] += c;
  }

  std::vector<std::uint64_t> f_kept(n, 0), c_kept(n, 0);
  for (const auto& [rc, c] : raw) {
    std::size_t r = rc >> 32, col = rc & 0xffffffffu;
    if (f_raw[r] >= min_row_count && c_raw[col] >= min_col_count) {
      f_kept[r] += c;
      c_kept[col] += c;
    }
  }

  std::vector<std::pair<FoodKey, std::uint64_t>> row_items, col_items;
  for (std::size_t t = 0; t < n; ++t) {
    if (f_kept[t] > 0) row_items.emplace_back(*temp_key[t], f_kept[t]);
    if (c_kept[t] > 0) col_items.emplace_back(*temp_key[t], c_kept[t]);
  }
  if (row_items.empty() || col_items.empty()) throw ValidationError("corpus too small for thresholds");

  CountedCorpus out;
  out.rows = Vocabulary::from_counts(std::move(row_items));
  out.cols = Vocabulary::from_counts(std::move(col_items));

  std::vector<std::int64_t> row_of(n, -1), col_of(n, -1);
  for (std::size_t t = 0; t < n; ++t) {
    if (auto id = out.rows.find(temp_key[t]->str()); id && f_kept[t] > 0) row_of[t] = static_cast<std::int64_t>(*id);
    if (auto id = out.cols.find(temp_key[t]->str()); id && c_kept[t] > 0) col_of[t] = static_cast<std::int64_t>(*id);
  }

  auto& pc = out.counts;
  pc.f_count.assign(out.rows.size(), 0);
  pc.c_count.assign(out.cols.size(), 0);
  for (const auto& [rc, c] : raw) {
    std::size_t r = rc >> 32, col = rc & 0xffffffffu;
    if (f_raw[r] < min_row_count || c_raw[col] < min_col_count) continue;
    auto ri = row_of[r], ci = col_of[col];
    pc.pairs.push_back({static_cast<std::uint32_t>(ri), static_cast<std::uint32_t>(ci), c});
    pc.f_count[ri] += c;
    pc.c_count[ci] += c;
    pc.total += c;
  }
  std::sort(pc.pairs.begin(), pc.pairs.end(),
            [](const auto& a, const auto& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  return out;
}

/// Corpus shape in the style of a dataset summary table.
struct CorpusStats {
  std::size_t users = 0;
  std::size_t meals = 0;
  std::size_t raw_entries = 0;
  std::size_t unique_raw_entries = 0;
  std::size_t entries_discarded = 0;
  std::size_t unique_foods = 0;
  std::size_t meals_with_pairs = 0;
};

inline CorpusStats corpus_stats(const std::vector<MealRecord>& meals, const PreprocessResult& processed) {
  CorpusStats s;
  std::set<std::string> users, raw, foods;
  for (const auto& m : meals) {
    users.insert(m.user_id);
    for (const auto& e : m.raw_entries) raw.insert(e);
  }
  for (const auto& pm : processed.meals) {
    for (const auto& f : pm.foods) foods.insert(f.str());
    if (pm.foods.size() >= 2) ++s.meals_with_pairs;
  }
  s.users = users.size();
  s.meals = meals.size();
  s.raw_entries = processed.stats.entries_total;
  s.unique_raw_entries = raw.size();
  s.entries_discarded = processed.stats.entries_discarded;
  s.unique_foods = foods.size();
  return s;
}

}  // namespace foodsub

#endif
