#ifndef FOODSUB_TAXONOMY_HPP
#define FOODSUB_TAXONOMY_HPP

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "foodsub/error.hpp"
#include "foodsub/io.hpp"

namespace foodsub {

/// Lowercases and splits on every non-alphanumeric byte. Empty tokens are
/// dropped and order is preserved. Bytes >= 0x80 count as separators.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    auto uc = static_cast<unsigned char>(ch);
    if (uc < 0x80 && std::isalnum(uc)) {
      cur += static_cast<char>(std::tolower(uc));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

/// A "category:subcategory:entity" triple extracted from a food entry.
struct SalientFeature {
  std::string category;
  std::string subcategory;
  std::string entity;

  std::string rendered() const { return category + ":" + subcategory + ":" + entity; }
  /// The "category:subcategory" label used for subcategory co-occurrence.
  std::string subcategory_label() const { return category + ":" + subcategory; }

  friend bool operator==(const SalientFeature&, const SalientFeature&) = default;
  friend auto operator<=>(const SalientFeature& a, const SalientFeature& b) {
    return a.rendered() <=> b.rendered();
  }
};

/// Identity of a food item: the sorted, deduplicated set of its rendered
/// salient features. Construct through canonical_food_key or FoodKey::parse.
class FoodKey {
public:
  FoodKey() = default;

  const std::vector<std::string>& features() const noexcept { return features_; }
  const std::string& str() const noexcept { return key_; }
  bool empty() const noexcept { return features_.empty(); }

  /// "category:subcategory" labels of every feature, deduplicated and sorted.
  std::vector<std::string> subcategory_labels() const {
    std::set<std::string> labels;
    for (const auto& f : features_) {
      auto last = f.rfind(':');
      labels.insert(last == std::string::npos ? f : f.substr(0, last));
    }
    return {labels.begin(), labels.end()};
  }

  bool has_feature_prefix(std::string_view prefix) const {
    return std::any_of(features_.begin(), features_.end(),
                       [&](const std::string& f) { return f.starts_with(prefix); });
  }

  /// Rebuilds a key from its "|"-joined text form.
  static FoodKey parse(std::string_view text);

  friend bool operator==(const FoodKey& a, const FoodKey& b) { return a.key_ == b.key_; }
  friend auto operator<=>(const FoodKey& a, const FoodKey& b) { return a.key_ <=> b.key_; }

private:
  friend FoodKey canonical_food_key(std::vector<std::string> rendered);
  std::vector<std::string> features_;
  std::string key_;
};

/// Sorts and deduplicates rendered features and joins them with "|".
/// An empty set means the entry could not be matched and must be discarded.
inline FoodKey canonical_food_key(std::vector<std::string> rendered) {
  std::sort(rendered.begin(), rendered.end());
  rendered.erase(std::unique(rendered.begin(), rendered.end()), rendered.end());
  if (rendered.empty()) throw ValidationError("unmatchable entry, discard: empty feature set");
  FoodKey k;
  k.key_ = join(rendered, "|");
  k.features_ = std::move(rendered);
  return k;
}

inline FoodKey canonical_food_key(const std::set<SalientFeature>& features) {
  std::vector<std::string> rendered;
  rendered.reserve(features.size());
  for (const auto& f : features) rendered.push_back(f.rendered());
  return canonical_food_key(std::move(rendered));
}

inline FoodKey FoodKey::parse(std::string_view text) {
  if (text.empty()) throw ValidationError("empty food key");
  return canonical_food_key(io::split(text, '|'));
}

/// Food taxonomy: categories, subcategories and entity leaves, each entity
/// reachable through one or more lowercase token sequences.
class Taxonomy {
public:
  struct Entry {
    std::string category;
    std::string subcategory;
    std::string entity;
    std::vector<std::vector<std::string>> synonyms;

    SalientFeature feature() const { return {category, subcategory, entity}; }
  };

  Taxonomy() = default;

  /// Adds an entity; its name is indexed alongside the given synonyms.
  /// Throws ValidationError on a duplicate triple or an ambiguous synonym.
  void add(std::string category, std::string subcategory, std::string entity,
           const std::vector<std::string>& synonyms) {
    for (const auto* field : {&category, &subcategory, &entity}) {
      if (field->empty()) throw ValidationError("taxonomy field must be non-empty");
      if (field->find_first_of(":|\t") != std::string::npos)
        throw ValidationError("taxonomy field contains ':', '|' or tab: " + *field);
    }
    Entry e{std::move(category), std::move(subcategory), std::move(entity), {}};
    const std::string rendered = e.feature().rendered();
    for (const auto& other : entries_)
      if (other.feature().rendered() == rendered)
        throw ValidationError("duplicate taxonomy triple " + rendered);

    std::vector<std::string> sources{e.entity};
    sources.insert(sources.end(), synonyms.begin(), synonyms.end());
    std::set<std::vector<std::string>> seen;
    for (const auto& s : sources) {
      if (io::trim(s).empty()) continue;
      auto toks = tokenize(s);
      if (toks.empty()) throw ValidationError("synonym '" + s + "' has no tokens (" + rendered + ")");
      if (seen.insert(toks).second) e.synonyms.push_back(std::move(toks));
    }

    const std::size_t id = entries_.size();
    for (const auto& toks : e.synonyms) {
      std::string joined = join(toks, " ");
      auto it = by_synonym_.find(joined);
      if (it != by_synonym_.end() && it->second != id)
        throw ValidationError("ambiguous synonym '" + joined + "' maps to " +
                              entries_[it->second].feature().rendered() + " and " + rendered);
    }
    auto& cat = categories_[e.category];
    for (const auto& toks : e.synonyms) {
      std::string joined = join(toks, " ");
      by_synonym_.emplace(joined, id);
      cat.index.emplace(joined, id);
      cat.max_len = std::max(cat.max_len, toks.size());
    }
    entries_.push_back(std::move(e));
  }

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  /// Entry reached by an exact token sequence, or nullptr.
  const Entry* lookup(const std::vector<std::string>& tokens) const {
    auto it = by_synonym_.find(join(tokens, " "));
    return it == by_synonym_.end() ? nullptr : &entries_[it->second];
  }

  std::size_t index_size() const noexcept { return by_synonym_.size(); }

  /// Per category, scans tokens left to right taking the longest match at
  /// each position and resuming after it. Results are merged across
  /// categories and positions.
  std::set<SalientFeature> extract(std::string_view entry_text) const {
    const auto tokens = tokenize(entry_text);
    std::set<SalientFeature> out;
    for (const auto& [name, cat] : categories_) {
      std::size_t pos = 0;
      while (pos < tokens.size()) {
        std::size_t matched = 0;
        for (std::size_t len = std::min(cat.max_len, tokens.size() - pos); len > 0; --len) {
          std::string span = tokens[pos];
          for (std::size_t t = 1; t < len; ++t) span += ' ' + tokens[pos + t];
          auto it = cat.index.find(span);
          if (it != cat.index.end()) {
            out.insert(entries_[it->second].feature());
            matched = len;
            break;
          }
        }
        pos += matched ? matched : 1;
      }
    }
    return out;
  }

private:
  struct Category {
    std::unordered_map<std::string, std::size_t> index;
    std::size_t max_len = 0;
  };

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> by_synonym_;
  std::map<std::string, Category> categories_;
};

/// Parses taxonomy TSV text: `category<TAB>subcategory<TAB>entity<TAB>syn1|syn2|...`.
/// Blank lines and lines starting with '#' are skipped.
inline Taxonomy parse_taxonomy(std::string_view text, const std::string& source = "taxonomy") {
  Taxonomy tax;
  auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty() || line[0] == '#' || io::trim(line).empty()) continue;
    auto cols = io::split(line, '\t');
    if (cols.size() != 4)
      throw ParseError(source, i + 1, "expected 4 tab-separated columns, got " + std::to_string(cols.size()));
    try {
      tax.add(io::trim(cols[0]), io::trim(cols[1]), io::trim(cols[2]), io::split(cols[3], '|'));
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(source, i + 1, e.what());
    }
  }
  return tax;
}

inline Taxonomy load_taxonomy(const std::filesystem::path& path) {
  return parse_taxonomy(io::read_file(path), path.string());
}

inline std::set<SalientFeature> extract_salient_features(std::string_view entry_text, const Taxonomy& taxonomy) {
  return taxonomy.extract(entry_text);
}

}  // namespace foodsub

#endif
