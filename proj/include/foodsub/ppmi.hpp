#ifndef FOODSUB_PPMI_HPP
#define FOODSUB_PPMI_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "foodsub/corpus.hpp"
#include "foodsub/error.hpp"
#include "foodsub/io.hpp"

namespace foodsub {

enum class LogBase { natural, two };

/// Significance-weighted positive PMI of one food-context cell:
///
///   max( log(#(f,c) * |D| / (#(f) * #(c))) * sqrt(max(#(f), #(c))), 0 )
///
/// A zero pair count yields 0 without evaluating log(0).
inline double pmi_sig_cell(std::uint64_t pair_count, std::uint64_t f_count, std::uint64_t c_count,
                           std::uint64_t total, LogBase base = LogBase::natural) {
  if (pair_count == 0) return 0.0;
  if (f_count == 0 || c_count == 0 || total == 0)
    throw ValidationError("pmi_sig_cell: zero marginal with a positive pair count");
  if (pair_count > f_count || pair_count > c_count || pair_count > total)
    throw ValidationError("pmi_sig_cell: pair count exceeds a marginal");
  const double ratio = (static_cast<double>(pair_count) * static_cast<double>(total)) /
                       (static_cast<double>(f_count) * static_cast<double>(c_count));
  const double pmi = base == LogBase::natural ? std::log(ratio) : std::log2(ratio);
  const double sig = std::sqrt(static_cast<double>(std::max(f_count, c_count)));
  return std::max(pmi * sig, 0.0);
}

/// Sparse CSR food-context matrix. Only strictly positive weights are stored
/// and column ids increase within each row.
class PpmiMatrix {
public:
  PpmiMatrix() = default;

  /// Takes (row, col, weight) triples, which must be sorted by (row, col)
  /// with positive weights.
  PpmiMatrix(std::size_t rows, std::size_t cols, const std::vector<std::uint32_t>& row_ids,
             std::vector<std::uint32_t> col_ids, std::vector<double> values)
      : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0), col_idx_(std::move(col_ids)), values_(std::move(values)) {
    if (row_ids.size() != col_idx_.size() || col_idx_.size() != values_.size())
      throw ValidationError("PpmiMatrix: triple arrays differ in length");
    for (std::size_t t = 0; t < row_ids.size(); ++t) {
      if (row_ids[t] >= rows_ || col_idx_[t] >= cols_) throw ValidationError("PpmiMatrix: index out of range");
      if (!(values_[t] > 0.0)) throw ValidationError("PpmiMatrix: stored weights must be positive");
      if (t > 0 && (row_ids[t] < row_ids[t - 1] || (row_ids[t] == row_ids[t - 1] && col_idx_[t] <= col_idx_[t - 1])))
        throw ValidationError("PpmiMatrix: triples must be strictly sorted by (row, col)");
      ++row_ptr_[row_ids[t] + 1];
    }
    for (std::size_t r = 0; r < rows_; ++r) row_ptr_[r + 1] += row_ptr_[r];
    norms_.assign(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      double s = 0.0;
      for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += values_[k] * values_[k];
      norms_[r] = std::sqrt(s);
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  struct RowView {
    const std::uint32_t* cols;
    const double* values;
    std::size_t size;
  };

  RowView row(std::size_t r) const {
    check_row(r);
    auto b = row_ptr_[r];
    return {col_idx_.data() + b, values_.data() + b, row_ptr_[r + 1] - b};
  }

  double row_norm(std::size_t r) const {
    check_row(r);
    return norms_[r];
  }

  double at(std::size_t r, std::size_t c) const {
    auto v = row(r);
    auto it = std::lower_bound(v.cols, v.cols + v.size, static_cast<std::uint32_t>(c));
    return it != v.cols + v.size && *it == c ? v.values[it - v.cols] : 0.0;
  }

  const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
  const std::vector<std::uint32_t>& col_idx() const noexcept { return col_idx_; }
  const std::vector<double>& values() const noexcept { return values_; }

  /// Sparse dot product of two rows.
  double row_dot(std::size_t i, std::size_t j) const {
    auto a = row(i), b = row(j);
    double s = 0.0;
    std::size_t p = 0, q = 0;
    while (p < a.size && q < b.size) {
      if (a.cols[p] == b.cols[q]) {
        s += a.values[p++] * b.values[q++];
      } else if (a.cols[p] < b.cols[q]) {
        ++p;
      } else {
        ++q;
      }
    }
    return s;
  }

  /// Copy with every weight multiplied by a positive factor.
  PpmiMatrix scaled(double factor) const {
    if (!(factor > 0.0)) throw ValidationError("scale factor must be positive");
    std::vector<std::uint32_t> rid;
    rid.reserve(nnz());
    for (std::size_t r = 0; r < rows_; ++r)
      for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) rid.push_back(static_cast<std::uint32_t>(r));
    std::vector<double> v = values_;
    for (double& x : v) x *= factor;
    return PpmiMatrix(rows_, cols_, rid, col_idx_, std::move(v));
  }

  friend bool operator==(const PpmiMatrix& a, const PpmiMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.row_ptr_ == b.row_ptr_ && a.col_idx_ == b.col_idx_ &&
           a.values_ == b.values_;
  }

private:
  void check_row(std::size_t r) const {
    if (r >= rows_) throw ValidationError("row id " + std::to_string(r) + " out of range (rows=" + std::to_string(rows_) + ")");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> col_idx_;
  std::vector<double> values_;
  std::vector<double> norms_;
};

enum class Weighting {
  pmi_sig,
  /// Plain positive PMI without the significance factor. Tests only.
  ppmi_plain,
};

struct PpmiOptions {
  LogBase log_base = LogBase::natural;
  Weighting weighting = Weighting::pmi_sig;
};

inline PpmiMatrix build_ppmi_matrix(const PairCounts& counts, std::size_t rows, std::size_t cols,
                                    const PpmiOptions& options = {}) {
  if (counts.f_count.size() != rows || counts.c_count.size() != cols)
    throw ValidationError("pair counts do not match vocabulary sizes");
  std::vector<std::uint32_t> rid, cid;
  std::vector<double> vals;
  for (const auto& e : counts.pairs) {
    const auto f = counts.f_count[e.row], c = counts.c_count[e.col];
    double w;
    if (options.weighting == Weighting::pmi_sig) {
      w = pmi_sig_cell(e.count, f, c, counts.total, options.log_base);
    } else {
      double ratio = static_cast<double>(e.count) * static_cast<double>(counts.total) /
                     (static_cast<double>(f) * static_cast<double>(c));
      w = std::max(options.log_base == LogBase::natural ? std::log(ratio) : std::log2(ratio), 0.0);
    }
    if (w > 0.0) {
      rid.push_back(e.row);
      cid.push_back(e.col);
      vals.push_back(w);
    }
  }
  return PpmiMatrix(rows, cols, rid, std::move(cid), std::move(vals));
}

inline PpmiMatrix build_ppmi_matrix(const CountedCorpus& corpus, const PpmiOptions& options = {}) {
  return build_ppmi_matrix(corpus.counts, corpus.rows.size(), corpus.cols.size(), options);
}

/// Cosine of two rows; 0 when either row is all zeros.
inline double cosine_similarity(const PpmiMatrix& m, std::size_t i, std::size_t j) {
  const double ni = m.row_norm(i), nj = m.row_norm(j);
  if (ni == 0.0 || nj == 0.0) return 0.0;
  return m.row_dot(i, j) / (ni * nj);
}

/// Header `PPMI <rows> <cols> <nnz>` then `row<TAB>col<TAB>weight` in (row, col) order.
inline std::string ppmi_to_text(const PpmiMatrix& m) {
  std::string out = "PPMI " + std::to_string(m.rows()) + ' ' + std::to_string(m.cols()) + ' ' + std::to_string(m.nnz()) + '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto v = m.row(r);
    for (std::size_t k = 0; k < v.size; ++k)
      out += std::to_string(r) + '\t' + std::to_string(v.cols[k]) + '\t' + io::format_exact(v.values[k]) + '\n';
  }
  return out;
}

inline PpmiMatrix parse_ppmi(const std::string& text, const std::string& source = "matrix") {
  auto lines = io::split_lines(text);
  if (lines.empty()) throw ParseError(source, 1, "missing PPMI header");
  auto head = io::split(lines[0], ' ');
  std::size_t rows = 0, cols = 0, nnz = 0;
  if (head.size() != 4 || head[0] != "PPMI" || !io::parse_int(head[1], rows) || !io::parse_int(head[2], cols) ||
      !io::parse_int(head[3], nnz))
    throw ParseError(source, 1, "expected 'PPMI <rows> <cols> <nnz>'");
  std::vector<std::uint32_t> rid, cid;
  std::vector<double> vals;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = io::split(lines[i], '\t');
    std::uint32_t r = 0, c = 0;
    double w = 0;
    if (f.size() != 3 || !io::parse_int(f[0], r) || !io::parse_int(f[1], c) || !io::parse_double(f[2], w))
      throw ParseError(source, i + 1, "expected row<TAB>col<TAB>weight");
    rid.push_back(r);
    cid.push_back(c);
    vals.push_back(w);
  }
  if (vals.size() != nnz) throw ParseError(source, lines.size(), "nnz does not match header");
  try {
    return PpmiMatrix(rows, cols, rid, std::move(cid), std::move(vals));
  } catch (const ValidationError& e) {
    throw ParseError(source, 1, e.what());
  }
}

}  // namespace foodsub

#endif
