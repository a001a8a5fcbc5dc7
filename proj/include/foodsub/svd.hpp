#ifndef FOODSUB_SVD_HPP
#define FOODSUB_SVD_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "foodsub/error.hpp"
#include "foodsub/io.hpp"
#include "foodsub/ppmi.hpp"
#include "foodsub/random.hpp"

namespace foodsub {

using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SvdOptions {
  std::size_t k = 500;
  std::uint64_t seed = 0;
  std::size_t oversampling = 10;
  /// Minimum number of subspace (power) iterations.
  std::size_t power_iters = 4;
  /// Keep iterating past power_iters until every top-k singular triplet has
  /// residual |M v - s u| below this, relative to the largest singular value.
  /// Zero disables the extra passes.
  double convergence_tol = 1e-10;
  std::size_t max_power_iters = 300;
};

/// Rank-k factors. Row embeddings are U_k * Sigma_k, so the dot product of two
/// embedding rows equals the dot product of the same rows of M_k.
struct SvdModel {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<double> singular_values;
  DenseMatrix row_embeddings;  // rows x k
  DenseMatrix col_factors;     // cols x k, orthonormal columns
  std::size_t iterations = 0;  // subspace iterations actually run

  std::size_t rows() const noexcept { return static_cast<std::size_t>(row_embeddings.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(col_factors.rows()); }

  /// Dense M_k = E * V_k^T.
  DenseMatrix reconstruct() const { return row_embeddings * col_factors.transpose(); }

  double embedding_norm(std::size_t i) const { return row_embeddings.row(static_cast<Eigen::Index>(i)).norm(); }
};

namespace detail {

// Y = M * X for CSR M (m x n) and dense X (n x l).
inline DenseMatrix csr_times(const PpmiMatrix& m, const DenseMatrix& x) {
  DenseMatrix y = DenseMatrix::Zero(static_cast<Eigen::Index>(m.rows()), x.cols());
  const auto& rp = m.row_ptr();
  const auto& ci = m.col_idx();
  const auto& v = m.values();
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (auto k = rp[r]; k < rp[r + 1]; ++k) y.row(static_cast<Eigen::Index>(r)) += v[k] * x.row(ci[k]);
  return y;
}

// Z = M^T * X for CSR M (m x n) and dense X (m x l).
inline DenseMatrix csr_transpose_times(const PpmiMatrix& m, const DenseMatrix& x) {
  DenseMatrix z = DenseMatrix::Zero(static_cast<Eigen::Index>(m.cols()), x.cols());
  const auto& rp = m.row_ptr();
  const auto& ci = m.col_idx();
  const auto& v = m.values();
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (auto k = rp[r]; k < rp[r + 1]; ++k) z.row(ci[k]) += v[k] * x.row(static_cast<Eigen::Index>(r));
  return z;
}

inline DenseMatrix orthonormal_basis(const DenseMatrix& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
  return q;
}

}  // namespace detail

/// Rank-k truncated SVD by a seeded randomized range finder with subspace
/// iteration: sketch Y = M * Omega, orthonormalize, alternate M^T / M products
/// with re-orthonormalization, then take the exact SVD of the small
/// projection Q^T M. Deterministic for a fixed matrix and options.
inline SvdModel truncated_svd(const PpmiMatrix& m, const SvdOptions& opt) {
  const std::size_t min_dim = std::min(m.rows(), m.cols());
  if (opt.k < 1 || opt.k > min_dim)
    throw ValidationError("svd rank k=" + std::to_string(opt.k) + " must be in [1, " + std::to_string(min_dim) + "]");
  if (m.nnz() == 0) throw ValidationError("svd of an all-zero matrix");

  const auto l = static_cast<Eigen::Index>(std::min(opt.k + opt.oversampling, min_dim));
  const auto k = static_cast<Eigen::Index>(opt.k);

  Rng rng(opt.seed);
  DenseMatrix omega(static_cast<Eigen::Index>(m.cols()), l);
  for (Eigen::Index i = 0; i < omega.rows(); ++i)
    for (Eigen::Index j = 0; j < l; ++j) omega(i, j) = rng.uniform(-1.0, 1.0);

  DenseMatrix q = detail::orthonormal_basis(detail::csr_times(m, omega));

  // B = Q^T M is l x n with n possibly large; its SVD is taken through the
  // thin QR B^T = P R, so B = V_r S (P U_r)^T for R = U_r S V_r^T.
  struct Small {
    Eigen::MatrixXd left, right;
    Eigen::VectorXd values;
  };
  auto decompose = [&](const DenseMatrix& basis, bool vectors) {
    Eigen::MatrixXd bt = detail::csr_transpose_times(m, basis);  // n x l
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(bt);
    Eigen::MatrixXd r = qr.matrixQR().topRows(bt.cols()).triangularView<Eigen::Upper>();
    Small out;
    if (!vectors) {
      out.values = Eigen::JacobiSVD<Eigen::MatrixXd>(r).singularValues();
      return out;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    out.values = svd.singularValues();
    out.left = svd.matrixV();
    out.right = qr.householderQ() * (Eigen::MatrixXd::Identity(bt.rows(), bt.cols()) * svd.matrixU());
    return out;
  };

  // Residual of the top-k Ritz triplets, max_i |M v_i - s_i u_i| relative to s_0.
  auto residual = [&](const DenseMatrix& basis) {
    Small t = decompose(basis, true);
    DenseMatrix v = t.right.leftCols(k);
    Eigen::MatrixXd mv = detail::csr_times(m, v);
    Eigen::MatrixXd su = (basis * t.left.leftCols(k)) * t.values.head(k).asDiagonal();
    const double s0 = t.values(0);
    return s0 > 0 ? (mv - su).colwise().norm().maxCoeff() / s0 : 0.0;
  };

  std::size_t iters = 0;
  const std::size_t cap = std::max(opt.power_iters, opt.convergence_tol > 0 ? opt.max_power_iters : opt.power_iters);
  while (iters < cap) {
    DenseMatrix z = detail::orthonormal_basis(detail::csr_transpose_times(m, q));
    q = detail::orthonormal_basis(detail::csr_times(m, z));
    ++iters;
    if (iters < opt.power_iters || opt.convergence_tol <= 0) continue;
    if (residual(q) <= opt.convergence_tol) break;
  }

  Small small = decompose(q, true);
  Eigen::MatrixXd u = q * small.left.leftCols(k);
  Eigen::MatrixXd v = small.right.leftCols(k);
  Eigen::VectorXd s = small.values.head(k);

  // Sign convention: the largest-magnitude entry of each right singular
  // vector is positive (first index on ties).
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      if (std::abs(v(r, c)) > best) {
        best = std::abs(v(r, c));
        arg = r;
      }
    }
    if (v(arg, c) < 0) {
      v.col(c) *= -1.0;
      u.col(c) *= -1.0;
    }
  }

  SvdModel model;
  model.k = opt.k;
  model.seed = opt.seed;
  model.iterations = iters;
  model.singular_values.assign(s.data(), s.data() + k);
  model.row_embeddings = u * s.asDiagonal();
  model.col_factors = v;
  return model;
}

/// Dot product of two embedding rows (equal to the M_k row dot product).
inline double dot_similarity(const SvdModel& model, std::size_t i, std::size_t j) {
  if (i >= model.rows() || j >= model.rows())
    throw ValidationError("row id out of range (rows=" + std::to_string(model.rows()) + ")");
  return model.row_embeddings.row(static_cast<Eigen::Index>(i)).dot(model.row_embeddings.row(static_cast<Eigen::Index>(j)));
}

/// Header `SVD <rows> <k> <seed>`, a tab-separated singular value line, the
/// row-major embeddings, then `COLS <cols> <k>` and the column factors.
inline std::string svd_to_text(const SvdModel& model) {
  std::string out = "SVD " + std::to_string(model.rows()) + ' ' + std::to_string(model.k) + ' ' + std::to_string(model.seed) + '\n';
  auto emit_row = [&](const auto& row) {
    for (Eigen::Index c = 0; c < row.size(); ++c) {
      if (c) out += '\t';
      out += io::format_exact(row(c));
    }
    out += '\n';
  };
  emit_row(Eigen::Map<const Eigen::RowVectorXd>(model.singular_values.data(), static_cast<Eigen::Index>(model.singular_values.size())));
  for (Eigen::Index r = 0; r < model.row_embeddings.rows(); ++r) emit_row(model.row_embeddings.row(r));
  out += "COLS " + std::to_string(model.cols()) + ' ' + std::to_string(model.k) + '\n';
  for (Eigen::Index r = 0; r < model.col_factors.rows(); ++r) emit_row(model.col_factors.row(r));
  return out;
}

inline SvdModel parse_svd(const std::string& text, const std::string& source = "model") {
  auto lines = io::split_lines(text);
  std::size_t ln = 0;
  auto fail = [&](const std::string& what) { throw ParseError(source, ln + 1, what); };
  auto read_row = [&](Eigen::Index expect) {
    if (ln >= lines.size()) fail("unexpected end of file");
    auto f = io::split(lines[ln], '\t');
    if (static_cast<Eigen::Index>(f.size()) != expect) fail("expected " + std::to_string(expect) + " values");
    Eigen::RowVectorXd row(expect);
    for (Eigen::Index c = 0; c < expect; ++c)
      if (!io::parse_double(f[static_cast<std::size_t>(c)], row(c))) fail("bad number");
    ++ln;
    return row;
  };

  if (lines.empty()) fail("missing SVD header");
  auto head = io::split(lines[0], ' ');
  SvdModel model;
  std::size_t rows = 0;
  if (head.size() != 4 || head[0] != "SVD" || !io::parse_int(head[1], rows) || !io::parse_int(head[2], model.k) ||
      !io::parse_int(head[3], model.seed))
    fail("expected 'SVD <rows> <k> <seed>'");
  ++ln;
  const auto k = static_cast<Eigen::Index>(model.k);
  auto sv = read_row(k);
  model.singular_values.assign(sv.data(), sv.data() + k);
  model.row_embeddings.resize(static_cast<Eigen::Index>(rows), k);
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(rows); ++r) model.row_embeddings.row(r) = read_row(k);
  if (ln >= lines.size()) fail("missing COLS section");
  auto ch = io::split(lines[ln], ' ');
  std::size_t cols = 0, k2 = 0;
  if (ch.size() != 3 || ch[0] != "COLS" || !io::parse_int(ch[1], cols) || !io::parse_int(ch[2], k2) || k2 != model.k)
    fail("expected 'COLS <cols> <k>'");
  ++ln;
  model.col_factors.resize(static_cast<Eigen::Index>(cols), k);
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(cols); ++r) model.col_factors.row(r) = read_row(k);
  return model;
}

}  // namespace foodsub

#endif
