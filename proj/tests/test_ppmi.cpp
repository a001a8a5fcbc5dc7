#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "foodsub/ppmi.hpp"
#include "support/test_data.hpp"

using namespace foodsub;

namespace {

std::size_t rid(const CountedCorpus& cc, const char* n) { return *cc.rows.find(std::string("x:y:") + n); }
std::size_t cid(const CountedCorpus& cc, const char* n) { return *cc.cols.find(std::string("x:y:") + n); }

double dense_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return na == 0 || nb == 0 ? 0.0 : d / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

// Expected values from tests/oracles/ppmi_oracle.py.
TEST(PmiSigCell, Examples) {
  EXPECT_NEAR(pmi_sig_cell(2, 3, 3, 8), 0.9965599318263907, 1e-12);
  EXPECT_EQ(pmi_sig_cell(3, 6, 4, 8), 0.0);
  EXPECT_EQ(pmi_sig_cell(1, 4, 4, 8), 0.0);
  EXPECT_EQ(pmi_sig_cell(0, 0, 0, 0), 0.0);
}

TEST(PmiSigCell, ZeroDenominatorWithPositivePairIsAnError) {
  EXPECT_THROW(pmi_sig_cell(1, 0, 3, 8), ValidationError);
  EXPECT_THROW(pmi_sig_cell(1, 3, 0, 8), ValidationError);
  EXPECT_THROW(pmi_sig_cell(4, 3, 5, 8), ValidationError);
}

TEST(PmiSigCell, PropertyNonNegativeAndMonotoneInPairCount) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 5000; ++trial) {
    std::uint64_t f = 1 + gen() % 500, c = 1 + gen() % 500;
    std::uint64_t total = std::max(f, c) + gen() % 5000;
    std::uint64_t limit = std::min(f, c);
    std::uint64_t p = gen() % (limit + 1);
    double w = pmi_sig_cell(p, f, c, total);
    EXPECT_GE(w, 0.0);
    if (p < limit) {
      EXPECT_GE(pmi_sig_cell(p + 1, f, c, total), w);
    }
  }
}

TEST(BuildPpmiMatrix, ToyCorpusCells) {
  auto cc = build_pair_counts(testdata::toy_meals(), 1, 1);
  auto m = build_ppmi_matrix(cc);
  EXPECT_EQ(m.rows(), 3u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_NEAR(m.at(rid(cc, "A"), cid(cc, "B")), 0.99655993182639069, 1e-12);
  EXPECT_NEAR(m.at(rid(cc, "A"), cid(cc, "C")), 0.49827996591319523, 1e-12);
  EXPECT_NEAR(m.at(rid(cc, "C"), cid(cc, "B")), 0.49827996591319523, 1e-12);
  EXPECT_EQ(m.at(rid(cc, "A"), cid(cc, "A")), 0.0);
  EXPECT_EQ(m.nnz(), 6u);
}

TEST(BuildPpmiMatrix, IndependentCountsGiveEmptyStorage) {
  // #(f,c) * |D| == #(f) * #(c) in every cell, so every weight clamps to zero.
  PairCounts pc;
  pc.f_count = {4, 4};
  pc.c_count = {4, 4};
  pc.total = 8;
  pc.pairs = {{0, 0, 2}, {0, 1, 2}, {1, 0, 2}, {1, 1, 2}};
  auto m = build_ppmi_matrix(pc, 2, 2);
  EXPECT_EQ(m.nnz(), 0u);
  EXPECT_EQ(m.row_norm(0), 0.0);
}

TEST(BuildPpmiMatrix, Deterministic) {
  auto cc = build_pair_counts(testdata::toy_meals(), 1, 1);
  EXPECT_EQ(build_ppmi_matrix(cc), build_ppmi_matrix(cc));
  EXPECT_EQ(ppmi_to_text(build_ppmi_matrix(cc)), ppmi_to_text(build_ppmi_matrix(cc)));
}

TEST(BuildPpmiMatrix, StoredWeightsPositiveAndColumnsIncreasing) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 gen(seed);
    std::vector<ProcessedMeal> meals;
    for (int i = 0; i < 200; ++i) {
      std::set<std::string> names;
      for (int j = 0; j < 4; ++j) names.insert(std::string(1, static_cast<char>('A' + gen() % 12)));
      ProcessedMeal m;
      for (const auto& n : names) m.foods.push_back(FoodKey::parse("x:y:" + n));
      meals.push_back(m);
    }
    auto m = build_ppmi_matrix(build_pair_counts(meals, 1, 1));
    for (std::size_t r = 0; r < m.rows(); ++r) {
      auto row = m.row(r);
      for (std::size_t k = 0; k < row.size; ++k) {
        EXPECT_GT(row.values[k], 0.0);
        if (k) {
          EXPECT_LT(row.cols[k - 1], row.cols[k]);
        }
      }
    }
  }
}

TEST(CosineSimilarity, Examples) {
  auto m = testdata::dense_to_csr({{1, 1, 0}, {1, 0, 0}, {0, 0, 3}, {2, 2, 0}, {0, 0, 0}});
  EXPECT_NEAR(cosine_similarity(m, 0, 3), 1.0, 1e-15);
  EXPECT_NEAR(cosine_similarity(m, 0, 0), 1.0, 1e-15);
  EXPECT_EQ(cosine_similarity(m, 0, 2), 0.0);
  EXPECT_NEAR(cosine_similarity(m, 0, 1), 0.70710678118654752, 1e-15);
  EXPECT_EQ(cosine_similarity(m, 0, 4), 0.0);
  EXPECT_THROW(cosine_similarity(m, 0, 5), ValidationError);
}

TEST(CosineSimilarity, SparseMatchesDenseBruteForce) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto m = testdata::random_sparse(50, 50, 0.15, seed);
    std::vector<std::vector<double>> dense(50, std::vector<double>(50, 0.0));
    for (std::size_t r = 0; r < 50; ++r)
      for (std::size_t c = 0; c < 50; ++c) dense[r][c] = m.at(r, c);
    for (std::size_t i = 0; i < 50; ++i)
      for (std::size_t j = 0; j < 50; ++j) EXPECT_NEAR(cosine_similarity(m, i, j), dense_cosine(dense[i], dense[j]), 1e-12);
  }
}

TEST(CosineSimilarity, LogBaseDoesNotChangeCosine) {
  std::vector<ProcessedMeal> meals;
  std::mt19937_64 gen(3);
  for (int i = 0; i < 300; ++i) {
    std::set<std::string> names;
    for (int j = 0; j < 3; ++j) names.insert("f" + std::to_string(gen() % 20));
    ProcessedMeal m;
    for (const auto& n : names) m.foods.push_back(FoodKey::parse("x:y:" + n));
    meals.push_back(m);
  }
  auto cc = build_pair_counts(meals, 1, 1);
  auto ln = build_ppmi_matrix(cc, {LogBase::natural});
  auto lg = build_ppmi_matrix(cc, {LogBase::two});
  ASSERT_EQ(ln.nnz(), lg.nnz());
  for (std::size_t t = 0; t < ln.nnz(); ++t) EXPECT_NEAR(lg.values()[t] / ln.values()[t], 1.0 / std::log(2.0), 1e-12);
  for (std::size_t i = 0; i < ln.rows(); ++i)
    for (std::size_t j = 0; j < ln.rows(); ++j) EXPECT_NEAR(cosine_similarity(ln, i, j), cosine_similarity(lg, i, j), 1e-12);
}

TEST(PpmiMatrix, TextRoundTripIsExact) {
  auto m = testdata::random_sparse(30, 20, 0.2, 9);
  auto text = ppmi_to_text(m);
  EXPECT_EQ(text.substr(0, text.find('\n')), "PPMI 30 20 " + std::to_string(m.nnz()));
  auto back = parse_ppmi(text);
  EXPECT_EQ(back, m);
  EXPECT_EQ(ppmi_to_text(back), text);
}

TEST(PpmiMatrix, RejectsMalformedText) {
  EXPECT_THROW(parse_ppmi("PPMI 2 2 1\n0\t0\n"), ParseError);
  EXPECT_THROW(parse_ppmi("PPMI 2 2 2\n0\t0\t1.0\n"), ParseError);
  EXPECT_THROW(parse_ppmi("PPMI 2 2 1\n0\t5\t1.0\n"), ParseError);
  EXPECT_THROW(parse_ppmi("PPMI 2 2 1\n0\t0\t-1.0\n"), ParseError);
}
