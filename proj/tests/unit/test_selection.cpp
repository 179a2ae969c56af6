#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "langsup/io.hpp"
#include "langsup/selection.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace langsup {
namespace {

using testing::error_kind;
using testing::fixture;

void expect_near(const Vector& got, const Vector& want, double tol) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "channel " << i;
}

ChannelScores scores(ScoreKind kind, Vector v) { return {kind, std::move(v)}; }

// --- intra-class similarity ------------------------------------------------

TEST(IntraSimilarity, SingleSentence) {
  const EmbeddingSet es(2, {"a"}, {Matrix::from_rows({{0.6, 0.8}})});
  const auto s = intra_class_similarity(es);
  EXPECT_EQ(s.kind, ScoreKind::kIntraSimilarity);
  expect_near(s.values, {0.36, 0.64}, 1e-15);
}

TEST(IntraSimilarity, OrthonormalPairIncludesSelfTerms) {
  const EmbeddingSet es(2, {"a"}, {Matrix::from_rows({{1, 0}, {0, 1}})});
  expect_near(intra_class_similarity(es).values, {0.25, 0.25}, 1e-15);
}

TEST(IntraSimilarity, MatchesTripleLoop) {
  Rng rng(101);
  for (int t = 0; t < 50; ++t) {
    const auto es = oracle::random_embedding_set(rng, 8, 3, 3, true);
    expect_near(intra_class_similarity(es).values, oracle::intra_similarity(es), 1e-12);
  }
}

TEST(IntraSimilarity, UnequalCountsUsePerCategoryNormalizer) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const auto es = oracle::random_embedding_set(rng, 6, 4, 5);
    expect_near(intra_class_similarity(es).values, oracle::intra_similarity(es), 1e-12);
  }
}

// --- inter-class similarity (APE rule) ------------------------------------

TEST(InterSimilarity, OrthogonalCategoriesGiveZero) {
  const EmbeddingSet es(2, {"a", "b"}, {Matrix::from_rows({{1, 0}}), Matrix::from_rows({{0, 1}})});
  const auto s = inter_class_similarity(es);
  EXPECT_EQ(s.kind, ScoreKind::kInterSimilarity);
  expect_near(s.values, {0, 0}, 0);
}

TEST(InterSimilarity, DuplicateCategoriesGiveHalfTheSquare) {
  const EmbeddingSet es(2, {"a", "b"}, {Matrix::from_rows({{0.6, 0.8}}), Matrix::from_rows({{0.6, 0.8}})});
  expect_near(inter_class_similarity(es).values, {0.5 * 0.36, 0.5 * 0.64}, 1e-15);
  expect_near(inter_class_similarity(es, PairNormalization::kOrderedPairs).values, {0.36, 0.64}, 1e-15);
}

TEST(InterSimilarity, MatchesDoubleCategoryLoop) {
  Rng rng(202);
  for (int t = 0; t < 50; ++t) {
    const auto es = oracle::random_embedding_set(rng, 8, 3, 2, true);
    expect_near(inter_class_similarity(es).values, oracle::inter_similarity(es, false), 1e-12);
    expect_near(inter_class_similarity(es, PairNormalization::kOrderedPairs).values,
                oracle::inter_similarity(es, true), 1e-12);
  }
}

TEST(InterSimilarity, NeedsTwoCategories) {
  const EmbeddingSet es(2, {"a"}, {Matrix::from_rows({{1, 0}})});
  EXPECT_EQ(error_kind([&] { inter_class_similarity(es); }), ErrorKind::kValidation);
}

// --- variance --------------------------------------------------------------

TEST(InterVariance, TwoPointVariance) {
  const CategoryMeans t{{"a", "b"}, Matrix::from_rows({{1, 0}, {0, 1}})};
  const auto v = inter_class_variance(t);
  EXPECT_EQ(v.kind, ScoreKind::kInterVariance);
  expect_near(v.values, {0.25, 0.25}, 1e-15);
}

TEST(InterVariance, IdenticalRowsHaveZeroVariance) {
  const CategoryMeans t{{"a", "b", "c"}, Matrix::from_rows({{0.6, 0.8}, {0.6, 0.8}, {0.6, 0.8}})};
  expect_near(inter_class_variance(t).values, {0, 0}, 1e-15);
}

TEST(InterVariance, MatchesTwoPassOracle) {
  Rng rng(303);
  for (int t = 0; t < 50; ++t) {
    const auto es = oracle::random_embedding_set(rng, 8, 5, 1, true);
    const CategoryMeans means = category_means(es);
    expect_near(inter_class_variance(means).values, oracle::column_variance(means.means), 1e-12);
  }
  const CategoryMeans one{{"a"}, Matrix::from_rows({{1, 0}})};
  EXPECT_EQ(error_kind([&] { inter_class_variance(one); }), ErrorKind::kValidation);
}

// --- ranking and top-d -----------------------------------------------------

TEST(RankChannels, Arithmetic) {
  const auto v = scores(ScoreKind::kInterVariance, {0.25, 0.25, 0});
  const auto s = scores(ScoreKind::kIntraSimilarity, {0.1, 0.5, 0});
  const auto r = rank_channels(s, v, 0.7);
  EXPECT_EQ(r.kind, ScoreKind::kRanking);
  expect_near(r.values, {0.145, 0.025, 0}, 1e-15);
  EXPECT_EQ(rank_channels(s, v, 1.0).values, v.values);
  expect_near(rank_channels(s, v, 0.0).values, {-0.1, -0.5, 0}, 0);
}

TEST(RankChannels, RejectsWrongKindsAndLengths) {
  const auto v = scores(ScoreKind::kInterVariance, {0.25, 0.25});
  const auto s = scores(ScoreKind::kIntraSimilarity, {0.1});
  EXPECT_EQ(error_kind([&] { rank_channels(s, v, 0.7); }), ErrorKind::kValidation);
  EXPECT_EQ(error_kind([&] { rank_channels(v, v, 0.7); }), ErrorKind::kValidation);
}

TEST(SelectTopD, Examples) {
  const auto r = scores(ScoreKind::kRanking, {0.145, 0.025, 0});
  const auto sel = select_top_d(r, 2);
  EXPECT_EQ(sel.selected, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(sel.order, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(select_top_d(r, 3).selected, (std::vector<std::size_t>{0, 1, 2}));
  const auto ties = select_top_d(scores(ScoreKind::kRanking, {1, 1, 1, 1, 1}), 3);
  EXPECT_EQ(ties.selected, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(error_kind([&] { select_top_d(r, 0); }), ErrorKind::kValidation);
  EXPECT_EQ(error_kind([&] { select_top_d(r, 4); }), ErrorKind::kValidation);
}

TEST(SelectTopD, SelectedIsAscendingPrefixOfOrder) {
  const auto sel = select_top_d(scores(ScoreKind::kRanking, {0.1, 0.9, -0.2, 0.5, 0.9}), 3);
  EXPECT_EQ(sel.order, (std::vector<std::size_t>{1, 4, 3, 0, 2}));
  EXPECT_EQ(sel.selected, (std::vector<std::size_t>{1, 3, 4}));
  EXPECT_EQ(sel.with_d(1).selected, (std::vector<std::size_t>{1}));
}

// --- transforms ------------------------------------------------------------

SelectionResult selection_of(std::size_t dim, std::vector<std::size_t> chosen) {
  Vector r(dim, 0.0);
  for (auto c : chosen) r[c] = 1.0;
  return select_top_d(scores(ScoreKind::kRanking, r), chosen.size());
}

TEST(ApplySelection, Examples) {
  const Vector v{0.6, 0.8, 0, 0};
  EXPECT_EQ(apply_selection(v, selection_of(4, {0, 1}), true), (Vector{0.6, 0.8}));
  EXPECT_EQ(apply_selection(v, selection_of(4, {0, 1, 2, 3}), false), v);
  EXPECT_EQ(error_kind([] { apply_selection(Vector{1, 0, 0, 0}, selection_of(4, {2, 3}), true); }),
            ErrorKind::kValidation);
  EXPECT_EQ(error_kind([] { apply_selection(Vector{1, 0, 0}, selection_of(4, {2, 3}), false); }),
            ErrorKind::kValidation);
  const Vector r = apply_selection(Vector{3, 1, 4, 1}, selection_of(4, {0, 2}), true);
  expect_near(r, {0.6, 0.8}, 1e-15);
}

TEST(PoolReduce, Examples) {
  EXPECT_EQ(pool_reduce(Vector{1, 1, 2, 2, 3, 3, 4, 4}, 4), (Vector{1, 2, 3, 4}));
  const Vector v{1, 2, 3};
  EXPECT_EQ(pool_reduce(v, 3), v);
  EXPECT_EQ(error_kind([] { pool_reduce(Vector{1, 2, 3}, 2); }), ErrorKind::kValidation);
  Vector big(512);
  std::iota(big.begin(), big.end(), 0.0);
  const Vector pooled = pool_reduce(big, 64);
  ASSERT_EQ(pooled.size(), 64u);
  EXPECT_DOUBLE_EQ(pooled[0], 3.5);    // mean of 0..7
  EXPECT_DOUBLE_EQ(pooled[63], 507.5);  // mean of 504..511
}

TEST(RandomSelect, DeterministicAndComplete) {
  EXPECT_EQ(random_select(16, 16, 1).selected, random_select(16, 16, 99).selected);
  EXPECT_EQ(random_select(16, 16, 1).selected.size(), 16u);
  EXPECT_EQ(random_select(512, 64, 7).selected, random_select(512, 64, 7).selected);
  std::set<std::vector<std::size_t>> distinct;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto sel = random_select(512, 64, derive_seed(0, "selection.random." + std::to_string(s)));
    EXPECT_TRUE(std::is_sorted(sel.selected.begin(), sel.selected.end()));
    EXPECT_EQ(std::set<std::size_t>(sel.selected.begin(), sel.selected.end()).size(), 64u);
    distinct.insert(sel.selected);
  }
  EXPECT_EQ(distinct.size(), 20u);
  EXPECT_EQ(error_kind([] { random_select(4, 5, 0); }), ErrorKind::kValidation);
}

TEST(RandomSelect, RoughlyUniform) {
  std::vector<int> hits(32, 0);
  for (std::uint64_t s = 0; s < 4000; ++s)
    for (auto c : random_select(32, 8, s).selected) ++hits[c];
  // Expected 1000 per channel; binomial sd ~27.
  for (int h : hits) EXPECT_NEAR(h, 1000, 150);
}

// --- dispatch --------------------------------------------------------------

TEST(Select, Dispatch) {
  Rng rng(9);
  const auto es = oracle::random_embedding_set(rng, 12, 4, 3);
  SelectionConfig cfg;
  cfg.d = 5;
  cfg.method = SelectionMethod::kRandom;
  cfg.seed = 0;
  EXPECT_EQ(select(es, cfg).selected, random_select(12, 5, 0).selected);
  cfg.method = SelectionMethod::kPool;
  EXPECT_EQ(error_kind([&] { select(es, cfg); }), ErrorKind::kValidation);
  cfg.method = SelectionMethod::kSignificance;
  cfg.d = 13;
  EXPECT_EQ(error_kind([&] { select(es, cfg); }), ErrorKind::kValidation);
  cfg.d = 4;
  cfg.lambda = 1.5;
  EXPECT_EQ(error_kind([&] { select(es, cfg); }), ErrorKind::kValidation);
}

// Channel 0 carries the same weak signal in both categories; channels 1 and
// 2 each carry a strong signal for one category. With lambda=0 the intra-class
// rule prefers the weakest within-category agreement (channel 0: 0.25 vs
// 0.375) while the APE rule prefers channels with no cross-category terms.
TEST(Select, PaperAndApeRankDifferently) {
  const double y = std::sqrt(0.75);
  const EmbeddingSet es(3, {"a", "b"},
                        {Matrix::from_rows({{0.5, y, 0.0}, {0.5, y, 0.0}}),
                         Matrix::from_rows({{0.5, 0.0, y}, {0.5, 0.0, y}})});
  SelectionConfig cfg;
  cfg.lambda = 0.0;
  cfg.d = 1;
  const auto paper = select(es, cfg);
  cfg.method = SelectionMethod::kApe;
  const auto ape = select(es, cfg);
  EXPECT_NE(paper.order, ape.order);
  EXPECT_EQ(paper.order, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(ape.order, (std::vector<std::size_t>{1, 2, 0}));
}

TEST(Select, CategoryPermutationInvariance) {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto es = oracle::random_embedding_set(rng, 10, 5, 4);
    std::vector<std::string> names(es.names().rbegin(), es.names().rend());
    std::vector<Matrix> blocks(es.blocks().rbegin(), es.blocks().rend());
    const EmbeddingSet rev(es.dim(), names, blocks);
    SelectionConfig cfg;
    cfg.d = 4;
    const auto a = select(es, cfg);
    const auto b = select(rev, cfg);
    expect_near(a.similarity->values, b.similarity->values, 1e-12);
    expect_near(a.variance->values, b.variance->values, 1e-12);
    EXPECT_EQ(a.selected, b.selected);
  }
}

TEST(Select, DescriptionPermutationInvariance) {
  Rng rng(8);
  const auto es = oracle::random_embedding_set(rng, 10, 3, 4, true);
  std::vector<Matrix> blocks;
  for (const auto& b : es.blocks()) {
    Matrix r(b.rows(), b.cols());
    for (std::size_t i = 0; i < b.rows(); ++i)
      for (std::size_t c = 0; c < b.cols(); ++c) r(i, c) = b(b.rows() - 1 - i, c);
    blocks.push_back(r);
  }
  const EmbeddingSet shuffled(es.dim(), es.names(), blocks);
  expect_near(intra_class_similarity(es).values, intra_class_similarity(shuffled).values, 1e-15);
}

// Summing S over channels gives the mean pairwise cosine (self-pairs
// included) over all categories.
TEST(Select, ScoreSumIsMeanPairwiseCosine) {
  Rng rng(12);
  for (int t = 0; t < 20; ++t) {
    const auto es = oracle::random_embedding_set(rng, 16, 4, 4);
    const auto s = intra_class_similarity(es).values;
    double expected = 0.0;
    for (const auto& b : es.blocks()) {
      double acc = 0.0;
      for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) acc += dot(b.row(i), b.row(j));
      expected += acc / static_cast<double>(b.rows() * b.rows());
    }
    expected /= static_cast<double>(es.num_categories());
    EXPECT_NEAR(std::accumulate(s.begin(), s.end(), 0.0), expected, 1e-9);
  }
}

// --- ranking file ------------------------------------------------------------

TEST(RankingFile, RoundTripAndDigest) {
  Rng rng(21);
  const auto es = oracle::random_embedding_set(rng, 12, 4, 3);
  SelectionConfig cfg;
  cfg.d = 5;
  const auto sel = select(es, cfg);
  const std::string text = serialize_ranking(sel);
  const auto back = parse_ranking(text);
  EXPECT_EQ(back.order, sel.order);
  EXPECT_EQ(back.selected, sel.selected);
  EXPECT_EQ(serialize_ranking(back), text);
  EXPECT_EQ(ranking_digest(back), ranking_digest(sel));
  EXPECT_NE(ranking_digest(sel.with_d(4)), ranking_digest(sel));
}

TEST(RankingFile, RejectsInconsistentFiles) {
  const auto sel = select_top_d(scores(ScoreKind::kRanking, {3, 2, 1}), 2);
  std::string text = serialize_ranking(sel);
  std::string broken = text;
  broken.replace(broken.find("\"order\""), 7, "\"ordr\"");
  EXPECT_EQ(error_kind([&] { parse_ranking(broken); }), ErrorKind::kValidation);
}

TEST(RankingFile, FixtureGoldenMatchesRecomputation) {
  const Corpus corpus = load_corpus(fixture("corpus.json"));
  const EmbeddingSet es = load_embeddings(fixture("embeddings.json"), corpus);
  SelectionConfig cfg;  // paper, lambda 0.7, d 64
  const auto sel = select(es, cfg);
  EXPECT_EQ(serialize_ranking(sel), read_text_file(fixture("ranking_paper_d64.json")));

  // The golden file's scores agree with the brute-force definitions.
  const auto golden = load_ranking(fixture("ranking_paper_d64.json"));
  const Vector s = oracle::intra_similarity(es);
  const Vector v = oracle::column_variance(oracle::category_means(es));
  for (std::size_t c = 0; c < es.dim(); ++c) {
    EXPECT_NEAR(golden.similarity->values[c], s[c], 1e-12);
    EXPECT_NEAR(golden.variance->values[c], v[c], 1e-12);
    EXPECT_NEAR(golden.ranking->values[c], 0.7 * v[c] - 0.3 * s[c], 1e-12);
  }
}

}  // namespace
}  // namespace langsup
