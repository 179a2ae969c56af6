#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <set>

#include "json.hpp"
#include "langsup/analysis.hpp"
#include "langsup/io.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace langsup {
namespace {

using testing::error_kind;
using testing::fixture;

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
  return e;
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& x : m.data()) x = rng.normal();
  return m;
}

// --- similarity matrices ---------------------------------------------------

TEST(SimilarityMatrix, OrthonormalMeansGiveIdentity) {
  const CategoryMeans t{{"a", "b", "c"}, Matrix::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}})};
  const auto s = similarity_matrix(t);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(s.values(i, j), i == j ? 1.0 : 0.0);
  EXPECT_EQ(s.mean_off_diagonal(), 0.0);
}

TEST(SimilarityMatrix, DuplicateMeansGiveOne) {
  const CategoryMeans t{{"a", "b", "c"}, Matrix::from_rows({{0.6, 0.8}, {0.6, 0.8}, {1, 0}})};
  const auto s = similarity_matrix(t);
  EXPECT_NEAR(s.values(0, 1), 1.0, 1e-15);
  EXPECT_NEAR(s.values(0, 2), 0.6, 1e-15);
  const auto pairs = ranked_pairs(s);
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_EQ(pairs[0].a, 0u);
  EXPECT_EQ(pairs[0].b, 1u);
  EXPECT_EQ(pairs[1].b, 2u);
}

TEST(SimilarityMatrix, SymmetricWithUnitDiagonal) {
  Rng rng(4);
  const auto es = oracle::random_embedding_set(rng, 12, 6, 3);
  const auto s = similarity_matrix(category_means(es));
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_NEAR(s.values(i, i), 1.0, 1e-12);
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(s.values(i, j), s.values(j, i));
  }
}

// --- eigen-solve and PCA -----------------------------------------------------

TEST(Jacobi, MatchesEigenOnRandomSymmetricMatrices) {
  Rng rng(8);
  for (std::size_t n : {1u, 2u, 5u, 12u, 30u}) {
    const Matrix a = random_matrix(rng, n, n);
    Matrix sym(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) sym(i, j) = a(i, j) + a(j, i);
    const auto eig = jacobi_eigen(sym);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(to_eigen(sym));
    for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(eig.values[k], ref.eigenvalues()(n - 1 - k), 1e-9);
    // A v = lambda v for every returned pair.
    const Eigen::MatrixXd v = to_eigen(eig.vectors);
    const Eigen::MatrixXd resid = to_eigen(sym) * v - v * Eigen::VectorXd::Map(eig.values.data(), n).asDiagonal();
    EXPECT_LT(resid.norm(), 1e-9);
    EXPECT_LT((v.transpose() * v - Eigen::MatrixXd::Identity(n, n)).norm(), 1e-10);
  }
}

TEST(Pca, LineYEqualsX) {
  const Matrix x = Matrix::from_rows({{0, 0}, {1, 1}, {2, 2}, {3, 3}});
  const auto p = pca_project(x, 2);
  EXPECT_NEAR(p.components(0, 0), std::sqrt(2.0) / 2, 1e-12);
  EXPECT_NEAR(p.components(0, 1), std::sqrt(2.0) / 2, 1e-12);
  EXPECT_NEAR(p.explained_variance_ratio[0], 1.0, 1e-12);
  EXPECT_NEAR(p.explained_variance_ratio[1], 0.0, 1e-12);
  EXPECT_FALSE(p.degenerate);
}

TEST(Pca, SquareCornersSplitVarianceEvenly) {
  const auto p = pca_project(Matrix::from_rows({{0, 0}, {1, 0}, {0, 1}, {1, 1}}), 2);
  EXPECT_NEAR(p.explained_variance_ratio[0], 0.5, 1e-12);
  EXPECT_NEAR(p.explained_variance_ratio[1], 0.5, 1e-12);
}

TEST(Pca, ZeroVarianceIsFlagged) {
  const auto p = pca_project(Matrix::from_rows({{1, 2}, {1, 2}, {1, 2}}), 1);
  EXPECT_TRUE(p.degenerate);
  EXPECT_EQ(p.explained_variance_ratio[0], 0.0);
  EXPECT_EQ(p.coordinates(0, 0), 0.0);
  EXPECT_EQ(error_kind([] { pca_project(Matrix::from_rows({{1, 2}, {3, 4}}), 3); }), ErrorKind::kValidation);
  EXPECT_EQ(error_kind([] { pca_project(Matrix::from_rows({{1, 2}}), 1); }), ErrorKind::kValidation);
}

// Reconstruction error from the top-k components against an Eigen
// decomposition of the same covariance.
double eigen_reconstruction_error(const Matrix& x, std::size_t k) {
  Eigen::MatrixXd e = to_eigen(x);
  const Eigen::RowVectorXd mean = e.colwise().mean();
  e.rowwise() -= mean;
  const Eigen::MatrixXd cov = e.transpose() * e / static_cast<double>(x.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::MatrixXd w = solver.eigenvectors().rightCols(static_cast<Eigen::Index>(k));
  return (e - e * w * w.transpose()).norm();
}

double our_reconstruction_error(const Matrix& x, const PcaProjection& p) {
  double s = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) {
      double rec = p.mean[c];
      for (std::size_t j = 0; j < p.components.rows(); ++j) rec += p.coordinates(r, j) * p.components(j, c);
      s += (x(r, c) - rec) * (x(r, c) - rec);
    }
  return std::sqrt(s);
}

TEST(Pca, ReconstructionMatchesEigenOracle) {
  Rng rng(15);
  for (int t = 0; t < 10; ++t) {
    const Matrix x = random_matrix(rng, 50, 8);
    const auto p = pca_project(x, 3);
    EXPECT_NEAR(our_reconstruction_error(x, p), eigen_reconstruction_error(x, 3), 1e-8);
  }
}

TEST(Pca, WideDataUsesSameSubspace) {
  Rng rng(16);
  const Matrix x = random_matrix(rng, 12, 40);  // fewer points than dimensions
  const auto p = pca_project(x, 4);
  EXPECT_NEAR(our_reconstruction_error(x, p), eigen_reconstruction_error(x, 4), 1e-8);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b)
      EXPECT_NEAR(dot(p.components.row(a), p.components.row(b)), a == b ? 1.0 : 0.0, 1e-10);
}

TEST(Pca, FullRankProperties) {
  Rng rng(17);
  const Matrix x = random_matrix(rng, 30, 6);
  const auto p = pca_project(x, 6);
  EXPECT_LT(our_reconstruction_error(x, p), 1e-8);
  double total = 0.0;
  for (double r : p.explained_variance_ratio) total += r;
  EXPECT_NEAR(total, 1.0, 1e-9);
  for (std::size_t j = 0; j < 6; ++j) {
    auto comp = p.components.row(j);
    std::size_t arg = 0;
    for (std::size_t c = 0; c < 6; ++c)
      if (std::abs(comp[c]) > std::abs(comp[arg])) arg = c;
    EXPECT_GT(comp[arg], 0.0);
  }
}

// --- retrieval ---------------------------------------------------------------

TEST(Retrieval, FixtureSelfRetrievalIsPerfect) {
  const Corpus corpus = load_corpus(fixture("corpus.json"));
  const EmbeddingSet es = load_embeddings(fixture("embeddings.json"), corpus);
  const CategoryMeans means = category_means(es);
  EXPECT_EQ(retrieval_eval(es, means), 1.0);
  const auto all = random_select(es.dim(), es.dim(), 0);
  EXPECT_EQ(retrieval_eval(es, means, all), retrieval_eval(es, means));
}

TEST(Retrieval, RejectsMisalignedInputs) {
  const EmbeddingSet es(2, {"a", "b"}, {Matrix::from_rows({{1, 0}}), Matrix::from_rows({{0, 1}})});
  const CategoryMeans wrong{{"b", "a"}, Matrix::from_rows({{0, 1}, {1, 0}})};
  EXPECT_EQ(error_kind([&] { retrieval_eval(es, wrong); }), ErrorKind::kValidation);
  EXPECT_EQ(retrieval_eval(es, category_means(es)), 1.0);
}

// --- toy metrics -------------------------------------------------------------

TEST(ToyMetrics, PerfectPrediction) {
  const std::vector<std::size_t> y{0, 1, 2, 2, 1};
  const auto m = toy_metrics(y, y, 3);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.mean_class_accuracy, 1.0);
  EXPECT_EQ(m.toy_miou, 1.0);
}

TEST(ToyMetrics, HandCountedBinaryCase) {
  const auto m = toy_metrics({0, 0, 1, 1}, {0, 1, 0, 1}, 2);
  EXPECT_EQ(m.accuracy, 0.5);
  EXPECT_NEAR(*m.class_iou[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(*m.class_iou[1], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.toy_miou, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(m.confusion(0, 0), 1.0);
  EXPECT_EQ(m.confusion(1, 0), 1.0);
}

TEST(ToyMetrics, AbsentClassesAreSkipped) {
  const auto m = toy_metrics({0, 1}, {0, 1}, 4);
  EXPECT_FALSE(m.class_iou[3].has_value());
  EXPECT_EQ(m.toy_miou, 1.0);
}

TEST(ToyMetrics, MatchesSetOracle) {
  Rng rng(23);
  for (int t = 0; t < 5; ++t) {
    const std::size_t k = 5, n = 1000;
    std::vector<std::size_t> pred(n), truth(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = rng.uniform_index(k);
      pred[i] = rng.uniform01() < 0.6 ? truth[i] : rng.uniform_index(k);
    }
    const auto m = toy_metrics(pred, truth, k);
    double iou_sum = 0.0, recall_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += pred[i] == truth[i];
    for (std::size_t c = 0; c < k; ++c) {
      std::set<std::size_t> p, g;
      for (std::size_t i = 0; i < n; ++i) {
        if (pred[i] == c) p.insert(i);
        if (truth[i] == c) g.insert(i);
      }
      std::set<std::size_t> inter, uni = p;
      for (auto i : g) (p.count(i) ? inter : uni).insert(i);
      for (auto i : inter) uni.insert(i);
      const double iou = static_cast<double>(inter.size()) / static_cast<double>(uni.size());
      EXPECT_NEAR(*m.class_iou[c], iou, 1e-12);
      EXPECT_GE(iou, 0.0);
      EXPECT_LE(iou, 1.0);
      iou_sum += iou;
      recall_sum += static_cast<double>(inter.size()) / static_cast<double>(g.size());
    }
    EXPECT_NEAR(m.accuracy, static_cast<double>(correct) / n, 1e-12);
    EXPECT_NEAR(m.toy_miou, iou_sum / k, 1e-12);
    EXPECT_NEAR(m.mean_class_accuracy, recall_sum / k, 1e-12);
  }
}

// --- report emission ---------------------------------------------------------

ExperimentReport sample_report() {
  ExperimentReport r;
  r.run_id = "run-1";
  r.timestamp = "2020-01-01T00:00:00Z";
  r.metrics["accuracy"] = 0.75;
  r.digests["selection"] = "abc";
  const CategoryMeans t{{"chair", "shower curtain", "a,b"}, Matrix::from_rows({{1, 0}, {0.6, 0.8}, {0, 1}})};
  r.matrices["before"] = similarity_matrix(t);
  r.projections["points"] = {{"x", "y", "z"}, pca_project(t.means, 1)};
  r.tables["ablation"] = Table{{"method", "accuracy"}, {{"paper", "1"}, {"random", "0.5"}}};
  return r;
}

TEST(Report, EmitsOneFilePerArtifact) {
  const auto dir = testing::scratch_dir("report");
  auto r = sample_report();
  emit_report(r, dir);
  const std::string matrix = read_text_file(dir / "matrix_before.csv");
  EXPECT_EQ(matrix.substr(0, matrix.find('\n')), "chair,shower curtain,\"a,b\"");
  EXPECT_EQ(std::count(matrix.begin(), matrix.end(), '\n'), 4);
  EXPECT_EQ(matrix.find('\r'), std::string::npos);
  EXPECT_NE(matrix.find("0.6,1,0.8"), std::string::npos) << matrix;
  EXPECT_EQ(read_text_file(dir / "pca_points.csv").substr(0, 9), "label,pc1");
  EXPECT_EQ(read_text_file(dir / "table_ablation.csv"), "method,accuracy\npaper,1\nrandom,0.5\n");
  const auto doc = nlohmann::json::parse(read_text_file(dir / "report.json"));
  EXPECT_EQ(doc["run_id"], "run-1");
  EXPECT_EQ(doc["timestamp"], "2020-01-01T00:00:00Z");
  EXPECT_EQ(doc["metrics"]["accuracy"], 0.75);
  EXPECT_EQ(doc["matrices"]["before"]["file"], "matrix_before.csv");
}

TEST(Report, IdenticalReportsAreByteIdentical) {
  const auto a = testing::scratch_dir("report_a");
  const auto b = testing::scratch_dir("report_b");
  auto r1 = sample_report();
  auto r2 = sample_report();
  emit_report(r1, a);
  emit_report(r2, b);
  for (const auto& f : r1.artifacts) EXPECT_EQ(read_text_file(a / f), read_text_file(b / f)) << f;
}

}  // namespace
}  // namespace langsup
