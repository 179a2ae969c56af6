#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "langsup/corpus.hpp"
#include "langsup/numeric.hpp"
#include "langsup/selection.hpp"

namespace langsup {

/// Cosine similarity between every pair of category means.
struct SimilarityMatrix {
  std::vector<std::string> names;
  Matrix values;  // m x m

  // Mean over the m(m-1) off-diagonal entries.
  double mean_off_diagonal() const;
};

SimilarityMatrix similarity_matrix(const CategoryMeans& means);

struct CategoryPair {
  std::size_t a;
  std::size_t b;
  double similarity;
};

// Unordered pairs a < b sorted by descending similarity (ties: ascending
// (a, b)).
std::vector<CategoryPair> ranked_pairs(const SimilarityMatrix& sim);

struct EigenDecomposition {
  Vector values;   // descending
  Matrix vectors;  // column k pairs with values[k]
  int sweeps = 0;
};

/// Cyclic Jacobi rotations on a symmetric matrix: row-major sweep order
/// over (p, q) with p < q, stopping when the off-diagonal Frobenius norm
/// falls below `tolerance`.
EigenDecomposition jacobi_eigen(const Matrix& symmetric, double tolerance = 1e-12, int max_sweeps = 100);

struct PcaProjection {
  Vector mean;
  Matrix components;   // k x d, orthonormal rows; largest-magnitude entry positive
  Matrix coordinates;  // N x k
  Vector explained_variance_ratio;
  bool degenerate = false;  // zero total variance
};

PcaProjection pca_project(const Matrix& x, std::size_t k);

// Classifies every held-out row against the category means (both reduced
// by `selection` when given, then renormalized) and returns the fraction
// assigned to their own category.
double retrieval_eval(const EmbeddingSet& holdout, const CategoryMeans& means,
                      const std::optional<SelectionResult>& selection = std::nullopt);

struct ToyMetrics {
  double accuracy = 0.0;             // overall (allAcc)
  double mean_class_accuracy = 0.0;  // macro recall over classes present in truth (mAcc)
  double toy_miou = 0.0;             // over classes present in pred or truth
  std::vector<std::optional<double>> class_iou;  // nullopt when absent from both
  Matrix confusion;                  // truth x pred counts
};

ToyMetrics toy_metrics(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth,
                       std::size_t num_classes);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct LabeledPca {
  std::vector<std::string> labels;  // one per coordinate row
  PcaProjection pca;
};

/// Everything one analysis run produces. Files are written by emit_report.
struct ExperimentReport {
  std::string run_id;
  std::string timestamp;  // excluded from determinism comparisons
  std::map<std::string, std::string> digests;
  std::map<std::string, double> metrics;
  std::map<std::string, SimilarityMatrix> matrices;
  std::map<std::string, LabeledPca> projections;
  std::map<std::string, Table> tables;
  std::vector<std::string> artifacts;  // filled by emit_report, relative to out_dir
};

// Writes report.json plus one CSV per matrix (`matrix_<name>.csv`), PCA
// (`pca_<name>.csv`) and table (`table_<name>.csv`). Numbers use 9
// significant digits, LF line endings.
void emit_report(ExperimentReport& report, const std::filesystem::path& out_dir);

}  // namespace langsup
