#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "langsup/numeric.hpp"

namespace langsup {

// Where a description came from.
enum class SourceTag { kTemplate, kSynonym, kGenerated, kCustom };

std::string_view to_string(SourceTag tag) noexcept;
std::optional<SourceTag> parse_source_tag(std::string_view s) noexcept;

struct CategoryEntry {
  std::string name;
  std::vector<std::string> descriptions;
  std::vector<SourceTag> source_tags;  // parallel to descriptions

  friend bool operator==(const CategoryEntry&, const CategoryEntry&) = default;
};

inline constexpr int kCorpusSchemaVersion = 1;

/// The supervision vocabulary: categories, each with its enriched
/// descriptions, in a fixed order that embedding files align with.
struct Corpus {
  int schema_version = kCorpusSchemaVersion;
  std::vector<CategoryEntry> categories;

  std::size_t size() const noexcept { return categories.size(); }
  std::vector<std::string> names() const;
  const CategoryEntry* find(std::string_view name) const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

// Throws a validation error for duplicate or empty names, a category with
// no descriptions, repeated descriptions within a category, or a tag list
// whose length differs from the description list. An empty category list
// is accepted here (see save_corpus).
void check_corpus(const Corpus& corpus);

Corpus load_corpus(const std::filesystem::path& path);
Corpus parse_corpus(std::string_view text, std::string_view origin = "<memory>");

// Canonical form: sorted keys, two-space indent, trailing newline. Rejects
// an empty category list.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
std::string serialize_corpus(const Corpus& corpus);

/// Per-category description embeddings. Block n is an s_n x D matrix whose
/// rows align with the descriptions of category n.
///
/// The constructor checks shape only. Rows are unit-norm when the set came
/// from load_embeddings or normalized(); validate() reports otherwise.
class EmbeddingSet {
 public:
  EmbeddingSet(std::size_t dim, std::vector<std::string> names, std::vector<Matrix> blocks);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t num_categories() const noexcept { return blocks_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const Matrix& block(std::size_t n) const { return blocks_.at(n); }
  const std::vector<Matrix>& blocks() const noexcept { return blocks_; }
  std::size_t total_rows() const noexcept;

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;

 private:
  std::size_t dim_;
  std::vector<std::string> names_;
  std::vector<Matrix> blocks_;
};

// Copy with every row scaled to unit L2 norm. Zero or non-finite rows are
// a validation error.
EmbeddingSet normalized(const EmbeddingSet& es);

// Splits each category into (first s_n - k rows, last k rows). Every
// category must keep at least one row on each side.
std::pair<EmbeddingSet, EmbeddingSet> split_holdout(const EmbeddingSet& es, std::size_t k);

enum class EmbeddingDtype { kF32, kF64 };

// Reads an embedding file, checks it against the corpus (category order,
// per-category row counts), rejects non-finite values and ragged rows, and
// L2-normalizes every row.
EmbeddingSet load_embeddings(const std::filesystem::path& path, const Corpus& corpus);
EmbeddingSet parse_embeddings(std::string_view text, const Corpus& corpus,
                              std::string_view origin = "<memory>");

// Writes rows as stored (no normalization). f32 files carry values rounded
// to single precision.
void save_embeddings(const EmbeddingSet& es, const std::filesystem::path& path,
                     EmbeddingDtype dtype = EmbeddingDtype::kF32,
                     const std::map<std::string, std::string>& metadata = {});
std::string serialize_embeddings(const EmbeddingSet& es, EmbeddingDtype dtype,
                                 const std::map<std::string, std::string>& metadata = {});

/// Matrix T: row n is the renormalized mean of category n's embeddings.
struct CategoryMeans {
  std::vector<std::string> names;
  Matrix means;

  std::size_t size() const noexcept { return means.rows(); }
  std::size_t dim() const noexcept { return means.cols(); }
};

// Pairwise-summed mean per category, rescaled to unit norm. A zero mean is
// a validation error naming the category.
CategoryMeans category_means(const EmbeddingSet& es);

enum class ViolationKind { kNorm, kCount, kNonFinite, kName };

struct Violation {
  ViolationKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
};

// Collects every problem instead of stopping at the first one.
ValidationReport validate(const EmbeddingSet& es, const Corpus& corpus,
                          double norm_tolerance = 1e-6);

}  // namespace langsup
