#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "langsup/corpus.hpp"
#include "langsup/numeric.hpp"

namespace langsup {

enum class ScoreKind { kIntraSimilarity, kInterSimilarity, kInterVariance, kRanking };

std::string_view to_string(ScoreKind kind) noexcept;

// One value per embedding channel.
struct ChannelScores {
  ScoreKind kind;
  Vector values;

  std::size_t size() const noexcept { return values.size(); }
};

enum class SelectionMethod {
  kSignificance,  // "paper": intra-class similarity + inter-class variance
  kApe,           // inter-class similarity + inter-class variance
  kRandom,        // seeded uniform sample
  kPool,          // average pooling; a transform, not an index selection
};

std::string_view to_string(SelectionMethod m) noexcept;
std::optional<SelectionMethod> parse_selection_method(std::string_view s) noexcept;

// Divisor of the APE inter-class sum over m(m-1) ordered category pairs.
enum class PairNormalization {
  kSquared,       // 1/m^2, as printed
  kOrderedPairs,  // 1/(m(m-1))
};

struct SelectionConfig {
  SelectionMethod method = SelectionMethod::kSignificance;
  double lambda = 0.7;
  std::size_t d = 64;
  bool renormalize = true;
  std::uint64_t seed = 0;  // kRandom only
  PairNormalization ape_pair_normalization = PairNormalization::kSquared;

  // Throws a validation error unless 1 <= d <= dim and lambda is in [0, 1].
  void check(std::size_t dim) const;
};

/// Outcome of ranking D channels and keeping d of them.
struct SelectionResult {
  std::size_t dim = 0;
  std::vector<std::size_t> order;     // all channels, descending score, ties by index
  std::vector<std::size_t> selected;  // first d of `order`, ascending
  std::optional<ChannelScores> similarity;
  std::optional<ChannelScores> variance;
  std::optional<ChannelScores> ranking;
  SelectionConfig config;

  std::size_t d() const noexcept { return selected.size(); }
  // Same ranking truncated to a different d; order and scores are reused.
  SelectionResult with_d(std::size_t d) const;
};

// S = (1/m) sum_n (1/s_n^2) sum_i sum_j t_n^i (.) t_n^j, self-pairs included.
ChannelScores intra_class_similarity(const EmbeddingSet& es);

// S_inter = c * sum_{n1 != n2} (1/(s_n1 s_n2)) sum_i sum_j t_n1^i (.) t_n2^j,
// with c = 1/m^2 or 1/(m(m-1)). Needs m >= 2.
ChannelScores inter_class_similarity(const EmbeddingSet& es,
                                     PairNormalization norm = PairNormalization::kSquared);

// Population variance (divide by m) of every column of T. Needs m >= 2.
ChannelScores inter_class_variance(const CategoryMeans& means);

// R = lambda * V - (1 - lambda) * S.
ChannelScores rank_channels(const ChannelScores& similarity, const ChannelScores& variance,
                            double lambda);

SelectionResult select_top_d(const ChannelScores& ranking, std::size_t d);

// Gathers the selected channels in ascending index order. With
// `renormalize`, the result is rescaled to unit norm; a zero result is a
// validation error.
Vector apply_selection(std::span<const double> v, const SelectionResult& sel, bool renormalize);
Matrix apply_selection(const Matrix& rows, const SelectionResult& sel, bool renormalize);
EmbeddingSet apply_selection(const EmbeddingSet& es, const SelectionResult& sel, bool renormalize);
CategoryMeans apply_selection(const CategoryMeans& means, const SelectionResult& sel, bool renormalize);

// Averages contiguous groups of D/d channels. d must divide D.
Vector pool_reduce(std::span<const double> v, std::size_t d);
Matrix pool_reduce(const Matrix& rows, std::size_t d, bool renormalize);
EmbeddingSet pool_reduce(const EmbeddingSet& es, std::size_t d, bool renormalize);
CategoryMeans pool_reduce(const CategoryMeans& means, std::size_t d, bool renormalize);

/// Uniform sample of d channels without replacement: a Fisher-Yates
/// shuffle of [0, D) driven by Rng(seed) (std::mt19937_64 with rejection
/// sampling), keeping the first d.
SelectionResult random_select(std::size_t dim, std::size_t d, std::uint64_t seed);

// Dispatch on config.method. kPool is rejected: pooling has no index set.
SelectionResult select(const EmbeddingSet& es, const SelectionConfig& config);

// Ranking file: D, d, method, lambda, order[], selected[], scores{S,V,R}.
std::string serialize_ranking(const SelectionResult& sel);
SelectionResult parse_ranking(std::string_view text, std::string_view origin = "<memory>");
void save_ranking(const SelectionResult& sel, const std::filesystem::path& path);
SelectionResult load_ranking(const std::filesystem::path& path);

// sha256 of the serialized ranking; ties trained projectors to a selection.
std::string ranking_digest(const SelectionResult& sel);

}  // namespace langsup
