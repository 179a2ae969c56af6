#include "langsup/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json_util.hpp"
#include "langsup/error.hpp"
#include "langsup/io.hpp"
#include "langsup/rng.hpp"

namespace langsup {

using detail::json;

std::string_view to_string(ScoreKind kind) noexcept {
  switch (kind) {
    case ScoreKind::kIntraSimilarity:
      return "intra_similarity";
    case ScoreKind::kInterSimilarity:
      return "inter_similarity";
    case ScoreKind::kInterVariance:
      return "inter_variance";
    case ScoreKind::kRanking:
      break;
  }
  return "ranking";
}

std::string_view to_string(SelectionMethod m) noexcept {
  switch (m) {
    case SelectionMethod::kSignificance:
      return "paper";
    case SelectionMethod::kApe:
      return "ape";
    case SelectionMethod::kRandom:
      return "random";
    case SelectionMethod::kPool:
      break;
  }
  return "pool";
}

std::optional<SelectionMethod> parse_selection_method(std::string_view s) noexcept {
  if (s == "paper") return SelectionMethod::kSignificance;
  if (s == "ape") return SelectionMethod::kApe;
  if (s == "random") return SelectionMethod::kRandom;
  if (s == "pool") return SelectionMethod::kPool;
  return std::nullopt;
}

void SelectionConfig::check(std::size_t dim) const {
  if (d < 1 || d > dim)
    throw_validation("d=" + std::to_string(d) + " is out of range [1, " + std::to_string(dim) + "]");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw_validation("lambda=" + format_g9(lambda) + " is outside [0, 1]");
}

SelectionResult SelectionResult::with_d(std::size_t new_d) const {
  if (new_d < 1 || new_d > dim)
    throw_validation("d=" + std::to_string(new_d) + " is out of range [1, " + std::to_string(dim) + "]");
  SelectionResult out = *this;
  out.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(new_d));
  std::sort(out.selected.begin(), out.selected.end());
  out.config.d = new_d;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Column means of each category block (unnormalized): mu_n = (1/s_n) sum_i t_n^i.
Matrix block_means(const EmbeddingSet& es) {
  Matrix mu(es.num_categories(), es.dim());
  for (std::size_t n = 0; n < es.num_categories(); ++n) {
    const Vector sum = pairwise_column_sum(es.block(n));
    const double s = static_cast<double>(es.block(n).rows());
    for (std::size_t c = 0; c < es.dim(); ++c) mu(n, c) = sum[c] / s;
  }
  return mu;
}

void require_categories(std::size_t m, std::string_view what) {
  if (m < 2)
    throw_validation(std::string(what) + " needs at least 2 categories, got " + std::to_string(m));
}

}  // namespace

ChannelScores intra_class_similarity(const EmbeddingSet& es) {
  // sum_i sum_j t^i (.) t^j == (sum_i t^i) (.) (sum_j t^j), so each category
  // contributes the square of its unnormalized mean.
  const Matrix mu = block_means(es);
  const std::size_t m = es.num_categories();
  Matrix sq(m, es.dim());
  for (std::size_t n = 0; n < m; ++n)
    for (std::size_t c = 0; c < es.dim(); ++c) sq(n, c) = mu(n, c) * mu(n, c);
  Vector s = pairwise_column_sum(sq);
  for (double& x : s) x /= static_cast<double>(m);
  return {ScoreKind::kIntraSimilarity, std::move(s)};
}

ChannelScores inter_class_similarity(const EmbeddingSet& es, PairNormalization norm) {
  const std::size_t m = es.num_categories();
  require_categories(m, "inter-class similarity");
  // sum_{n1 != n2} mu_n1 (.) mu_n2 == (sum_n mu_n)^2 - sum_n mu_n^2.
  const Matrix mu = block_means(es);
  Matrix sq(m, es.dim());
  for (std::size_t n = 0; n < m; ++n)
    for (std::size_t c = 0; c < es.dim(); ++c) sq(n, c) = mu(n, c) * mu(n, c);
  const Vector total = pairwise_column_sum(mu);
  const Vector total_sq = pairwise_column_sum(sq);
  const double md = static_cast<double>(m);
  const double scale = norm == PairNormalization::kSquared ? 1.0 / (md * md) : 1.0 / (md * (md - 1.0));
  Vector out(es.dim());
  for (std::size_t c = 0; c < es.dim(); ++c) out[c] = scale * (total[c] * total[c] - total_sq[c]);
  return {ScoreKind::kInterSimilarity, std::move(out)};
}

ChannelScores inter_class_variance(const CategoryMeans& means) {
  const std::size_t m = means.size();
  require_categories(m, "inter-class variance");
  const double md = static_cast<double>(m);
  const Vector sum = pairwise_column_sum(means.means);
  Matrix dev(m, means.dim());
  for (std::size_t n = 0; n < m; ++n) {
    for (std::size_t c = 0; c < means.dim(); ++c) {
      const double d = means.means(n, c) - sum[c] / md;
      dev(n, c) = d * d;
    }
  }
  Vector var = pairwise_column_sum(dev);
  for (double& x : var) x /= md;
  return {ScoreKind::kInterVariance, std::move(var)};
}

ChannelScores rank_channels(const ChannelScores& similarity, const ChannelScores& variance, double lambda) {
  if (similarity.size() != variance.size())
    throw_validation("score length mismatch: " + std::to_string(similarity.size()) + " vs " +
                     std::to_string(variance.size()));
  if (similarity.kind != ScoreKind::kIntraSimilarity && similarity.kind != ScoreKind::kInterSimilarity)
    throw_validation("rank_channels: first argument must be a similarity score");
  if (variance.kind != ScoreKind::kInterVariance)
    throw_validation("rank_channels: second argument must be an inter-class variance score");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw_validation("lambda is outside [0, 1]");
  Vector r(similarity.size());
  for (std::size_t c = 0; c < r.size(); ++c)
    r[c] = lambda * variance.values[c] - (1.0 - lambda) * similarity.values[c];
  return {ScoreKind::kRanking, std::move(r)};
}

SelectionResult select_top_d(const ChannelScores& ranking, std::size_t d) {
  const std::size_t dim = ranking.size();
  if (d < 1 || d > dim)
    throw_validation("d=" + std::to_string(d) + " is out of range [1, " + std::to_string(dim) + "]");
  if (!all_finite(ranking.values)) throw_validation("ranking contains non-finite scores");
  SelectionResult out;
  out.dim = dim;
  out.order.resize(dim);
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::stable_sort(out.order.begin(), out.order.end(), [&](std::size_t a, std::size_t b) {
    return ranking.values[a] > ranking.values[b];
  });
  out.selected.assign(out.order.begin(), out.order.begin() + static_cast<std::ptrdiff_t>(d));
  std::sort(out.selected.begin(), out.selected.end());
  out.ranking = ranking;
  out.config.d = d;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void gather(std::span<const double> v, const SelectionResult& sel, bool renormalize, std::span<double> out) {
  if (v.size() != sel.dim)
    throw_validation("dimension mismatch: vector has " + std::to_string(v.size()) +
                     " channels, selection expects " + std::to_string(sel.dim));
  for (std::size_t k = 0; k < sel.selected.size(); ++k) out[k] = v[sel.selected[k]];
  if (renormalize && !normalize_in_place(out))
    throw_validation("selected channels of a vector are all zero; cannot renormalize");
}

void pool_into(std::span<const double> v, std::size_t d, bool renormalize, std::span<double> out) {
  if (d == 0 || v.size() % d != 0)
    throw_validation("pooling target " + std::to_string(d) + " does not divide dimension " +
                     std::to_string(v.size()));
  const std::size_t group = v.size() / d;
  for (std::size_t k = 0; k < d; ++k)
    out[k] = pairwise_sum(v.subspan(k * group, group)) / static_cast<double>(group);
  if (renormalize && !normalize_in_place(out))
    throw_validation("pooled vector is zero; cannot renormalize");
}

}  // namespace

Vector apply_selection(std::span<const double> v, const SelectionResult& sel, bool renormalize) {
  Vector out(sel.selected.size());
  gather(v, sel, renormalize, out);
  return out;
}

Matrix apply_selection(const Matrix& rows, const SelectionResult& sel, bool renormalize) {
  Matrix out(rows.rows(), sel.selected.size());
  for (std::size_t r = 0; r < rows.rows(); ++r) gather(rows.row(r), sel, renormalize, out.row(r));
  return out;
}

EmbeddingSet apply_selection(const EmbeddingSet& es, const SelectionResult& sel, bool renormalize) {
  std::vector<Matrix> blocks;
  for (const auto& b : es.blocks()) blocks.push_back(apply_selection(b, sel, renormalize));
  return EmbeddingSet(sel.selected.size(), es.names(), std::move(blocks));
}

CategoryMeans apply_selection(const CategoryMeans& means, const SelectionResult& sel, bool renormalize) {
  return {means.names, apply_selection(means.means, sel, renormalize)};
}

Vector pool_reduce(std::span<const double> v, std::size_t d) {
  Vector out(d);
  pool_into(v, d, false, out);
  return out;
}

Matrix pool_reduce(const Matrix& rows, std::size_t d, bool renormalize) {
  Matrix out(rows.rows(), d);
  for (std::size_t r = 0; r < rows.rows(); ++r) pool_into(rows.row(r), d, renormalize, out.row(r));
  return out;
}

EmbeddingSet pool_reduce(const EmbeddingSet& es, std::size_t d, bool renormalize) {
  std::vector<Matrix> blocks;
  for (const auto& b : es.blocks()) blocks.push_back(pool_reduce(b, d, renormalize));
  return EmbeddingSet(d, es.names(), std::move(blocks));
}

CategoryMeans pool_reduce(const CategoryMeans& means, std::size_t d, bool renormalize) {
  return {means.names, pool_reduce(means.means, d, renormalize)};
}

SelectionResult random_select(std::size_t dim, std::size_t d, std::uint64_t seed) {
  if (d < 1 || d > dim)
    throw_validation("d=" + std::to_string(d) + " is out of range [1, " + std::to_string(dim) + "]");
  SelectionResult out;
  out.dim = dim;
  out.order.resize(dim);
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i + 1 < dim; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(dim - i));
    std::swap(out.order[i], out.order[j]);
  }
  out.selected.assign(out.order.begin(), out.order.begin() + static_cast<std::ptrdiff_t>(d));
  std::sort(out.selected.begin(), out.selected.end());
  out.config.method = SelectionMethod::kRandom;
  out.config.d = d;
  out.config.seed = seed;
  return out;
}

SelectionResult select(const EmbeddingSet& es, const SelectionConfig& config) {
  config.check(es.dim());
  SelectionResult out;
  switch (config.method) {
    case SelectionMethod::kPool:
      throw_validation("pool is a transform, not an index selection; use pool_reduce");
    case SelectionMethod::kRandom:
      out = random_select(es.dim(), config.d, config.seed);
      break;
    case SelectionMethod::kSignificance:
    case SelectionMethod::kApe: {
      const ChannelScores sim = config.method == SelectionMethod::kSignificance
                                    ? intra_class_similarity(es)
                                    : inter_class_similarity(es, config.ape_pair_normalization);
      const ChannelScores var = inter_class_variance(category_means(es));
      out = select_top_d(rank_channels(sim, var, config.lambda), config.d);
      out.similarity = sim;
      out.variance = var;
      break;
    }
  }
  out.config = config;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

json scores_json(const std::optional<ChannelScores>& s) {
  return s ? json(s->values) : json::array();
}

std::optional<ChannelScores> scores_from(const json& j, ScoreKind kind, std::size_t dim,
                                         const std::string& where) {
  if (!j.is_array()) throw_validation(where + " must be an array");
  if (j.empty()) return std::nullopt;
  if (j.size() != dim)
    throw_validation(where + " has " + std::to_string(j.size()) + " values, expected " + std::to_string(dim));
  ChannelScores s{kind, j.get<Vector>()};
  return s;
}

}  // namespace

std::string serialize_ranking(const SelectionResult& sel) {
  json doc = {
      {"D", sel.dim},
      {"d", sel.selected.size()},
      {"method", to_string(sel.config.method)},
      {"lambda", sel.config.lambda},
      {"renormalize", sel.config.renormalize},
      {"order", sel.order},
      {"selected", sel.selected},
      {"scores",
       {{"S", scores_json(sel.similarity)},
        {"S_kind", sel.similarity ? std::string(to_string(sel.similarity->kind)) : std::string()},
        {"V", scores_json(sel.variance)},
        {"R", scores_json(sel.ranking)}}},
  };
  if (sel.config.method == SelectionMethod::kRandom) doc["seed"] = sel.config.seed;
  if (sel.config.method == SelectionMethod::kApe)
    doc["ape_pair_normalization"] =
        sel.config.ape_pair_normalization == PairNormalization::kSquared ? "m_squared" : "ordered_pairs";
  return detail::canonical_dump(doc);
}

SelectionResult parse_ranking(std::string_view text, std::string_view origin) {
  const json doc = detail::parse_json(text, origin);
  const std::string root(origin);
  SelectionResult sel;
  try {
    sel.dim = detail::require(doc, "D", root).get<std::size_t>();
    const std::size_t d = detail::require(doc, "d", root).get<std::size_t>();
    const auto method = parse_selection_method(detail::require(doc, "method", root).get<std::string>());
    if (!method) throw_validation(root + ": unknown method");
    sel.config.method = *method;
    sel.config.d = d;
    sel.config.lambda = detail::require(doc, "lambda", root).get<double>();
    if (auto it = doc.find("renormalize"); it != doc.end()) sel.config.renormalize = it->get<bool>();
    if (auto it = doc.find("seed"); it != doc.end()) sel.config.seed = it->get<std::uint64_t>();
    if (auto it = doc.find("ape_pair_normalization"); it != doc.end())
      sel.config.ape_pair_normalization =
          it->get<std::string>() == "ordered_pairs" ? PairNormalization::kOrderedPairs : PairNormalization::kSquared;
    sel.order = detail::require(doc, "order", root).get<std::vector<std::size_t>>();
    sel.selected = detail::require(doc, "selected", root).get<std::vector<std::size_t>>();

    const json& scores = detail::require(doc, "scores", root);
    const std::string s_kind = scores.value("S_kind", std::string("intra_similarity"));
    sel.similarity = scores_from(detail::require(scores, "S", root + ".scores"),
                                 s_kind == "inter_similarity" ? ScoreKind::kInterSimilarity
                                                              : ScoreKind::kIntraSimilarity,
                                 sel.dim, root + ".scores.S");
    sel.variance = scores_from(detail::require(scores, "V", root + ".scores"), ScoreKind::kInterVariance,
                               sel.dim, root + ".scores.V");
    sel.ranking = scores_from(detail::require(scores, "R", root + ".scores"), ScoreKind::kRanking, sel.dim,
                              root + ".scores.R");
    if (sel.selected.size() != d) throw_validation(root + ": selected has the wrong length");
  } catch (const json::exception& e) {
    throw_validation(root + ": malformed ranking file (" + e.what() + ")");
  }

  // order must be a permutation of [0, D) and selected its sorted d-prefix.
  std::vector<std::size_t> perm = sel.order;
  std::sort(perm.begin(), perm.end());
  for (std::size_t i = 0; i < perm.size(); ++i)
    if (perm[i] != i || perm.size() != sel.dim) throw_validation(root + ": order is not a permutation of [0, D)");
  std::vector<std::size_t> prefix(sel.order.begin(),
                                  sel.order.begin() + static_cast<std::ptrdiff_t>(sel.selected.size()));
  std::sort(prefix.begin(), prefix.end());
  if (prefix != sel.selected) throw_validation(root + ": selected is not the top-d prefix of order");
  return sel;
}

void save_ranking(const SelectionResult& sel, const std::filesystem::path& path) {
  write_text_file_atomic(path, serialize_ranking(sel));
}

SelectionResult load_ranking(const std::filesystem::path& path) {
  return parse_ranking(read_text_file(path), path.string());
}

std::string ranking_digest(const SelectionResult& sel) { return sha256_hex(serialize_ranking(sel)); }

}  // namespace langsup
