#include "langsup/corpus.hpp"

#include <charconv>
#include <cmath>
#include <set>
#include <string>

#include "json_util.hpp"
#include "langsup/error.hpp"
#include "langsup/io.hpp"

namespace langsup {

using detail::json;

std::string_view to_string(SourceTag tag) noexcept {
  switch (tag) {
    case SourceTag::kTemplate:
      return "template";
    case SourceTag::kSynonym:
      return "synonym";
    case SourceTag::kGenerated:
      return "generated";
    case SourceTag::kCustom:
      break;
  }
  return "custom";
}

std::optional<SourceTag> parse_source_tag(std::string_view s) noexcept {
  if (s == "template") return SourceTag::kTemplate;
  if (s == "synonym") return SourceTag::kSynonym;
  if (s == "generated") return SourceTag::kGenerated;
  if (s == "custom") return SourceTag::kCustom;
  return std::nullopt;
}

std::vector<std::string> Corpus::names() const {
  std::vector<std::string> out;
  out.reserve(categories.size());
  for (const auto& c : categories) out.push_back(c.name);
  return out;
}

const CategoryEntry* Corpus::find(std::string_view name) const {
  for (const auto& c : categories)
    if (c.name == name) return &c;
  return nullptr;
}

void check_corpus(const Corpus& corpus) {
  std::set<std::string_view> seen;
  for (std::size_t n = 0; n < corpus.categories.size(); ++n) {
    const auto& cat = corpus.categories[n];
    const std::string where = "categories[" + std::to_string(n) + "]";
    if (cat.name.empty()) throw_validation(where + ".name: empty category name");
    if (!seen.insert(cat.name).second)
      throw_validation(where + ".name: duplicate category name \"" + cat.name + "\"");
    if (cat.descriptions.empty())
      throw_validation(where + ".descriptions: category \"" + cat.name + "\" has no descriptions");
    if (cat.source_tags.size() != cat.descriptions.size())
      throw_validation(where + ".source_tags: expected " + std::to_string(cat.descriptions.size()) +
                       " tags, found " + std::to_string(cat.source_tags.size()));
    std::set<std::string_view> descs;
    for (std::size_t i = 0; i < cat.descriptions.size(); ++i) {
      if (!descs.insert(cat.descriptions[i]).second)
        throw_validation(where + ".descriptions[" + std::to_string(i) +
                         "]: repeated description in \"" + cat.name + "\"");
    }
  }
}

Corpus parse_corpus(std::string_view text, std::string_view origin) {
  const json doc = detail::parse_json(text, origin);
  const std::string root(origin);
  Corpus corpus;
  const json& version = detail::require(doc, "schema_version", root);
  if (!version.is_number_integer())
    throw_validation(root + ": schema_version must be an integer");
  corpus.schema_version = version.get<int>();
  if (corpus.schema_version != kCorpusSchemaVersion)
    throw_validation(root + ": unsupported schema_version " + std::to_string(corpus.schema_version));

  const json& cats = detail::require(doc, "categories", root);
  if (!cats.is_array()) throw_validation(root + ": categories must be an array");
  if (cats.empty()) throw_validation(root + ": categories is empty");

  for (std::size_t n = 0; n < cats.size(); ++n) {
    const std::string where = root + ": categories[" + std::to_string(n) + "]";
    const json& name = detail::require(cats[n], "name", where);
    const json& descs = detail::require(cats[n], "descriptions", where);
    const json& tags = detail::require(cats[n], "source_tags", where);
    if (!name.is_string()) throw_validation(where + ".name must be a string");
    if (!descs.is_array()) throw_validation(where + ".descriptions must be an array");
    if (!tags.is_array()) throw_validation(where + ".source_tags must be an array");

    CategoryEntry entry;
    entry.name = name.get<std::string>();
    for (std::size_t i = 0; i < descs.size(); ++i) {
      if (!descs[i].is_string())
        throw_validation(where + ".descriptions[" + std::to_string(i) + "] must be a string");
      entry.descriptions.push_back(descs[i].get<std::string>());
    }
    for (std::size_t i = 0; i < tags.size(); ++i) {
      const auto tag = tags[i].is_string() ? parse_source_tag(tags[i].get<std::string>()) : std::nullopt;
      if (!tag)
        throw_validation(where + ".source_tags[" + std::to_string(i) +
                         "] must be one of template|synonym|generated|custom");
      entry.source_tags.push_back(*tag);
    }
    corpus.categories.push_back(std::move(entry));
  }
  check_corpus(corpus);
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  return parse_corpus(read_text_file(path), path.string());
}

std::string serialize_corpus(const Corpus& corpus) {
  if (corpus.categories.empty()) throw_validation("corpus has no categories");
  check_corpus(corpus);
  json cats = json::array();
  for (const auto& c : corpus.categories) {
    json tags = json::array();
    for (auto t : c.source_tags) tags.push_back(std::string(to_string(t)));
    cats.push_back({{"name", c.name}, {"descriptions", c.descriptions}, {"source_tags", tags}});
  }
  return detail::canonical_dump({{"schema_version", corpus.schema_version}, {"categories", cats}});
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_text_file_atomic(path, serialize_corpus(corpus));
}

// ---------------------------------------------------------------------------

EmbeddingSet::EmbeddingSet(std::size_t dim, std::vector<std::string> names, std::vector<Matrix> blocks)
    : dim_(dim), names_(std::move(names)), blocks_(std::move(blocks)) {
  if (dim_ == 0) throw_validation("embedding dimension must be positive");
  if (names_.size() != blocks_.size())
    throw_validation("embedding set has " + std::to_string(names_.size()) + " names but " +
                     std::to_string(blocks_.size()) + " blocks");
  for (std::size_t n = 0; n < blocks_.size(); ++n) {
    if (blocks_[n].rows() == 0)
      throw_validation("category \"" + names_[n] + "\" has no embedding rows");
    if (blocks_[n].cols() != dim_)
      throw_validation("category \"" + names_[n] + "\" rows have dimension " +
                       std::to_string(blocks_[n].cols()) + ", expected " + std::to_string(dim_));
  }
}

std::size_t EmbeddingSet::total_rows() const noexcept {
  std::size_t total = 0;
  for (const auto& b : blocks_) total += b.rows();
  return total;
}

EmbeddingSet normalized(const EmbeddingSet& es) {
  std::vector<Matrix> blocks = es.blocks();
  for (std::size_t n = 0; n < blocks.size(); ++n) {
    for (std::size_t i = 0; i < blocks[n].rows(); ++i) {
      if (!normalize_in_place(blocks[n].row(i)))
        throw_validation("category \"" + es.names()[n] + "\" row " + std::to_string(i) +
                         " cannot be normalized (zero or non-finite norm)");
    }
  }
  return EmbeddingSet(es.dim(), es.names(), std::move(blocks));
}

std::pair<EmbeddingSet, EmbeddingSet> split_holdout(const EmbeddingSet& es, std::size_t k) {
  std::vector<Matrix> train, hold;
  for (std::size_t n = 0; n < es.num_categories(); ++n) {
    const Matrix& b = es.block(n);
    if (k == 0 || b.rows() <= k)
      throw_validation("cannot hold out " + std::to_string(k) + " of " + std::to_string(b.rows()) +
                       " rows in category \"" + es.names()[n] + "\"");
    const std::size_t keep = b.rows() - k;
    Matrix tr(keep, b.cols()), ho(k, b.cols());
    for (std::size_t i = 0; i < b.rows(); ++i) {
      auto src = b.row(i);
      auto dst = i < keep ? tr.row(i) : ho.row(i - keep);
      std::copy(src.begin(), src.end(), dst.begin());
    }
    train.push_back(std::move(tr));
    hold.push_back(std::move(ho));
  }
  return {EmbeddingSet(es.dim(), es.names(), std::move(train)),
          EmbeddingSet(es.dim(), es.names(), std::move(hold))};
}

namespace {

std::string_view dtype_name(EmbeddingDtype d) { return d == EmbeddingDtype::kF32 ? "f32" : "f64"; }

double read_value(const json& v, EmbeddingDtype dtype, const std::string& where) {
  double x;
  if (v.is_number()) {
    x = v.get<double>();
  } else if (v.is_string()) {
    // Only the non-finite literals rewritten by parse_json_relaxed land here.
    throw_validation(where + ": non-finite value " + v.get<std::string>());
  } else {
    throw_validation(where + ": expected a number");
  }
  if (!std::isfinite(x)) throw_validation(where + ": non-finite value");
  if (dtype == EmbeddingDtype::kF32) x = static_cast<double>(static_cast<float>(x));
  return x;
}

// Shortest decimal that round-trips the single-precision value.
double shortest_f32(double x) {
  const float f = static_cast<float>(x);
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, f);
  double out = 0.0;
  std::from_chars(buf, end, out);
  return out;
}

}  // namespace

EmbeddingSet parse_embeddings(std::string_view text, const Corpus& corpus, std::string_view origin) {
  const json doc = detail::parse_json_relaxed(text, origin);
  const std::string root(origin);

  const json& dim_j = detail::require(doc, "dim", root);
  if (!dim_j.is_number_unsigned() || dim_j.get<std::size_t>() == 0)
    throw_validation(root + ": dim must be a positive integer");
  const std::size_t dim = dim_j.get<std::size_t>();

  const json& dtype_j = detail::require(doc, "dtype", root);
  EmbeddingDtype dtype;
  if (dtype_j == "f32") {
    dtype = EmbeddingDtype::kF32;
  } else if (dtype_j == "f64") {
    dtype = EmbeddingDtype::kF64;
  } else {
    throw_validation(root + ": dtype must be \"f32\" or \"f64\"");
  }

  const json& cats = detail::require(doc, "categories", root);
  if (!cats.is_array()) throw_validation(root + ": categories must be an array");
  if (cats.size() != corpus.size())
    throw_validation(root + ": count mismatch: file has " + std::to_string(cats.size()) +
                     " categories, corpus has " + std::to_string(corpus.size()));

  std::vector<std::string> names;
  std::vector<Matrix> blocks;
  for (std::size_t n = 0; n < cats.size(); ++n) {
    const std::string where = root + ": categories[" + std::to_string(n) + "]";
    const auto& expected = corpus.categories[n];
    const json& name = detail::require(cats[n], "name", where);
    if (!name.is_string() || name.get<std::string>() != expected.name)
      throw_validation(where + ".name: expected \"" + expected.name + "\" (order must match corpus)");
    const json& rows = detail::require(cats[n], "rows", where);
    if (!rows.is_array()) throw_validation(where + ".rows must be an array");
    if (rows.size() != expected.descriptions.size())
      throw_validation(where + ": count mismatch: " + std::to_string(rows.size()) + " rows for " +
                       std::to_string(expected.descriptions.size()) + " descriptions of \"" +
                       expected.name + "\"");
    Matrix block(rows.size(), dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string rw = where + ".rows[" + std::to_string(i) + "]";
      if (!rows[i].is_array()) throw_validation(rw + " must be an array");
      if (rows[i].size() != dim)
        throw_validation(rw + ": dimension mismatch: " + std::to_string(rows[i].size()) +
                         " values, expected " + std::to_string(dim));
      for (std::size_t c = 0; c < dim; ++c)
        block(i, c) = read_value(rows[i][c], dtype, rw + "[" + std::to_string(c) + "]");
    }
    names.push_back(expected.name);
    blocks.push_back(std::move(block));
  }
  return normalized(EmbeddingSet(dim, std::move(names), std::move(blocks)));
}

EmbeddingSet load_embeddings(const std::filesystem::path& path, const Corpus& corpus) {
  return parse_embeddings(read_text_file(path), corpus, path.string());
}

std::string serialize_embeddings(const EmbeddingSet& es, EmbeddingDtype dtype,
                                 const std::map<std::string, std::string>& metadata) {
  json cats = json::array();
  for (std::size_t n = 0; n < es.num_categories(); ++n) {
    const Matrix& b = es.block(n);
    json rows = json::array();
    for (std::size_t i = 0; i < b.rows(); ++i) {
      json row = json::array();
      for (double x : b.row(i)) row.push_back(dtype == EmbeddingDtype::kF32 ? shortest_f32(x) : x);
      rows.push_back(std::move(row));
    }
    cats.push_back({{"name", es.names()[n]}, {"rows", std::move(rows)}});
  }
  json doc = {{"dim", es.dim()}, {"dtype", dtype_name(dtype)}, {"categories", std::move(cats)}};
  if (!metadata.empty()) doc["metadata"] = metadata;
  // Rows on one line each keeps the file diffable without a 100k-line dump.
  return doc.dump() + "\n";
}

void save_embeddings(const EmbeddingSet& es, const std::filesystem::path& path, EmbeddingDtype dtype,
                     const std::map<std::string, std::string>& metadata) {
  write_text_file_atomic(path, serialize_embeddings(es, dtype, metadata));
}

// ---------------------------------------------------------------------------

CategoryMeans category_means(const EmbeddingSet& es) {
  CategoryMeans out{es.names(), Matrix(es.num_categories(), es.dim())};
  for (std::size_t n = 0; n < es.num_categories(); ++n) {
    const Matrix& b = es.block(n);
    Vector sum = pairwise_column_sum(b);
    auto row = out.means.row(n);
    for (std::size_t c = 0; c < es.dim(); ++c) row[c] = sum[c] / static_cast<double>(b.rows());
    if (l2_norm(row) < 1e-12 || !normalize_in_place(row))
      throw_validation("degenerate mean for category \"" + es.names()[n] +
                       "\": descriptions cancel to a zero vector");
  }
  return out;
}

ValidationReport validate(const EmbeddingSet& es, const Corpus& corpus, double norm_tolerance) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, std::string msg) {
    report.violations.push_back({kind, std::move(msg)});
  };
  if (es.num_categories() != corpus.size())
    add(ViolationKind::kCount, "corpus has " + std::to_string(corpus.size()) +
                                   " categories, embeddings have " +
                                   std::to_string(es.num_categories()));
  const std::size_t common = std::min(es.num_categories(), corpus.size());
  for (std::size_t n = 0; n < common; ++n) {
    const auto& cat = corpus.categories[n];
    if (es.names()[n] != cat.name)
      add(ViolationKind::kName, "category " + std::to_string(n) + ": embeddings name \"" +
                                    es.names()[n] + "\", corpus name \"" + cat.name + "\"");
    if (es.block(n).rows() != cat.descriptions.size())
      add(ViolationKind::kCount, "category \"" + cat.name + "\": " +
                                     std::to_string(es.block(n).rows()) + " rows for " +
                                     std::to_string(cat.descriptions.size()) + " descriptions");
  }
  for (std::size_t n = 0; n < es.num_categories(); ++n) {
    const Matrix& b = es.block(n);
    for (std::size_t i = 0; i < b.rows(); ++i) {
      const std::string where = "category \"" + es.names()[n] + "\" row " + std::to_string(i);
      if (!all_finite(b.row(i))) {
        add(ViolationKind::kNonFinite, where + ": non-finite value");
        continue;
      }
      const double norm = l2_norm(b.row(i));
      if (std::abs(norm - 1.0) > norm_tolerance)
        add(ViolationKind::kNorm, where + ": norm " + format_g9(norm));
    }
  }
  return report;
}

}  // namespace langsup
