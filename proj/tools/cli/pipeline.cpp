#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "langsup/error.hpp"
#include "langsup/io.hpp"
#include "langsup/rng.hpp"

namespace langsup::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::uint64_t PipelineConfig::selection_seed() const { return derive_seed(seed, "selection.random"); }
std::uint64_t PipelineConfig::train_seed() const { return seed; }  // train() derives "train.init" etc.
std::uint64_t PipelineConfig::data_seed() const { return derive_seed(seed, "data.synthetic"); }

// ---------------------------------------------------------------------------
// Config file

namespace {

template <typename T>
void read_field(const json& obj, const char* key, T& target, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    target = it->get<T>();
  } catch (const json::exception&) {
    throw_validation(where + "." + key + " has the wrong type");
  }
}

template <typename Enum, typename Parser>
void read_enum(const json& obj, const char* key, Enum& target, Parser parse, const std::string& where) {
  std::string s;
  bool present = obj.contains(key);
  read_field(obj, key, s, where);
  if (!present) return;
  auto v = parse(s);
  if (!v) throw_validation(where + "." + key + ": unknown value \"" + s + "\"");
  target = *v;
}

std::optional<PairNormalization> parse_pair_normalization(std::string_view s) {
  if (s == "m_squared") return PairNormalization::kSquared;
  if (s == "ordered_pairs") return PairNormalization::kOrderedPairs;
  return std::nullopt;
}

}  // namespace

PipelineConfig load_pipeline_config(const fs::path& path, PipelineConfig cfg) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw_validation(path.string() + ": malformed config (" + e.what() + ")");
  }
  if (!doc.is_object()) throw_validation(path.string() + ": config must be a JSON object");
  const std::string root = path.string();
  const fs::path base = path.parent_path();
  auto resolve = [&](const json& obj, const char* key, fs::path& target) {
    std::string s;
    read_field(obj, key, s, root + ".paths");
    if (s.empty()) return;
    fs::path p(s);
    target = p.is_relative() ? base / p : p;
  };

  read_field(doc, "seed", cfg.seed, root);
  read_field(doc, "offline", cfg.offline, root);
  if (auto it = doc.find("paths"); it != doc.end()) {
    resolve(*it, "corpus", cfg.paths.corpus);
    resolve(*it, "embeddings", cfg.paths.embeddings);
    resolve(*it, "ranking", cfg.paths.ranking);
    resolve(*it, "projector", cfg.paths.projector);
    resolve(*it, "out_dir", cfg.paths.out_dir);
  }
  if (auto it = doc.find("selection"); it != doc.end()) {
    const std::string w = root + ".selection";
    read_enum(*it, "method", cfg.selection.method, parse_selection_method, w);
    read_field(*it, "lambda", cfg.selection.lambda, w);
    read_field(*it, "d", cfg.selection.d, w);
    read_field(*it, "renormalize", cfg.selection.renormalize, w);
    read_enum(*it, "ape_pair_normalization", cfg.selection.ape_pair_normalization, parse_pair_normalization, w);
  }
  if (auto it = doc.find("train"); it != doc.end()) {
    const std::string w = root + ".train";
    read_enum(*it, "objective", cfg.train.objective, parse_objective, w);
    read_field(*it, "tau", cfg.train.tau, w);
    read_field(*it, "learning_rate", cfg.train.learning_rate, w);
    read_field(*it, "epochs", cfg.train.epochs, w);
    read_field(*it, "batch_size", cfg.train.batch_size, w);
    read_enum(*it, "optimizer", cfg.train.optimizer, parse_optimizer, w);
    read_field(*it, "momentum", cfg.train.momentum, w);
    read_field(*it, "hidden", cfg.train.hidden, w);
    read_enum(*it, "activation", cfg.train.activation, parse_activation, w);
  }
  if (auto it = doc.find("enrichment"); it != doc.end()) {
    const std::string w = root + ".enrichment";
    auto& e = cfg.enrichment;
    read_field(*it, "target_count", e.target_count, w);
    std::vector<std::string> templates;
    read_field(*it, "templates", templates, w);
    for (auto& t : templates) e.templates.emplace_back(std::move(t));
    read_field(*it, "perspectives", e.perspectives, w);
    read_field(*it, "domain", e.domain, w);
    read_field(*it, "endpoint", e.endpoint, w);
    read_field(*it, "model_name", e.model_name, w);
    read_field(*it, "api_key_env", e.api_key_env, w);
    read_field(*it, "auth_header", e.auth_header, w);
    read_field(*it, "temperature", e.temperature, w);
    read_field(*it, "max_retries", e.max_retries, w);
    read_field(*it, "backoff_ms", e.backoff_ms, w);
    read_field(*it, "max_in_flight", e.max_in_flight, w);
    std::string cache;
    read_field(*it, "cache_dir", cache, w);
    if (!cache.empty()) e.cache_dir = fs::path(cache).is_relative() ? base / cache : fs::path(cache);
  }
  if (auto it = doc.find("synthetic"); it != doc.end()) {
    const std::string w = root + ".synthetic";
    read_field(*it, "input_dim", cfg.synthetic.input_dim, w);
    read_field(*it, "points_per_class", cfg.synthetic.points_per_class, w);
    read_field(*it, "separation", cfg.synthetic.separation, w);
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Ablation

const AblationRow& AblationResult::row(std::string_view method, std::size_t d) const {
  for (const auto& r : rows)
    if (r.method == method && r.d == d) return r;
  throw_validation("no ablation row for " + std::string(method) + " d=" + std::to_string(d));
}

Table AblationResult::table() const {
  Table t{{"method", "d", "accuracy", "stddev"}, {}};
  t.rows.push_back({"full", "", format_g9(full_accuracy), "0"});
  for (const auto& r : rows)
    t.rows.push_back({r.method, std::to_string(r.d), format_g9(r.accuracy), format_g9(r.stddev)});
  return t;
}

namespace {

double retrieval_accuracy(const Matrix& prototypes, const EmbeddingSet& queries) {
  std::size_t correct = 0, total = 0;
  for (std::size_t n = 0; n < queries.num_categories(); ++n) {
    for (const auto& p : classify(queries.block(n), prototypes)) correct += p.index == n;
    total += queries.block(n).rows();
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(v.size()))};
}

}  // namespace

AblationResult run_selection_ablation(const EmbeddingSet& es, std::size_t holdout,
                                      const std::vector<std::size_t>& d_values, std::size_t random_seeds,
                                      std::uint64_t global_seed, double lambda) {
  const auto [train, held] = split_holdout(es, holdout);
  const CategoryMeans means = category_means(train);
  AblationResult out;
  out.full_accuracy = retrieval_eval(held, means);

  SelectionConfig paper_cfg;
  paper_cfg.lambda = lambda;
  paper_cfg.d = es.dim();
  const SelectionResult paper = select(train, paper_cfg);
  SelectionConfig ape_cfg = paper_cfg;
  ape_cfg.method = SelectionMethod::kApe;
  const SelectionResult ape = select(train, ape_cfg);

  for (std::size_t d : d_values) {
    out.rows.push_back({"paper", d, retrieval_eval(held, means, paper.with_d(d)), 0.0});
    out.rows.push_back({"ape", d, retrieval_eval(held, means, ape.with_d(d)), 0.0});

    std::vector<double> accs;
    std::vector<std::vector<std::size_t>> sets;
    for (std::size_t s = 0; s < random_seeds; ++s) {
      const auto seed = derive_seed(global_seed, "selection.random." + std::to_string(s));
      const SelectionResult r = random_select(es.dim(), d, seed);
      accs.push_back(retrieval_eval(held, means, r));
      sets.push_back(r.selected);
    }
    if (!accs.empty()) {
      const auto [mean, sd] = mean_std(accs);
      out.rows.push_back({"random", d, mean, sd});
    }
    out.random_accuracies.emplace_back(d, std::move(accs));
    out.random_selections.emplace_back(d, std::move(sets));

    if (es.dim() % d == 0) {
      const CategoryMeans pooled = pool_reduce(means, d, true);
      out.rows.push_back({"pool", d, retrieval_accuracy(pooled.means, pool_reduce(held, d, true)), 0.0});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands

namespace {

struct Context {
  std::ostream& out;
  std::ostream& err;
};

void require_path(const fs::path& p, const char* flag) {
  if (p.empty()) throw_validation(std::string("missing required path ") + flag);
  if (!fs::exists(p)) throw_validation(std::string(flag) + ": no such file: " + p.string());
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::vector<std::string> lines;
  std::istringstream in(read_text_file(path));
  for (std::string line; std::getline(in, line);) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty() && line.front() != '#') lines.push_back(line);
  }
  return lines;
}

// Category means in the text space used for training and inference:
// reduced by the ranking when one is configured.
struct TextSpace {
  Corpus corpus;
  std::optional<EmbeddingSet> embeddings;
  CategoryMeans means;
  std::optional<SelectionResult> selection;
  Matrix texts;
  std::string digest;  // ranking digest, empty without a ranking
};

TextSpace load_text_space(const PipelineConfig& cfg, bool with_ranking) {
  require_path(cfg.paths.corpus, "--corpus");
  require_path(cfg.paths.embeddings, "--embeddings");
  TextSpace ts;
  ts.corpus = load_corpus(cfg.paths.corpus);
  ts.embeddings = load_embeddings(cfg.paths.embeddings, ts.corpus);
  ts.means = category_means(*ts.embeddings);
  ts.texts = ts.means.means;
  if (with_ranking && !cfg.paths.ranking.empty()) {
    require_path(cfg.paths.ranking, "--ranking");
    ts.selection = load_ranking(cfg.paths.ranking);
    if (ts.selection->dim != ts.embeddings->dim())
      throw_mismatch("ranking was computed for D=" + std::to_string(ts.selection->dim) +
                     " but embeddings have D=" + std::to_string(ts.embeddings->dim()));
    ts.texts = apply_selection(ts.means.means, *ts.selection, true);
    ts.digest = ranking_digest(*ts.selection);
  }
  return ts;
}

// {"features": [[...]], "labels": [index or category name, ...]}
PointBatch load_points(const fs::path& path, const std::vector<std::string>& names, bool labels_required) {
  require_path(path, "--points");
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw_validation(path.string() + ": malformed points file (" + e.what() + ")");
  }
  PointBatch batch;
  try {
    batch.features = Matrix::from_rows(doc.at("features").get<std::vector<Vector>>());
    if (doc.contains("labels")) {
      for (const auto& l : doc["labels"]) {
        if (l.is_string()) {
          auto it = std::find(names.begin(), names.end(), l.get<std::string>());
          if (it == names.end()) throw_validation(path.string() + ": unknown label " + l.get<std::string>());
          batch.labels.push_back(static_cast<std::size_t>(it - names.begin()));
        } else {
          batch.labels.push_back(l.get<std::size_t>());
        }
      }
    } else if (labels_required) {
      throw_validation(path.string() + ": labels are required");
    } else {
      batch.labels.assign(batch.features.rows(), 0);
    }
  } catch (const json::exception& e) {
    throw_validation(path.string() + ": malformed points file (" + e.what() + ")");
  }
  batch.check(names.size());
  return batch;
}

PointBatch synthetic_points(const PipelineConfig& cfg, std::size_t classes) {
  return make_gaussian_clusters(classes, std::max(cfg.synthetic.input_dim, classes), cfg.synthetic.points_per_class,
                                cfg.synthetic.separation, cfg.data_seed());
}

std::string file_digest(const fs::path& p) { return sha256_hex(read_text_file(p)); }

// --- enrich ----------------------------------------------------------------

struct EnrichArgs {
  fs::path categories, templates, synonyms, stub_dir, out, records;
  bool generate = false;
};

int cmd_enrich(const PipelineConfig& cfg, const EnrichArgs& args, Context& ctx) {
  require_path(args.categories, "--categories");
  const auto categories = read_lines(args.categories);
  if (categories.empty()) throw_validation("category file is empty");

  std::vector<PromptTemplate> plain = {}, with_synonym = {};
  std::vector<PromptTemplate> all = cfg.enrichment.templates;
  if (!args.templates.empty()) {
    require_path(args.templates, "--templates");
    for (auto& line : read_lines(args.templates)) all.emplace_back(line);
  }
  for (auto& t : all) (t.has_synonym_slot() ? with_synonym : plain).push_back(t);

  std::vector<Corpus> parts;
  if (!plain.empty()) parts.push_back(expand_templates(categories, plain));
  if (!args.synonyms.empty()) {
    require_path(args.synonyms, "--synonyms");
    if (with_synonym.empty()) with_synonym.emplace_back("{CLS}, also sometimes called {SYN}.");
    parts.push_back(expand_synonyms(categories, with_synonym, parse_synonym_file(read_text_file(args.synonyms))));
  }

  std::vector<GenerationRecord> records;
  if (args.generate) {
    std::unique_ptr<LlmTransport> transport;
    if (!args.stub_dir.empty()) {
      transport = make_file_transport(args.stub_dir);
    } else if (cfg.offline) {
      transport = make_offline_transport();
    } else {
      transport = make_http_transport(cfg.enrichment);
    }
    records = generate_all(categories, cfg.enrichment, *transport);
    parts.push_back(records_to_corpus(records));
  }
  if (parts.empty()) throw_validation("nothing to do: give --templates, --synonyms or --generate");

  Corpus corpus = assemble_corpus(parts);
  if (args.generate) corpus = truncate_corpus(corpus, static_cast<std::size_t>(cfg.enrichment.target_count));
  const fs::path out = args.out.empty() ? cfg.paths.corpus : args.out;
  if (out.empty()) throw_validation("missing output path --out");
  save_corpus(corpus, out);

  if (!args.records.empty()) {
    json recs = json::array();
    for (const auto& r : records)
      recs.push_back({{"category", r.category},
                      {"request_prompt", r.request_prompt},
                      {"raw_response", r.raw_response},
                      {"parsed_descriptions", r.parsed_descriptions},
                      {"timestamp", r.timestamp},
                      {"from_cache", r.from_cache}});
    write_text_file_atomic(args.records, recs.dump(2) + "\n");
  }

  std::size_t total = 0;
  for (const auto& c : corpus.categories) total += c.descriptions.size();
  ctx.out << "wrote " << out.string() << ": " << corpus.size() << " categories, " << total << " descriptions\n";
  return 0;
}

// --- select ----------------------------------------------------------------

int cmd_select(const PipelineConfig& cfg, const fs::path& out_arg, Context& ctx) {
  require_path(cfg.paths.corpus, "--corpus");
  require_path(cfg.paths.embeddings, "--embeddings");
  const Corpus corpus = load_corpus(cfg.paths.corpus);
  const EmbeddingSet es = load_embeddings(cfg.paths.embeddings, corpus);
  SelectionConfig sc = cfg.selection;
  if (sc.method == SelectionMethod::kRandom) sc.seed = cfg.selection_seed();
  const SelectionResult sel = select(es, sc);
  const fs::path out = out_arg.empty() ? cfg.paths.ranking : out_arg;
  if (out.empty()) throw_validation("missing output path --out");
  save_ranking(sel, out);
  ctx.out << "wrote " << out.string() << ": method=" << to_string(sc.method) << " D=" << sel.dim
          << " d=" << sel.d() << "\n";
  return 0;
}

// --- train -----------------------------------------------------------------

int cmd_train(const PipelineConfig& cfg, const fs::path& points, const fs::path& out_arg,
              const fs::path& report_dir, Context& ctx) {
  const TextSpace ts = load_text_space(cfg, true);
  const PointBatch batch =
      points.empty() ? synthetic_points(cfg, ts.corpus.size()) : load_points(points, ts.corpus.names(), true);

  TrainConfig tc = cfg.train;
  tc.seed = cfg.train_seed();
  const TrainResult result = train(batch, ts.texts, tc);

  const fs::path out = out_arg.empty() ? cfg.paths.projector : out_arg;
  if (out.empty()) throw_validation("missing output path --out");
  save_model({result.model, tc.objective, ts.digest}, out);

  const auto pred = predict(result.model, batch, ts.texts);
  const ToyMetrics tm = toy_metrics(pred, batch.labels, ts.corpus.size());
  const double final_acc = result.report.history.back().accuracy;
  ctx.out << "wrote " << out.string() << ": objective=" << to_string(tc.objective)
          << " final_loss=" << format_g9(result.report.value) << " accuracy=" << format_g9(final_acc) << "\n";

  if (!report_dir.empty()) {
    ExperimentReport report;
    report.run_id = "train-" + sha256_hex(serialize_model({result.model, tc.objective, ts.digest})).substr(0, 12);
    report.timestamp = iso8601_now();
    report.digests = {{"embeddings", file_digest(cfg.paths.embeddings)}, {"selection", ts.digest}};
    report.metrics = {{"final_loss", result.report.value},
                      {"gradient_norm", result.report.gradient_norm},
                      {"accuracy", tm.accuracy},
                      {"mean_class_accuracy", tm.mean_class_accuracy},
                      {"toy_miou", tm.toy_miou}};
    Table history{{"epoch", "loss", "accuracy"}, {}};
    for (const auto& h : result.report.history)
      history.rows.push_back({std::to_string(h.epoch), format_g9(h.loss), format_g9(h.accuracy)});
    report.tables["history"] = std::move(history);
    emit_report(report, report_dir);
    ctx.out << "wrote report to " << report_dir.string() << "\n";
  }
  return 0;
}

// --- classify --------------------------------------------------------------

Matrix read_query_vectors(const fs::path& vectors, const fs::path& query) {
  if (!vectors.empty()) {
    require_path(vectors, "--vectors");
    try {
      const json doc = json::parse(read_text_file(vectors));
      return Matrix::from_rows(doc.at("vectors").get<std::vector<Vector>>());
    } catch (const json::exception& e) {
      throw_validation(vectors.string() + ": malformed vectors file (" + e.what() + ")");
    }
  }
  require_path(query, "--query-embedding");
  std::istringstream in(read_text_file(query));
  Vector v;
  for (std::string tok; in >> tok;) {
    try {
      v.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw_validation(query.string() + ": not a number: " + tok);
    }
  }
  if (v.empty()) throw_validation(query.string() + ": empty query vector");
  return Matrix::from_rows({v});
}

int cmd_classify(const PipelineConfig& cfg, const fs::path& vectors, const fs::path& query, const fs::path& points,
                 const fs::path& out, Context& ctx) {
  const TextSpace ts = load_text_space(cfg, true);
  Matrix queries;
  if (!points.empty()) {
    require_path(cfg.paths.projector, "--projector");
    const ModelFile model = load_model(cfg.paths.projector);
    if (model.selection_digest != ts.digest)
      throw_mismatch("projector was trained against selection digest \"" + model.selection_digest +
                     "\" but the current ranking digest is \"" + ts.digest + "\"");
    if (model.model.projector.output_dim() != ts.texts.cols())
      throw_mismatch("projector output dimension differs from the text feature dimension");
    queries = project(model.model.projector, load_points(points, ts.corpus.names(), false));
  } else {
    queries = read_query_vectors(vectors, query);
    const std::size_t full = ts.embeddings->dim();
    if (ts.selection && queries.cols() == full && full != ts.texts.cols()) {
      queries = apply_selection(queries, *ts.selection, true);
    } else if (queries.cols() != ts.texts.cols()) {
      throw_validation("dimension mismatch: query vectors have " + std::to_string(queries.cols()) +
                       " channels; expected " + std::to_string(ts.texts.cols()) +
                       (ts.selection ? " or " + std::to_string(full) : std::string()));
    }
    for (std::size_t r = 0; r < queries.rows(); ++r)
      if (!normalize_in_place(queries.row(r))) throw_validation("query vector " + std::to_string(r) + " is zero");
  }

  const auto preds = classify(queries, ts.texts);
  json list = json::array();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& name = ts.corpus.categories[preds[i].index].name;
    list.push_back({{"row", i}, {"index", preds[i].index}, {"category", name}, {"score", preds[i].score}});
    ctx.out << i << "\t" << name << "\t" << format_g9(preds[i].score) << "\n";
  }
  if (!out.empty()) write_text_file_atomic(out, json{{"predictions", list}}.dump(2) + "\n");
  return 0;
}

// --- analyze ---------------------------------------------------------------

struct AnalyzeArgs {
  bool matrices = false;
  std::size_t pca = 0;
  fs::path points;
  bool synthetic = false;
  std::string run_id;
};

Matrix stack_rows(const EmbeddingSet& es, std::vector<std::string>& labels) {
  Matrix all(es.total_rows(), es.dim());
  std::size_t r = 0;
  for (std::size_t n = 0; n < es.num_categories(); ++n) {
    for (std::size_t i = 0; i < es.block(n).rows(); ++i, ++r) {
      auto src = es.block(n).row(i);
      std::copy(src.begin(), src.end(), all.row(r).begin());
      labels.push_back(es.names()[n]);
    }
  }
  return all;
}

int cmd_analyze(const PipelineConfig& cfg, const AnalyzeArgs& args, Context& ctx) {
  const TextSpace ts = load_text_space(cfg, true);
  if (cfg.paths.out_dir.empty()) throw_validation("missing output directory --out-dir");

  ExperimentReport report;
  report.timestamp = iso8601_now();
  report.digests["corpus"] = file_digest(cfg.paths.corpus);
  report.digests["embeddings"] = file_digest(cfg.paths.embeddings);
  if (ts.selection) report.digests["selection"] = ts.digest;
  std::string material = report.digests["corpus"] + report.digests["embeddings"] + ts.digest;

  const EmbeddingSet& es = *ts.embeddings;
  report.metrics["retrieval_self_accuracy"] = retrieval_eval(es, ts.means);
  if (ts.selection) report.metrics["retrieval_self_accuracy_selected"] = retrieval_eval(es, ts.means, ts.selection);

  if (args.matrices) {
    const SimilarityMatrix before = similarity_matrix(ts.means);
    report.metrics["mean_off_diagonal_before"] = before.mean_off_diagonal();
    report.matrices["before"] = before;
    if (ts.selection) {
      const SimilarityMatrix after = similarity_matrix(CategoryMeans{ts.means.names, ts.texts});
      report.metrics["mean_off_diagonal_after"] = after.mean_off_diagonal();
      report.matrices["after"] = after;
      const auto top_before = ranked_pairs(before);
      const auto top_after = ranked_pairs(after);
      Table pairs{{"rank", "category_a", "category_b", "similarity_before", "rank_after"}, {}};
      for (std::size_t k = 0; k < std::min<std::size_t>(10, top_before.size()); ++k) {
        const auto& p = top_before[k];
        std::size_t rank_after = 0;
        for (std::size_t j = 0; j < top_after.size(); ++j)
          if (top_after[j].a == p.a && top_after[j].b == p.b) rank_after = j + 1;
        pairs.rows.push_back({std::to_string(k + 1), ts.means.names[p.a], ts.means.names[p.b],
                              format_g9(p.similarity), std::to_string(rank_after)});
      }
      report.tables["top_pairs"] = std::move(pairs);
    }
  }

  if (args.pca > 0) {
    std::vector<std::string> labels;
    const Matrix rows = stack_rows(es, labels);
    report.projections["descriptions"] = {labels, pca_project(rows, args.pca)};
    if (ts.selection) {
      std::vector<std::string> sel_labels;
      const Matrix reduced = stack_rows(apply_selection(es, *ts.selection, true), sel_labels);
      report.projections["descriptions_selected"] = {sel_labels, pca_project(reduced, args.pca)};
    }
    if (!cfg.paths.projector.empty()) {
      require_path(cfg.paths.projector, "--projector");
      const ModelFile model = load_model(cfg.paths.projector);
      if (model.selection_digest != ts.digest)
        throw_mismatch("projector selection digest does not match the current ranking");
      const PointBatch batch = args.points.empty() ? synthetic_points(cfg, ts.corpus.size())
                                                   : load_points(args.points, ts.corpus.names(), true);
      const Matrix feats = project(model.model.projector, batch);
      std::vector<std::string> point_labels;
      for (auto l : batch.labels) point_labels.push_back(ts.corpus.categories[l].name);
      report.projections["points"] = {point_labels, pca_project(feats, std::min(args.pca, feats.cols()))};
      const auto pred = predict(model.model, batch, ts.texts);
      const ToyMetrics tm = toy_metrics(pred, batch.labels, ts.corpus.size());
      report.metrics["point_accuracy"] = tm.accuracy;
      report.metrics["point_mean_class_accuracy"] = tm.mean_class_accuracy;
      report.metrics["point_toy_miou"] = tm.toy_miou;
      material += file_digest(cfg.paths.projector);
      report.digests["projector"] = file_digest(cfg.paths.projector);
    }
  }

  report.run_id = args.run_id.empty() ? "analyze-" + sha256_hex(material).substr(0, 12) : args.run_id;
  emit_report(report, cfg.paths.out_dir);
  ctx.out << "wrote " << report.artifacts.size() << " artifacts to " << cfg.paths.out_dir.string() << "\n";
  return 0;
}

// --- ablate ----------------------------------------------------------------

int cmd_ablate(const PipelineConfig& cfg, std::size_t holdout, const std::vector<std::size_t>& ds,
               std::size_t seeds, Context& ctx) {
  require_path(cfg.paths.corpus, "--corpus");
  require_path(cfg.paths.embeddings, "--embeddings");
  if (cfg.paths.out_dir.empty()) throw_validation("missing output directory --out-dir");
  const Corpus corpus = load_corpus(cfg.paths.corpus);
  const EmbeddingSet es = load_embeddings(cfg.paths.embeddings, corpus);
  const AblationResult result = run_selection_ablation(es, holdout, ds, seeds, cfg.seed, cfg.selection.lambda);

  ExperimentReport report;
  report.timestamp = iso8601_now();
  report.digests["embeddings"] = file_digest(cfg.paths.embeddings);
  report.run_id = "ablate-" + report.digests["embeddings"].substr(0, 12);
  report.metrics["full_accuracy"] = result.full_accuracy;
  for (const auto& r : result.rows)
    report.metrics[r.method + "_d" + std::to_string(r.d)] = r.accuracy;
  report.tables["selection_ablation"] = result.table();

  Table seeds_table{{"d", "seed_index", "accuracy", "selected"}, {}};
  for (std::size_t k = 0; k < result.random_accuracies.size(); ++k) {
    const auto& [d, accs] = result.random_accuracies[k];
    const auto& sets = result.random_selections[k].second;
    for (std::size_t s = 0; s < accs.size(); ++s) {
      std::string sel;
      for (std::size_t i = 0; i < sets[s].size(); ++i) sel += (i ? " " : "") + std::to_string(sets[s][i]);
      seeds_table.rows.push_back({std::to_string(d), std::to_string(s), format_g9(accs[s]), sel});
    }
  }
  report.tables["random_seeds"] = std::move(seeds_table);
  emit_report(report, cfg.paths.out_dir);

  for (const auto& row : result.table().rows) {
    for (std::size_t i = 0; i < row.size(); ++i) ctx.out << (i ? "\t" : "") << row[i];
    ctx.out << "\n";
  }
  return 0;
}

// --- validate --------------------------------------------------------------

int cmd_validate(const PipelineConfig& cfg, Context& ctx) {
  require_path(cfg.paths.corpus, "--corpus");
  require_path(cfg.paths.embeddings, "--embeddings");
  const Corpus corpus = load_corpus(cfg.paths.corpus);
  const EmbeddingSet es = load_embeddings(cfg.paths.embeddings, corpus);
  const ValidationReport report = validate(es, corpus);
  for (const auto& v : report.violations) ctx.out << v.message << "\n";
  ctx.out << report.violations.size() << " violation(s)\n";
  return report.ok() ? 0 : exit_code(ErrorKind::kValidation);
}

}  // namespace

// ---------------------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Language-assisted supervision toolkit: text enrichment, channel selection, contrastive training", "langsup"};
  app.require_subcommand(1);

  fs::path config_path;
  std::optional<std::uint64_t> seed;
  bool offline = false;
  // Path overrides shared by the subcommands.
  std::optional<fs::path> corpus, embeddings, ranking, projector, out_dir;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON pipeline config");
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { seed = v; }, "Global seed");
    sub->add_flag("--offline", offline, "Forbid network use");
  };
  auto add_path = [&](CLI::App* sub, const char* name, std::optional<fs::path>& target, const char* help) {
    sub->add_option_function<std::string>(name, [&target](const std::string& v) { target = fs::path(v); }, help);
  };

  // enrich
  EnrichArgs enrich;
  std::optional<int> target_count, max_retries, backoff_ms;
  std::optional<std::string> endpoint, model_name, api_key_env;
  std::optional<fs::path> cache_dir;
  auto* s_enrich = app.add_subcommand("enrich", "Build an enriched description corpus");
  add_common(s_enrich);
  s_enrich->add_option("--categories", enrich.categories, "One category per line")->required();
  s_enrich->add_option("--templates", enrich.templates, "One {CLS} template per line");
  s_enrich->add_option("--synonyms", enrich.synonyms, "Lines of 'category: syn, syn'");
  s_enrich->add_flag("--generate", enrich.generate, "Ask the LLM endpoint for descriptions");
  s_enrich->add_option("--stub-responses", enrich.stub_dir, "Serve <dir>/<category>.txt instead of an endpoint");
  s_enrich->add_option("--out", enrich.out, "Output corpus file");
  s_enrich->add_option("--records", enrich.records, "Write generation records as JSON");
  s_enrich->add_option_function<int>("--target-count", [&](const int& v) { target_count = v; });
  s_enrich->add_option_function<int>("--max-retries", [&](const int& v) { max_retries = v; });
  s_enrich->add_option_function<int>("--backoff-ms", [&](const int& v) { backoff_ms = v; });
  s_enrich->add_option_function<std::string>("--endpoint", [&](const std::string& v) { endpoint = v; });
  s_enrich->add_option_function<std::string>("--model", [&](const std::string& v) { model_name = v; });
  s_enrich->add_option_function<std::string>("--api-key-env", [&](const std::string& v) { api_key_env = v; });
  add_path(s_enrich, "--cache-dir", cache_dir, "Response cache directory");

  // select
  std::optional<std::string> method, pair_norm;
  std::optional<double> lambda;
  std::optional<std::size_t> d;
  fs::path select_out;
  auto* s_select = app.add_subcommand("select", "Rank embedding channels and keep the top d");
  add_common(s_select);
  add_path(s_select, "--corpus", corpus, "Corpus file");
  add_path(s_select, "--embeddings", embeddings, "Embedding file");
  s_select->add_option_function<std::string>("--method", [&](const std::string& v) { method = v; },
                                             "paper | ape | random");
  s_select->add_option_function<double>("--lambda", [&](const double& v) { lambda = v; });
  s_select->add_option_function<std::size_t>("--d", [&](const std::size_t& v) { d = v; });
  s_select->add_option_function<std::string>("--ape-pair-normalization",
                                             [&](const std::string& v) { pair_norm = v; },
                                             "m_squared | ordered_pairs");
  s_select->add_option("--out", select_out, "Output ranking file");

  // train
  std::optional<std::string> objective, optimizer, activation;
  std::optional<double> tau, lr, separation;
  std::optional<int> epochs;
  std::optional<std::size_t> batch_size, hidden, input_dim, per_class;
  fs::path train_points, train_out, report_dir;
  auto* s_train = app.add_subcommand("train", "Train a point projector against text features");
  add_common(s_train);
  add_path(s_train, "--corpus", corpus, "Corpus file");
  add_path(s_train, "--embeddings", embeddings, "Embedding file");
  add_path(s_train, "--ranking", ranking, "Ranking file");
  s_train->add_option("--points", train_points, "Point features JSON (default: synthetic clusters)");
  s_train->add_option("--out", train_out, "Output model file");
  s_train->add_option("--report-dir", report_dir, "Write a training report here");
  s_train->add_option_function<std::string>("--objective", [&](const std::string& v) { objective = v; },
                                            "infonce | cross_entropy");
  s_train->add_option_function<double>("--tau", [&](const double& v) { tau = v; });
  s_train->add_option_function<double>("--lr", [&](const double& v) { lr = v; });
  s_train->add_option_function<int>("--epochs", [&](const int& v) { epochs = v; });
  s_train->add_option_function<std::size_t>("--batch-size", [&](const std::size_t& v) { batch_size = v; });
  s_train->add_option_function<std::size_t>("--hidden", [&](const std::size_t& v) { hidden = v; });
  s_train->add_option_function<std::string>("--optimizer", [&](const std::string& v) { optimizer = v; });
  s_train->add_option_function<std::string>("--activation", [&](const std::string& v) { activation = v; });
  s_train->add_option_function<std::size_t>("--input-dim", [&](const std::size_t& v) { input_dim = v; });
  s_train->add_option_function<std::size_t>("--points-per-class", [&](const std::size_t& v) { per_class = v; });
  s_train->add_option_function<double>("--separation", [&](const double& v) { separation = v; });

  // classify
  fs::path vectors, query, classify_points, classify_out;
  auto* s_classify = app.add_subcommand("classify", "Assign vectors or points to categories");
  add_common(s_classify);
  add_path(s_classify, "--corpus", corpus, "Corpus file");
  add_path(s_classify, "--embeddings", embeddings, "Embedding file");
  add_path(s_classify, "--ranking", ranking, "Ranking file");
  add_path(s_classify, "--projector", projector, "Trained model file (with --points)");
  auto* opt_vectors = s_classify->add_option("--vectors", vectors, "JSON {\"vectors\": [[...]]}");
  auto* opt_query = s_classify->add_option("--query-embedding", query, "Whitespace-separated query vector");
  auto* opt_points = s_classify->add_option("--points", classify_points, "Raw point features JSON");
  opt_vectors->excludes(opt_query)->excludes(opt_points);
  opt_query->excludes(opt_points);
  s_classify->add_option("--out", classify_out, "Write predictions JSON");

  // analyze
  AnalyzeArgs analyze;
  auto* s_analyze = app.add_subcommand("analyze", "Similarity matrices, PCA coordinates and metrics");
  add_common(s_analyze);
  add_path(s_analyze, "--corpus", corpus, "Corpus file");
  add_path(s_analyze, "--embeddings", embeddings, "Embedding file");
  add_path(s_analyze, "--ranking", ranking, "Ranking file");
  add_path(s_analyze, "--projector", projector, "Trained model file");
  add_path(s_analyze, "--out-dir", out_dir, "Report directory");
  s_analyze->add_flag("--matrices", analyze.matrices, "Emit category similarity matrices");
  s_analyze->add_option("--pca", analyze.pca, "Number of principal components");
  s_analyze->add_option("--points", analyze.points, "Point features for the projector PCA");
  s_analyze->add_option("--run-id", analyze.run_id, "Override the content-derived run id");

  // ablate
  std::size_t holdout = 3, seeds = 20;
  std::vector<std::size_t> d_values{32, 64, 128};
  auto* s_ablate = app.add_subcommand("ablate", "Compare selection methods and channel counts by retrieval");
  add_common(s_ablate);
  add_path(s_ablate, "--corpus", corpus, "Corpus file");
  add_path(s_ablate, "--embeddings", embeddings, "Embedding file");
  add_path(s_ablate, "--out-dir", out_dir, "Report directory");
  s_ablate->add_option("--holdout", holdout, "Descriptions held out per category");
  s_ablate->add_option("--d-values", d_values, "Channel counts")->delimiter(',');
  s_ablate->add_option("--random-seeds", seeds, "Random-selection seeds");
  s_ablate->add_option_function<double>("--lambda", [&](const double& v) { lambda = v; });

  // validate
  auto* s_validate = app.add_subcommand("validate", "Check an embedding file against a corpus");
  add_common(s_validate);
  add_path(s_validate, "--corpus", corpus, "Corpus file");
  add_path(s_validate, "--embeddings", embeddings, "Embedding file");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(ErrorKind::kValidation);
  }

  Context ctx{out, err};
  try {
    PipelineConfig cfg;
    if (!config_path.empty()) {
      require_path(config_path, "--config");
      cfg = load_pipeline_config(config_path, cfg);
    }
    if (seed) cfg.seed = *seed;
    cfg.offline = cfg.offline || offline;
    if (corpus) cfg.paths.corpus = *corpus;
    if (embeddings) cfg.paths.embeddings = *embeddings;
    if (ranking) cfg.paths.ranking = *ranking;
    if (projector) cfg.paths.projector = *projector;
    if (out_dir) cfg.paths.out_dir = *out_dir;

    if (method) {
      auto m = parse_selection_method(*method);
      if (!m) throw_validation("unknown --method " + *method);
      cfg.selection.method = *m;
    }
    if (pair_norm) {
      auto p = parse_pair_normalization(*pair_norm);
      if (!p) throw_validation("unknown --ape-pair-normalization " + *pair_norm);
      cfg.selection.ape_pair_normalization = *p;
    }
    if (lambda) cfg.selection.lambda = *lambda;
    if (d) cfg.selection.d = *d;

    if (objective) {
      auto o = parse_objective(*objective);
      if (!o) throw_validation("unknown --objective " + *objective);
      cfg.train.objective = *o;
    }
    if (optimizer) {
      auto o = parse_optimizer(*optimizer);
      if (!o) throw_validation("unknown --optimizer " + *optimizer);
      cfg.train.optimizer = *o;
    }
    if (activation) {
      auto a = parse_activation(*activation);
      if (!a) throw_validation("unknown --activation " + *activation);
      cfg.train.activation = *a;
    }
    if (tau) cfg.train.tau = *tau;
    if (lr) cfg.train.learning_rate = *lr;
    if (epochs) cfg.train.epochs = *epochs;
    if (batch_size) cfg.train.batch_size = *batch_size;
    if (hidden) cfg.train.hidden = *hidden;
    if (input_dim) cfg.synthetic.input_dim = *input_dim;
    if (per_class) cfg.synthetic.points_per_class = *per_class;
    if (separation) cfg.synthetic.separation = *separation;

    if (target_count) cfg.enrichment.target_count = *target_count;
    if (max_retries) cfg.enrichment.max_retries = *max_retries;
    if (backoff_ms) cfg.enrichment.backoff_ms = *backoff_ms;
    if (endpoint) cfg.enrichment.endpoint = *endpoint;
    if (model_name) cfg.enrichment.model_name = *model_name;
    if (api_key_env) cfg.enrichment.api_key_env = *api_key_env;
    if (cache_dir) cfg.enrichment.cache_dir = *cache_dir;

    if (s_enrich->parsed()) return cmd_enrich(cfg, enrich, ctx);
    if (s_select->parsed()) return cmd_select(cfg, select_out, ctx);
    if (s_train->parsed()) return cmd_train(cfg, train_points, train_out, report_dir, ctx);
    if (s_classify->parsed()) return cmd_classify(cfg, vectors, query, classify_points, classify_out, ctx);
    if (s_analyze->parsed()) return cmd_analyze(cfg, analyze, ctx);
    if (s_ablate->parsed()) return cmd_ablate(cfg, holdout, d_values, seeds, ctx);
    if (s_validate->parsed()) return cmd_validate(cfg, ctx);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error (internal): " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace langsup::cli
