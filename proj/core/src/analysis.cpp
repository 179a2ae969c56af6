#include "langsup/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json_util.hpp"
#include "langsup/contrastive.hpp"
#include "langsup/error.hpp"
#include "langsup/io.hpp"

namespace langsup {

using detail::json;

double SimilarityMatrix::mean_off_diagonal() const {
  const std::size_t m = values.rows();
  if (m < 2) return 0.0;
  Vector off;
  off.reserve(m * (m - 1));
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b)
      if (a != b) off.push_back(values(a, b));
  return pairwise_sum(off) / static_cast<double>(off.size());
}

SimilarityMatrix similarity_matrix(const CategoryMeans& means) {
  const std::size_t m = means.size();
  SimilarityMatrix out{means.names, Matrix(m, m)};
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a; b < m; ++b) {
      const double s = dot(means.means.row(a), means.means.row(b));
      out.values(a, b) = s;
      out.values(b, a) = s;
    }
  }
  return out;
}

std::vector<CategoryPair> ranked_pairs(const SimilarityMatrix& sim) {
  std::vector<CategoryPair> pairs;
  const std::size_t m = sim.values.rows();
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) pairs.push_back({a, b, sim.values(a, b)});
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const CategoryPair& x, const CategoryPair& y) { return x.similarity > y.similarity; });
  return pairs;
}

// ---------------------------------------------------------------------------

EigenDecomposition jacobi_eigen(const Matrix& symmetric, double tolerance, int max_sweeps) {
  const std::size_t n = symmetric.rows();
  if (symmetric.cols() != n) throw_validation("jacobi_eigen needs a square matrix");
  Matrix a = symmetric;
  Matrix vt(n, n);  // row k is eigenvector k
  for (std::size_t i = 0; i < n; ++i) vt(i, i) = 1.0;

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = 0; q < n; ++q)
        if (p != q) s += a(p, q) * a(p, q);
    return std::sqrt(s);
  };
  // Tolerance is absolute for unit-scale input and relative beyond it.
  const double scale = std::max(1.0, l2_norm(symmetric.data()));

  auto rotate_rows = [n](std::span<double> rp, std::span<double> rq, double c, double s) {
    for (std::size_t k = 0; k < n; ++k) {
      const double x = rp[k], y = rq[k];
      rp[k] = c * x - s * y;
      rq[k] = s * x + c * y;
    }
  };

  EigenDecomposition out;
  while (off_norm() > tolerance * scale) {
    if (out.sweeps >= max_sweeps) throw Error(ErrorKind::kInternal, "Jacobi eigen-solve did not converge");
    ++out.sweeps;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p), aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // Rows p and q of J^T A J, then mirror them into the columns.
        rotate_rows(a.row(p), a.row(q), c, s);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          a(k, p) = a(p, k);
          a(k, q) = a(q, k);
        }
        rotate_rows(vt.row(p), vt.row(q), c, s);
      }
    }
  }

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(idx[k], idx[k]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = vt(idx[k], r);
  }
  return out;
}

PcaProjection pca_project(const Matrix& x, std::size_t k) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n < 2) throw_validation("PCA needs at least 2 points");
  if (k < 1 || k > std::min(n, d))
    throw_validation("PCA k=" + std::to_string(k) + " is out of range [1, " + std::to_string(std::min(n, d)) + "]");

  PcaProjection out;
  out.mean = pairwise_column_sum(x);
  for (double& m : out.mean) m /= static_cast<double>(n);
  Matrix centered = x;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) centered(r, c) -= out.mean[c];

  // Eigen-solve whichever of the d x d covariance or the n x n Gram matrix
  // is smaller; both share their nonzero spectrum.
  const bool gram = n < d;
  const Matrix ct = centered.transposed();
  const Matrix& src = gram ? centered : ct;  // rows are the vectors being correlated
  const std::size_t m = src.rows();
  Matrix cov(m, m);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a; b < m; ++b) {
      cov(a, b) = cov(b, a) = dot(src.row(a), src.row(b)) / static_cast<double>(n);
    }
  }
  const EigenDecomposition eig = jacobi_eigen(cov);

  double total = 0.0;
  for (double v : eig.values) total += std::max(0.0, v);
  out.degenerate = !(total > 0.0);

  out.components = Matrix(k, d);
  out.explained_variance_ratio.assign(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    auto comp = out.components.row(j);
    if (gram) {
      // Principal axis = X_c^T u, rescaled to unit length.
      for (std::size_t r = 0; r < n; ++r) {
        const double u = eig.vectors(r, j);
        for (std::size_t c = 0; c < d; ++c) comp[c] += u * centered(r, c);
      }
      const double norm = l2_norm(comp);
      if (norm > 1e-300) {
        for (double& c : comp) c /= norm;
      } else {
        // Null direction of a degenerate cloud: any unit vector will do.
        std::fill(comp.begin(), comp.end(), 0.0);
        comp[j % d] = 1.0;
      }
    } else {
      for (std::size_t c = 0; c < d; ++c) comp[c] = eig.vectors(c, j);
    }
    std::size_t argmax = 0;
    for (std::size_t c = 0; c < d; ++c)
      if (std::abs(comp[c]) > std::abs(comp[argmax])) argmax = c;
    if (comp[argmax] < 0.0)
      for (double& c : comp) c = -c;
    if (!out.degenerate) out.explained_variance_ratio[j] = std::max(0.0, eig.values[j]) / total;
  }
  out.coordinates = Matrix(n, k);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < k; ++j) out.coordinates(r, j) = dot(centered.row(r), out.components.row(j));
  return out;
}

// ---------------------------------------------------------------------------

double retrieval_eval(const EmbeddingSet& holdout, const CategoryMeans& means,
                      const std::optional<SelectionResult>& selection) {
  if (holdout.names() != means.names)
    throw_validation("held-out categories do not align with the category means");
  if (holdout.dim() != means.dim())
    throw_validation("held-out dimension " + std::to_string(holdout.dim()) + " differs from means dimension " +
                     std::to_string(means.dim()));
  const Matrix prototypes = selection ? apply_selection(means.means, *selection, true) : means.means;
  std::size_t correct = 0, total = 0;
  for (std::size_t n = 0; n < holdout.num_categories(); ++n) {
    const Matrix queries = selection ? apply_selection(holdout.block(n), *selection, true) : holdout.block(n);
    for (const auto& p : classify(queries, prototypes)) correct += p.index == n;
    total += queries.rows();
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

ToyMetrics toy_metrics(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth,
                       std::size_t num_classes) {
  if (pred.size() != truth.size())
    throw_validation("prediction count " + std::to_string(pred.size()) + " differs from truth count " +
                     std::to_string(truth.size()));
  ToyMetrics out;
  out.confusion = Matrix(num_classes, num_classes);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] >= num_classes || truth[i] >= num_classes) throw_validation("class index out of range");
    out.confusion(truth[i], pred[i]) += 1.0;
  }
  Vector row_sum(num_classes, 0.0), col_sum(num_classes, 0.0);
  double diag = 0.0;
  for (std::size_t a = 0; a < num_classes; ++a) {
    for (std::size_t b = 0; b < num_classes; ++b) {
      row_sum[a] += out.confusion(a, b);
      col_sum[b] += out.confusion(a, b);
    }
    diag += out.confusion(a, a);
  }
  out.accuracy = pred.empty() ? 0.0 : diag / static_cast<double>(pred.size());

  double acc_sum = 0.0, iou_sum = 0.0;
  std::size_t acc_n = 0, iou_n = 0;
  out.class_iou.assign(num_classes, std::nullopt);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double tp = out.confusion(c, c);
    if (row_sum[c] > 0.0) {
      acc_sum += tp / row_sum[c];
      ++acc_n;
    }
    const double uni = row_sum[c] + col_sum[c] - tp;
    if (uni > 0.0) {
      out.class_iou[c] = tp / uni;
      iou_sum += *out.class_iou[c];
      ++iou_n;
    }
  }
  out.mean_class_accuracy = acc_n ? acc_sum / static_cast<double>(acc_n) : 0.0;
  out.toy_miou = iou_n ? iou_sum / static_cast<double>(iou_n) : 0.0;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

void append_row(std::ostringstream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << csv_field(fields[i]);
  out << "\n";
}

}  // namespace

void emit_report(ExperimentReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw_validation("cannot create report directory " + out_dir.string() + ": " + ec.message());
  report.artifacts.clear();

  json matrices = json::object();
  for (const auto& [name, sim] : report.matrices) {
    std::ostringstream csv;
    append_row(csv, sim.names);
    for (std::size_t r = 0; r < sim.values.rows(); ++r) {
      std::vector<std::string> row;
      for (double v : sim.values.row(r)) row.push_back(format_g9(v));
      append_row(csv, row);
    }
    const std::string file = "matrix_" + name + ".csv";
    write_text_file_atomic(out_dir / file, csv.str());
    report.artifacts.push_back(file);
    matrices[name] = {{"file", file}, {"mean_off_diagonal", sim.mean_off_diagonal()}};
  }

  json projections = json::object();
  for (const auto& [name, lp] : report.projections) {
    std::ostringstream csv;
    std::vector<std::string> header{"label"};
    for (std::size_t j = 0; j < lp.pca.coordinates.cols(); ++j) header.push_back("pc" + std::to_string(j + 1));
    append_row(csv, header);
    for (std::size_t r = 0; r < lp.pca.coordinates.rows(); ++r) {
      std::vector<std::string> row{r < lp.labels.size() ? lp.labels[r] : std::to_string(r)};
      for (double v : lp.pca.coordinates.row(r)) row.push_back(format_g9(v));
      append_row(csv, row);
    }
    const std::string file = "pca_" + name + ".csv";
    write_text_file_atomic(out_dir / file, csv.str());
    report.artifacts.push_back(file);
    projections[name] = {{"file", file},
                         {"explained_variance_ratio", lp.pca.explained_variance_ratio},
                         {"degenerate", lp.pca.degenerate}};
  }

  json tables = json::object();
  for (const auto& [name, table] : report.tables) {
    std::ostringstream csv;
    append_row(csv, table.header);
    for (const auto& row : table.rows) append_row(csv, row);
    const std::string file = "table_" + name + ".csv";
    write_text_file_atomic(out_dir / file, csv.str());
    report.artifacts.push_back(file);
    tables[name] = file;
  }

  report.artifacts.push_back("report.json");
  const json doc = {{"run_id", report.run_id},   {"timestamp", report.timestamp},
                    {"digests", report.digests}, {"metrics", report.metrics},
                    {"matrices", matrices},      {"projections", projections},
                    {"tables", tables},          {"artifacts", report.artifacts}};
  write_text_file_atomic(out_dir / "report.json", detail::canonical_dump(doc));
}

}  // namespace langsup
