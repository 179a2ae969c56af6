#include "langsup/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json_util.hpp"
#include "langsup/error.hpp"
#include "langsup/io.hpp"
#include "langsup/rng.hpp"

namespace langsup {

using detail::json;

void PointBatch::check(std::size_t num_classes) const {
  if (features.rows() != labels.size())
    throw_validation("point batch has " + std::to_string(features.rows()) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  if (!all_finite(features.data())) throw_validation("point features contain non-finite values");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= num_classes)
      throw_validation("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                       " is out of range [0, " + std::to_string(num_classes) + ")");
}

std::string_view to_string(Activation a) noexcept { return a == Activation::kRelu ? "relu" : "tanh"; }

std::optional<Activation> parse_activation(std::string_view s) noexcept {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  return std::nullopt;
}

std::string_view to_string(Objective o) noexcept {
  return o == Objective::kInfoNce ? "infonce" : "cross_entropy";
}

std::optional<Objective> parse_objective(std::string_view s) noexcept {
  if (s == "infonce") return Objective::kInfoNce;
  if (s == "cross_entropy") return Objective::kCrossEntropy;
  return std::nullopt;
}

std::string_view to_string(Optimizer o) noexcept { return o == Optimizer::kSgd ? "sgd" : "sgd_momentum"; }

std::optional<Optimizer> parse_optimizer(std::string_view s) noexcept {
  if (s == "sgd") return Optimizer::kSgd;
  if (s == "sgd_momentum") return Optimizer::kSgdMomentum;
  return std::nullopt;
}

void TrainConfig::check() const {
  if (!(tau > 0.0)) throw_validation("tau must be positive");
  if (epochs < 1) throw_validation("epochs must be >= 1");
  if (batch_size < 1) throw_validation("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw_validation("learning_rate must be positive");
  if (hidden < 1) throw_validation("hidden width must be >= 1");
}

// ---------------------------------------------------------------------------

Projector::Projector(std::vector<DenseLayer> layers, Activation activation)
    : layers_(std::move(layers)), activation_(activation) {
  if (layers_.empty()) throw_validation("projector needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].bias.size() != layers_[l].out())
      throw_validation("layer " + std::to_string(l) + ": bias length does not match output width");
    if (l > 0 && layers_[l].in() != layers_[l - 1].out())
      throw_validation("layer " + std::to_string(l) + ": input width does not match previous layer");
  }
}

Projector Projector::initialize(const std::vector<std::size_t>& sizes, Activation activation,
                                std::uint64_t seed) {
  if (sizes.size() < 2) throw_validation("projector needs at least input and output sizes");
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    DenseLayer layer{Matrix(sizes[l + 1], sizes[l]), Vector(sizes[l + 1], 0.0)};
    const double bound = std::sqrt(6.0 / static_cast<double>(sizes[l]));
    for (double& w : layer.weights.data()) w = rng.uniform(-bound, bound);
    layers.push_back(std::move(layer));
  }
  return Projector(std::move(layers), activation);
}

std::vector<std::size_t> Projector::sizes() const {
  std::vector<std::size_t> out{layers_.front().in()};
  for (const auto& l : layers_) out.push_back(l.out());
  return out;
}

namespace {

// out = in W^T + b
Matrix affine(const Matrix& in, const DenseLayer& layer) {
  Matrix out(in.rows(), layer.out());
  for (std::size_t r = 0; r < in.rows(); ++r) {
    auto x = in.row(r);
    for (std::size_t o = 0; o < layer.out(); ++o) out(r, o) = dot(x, layer.weights.row(o)) + layer.bias[o];
  }
  return out;
}

void activate(Matrix& m, Activation a) {
  for (double& x : m.data()) x = a == Activation::kRelu ? std::max(0.0, x) : std::tanh(x);
}

struct Forward {
  std::vector<Matrix> inputs;  // input to each layer (post-activation of the previous)
  Matrix raw;                  // last layer output before normalization
  Vector norms;
  Matrix unit;                 // normalized output
};

Forward forward(const Projector& proj, const Matrix& features) {
  if (features.cols() != proj.input_dim())
    throw_validation("dimension mismatch: features have " + std::to_string(features.cols()) +
                     " columns, projector expects " + std::to_string(proj.input_dim()));
  Forward f;
  Matrix h = features;
  const auto& layers = proj.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    f.inputs.push_back(h);
    h = affine(h, layers[l]);
    if (l + 1 < layers.size()) activate(h, proj.activation());
  }
  f.raw = h;
  f.unit = h;
  f.norms.resize(h.rows());
  for (std::size_t r = 0; r < h.rows(); ++r) {
    f.norms[r] = l2_norm(h.row(r));
    if (!normalize_in_place(f.unit.row(r)))
      throw_validation("projector output row " + std::to_string(r) + " is zero; cannot normalize");
  }
  return f;
}

DenseLayer zeros_like(const DenseLayer& l) { return {Matrix(l.out(), l.in()), Vector(l.out(), 0.0)}; }

void check_unit_rows(const Matrix& m, const char* what) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    if (std::abs(l2_norm(m.row(r)) - 1.0) > 1e-4)
      throw_validation(std::string(what) + " row " + std::to_string(r) + " is not unit norm");
}

// Row-wise log-softmax pieces with max subtraction.
double softmax_row(std::span<const double> logits, std::span<double> probs) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    probs[j] = std::exp(logits[j] - mx);
    z += probs[j];
  }
  for (double& p : probs) p /= z;
  return mx + std::log(z);  // log-sum-exp
}

}  // namespace

Matrix project(const Projector& projector, const Matrix& features) {
  return forward(projector, features).unit;
}

Matrix project(const Projector& projector, const PointBatch& batch) {
  return project(projector, batch.features);
}

// ---------------------------------------------------------------------------

LossAndGradient infonce_loss(const Matrix& points, const Matrix& texts,
                             const std::vector<std::size_t>& labels, double tau) {
  if (!(tau > 0.0)) throw_validation("tau must be positive");
  if (points.cols() != texts.cols())
    throw_validation("dimension mismatch: points " + std::to_string(points.cols()) + ", texts " +
                     std::to_string(texts.cols()));
  if (labels.size() != points.rows()) throw_validation("label count does not match point count");
  check_unit_rows(points, "point");
  check_unit_rows(texts, "text");
  const std::size_t n = points.rows(), m = texts.rows(), d = points.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  LossAndGradient out{0.0, Matrix(n, d)};
  Vector logits(m), probs(m), losses(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= m) throw_validation("label out of range");
    auto p = points.row(i);
    for (std::size_t j = 0; j < m; ++j) logits[j] = dot(p, texts.row(j)) / tau;
    const double lse = softmax_row(logits, probs);
    losses[i] = lse - logits[labels[i]];
    // d/dp = (1/tau) sum_j (prob_j - [j == label]) t_j
    auto g = out.gradient.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      const double coef = (probs[j] - (j == labels[i] ? 1.0 : 0.0)) * inv_n / tau;
      auto t = texts.row(j);
      for (std::size_t c = 0; c < d; ++c) g[c] += coef * t[c];
    }
  }
  out.loss = pairwise_sum(losses) * inv_n;
  return out;
}

LossAndGradient cross_entropy_loss(const Matrix& logits, const std::vector<std::size_t>& labels) {
  if (labels.size() != logits.rows()) throw_validation("label count does not match logit rows");
  if (!all_finite(logits.data())) throw_validation("logits contain non-finite values");
  const std::size_t n = logits.rows(), k = logits.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossAndGradient out{0.0, Matrix(n, k)};
  Vector losses(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= k)
      throw_validation("label " + std::to_string(labels[i]) + " out of range [0, " + std::to_string(k) + ")");
    auto g = out.gradient.row(i);
    const double lse = softmax_row(logits.row(i), g);
    losses[i] = lse - logits(i, labels[i]);
    g[labels[i]] -= 1.0;
    for (double& x : g) x *= inv_n;
  }
  out.loss = pairwise_sum(losses) * inv_n;
  return out;
}

// ---------------------------------------------------------------------------

double evaluate_objective(const Model& model, const PointBatch& batch, const Matrix& texts,
                          const TrainConfig& config, ModelGradient* grad) {
  const Forward f = forward(model.projector, batch.features);
  const std::size_t n = batch.size();

  double loss;
  Matrix d_unit;  // dL / d(normalized output)
  DenseLayer head_grad;
  if (config.objective == Objective::kInfoNce) {
    auto lg = infonce_loss(f.unit, texts, batch.labels, config.tau);
    loss = lg.loss;
    d_unit = std::move(lg.gradient);
  } else {
    if (!model.head) throw_validation("cross-entropy model has no classification head");
    const DenseLayer& head = *model.head;
    auto lg = cross_entropy_loss(affine(f.unit, head), batch.labels);
    loss = lg.loss;
    if (grad) {
      head_grad = zeros_like(head);
      d_unit = Matrix(n, head.in());
      for (std::size_t i = 0; i < n; ++i) {
        auto gz = lg.gradient.row(i);
        auto p = f.unit.row(i);
        for (std::size_t o = 0; o < head.out(); ++o) {
          head_grad.bias[o] += gz[o];
          auto w = head.weights.row(o);
          auto gw = head_grad.weights.row(o);
          for (std::size_t c = 0; c < head.in(); ++c) {
            gw[c] += gz[o] * p[c];
            d_unit(i, c) += gz[o] * w[c];
          }
        }
      }
    }
  }
  if (!grad) return loss;

  // Through p = y / |y|: dL/dy = (g - p (p . g)) / |y|.
  Matrix delta(n, f.raw.cols());
  for (std::size_t i = 0; i < n; ++i) {
    auto p = f.unit.row(i);
    auto g = d_unit.row(i);
    const double pg = dot(p, g);
    for (std::size_t c = 0; c < p.size(); ++c) delta(i, c) = (g[c] - p[c] * pg) / f.norms[i];
  }

  const auto& layers = model.projector.layers();
  grad->projector.assign(layers.size(), DenseLayer{});
  for (std::size_t l = layers.size(); l-- > 0;) {
    const DenseLayer& layer = layers[l];
    const Matrix& in = f.inputs[l];
    DenseLayer g = zeros_like(layer);
    for (std::size_t i = 0; i < n; ++i) {
      auto di = delta.row(i);
      auto xi = in.row(i);
      for (std::size_t o = 0; o < layer.out(); ++o) {
        g.bias[o] += di[o];
        auto gw = g.weights.row(o);
        for (std::size_t c = 0; c < layer.in(); ++c) gw[c] += di[o] * xi[c];
      }
    }
    if (l > 0) {
      Matrix prev(n, layer.in());
      for (std::size_t i = 0; i < n; ++i) {
        auto di = delta.row(i);
        auto pi = prev.row(i);
        for (std::size_t o = 0; o < layer.out(); ++o) {
          auto w = layer.weights.row(o);
          for (std::size_t c = 0; c < layer.in(); ++c) pi[c] += di[o] * w[c];
        }
        // `in` holds the activated values of layer l-1.
        auto hi = in.row(i);
        for (std::size_t c = 0; c < layer.in(); ++c) {
          if (model.projector.activation() == Activation::kRelu) {
            if (hi[c] <= 0.0) pi[c] = 0.0;
          } else {
            pi[c] *= 1.0 - hi[c] * hi[c];
          }
        }
      }
      delta = std::move(prev);
    }
    grad->projector[l] = std::move(g);
  }
  if (model.head) grad->head = std::move(head_grad);
  return loss;
}

std::vector<std::size_t> predict(const Model& model, const PointBatch& batch, const Matrix& texts) {
  const Matrix unit = project(model.projector, batch.features);
  const Matrix scores = model.head ? affine(unit, *model.head) : Matrix();
  std::vector<std::size_t> out;
  out.reserve(unit.rows());
  if (!model.head) {
    for (const auto& p : classify(unit, texts)) out.push_back(p.index);
    return out;
  }
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    auto row = scores.row(i);
    out.push_back(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return out;
}

namespace {

double accuracy_of(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return pred.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(pred.size());
}

PointBatch gather_rows(const PointBatch& batch, std::span<const std::size_t> idx) {
  PointBatch out{Matrix(idx.size(), batch.features.cols()), {}};
  out.labels.reserve(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    auto src = batch.features.row(idx[k]);
    std::copy(src.begin(), src.end(), out.features.row(k).begin());
    out.labels.push_back(batch.labels[idx[k]]);
  }
  return out;
}

double squared_norm(const DenseLayer& l) {
  return dot(l.weights.data(), l.weights.data()) + dot(l.bias, l.bias);
}

}  // namespace

TrainResult train(const PointBatch& batch, const Matrix& texts, const TrainConfig& config) {
  config.check();
  std::size_t num_classes;
  if (config.objective == Objective::kInfoNce) {
    if (texts.rows() == 0) throw_validation("InfoNCE training needs text features");
    num_classes = texts.rows();
  } else {
    num_classes = batch.labels.empty() ? 0 : *std::max_element(batch.labels.begin(), batch.labels.end()) + 1;
    if (texts.rows() > 0) num_classes = std::max(num_classes, texts.rows());
  }
  batch.check(num_classes);
  if (batch.size() == 0) throw_validation("empty training batch");
  const std::size_t out_dim = texts.cols() > 0 ? texts.cols() : num_classes;

  Model model{Projector::initialize({batch.features.cols(), config.hidden, out_dim}, config.activation,
                                    derive_seed(config.seed, "train.init")),
              std::nullopt};
  if (config.objective == Objective::kCrossEntropy) {
    Projector head = Projector::initialize({out_dim, num_classes}, Activation::kRelu,
                                           derive_seed(config.seed, "train.head"));
    model.head = head.layers().front();
  }

  ModelGradient velocity;
  for (const auto& l : model.projector.layers()) velocity.projector.push_back(zeros_like(l));
  if (model.head) velocity.head = zeros_like(*model.head);
  const double mu = config.optimizer == Optimizer::kSgdMomentum ? config.momentum : 0.0;

  auto step = [&](DenseLayer& param, DenseLayer& vel, const DenseLayer& g) {
    auto pw = param.weights.data();
    auto vw = vel.weights.data();
    auto gw = g.weights.data();
    for (std::size_t i = 0; i < pw.size(); ++i) {
      vw[i] = mu * vw[i] + gw[i];
      pw[i] -= config.learning_rate * vw[i];
    }
    for (std::size_t i = 0; i < param.bias.size(); ++i) {
      vel.bias[i] = mu * vel.bias[i] + g.bias[i];
      param.bias[i] -= config.learning_rate * vel.bias[i];
    }
  };

  Rng shuffle_rng(derive_seed(config.seed, "train.shuffle"));
  std::vector<std::size_t> perm(batch.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});

  TrainResult result{model, {}};
  const auto run_epoch = [&](int epoch) {
    for (std::size_t i = perm.size(); i > 1; --i)
      std::swap(perm[i - 1], perm[static_cast<std::size_t>(shuffle_rng.uniform_index(i))]);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < perm.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, perm.size() - start);
      const PointBatch mb = gather_rows(batch, std::span(perm).subspan(start, len));
      ModelGradient g;
      const double loss = evaluate_objective(result.model, mb, texts, config, &g);
      if (!std::isfinite(loss)) throw Error(ErrorKind::kInternal, "non-finite loss");
      loss_sum += loss * static_cast<double>(len);
      auto& layers = result.model.projector.mutable_layers();
      for (std::size_t l = 0; l < layers.size(); ++l) step(layers[l], velocity.projector[l], g.projector[l]);
      if (result.model.head) step(*result.model.head, *velocity.head, *g.head);
    }
    const double epoch_loss = loss_sum / static_cast<double>(batch.size());
    const double acc = accuracy_of(predict(result.model, batch, texts), batch.labels);
    result.report.history.push_back({epoch, epoch_loss, acc});
  };
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    // Blown-up weights also surface as zero outputs inside the forward pass.
    try {
      run_epoch(epoch);
    } catch (const Error& e) {
      throw Error(ErrorKind::kInternal, "training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
  }

  ModelGradient full;
  result.report.value = evaluate_objective(result.model, batch, texts, config, &full);
  double sq = 0.0;
  for (const auto& l : full.projector) sq += squared_norm(l);
  if (full.head) sq += squared_norm(*full.head);
  result.report.gradient_norm = std::sqrt(sq);
  return result;
}

std::vector<Prediction> classify(const Matrix& points, const Matrix& texts) {
  if (points.cols() != texts.cols())
    throw_validation("dimension mismatch: queries have " + std::to_string(points.cols()) +
                     " channels, text features have " + std::to_string(texts.cols()));
  if (texts.rows() == 0) throw_validation("no text features to classify against");
  std::vector<Prediction> out;
  out.reserve(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    Prediction best{0, dot(points.row(i), texts.row(0))};
    for (std::size_t j = 1; j < texts.rows(); ++j) {
      const double s = dot(points.row(i), texts.row(j));
      if (s > best.score) best = {j, s};
    }
    out.push_back(best);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

Matrix random_unit_rows(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (double& x : m.row(r)) x = rng.normal();
    normalize_in_place(m.row(r));
  }
  return m;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

double finite_diff_check(Objective objective, std::uint64_t instance_seed, double tau, double step) {
  Rng rng(instance_seed);
  constexpr std::size_t kPoints = 8, kClasses = 5, kDim = 6;
  std::vector<std::size_t> labels(kPoints);
  for (auto& l : labels) l = static_cast<std::size_t>(rng.uniform_index(kClasses));

  double worst = 0.0;
  if (objective == Objective::kInfoNce) {
    Matrix p = random_unit_rows(rng, kPoints, kDim);
    const Matrix t = random_unit_rows(rng, kClasses, kDim);
    const Matrix g = infonce_loss(p, t, labels, tau).gradient;
    for (std::size_t i = 0; i < p.rows(); ++i) {
      for (std::size_t c = 0; c < p.cols(); ++c) {
        const double keep = p(i, c);
        p(i, c) = keep + step;
        const double up = infonce_loss(p, t, labels, tau).loss;
        p(i, c) = keep - step;
        const double down = infonce_loss(p, t, labels, tau).loss;
        p(i, c) = keep;
        worst = std::max(worst, relative_error(g(i, c), (up - down) / (2.0 * step)));
      }
    }
  } else {
    Matrix z(kPoints, kClasses);
    for (double& x : z.data()) x = 3.0 * rng.normal();
    const Matrix g = cross_entropy_loss(z, labels).gradient;
    for (std::size_t i = 0; i < z.rows(); ++i) {
      for (std::size_t c = 0; c < z.cols(); ++c) {
        const double keep = z(i, c);
        z(i, c) = keep + step;
        const double up = cross_entropy_loss(z, labels).loss;
        z(i, c) = keep - step;
        const double down = cross_entropy_loss(z, labels).loss;
        z(i, c) = keep;
        worst = std::max(worst, relative_error(g(i, c), (up - down) / (2.0 * step)));
      }
    }
  }
  return worst;
}

PointBatch make_gaussian_clusters(std::size_t classes, std::size_t dim, std::size_t per_class,
                                  double separation, std::uint64_t seed) {
  if (classes == 0 || per_class == 0) throw_validation("clusters need classes and points");
  if (classes > dim) throw_validation("need at least one axis per class");
  Rng rng(seed);
  const double offset = separation / std::sqrt(2.0);
  PointBatch out{Matrix(classes * per_class, dim), {}};
  out.labels.reserve(classes * per_class);
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t i = 0; i < per_class; ++i) {
      auto row = out.features.row(k * per_class + i);
      for (double& x : row) x = rng.normal();
      row[k] += offset;
      out.labels.push_back(k);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

json layer_json(const DenseLayer& l) {
  return {{"in", l.in()}, {"out", l.out()}, {"weights", Vector(l.weights.data().begin(), l.weights.data().end())},
          {"bias", l.bias}};
}

DenseLayer layer_from(const json& j, const std::string& where) {
  const auto in = detail::require(j, "in", where).get<std::size_t>();
  const auto out = detail::require(j, "out", where).get<std::size_t>();
  const auto w = detail::require(j, "weights", where).get<Vector>();
  auto b = detail::require(j, "bias", where).get<Vector>();
  if (w.size() != in * out || b.size() != out) throw_validation(where + ": weight shape mismatch");
  DenseLayer l{Matrix(out, in), std::move(b)};
  std::copy(w.begin(), w.end(), l.weights.data().begin());
  return l;
}

}  // namespace

std::string serialize_model(const ModelFile& file) {
  json layers = json::array();
  for (const auto& l : file.model.projector.layers()) layers.push_back(layer_json(l));
  json doc = {{"layer_sizes", file.model.projector.sizes()},
              {"activation", to_string(file.model.projector.activation())},
              {"objective", to_string(file.objective)},
              {"layers", layers},
              {"selection_digest", file.selection_digest}};
  if (file.model.head) doc["head"] = layer_json(*file.model.head);
  return detail::canonical_dump(doc);
}

ModelFile parse_model(std::string_view text, std::string_view origin) {
  const json doc = detail::parse_json(text, origin);
  const std::string root(origin);
  try {
    const auto act = parse_activation(detail::require(doc, "activation", root).get<std::string>());
    const auto obj = parse_objective(detail::require(doc, "objective", root).get<std::string>());
    if (!act || !obj) throw_validation(root + ": unknown activation or objective");
    std::vector<DenseLayer> layers;
    const json& lj = detail::require(doc, "layers", root);
    for (std::size_t l = 0; l < lj.size(); ++l)
      layers.push_back(layer_from(lj[l], root + ": layers[" + std::to_string(l) + "]"));
    ModelFile file{{Projector(std::move(layers), *act), std::nullopt},
                   *obj,
                   detail::require(doc, "selection_digest", root).get<std::string>()};
    if (file.model.projector.sizes() != detail::require(doc, "layer_sizes", root).get<std::vector<std::size_t>>())
      throw_validation(root + ": layer_sizes disagree with layer shapes");
    if (auto it = doc.find("head"); it != doc.end()) file.model.head = layer_from(*it, root + ": head");
    return file;
  } catch (const json::exception& e) {
    throw_validation(root + ": malformed model file (" + e.what() + ")");
  }
}

void save_model(const ModelFile& file, const std::filesystem::path& path) {
  write_text_file_atomic(path, serialize_model(file));
}

ModelFile load_model(const std::filesystem::path& path) { return parse_model(read_text_file(path), path.string()); }

}  // namespace langsup
