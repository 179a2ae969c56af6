#include <gtest/gtest.h>

#include <cmath>

#include "langsup/contrastive.hpp"
#include "langsup/io.hpp"
#include "langsup/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace langsup {
namespace {

using testing::error_kind;

Matrix identity_rows(std::size_t rows, std::size_t dim) {
  Matrix m(rows, dim);
  for (std::size_t i = 0; i < rows; ++i) m(i, i) = 1.0;
  return m;
}

TEST(InfoNce, OrthogonalPointGivesLnM) {
  Matrix p(1, 5);
  p(0, 4) = 1.0;
  const auto r = infonce_loss(p, identity_rows(4, 5), {0}, 0.07);
  EXPECT_NEAR(r.loss, std::log(4.0), 1e-12);
  EXPECT_NEAR(r.loss, 1.386294, 1e-6);
}

TEST(InfoNce, MatchedPointClosedForm) {
  const Matrix t = identity_rows(2, 2);
  const Matrix p = Matrix::from_rows({{1, 0}});
  const auto r = infonce_loss(p, t, {0}, 1.0);
  EXPECT_NEAR(r.loss, std::log(1.0 + std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(r.loss, 0.313262, 1e-6);
}

TEST(InfoNce, UniformSimilarityIsLnMForAnyTau) {
  Rng rng(2);
  for (std::size_t m : {2u, 3u, 7u, 20u}) {
    // Every text at the same angle to the point: p = e0, t_j = a e0 + b e_{j+1}.
    Matrix t(m, m + 1);
    for (std::size_t j = 0; j < m; ++j) {
      t(j, 0) = 0.6;
      t(j, j + 1) = 0.8;
    }
    Matrix p(3, m + 1);
    for (std::size_t i = 0; i < 3; ++i) p(i, 0) = 1.0;
    for (double tau : {0.07, 0.5, 1.0})
      EXPECT_NEAR(infonce_loss(p, t, {0, m - 1, m / 2}, tau).loss, std::log(static_cast<double>(m)), 1e-9);
  }
}

TEST(InfoNce, RejectsUnnormalizedRowsAndBadLabels) {
  const Matrix t = identity_rows(2, 2);
  EXPECT_EQ(error_kind([&] { infonce_loss(Matrix::from_rows({{2, 0}}), t, {0}, 0.07); }), ErrorKind::kValidation);
  EXPECT_EQ(error_kind([&] { infonce_loss(Matrix::from_rows({{1, 0}}), t, {2}, 0.07); }), ErrorKind::kValidation);
  EXPECT_EQ(error_kind([&] { infonce_loss(Matrix::from_rows({{1, 0}}), t, {0}, 0.0); }), ErrorKind::kValidation);
}

TEST(InfoNce, SharpTemperatureStaysFinite) {
  const Matrix t = identity_rows(3, 3);
  const Matrix p = Matrix::from_rows({{1, 0, 0}});
  const auto r = infonce_loss(p, t, {2}, 1e-4);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_NEAR(r.loss, 1.0 / 1e-4, 1e-6);
}

TEST(CrossEntropy, ClosedForms) {
  const auto r = cross_entropy_loss(Matrix::from_rows({{2, 0, 0}}), {0});
  EXPECT_NEAR(r.loss, std::log(1.0 + 2.0 * std::exp(-2.0)), 1e-12);
  for (std::size_t k : {2u, 5u, 13u}) {
    const Matrix z(4, k, 0.3);
    EXPECT_NEAR(cross_entropy_loss(z, {0, 1, 0, 1}).loss, std::log(static_cast<double>(k)), 1e-12);
  }
  const auto g = cross_entropy_loss(Matrix::from_rows({{0, 0}}), {1}).gradient;
  EXPECT_NEAR(g(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(g(0, 1), -0.5, 1e-15);
}

TEST(GradientCheck, InfoNceAndCrossEntropy) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EXPECT_LT(finite_diff_check(Objective::kInfoNce, seed, 0.07), 1e-4) << seed;
    EXPECT_LT(finite_diff_check(Objective::kInfoNce, seed, 1.0), 1e-4) << seed;
    EXPECT_LT(finite_diff_check(Objective::kCrossEntropy, seed), 1e-4) << seed;
    EXPECT_LT(finite_diff_check(Objective::kInfoNce, seed, 0.07, 1e-6), 1e-4) << seed;
  }
}

// Central differences through the whole model: every projector weight and
// bias plus the head, for both objectives.
double model_gradient_error(Objective objective, Activation act, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = 6, d_in = 5, classes = 3, d = 4;
  PointBatch batch{Matrix(n, d_in), {}};
  for (double& x : batch.features.data()) x = rng.normal();
  for (std::size_t i = 0; i < n; ++i) batch.labels.push_back(i % classes);
  Matrix texts(classes, d);
  for (std::size_t k = 0; k < classes; ++k) {
    const Vector u = oracle::unit_vector(rng, d);
    for (std::size_t c = 0; c < d; ++c) texts(k, c) = u[c];
  }
  TrainConfig cfg;
  cfg.objective = objective;
  cfg.tau = 0.5;
  Model model{Projector::initialize({d_in, 7, d}, act, seed), std::nullopt};
  if (objective == Objective::kCrossEntropy) {
    DenseLayer head{Matrix(classes, d), Vector(classes)};
    for (double& w : head.weights.data()) w = rng.normal();
    for (double& b : head.bias) b = rng.normal();
    model.head = head;
  }
  // Nonzero biases so their gradients are exercised.
  for (auto& layer : model.projector.mutable_layers())
    for (double& b : layer.bias) b = 0.1 * rng.normal();

  ModelGradient grad;
  evaluate_objective(model, batch, texts, cfg, &grad);
  const double h = 1e-6;
  double worst = 0.0;
  auto check = [&](double& param, double analytic) {
    const double keep = param;
    param = keep + h;
    const double up = evaluate_objective(model, batch, texts, cfg, nullptr);
    param = keep - h;
    const double down = evaluate_objective(model, batch, texts, cfg, nullptr);
    param = keep;
    const double numeric = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6}));
  };
  auto& layers = model.projector.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t i = 0; i < layers[l].weights.data().size(); ++i)
      check(layers[l].weights.data()[i], grad.projector[l].weights.data()[i]);
    for (std::size_t i = 0; i < layers[l].bias.size(); ++i) check(layers[l].bias[i], grad.projector[l].bias[i]);
  }
  if (model.head) {
    for (std::size_t i = 0; i < model.head->weights.data().size(); ++i)
      check(model.head->weights.data()[i], grad.head->weights.data()[i]);
    for (std::size_t i = 0; i < model.head->bias.size(); ++i) check(model.head->bias[i], grad.head->bias[i]);
  }
  return worst;
}

TEST(GradientCheck, FullModelBackprop) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EXPECT_LT(model_gradient_error(Objective::kInfoNce, Activation::kTanh, seed), 1e-4) << seed;
    EXPECT_LT(model_gradient_error(Objective::kCrossEntropy, Activation::kTanh, seed), 1e-4) << seed;
    EXPECT_LT(model_gradient_error(Objective::kInfoNce, Activation::kRelu, seed), 1e-4) << seed;
  }
}

TEST(Projector, ZeroWeightsAreDegenerate) {
  const Projector p({DenseLayer{Matrix(3, 3), Vector(3, 0.0)}}, Activation::kRelu);
  EXPECT_EQ(error_kind([&] { project(p, Matrix::from_rows({{1, 0, 0}})); }), ErrorKind::kValidation);
}

TEST(Projector, IdentityLayerReturnsUnitRow) {
  const Projector p({DenseLayer{identity_rows(3, 3), Vector(3, 0.0)}}, Activation::kRelu);
  const Matrix out = project(p, Matrix::from_rows({{0.6, -0.8, 0}}));
  EXPECT_EQ(out.row_vector(0), (Vector{0.6, -0.8, 0}));
}

TEST(Projector, SeededInitIsDeterministic) {
  const auto a = Projector::initialize({16, 64, 8}, Activation::kRelu, 3);
  const auto b = Projector::initialize({16, 64, 8}, Activation::kRelu, 3);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, Projector::initialize({16, 64, 8}, Activation::kRelu, 4));
  EXPECT_EQ(a.sizes(), (std::vector<std::size_t>{16, 64, 8}));
  const double bound = std::sqrt(6.0 / 16.0);
  for (double w : a.layers()[0].weights.data()) EXPECT_LE(std::abs(w), bound);
  const auto batch = make_gaussian_clusters(4, 16, 5, 8.0, 1);
  EXPECT_EQ(project(a, batch), project(b, batch));
}

TEST(Classify, ExactMatchScoresOne) {
  const Matrix t = identity_rows(3, 4);
  const auto preds = classify(Matrix::from_rows({{0, 0, 1, 0}}), t);
  EXPECT_EQ(preds[0].index, 2u);
  EXPECT_DOUBLE_EQ(preds[0].score, 1.0);
  // Ties go to the lowest index.
  const auto tie = classify(Matrix::from_rows({{1, 1, 0, 0}}), t);
  EXPECT_EQ(tie[0].index, 0u);
}

TEST(Clusters, MeansArePairwiseSeparated) {
  const auto b = make_gaussian_clusters(4, 16, 2000, 8.0, 5);
  std::vector<Vector> means(4, Vector(16, 0.0));
  for (std::size_t i = 0; i < b.size(); ++i)
    for (std::size_t c = 0; c < 16; ++c) means[b.labels[i]][c] += b.features(i, c) / 2000.0;
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t c = a + 1; c < 4; ++c) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < 16; ++k) d2 += (means[a][k] - means[c][k]) * (means[a][k] - means[c][k]);
      EXPECT_NEAR(std::sqrt(d2), 8.0, 0.3);
    }
  EXPECT_EQ(error_kind([] { make_gaussian_clusters(5, 4, 1, 1.0, 0); }), ErrorKind::kValidation);
}

TrainConfig small_config(Objective objective) {
  TrainConfig cfg;
  cfg.objective = objective;
  cfg.epochs = 30;
  cfg.seed = 17;
  return cfg;
}

Matrix toy_texts() {
  return Matrix::from_rows({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}});
}

TEST(Train, DeterministicHistory) {
  const auto batch = make_gaussian_clusters(4, 8, 30, 8.0, 2);
  for (auto obj : {Objective::kInfoNce, Objective::kCrossEntropy}) {
    const auto a = train(batch, toy_texts(), small_config(obj));
    const auto b = train(batch, toy_texts(), small_config(obj));
    ASSERT_EQ(a.report.history.size(), 30u);
    for (std::size_t e = 0; e < a.report.history.size(); ++e) {
      EXPECT_EQ(a.report.history[e].loss, b.report.history[e].loss);
      EXPECT_EQ(a.report.history[e].accuracy, b.report.history[e].accuracy);
    }
    EXPECT_EQ(a.model.projector, b.model.projector);
  }
}

TEST(Train, LearnsSeparableClusters) {
  const auto batch = make_gaussian_clusters(4, 8, 30, 8.0, 2);
  for (auto obj : {Objective::kInfoNce, Objective::kCrossEntropy}) {
    auto cfg = small_config(obj);
    cfg.epochs = 60;
    const auto r = train(batch, toy_texts(), cfg);
    EXPECT_GE(r.report.history.back().accuracy, 0.99) << to_string(obj);
    EXPECT_LT(r.report.history.back().loss, r.report.history.front().loss);
    const auto pred = predict(r.model, batch, toy_texts());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch.labels[i];
    EXPECT_GE(correct, 119u);
  }
}

TEST(Train, DivergenceNamesTheEpoch) {
  const auto batch = make_gaussian_clusters(4, 8, 10, 8.0, 2);
  auto cfg = small_config(Objective::kCrossEntropy);
  cfg.learning_rate = 1e300;
  std::string msg;
  error_kind([&] { train(batch, toy_texts(), cfg); }, &msg);
  EXPECT_NE(msg.find("epoch"), std::string::npos) << msg;
}

TEST(Train, RejectsBadConfig) {
  const auto batch = make_gaussian_clusters(4, 8, 10, 8.0, 2);
  auto cfg = small_config(Objective::kInfoNce);
  cfg.tau = 0.0;
  EXPECT_EQ(error_kind([&] { train(batch, toy_texts(), cfg); }), ErrorKind::kValidation);
  cfg = small_config(Objective::kInfoNce);
  cfg.batch_size = 0;
  EXPECT_EQ(error_kind([&] { train(batch, toy_texts(), cfg); }), ErrorKind::kValidation);
  PointBatch bad = batch;
  bad.labels[0] = 9;
  EXPECT_EQ(error_kind([&] { train(bad, toy_texts(), small_config(Objective::kInfoNce)); }), ErrorKind::kValidation);
}

TEST(ModelFile, RoundTrip) {
  const auto batch = make_gaussian_clusters(4, 8, 10, 8.0, 2);
  for (auto obj : {Objective::kInfoNce, Objective::kCrossEntropy}) {
    auto cfg = small_config(obj);
    cfg.epochs = 2;
    const auto r = train(batch, toy_texts(), cfg);
    const ModelFile file{r.model, obj, "abc123"};
    const std::string text = serialize_model(file);
    const ModelFile back = parse_model(text);
    EXPECT_EQ(back.model.projector, r.model.projector);
    EXPECT_EQ(back.model.head.has_value(), obj == Objective::kCrossEntropy);
    EXPECT_EQ(back.selection_digest, "abc123");
    EXPECT_EQ(serialize_model(back), text);
  }
  EXPECT_EQ(error_kind([] { parse_model("{}"); }), ErrorKind::kValidation);
}

TEST(Enums, NamesRoundTrip) {
  for (auto o : {Objective::kInfoNce, Objective::kCrossEntropy}) EXPECT_EQ(parse_objective(to_string(o)), o);
  for (auto o : {Optimizer::kSgd, Optimizer::kSgdMomentum}) EXPECT_EQ(parse_optimizer(to_string(o)), o);
  for (auto a : {Activation::kRelu, Activation::kTanh}) EXPECT_EQ(parse_activation(to_string(a)), a);
  EXPECT_FALSE(parse_objective("mse"));
}

}  // namespace
}  // namespace langsup
