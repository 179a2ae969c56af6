#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "langsup/numeric.hpp"

namespace langsup {

/// Raw point features with integer category labels.
struct PointBatch {
  Matrix features;                  // N x d_in
  std::vector<std::size_t> labels;  // N entries in [0, m)

  std::size_t size() const noexcept { return labels.size(); }
  // Throws unless rows are finite, labels < num_classes, and counts agree.
  void check(std::size_t num_classes) const;
};

enum class Activation { kRelu, kTanh };
std::string_view to_string(Activation a) noexcept;
std::optional<Activation> parse_activation(std::string_view s) noexcept;

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out

  std::size_t in() const noexcept { return weights.cols(); }
  std::size_t out() const noexcept { return weights.rows(); }
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// MLP mapping raw point features into the text-feature space. The
/// activation sits between layers, never after the last one, and the
/// output rows are L2-normalized.
class Projector {
 public:
  Projector(std::vector<DenseLayer> layers, Activation activation);

  // Uniform(-sqrt(6/fan_in), sqrt(6/fan_in)) weights, zero biases.
  static Projector initialize(const std::vector<std::size_t>& sizes, Activation activation,
                              std::uint64_t seed);

  std::vector<std::size_t> sizes() const;
  std::size_t input_dim() const { return layers_.front().in(); }
  std::size_t output_dim() const { return layers_.back().out(); }
  Activation activation() const noexcept { return activation_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& mutable_layers() noexcept { return layers_; }

  friend bool operator==(const Projector&, const Projector&) = default;

 private:
  std::vector<DenseLayer> layers_;
  Activation activation_;
};

// Unit-norm output rows. A row whose pre-normalization output is zero is a
// validation error.
Matrix project(const Projector& projector, const Matrix& features);
Matrix project(const Projector& projector, const PointBatch& batch);

enum class Objective { kInfoNce, kCrossEntropy };
std::string_view to_string(Objective o) noexcept;
std::optional<Objective> parse_objective(std::string_view s) noexcept;

enum class Optimizer { kSgd, kSgdMomentum };
std::string_view to_string(Optimizer o) noexcept;
std::optional<Optimizer> parse_optimizer(std::string_view s) noexcept;

struct TrainConfig {
  Objective objective = Objective::kInfoNce;
  double tau = 0.07;
  double learning_rate = 0.05;
  int epochs = 500;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;  // fans out to "train.init" and "train.shuffle"
  Optimizer optimizer = Optimizer::kSgdMomentum;
  double momentum = 0.9;
  std::size_t hidden = 64;
  Activation activation = Activation::kRelu;

  void check() const;
};

struct EpochStats {
  int epoch;
  double loss;
  double accuracy;
};

struct LossReport {
  double value = 0.0;          // final epoch-average loss
  double gradient_norm = 0.0;  // full-data gradient norm after training
  std::vector<EpochStats> history;
};

struct LossAndGradient {
  double loss;
  Matrix gradient;  // same shape as the differentiated input
};

// Mean over rows of -log softmax(P T^T / tau)[label], with the gradient
// with respect to P taken as a free matrix. Rows of P and T must be unit
// norm within 1e-4.
LossAndGradient infonce_loss(const Matrix& points, const Matrix& texts,
                             const std::vector<std::size_t>& labels, double tau);

// Mean over rows of -log softmax(Z)[label]; gradient softmax(Z) - onehot,
// divided by N.
LossAndGradient cross_entropy_loss(const Matrix& logits, const std::vector<std::size_t>& labels);

/// Trainable model: projector plus, for the one-hot objective, a linear
/// k-way head on the normalized projector output.
struct Model {
  Projector projector;
  std::optional<DenseLayer> head;
};

struct ModelGradient {
  std::vector<DenseLayer> projector;
  std::optional<DenseLayer> head;
};

// Objective value over the batch and, when `grad` is non-null, its exact
// gradient with respect to every parameter (backpropagated through the
// output normalization). `texts` is ignored for cross-entropy.
double evaluate_objective(const Model& model, const PointBatch& batch, const Matrix& texts,
                          const TrainConfig& config, ModelGradient* grad);

// Predicted class per point: argmax over text similarity (InfoNCE) or over
// head logits (cross-entropy).
std::vector<std::size_t> predict(const Model& model, const PointBatch& batch, const Matrix& texts);

struct TrainResult {
  Model model;
  LossReport report;
};

// Mini-batch gradient descent with a seeded shuffle per epoch. A non-finite
// loss raises an error naming the epoch.
TrainResult train(const PointBatch& batch, const Matrix& texts, const TrainConfig& config);

struct Prediction {
  std::size_t index;
  double score;
};

// argmax_j p . t_j per row; ties go to the lowest index.
std::vector<Prediction> classify(const Matrix& points, const Matrix& texts);

// Random small instance (N=8; m=5, d=6 for InfoNCE; k=5 for cross-entropy)
// and the largest entrywise |analytic - numeric| / max(|analytic|,
// |numeric|, 1e-6) against central differences.
double finite_diff_check(Objective objective, std::uint64_t instance_seed, double tau = 0.07,
                         double step = 1e-5);

// `classes` Gaussian clusters in `dim` dimensions with unit within-class
// standard deviation; class means sit at separation/sqrt(2) along distinct
// axes, so every pair of means is exactly `separation` apart.
PointBatch make_gaussian_clusters(std::size_t classes, std::size_t dim, std::size_t per_class,
                                  double separation, std::uint64_t seed);

// Trained-model file: layer sizes, row-major weights, activation, objective,
// and the digest of the selection the text features came from.
struct ModelFile {
  Model model;
  Objective objective = Objective::kInfoNce;
  std::string selection_digest;
};

std::string serialize_model(const ModelFile& file);
ModelFile parse_model(std::string_view text, std::string_view origin = "<memory>");
void save_model(const ModelFile& file, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace langsup
