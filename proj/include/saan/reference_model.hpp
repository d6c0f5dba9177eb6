#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "saan/ccsa_loss.hpp"
#include "saan/center_allocator.hpp"
#include "saan/embedding.hpp"

namespace saan {

struct LabeledInput {
  Vector x;
  ClassLabel label;
};

// x -> tanh(W1 x + b1) -> W2 h + b2
struct FeatureExtractor {
  Matrix w1;  // hidden x input
  Vector b1;
  Matrix w2;  // d x hidden
  Vector b2;

  int input_dim() const { return static_cast<int>(w1.cols()); }
  int hidden_dim() const { return static_cast<int>(w1.rows()); }
  int embedding_dim() const { return static_cast<int>(w2.rows()); }

  Embedding forward(const Vector& x) const;
  // Column-wise forward of an input_dim x m block.
  Matrix forward(const Matrix& inputs) const;
};

// phi(x) = W^T f(x); one column per seen class, in arrival order.
struct ClassifierHead {
  Matrix weight;  // d x classes
  std::vector<ClassLabel> labels;

  int classes() const { return static_cast<int>(labels.size()); }
  int column_of(ClassLabel label) const;  // throws UnknownClass
  Vector logits(const Embedding& e) const { return weight.transpose() * e; }
  void expand(std::span<const ClassLabel> new_labels, const Matrix& new_columns);
};

struct FrozenMask {
  bool layer1 = false;
  bool layer2 = false;
  bool head = false;

  bool all() const { return layer1 && layer2 && head; }
};

struct Model {
  FeatureExtractor extractor;
  ClassifierHead head;
  FrozenMask frozen;
};

// Small random weights (variance 1/fan_in), zero biases, no head columns.
Model init_model(int input_dim, int hidden_dim, int embedding_dim, std::uint64_t seed);

double cross_entropy(const Vector& logits, int target);

// Which center-loss terms take part in one step. Weights of exactly zero
// skip the term entirely, so a zero-weight run is the CE-only trainer.
struct CenterTerms {
  LossWeights weights{0.0, 0.0};
  bool l2_active = false;

  bool active() const { return weights.alpha != 0.0 || (l2_active && weights.beta != 0.0); }
};

// Gradients for trainable blocks only; frozen blocks stay empty.
struct ParameterGradients {
  std::optional<Matrix> w1;
  std::optional<Vector> b1;
  std::optional<Matrix> w2;
  std::optional<Vector> b2;
  std::optional<Matrix> head;

  bool empty() const { return !w1 && !b1 && !w2 && !b2 && !head; }
};

struct BackpropResult {
  ParameterGradients gradients;
  double cross_entropy = 0.0;  // batch mean
  LossBreakdown center;
  double total = 0.0;
  std::vector<LabeledEmbedding> embeddings;
};

// L_ce + alpha L1 + beta L2 over one batch, for the model as-is.
double total_loss(std::span<const LabeledInput> batch, const Model& model,
                  const CenterBank* bank, const CenterTerms& terms);

// bank may be null when terms are inactive.
BackpropResult backprop_step(std::span<const LabeledInput> batch, const Model& model,
                             const CenterBank* bank, const CenterTerms& terms);

void apply_gradients(Model& model, const ParameterGradients& grads, double learning_rate);

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 400;
  int batch_size = 32;
  int warmup_epochs = 40;
  int hidden_dim = 64;
  LossWeights weights;
  double eta0 = 0.5;
  double lambda = 0.1;
  double incremental_learning_rate = 0.01;
  int incremental_epochs = 10;
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidConfig naming the field
};

struct TrainReport {
  double loss_first_epoch = 0.0;
  double loss_last_epoch = 0.0;
  // Mean within-class cos<e, c_y> over the training set, when centers are
  // first bound and after the last epoch.
  double cos_to_center_at_assignment = 0.0;
  double cos_to_center_final = 0.0;
};

struct TrainedState {
  Model model;
  CenterBank bank;
  TrainReport report;
};

// Warm-up epochs with CE only, then direction means of the training
// embeddings are matched to centers, then L_ce + alpha L1 + beta L2 with
// per-batch center updates and per-epoch eta decay.
TrainedState train_base_session(std::span<const LabeledInput> data, CenterBank bank,
                                const TrainConfig& config);

// Freezes layer1, expands the head, binds the new classes to free centers
// and fine-tunes with L_ce + alpha L1 (L2 off).
TrainedState finetune_incremental(std::span<const LabeledInput> data, TrainedState state,
                                  const TrainConfig& config, SessionIndex session);

// Mean cos<e, c_y> over samples whose label holds a center.
double mean_cos_to_center(std::span<const LabeledEmbedding> embedded, const CenterBank& bank);

std::vector<LabeledEmbedding> embed_all(const FeatureExtractor& f,
                                        std::span<const LabeledInput> data);

}  // namespace saan
