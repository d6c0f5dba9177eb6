#include "saan/reference_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "saan/error.hpp"

namespace saan {

Embedding FeatureExtractor::forward(const Vector& x) const {
  if (x.size() != w1.cols()) {
    throw Error(Errc::DimensionMismatch,
                "input of size " + std::to_string(x.size()) + ", extractor expects " +
                    std::to_string(w1.cols()));
  }
  const Vector h = (w1 * x + b1).array().tanh().matrix();
  return w2 * h + b2;
}

Matrix FeatureExtractor::forward(const Matrix& inputs) const {
  if (inputs.rows() != w1.cols()) {
    throw Error(Errc::DimensionMismatch, "input block has wrong row count");
  }
  const Matrix h = ((w1 * inputs).colwise() + b1).array().tanh().matrix();
  return (w2 * h).colwise() + b2;
}

int ClassifierHead::column_of(ClassLabel label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) {
    throw Error(Errc::UnknownClass, "label " + std::to_string(label.id) + " not in head");
  }
  return static_cast<int>(it - labels.begin());
}

void ClassifierHead::expand(std::span<const ClassLabel> new_labels,
                            const Matrix& new_columns) {
  if (new_columns.cols() != static_cast<Eigen::Index>(new_labels.size()) ||
      (weight.size() != 0 && new_columns.rows() != weight.rows())) {
    throw Error(Errc::DimensionMismatch, "head expansion block has wrong shape");
  }
  for (ClassLabel l : new_labels) {
    if (std::find(labels.begin(), labels.end(), l) != labels.end()) {
      throw Error(Errc::InvalidConfig, "label " + std::to_string(l.id) + " already in head");
    }
  }
  Matrix grown(new_columns.rows(), weight.cols() + new_columns.cols());
  if (weight.cols() > 0) grown.leftCols(weight.cols()) = weight;
  grown.rightCols(new_columns.cols()) = new_columns;
  weight = std::move(grown);
  labels.insert(labels.end(), new_labels.begin(), new_labels.end());
}

Model init_model(int input_dim, int hidden_dim, int embedding_dim, std::uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1 || embedding_dim < 2) {
    throw Error(Errc::InvalidDimension, "model dimensions must be positive (d >= 2)");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](Eigen::Index rows, Eigen::Index cols, double scale) {
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = scale * normal(rng);
    return m;
  };
  Model model;
  model.extractor.w1 = draw(hidden_dim, input_dim, 1.0 / std::sqrt(double(input_dim)));
  model.extractor.b1 = Vector::Zero(hidden_dim);
  model.extractor.w2 = draw(embedding_dim, hidden_dim, 1.0 / std::sqrt(double(hidden_dim)));
  model.extractor.b2 = Vector::Zero(embedding_dim);
  model.head.weight = Matrix(embedding_dim, 0);
  return model;
}

double cross_entropy(const Vector& logits, int target) {
  if (target < 0 || target >= logits.size()) {
    throw Error(Errc::UnknownClass, "target column out of range");
  }
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  return lse - logits(target);
}

namespace {

struct BatchTensors {
  Matrix inputs;   // input x m
  Matrix hidden;   // hidden x m, post-tanh
  Matrix embed;    // d x m
  std::vector<int> targets;
};

BatchTensors forward_batch(std::span<const LabeledInput> batch, const Model& model) {
  const auto& f = model.extractor;
  BatchTensors t;
  const auto m = static_cast<Eigen::Index>(batch.size());
  t.inputs.resize(f.w1.cols(), m);
  t.targets.reserve(batch.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& s = batch[static_cast<std::size_t>(i)];
    if (s.x.size() != f.w1.cols()) {
      throw Error(Errc::DimensionMismatch, "batch input has wrong dimension");
    }
    t.inputs.col(i) = s.x;
    t.targets.push_back(model.head.column_of(s.label));
  }
  t.hidden = ((f.w1 * t.inputs).colwise() + f.b1).array().tanh().matrix();
  t.embed = (f.w2 * t.hidden).colwise() + f.b2;
  return t;
}

std::vector<LabeledEmbedding> labeled(const Matrix& embed, std::span<const LabeledInput> batch) {
  std::vector<LabeledEmbedding> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.push_back({embed.col(static_cast<Eigen::Index>(i)), batch[i].label});
  }
  return out;
}

}  // namespace

double total_loss(std::span<const LabeledInput> batch, const Model& model,
                  const CenterBank* bank, const CenterTerms& terms) {
  if (batch.empty()) throw Error(Errc::EmptyBatch, "loss over empty batch");
  const BatchTensors t = forward_batch(batch, model);
  const Matrix logits = model.head.weight.transpose() * t.embed;
  double ce = 0.0;
  for (Eigen::Index i = 0; i < logits.cols(); ++i) {
    ce += cross_entropy(logits.col(i), t.targets[static_cast<std::size_t>(i)]);
  }
  ce /= static_cast<double>(batch.size());
  if (!terms.active()) return ce;
  const auto embedded = labeled(t.embed, batch);
  double total = ce;
  if (terms.weights.alpha != 0.0) total += terms.weights.alpha * loss_l1(embedded, *bank);
  if (terms.l2_active && terms.weights.beta != 0.0) {
    total += terms.weights.beta * loss_l2(embedded, *bank);
  }
  return total;
}

BackpropResult backprop_step(std::span<const LabeledInput> batch, const Model& model,
                             const CenterBank* bank, const CenterTerms& terms) {
  if (batch.empty()) throw Error(Errc::EmptyBatch, "backprop over empty batch");
  if (terms.active() && bank == nullptr) {
    throw Error(Errc::InvalidConfig, "center terms active without a center bank");
  }
  const auto& f = model.extractor;
  const BatchTensors t = forward_batch(batch, model);
  const auto m = static_cast<Eigen::Index>(batch.size());
  const double inv_m = 1.0 / static_cast<double>(m);

  BackpropResult out;
  out.embeddings = labeled(t.embed, batch);

  // Softmax cross-entropy.
  Matrix dlogits = model.head.weight.transpose() * t.embed;  // k x m
  for (Eigen::Index i = 0; i < m; ++i) {
    auto col = dlogits.col(i);
    const int y = t.targets[static_cast<std::size_t>(i)];
    const double top = col.maxCoeff();
    col = (col.array() - top).exp().matrix();
    const double z = col.sum();
    out.cross_entropy += std::log(z) - std::log(col(y));
    col /= z;
    col(y) -= 1.0;
  }
  out.cross_entropy *= inv_m;
  dlogits *= inv_m;

  Matrix dembed = model.head.weight * dlogits;  // d x m
  if (terms.active()) {
    const int batch_size = static_cast<int>(m);
    const bool use_l1 = terms.weights.alpha != 0.0;
    const bool use_l2 = terms.l2_active && terms.weights.beta != 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& s = out.embeddings[static_cast<std::size_t>(i)];
      if (use_l1) {
        dembed.col(i) -= terms.weights.alpha *
                         grad_l1_embedding(s.embedding, bank->center_of(s.label), batch_size);
      }
      if (use_l2) {
        dembed.col(i) +=
            terms.weights.beta * grad_l2_embedding(s.embedding, *bank, s.label, batch_size);
      }
    }
    out.center.l1 = use_l1 ? loss_l1(out.embeddings, *bank) : 0.0;
    out.center.l2 = use_l2 ? loss_l2(out.embeddings, *bank) : 0.0;
    out.center.weighted_total = (use_l1 ? terms.weights.alpha * out.center.l1 : 0.0) +
                                (use_l2 ? terms.weights.beta * out.center.l2 : 0.0);
  }
  out.total = out.cross_entropy + out.center.weighted_total;

  auto& g = out.gradients;
  if (!model.frozen.head) g.head = t.embed * dlogits.transpose();
  if (!model.frozen.layer2) {
    g.w2 = dembed * t.hidden.transpose();
    g.b2 = dembed.rowwise().sum();
  }
  if (!model.frozen.layer1) {
    const Matrix dpre =
        ((f.w2.transpose() * dembed).array() * (1.0 - t.hidden.array().square())).matrix();
    g.w1 = dpre * t.inputs.transpose();
    g.b1 = dpre.rowwise().sum();
  }
  return out;
}

void apply_gradients(Model& model, const ParameterGradients& grads, double learning_rate) {
  auto& f = model.extractor;
  if (grads.w1 && !model.frozen.layer1) f.w1 -= learning_rate * *grads.w1;
  if (grads.b1 && !model.frozen.layer1) f.b1 -= learning_rate * *grads.b1;
  if (grads.w2 && !model.frozen.layer2) f.w2 -= learning_rate * *grads.w2;
  if (grads.b2 && !model.frozen.layer2) f.b2 -= learning_rate * *grads.b2;
  if (grads.head && !model.frozen.head) model.head.weight -= learning_rate * *grads.head;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error(Errc::InvalidConfig, "train." + field + ": " + why);
  };
  if (!(learning_rate > 0.0)) fail("learning_rate", "must be > 0");
  if (!(incremental_learning_rate > 0.0)) fail("incremental_learning_rate", "must be > 0");
  if (epochs < 1) fail("epochs", "must be >= 1");
  if (incremental_epochs < 0) fail("incremental_epochs", "must be >= 0");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs >= epochs) {
    fail("warmup_epochs", "must be in [0, epochs)");
  }
  if (hidden_dim < 1) fail("hidden_dim", "must be >= 1");
  if (!(weights.alpha >= 0.0)) fail("alpha", "must be >= 0");
  if (!(weights.beta >= 0.0)) fail("beta", "must be >= 0");
  if (!(eta0 >= 0.0)) fail("eta0", "must be >= 0");
  if (!(lambda > 0.0 && lambda <= 1.0)) fail("lambda", "must be in (0, 1]");
}

std::vector<LabeledEmbedding> embed_all(const FeatureExtractor& f,
                                        std::span<const LabeledInput> data) {
  std::vector<LabeledEmbedding> out;
  out.reserve(data.size());
  for (const auto& s : data) out.push_back({f.forward(s.x), s.label});
  return out;
}

double mean_cos_to_center(std::span<const LabeledEmbedding> embedded, const CenterBank& bank) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : embedded) {
    if (!bank.has_label(s.label)) continue;
    sum += cosine_similarity(s.embedding, bank.center_of(s.label));
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

namespace {

std::map<ClassLabel, Vector> direction_means(std::span<const LabeledEmbedding> embedded) {
  std::map<ClassLabel, std::vector<Vector>> grouped;
  for (const auto& s : embedded) grouped[s.label].push_back(s.embedding);
  std::map<ClassLabel, Vector> means;
  for (const auto& [label, members] : grouped) means.emplace(label, mean_of_normalized(members));
  return means;
}

std::vector<ClassLabel> distinct_labels(std::span<const LabeledInput> data) {
  std::vector<ClassLabel> labels;
  for (const auto& s : data) labels.push_back(s.label);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

// One pass over `data` in shuffled mini-batches; returns the sample-weighted
// mean batch loss.
double run_epoch(std::span<const LabeledInput> data, Model& model, CenterBank& bank,
                 const CenterTerms& terms, const CenterUpdateSchedule* schedule,
                 double learning_rate, int batch_size, std::mt19937_64& rng) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<LabeledInput> batch;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    batch.clear();
    for (std::size_t k = start; k < stop; ++k) batch.push_back(data[order[k]]);
    BackpropResult step = backprop_step(batch, model, &bank, terms);
    apply_gradients(model, step.gradients, learning_rate);
    if (schedule != nullptr) update_centers(bank, step.embeddings, *schedule);
    loss_sum += step.total * static_cast<double>(batch.size());
  }
  return loss_sum / static_cast<double>(data.size());
}

}  // namespace

TrainedState train_base_session(std::span<const LabeledInput> data, CenterBank bank,
                                const TrainConfig& config) {
  config.validate();
  if (data.empty()) throw Error(Errc::EmptyBatch, "base session has no training data");
  const int input_dim = static_cast<int>(data.front().x.size());

  TrainedState state{init_model(input_dim, config.hidden_dim, bank.dimension(), config.seed),
                     std::move(bank), {}};
  std::seed_seq seq{config.seed, std::uint64_t{0}};
  std::mt19937_64 rng(seq);

  const auto labels = distinct_labels(data);
  {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = 1.0 / std::sqrt(double(state.bank.dimension()));
    Matrix cols(state.bank.dimension(), static_cast<Eigen::Index>(labels.size()));
    for (Eigen::Index c = 0; c < cols.cols(); ++c)
      for (Eigen::Index r = 0; r < cols.rows(); ++r) cols(r, c) = scale * normal(rng);
    state.model.head.expand(labels, cols);
  }

  const CenterTerms ce_only{};
  const CenterTerms joint{config.weights, true};
  CenterUpdateSchedule schedule(config.eta0, config.lambda);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (epoch == config.warmup_epochs) {
      const auto embedded = embed_all(state.model.extractor, data);
      state.bank = assign_base_session(state.bank, direction_means(embedded));
      state.report.cos_to_center_at_assignment = mean_cos_to_center(embedded, state.bank);
    }
    const bool centers_on = epoch >= config.warmup_epochs && joint.active();
    const double loss = run_epoch(data, state.model, state.bank, centers_on ? joint : ce_only,
                                  centers_on ? &schedule : nullptr, config.learning_rate,
                                  config.batch_size, rng);
    if (centers_on) schedule.decay();
    if (epoch == 0) state.report.loss_first_epoch = loss;
    state.report.loss_last_epoch = loss;
  }
  state.report.cos_to_center_final =
      mean_cos_to_center(embed_all(state.model.extractor, data), state.bank);
  return state;
}

TrainedState finetune_incremental(std::span<const LabeledInput> data, TrainedState state,
                                  const TrainConfig& config, SessionIndex session) {
  config.validate();
  if (data.empty()) throw Error(Errc::EmptyBatch, "incremental session has no training data");
  state.model.frozen = FrozenMask{true, false, false};

  const auto labels = distinct_labels(data);
  if (static_cast<int>(labels.size()) > static_cast<int>(state.bank.free_indices().size())) {
    throw Error(Errc::TooManyClasses,
                std::to_string(labels.size()) + " new classes for " +
                    std::to_string(state.bank.free_indices().size()) + " free centers");
  }

  const auto embedded = embed_all(state.model.extractor, data);
  const auto means = direction_means(embedded);

  // New head columns start at the class direction, scaled like the old ones.
  {
    const auto& w = state.model.head.weight;
    const double scale = w.cols() > 0 ? w.colwise().norm().mean() : 1.0;
    Matrix cols(w.rows(), static_cast<Eigen::Index>(labels.size()));
    for (std::size_t k = 0; k < labels.size(); ++k) {
      cols.col(static_cast<Eigen::Index>(k)) = scale * normalize(means.at(labels[k]));
    }
    state.model.head.expand(labels, cols);
  }

  state.bank = assign_incremental_session(state.bank, means);
  state.report.cos_to_center_at_assignment = mean_cos_to_center(embedded, state.bank);

  std::seed_seq seq{config.seed, static_cast<std::uint64_t>(session)};
  std::mt19937_64 rng(seq);
  const CenterTerms terms{config.weights, false};
  CenterUpdateSchedule schedule(config.eta0, config.lambda);
  schedule.reset();
  for (int epoch = 0; epoch < config.incremental_epochs; ++epoch) {
    const double loss =
        run_epoch(data, state.model, state.bank, terms, terms.active() ? &schedule : nullptr,
                  config.incremental_learning_rate, config.batch_size, rng);
    if (terms.active()) schedule.decay();
    if (epoch == 0) state.report.loss_first_epoch = loss;
    state.report.loss_last_epoch = loss;
  }
  state.report.cos_to_center_final =
      mean_cos_to_center(embed_all(state.model.extractor, data), state.bank);
  return state;
}

}  // namespace saan
