#include "saan/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>

#include "saan/error.hpp"

namespace saan {

namespace {

[[noreturn]] void config_error(const std::string& field, const std::string& why) {
  throw Error(Errc::InvalidConfig, field + ": " + why);
}

// Draw from N(mean, var); a zero variance returns the mean without
// consuming randomness.
double gaussian(std::mt19937_64& rng, double mean, double var) {
  if (var == 0.0) return mean;
  std::normal_distribution<double> dist(mean, std::sqrt(var));
  return dist(rng);
}

}  // namespace

void ScenarioConfig::validate(int embedding_dim) const {
  if (base_classes < 1) config_error("scenario.base_classes", "must be >= 1");
  if (sessions < 0) config_error("scenario.sessions", "must be >= 0");
  if (total_classes < base_classes) {
    config_error("scenario.total_classes", "must be >= base_classes");
  }
  if (total_classes > embedding_dim) {
    config_error("scenario.total_classes",
                 "exceeds the number of centers (" + std::to_string(embedding_dim) + ")");
  }
  if (mode == ScenarioMode::Conventional) {
    if (ways < 1) config_error("scenario.ways", "must be >= 1");
    if (shots < 1) config_error("scenario.shots", "must be >= 1");
    if (base_classes + sessions * ways > total_classes) {
      config_error("scenario.total_classes", "too small for base_classes + sessions * ways");
    }
  } else {
    if (open_ended.ways_var < 0.0) config_error("scenario.open_ended.ways_var", "must be >= 0");
    if (open_ended.shots_var < 0.0) config_error("scenario.open_ended.shots_var", "must be >= 0");
    if (total_classes - base_classes < sessions) {
      throw Error(Errc::ClassBudgetExceeded,
                  "open-ended plan needs at least one class per session");
    }
  }
}

int round_and_clip(double draw) {
  return static_cast<int>(std::max<long long>(1, std::llround(draw)));
}

std::vector<SessionSpec> sample_open_ended_sessions(const ScenarioConfig& scenario,
                                                    std::uint64_t seed) {
  const int budget = scenario.total_classes - scenario.base_classes;
  if (budget < scenario.sessions) {
    throw Error(Errc::ClassBudgetExceeded,
                std::to_string(budget) + " incremental classes for " +
                    std::to_string(scenario.sessions) + " sessions");
  }
  std::mt19937_64 rng(seed);
  const auto& p = scenario.open_ended;
  std::vector<SessionSpec> plan;
  int remaining = budget;
  int next_label = scenario.base_classes;
  for (int t = 1; t <= scenario.sessions; ++t) {
    const int cap = remaining - (scenario.sessions - t);
    const int ways = std::min(round_and_clip(gaussian(rng, p.ways_mean, p.ways_var)), cap);
    SessionSpec spec;
    spec.index = t;
    for (int k = 0; k < ways; ++k) {
      spec.classes.emplace_back(next_label++);
      spec.shots.push_back(round_and_clip(gaussian(rng, p.shots_mean, p.shots_var)));
    }
    remaining -= ways;
    plan.push_back(std::move(spec));
  }
  return plan;
}

std::vector<SessionSpec> plan_sessions(const ScenarioConfig& scenario, int base_shots,
                                       std::uint64_t seed) {
  std::vector<SessionSpec> plan;
  SessionSpec base;
  base.index = 0;
  for (int c = 0; c < scenario.base_classes; ++c) {
    base.classes.emplace_back(c);
    base.shots.push_back(base_shots);
  }
  plan.push_back(std::move(base));

  if (scenario.mode == ScenarioMode::OpenEnded) {
    auto rest = sample_open_ended_sessions(scenario, seed);
    plan.insert(plan.end(), rest.begin(), rest.end());
    return plan;
  }
  int next_label = scenario.base_classes;
  for (int t = 1; t <= scenario.sessions; ++t) {
    SessionSpec spec;
    spec.index = t;
    for (int k = 0; k < scenario.ways; ++k) {
      spec.classes.emplace_back(next_label++);
      spec.shots.push_back(scenario.shots);
    }
    plan.push_back(std::move(spec));
  }
  return plan;
}

void SyntheticGeneratorConfig::validate() const {
  if (input_dim < 2) config_error("generator.input_dim", "must be >= 2");
  if (angular_noise < 0.0) config_error("generator.angular_noise", "must be >= 0");
  if (base_log_norm_gap < 0.0) config_error("generator.base_log_norm_gap", "must be >= 0");
  if (base_log_norm_sigma < 0.0) config_error("generator.base_log_norm_sigma", "must be >= 0");
  if (incremental_log_norm_sigma < 0.0) {
    config_error("generator.incremental_log_norm_sigma", "must be >= 0");
  }
  if (base_train_per_class < 1) config_error("generator.base_train_per_class", "must be >= 1");
  if (base_test_per_class < 1) config_error("generator.base_test_per_class", "must be >= 1");
  if (novel_test_per_class < 1) config_error("generator.novel_test_per_class", "must be >= 1");
}

double base_class_log_norm_mean(const SyntheticGeneratorConfig& config, int index,
                                int base_classes) {
  const double offset = index - 0.5 * (base_classes - 1);
  return config.base_log_norm_center + offset * config.base_log_norm_gap;
}

SessionIndex Dataset::last_session() const {
  SessionIndex last = 0;
  for (const auto& r : records) last = std::max(last, r.session);
  return last;
}

std::vector<LabeledInput> Dataset::train(SessionIndex session) const {
  std::vector<LabeledInput> out;
  for (const auto& r : records) {
    if (r.session == session && r.split == Split::Train) out.push_back({r.x, r.label});
  }
  return out;
}

std::vector<const DataRecord*> Dataset::test_upto(SessionIndex session) const {
  std::vector<const DataRecord*> out;
  for (const auto& r : records) {
    if (r.session <= session && r.split == Split::Test) out.push_back(&r);
  }
  return out;
}

std::set<ClassLabel> Dataset::classes_of(SessionIndex session) const {
  std::set<ClassLabel> out;
  for (const auto& r : records) {
    if (r.session == session) out.insert(r.label);
  }
  return out;
}

Dataset generate_synthetic(const ScenarioConfig& scenario, const SyntheticGeneratorConfig& config,
                           std::uint64_t seed) {
  config.validate();
  if (scenario.base_classes < 1 || scenario.total_classes < scenario.base_classes) {
    config_error("scenario.total_classes", "must be >= base_classes >= 1");
  }
  const auto plan = plan_sessions(scenario, config.base_train_per_class, derive_seed(seed, 1));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index dim = config.input_dim;
  auto gaussian_vector = [&] {
    Vector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = normal(rng);
    return v;
  };

  std::vector<Vector> directions;
  for (int c = 0; c < scenario.total_classes; ++c) directions.push_back(normalize(gaussian_vector()));

  const double noise_scale = config.angular_noise / std::sqrt(static_cast<double>(dim));
  Dataset data;
  data.input_dim = config.input_dim;
  for (const auto& spec : plan) {
    for (std::size_t k = 0; k < spec.classes.size(); ++k) {
      const ClassLabel label = spec.classes[k];
      const bool base = spec.index == 0;
      const double mu = base ? base_class_log_norm_mean(config, label.id, scenario.base_classes)
                             : config.incremental_log_norm_mu;
      const double sigma = base ? config.base_log_norm_sigma : config.incremental_log_norm_sigma;
      const Vector& dir = directions[static_cast<std::size_t>(label.id)];
      auto draw = [&](Split split) {
        const Vector noisy = dir + noise_scale * gaussian_vector();
        const double log_r = mu + sigma * normal(rng);
        data.records.push_back({spec.index, label, split, std::exp(log_r) * normalize(noisy)});
      };
      const int test = base ? config.base_test_per_class : config.novel_test_per_class;
      for (int i = 0; i < spec.shots[k]; ++i) draw(Split::Train);
      for (int i = 0; i < test; ++i) draw(Split::Test);
    }
  }
  return data;
}

double harmonic_mean(double a, double b) { return a + b == 0.0 ? 0.0 : 2.0 * a * b / (a + b); }

MetricsReport compute_metrics(const std::vector<SessionPredictions>& sessions,
                              const std::set<ClassLabel>& base_classes) {
  if (sessions.empty()) throw Error(Errc::LengthMismatch, "no sessions to score");
  MetricsReport report;
  for (const auto& s : sessions) {
    if (s.predicted.size() != s.truth.size()) {
      throw Error(Errc::LengthMismatch, std::to_string(s.predicted.size()) + " predictions for " +
                                            std::to_string(s.truth.size()) + " labels");
    }
    std::size_t hit = 0, base_n = 0, base_hit = 0, novel_n = 0, novel_hit = 0;
    for (std::size_t i = 0; i < s.truth.size(); ++i) {
      const bool ok = s.predicted[i] == s.truth[i];
      hit += ok;
      if (base_classes.contains(s.truth[i])) {
        ++base_n;
        base_hit += ok;
      } else {
        ++novel_n;
        novel_hit += ok;
      }
    }
    auto ratio = [](std::size_t a, std::size_t b) -> std::optional<double> {
      if (b == 0) return std::nullopt;
      return static_cast<double>(a) / static_cast<double>(b);
    };
    report.per_session_accuracy.push_back(ratio(hit, s.truth.size()).value_or(0.0));
    report.per_session_base_accuracy.push_back(ratio(base_hit, base_n));
    report.per_session_novel_accuracy.push_back(ratio(novel_hit, novel_n));
  }
  const auto& acc = report.per_session_accuracy;
  report.drop = acc.front() - acc.back();
  report.base_accuracy = report.per_session_base_accuracy.back().value_or(0.0);
  report.novel_accuracy = report.per_session_novel_accuracy.back().value_or(0.0);
  report.harmonic_mean = harmonic_mean(report.base_accuracy, report.novel_accuracy);
  double sum = 0.0;
  for (double a : acc) sum += a;
  report.average_accuracy = sum / static_cast<double>(acc.size());
  return report;
}

MethodFlags MethodFlags::baseline() { return MethodFlags{}; }

MethodFlags MethodFlags::saan() {
  MethodFlags m;
  m.name = "saan";
  m.l1 = m.l2 = m.two_stage = m.norm_dist = true;
  return m;
}

std::vector<MethodFlags> ablation_grid() {
  std::vector<MethodFlags> rows;
  auto row = [&](const char* name, bool l1, bool l2, bool two_stage, bool nd) {
    MethodFlags m;
    m.name = name;
    m.l1 = l1;
    m.l2 = l2;
    m.two_stage = two_stage;
    m.norm_dist = nd;
    rows.push_back(m);
  };
  row("baseline", false, false, false, false);
  row("l1", true, false, false, false);
  row("l1_l2", true, true, false, false);
  row("l1_l2_2s", true, true, true, false);
  row("l1_l2_nd", true, true, false, true);
  row("saan", true, true, true, true);
  return rows;
}

MethodFlags MethodFlags::named(const std::string& name) {
  for (auto& m : ablation_grid()) {
    if (m.name == name) return m;
  }
  throw Error(Errc::InvalidConfig, "method: unknown method '" + name + "'");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream).
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SessionPredictions evaluate(const Dataset& dataset, SessionIndex session,
                            const FeatureExtractor& extractor, const Classifier& classifier) {
  SessionPredictions out;
  for (const DataRecord* r : dataset.test_upto(session)) {
    out.predicted.push_back(classifier.predict(extractor.forward(r->x)));
    out.truth.push_back(r->label);
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Dataset* dataset) {
  config.train.validate();
  Dataset generated;
  if (dataset == nullptr) {
    config.scenario.validate(config.embedding_dim);
    generated = generate_synthetic(config.scenario, config.generator, derive_seed(config.seed, 1));
    dataset = &generated;
  }
  const auto& method = config.method;

  TrainConfig train = config.train;
  train.seed = derive_seed(config.seed, 3);
  train.weights.alpha = method.l1 ? config.train.weights.alpha : 0.0;
  train.weights.beta = method.l2 ? config.train.weights.beta : 0.0;

  ExperimentResult result;
  result.seed = config.seed;
  result.state = train_base_session(
      dataset->train(0), generate_orthonormal_centers(config.embedding_dim, derive_seed(config.seed, 2)),
      train);

  RepresentativeSet reps;
  std::map<ClassLabel, SessionIndex> session_of;
  std::map<ClassLabel, std::vector<double>> base_stats, incremental_stats;
  NormModel stat_probe;
  stat_probe.transform = method.transform;

  std::vector<SessionPredictions> predictions;
  const SessionIndex last = dataset->last_session();
  int seen_classes = 0;
  for (SessionIndex t = 0; t <= last; ++t) {
    const auto train_t = dataset->train(t);
    if (t > 0) result.state = finetune_incremental(train_t, std::move(result.state), train, t);

    SamplesByClass grouped;
    for (const auto& s : train_t) {
      grouped[s.label].push_back(result.state.model.extractor.forward(s.x));
      session_of[s.label] = t;
    }
    RepresentativeSet fresh = method.two_stage ? two_stage_fit(grouped, session_of)
                                               : ncm_fit(grouped, t);
    reps.merge(fresh);
    auto& stats = t == 0 ? base_stats : incremental_stats;
    for (const auto& [label, members] : grouped) {
      auto& values = stats[label];
      for (const auto& e : members) values.push_back(stat_probe.statistic(e));
    }
    seen_classes += static_cast<int>(grouped.size());

    result.classifier.reps = reps;
    result.classifier.compression = method.compression;
    result.classifier.norm.reset();
    if (method.norm_dist) {
      result.classifier.norm =
          fit_norm_model_values(base_stats, incremental_stats, method.variance_floor, method.transform);
    }
    predictions.push_back(evaluate(*dataset, t, result.state.model.extractor, result.classifier));
    result.sessions.push_back(
        {t, seen_classes, static_cast<int>(predictions.back().truth.size())});
  }
  result.metrics = compute_metrics(predictions, dataset->classes_of(0));
  return result;
}

}  // namespace saan
