#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "saan/anj_classifier.hpp"
#include "saan/embedding.hpp"
#include "saan/reference_model.hpp"

namespace saan {

enum class ScenarioMode { Conventional, OpenEnded };

// Gaussian session sizes for the open-ended/imbalanced protocol. Draws are
// rounded to the nearest integer, then clipped to >= 1.
struct OpenEndedParams {
  double ways_mean = 10.0;
  double ways_var = 5.0;
  double shots_mean = 5.0;
  double shots_var = 2.0;
};

struct ScenarioConfig {
  int total_classes = 24;
  int base_classes = 12;
  int sessions = 3;  // incremental sessions after the base session
  int ways = 4;
  int shots = 5;
  ScenarioMode mode = ScenarioMode::Conventional;
  OpenEndedParams open_ended;

  // Class budget must fit in the center bank (embedding_dim).
  void validate(int embedding_dim) const;
};

struct SessionSpec {
  SessionIndex index = 0;
  std::vector<ClassLabel> classes;
  std::vector<int> shots;  // training samples per class, aligned with classes
};

// Rounds a Gaussian draw to the nearest integer and clips it to >= 1.
int round_and_clip(double draw);

// Incremental sessions 1..T of the open-ended protocol. Shots are drawn per
// class. Each session keeps at least one class for every later session.
std::vector<SessionSpec> sample_open_ended_sessions(const ScenarioConfig& scenario,
                                                    std::uint64_t seed);

// Session 0 (base, `base_shots` per class) followed by the incremental plan.
std::vector<SessionSpec> plan_sessions(const ScenarioConfig& scenario, int base_shots,
                                       std::uint64_t seed);

struct SyntheticGeneratorConfig {
  int input_dim = 32;
  double angular_noise = 1.5;
  // Base class j draws ln|x| ~ N(mu_j, sigma^2) with mu_j spread around
  // base_log_norm_center in steps of base_log_norm_gap.
  double base_log_norm_center = 1.0;
  double base_log_norm_gap = 0.05;
  double base_log_norm_sigma = 0.1;
  // Every incremental class shares one law.
  double incremental_log_norm_mu = 0.3;
  double incremental_log_norm_sigma = 0.1;
  int base_train_per_class = 50;
  int base_test_per_class = 50;
  int novel_test_per_class = 25;

  void validate() const;
};

// Configured log-norm mean of base class `index` out of `base_classes`.
double base_class_log_norm_mean(const SyntheticGeneratorConfig& config, int index,
                                int base_classes);

enum class Split { Train, Test };

struct DataRecord {
  SessionIndex session = 0;
  ClassLabel label;
  Split split = Split::Train;
  Vector x;
};

struct Dataset {
  int input_dim = 0;
  std::vector<DataRecord> records;

  SessionIndex last_session() const;
  std::vector<LabeledInput> train(SessionIndex session) const;
  // Test records of every session up to and including `session`.
  std::vector<const DataRecord*> test_upto(SessionIndex session) const;
  std::set<ClassLabel> classes_of(SessionIndex session) const;
};

Dataset generate_synthetic(const ScenarioConfig& scenario, const SyntheticGeneratorConfig& config,
                           std::uint64_t seed);

struct SessionPredictions {
  std::vector<ClassLabel> predicted;
  std::vector<ClassLabel> truth;
};

struct MetricsReport {
  std::vector<double> per_session_accuracy;
  std::vector<std::optional<double>> per_session_base_accuracy;
  std::vector<std::optional<double>> per_session_novel_accuracy;
  double drop = 0.0;
  double base_accuracy = 0.0;   // last session
  double novel_accuracy = 0.0;  // last session
  double harmonic_mean = 0.0;
  double average_accuracy = 0.0;

  double last_accuracy() const { return per_session_accuracy.back(); }
};

double harmonic_mean(double a, double b);

MetricsReport compute_metrics(const std::vector<SessionPredictions>& sessions,
                              const std::set<ClassLabel>& base_classes);

// Which SAAN components are switched on. All off is the decoupled cosine
// NCM baseline.
struct MethodFlags {
  std::string name = "baseline";
  bool l1 = false;
  bool l2 = false;
  bool two_stage = false;
  bool norm_dist = false;
  double compression = 0.005;
  double variance_floor = 1e-4;
  NormTransform transform = NormTransform::Log;

  static MethodFlags baseline();
  static MethodFlags saan();
  // baseline, saan, or one of the ablation row names.
  static MethodFlags named(const std::string& name);
};

// Rows in order: baseline, +L1, +L1+L2, +L1+L2+2S, +L1+L2+ND, all.
std::vector<MethodFlags> ablation_grid();

struct ExperimentConfig {
  ScenarioConfig scenario;
  SyntheticGeneratorConfig generator;
  TrainConfig train;
  int embedding_dim = 32;
  MethodFlags method;
  std::uint64_t seed = 0;
};

struct SessionSummary {
  SessionIndex index = 0;
  int classes = 0;
  int test_samples = 0;
};

struct ExperimentResult {
  MetricsReport metrics;
  std::vector<SessionSummary> sessions;
  TrainedState state;
  Classifier classifier;
  std::uint64_t seed = 0;
};

// Independent sub-seeds for data, centers and training.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Trains session 0, then each incremental session, evaluating on the
// cumulative test set after every session. `dataset` overrides generation.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const Dataset* dataset = nullptr);

// Predictions for every test record seen so far.
SessionPredictions evaluate(const Dataset& dataset, SessionIndex session,
                            const FeatureExtractor& extractor, const Classifier& classifier);

}  // namespace saan
