#pragma once

#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "saan/embedding.hpp"

namespace saan {

using SamplesByClass = std::map<ClassLabel, std::vector<Vector>>;

struct Representative {
  Embedding w;
  SessionIndex session = 0;
  int count = 0;
};

using RepresentativeSet = std::map<ClassLabel, Representative>;

// Plain per-class mean of raw embeddings (the baseline NCM anchor).
RepresentativeSet ncm_fit(const SamplesByClass& samples, SessionIndex session = 0);

// argmax_j cos<e, w_j>; ties go to the lowest label.
ClassLabel ncm_predict(const Vector& e, const RepresentativeSet& reps);

// Stage-dependent anchors: classes first seen in session 0 average unit
// directions, later classes average raw embeddings.
RepresentativeSet two_stage_fit(const SamplesByClass& samples,
                                const std::map<ClassLabel, SessionIndex>& session_of);

enum class NormTransform { Log, Raw };

struct NormParams {
  double mu = 0.0;
  double sigma2 = 1.0;
};

// Per-class normals for base classes and one shared normal for every
// incremental class, over ln|e| (or |e| with NormTransform::Raw).
struct NormModel {
  std::map<ClassLabel, NormParams> base_params;
  std::optional<NormParams> shared_params;
  std::set<ClassLabel> incremental_classes;
  double variance_floor = 1e-4;
  NormTransform transform = NormTransform::Log;

  const NormParams& params_for(ClassLabel label) const;  // throws UnknownClass
  double statistic(const Vector& e) const;                // ln|e| or |e|
};

// Sample mean and unbiased variance, floored. A single value gets the floor.
NormParams estimate_normal(const std::vector<double>& values, double variance_floor);

// Fit from already-transformed statistics.
NormModel fit_norm_model_values(const std::map<ClassLabel, std::vector<double>>& base,
                                const std::map<ClassLabel, std::vector<double>>& incremental,
                                double variance_floor,
                                NormTransform transform = NormTransform::Log);

NormModel fit_norm_model(const SamplesByClass& base, const SamplesByClass& incremental,
                         double variance_floor, NormTransform transform = NormTransform::Log);

// P(X >= x) for X ~ N(mu, sigma^2).
double normal_tail(double x, double mu, double sigma);

// Two-sided tail: P(X >= x) when x >= mu, P(X <= x) otherwise. In (0, 0.5].
double norm_logit(const Vector& e, ClassLabel label, const NormModel& model);

struct JointLogits {
  std::vector<ClassLabel> labels;
  std::vector<double> angular;  // z1
  std::vector<double> norm;     // z2
  std::vector<double> joint;    // z = z1 * z2^C
  double compression = 0.005;
};

JointLogits joint_logits(const Vector& e, const RepresentativeSet& reps, const NormModel& model,
                         double compression);

std::pair<ClassLabel, JointLogits> joint_predict(const Vector& e, const RepresentativeSet& reps,
                                                 const NormModel& model, double compression);

// Inference-time classifier assembled by the harness: angular anchors and,
// optionally, a norm model blended through the compression coefficient.
struct Classifier {
  RepresentativeSet reps;
  std::optional<NormModel> norm;
  double compression = 0.005;

  ClassLabel predict(const Vector& e) const;
};

}  // namespace saan
