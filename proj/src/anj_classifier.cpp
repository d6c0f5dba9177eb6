#include "saan/anj_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "saan/error.hpp"

namespace saan {

namespace {

void require_nonempty(ClassLabel label, const std::vector<Vector>& members) {
  if (members.empty()) {
    throw Error(Errc::EmptyClass, "class " + std::to_string(label.id) + " has no samples");
  }
}

Vector raw_mean(const std::vector<Vector>& members) {
  Vector sum = Vector::Zero(members.front().size());
  for (const auto& e : members) sum += e;
  return sum / static_cast<double>(members.size());
}

// Strictly-greater scan in label order keeps the lowest label on ties.
template <typename Score>
ClassLabel argmax_label(const RepresentativeSet& reps, Score score) {
  if (reps.empty()) throw Error(Errc::EmptyClass, "no representatives to predict from");
  ClassLabel best = reps.begin()->first;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& [label, rep] : reps) {
    const double s = score(label, rep);
    if (s > best_score) {
      best_score = s;
      best = label;
    }
  }
  return best;
}

}  // namespace

RepresentativeSet ncm_fit(const SamplesByClass& samples, SessionIndex session) {
  RepresentativeSet reps;
  for (const auto& [label, members] : samples) {
    require_nonempty(label, members);
    reps.emplace(label, Representative{raw_mean(members), session,
                                       static_cast<int>(members.size())});
  }
  return reps;
}

ClassLabel ncm_predict(const Vector& e, const RepresentativeSet& reps) {
  checked_norm(e);
  return argmax_label(reps, [&](ClassLabel, const Representative& r) {
    return cosine_similarity(e, r.w);
  });
}

RepresentativeSet two_stage_fit(const SamplesByClass& samples,
                                const std::map<ClassLabel, SessionIndex>& session_of) {
  RepresentativeSet reps;
  for (const auto& [label, members] : samples) {
    require_nonempty(label, members);
    auto it = session_of.find(label);
    if (it == session_of.end()) {
      throw Error(Errc::UnknownClass,
                  "no session recorded for class " + std::to_string(label.id));
    }
    const SessionIndex session = it->second;
    Vector w = session == 0 ? mean_of_normalized(members) : raw_mean(members);
    reps.emplace(label, Representative{std::move(w), session, static_cast<int>(members.size())});
  }
  return reps;
}

const NormParams& NormModel::params_for(ClassLabel label) const {
  if (auto it = base_params.find(label); it != base_params.end()) return it->second;
  if (incremental_classes.contains(label) && shared_params) return *shared_params;
  throw Error(Errc::UnknownClass,
              "class " + std::to_string(label.id) + " has no norm distribution");
}

double NormModel::statistic(const Vector& e) const {
  return transform == NormTransform::Log ? log_norm(e) : checked_norm(e);
}

NormParams estimate_normal(const std::vector<double>& values, double variance_floor) {
  if (values.empty()) throw Error(Errc::EmptyClass, "no values for normal estimate");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = variance_floor;
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    var = std::max(ss / static_cast<double>(values.size() - 1), variance_floor);
  }
  return {mean, var};
}

NormModel fit_norm_model_values(const std::map<ClassLabel, std::vector<double>>& base,
                                const std::map<ClassLabel, std::vector<double>>& incremental,
                                double variance_floor, NormTransform transform) {
  if (!(variance_floor > 0.0)) {
    throw Error(Errc::InvalidConfig, "variance floor must be > 0");
  }
  NormModel model;
  model.variance_floor = variance_floor;
  model.transform = transform;
  for (const auto& [label, values] : base) {
    if (values.empty()) {
      throw Error(Errc::EmptyClass, "base class " + std::to_string(label.id) + " has no samples");
    }
    model.base_params.emplace(label, estimate_normal(values, variance_floor));
  }
  std::vector<double> pooled;
  for (const auto& [label, values] : incremental) {
    if (values.empty()) {
      throw Error(Errc::EmptyClass,
                  "incremental class " + std::to_string(label.id) + " has no samples");
    }
    model.incremental_classes.insert(label);
    pooled.insert(pooled.end(), values.begin(), values.end());
  }
  if (!pooled.empty()) model.shared_params = estimate_normal(pooled, variance_floor);
  return model;
}

NormModel fit_norm_model(const SamplesByClass& base, const SamplesByClass& incremental,
                         double variance_floor, NormTransform transform) {
  NormModel probe;
  probe.transform = transform;
  auto stats = [&](const SamplesByClass& samples) {
    std::map<ClassLabel, std::vector<double>> out;
    for (const auto& [label, members] : samples) {
      auto& values = out[label];
      for (const auto& e : members) values.push_back(probe.statistic(e));
    }
    return out;
  };
  return fit_norm_model_values(stats(base), stats(incremental), variance_floor, transform);
}

double normal_tail(double x, double mu, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(Errc::InvalidSigma, "sigma must be finite and > 0");
  }
  return 0.5 * std::erfc((x - mu) / (sigma * std::numbers::sqrt2));
}

double norm_logit(const Vector& e, ClassLabel label, const NormModel& model) {
  const NormParams& p = model.params_for(label);
  const double x = model.statistic(e);
  const double sigma = std::sqrt(p.sigma2);
  // Both branches are the upper tail of the distance from the mean.
  return normal_tail(std::abs(x - p.mu), 0.0, sigma);
}

JointLogits joint_logits(const Vector& e, const RepresentativeSet& reps, const NormModel& model,
                         double compression) {
  if (!(compression >= 0.0)) throw Error(Errc::InvalidConfig, "compression must be >= 0");
  JointLogits z;
  z.compression = compression;
  z.labels.reserve(reps.size());
  for (const auto& [label, rep] : reps) {
    const double z1 = cosine_similarity(e, rep.w);
    const double z2 = norm_logit(e, label, model);
    z.labels.push_back(label);
    z.angular.push_back(z1);
    z.norm.push_back(z2);
    z.joint.push_back(z1 * std::pow(z2, compression));
  }
  return z;
}

std::pair<ClassLabel, JointLogits> joint_predict(const Vector& e, const RepresentativeSet& reps,
                                                 const NormModel& model, double compression) {
  if (reps.empty()) throw Error(Errc::EmptyClass, "no representatives to predict from");
  JointLogits z = joint_logits(e, reps, model, compression);
  std::size_t best = 0;
  for (std::size_t k = 1; k < z.joint.size(); ++k) {
    if (z.joint[k] > z.joint[best]) best = k;
  }
  return {z.labels[best], std::move(z)};
}

ClassLabel Classifier::predict(const Vector& e) const {
  if (norm) return joint_predict(e, reps, *norm, compression).first;
  return ncm_predict(e, reps);
}

}  // namespace saan
