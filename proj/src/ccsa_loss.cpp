#include "saan/ccsa_loss.hpp"

#include <map>
#include <string>
#include <vector>

#include "saan/error.hpp"

namespace saan {

CenterUpdateSchedule::CenterUpdateSchedule(double eta0, double lambda)
    : eta0_(eta0), lambda_(lambda), eta_(eta0) {
  if (!(eta0 >= 0.0) || !(lambda > 0.0 && lambda <= 1.0)) {
    throw Error(Errc::InvalidConfig, "schedule needs eta0 >= 0 and lambda in (0, 1]");
  }
}

double loss_l1(std::span<const LabeledEmbedding> batch, const CenterBank& bank) {
  if (batch.empty()) throw Error(Errc::EmptyBatch, "L1 over empty batch");
  double sum = 0.0;
  for (const auto& s : batch) {
    sum += 1.0 - cosine_similarity(s.embedding, bank.center_of(s.label));
  }
  return sum / static_cast<double>(batch.size());
}

double loss_l2(std::span<const LabeledEmbedding> batch, const CenterBank& bank) {
  if (batch.empty()) throw Error(Errc::EmptyBatch, "L2 over empty batch");
  const double classes = bank.assigned_count();
  double sum = 0.0;
  for (const auto& s : batch) {
    const int own = bank.index_of(s.label);
    for (const auto& [label, index] : bank.assignment()) {
      if (index == own) continue;
      sum += cosine_similarity(s.embedding, bank.center(index));
    }
  }
  return sum / (static_cast<double>(batch.size()) * classes);
}

LossBreakdown center_loss(std::span<const LabeledEmbedding> batch,
                          const CenterBank& bank, const LossWeights& weights,
                          bool l2_active) {
  LossBreakdown out;
  out.l1 = loss_l1(batch, bank);
  out.l2 = l2_active ? loss_l2(batch, bank) : 0.0;
  out.weighted_total = weights.alpha * out.l1 + weights.beta * out.l2;
  return out;
}

namespace {

// d cos<e, c> / d e for a unit c.
Vector cosine_gradient(const Vector& e, double norm, const Vector& unit_center) {
  const double cos = e.dot(unit_center) / norm;
  return unit_center / norm - e * (cos / (norm * norm));
}

}  // namespace

Vector grad_l1_embedding(const Vector& e, const Vector& center, int batch_size) {
  const double norm = checked_norm(e);
  return cosine_gradient(e, norm, center) / static_cast<double>(batch_size);
}

Vector grad_l2_embedding(const Vector& e, const CenterBank& bank, ClassLabel label,
                         int batch_size) {
  const double norm = checked_norm(e);
  const int own = bank.index_of(label);
  Vector g = Vector::Zero(e.size());
  for (const auto& [other, index] : bank.assignment()) {
    if (index == own) continue;
    g += cosine_gradient(e, norm, bank.center(index));
  }
  return g / (static_cast<double>(batch_size) * bank.assigned_count());
}

Vector center_momentum_update(const Vector& center,
                              std::span<const Vector> same_class_embeddings,
                              int batch_size, double eta) {
  if (same_class_embeddings.empty() || eta == 0.0) return center;
  Vector delta = Vector::Zero(center.size());
  for (const auto& e : same_class_embeddings) delta += e / checked_norm(e);
  delta /= static_cast<double>(batch_size);
  return normalize(center + eta * delta);
}

void update_centers(CenterBank& bank, std::span<const LabeledEmbedding> batch,
                    const CenterUpdateSchedule& schedule) {
  if (schedule.eta() == 0.0) return;
  std::map<ClassLabel, std::vector<Vector>> grouped;
  for (const auto& s : batch) {
    if (bank.has_label(s.label)) grouped[s.label].push_back(s.embedding);
  }
  const int m = static_cast<int>(batch.size());
  for (const auto& [label, members] : grouped) {
    const int index = bank.index_of(label);
    bank.set_center(index,
                    center_momentum_update(bank.center(index), members, m, schedule.eta()));
  }
}

}  // namespace saan
