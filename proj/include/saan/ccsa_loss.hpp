#pragma once

#include <span>

#include "saan/center_allocator.hpp"
#include "saan/embedding.hpp"

namespace saan {

struct LossWeights {
  double alpha = 2.0;  // pull toward own center
  double beta = 0.4;   // push from other centers
};

// Center moving rate with geometric per-epoch decay.
class CenterUpdateSchedule {
 public:
  CenterUpdateSchedule() = default;
  CenterUpdateSchedule(double eta0, double lambda);

  double eta0() const { return eta0_; }
  double lambda() const { return lambda_; }
  double eta() const { return eta_; }

  // Epoch boundary: eta <- lambda * eta.
  void decay() { eta_ *= lambda_; }
  // Start of an incremental session.
  void reset() { eta_ = eta0_; }

 private:
  double eta0_ = 0.5;
  double lambda_ = 0.1;
  double eta_ = 0.5;
};

struct LossBreakdown {
  double l1 = 0.0;
  double l2 = 0.0;
  double weighted_total = 0.0;
};

// (1/m) sum (1 - cos<e_i, c_{y_i}>).
double loss_l1(std::span<const LabeledEmbedding> batch, const CenterBank& bank);

// (1/m)(1/|Y|) sum_i sum_{j != y_i} cos<e_i, c_j>, where |Y| counts the
// classes currently holding a center.
double loss_l2(std::span<const LabeledEmbedding> batch, const CenterBank& bank);

LossBreakdown center_loss(std::span<const LabeledEmbedding> batch,
                          const CenterBank& bank, const LossWeights& weights,
                          bool l2_active);

// Negative gradient of L1 with respect to one embedding:
//   (1/m) (c/|e| - e cos<e,c>/|e|^2)
// It is perpendicular to e and points toward c.
Vector grad_l1_embedding(const Vector& e, const Vector& center, int batch_size);

// Gradient of L2 with respect to one embedding:
//   (1/m)(1/|Y|) sum_{j != y} (c_j/|e| - e cos<e,c_j>/|e|^2)
Vector grad_l2_embedding(const Vector& e, const CenterBank& bank, ClassLabel label,
                         int batch_size);

// normalize(c + eta * dc), dc = (1/m) sum of the unit directions of the
// same-class samples in the batch. m is the full batch size.
Vector center_momentum_update(const Vector& center,
                              std::span<const Vector> same_class_embeddings,
                              int batch_size, double eta);

// Applies center_momentum_update to every assigned class present in the batch.
void update_centers(CenterBank& bank, std::span<const LabeledEmbedding> batch,
                    const CenterUpdateSchedule& schedule);

}  // namespace saan
