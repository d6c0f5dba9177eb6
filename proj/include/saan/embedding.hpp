#pragma once

#include <compare>
#include <cstdint>
#include <span>

#include <Eigen/Dense>

namespace saan {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A point in the d-dimensional embedding space produced by the feature
/// extractor. Every geometric quantity in the library is built from these.
using Embedding = Eigen::VectorXd;

/// Norms at or below this are rejected rather than clamped: a zero vector
/// has no direction, and clamping would corrupt both angle and norm logits.
inline constexpr double kNormEpsilon = 1e-12;

struct ClassLabel {
  std::int32_t id = 0;

  constexpr ClassLabel() = default;
  constexpr explicit ClassLabel(std::int32_t v) : id(v) {}

  friend constexpr auto operator<=>(ClassLabel, ClassLabel) = default;
};

using SessionIndex = std::int32_t;

struct LabeledEmbedding {
  Embedding embedding;
  ClassLabel label;
};

double cosine_similarity(const Vector& a, const Vector& b);

Vector normalize(const Vector& e);

double log_norm(const Vector& e);

// (1/m) sum of unit directions. Not renormalized; the result can be near
// zero when directions cancel, callers decide how to handle that.
Vector mean_of_normalized(std::span<const Vector> batch);

// Euclidean norm, throwing ZeroNorm/NonFinite for unusable vectors.
double checked_norm(const Vector& e);

}  // namespace saan
