#include "saan/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "saan/error.hpp"

namespace saan {

double checked_norm(const Vector& e) {
  const double n = e.norm();
  if (!std::isfinite(n)) {
    throw Error(Errc::NonFinite, "vector has non-finite entries");
  }
  if (n <= kNormEpsilon) {
    throw Error(Errc::ZeroNorm, "norm " + std::to_string(n) + " at or below floor");
  }
  return n;
}

double cosine_similarity(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw Error(Errc::DimensionMismatch,
                "cosine of vectors with sizes " + std::to_string(a.size()) +
                    " and " + std::to_string(b.size()));
  }
  const double na = checked_norm(a);
  const double nb = checked_norm(b);
  const double c = a.dot(b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

Vector normalize(const Vector& e) { return e / checked_norm(e); }

double log_norm(const Vector& e) { return std::log(checked_norm(e)); }

Vector mean_of_normalized(std::span<const Vector> batch) {
  if (batch.empty()) {
    throw Error(Errc::EmptyBatch, "mean of normalized embeddings over empty batch");
  }
  Vector sum = Vector::Zero(batch.front().size());
  for (const auto& e : batch) {
    if (e.size() != sum.size()) {
      throw Error(Errc::DimensionMismatch, "batch has mixed dimensions");
    }
    sum += e / checked_norm(e);
  }
  return sum / static_cast<double>(batch.size());
}

}  // namespace saan
