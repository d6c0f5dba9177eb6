#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "saan/embedding.hpp"

namespace saan {

// d unit-norm class centers together with the label -> center mapping.
// Indices not mapped to any label are "free" and stay reserved for classes
// that arrive in later sessions.
class CenterBank {
 public:
  CenterBank() = default;

  // Validates unit norms and an injective assignment into [0, d).
  CenterBank(std::vector<Vector> centers, std::map<ClassLabel, int> assignment);

  int dimension() const { return static_cast<int>(centers_.size()); }
  int size() const { return static_cast<int>(centers_.size()); }

  const std::vector<Vector>& centers() const { return centers_; }
  const Vector& center(int index) const;

  const std::map<ClassLabel, int>& assignment() const { return assignment_; }
  const std::set<int>& free_indices() const { return free_; }
  int assigned_count() const { return static_cast<int>(assignment_.size()); }

  bool has_label(ClassLabel label) const { return assignment_.contains(label); }
  int index_of(ClassLabel label) const;  // throws UnassignedLabel
  const Vector& center_of(ClassLabel label) const;

  // Moves one center; `unit` is renormalized if it drifts past 1e-12.
  void set_center(int index, const Vector& unit);

  // Binds a free center to a new label.
  void bind(ClassLabel label, int index);

  // Bitwise equality of centers and assignment.
  friend bool operator==(const CenterBank& a, const CenterBank& b);

 private:
  std::vector<Vector> centers_;
  std::map<ClassLabel, int> assignment_;
  std::set<int> free_;
};

// Square cost matrix with provenance. Rows are classes (real first, then
// zero-cost virtual padding); columns are candidate centers.
struct CostMatrix {
  Matrix entries;
  std::vector<std::optional<ClassLabel>> row_labels;  // nullopt = virtual
  std::vector<int> column_centers;                    // bank indices
};

struct Assignment {
  std::vector<int> column_of_row;  // sigma(i)
  double total_cost = 0.0;
};

CenterBank generate_orthonormal_centers(int dimension, std::uint64_t seed);

CostMatrix build_cost_matrix(const std::map<ClassLabel, Vector>& class_means,
                             const CenterBank& bank,
                             const std::vector<int>& available_centers);

// Minimum-cost perfect matching on a square matrix (Kuhn-Munkres with
// potentials, O(n^3)). The total cost is unique; under ties only the total
// is contract-stable, but the returned permutation is deterministic for a
// fixed input ordering.
Assignment hungarian_assign(const Matrix& cost);
Assignment hungarian_assign(const CostMatrix& cost);

// class_means hold direction means (see mean_of_normalized); every real
// class receives a distinct center and the rest become free.
CenterBank assign_base_session(const CenterBank& bank,
                               const std::map<ClassLabel, Vector>& class_means);

// Only free centers and the new classes take part; existing pairs are kept.
CenterBank assign_incremental_session(
    const CenterBank& bank, const std::map<ClassLabel, Vector>& new_class_means);

}  // namespace saan
