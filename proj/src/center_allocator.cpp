#include "saan/center_allocator.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "saan/error.hpp"

namespace saan {

namespace {

constexpr double kRestartResidual = 1e-6;

}  // namespace

CenterBank::CenterBank(std::vector<Vector> centers,
                       std::map<ClassLabel, int> assignment)
    : centers_(std::move(centers)), assignment_(std::move(assignment)) {
  const auto d = static_cast<Eigen::Index>(centers_.size());
  if (d < 2) {
    throw Error(Errc::InvalidDimension, "center bank needs at least 2 centers");
  }
  for (const auto& c : centers_) {
    if (c.size() != d) {
      throw Error(Errc::DimensionMismatch, "center bank must hold d centers of dimension d");
    }
    if (std::abs(c.norm() - 1.0) > 1e-9) {
      throw Error(Errc::InvalidConfig, "center is not unit norm");
    }
  }
  std::set<int> used;
  for (const auto& [label, index] : assignment_) {
    if (index < 0 || index >= d) {
      throw Error(Errc::InvalidConfig, "assigned center index out of range");
    }
    if (!used.insert(index).second) {
      throw Error(Errc::InvalidConfig,
                  "center " + std::to_string(index) + " assigned to two labels");
    }
  }
  for (int i = 0; i < d; ++i) {
    if (!used.contains(i)) free_.insert(i);
  }
}

const Vector& CenterBank::center(int index) const {
  return centers_.at(static_cast<std::size_t>(index));
}

int CenterBank::index_of(ClassLabel label) const {
  auto it = assignment_.find(label);
  if (it == assignment_.end()) {
    throw Error(Errc::UnassignedLabel,
                "label " + std::to_string(label.id) + " has no center");
  }
  return it->second;
}

const Vector& CenterBank::center_of(ClassLabel label) const {
  return center(index_of(label));
}

void CenterBank::set_center(int index, const Vector& unit) {
  Vector& c = centers_.at(static_cast<std::size_t>(index));
  if (unit.size() != c.size()) {
    throw Error(Errc::DimensionMismatch, "center update has wrong dimension");
  }
  c = std::abs(unit.norm() - 1.0) > 1e-12 ? normalize(unit) : unit;
}

void CenterBank::bind(ClassLabel label, int index) {
  if (assignment_.contains(label)) {
    throw Error(Errc::InvalidConfig,
                "label " + std::to_string(label.id) + " already has a center");
  }
  if (free_.erase(index) == 0) {
    throw Error(Errc::InvalidConfig,
                "center " + std::to_string(index) + " is not free");
  }
  assignment_.emplace(label, index);
}

bool operator==(const CenterBank& a, const CenterBank& b) {
  if (a.centers_.size() != b.centers_.size() || a.assignment_ != b.assignment_) {
    return false;
  }
  for (std::size_t i = 0; i < a.centers_.size(); ++i) {
    if (a.centers_[i].size() != b.centers_[i].size() ||
        a.centers_[i] != b.centers_[i]) {
      return false;
    }
  }
  return true;
}

CenterBank generate_orthonormal_centers(int dimension, std::uint64_t seed) {
  if (dimension < 2) {
    throw Error(Errc::InvalidDimension,
                "orthonormal bank needs d >= 2, got " + std::to_string(dimension));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index d = dimension;
  Matrix basis(d, d);

  for (Eigen::Index col = 0; col < d; ++col) {
    for (;;) {
      Vector v(d);
      for (Eigen::Index r = 0; r < d; ++r) v(r) = normal(rng);
      // Two modified Gram-Schmidt passes.
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index k = 0; k < col; ++k) {
          v -= basis.col(k).dot(v) * basis.col(k);
        }
      }
      const double residual = v.norm();
      if (residual >= kRestartResidual) {
        basis.col(col) = v / residual;
        break;
      }
    }
  }

  std::vector<Vector> centers;
  centers.reserve(static_cast<std::size_t>(d));
  for (Eigen::Index col = 0; col < d; ++col) centers.emplace_back(basis.col(col));
  return CenterBank(std::move(centers), {});
}

CostMatrix build_cost_matrix(const std::map<ClassLabel, Vector>& class_means,
                             const CenterBank& bank,
                             const std::vector<int>& available_centers) {
  const auto n = static_cast<Eigen::Index>(available_centers.size());
  if (static_cast<Eigen::Index>(class_means.size()) > n) {
    throw Error(Errc::TooManyClasses,
                std::to_string(class_means.size()) + " classes for " +
                    std::to_string(n) + " available centers");
  }
  CostMatrix cost;
  cost.entries = Matrix::Zero(n, n);
  cost.column_centers = available_centers;
  cost.row_labels.reserve(static_cast<std::size_t>(n));

  Eigen::Index row = 0;
  for (const auto& [label, mean] : class_means) {
    for (Eigen::Index col = 0; col < n; ++col) {
      const Vector& c = bank.center(available_centers[static_cast<std::size_t>(col)]);
      cost.entries(row, col) = 1.0 - cosine_similarity(mean, c);
    }
    cost.row_labels.emplace_back(label);
    ++row;
  }
  for (; row < n; ++row) cost.row_labels.emplace_back(std::nullopt);
  return cost;
}

Assignment hungarian_assign(const Matrix& cost) {
  if (cost.rows() != cost.cols()) {
    throw Error(Errc::NonSquare, std::to_string(cost.rows()) + "x" +
                                     std::to_string(cost.cols()) + " cost matrix");
  }
  if (!cost.allFinite()) {
    throw Error(Errc::NonFinite, "cost matrix has non-finite entries");
  }
  const int n = static_cast<int>(cost.rows());
  Assignment out;
  out.column_of_row.assign(static_cast<std::size_t>(n), -1);
  if (n == 0) return out;

  // 1-based potentials; column 0 is the sentinel.
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> row_of_col(n + 1, 0), way(n + 1, 0);

  for (int i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = row_of_col[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const int j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (int j = 1; j <= n; ++j) {
    out.column_of_row[static_cast<std::size_t>(row_of_col[j] - 1)] = j - 1;
  }
  // Summed in row order so callers can compare totals exactly.
  for (int i = 0; i < n; ++i) {
    out.total_cost += cost(i, out.column_of_row[static_cast<std::size_t>(i)]);
  }
  return out;
}

Assignment hungarian_assign(const CostMatrix& cost) {
  return hungarian_assign(cost.entries);
}

namespace {

CenterBank assign_over(const CenterBank& bank,
                       const std::map<ClassLabel, Vector>& means,
                       const std::vector<int>& available) {
  for (const auto& [label, mean] : means) {
    if (bank.has_label(label)) {
      throw Error(Errc::InvalidConfig,
                  "label " + std::to_string(label.id) + " already has a center");
    }
  }
  const CostMatrix cost = build_cost_matrix(means, bank, available);
  const Assignment sigma = hungarian_assign(cost);
  CenterBank out = bank;
  for (std::size_t row = 0; row < cost.row_labels.size(); ++row) {
    if (!cost.row_labels[row]) continue;  // virtual class
    out.bind(*cost.row_labels[row],
             cost.column_centers[static_cast<std::size_t>(sigma.column_of_row[row])]);
  }
  return out;
}

}  // namespace

CenterBank assign_base_session(const CenterBank& bank,
                               const std::map<ClassLabel, Vector>& class_means) {
  if (bank.assigned_count() != 0) {
    throw Error(Errc::InvalidConfig, "base assignment expects a fresh bank");
  }
  std::vector<int> available(bank.free_indices().begin(), bank.free_indices().end());
  return assign_over(bank, class_means, available);
}

CenterBank assign_incremental_session(
    const CenterBank& bank, const std::map<ClassLabel, Vector>& new_class_means) {
  std::vector<int> available(bank.free_indices().begin(), bank.free_indices().end());
  return assign_over(bank, new_class_means, available);
}

}  // namespace saan
