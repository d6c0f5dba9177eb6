#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "saan/center_allocator.hpp"
#include "saan/embedding.hpp"

namespace saan::test {

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

inline Vector random_vector(std::mt19937_64& rng, int dim, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = n(rng);
  return v;
}

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = u(rng);
  }
  return m;
}

// Axis-aligned bank with labels 0..k-1 bound to axes 0..k-1.
inline CenterBank axis_bank(int dim, int assigned) {
  std::vector<Vector> centers;
  for (int i = 0; i < dim; ++i) centers.push_back(Vector::Unit(dim, i));
  std::map<ClassLabel, int> a;
  for (int k = 0; k < assigned; ++k) a.emplace(ClassLabel(k), k);
  return CenterBank(std::move(centers), std::move(a));
}

// Exhaustive minimum over all permutations (rows -> columns).
inline double brute_force_min_cost(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost(i, perm[i]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// erf(x) = 2/sqrt(pi) e^{-x^2} sum_n 2^n x^{2n+1} / (2n+1)!!  (every term
// positive, so no cancellation inside the sum).
inline double erf_series(double x) {
  const double ax = std::abs(x);
  double term = ax;  // n = 0
  double sum = term;
  for (int n = 1; n < 2000; ++n) {
    term *= 2.0 * ax * ax / (2.0 * n + 1.0);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  const double r = 2.0 / std::sqrt(std::acos(-1.0)) * std::exp(-ax * ax) * sum;
  return x < 0 ? -r : r;
}

// Upper tail of N(0,1) at z from the series above.
inline double upper_tail_series(double z) { return 0.5 * (1.0 - erf_series(z / std::sqrt(2.0))); }

// Asymptotic erfc(t) = e^{-t^2}/(t sqrt(pi)) (1 - 1/(2t^2) + 3/(4t^4) - 15/(8t^6) + ...).
inline double erfc_asymptotic(double t) {
  const double u = 1.0 / (2.0 * t * t);
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 8; ++k) {
    term *= -(2.0 * k - 1.0) * u;
    sum += term;
  }
  return std::exp(-t * t) / (t * std::sqrt(std::acos(-1.0))) * sum;
}

// Central difference of f along every coordinate of x.
inline Vector central_difference(const std::function<double(const Vector&)>& f, Vector x,
                                 double h) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x(i);
    x(i) = keep + h;
    const double up = f(x);
    x(i) = keep - h;
    const double down = f(x);
    x(i) = keep;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

// max |a - b| / max(|a|, |b|, floor), the relative error used by the gradient checks.
inline double relative_error(const Vector& a, const Vector& b, double floor = 1e-8) {
  const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), floor});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace saan::test
