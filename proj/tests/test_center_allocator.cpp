#include <gtest/gtest.h>

#include <random>
#include <set>

#include "saan/center_allocator.hpp"
#include "saan/error.hpp"
#include "support.hpp"

using namespace saan;
using saan::test::vec;

namespace {

Matrix gram(const CenterBank& bank) {
  const int d = bank.dimension();
  Matrix g(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) g(i, j) = bank.center(i).dot(bank.center(j));
  }
  return g;
}

std::map<ClassLabel, Vector> means_at(const CenterBank& bank, std::initializer_list<int> idx) {
  std::map<ClassLabel, Vector> m;
  int label = 0;
  for (int i : idx) m.emplace(ClassLabel(label++), bank.center(i));
  return m;
}

}  // namespace

TEST(OrthonormalCenters, Examples) {
  const auto b4 = generate_orthonormal_centers(4, 7);
  EXPECT_EQ(b4.size(), 4);
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      EXPECT_LE(std::abs(cosine_similarity(b4.center(i), b4.center(j))), 1e-8);
    }
  }
  const auto b2 = generate_orthonormal_centers(2, 0);
  EXPECT_TRUE(gram(b2).isApprox(Matrix::Identity(2, 2), 1e-12));
  EXPECT_TRUE(generate_orthonormal_centers(16, 3) == generate_orthonormal_centers(16, 3));
}

TEST(OrthonormalCenters, GramIsIdentity) {
  for (int d : {2, 3, 8, 16, 32, 64}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto bank = generate_orthonormal_centers(d, seed);
      const Matrix diff = gram(bank) - Matrix::Identity(d, d);
      EXPECT_LE(diff.cwiseAbs().maxCoeff(), 1e-8) << "d=" << d << " seed=" << seed;
      EXPECT_EQ(static_cast<int>(bank.free_indices().size()), d);
      EXPECT_EQ(bank.assigned_count(), 0);
    }
  }
}

TEST(OrthonormalCenters, SeedsDiffer) {
  EXPECT_FALSE(generate_orthonormal_centers(8, 1) == generate_orthonormal_centers(8, 2));
}

TEST(OrthonormalCenters, RejectsTinyDimension) {
  EXPECT_THROW(generate_orthonormal_centers(1, 0), Error);
}

TEST(CenterBank, ValidatesConstruction) {
  std::vector<Vector> c{vec({1, 0}), vec({0, 1})};
  EXPECT_THROW(CenterBank({vec({1, 0}), vec({0, 2})}, {}), Error);
  EXPECT_THROW(CenterBank(c, {{ClassLabel(0), 0}, {ClassLabel(1), 0}}), Error);
  EXPECT_THROW(CenterBank(c, {{ClassLabel(0), 2}}), Error);
  const CenterBank ok(c, {{ClassLabel(5), 1}});
  EXPECT_EQ(ok.index_of(ClassLabel(5)), 1);
  EXPECT_EQ(ok.free_indices(), std::set<int>{0});
  try {
    ok.index_of(ClassLabel(6));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnassignedLabel);
  }
}

TEST(CostMatrix, AlignedMeansGiveZeroDiagonal) {
  const auto bank = test::axis_bank(2, 0);
  const auto cm = build_cost_matrix(means_at(bank, {0, 1}), bank, {0, 1});
  EXPECT_NEAR(cm.entries(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(cm.entries(1, 1), 0.0, 1e-15);
  EXPECT_NEAR(cm.entries(0, 1), 1.0, 1e-15);
  EXPECT_NEAR(cm.entries(1, 0), 1.0, 1e-15);
}

TEST(CostMatrix, PadsWithZeroVirtualRows) {
  const auto bank = test::axis_bank(3, 0);
  std::map<ClassLabel, Vector> one{{ClassLabel(0), vec({1, 1, 0})}};
  const auto cm = build_cost_matrix(one, bank, {0, 1, 2});
  ASSERT_EQ(cm.entries.rows(), 3);
  ASSERT_EQ(cm.entries.cols(), 3);
  EXPECT_TRUE(cm.row_labels[0].has_value());
  for (int r = 1; r < 3; ++r) {
    EXPECT_FALSE(cm.row_labels[r].has_value());
    for (int c = 0; c < 3; ++c) EXPECT_EQ(cm.entries(r, c), 0.0);
  }
}

TEST(CostMatrix, EntryIsOneMinusCosine) {
  const auto bank = test::axis_bank(2, 0);
  // cos<m, e0> = 0.5
  std::map<ClassLabel, Vector> m{{ClassLabel(0), vec({0.5, std::sqrt(0.75)})}};
  const auto cm = build_cost_matrix(m, bank, {0, 1});
  EXPECT_NEAR(cm.entries(0, 0), 0.5, 1e-15);
}

TEST(CostMatrix, TooManyClasses) {
  const auto bank = test::axis_bank(3, 0);
  std::map<ClassLabel, Vector> m{{ClassLabel(0), vec({1, 0, 0})}, {ClassLabel(1), vec({0, 1, 0})}};
  try {
    build_cost_matrix(m, bank, {2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooManyClasses);
  }
}

TEST(Hungarian, Examples) {
  Matrix m(2, 2);
  m << 0.1, 0.9, 0.8, 0.2;
  const auto a = hungarian_assign(m);
  EXPECT_EQ(a.column_of_row, (std::vector<int>{0, 1}));
  EXPECT_NEAR(a.total_cost, 0.3, 1e-15);

  Matrix z = Matrix::Constant(4, 4, 1.0);
  z.diagonal().setZero();
  const auto b = hungarian_assign(z);
  EXPECT_EQ(b.column_of_row, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(b.total_cost, 0.0);
}

TEST(Hungarian, FiveByFiveMatchesBruteForce) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix m = test::random_matrix(rng, 5, 5, 0.0, 2.0);
    EXPECT_NEAR(hungarian_assign(m).total_cost, test::brute_force_min_cost(m), 1e-12);
  }
}

TEST(Hungarian, ReturnsPermutationAndConsistentTotal) {
  std::mt19937_64 rng(6);
  for (int n = 1; n <= 12; ++n) {
    const Matrix m = test::random_matrix(rng, n, n, -1.0, 3.0);
    const auto a = hungarian_assign(m);
    std::set<int> cols(a.column_of_row.begin(), a.column_of_row.end());
    EXPECT_EQ(static_cast<int>(cols.size()), n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += m(i, a.column_of_row[i]);
    EXPECT_EQ(total, a.total_cost);
  }
}

TEST(Hungarian, NeverWorseThanRandomPermutations) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 10 + trial % 7;
    const Matrix m = test::random_matrix(rng, n, n, 0.0, 2.0);
    const double best = hungarian_assign(m).total_cost;
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int k = 0; k < 1000; ++k) {
      std::shuffle(perm.begin(), perm.end(), rng);
      double total = 0.0;
      for (int i = 0; i < n; ++i) total += m(i, perm[i]);
      ASSERT_LE(best, total + 1e-12);
    }
  }
}

TEST(Hungarian, Deterministic) {
  Matrix ties = Matrix::Ones(5, 5);
  EXPECT_EQ(hungarian_assign(ties).column_of_row, hungarian_assign(ties).column_of_row);
}

TEST(Hungarian, Errors) {
  try {
    hungarian_assign(Matrix::Zero(2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonSquare);
  }
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 1) = NAN;
  try {
    hungarian_assign(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonFinite);
  }
}

TEST(AssignBase, CountsAndExactMatch) {
  const auto bank = generate_orthonormal_centers(5, 9);
  const auto assigned = assign_base_session(bank, means_at(bank, {3, 0, 4}));
  EXPECT_EQ(assigned.assigned_count(), 3);
  EXPECT_EQ(assigned.free_indices(), (std::set<int>{1, 2}));
  EXPECT_EQ(assigned.index_of(ClassLabel(0)), 3);
  EXPECT_EQ(assigned.index_of(ClassLabel(1)), 0);
  EXPECT_EQ(assigned.index_of(ClassLabel(2)), 4);
}

TEST(AssignBase, LabelOrderIndependent) {
  std::mt19937_64 rng(21);
  const auto bank = generate_orthonormal_centers(8, 4);
  std::map<ClassLabel, Vector> a, b;
  std::vector<Vector> means;
  for (int i = 0; i < 5; ++i) means.push_back(test::random_vector(rng, 8));
  // Same means under relabelling: label k in `a` is label 4-k in `b`.
  for (int k = 0; k < 5; ++k) {
    a.emplace(ClassLabel(k), means[k]);
    b.emplace(ClassLabel(4 - k), means[k]);
  }
  const auto ra = assign_base_session(bank, a);
  const auto rb = assign_base_session(bank, b);
  for (int k = 0; k < 5; ++k) {
    EXPECT_EQ(ra.index_of(ClassLabel(k)), rb.index_of(ClassLabel(4 - k)));
  }
}

TEST(AssignBase, RequiresFreshBank) {
  const auto bank = test::axis_bank(3, 1);
  EXPECT_THROW(assign_base_session(bank, {{ClassLabel(7), vec({0, 1, 0})}}), Error);
}

TEST(AssignIncremental, FillsFreeCentersAndKeepsOldPairs) {
  const auto bank = test::axis_bank(4, 2);
  std::map<ClassLabel, Vector> fresh{{ClassLabel(10), vec({0, 0, 1, 0.1})},
                                     {ClassLabel(11), vec({0, 0.2, 0, 1})}};
  const auto out = assign_incremental_session(bank, fresh);
  EXPECT_EQ(out.assigned_count(), 4);
  EXPECT_TRUE(out.free_indices().empty());
  EXPECT_EQ(out.index_of(ClassLabel(0)), 0);
  EXPECT_EQ(out.index_of(ClassLabel(1)), 1);
  EXPECT_EQ(out.index_of(ClassLabel(10)), 2);
  EXPECT_EQ(out.index_of(ClassLabel(11)), 3);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(out.center(i), bank.center(i));
}

TEST(AssignIncremental, CollinearFreeCenterChosen) {
  const auto bank = test::axis_bank(5, 2);
  std::map<ClassLabel, Vector> fresh{{ClassLabel(9), vec({0, 0, 0, 3, 0})}};
  EXPECT_EQ(assign_incremental_session(bank, fresh).index_of(ClassLabel(9)), 3);
}

TEST(AssignIncremental, TooManyClasses) {
  const auto bank = test::axis_bank(3, 2);
  std::map<ClassLabel, Vector> fresh{{ClassLabel(5), vec({0, 0, 1})}, {ClassLabel(6), vec({1, 1, 1})}};
  try {
    assign_incremental_session(bank, fresh);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooManyClasses);
  }
}

TEST(AssignIncremental, SequenceStaysInjective) {
  std::mt19937_64 rng(33);
  auto bank = generate_orthonormal_centers(12, 1);
  std::map<ClassLabel, Vector> base;
  for (int k = 0; k < 4; ++k) base.emplace(ClassLabel(k), test::random_vector(rng, 12));
  bank = assign_base_session(bank, base);
  int next = 4;
  for (int session = 0; session < 4; ++session) {
    std::map<ClassLabel, Vector> fresh;
    for (int k = 0; k < 2; ++k) fresh.emplace(ClassLabel(next++), test::random_vector(rng, 12));
    const auto before = bank.assignment();
    bank = assign_incremental_session(bank, fresh);
    for (const auto& [label, index] : before) EXPECT_EQ(bank.index_of(label), index);
    std::set<int> used;
    for (const auto& [label, index] : bank.assignment()) EXPECT_TRUE(used.insert(index).second);
    for (int f : bank.free_indices()) EXPECT_FALSE(used.contains(f));
    EXPECT_EQ(used.size() + bank.free_indices().size(), 12u);
  }
}
