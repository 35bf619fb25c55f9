#include <cmath>
#include <cstdio>
#include <numbers>

#include <gtest/gtest.h>

#include "mlds/errors.hpp"
#include "mlds/tensor.hpp"
#include "test_util.hpp"

using namespace mlds;
using mlds::testing::contract_loops;
using mlds::testing::match_factors;
using mlds::testing::random_orthonormal;
using mlds::testing::random_symmetric;
using mlds::testing::rank_sum;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Eigen::VectorXd basis(Eigen::Index d, Eigen::Index i) { return Eigen::VectorXd::Unit(d, i); }

}  // namespace

TEST(SymTensor3, ZeroDimensionRejected) { EXPECT_THROW(SymTensor3(0), ValidationError); }

TEST(SymTensor3, SetWritesAllPermutations) {
  SymTensor3 t(3);
  t.set(2, 0, 1, 5.0);
  for (auto [i, j, k] : {std::array{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}})
    EXPECT_EQ(t(i, j, k), 5.0);
  EXPECT_EQ(t(0, 0, 1), 0.0);
  EXPECT_TRUE(t.is_symmetric(0.0));
}

TEST(SymTensor3, FromEntriesRejectsAsymmetric) {
  std::vector<double> e(8, 0.0);
  e[1] = 1.0;  // (0,0,1) without its permutations
  EXPECT_THROW(SymTensor3::from_entries(2, e), ValidationError);
  EXPECT_THROW(SymTensor3::from_entries(2, std::vector<double>(7, 0.0)), ValidationError);
  e[2] = e[4] = 1.0;
  const SymTensor3 t = SymTensor3::from_entries(2, e);
  EXPECT_EQ(t(1, 0, 0), 1.0);
}

TEST(SymTensor3, MismatchedDimensionsRejected) {
  SymTensor3 a(2), b(3);
  EXPECT_THROW(a += b, ValidationError);
}

TEST(Outer3, EntriesAreProducts) {
  const SymTensor3 t = outer3(vec({1.0, 2.0}));
  EXPECT_EQ(t(0, 0, 0), 1.0);
  EXPECT_EQ(t(0, 1, 1), 4.0);
  EXPECT_EQ(t(1, 1, 1), 8.0);
  EXPECT_EQ(t(1, 0, 1), 4.0);
  EXPECT_EQ(t(0, 0, 1), 2.0);
  EXPECT_TRUE(outer3(vec({0.0, 0.0, 0.0})).max_abs() == 0.0);
}

TEST(Contract, RankOneIdentity) {
  Rng rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::VectorXd v = gaussian_vector(rng, 4);
    const Eigen::VectorXd a = gaussian_vector(rng, 4), b = gaussian_vector(rng, 4),
                          c = gaussian_vector(rng, 4);
    const double expect = v.dot(a) * v.dot(b) * v.dot(c);
    EXPECT_NEAR(contract(outer3(v), a, b, c), expect, 1e-12 * (1.0 + std::abs(expect)));
  }
}

TEST(Contract, BasisVectorsExtractEntries) {
  Rng rng(2);
  const SymTensor3 t = random_symmetric(rng, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        EXPECT_DOUBLE_EQ(contract(t, basis(3, i), basis(3, j), basis(3, k)), t(i, j, k));
}

TEST(Contract, MatchesTripleLoop) {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const SymTensor3 t = random_symmetric(rng, 3);
    const Eigen::VectorXd a = gaussian_vector(rng, 3), b = gaussian_vector(rng, 3),
                          c = gaussian_vector(rng, 3);
    EXPECT_NEAR(contract(t, a, b, c), contract_loops(t, a, b, c), 1e-12);
  }
}

TEST(Contract, MultilinearInEachSlot) {
  Rng rng(4);
  for (int rep = 0; rep < 100; ++rep) {
    const SymTensor3 t = random_symmetric(rng, 4);
    const Eigen::VectorXd a = gaussian_vector(rng, 4), a2 = gaussian_vector(rng, 4),
                          b = gaussian_vector(rng, 4), c = gaussian_vector(rng, 4);
    const double al = std::normal_distribution<double>()(rng);
    const double be = std::normal_distribution<double>()(rng);
    const double lhs = contract(t, al * a + be * a2, b, c);
    const double rhs = al * contract(t, a, b, c) + be * contract(t, a2, b, c);
    EXPECT_NEAR(lhs, rhs, 1e-10);
    EXPECT_NEAR(contract(t, b, al * a + be * a2, c), lhs, 1e-10);
    EXPECT_NEAR(contract(t, c, b, al * a + be * a2), lhs, 1e-10);
  }
}

TEST(Contract, ContractTwoMatchesLoops) {
  Rng rng(5);
  const SymTensor3 t = random_symmetric(rng, 5);
  const Eigen::VectorXd u = gaussian_vector(rng, 5);
  const Eigen::VectorXd r = contract_two(t, u);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(r(i), contract_loops(t, basis(5, i), u, u), 1e-12);
}

TEST(Contract, SumsAndScalarsStaySymmetric) {
  Rng rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    SymTensor3 t = 0.3 * random_symmetric(rng, 4) - random_symmetric(rng, 4);
    t += outer3(gaussian_vector(rng, 4));
    EXPECT_TRUE(t.is_symmetric(0.0));
  }
}

TEST(ApplyMatrix3, IdentityIsNoOp) {
  Rng rng(7);
  const SymTensor3 t = random_symmetric(rng, 4);
  const SymTensor3 r = apply_matrix3(t, Eigen::MatrixXd::Identity(4, 4));
  for (std::size_t i = 0; i < t.entries().size(); ++i)
    EXPECT_NEAR(r.entries()[i], t.entries()[i], 1e-14);
}

TEST(ApplyMatrix3, RankOneMapsToRankOne) {
  Rng rng(8);
  const Eigen::VectorXd v = gaussian_vector(rng, 5);
  const Eigen::MatrixXd w = gaussian_matrix(rng, 5, 2);
  const SymTensor3 r = apply_matrix3(outer3(v), w);
  const SymTensor3 e = outer3(w.transpose() * v);
  for (std::size_t i = 0; i < r.entries().size(); ++i)
    EXPECT_NEAR(r.entries()[i], e.entries()[i], 1e-11);
}

TEST(ApplyMatrix3, MatchesSixFoldLoop) {
  Rng rng(9);
  const SymTensor3 t = random_symmetric(rng, 4);
  const Eigen::MatrixXd v = gaussian_matrix(rng, 4, 2);
  const SymTensor3 r = apply_matrix3(t, v);
  ASSERT_EQ(r.dim(), 2);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) {
        double s = 0.0;
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k) s += t(i, j, k) * v(i, a) * v(j, b) * v(k, c);
        EXPECT_NEAR(r(a, b, c), s, 1e-11);
      }
}

TEST(PowerUpdate, EigenvectorIsFixedPoint) {
  const SymTensor3 t = outer3(basis(3, 0));
  const auto u = power_update(t, basis(3, 0));
  ASSERT_TRUE(u.has_value());
  EXPECT_NEAR((*u - basis(3, 0)).norm(), 0.0, 1e-15);
}

TEST(PowerUpdate, OrthogonalStartIsDegenerate) {
  EXPECT_FALSE(power_update(outer3(basis(3, 0)), basis(3, 1)).has_value());
}

TEST(PowerUpdate, ClosedFormForOrthogonalPair) {
  SymTensor3 t = 0.6 * outer3(basis(2, 0)) + 0.4 * outer3(basis(2, 1));
  const Eigen::VectorXd u = vec({0.8, 0.6});
  // M(I,u,u) = (0.6 * 0.8^2, 0.4 * 0.6^2)
  Eigen::VectorXd expect = vec({0.6 * 0.64, 0.4 * 0.36});
  expect /= expect.norm();
  const auto r = power_update(t, u);
  ASSERT_TRUE(r.has_value());
  EXPECT_NEAR((*r - expect).norm(), 0.0, 1e-15);
}

TEST(OpNorm, KnownValues) {
  EXPECT_NEAR(op_norm_estimate(outer3(basis(3, 0)), 10, 50, 0), 1.0, 1e-12);
  EXPECT_EQ(op_norm_estimate(SymTensor3(3), 10, 50, 0), 0.0);
  const SymTensor3 t = 0.6 * outer3(basis(3, 0)) + 0.4 * outer3(basis(3, 1));
  EXPECT_NEAR(op_norm_estimate(t, 20, 100, 1), 0.6, 1e-6);
}

TEST(OpNorm, AgreesWithSphereGrid) {
  Rng rng(10);
  const Eigen::MatrixXd v = random_orthonormal(rng, 3, 2);
  const SymTensor3 t = rank_sum(vec({0.6, 0.4}), v);
  double grid = 0.0;
  constexpr int kTheta = 400, kPhi = 800;
  for (int i = 0; i <= kTheta; ++i) {
    const double th = std::numbers::pi * i / kTheta;
    for (int j = 0; j < kPhi; ++j) {
      const double ph = 2.0 * std::numbers::pi * j / kPhi;
      const Eigen::Vector3d a(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph),
                              std::cos(th));
      grid = std::max(grid, std::abs(contract(t, a, a, a)));
    }
  }
  EXPECT_NEAR(grid, 0.6, 1e-3);
  const double est = op_norm_estimate(t, 20, 100, 2);
  EXPECT_NEAR(est, 0.6, 1e-6);
  EXPECT_GE(est, grid - 1e-9);
}

TEST(RobustTpm, SingleAxisFactor) {
  const auto f = robust_tpm(outer3(basis(1, 0)), 1, {}, 0);
  ASSERT_EQ(f.size(), 1u);
  const auto c = canonicalize_sign(f[0]);
  EXPECT_NEAR(c.weight, 1.0, 1e-12);
  EXPECT_NEAR(std::abs(c.vector(0)), 1.0, 1e-12);
}

TEST(RobustTpm, OrthogonalPairInLargestFirstOrder) {
  const SymTensor3 t = 0.7 * outer3(basis(2, 0)) + 0.3 * outer3(basis(2, 1));
  const auto f = robust_tpm(t, 2, {}, 3);
  ASSERT_EQ(f.size(), 2u);
  const auto a = canonicalize_sign(f[0]), b = canonicalize_sign(f[1]);
  EXPECT_NEAR(a.weight, 0.7, 1e-10);
  EXPECT_NEAR(b.weight, 0.3, 1e-10);
  EXPECT_NEAR((a.vector - basis(2, 0)).norm(), 0.0, 1e-10);
  EXPECT_NEAR((b.vector - basis(2, 1)).norm(), 0.0, 1e-10);
}

TEST(RobustTpm, NegativeWeightCanonicalizes) {
  const SymTensor3 t = -1.0 * outer3(basis(2, 0)) + 0.5 * outer3(basis(2, 1));
  const auto f = robust_tpm(t, 2, {}, 0);
  for (const auto& raw : f) {
    const auto c = canonicalize_sign(raw);
    EXPECT_GT(c.weight, 0.0);
    EXPECT_NEAR(contract(t, c.vector, c.vector, c.vector), c.weight, 1e-12);
  }
  const auto m = match_factors(f, Eigen::Vector2d(1.0, 0.5),
                               (Eigen::Matrix2d() << -1.0, 0.0, 0.0, 1.0).finished());
  EXPECT_LT(m.max_vector_error, 1e-10);
  EXPECT_LT(m.max_weight_error, 1e-10);
}

TEST(RobustTpm, ZeroTensorFailsInFirstRound) {
  try {
    robust_tpm(SymTensor3(2), 2, {}, 0);
    FAIL() << "expected DecompositionError";
  } catch (const DecompositionError& e) {
    EXPECT_EQ(e.round(), 0u);
  }
}

TEST(RobustTpm, RejectsKAboveDimension) {
  EXPECT_THROW(robust_tpm(SymTensor3(2), 3, {}, 0), ValidationError);
  EXPECT_THROW(robust_tpm(SymTensor3(2), 1, {}, 0), ValidationError);
  EXPECT_THROW(robust_tpm(outer3(basis(2, 0)), 2, {20, 0}, 0), ValidationError);
}

TEST(RobustTpm, DeterministicForSeed) {
  Rng rng(11);
  const SymTensor3 t = random_symmetric(rng, 3);
  const auto a = robust_tpm(t, 3, {}, 42);
  const auto b = robust_tpm(t, 3, {}, 42);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(a[k].weight, b[k].weight);
    EXPECT_EQ(a[k].vector, b[k].vector);
  }
}

TEST(RobustTpm, RecoversRandomOrthogonalDecompositions) {
  Rng rng(12);
  std::uniform_real_distribution<double> weight(0.05, 1.0);
  for (int rep = 0; rep < 60; ++rep) {
    const Eigen::Index k = 1 + rep % 5;
    Eigen::VectorXd w(k);
    for (Eigen::Index i = 0; i < k; ++i) w(i) = weight(rng);
    const Eigen::MatrixXd v = random_orthonormal(rng, k, k);
    const auto f = robust_tpm(rank_sum(w, v), static_cast<std::size_t>(k), {20, 50},
                              static_cast<std::uint64_t>(rep));
    const auto m = match_factors(f, w, v);
    EXPECT_LT(m.max_vector_error, 1e-6) << "rep " << rep;
    EXPECT_LT(m.max_weight_error, 1e-6) << "rep " << rep;
  }
}

TEST(RobustTpm, RankOneConvergesInOneStep) {
  Rng rng(13);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::VectorXd v = random_orthonormal(rng, 4, 1).col(0);
    Eigen::VectorXd u = random_unit_vector(rng, 4);
    if (std::abs(u.dot(v)) < 1e-3) continue;
    const auto r = power_update(outer3(v), u);
    ASSERT_TRUE(r.has_value());
    EXPECT_NEAR((*r - v).norm(), 0.0, 1e-12);
  }
}

TEST(RobustTpm, ThreeComponentExample) {
  Rng rng(15);
  const Eigen::MatrixXd v = random_orthonormal(rng, 3, 3);
  const Eigen::Vector3d p(0.5, 0.3, 0.2);
  const auto m = match_factors(robust_tpm(rank_sum(p, v), 3, {}, 1), p, v);
  EXPECT_LT(m.max_vector_error, 1e-6);
  EXPECT_LT(m.max_weight_error, 1e-6);
}

TEST(OpNorm, BoundsRandomContractions) {
  // |M(a,b,c)| <= 5 * estimate on the sphere; the estimate is only a lower
  // bound, so violations are reported rather than failed.
  Rng rng(14);
  int violations = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::Index d = 2 + rep % 4;
    const SymTensor3 t = random_symmetric(rng, d);
    const double op = op_norm_estimate(t, 50, 100, static_cast<std::uint64_t>(rep));
    for (int j = 0; j < 20; ++j) {
      const Eigen::VectorXd a = random_unit_vector(rng, d), b = random_unit_vector(rng, d),
                            c = random_unit_vector(rng, d);
      if (std::abs(contract(t, a, b, c)) > 5.0 * op) ++violations;
    }
  }
  RecordProperty("sandwich_violations", violations);
  if (violations > 0) std::printf("norm sandwich: %d violations flagged\n", violations);
}
