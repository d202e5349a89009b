#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "faithful/adversary.hpp"
#include "faithful/lsem.hpp"
#include "faithful/stats.hpp"

using namespace faithful;

namespace {

double max_gap(const CorrelationMatrix& a, const CorrelationMatrix& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

const CanonicalPair& pair_05() {
  static const CanonicalPair p = construct_pair(0.5, 0.1, 1e-4);
  return p;
}

}  // namespace

TEST(Sigma1, Entries) {
  auto s = sigma1(0.5, 0.4, 0.3);
  EXPECT_DOUBLE_EQ(s(0, 3), 0.15);
  EXPECT_DOUBLE_EQ(s(1, 3), 0.12);
  EXPECT_TRUE(sigma1(0, 0, 0).matrix().isIdentity(0.0));
  EXPECT_LT(max_gap(s, implied_correlation(make_m1(0.5, 0.4, 0.3))), 1e-12);
  EXPECT_THROW(sigma1(0.8, 0.8, 0.3), InvalidParameters);
}

TEST(Sigma2, Matches) {
  EXPECT_TRUE(sigma2(0, 0, 0, 0, 0).matrix().isIdentity(0.0));
  EXPECT_LT(max_gap(sigma2(0.2, -0.1, 0.3, 0.25, 0.15), implied_correlation(make_m2(0.2, -0.1, 0.3, 0.25, 0.15))),
            1e-12);
  EXPECT_THROW(sigma2(0.9, 0.9, 0.9, 0.5, 0.5), InvalidParameters);
}

TEST(SolveFgh, Residuals) {
  auto z = solve_fgh(0.3, 0.2, 0.5, 0, 0);
  EXPECT_DOUBLE_EQ(z.f, 0.3);
  EXPECT_DOUBLE_EQ(z.g, 0.2);
  EXPECT_DOUBLE_EQ(z.h, 0.5);

  auto w = solve_fgh(0.1, 0.1, 0.5, 0.06, 0.06);
  EXPECT_LT(std::abs(w.f + 0.06 * w.h - 0.1), 1e-12);
  EXPECT_LT(std::abs(w.g + 0.06 * w.h - 0.1), 1e-12);
  EXPECT_LT(std::abs(w.f * 0.06 + w.g * 0.06 + w.h - 0.5), 1e-12);
  EXPECT_TRUE(sigma2(w.f, w.g, w.h, 0.06, 0.06).is_positive_definite());

  EXPECT_THROW(solve_fgh(0.1, 0.1, 0.5, 0.8, 0.6), NumericalError);
}

TEST(VerifyKConstraintM2, TrivialAndCancellation) {
  auto r = verify_k_constraint_m2(0.3, 0.2, 0.4, 0, 0, 0.5);
  EXPECT_TRUE(r.holds);
  ASSERT_EQ(r.inequalities.size(), 5u);
  EXPECT_EQ(r.inequalities[0].lhs, 0.0);

  const double alpha = 0.3, beta = 0.2, theta0 = 0.5, m = alpha * theta0, n = 0.05;
  auto fgh = solve_fgh(alpha, beta, theta0, m, n);
  auto bad = verify_k_constraint_m2(fgh.f, fgh.g, fgh.h, m, n, 0.1);
  EXPECT_FALSE(bad.holds);
  EXPECT_FALSE(bad.inequalities[0].holds);
  EXPECT_NEAR(bad.inequalities[0].rhs, 0.0, 1e-12);
}

TEST(VerifyKConstraintM2, AgreesWithGenericCheck) {
  // The five closed-form inequalities are the pairs-with-one-conditioning-set
  // reading; where they fail, the exhaustive checker must fail too.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int i = 0; i < 200; ++i) {
    double f = u(rng), g = u(rng), h = u(rng), m = u(rng), n = u(rng);
    auto five = verify_k_constraint_m2(f, g, h, m, n, 0.2);
    if (!five.holds) {
      EXPECT_FALSE(satisfies_k_constraint(make_m2(f, g, h, m, n), 0.2).holds);
    }
  }
}

TEST(ConstructPair, Certificate) {
  const auto& p = pair_05();
  EXPECT_LT(p.kl, 1e-4);
  EXPECT_EQ(p.gamma, 0.5);
  EXPECT_TRUE(p.inequalities.holds);
  EXPECT_TRUE(p.sigma1.is_positive_definite());
  EXPECT_TRUE(p.sigma2.is_positive_definite());
  EXPECT_TRUE(satisfies_k_constraint(p.m1(), 0.1).holds);
  EXPECT_TRUE(satisfies_k_constraint(p.m2(), 0.1).holds);
  EXPECT_NEAR(gaussian_kl(p.sigma1, p.sigma2), p.kl, 1e-18);
  EXPECT_LT(max_gap(p.sigma1, implied_correlation(p.m1())), 1e-12);
  EXPECT_LT(max_gap(p.sigma2, implied_correlation(p.m2())), 1e-12);
  EXPECT_EQ(true_direct_effect(p.m1(), "X3", "X4"), 0.5);
  EXPECT_EQ(true_direct_effect(p.m2(), "X3", "X4"), 0.0);
  const double k_slack = p.m - p.alpha * p.theta0;
  EXPECT_NEAR(std::abs(k_slack), 2 * 0.1 * std::abs(p.m), 1e-15);
}

TEST(ConstructPair, KlShrinksAlongSchedule) {
  const auto& log = pair_05().search_log;
  ASSERT_GE(log.size(), 2u);
  for (std::size_t i = 1; i < log.size(); ++i) {
    EXPECT_LT(log[i].scale, log[i - 1].scale);
    EXPECT_LE(log[i].kl, log[i - 1].kl);
  }
  EXPECT_TRUE(log.back().verified);
}

TEST(ConstructPair, NegativeThetaAndOtherK) {
  auto p = construct_pair(-0.4, 0.3, 1e-5);
  EXPECT_LT(p.kl, 1e-5);
  EXPECT_TRUE(p.inequalities.holds);
  EXPECT_EQ(p.gamma, -0.4);
}

TEST(ConstructPair, Preconditions) {
  EXPECT_THROW(construct_pair(0.0, 0.1, 1e-4), DomainError);
  EXPECT_THROW(construct_pair(1.0, 0.1, 1e-4), DomainError);
  EXPECT_THROW(construct_pair(0.5, 0.5, 1e-4), DomainError);
  EXPECT_THROW(construct_pair(0.5, 0.1, 0.0), DomainError);
  EXPECT_THROW(construct_pair(0.5, 0.1, 1e-30), ConstructionFailed);
}

TEST(PinskerBound, Values) {
  EXPECT_EQ(pinsker_bound(0.0, 100), 0.0);
  const double eps = 0.05;
  EXPECT_NEAR(pinsker_bound(4 * eps * eps, 1), eps * std::sqrt(2.0), 1e-15);
  EXPECT_EQ(pinsker_bound(1.0, 10), 1.0);
  EXPECT_LE(pinsker_bound(1e-4, 10), pinsker_bound(1e-4, 20));
  EXPECT_LE(pinsker_bound(1e-4, 10), pinsker_bound(2e-4, 10));
  EXPECT_THROW(pinsker_bound(-1.0, 1), DomainError);
  EXPECT_THROW(pinsker_bound(0.1, 0), DomainError);
}

// Empirical probabilities of random half-space events under P1^n and P2^n
// (through the sample mean of a projection) differ by no more than the bound.
TEST(PinskerBound, HalfSpaceEvents) {
  const auto& p = pair_05();
  const std::size_t n = 400, reps = 2000;
  const double bound = pinsker_bound(p.kl, n);
  std::mt19937_64 rng(21);
  std::normal_distribution<double> z;
  for (int e = 0; e < 10; ++e) {
    Eigen::Vector4d w(z(rng), z(rng), z(rng), z(rng));
    const double threshold = 0.02 * z(rng);
    std::size_t hits1 = 0, hits2 = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      auto d1 = sample(p.m1(), n, 100000 * e + r);
      auto d2 = sample(p.m2(), n, 100000 * e + r + 50000);
      hits1 += (d1.values() * w).mean() > threshold;
      hits2 += (d2.values() * w).mean() > threshold;
    }
    const double p1 = double(hits1) / reps, p2 = double(hits2) / reps;
    const double sigma = std::sqrt((p1 * (1 - p1) + p2 * (1 - p2)) / reps);
    EXPECT_LE(std::abs(p1 - p2), bound + 3 * sigma) << e;
  }
}
