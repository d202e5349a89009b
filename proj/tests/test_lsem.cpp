#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "faithful/lsem.hpp"
#include "faithful/stats.hpp"
#include "oracles.hpp"

using namespace faithful;

TEST(Lsem, CoefficientsMustMatchEdges) {
  Dag g({"A", "B"}, {{"A", "B"}});
  EXPECT_THROW(Lsem(g, {}), InvalidArgument);
  EXPECT_THROW(Lsem(g, {{"B", "A", 0.1}}), InvalidArgument);
  EXPECT_THROW(Lsem(g, {{"A", "B", 0.1}, {"A", "B", 0.2}}), InvalidArgument);
  EXPECT_NO_THROW(Lsem(g, {{"A", "B", 0.1}}));
}

TEST(ImpliedCorrelation, CanonicalM1) {
  const auto s = implied_correlation(make_m1(0.5, 0.4, 0.3));
  EXPECT_NEAR(s.at("X1", "X2"), 0.0, 1e-15);
  EXPECT_NEAR(s.at("X1", "X3"), 0.5, 1e-15);
  EXPECT_NEAR(s.at("X2", "X3"), 0.4, 1e-15);
  EXPECT_NEAR(s.at("X3", "X4"), 0.3, 1e-15);
  EXPECT_NEAR(s.at("X1", "X4"), 0.15, 1e-15);
  EXPECT_NEAR(s.at("X2", "X4"), 0.12, 1e-15);
}

TEST(ImpliedCorrelation, CanonicalM2) {
  const double f = 0.2, g = -0.1, h = 0.3, m = 0.25, n = 0.15;
  const auto s = implied_correlation(make_m2(f, g, h, m, n));
  EXPECT_NEAR(s.at("X1", "X2"), 0.0, 1e-14);
  EXPECT_NEAR(s.at("X1", "X3"), f + m * h, 1e-14);
  EXPECT_NEAR(s.at("X2", "X3"), g + n * h, 1e-14);
  EXPECT_NEAR(s.at("X1", "X4"), m, 1e-14);
  EXPECT_NEAR(s.at("X2", "X4"), n, 1e-14);
  EXPECT_NEAR(s.at("X3", "X4"), f * m + g * n + h, 1e-14);
}

TEST(ImpliedCorrelation, EdgelessIsIdentity) {
  EXPECT_TRUE(implied_correlation(make_edgeless(5)).matrix().isIdentity(0.0));
}

TEST(ImpliedCorrelation, MatchesStructuralCovariance) {
  std::mt19937_64 rng(5);
  for (const auto& g : enumerate_dags(4)) {
    Lsem m = random_lsem(g, rng);
    Eigen::MatrixXd cov = oracle::structural_covariance(m.weights(), m.error_variances());
    EXPECT_TRUE(cov.isApprox(m.correlation().matrix(), 1e-12));
    EXPECT_NEAR((cov.diagonal().array() - 1.0).abs().maxCoeff(), 0.0, 1e-12);
  }
}

TEST(ImpliedCorrelation, InvariantUnderRelabeling) {
  Lsem m = make_m2(0.2, -0.1, 0.3, 0.25, 0.15);
  // Same model with vertices listed in reverse order and renamed.
  std::vector<std::string> names{"d", "c", "b", "a"};  // X1->a, X2->b, X3->c, X4->d
  auto rename = [](const std::string& x) { return std::string(1, static_cast<char>('a' + (x[1] - '1'))); };
  std::vector<Edge> edges;
  std::vector<Coefficient> coefs;
  for (const auto& c : m.coefficients()) {
    edges.push_back({rename(c.parent), rename(c.child)});
    coefs.push_back({rename(c.parent), rename(c.child), c.value});
  }
  Lsem p(Dag(names, edges), coefs);
  for (const auto& x : default_labels(4))
    for (const auto& y : default_labels(4))
      EXPECT_NEAR(m.correlation().at(x, y), p.correlation().at(rename(x), rename(y)), 1e-14);
}

TEST(Standardizability, ThreeParentCollider) {
  EXPECT_NO_THROW(make_three_parent_collider(0.5));
  EXPECT_NO_THROW(make_three_parent_collider(0.577));
  try {
    make_three_parent_collider(0.6);
    FAIL() << "expected NotStandardizable";
  } catch (const NotStandardizable& e) {
    EXPECT_EQ(e.vertex(), "D");
    EXPECT_NEAR(e.error_variance(), 1.0 - 3 * 0.36, 1e-12);
  }
  EXPECT_THROW(make_three_parent_collider(std::sqrt(3.0) / 3.0 + 1e-9), NotStandardizable);
}

TEST(Sample, DeterministicAndCloseToImplied) {
  Lsem m = make_m1(0.5, 0.4, 0.3);
  auto a = sample(m, 1000, 99), b = sample(m, 1000, 99);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a == sample(m, 1000, 100));
  auto r = sample_correlation(a);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(r(i, j), m.correlation()(i, j), 4.0 / std::sqrt(1000.0));
}

TEST(Sample, EdgelessColumnsUncorrelated) {
  auto r = sample_correlation(sample(make_edgeless(4), 1000, 3));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) EXPECT_LT(std::abs(r(i, j)), 4.0 / std::sqrt(1000.0));
}

TEST(Sample, ConvergesAtLargeN) {
  auto r = sample_correlation(sample(make_m2(0.2, -0.1, 0.3, 0.25, 0.15), 100000, 8));
  const auto s = implied_correlation(make_m2(0.2, -0.1, 0.3, 0.25, 0.15));
  EXPECT_LT((r.matrix() - s.matrix()).cwiseAbs().maxCoeff(), 0.02);
}

TEST(TrueDirectEffect, Examples) {
  EXPECT_EQ(true_direct_effect(make_m1(0.5, 0.4, 0.3), "X3", "X4"), 0.3);
  EXPECT_EQ(true_direct_effect(make_m2(0.2, -0.1, 0.3, 0.25, 0.15), "X3", "X4"), 0.0);
  EXPECT_EQ(true_direct_effect(make_m1(0.5, 0.4, 0.3), "X1", "X2"), 0.0);
  EXPECT_EQ(true_direct_effect(make_m1(0.5, 0.4, 0.3), "X4", "X3"), 0.0);
  EXPECT_THROW(true_direct_effect(make_m1(0.5, 0.4, 0.3), "X3", "Q"), InvalidArgument);
}

TEST(KConstraint, M1AtSmallK) {
  EXPECT_TRUE(satisfies_k_constraint(make_m1(0.5, 0.4, 0.3), 0.1).holds);
  EXPECT_TRUE(satisfies_k_constraint(make_m1(0.05, 0.05, 0.5), 0.1).holds);
}

// Under the every-conditioning-set reading, M1 is not unconstrained: conditioning
// on X1 and X2 shrinks rho_34 to gamma sqrt(1 - a^2 - b^2) / sqrt(1 - gamma^2 (a^2 + b^2)).
TEST(KConstraint, M1FailsForLargeK) {
  auto r = satisfies_k_constraint(make_m1(0.5, 0.4, 0.3), 0.9);
  EXPECT_FALSE(r.holds);
  bool saw = false;
  for (const auto& w : r.violations)
    if (w.triple.a == "X3" && w.triple.b == "X4" && w.triple.c == std::vector<std::string>{"X1", "X2"}) {
      saw = true;
      const double a2b2 = 0.25 + 0.16;
      EXPECT_NEAR(w.partial_correlation, 0.3 * std::sqrt(1 - a2b2) / std::sqrt(1 - 0.09 * a2b2), 1e-12);
    }
  EXPECT_TRUE(saw);
}

TEST(KConstraint, M2WithCancellationFails) {
  // m = alpha * theta0 makes rho_{14.3} vanish.
  const double alpha = 0.3, beta = 0.2, theta0 = 0.5, m = alpha * theta0, n = 0.05;
  const double det = 1 - m * m - n * n;
  const double f = ((1 - n * n) * alpha + m * n * beta - m * theta0) / det;
  const double g = ((1 - m * m) * beta + m * n * alpha - n * theta0) / det;
  const double h = (theta0 - m * alpha - n * beta) / det;
  auto r = satisfies_k_constraint(make_m2(f, g, h, m, n), 0.1);
  EXPECT_FALSE(r.holds);
  bool saw = false;
  for (const auto& w : r.violations)
    saw |= w.triple.a == "X1" && w.triple.b == "X4" && w.triple.c == std::vector<std::string>{"X3"};
  EXPECT_TRUE(saw);
}

TEST(KConstraint, RejectsBoundaryK) {
  EXPECT_THROW(satisfies_k_constraint(make_m1(0.5, 0.4, 0.3), 0.0), DomainError);
  EXPECT_THROW(satisfies_k_constraint(make_m1(0.5, 0.4, 0.3), 1.0), DomainError);
}

TEST(StrongFaithfulness, M1AgainstOracleEnumeration) {
  Lsem m = make_m1(0.5, 0.4, 0.3);
  auto report = is_lambda_strong_faithful(m, 0.1);
  std::size_t expected = 0;
  const auto& s = m.correlation().matrix();
  detail::for_each_pair_and_subset(4, [&](std::size_t a, std::size_t b, std::span<const std::size_t> c) {
    std::vector<std::size_t> cv(c.begin(), c.end());
    double rho = oracle::partial_correlation(s, a, b, cv);
    bool connected = !oracle::d_separated(m.graph(), a, b, c);
    if (connected && !(std::abs(rho) > 0.1)) ++expected;
    if (!connected) {
      EXPECT_LT(std::abs(rho), 1e-12);
    }
  });
  EXPECT_EQ(report.violations.size(), expected);
  EXPECT_EQ(report.holds, expected == 0);
}

TEST(StrongFaithfulness, WeakArrowEventuallyFails) {
  EXPECT_TRUE(is_lambda_strong_faithful(make_m1(0.6, 0.6, 0.6), 0.1).holds);
  EXPECT_FALSE(is_lambda_strong_faithful(make_m1(0.05, 0.6, 0.6), 0.1).holds);
  EXPECT_THROW(is_lambda_strong_faithful(make_m1(0.5, 0.4, 0.3), 0.0), DomainError);
}

TEST(Faithfulness, ExactCancellationDetected) {
  Lsem m(Dag({"X1", "X2", "X3"}, {{"X1", "X2"}, {"X2", "X3"}, {"X1", "X3"}}),
         {{"X1", "X2", 0.5}, {"X2", "X3", 0.4}, {"X1", "X3", -0.2}});
  auto r = is_faithful(m);
  EXPECT_FALSE(r.holds);
  EXPECT_EQ(r.violations.front().triple, (SeparationTriple{"X1", "X3", {}}));
}

TEST(MarkovProperty, EntailedZerosVanishExactly) {
  std::mt19937_64 rng(17);
  for (std::size_t p = 2; p <= 4; ++p)
    for (const auto& g : enumerate_dags(p)) {
      Lsem m = random_lsem(g, rng);
      auto zeros = entailed_zero_set(g);
      std::set<SeparationTriple> z(zeros.begin(), zeros.end());
      detail::for_each_pair_and_subset(p, [&](std::size_t a, std::size_t b, std::span<const std::size_t> c) {
        double rho = partial_correlation(m.correlation().matrix(), a, b, c);
        if (z.count(detail::make_triple(g.vertices(), a, b, c))) {
          EXPECT_LT(std::abs(rho), 1e-9);
        }
      });
    }
}

TEST(FaithfulnessGenericity, RandomParametersAreFaithful) {
  std::mt19937_64 rng(23);
  for (const auto& g : enumerate_dags(3)) {
    std::size_t faithful = 0;
    for (int i = 0; i < 1000; ++i) faithful += is_faithful(random_lsem(g, rng), 1e-6).holds;
    EXPECT_GE(faithful, 990u);
  }
}

TEST(GaussianKl, Examples) {
  auto s = implied_correlation(make_m1(0.5, 0.4, 0.3));
  EXPECT_EQ(gaussian_kl(s, s), 0.0);
  Eigen::Matrix2d r;
  r << 1, 0.5, 0.5, 1;
  CorrelationMatrix s2({"A", "B"}, r);
  const double exact = oracle::kl_identity_vs_rho(0.5);
  EXPECT_NEAR(gaussian_kl(CorrelationMatrix::identity({"A", "B"}), s2), exact, 1e-14);
  EXPECT_NEAR(oracle::kl_identity_vs_rho_mc(0.5, 400000, 1), exact, 0.01);
  EXPECT_GT(gaussian_kl(s2, CorrelationMatrix::identity({"A", "B"})), 0.0);
}

TEST(GaussianKl, SingularSecondArgument) {
  Eigen::Matrix2d r;
  r << 1, 1, 1, 1;
  CorrelationMatrix s({"A", "B"}, r);
  EXPECT_THROW(gaussian_kl(CorrelationMatrix::identity({"A", "B"}), s), NumericalError);
  EXPECT_THROW(gaussian_kl(CorrelationMatrix::identity({"A"}), s), InvalidArgument);
}
