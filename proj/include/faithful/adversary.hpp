#pragma once

// Explicit KL-close pairs of distributions from the canonical graphs G1 and G2
// that both satisfy the k-constraint, while X3 -> X4 has effect theta0 in the
// first and 0 in the second.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "faithful/error.hpp"
#include "faithful/graph.hpp"
#include "faithful/lsem.hpp"
#include "faithful/types.hpp"

namespace faithful {

namespace detail {

/// Canonical 4x4 correlation from its upper-triangle entries (12, 13, 14, 23, 24, 34).
inline CorrelationMatrix canonical_correlation(double r12, double r13, double r14, double r23, double r24,
                                               double r34) {
  Eigen::Matrix4d s;
  s << 1.0, r12, r13, r14,  //
      r12, 1.0, r23, r24,   //
      r13, r23, 1.0, r34,   //
      r14, r24, r34, 1.0;
  Eigen::LLT<Eigen::Matrix4d> llt(s);
  if (llt.info() != Eigen::Success) throw InvalidParameters("closed-form correlation matrix is not positive definite");
  return CorrelationMatrix(default_labels(4), Eigen::MatrixXd(s));
}

}  // namespace detail

inline CorrelationMatrix sigma1(double alpha, double beta, double gamma) {
  return detail::canonical_correlation(0.0, alpha, alpha * gamma, beta, beta * gamma, gamma);
}

inline CorrelationMatrix sigma2(double f, double g, double h, double m, double n) {
  return detail::canonical_correlation(0.0, f + m * h, m, g + n * h, n, f * m + g * n + h);
}

struct Fgh {
  double f = 0.0;
  double g = 0.0;
  double h = 0.0;
};

/// Solves f + mh = alpha, g + nh = beta, fm + gn + h = theta0.
inline Fgh solve_fgh(double alpha, double beta, double theta0, double m, double n) {
  const double det = 1.0 - m * m - n * n;
  if (!(det > 0.0)) throw NumericalError("f, g, h system is singular: m^2 + n^2 must be below 1");
  return {((1.0 - n * n) * alpha + m * n * beta - m * theta0) / det,
          ((1.0 - m * m) * beta + m * n * alpha - n * theta0) / det,  //
          (theta0 - m * alpha - n * beta) / det};
}

struct Inequality {
  std::string name;
  double lhs = 0.0;  // k |coefficient|
  double rhs = 0.0;  // |correlation|
  bool holds = false;
};

struct InequalityReport {
  bool holds = false;
  std::vector<Inequality> inequalities;
};

/// The five closed-form k-constraint inequalities on (f, g, h, m, n).
inline InequalityReport verify_k_constraint_m2(double f, double g, double h, double m, double n, double k) {
  if (!(k > 0.0 && k < 1.0)) throw DomainError("k must lie in (0,1)");
  sigma2(f, g, h, m, n);
  const double r13 = f + m * h, r23 = g + n * h, r34 = f * m + g * n + h;
  const double r14_3 = (m - r13 * r34) / std::sqrt((1.0 - r13 * r13) * (1.0 - r34 * r34));
  const double r24_3 = (n - r23 * r34) / std::sqrt((1.0 - r23 * r23) * (1.0 - r34 * r34));
  InequalityReport report;
  auto add = [&](const char* name, double coef, double corr) {
    Inequality q{name, k * std::abs(coef), std::abs(corr), false};
    q.holds = q.lhs <= q.rhs;
    report.inequalities.push_back(q);
  };
  add("k|m| <= |rho_14.3|", m, r14_3);
  add("k|n| <= |rho_24.3|", n, r24_3);
  add("k|f| <= |rho_13|", f, r13);
  add("k|g| <= |rho_23|", g, r23);
  add("k|h| <= |rho_34|", h, r34);
  report.holds = std::all_of(report.inequalities.begin(), report.inequalities.end(),
                             [](const Inequality& q) { return q.holds; });
  return report;
}

/// min(1, sqrt(n KL / 2)): total-variation bound between n-fold products.
inline double pinsker_bound(double kl, std::size_t n) {
  if (!(kl >= 0.0)) throw DomainError("KL divergence must be non-negative");
  if (n < 1) throw DomainError("sample size must be at least 1");
  return std::min(1.0, std::sqrt(static_cast<double>(n) * kl / 2.0));
}

struct SearchStep {
  double scale = 0.0;
  double kl = 0.0;
  bool verified = false;
  std::string note;
};

struct CanonicalPair {
  double alpha = 0.0, beta = 0.0, gamma = 0.0;
  double f = 0.0, g = 0.0, h = 0.0, m = 0.0, n = 0.0;
  CorrelationMatrix sigma1;
  CorrelationMatrix sigma2;
  double kl = 0.0;
  double k = 0.0;
  double theta0 = 0.0;
  double epsilon = 0.0;
  double scale = 0.0;
  InequalityReport inequalities;
  std::vector<SearchStep> search_log;

  Lsem m1() const { return make_m1(alpha, beta, gamma); }
  Lsem m2() const { return make_m2(f, g, h, m, n); }
};

struct ConstructionOptions {
  double initial_scale = 0.2;
  double min_scale = 1e-8;
};

/// Shrinks alpha = beta = s and m = n = s theta0 / (1 - 2k) geometrically until
/// every constraint verifies and KL(P1, P2) < epsilon.
inline CanonicalPair construct_pair(double theta0, double k, double epsilon, const ConstructionOptions& opts = {}) {
  if (!(std::abs(theta0) > 0.0 && std::abs(theta0) < 1.0)) throw DomainError("theta0 must be non-zero with |theta0| < 1");
  if (!(k > 0.0 && k < 0.5)) throw DomainError("k must lie in (0, 1/2)");
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");

  CanonicalPair pair;
  pair.k = k;
  pair.theta0 = theta0;
  pair.epsilon = epsilon;
  for (double s = opts.initial_scale; s >= opts.min_scale; s /= 2.0) {
    SearchStep step{s, 0.0, false, ""};
    try {
      const double mn = s * theta0 / (1.0 - 2.0 * k);
      const Fgh fgh = solve_fgh(s, s, theta0, mn, mn);
      CorrelationMatrix s1 = sigma1(s, s, theta0);
      CorrelationMatrix s2 = sigma2(fgh.f, fgh.g, fgh.h, mn, mn);
      Lsem p1 = make_m1(s, s, theta0);
      Lsem p2 = make_m2(fgh.f, fgh.g, fgh.h, mn, mn);
      step.kl = gaussian_kl(s1, s2);
      InequalityReport five = verify_k_constraint_m2(fgh.f, fgh.g, fgh.h, mn, mn, k);
      std::ostringstream why;
      if (!five.holds) why << "closed-form inequalities fail; ";
      if (!satisfies_k_constraint(p1, k).holds) why << "M1 k-constraint fails; ";
      if (!satisfies_k_constraint(p2, k).holds) why << "M2 k-constraint fails; ";
      if (!is_faithful(p1).holds) why << "M1 unfaithful; ";
      if (!is_faithful(p2).holds) why << "M2 unfaithful; ";
      step.note = why.str();
      step.verified = step.note.empty();
      if (step.verified && step.kl >= epsilon) step.note = "kl above epsilon";
      pair.search_log.push_back(step);
      if (step.verified && step.kl < epsilon) {
        pair.alpha = pair.beta = s;
        pair.gamma = theta0;
        pair.f = fgh.f;
        pair.g = fgh.g;
        pair.h = fgh.h;
        pair.m = pair.n = mn;
        pair.sigma1 = std::move(s1);
        pair.sigma2 = std::move(s2);
        pair.kl = step.kl;
        pair.scale = s;
        pair.inequalities = std::move(five);
        return pair;
      }
    } catch (const Error& e) {
      step.note = e.what();
      pair.search_log.push_back(step);
    }
  }
  const SearchStep& last = pair.search_log.back();
  std::ostringstream msg;
  msg << "no verified pair found; last scale " << last.scale << ", kl " << last.kl << ", " << last.note;
  throw ConstructionFailed(msg.str());
}

}  // namespace faithful
