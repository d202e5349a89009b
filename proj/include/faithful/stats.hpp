#pragma once

// Sample correlations, partial correlations, and the Fisher-z tests that every
// discovery procedure composes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "faithful/error.hpp"
#include "faithful/types.hpp"

namespace faithful {

enum class Verdict : int { Accept = 0, Reject = 1, NoConclusion = 2 };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Accept: return "accept";
    case Verdict::Reject: return "reject";
    case Verdict::NoConclusion: return "no_conclusion";
  }
  return "?";
}

struct TestOutcome {
  Verdict verdict = Verdict::NoConclusion;
  double statistic = 0.0;
  double cutoff = 0.0;
};

/// A correlation estimate together with the sample size it came from.
struct CorrelationSample {
  CorrelationMatrix r;
  std::size_t n = 0;
};

/// Sample correlations are clamped to +-(1 - kClamp) before the z-transform.
inline constexpr double kCorrelationClamp = 1e-12;

inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal quantile needs p in (0,1)");
  static const boost::math::normal standard;
  return boost::math::quantile(standard, p);
}

inline CorrelationMatrix sample_correlation(const DataMatrix& d) {
  if (d.rows() < 3) throw DegenerateData("sample correlation needs at least 3 rows");
  const Eigen::MatrixXd& x = d.values();
  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::MatrixXd cov = centered.transpose() * centered;
  Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j)
    if (!(sd(j) > 0.0)) throw DegenerateData("column '" + d.labels()[j] + "' is constant");
  Eigen::MatrixXd r = cov.cwiseQuotient(sd * sd.transpose());
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    r(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      double v = std::clamp(0.5 * (r(i, j) + r(j, i)), -1.0, 1.0);
      r(i, j) = r(j, i) = v;
    }
  }
  return CorrelationMatrix(d.labels(), std::move(r));
}

inline CorrelationSample summarize(const DataMatrix& d) { return {sample_correlation(d), d.rows()}; }

/// -Omega_ab / sqrt(Omega_aa Omega_bb) with Omega the inverse of the submatrix over {a,b} + c.
inline double partial_correlation(const Eigen::MatrixXd& s, std::size_t a, std::size_t b,
                                  std::span<const std::size_t> c) {
  if (c.empty()) return std::clamp(s(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)), -1.0, 1.0);
  std::vector<Eigen::Index> idx{static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)};
  for (std::size_t v : c) idx.push_back(static_cast<Eigen::Index>(v));
  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd sub(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) sub(i, j) = s(idx[i], idx[j]);
  Eigen::LLT<Eigen::MatrixXd> llt(sub);
  if (llt.info() != Eigen::Success) throw NumericalError("conditioning submatrix is singular");
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Identity(k, 2);
  Eigen::MatrixXd omega = llt.solve(rhs);
  double denom = std::sqrt(omega(0, 0) * omega(1, 1));
  if (!(denom > 0.0) || !std::isfinite(denom)) throw NumericalError("conditioning submatrix is singular");
  return std::clamp(-omega(0, 1) / denom, -1.0, 1.0);
}

inline double partial_correlation(const CorrelationMatrix& s, std::string_view a, std::string_view b,
                                  const std::vector<std::string>& c) {
  std::size_t ia = s.index_of(a), ib = s.index_of(b);
  if (ia == ib) throw InvalidArgument("partial correlation needs two distinct variables");
  std::vector<std::size_t> ic;
  for (const auto& l : c) {
    std::size_t v = s.index_of(l);
    if (v == ia || v == ib) throw InvalidArgument("conditioning set contains a query variable");
    ic.push_back(v);
  }
  return partial_correlation(s.matrix(), ia, ib, ic);
}

inline double fisher_z(double r) {
  if (!(std::abs(r) < 1.0)) throw DomainError("fisher_z needs |r| < 1");
  return std::atanh(r);
}

namespace detail {

inline double effective_df(std::size_t n, std::size_t conditioning) {
  if (n <= conditioning + 3)
    throw InsufficientData("sample of size " + std::to_string(n) + " is too small to condition on " +
                           std::to_string(conditioning) + " variables");
  return static_cast<double>(n - conditioning - 3);
}

inline double clamped(double r) {
  return std::clamp(r, -1.0 + kCorrelationClamp, 1.0 - kCorrelationClamp);
}

inline void check_open_unit(double x, const char* name) {
  if (!(x > 0.0 && x < 1.0)) throw DomainError(std::string(name) + " must lie in (0,1)");
}

}  // namespace detail

/// H0: rho_{ab.C} = 0 against |rho_{ab.C}| > lambda, split at the z-scale midpoint.
inline TestOutcome test_zero_vs_lambda(const CorrelationSample& s, std::size_t a, std::size_t b,
                                       std::span<const std::size_t> c, double lambda) {
  detail::check_open_unit(lambda, "lambda");
  const double root = std::sqrt(detail::effective_df(s.n, c.size()));
  const double r = detail::clamped(partial_correlation(s.r.matrix(), a, b, c));
  TestOutcome out;
  out.statistic = root * fisher_z(r);
  out.cutoff = root * fisher_z(lambda) / 2.0;
  out.verdict = std::abs(out.statistic) < out.cutoff ? Verdict::Accept : Verdict::Reject;
  return out;
}

/// One-sided test of H0: |rho_{ab.C}| >= t; rejects when the estimate is
/// significantly below t at the given level.
inline TestOutcome test_magnitude_at_least(const CorrelationSample& s, std::size_t a, std::size_t b,
                                           std::span<const std::size_t> c, double t, double level = 0.01) {
  detail::check_open_unit(t, "magnitude threshold");
  detail::check_open_unit(level, "test level");
  const double root = std::sqrt(detail::effective_df(s.n, c.size()));
  const double r = detail::clamped(partial_correlation(s.r.matrix(), a, b, c));
  TestOutcome out;
  out.statistic = root * fisher_z(std::abs(r));
  out.cutoff = root * fisher_z(t) - normal_quantile(1.0 - level);
  out.verdict = out.statistic < out.cutoff ? Verdict::Reject : Verdict::Accept;
  return out;
}

namespace detail {

struct ResolvedTriple {
  std::size_t a, b;
  std::vector<std::size_t> c;
};

inline ResolvedTriple resolve(const std::vector<std::string>& labels, std::string_view a, std::string_view b,
                              const std::vector<std::string>& c) {
  ResolvedTriple t{find_label(labels, a), find_label(labels, b), {}};
  if (t.a == t.b) throw InvalidArgument("test needs two distinct variables");
  for (const auto& l : c) {
    std::size_t v = find_label(labels, l);
    if (v == t.a || v == t.b) throw InvalidArgument("conditioning set contains a query variable");
    t.c.push_back(v);
  }
  return t;
}

}  // namespace detail

inline TestOutcome test_zero_vs_lambda(const DataMatrix& d, std::string_view a, std::string_view b,
                                       const std::vector<std::string>& c, double lambda) {
  auto t = detail::resolve(d.labels(), a, b, c);
  detail::effective_df(d.rows(), t.c.size());
  return test_zero_vs_lambda(summarize(d), t.a, t.b, t.c, lambda);
}

inline TestOutcome test_magnitude_at_least(const DataMatrix& d, std::string_view a, std::string_view b,
                                           const std::vector<std::string>& c, double t, double level = 0.01) {
  auto tr = detail::resolve(d.labels(), a, b, c);
  detail::effective_df(d.rows(), tr.c.size());
  return test_magnitude_at_least(summarize(d), tr.a, tr.b, tr.c, t, level);
}

}  // namespace faithful
