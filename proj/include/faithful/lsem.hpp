#pragma once

// Standardized linear Gaussian structural equation models.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "faithful/error.hpp"
#include "faithful/graph.hpp"
#include "faithful/stats.hpp"
#include "faithful/types.hpp"

namespace faithful {

struct Coefficient {
  std::string parent;
  std::string child;
  double value = 0.0;
};

/// Linear SEM over a DAG with unit-variance variables. Error variances are
/// solved from the coefficients, never stored as free parameters.
class Lsem {
 public:
  /// Error variances at or below this are treated as non-positive.
  static constexpr double kMinErrorVariance = 1e-12;

  Lsem(Dag graph, const std::vector<Coefficient>& coefficients) : graph_(std::move(graph)) {
    const auto p = static_cast<Eigen::Index>(graph_.size());
    weights_ = Eigen::MatrixXd::Zero(p, p);
    std::vector<std::uint8_t> seen(graph_.size() * graph_.size(), 0);
    for (const auto& c : coefficients) {
      std::size_t i = graph_.index_of(c.parent), j = graph_.index_of(c.child);
      if (!graph_.has_edge(i, j))
        throw InvalidArgument("coefficient on " + c.parent + " -> " + c.child + " has no matching edge");
      if (seen[i * graph_.size() + j]++)
        throw InvalidArgument("duplicate coefficient on " + c.parent + " -> " + c.child);
      if (!std::isfinite(c.value)) throw InvalidArgument("non-finite coefficient");
      weights_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c.value;
    }
    for (auto [i, j] : graph_.edge_indices())
      if (!seen[i * graph_.size() + j])
        throw InvalidArgument("edge " + graph_.label(i) + " -> " + graph_.label(j) + " has no coefficient");
    solve();
  }

  /// Builds from a weight matrix W with W(i,j) the coefficient on i -> j.
  static Lsem from_weights(Dag graph, const Eigen::MatrixXd& weights) {
    std::vector<Coefficient> cs;
    for (auto [i, j] : graph.edge_indices())
      cs.push_back({graph.label(i), graph.label(j),
                    weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
    return Lsem(std::move(graph), cs);
  }

  const Dag& graph() const noexcept { return graph_; }
  const Eigen::MatrixXd& weights() const noexcept { return weights_; }
  const Eigen::VectorXd& error_variances() const noexcept { return error_var_; }
  const CorrelationMatrix& correlation() const noexcept { return corr_; }

  double coefficient(std::size_t from, std::size_t to) const {
    return weights_(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to));
  }

  std::vector<Coefficient> coefficients() const {
    std::vector<Coefficient> out;
    for (const auto& e : graph_.edges())
      out.push_back({e.parent, e.child, coefficient(graph_.index_of(e.parent), graph_.index_of(e.child))});
    return out;
  }

 private:
  // Vertices in topological order; each covariance follows the linear recursion
  // over already-processed (non-descendant) vertices.
  void solve() {
    const auto p = static_cast<Eigen::Index>(graph_.size());
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(p, p);
    error_var_ = Eigen::VectorXd::Zero(p);
    std::vector<Eigen::Index> done;
    for (std::size_t vv : graph_.topological_order()) {
      const auto v = static_cast<Eigen::Index>(vv);
      const auto& pa = graph_.parents(vv);
      for (Eigen::Index u : done) {
        double cov = 0.0;
        for (std::size_t q : pa) cov += weights_(static_cast<Eigen::Index>(q), v) * sigma(static_cast<Eigen::Index>(q), u);
        sigma(v, u) = sigma(u, v) = cov;
      }
      double explained = 0.0;
      for (std::size_t q1 : pa)
        for (std::size_t q2 : pa)
          explained += weights_(static_cast<Eigen::Index>(q1), v) * weights_(static_cast<Eigen::Index>(q2), v) *
                       sigma(static_cast<Eigen::Index>(q1), static_cast<Eigen::Index>(q2));
      double err = 1.0 - explained;
      if (!(err > kMinErrorVariance)) throw NotStandardizable(graph_.label(vv), err);
      error_var_(v) = err;
      sigma(v, v) = 1.0;
      done.push_back(v);
    }
    corr_ = CorrelationMatrix(graph_.vertices(), std::move(sigma));
  }

  Dag graph_;
  Eigen::MatrixXd weights_;
  Eigen::VectorXd error_var_;
  CorrelationMatrix corr_;
};

inline CorrelationMatrix implied_correlation(const Lsem& m) { return m.correlation(); }

/// n i.i.d. draws generated through the structural equations; deterministic in `seed`.
inline DataMatrix sample(const Lsem& m, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("sample size must be at least 1");
  const Dag& g = m.graph();
  const auto p = static_cast<Eigen::Index>(g.size());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd noise_sd = m.error_variances().cwiseSqrt();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), p);
  for (Eigen::Index row = 0; row < static_cast<Eigen::Index>(n); ++row) {
    for (std::size_t vv : g.topological_order()) {
      const auto v = static_cast<Eigen::Index>(vv);
      double value = noise_sd(v) * normal(rng);
      for (std::size_t q : g.parents(vv)) value += m.weights()(static_cast<Eigen::Index>(q), v) * x(row, static_cast<Eigen::Index>(q));
      x(row, v) = value;
    }
  }
  return DataMatrix(g.vertices(), std::move(x));
}

/// Coefficient on x -> y, or 0 when there is no such edge.
inline double true_direct_effect(const Lsem& m, std::string_view x, std::string_view y) {
  std::size_t i = m.graph().index_of(x), j = m.graph().index_of(y);
  return m.graph().has_edge(i, j) ? m.coefficient(i, j) : 0.0;
}

// ---------------------------------------------------------------------------
// Faithfulness-strength checks

struct KConstraintWitness {
  SeparationTriple triple;
  double partial_correlation = 0.0;
  double coefficient = 0.0;  // mu_ab, 0 when a and b are not adjacent
};

struct KConstraintReport {
  bool holds = true;
  std::vector<KConstraintWitness> violations;
};

/// |rho_{ab.C}| >= k |mu_ab| for every pair and every conditioning subset.
inline KConstraintReport satisfies_k_constraint(const Lsem& m, double k, const EnumerationLimits& limits = {}) {
  if (!(k > 0.0 && k < 1.0)) throw DomainError("k must lie in (0,1)");
  const Dag& g = m.graph();
  detail::check_cap(g.size(), limits);
  KConstraintReport report;
  detail::for_each_pair_and_subset(g.size(), [&](std::size_t a, std::size_t b, std::span<const std::size_t> c) {
    double mu = g.has_edge(a, b) ? m.coefficient(a, b) : (g.has_edge(b, a) ? m.coefficient(b, a) : 0.0);
    if (mu == 0.0) return;
    double rho = partial_correlation(m.correlation().matrix(), a, b, c);
    if (std::abs(rho) < k * std::abs(mu))
      report.violations.push_back({detail::make_triple(g.vertices(), a, b, c), rho, mu});
  });
  report.holds = report.violations.empty();
  return report;
}

struct StrengthViolation {
  SeparationTriple triple;
  double partial_correlation = 0.0;
  bool d_connected = true;
};

struct StrengthReport {
  bool holds = true;
  std::vector<StrengthViolation> violations;
};

namespace detail {

/// d-connected triples need |rho| > threshold (strict when `strict`); d-separated
/// triples are recorded when |rho| exceeds `markov_tol`.
inline StrengthReport check_strength(const Lsem& m, double threshold, double markov_tol,
                                     const EnumerationLimits& limits) {
  const Dag& g = m.graph();
  check_cap(g.size(), limits);
  StrengthReport report;
  for_each_pair_and_subset(g.size(), [&](std::size_t a, std::size_t b, std::span<const std::size_t> c) {
    double rho = partial_correlation(m.correlation().matrix(), a, b, c);
    bool connected = !d_separated(g, a, b, c);
    if (connected ? !(std::abs(rho) > threshold) : std::abs(rho) > markov_tol)
      report.violations.push_back({make_triple(g.vertices(), a, b, c), rho, connected});
  });
  report.holds = report.violations.empty();
  return report;
}

}  // namespace detail

/// d-connected <=> |rho_{ab.C}| > lambda, over every pair and conditioning subset.
inline StrengthReport is_lambda_strong_faithful(const Lsem& m, double lambda, const EnumerationLimits& limits = {}) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw DomainError("lambda must lie in (0,1)");
  return detail::check_strength(m, lambda, 1e-9, limits);
}

/// Plain faithfulness: d-connected triples have |rho| above `tol`.
inline StrengthReport is_faithful(const Lsem& m, double tol = 1e-9, const EnumerationLimits& limits = {}) {
  if (!(tol >= 0.0)) throw DomainError("faithfulness tolerance must be non-negative");
  return detail::check_strength(m, tol, tol, limits);
}

/// KL(N(0, s1) || N(0, s2)).
inline double gaussian_kl(const CorrelationMatrix& s1, const CorrelationMatrix& s2) {
  if (s1.size() != s2.size()) throw InvalidArgument("KL divergence needs matrices of the same dimension");
  Eigen::LLT<Eigen::MatrixXd> l2(s2.matrix());
  if (l2.info() != Eigen::Success) throw NumericalError("second covariance is singular");
  Eigen::LLT<Eigen::MatrixXd> l1(s1.matrix());
  if (l1.info() != Eigen::Success) throw NumericalError("first covariance is singular");
  const double d = static_cast<double>(s1.size());
  double trace = l2.solve(s1.matrix()).trace();
  double logdet2 = 2.0 * l2.matrixL().toDenseMatrix().diagonal().array().log().sum();
  double logdet1 = 2.0 * l1.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return std::max(0.0, 0.5 * (trace - d + logdet2 - logdet1));
}

// ---------------------------------------------------------------------------
// Model builders

/// Coefficients uniform on [lo, hi], redrawn until the model is standardizable.
template <class Rng>
Lsem random_lsem(const Dag& g, Rng& rng, double lo = -0.8, double hi = 0.8, std::size_t max_tries = 10000) {
  std::uniform_real_distribution<double> coef(lo, hi);
  const auto p = static_cast<Eigen::Index>(g.size());
  for (std::size_t attempt = 0; attempt < max_tries; ++attempt) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(p, p);
    for (auto [i, j] : g.edge_indices()) w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = coef(rng);
    try {
      return Lsem::from_weights(g, w);
    } catch (const NotStandardizable&) {
    }
  }
  throw InvalidArgument("no standardizable coefficients found for graph");
}

/// G1: X1 -> X3 <- X2, X3 -> X4.
inline Dag canonical_g1() {
  return Dag(default_labels(4), {{"X1", "X3"}, {"X2", "X3"}, {"X3", "X4"}});
}

/// G2: X1 -> X3 <- X2, X1 -> X4 <- X2, X4 -> X3.
inline Dag canonical_g2() {
  return Dag(default_labels(4), {{"X1", "X3"}, {"X2", "X3"}, {"X4", "X3"}, {"X1", "X4"}, {"X2", "X4"}});
}

inline Lsem make_m1(double alpha, double beta, double gamma) {
  return Lsem(canonical_g1(), {{"X1", "X3", alpha}, {"X2", "X3", beta}, {"X3", "X4", gamma}});
}

inline Lsem make_m2(double f, double g, double h, double m, double n) {
  return Lsem(canonical_g2(),
              {{"X1", "X3", f}, {"X2", "X3", g}, {"X4", "X3", h}, {"X1", "X4", m}, {"X2", "X4", n}});
}

inline Lsem make_edgeless(std::size_t p) { return Lsem(Dag(default_labels(p), {}), {}); }

/// Collider D with independent parents A, B, C, every coefficient equal to c.
inline Lsem make_three_parent_collider(double c) {
  return Lsem(Dag({"A", "B", "C", "D"}, {{"A", "D"}, {"B", "D"}, {"C", "D"}}),
              {{"A", "D", c}, {"B", "D", c}, {"C", "D", c}});
}

}  // namespace faithful
