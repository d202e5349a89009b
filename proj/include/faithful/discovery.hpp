#pragma once

// Structure discovery and causal-parameter inference: the equivalence-class
// test, PC with the lambda-gap test, its magnitude-gated variant, generalized
// estimators, and triple-partition confidence regions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
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

struct SeparationRecord {
  SeparationTriple triple;
  std::string test;  // "zero" (lambda-gap test) or "magnitude" (gate)
  Verdict verdict = Verdict::NoConclusion;
  double statistic = 0.0;
  double cutoff = 0.0;
};

struct DiscoveryResult {
  std::optional<Cpdag> structure;  // empty means "no conclusion"
  std::vector<SeparationRecord> log;
  std::vector<std::string> conflicts;

  bool no_conclusion() const noexcept { return !structure.has_value(); }
};

struct DiscoveryMode {
  std::optional<double> gate;
  double gate_level = 0.01;

  static DiscoveryMode plain() { return {}; }
  static DiscoveryMode gated(double g, double level = 0.01) { return {g, level}; }
};

// ---------------------------------------------------------------------------
// Equivalence-class test

namespace detail {

inline std::vector<std::size_t> map_to_data(const std::vector<std::string>& graph_labels,
                                            const std::vector<std::string>& data_labels) {
  auto map = align_vertices(data_labels, graph_labels);
  return map;
}

}  // namespace detail

/// Accept iff every partial correlation entailed zero by the class accepts zero
/// and every other one rejects zero. `statistic` counts the disagreeing tests;
/// the cutoff is 0.5, so Accept means no disagreement.
inline TestOutcome equivalence_class_test(const CorrelationSample& s, const Cpdag& m, double lambda,
                                          const EnumerationLimits& limits = {}) {
  detail::check_cap(m.size(), limits);
  auto map = detail::map_to_data(m.vertices(), s.r.labels());
  Dag member = m.to_dag();
  std::size_t disagreements = 0;
  std::vector<std::size_t> dc;
  detail::for_each_pair_and_subset(m.size(), [&](std::size_t a, std::size_t b, std::span<const std::size_t> c) {
    bool entailed_zero = d_separated(member, a, b, c);
    dc.assign(c.size(), 0);
    for (std::size_t i = 0; i < c.size(); ++i) dc[i] = map[c[i]];
    Verdict v = test_zero_vs_lambda(s, map[a], map[b], dc, lambda).verdict;
    if ((v == Verdict::Accept) != entailed_zero) ++disagreements;
  });
  TestOutcome out;
  out.statistic = static_cast<double>(disagreements);
  out.cutoff = 0.5;
  out.verdict = out.statistic < out.cutoff ? Verdict::Accept : Verdict::Reject;
  return out;
}

inline TestOutcome equivalence_class_test(const DataMatrix& d, const Cpdag& m, double lambda,
                                          const EnumerationLimits& limits = {}) {
  detail::check_cap(m.size(), limits);
  detail::map_to_data(m.vertices(), d.labels());
  return equivalence_class_test(summarize(d), m, lambda, limits);
}

// ---------------------------------------------------------------------------
// PC

struct PcOutput {
  Cpdag cpdag;
  std::vector<SeparationRecord> log;
  std::vector<std::string> conflicts;
};

/// PC over an arbitrary conditional-independence test. `ci(a, b, c)` returns a
/// TestOutcome whose Accept verdict means "independent". Pairs and conditioning
/// sets are visited in lexicographic label order; the first accepted set is kept
/// as the separating set.
template <class CiTest>
PcOutput run_pc(const std::vector<std::string>& labels, CiTest&& ci) {
  const std::size_t p = labels.size();
  const auto order = detail::lexicographic_order(labels);
  std::vector<std::size_t> rank(p);
  for (std::size_t r = 0; r < p; ++r) rank[order[r]] = r;
  auto by_rank = [&](std::vector<std::size_t>& v) {
    std::sort(v.begin(), v.end(), [&](std::size_t x, std::size_t y) { return rank[x] < rank[y]; });
  };

  PcOutput out;
  PartialGraph g(p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) g.set_undirected(i, j);
  std::vector<std::optional<std::vector<std::size_t>>> sepset(p * p);

  for (std::size_t level = 0;; ++level) {
    bool any_pool = false;
    for (std::size_t i : order) {
      for (std::size_t j : order) {
        if (i == j || !g.adjacent(i, j)) continue;
        auto pool = g.neighbors(i);
        pool.erase(std::remove(pool.begin(), pool.end(), j), pool.end());
        if (pool.size() < level) continue;
        any_pool = true;
        by_rank(pool);
        detail::for_each_subset_of_size(pool, level, [&](std::span<const std::size_t> c) {
          TestOutcome t = ci(i, j, c);
          out.log.push_back({detail::make_triple(labels, i, j, c), "zero", t.verdict, t.statistic, t.cutoff});
          if (t.verdict != Verdict::Accept) return false;
          g.remove(i, j);
          std::vector<std::size_t> s(c.begin(), c.end());
          sepset[i * p + j] = s;
          sepset[j * p + i] = s;
          return true;
        });
      }
    }
    if (!any_pool) break;
  }

  auto orient = [&](std::size_t from, std::size_t to) {
    if (g.locked(from, to) || g.directed(from, to)) return;
    if (g.directed(to, from)) {
      g.lock_undirected(from, to);
      out.conflicts.push_back(labels[from] + " -- " + labels[to] + ": both orientations forced");
      return;
    }
    g.orient(from, to);
  };
  for (std::size_t c : order) {
    auto nb = g.neighbors(c);
    by_rank(nb);
    for (std::size_t x = 0; x < nb.size(); ++x)
      for (std::size_t y = x + 1; y < nb.size(); ++y) {
        std::size_t a = nb[x], b = nb[y];
        if (g.adjacent(a, b)) continue;
        const auto& s = sepset[a * p + b];
        if (s && std::find(s->begin(), s->end(), c) != s->end()) continue;
        orient(a, c);
        orient(b, c);
      }
  }
  apply_meek_rules(g);
  out.cpdag = Cpdag::from_partial(labels, g);
  return out;
}

inline PcOutput pc_search(const CorrelationSample& s, double lambda) {
  return run_pc(s.r.labels(), [&](std::size_t a, std::size_t b, std::span<const std::size_t> c) {
    return test_zero_vs_lambda(s, a, b, c, lambda);
  });
}

inline Cpdag pc_discover(const DataMatrix& d, double lambda) { return pc_search(summarize(d), lambda).cpdag; }

/// PC on population correlations: independent iff |rho_{ab.C}| < tol.
inline Cpdag pc_discover(const CorrelationMatrix& s, double tol = 1e-9) {
  return run_pc(s.labels(),
                [&](std::size_t a, std::size_t b, std::span<const std::size_t> c) {
                  TestOutcome t;
                  t.statistic = partial_correlation(s.matrix(), a, b, c);
                  t.cutoff = tol;
                  t.verdict = std::abs(t.statistic) < tol ? Verdict::Accept : Verdict::Reject;
                  return t;
                })
      .cpdag;
}

/// PC followed, in gated mode, by a magnitude test of the marginal correlation of
/// every retained adjacency; any rejection turns the result into "no conclusion".
inline DiscoveryResult discover(const CorrelationSample& s, double lambda, const DiscoveryMode& mode) {
  PcOutput pc = pc_search(s, lambda);
  DiscoveryResult result;
  result.log = std::move(pc.log);
  result.conflicts = std::move(pc.conflicts);
  bool gate_failed = false;
  if (mode.gate) {
    const auto& labels = s.r.labels();
    const auto order = detail::lexicographic_order(labels);
    for (std::size_t x = 0; x < order.size(); ++x)
      for (std::size_t y = x + 1; y < order.size(); ++y) {
        std::size_t a = order[x], b = order[y];
        if (!pc.cpdag.adjacent(a, b)) continue;
        TestOutcome t = test_magnitude_at_least(s, a, b, {}, *mode.gate, mode.gate_level);
        result.log.push_back({detail::make_triple(labels, a, b, {}), "magnitude", t.verdict, t.statistic, t.cutoff});
        if (t.verdict == Verdict::Reject) gate_failed = true;
      }
  }
  if (!gate_failed) result.structure = std::move(pc.cpdag);
  return result;
}

inline DiscoveryResult pc_discover_gated(const DataMatrix& d, double lambda, double gate, double level = 0.01) {
  detail::check_open_unit(gate, "gate");
  return discover(summarize(d), lambda, DiscoveryMode::gated(gate, level));
}

// ---------------------------------------------------------------------------
// Generalized estimates and confidence regions

struct Interval {
  double lo = -1.0;
  double hi = 1.0;

  friend bool operator==(const Interval&, const Interval&) = default;
};

/// A point of Theta = [-1, 1] or a non-empty union of disjoint closed intervals in it.
class GeneralizedEstimate {
 public:
  static GeneralizedEstimate singleton(double v) {
    if (!(v >= -1.0 && v <= 1.0)) throw InvalidArgument("singleton estimate outside [-1, 1]");
    GeneralizedEstimate e;
    e.singleton_ = true;
    e.intervals_ = {{v, v}};
    return e;
  }

  static GeneralizedEstimate subset(std::vector<Interval> intervals) {
    if (intervals.empty()) throw InvalidArgument("set-valued estimate must be non-empty");
    std::sort(intervals.begin(), intervals.end(), [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
    for (std::size_t i = 0; i < intervals.size(); ++i) {
      const auto& iv = intervals[i];
      if (!(iv.lo <= iv.hi) || iv.lo < -1.0 || iv.hi > 1.0) throw InvalidArgument("interval outside [-1, 1]");
      if (i > 0 && !(intervals[i - 1].hi < iv.lo)) throw InvalidArgument("intervals overlap");
    }
    GeneralizedEstimate e;
    e.intervals_ = std::move(intervals);
    return e;
  }

  static GeneralizedEstimate whole_space() { return subset({{-1.0, 1.0}}); }

  bool is_singleton() const noexcept { return singleton_; }
  double value() const {
    if (!singleton_) throw InvalidArgument("estimate is set-valued");
    return intervals_.front().lo;
  }
  const std::vector<Interval>& intervals() const noexcept { return intervals_; }

  /// inf over the set of |s - r|.
  double distance_to(double r) const {
    double best = INFINITY;
    for (const auto& iv : intervals_) best = std::min(best, r < iv.lo ? iv.lo - r : (r > iv.hi ? r - iv.hi : 0.0));
    return best;
  }

 private:
  bool singleton_ = false;
  std::vector<Interval> intervals_;
};

/// Triple partition (accepted, rejected, undecided) of a uniform grid over [-1, 1].
class ConfidenceRegion {
 public:
  enum Part : std::uint8_t { kAccepted = 0, kRejected = 1, kUndecided = 2 };

  ConfidenceRegion(double level, double resolution, std::vector<std::uint8_t> parts)
      : level_(level), resolution_(resolution), parts_(std::move(parts)) {
    if (parts_.size() != grid_count(resolution) + 1) throw InvalidArgument("grid size does not match resolution");
  }

  /// Number of grid steps across [-1, 1]; the resolution must divide 2.
  static std::size_t grid_count(double resolution) {
    if (!(resolution > 0.0 && resolution <= 2.0)) throw InvalidArgument("grid resolution must lie in (0, 2]");
    double steps = 2.0 / resolution;
    auto count = static_cast<std::size_t>(std::llround(steps));
    if (count == 0 || std::abs(steps - static_cast<double>(count)) > 1e-6)
      throw InvalidArgument("grid resolution must divide the interval [-1, 1] evenly");
    return count;
  }

  static double grid_point(std::size_t i, std::size_t count) {
    return -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(count);
  }

  double level() const noexcept { return level_; }
  double resolution() const noexcept { return resolution_; }
  std::size_t size() const noexcept { return parts_.size(); }
  double point(std::size_t i) const { return grid_point(i, parts_.size() - 1); }
  Part part(std::size_t i) const { return static_cast<Part>(parts_.at(i)); }
  const std::vector<std::uint8_t>& parts() const noexcept { return parts_; }

  /// Part of the grid point nearest to theta.
  Part classify(double theta) const {
    double pos = (std::clamp(theta, -1.0, 1.0) + 1.0) / 2.0 * static_cast<double>(parts_.size() - 1);
    return part(static_cast<std::size_t>(std::llround(pos)));
  }

  /// Maximal runs of grid points in the given part, as closed intervals.
  std::vector<Interval> intervals(Part which) const {
    std::vector<Interval> out;
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      if (parts_[i] != which) continue;
      std::size_t j = i;
      while (j + 1 < parts_.size() && parts_[j + 1] == which) ++j;
      out.push_back({point(i), point(j)});
      i = j;
    }
    return out;
  }
  std::vector<Interval> s0() const { return intervals(kAccepted); }
  std::vector<Interval> s1() const { return intervals(kRejected); }
  std::vector<Interval> s2() const { return intervals(kUndecided); }

 private:
  double level_;
  double resolution_;
  std::vector<std::uint8_t> parts_;
};

struct EffectFit {
  double coefficient = 0.0;
  double standard_error = 0.0;
};

/// The x -> y coefficient when discovery returned a singleton class: regression
/// of y on its parents in that DAG. 0 (with zero error) when x -> y is absent.
inline std::optional<EffectFit> identified_effect(const CorrelationSample& s, const DiscoveryResult& r,
                                                  std::size_t x, std::size_t y) {
  if (r.no_conclusion() || !r.structure->fully_directed()) return std::nullopt;
  const Cpdag& c = *r.structure;
  if (!c.directed(x, y)) return EffectFit{0.0, 0.0};
  std::vector<Eigen::Index> pa;
  for (std::size_t v = 0; v < c.size(); ++v)
    if (c.directed(v, y)) pa.push_back(static_cast<Eigen::Index>(v));
  const auto k = static_cast<Eigen::Index>(pa.size());
  const Eigen::MatrixXd& m = s.r.matrix();
  Eigen::MatrixXd rpp(k, k);
  Eigen::VectorXd rpy(k);
  Eigen::Index xpos = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (pa[i] == static_cast<Eigen::Index>(x)) xpos = i;
    rpy(i) = m(pa[i], static_cast<Eigen::Index>(y));
    for (Eigen::Index j = 0; j < k; ++j) rpp(i, j) = m(pa[i], pa[j]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(rpp);
  if (llt.info() != Eigen::Success) throw NumericalError("parent correlation matrix is singular");
  Eigen::VectorXd b = llt.solve(rpy);
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(k, k));
  const double resid = std::max(0.0, 1.0 - b.dot(rpy));
  const double dof = static_cast<double>(s.n) - static_cast<double>(k) - 1.0;
  if (!(dof > 0.0)) throw InsufficientData("too few samples to estimate the effect");
  return EffectFit{b(xpos), std::sqrt(resid * inv(xpos, xpos) / dof)};
}

inline GeneralizedEstimate estimate_from(const CorrelationSample& s, const DiscoveryResult& r, std::size_t x,
                                         std::size_t y) {
  auto fit = identified_effect(s, r, x, y);
  if (!fit) return GeneralizedEstimate::whole_space();
  return GeneralizedEstimate::singleton(std::clamp(fit->coefficient, -1.0, 1.0));
}

/// Inverts a family of level-(1 - level) z-tests of H0: theta = theta0 over the grid.
inline ConfidenceRegion region_from(const CorrelationSample& s, const DiscoveryResult& r, std::size_t x,
                                    std::size_t y, double level, double resolution) {
  detail::check_open_unit(level, "confidence level");
  const std::size_t count = ConfidenceRegion::grid_count(resolution);
  std::vector<std::uint8_t> parts(count + 1, ConfidenceRegion::kUndecided);
  if (auto fit = identified_effect(s, r, x, y)) {
    const double crit = normal_quantile(0.5 + level / 2.0);
    for (std::size_t i = 0; i <= count; ++i) {
      const double gap = std::abs(fit->coefficient - ConfidenceRegion::grid_point(i, count));
      const bool accepted = fit->standard_error > 0.0 ? gap <= crit * fit->standard_error : gap <= resolution / 2.0;
      parts[i] = accepted ? ConfidenceRegion::kAccepted : ConfidenceRegion::kRejected;
    }
  }
  return ConfidenceRegion(level, resolution, std::move(parts));
}

inline GeneralizedEstimate estimate_direct_effect(const DataMatrix& d, std::string_view x, std::string_view y,
                                                  double lambda, const DiscoveryMode& mode = DiscoveryMode::plain()) {
  std::size_t ix = d.index_of(x), iy = d.index_of(y);
  if (ix == iy) throw InvalidArgument("effect needs two distinct variables");
  auto s = summarize(d);
  return estimate_from(s, discover(s, lambda, mode), ix, iy);
}

inline ConfidenceRegion confidence_region(const DataMatrix& d, std::string_view x, std::string_view y, double level,
                                          double lambda, double resolution = 1e-3,
                                          const DiscoveryMode& mode = DiscoveryMode::plain()) {
  std::size_t ix = d.index_of(x), iy = d.index_of(y);
  if (ix == iy) throw InvalidArgument("effect needs two distinct variables");
  auto s = summarize(d);
  return region_from(s, discover(s, lambda, mode), ix, iy, level, resolution);
}

}  // namespace faithful
