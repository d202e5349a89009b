#pragma once

// Monte-Carlo experiments: pointwise error curves, worst-case sweeps over
// lambda-strong-faithful families, and the adversarial indistinguishability demo.
//
// Every replication draws from its own generator seeded by
//   sub_seed(seed, model_index, n, replication, stream)
// (a splitmix64 chain), so cells can run in any order or in parallel and still
// reproduce bit-exactly.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "faithful/adversary.hpp"
#include "faithful/discovery.hpp"
#include "faithful/error.hpp"
#include "faithful/graph.hpp"
#include "faithful/io.hpp"
#include "faithful/lsem.hpp"
#include "faithful/stats.hpp"

namespace faithful {

using json = nlohmann::json;

inline constexpr int kReportSchemaVersion = 1;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t model, std::uint64_t n, std::uint64_t replication,
                              std::uint64_t stream = 0) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t part : {model, n, replication, stream}) h = splitmix64(h ^ part);
  return h;
}

/// Worker count from FAITHFUL_LAB_THREADS; 0 or unset means hardware concurrency.
inline unsigned worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const char* env = std::getenv("FAITHFUL_LAB_THREADS");
  if (!env || !*env) return hw;
  char* end = nullptr;
  long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 0) return hw;
  return v == 0 ? hw : static_cast<unsigned>(v);
}

/// Runs body(i) for i in [0, count) on up to `threads` workers.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(count, 1)));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count && !failed; i = next++) {
          try {
            body(i);
          } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
          }
        }
      });
  }
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Model families

struct NamedModel {
  std::string id;
  Lsem model;
};

enum class FamilyKind { Grid, LambdaSF, Adversarial };

inline const char* to_string(FamilyKind k) {
  switch (k) {
    case FamilyKind::Grid: return "grid";
    case FamilyKind::LambdaSF: return "lambda_sf";
    case FamilyKind::Adversarial: return "adversarial";
  }
  return "?";
}

struct LambdaSfSpec {
  std::size_t vertices = 4;
  std::vector<double> lattice{0.3, 0.5, 0.7};  // used with both signs
  double lambda = 0.2;
  std::size_t models = 100;
  std::uint64_t seed = 1;
  std::size_t max_attempts = 1000000;
};

class ModelFamily {
 public:
  static ModelFamily grid(std::vector<NamedModel> models, std::string description) {
    if (models.empty()) throw InvalidArgument("grid family must contain at least one model");
    ModelFamily f;
    f.kind_ = FamilyKind::Grid;
    f.description_ = std::move(description);
    json ms = json::array();
    for (const auto& m : models) {
      json e = io::to_json(m.model);
      e["id"] = m.id;
      ms.push_back(e);
    }
    f.spec_ = {{"kind", "grid"}, {"description", f.description_}, {"models", ms}};
    f.members_ = std::move(models);
    return f;
  }

  /// Random lattice models over random DAGs, kept only when they verify as
  /// lambda-strong-faithful. Deterministic in spec.seed.
  static ModelFamily lambda_sf(const LambdaSfSpec& spec) {
    if (spec.vertices < 2 || spec.vertices > 5) throw InvalidArgument("lambda_sf family supports 2 to 5 vertices");
    if (spec.lattice.empty()) throw InvalidArgument("lambda_sf lattice must be non-empty");
    if (spec.models == 0) throw InvalidArgument("lambda_sf family needs at least one model");
    const auto dags = enumerate_dags(spec.vertices);
    std::vector<double> values;
    for (double v : spec.lattice) {
      values.push_back(v);
      values.push_back(-v);
    }
    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<std::size_t> pick_dag(0, dags.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_value(0, values.size() - 1);
    std::set<std::pair<std::size_t, std::vector<std::size_t>>> seen;
    ModelFamily f;
    f.kind_ = FamilyKind::LambdaSF;
    f.filter_lambda_ = spec.lambda;
    for (std::size_t attempt = 0; attempt < spec.max_attempts && f.members_.size() < spec.models; ++attempt) {
      std::size_t d = pick_dag(rng);
      const Dag& g = dags[d];
      std::vector<std::size_t> choice(g.edge_count());
      for (auto& c : choice) c = pick_value(rng);
      if (!seen.insert({d, choice}).second) continue;
      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g.size()));
      auto edges = g.edge_indices();
      for (std::size_t e = 0; e < edges.size(); ++e)
        w(static_cast<Eigen::Index>(edges[e].first), static_cast<Eigen::Index>(edges[e].second)) = values[choice[e]];
      try {
        Lsem m = Lsem::from_weights(g, w);
        if (!is_lambda_strong_faithful(m, spec.lambda).holds) continue;
        f.members_.push_back({"sf" + std::to_string(f.members_.size()), std::move(m)});
      } catch (const NotStandardizable&) {
      }
    }
    if (f.members_.size() < spec.models)
      throw InvalidArgument("could only find " + std::to_string(f.members_.size()) + " lambda-strong-faithful models");
    f.description_ = std::to_string(f.members_.size()) + " verified " + std::to_string(spec.vertices) +
                     "-vertex lambda-strong-faithful models (lambda " + io::format_double(spec.lambda) + ")";
    f.spec_ = {{"kind", "lambda_sf"},   {"vertices", spec.vertices}, {"lattice", spec.lattice},
               {"lambda", spec.lambda}, {"models", spec.models},     {"seed", spec.seed}};
    return f;
  }

  /// The pair's two models. delta must be below |theta0| so that the G2 model,
  /// with effect 0, lies at distance >= delta from the null value.
  static ModelFamily adversarial(CanonicalPair pair, double delta) {
    if (!(delta > 0.0 && delta < std::abs(pair.theta0)))
      throw InvalidArgument("delta must lie in (0, |theta0|)");
    ModelFamily f;
    f.kind_ = FamilyKind::Adversarial;
    f.members_ = {{"P1", pair.m1()}, {"P2", pair.m2()}};
    f.description_ = "adversarial pair for theta0 " + io::format_double(pair.theta0) + ", k " +
                     io::format_double(pair.k) + ", kl " + io::format_double(pair.kl);
    f.spec_ = {{"kind", "adversarial"}, {"k", pair.k}, {"delta", delta}};
    f.delta_ = delta;
    f.pair_ = std::move(pair);
    return f;
  }

  FamilyKind kind() const noexcept { return kind_; }
  const std::vector<NamedModel>& members() const noexcept { return members_; }
  const std::string& description() const noexcept { return description_; }
  double filter_lambda() const noexcept { return filter_lambda_; }
  double delta() const noexcept { return delta_; }
  const std::optional<CanonicalPair>& pair() const noexcept { return pair_; }
  const json& spec() const noexcept { return spec_; }

 private:
  FamilyKind kind_ = FamilyKind::Grid;
  std::vector<NamedModel> members_;
  std::string description_;
  double filter_lambda_ = 0.0;
  double delta_ = 0.0;
  std::optional<CanonicalPair> pair_;
  json spec_;
};

// ---------------------------------------------------------------------------
// Configuration and report

enum class Demo { Pointwise, Uniform, Adversarial };

inline const char* to_string(Demo d) {
  switch (d) {
    case Demo::Pointwise: return "pointwise";
    case Demo::Uniform: return "uniform";
    case Demo::Adversarial: return "adversarial";
  }
  return "?";
}

struct ExperimentConfig {
  Demo demo = Demo::Pointwise;
  ModelFamily family;
  std::vector<std::size_t> sample_sizes;
  std::size_t replications = 500;
  std::uint64_t seed = 20021;
  double lambda = 0.2;
  std::optional<double> gate;
  double theta0 = 0.5;
  double epsilon = 1e-4;
  double delta = 0.25;
  double level = 0.95;
  bool allow_lambda_mismatch = false;

  /// Throws ConfigError naming the offending field.
  void validate() const {
    if (replications < 1) throw ConfigError("replications: must be at least 1");
    if (sample_sizes.empty()) throw ConfigError("sample_sizes: must be non-empty");
    for (std::size_t i = 0; i < sample_sizes.size(); ++i) {
      if (sample_sizes[i] < 8) throw ConfigError("sample_sizes[" + std::to_string(i) + "]: must be at least 8");
      if (i > 0 && sample_sizes[i] <= sample_sizes[i - 1])
        throw ConfigError("sample_sizes: must be strictly increasing");
    }
    if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("lambda: must lie in (0,1)");
    if (gate && !(*gate > 0.0 && *gate < 1.0)) throw ConfigError("gate: must lie in (0,1)");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("level: must lie in (0,1)");
    if (!(std::abs(theta0) < 1.0)) throw ConfigError("theta0: must satisfy |theta0| < 1");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon: must be positive");
    if (!(delta > 0.0)) throw ConfigError("delta: must be positive");
    const FamilyKind want = demo == Demo::Pointwise ? FamilyKind::Grid
                            : demo == Demo::Uniform ? FamilyKind::LambdaSF
                                                    : FamilyKind::Adversarial;
    if (family.kind() != want)
      throw ConfigError(std::string("family.kind: demo '") + to_string(demo) + "' needs a '" + to_string(want) +
                        "' family");
    if (demo == Demo::Uniform && family.filter_lambda() != lambda && !allow_lambda_mismatch)
      throw ConfigError("lambda: does not match the family filter (set allow_lambda_mismatch to run anyway)");
    if (demo == Demo::Adversarial && !(delta < std::abs(theta0))) throw ConfigError("delta: must be below |theta0|");
  }
};

inline json to_json(const ExperimentConfig& c) {
  return {{"demo", to_string(c.demo)},
          {"family", c.family.spec()},
          {"family_description", c.family.description()},
          {"sample_sizes", c.sample_sizes},
          {"replications", c.replications},
          {"seed", c.seed},
          {"lambda", c.lambda},
          {"gate", c.gate ? json(*c.gate) : json(nullptr)},
          {"theta0", c.theta0},
          {"epsilon", c.epsilon},
          {"delta", c.delta},
          {"level", c.level},
          {"allow_lambda_mismatch", c.allow_lambda_mismatch}};
}

struct Metric {
  std::optional<double> value;
  std::optional<double> stderr_;
};

struct ReportCell {
  std::string model_id;
  std::size_t n = 0;
  std::map<std::string, Metric> metrics;
  double wall_seconds = 0.0;
};

struct Exclusion {
  std::string model_id;
  std::string reason;
};

struct ReportCheck {
  std::string name;
  std::string model_id;
  std::size_t n = 0;
  bool holds = false;
  std::string detail;
};

struct ExperimentReport {
  Demo demo = Demo::Pointwise;
  json config;
  std::uint64_t seed = 0;
  std::vector<ReportCell> cells;
  std::vector<ReportCell> aggregates;  // model_id "max_over_grid" / "mean_over_grid"
  std::vector<Exclusion> excluded;
  std::vector<ReportCheck> checks;

  bool all_checks_hold() const {
    return std::all_of(checks.begin(), checks.end(), [](const ReportCheck& c) { return c.holds; });
  }
  const ReportCell* find(const std::string& model_id, std::size_t n) const {
    for (const auto* list : {&cells, &aggregates})
      for (const auto& c : *list)
        if (c.model_id == model_id && c.n == n) return &c;
    return nullptr;
  }
};

namespace detail {

inline Metric rate(std::size_t hits, std::size_t reps) {
  const double r = static_cast<double>(hits) / static_cast<double>(reps);
  return {r, std::sqrt(r * (1.0 - r) / static_cast<double>(reps))};
}

/// Max and mean over model cells, per n and metric.
inline void add_aggregates(ExperimentReport& report, const std::vector<std::size_t>& sizes) {
  for (std::size_t n : sizes) {
    ReportCell worst{"max_over_grid", n, {}, 0.0};
    ReportCell mean{"mean_over_grid", n, {}, 0.0};
    std::map<std::string, std::pair<double, std::size_t>> sums;
    for (const auto& cell : report.cells) {
      if (cell.n != n) continue;
      for (const auto& [name, m] : cell.metrics) {
        if (!m.value) continue;
        auto& w = worst.metrics[name];
        if (!w.value || *m.value > *w.value) w = m;
        auto& s = sums[name];
        s.first += *m.value;
        ++s.second;
      }
    }
    for (const auto& [name, s] : sums) mean.metrics[name] = {s.first / static_cast<double>(s.second), std::nullopt};
    report.aggregates.push_back(std::move(worst));
    report.aggregates.push_back(std::move(mean));
  }
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::optional<std::string> unfaithful_reason(const Lsem& m) {
  auto r = is_faithful(m);
  if (r.holds) return std::nullopt;
  const auto& v = r.violations.front();
  std::string c;
  for (const auto& l : v.triple.c) c += (c.empty() ? "" : ",") + l;
  return "unfaithful: " + v.triple.a + " _||_ " + v.triple.b + " | {" + c + "} has partial correlation " +
         io::format_double(v.partial_correlation) + " but is d-connected";
}

/// A class differing from the truth: drop the first edge, or add X1 -> X2 to an edgeless graph.
inline Cpdag alternative_class(const Dag& g) {
  auto edges = g.edge_indices();
  if (edges.empty()) return cpdag_of(Dag::from_indices(g.vertices(), {{0, 1}}));
  std::sort(edges.begin(), edges.end());
  edges.erase(edges.begin());
  return cpdag_of(Dag::from_indices(g.vertices(), edges));
}

}  // namespace detail

/// Per-model error of the equivalence-class test against the model's own class.
inline ExperimentReport run_pointwise_demo(const ExperimentConfig& config, unsigned threads = worker_count()) {
  if (config.demo != Demo::Pointwise) throw ConfigError("demo: expected 'pointwise'");
  config.validate();
  ExperimentReport report;
  report.demo = config.demo;
  report.config = to_json(config);
  report.seed = config.seed;

  std::vector<std::size_t> included;
  const auto& members = config.family.members();
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (auto why = detail::unfaithful_reason(members[i].model))
      report.excluded.push_back({members[i].id, *why});
    else
      included.push_back(i);
  }

  const auto& sizes = config.sample_sizes;
  std::vector<ReportCell> cells(included.size() * sizes.size());
  parallel_for(cells.size(), threads, [&](std::size_t cell) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t mi = included[cell / sizes.size()];
    const std::size_t n = sizes[cell % sizes.size()];
    const Lsem& model = members[mi].model;
    const Cpdag truth = cpdag_of(model.graph());
    std::size_t rejects = 0, wrong_structure = 0;
    for (std::size_t rep = 0; rep < config.replications; ++rep) {
      auto s = summarize(sample(model, n, sub_seed(config.seed, mi, n, rep)));
      if (equivalence_class_test(s, truth, config.lambda).verdict != Verdict::Accept) ++rejects;
      if (!(pc_search(s, config.lambda).cpdag == truth)) ++wrong_structure;
    }
    ReportCell& out = cells[cell];
    out.model_id = members[mi].id;
    out.n = n;
    out.metrics["class_test_error"] = detail::rate(rejects, config.replications);
    out.metrics["structure_error"] = detail::rate(wrong_structure, config.replications);
    out.wall_seconds = detail::seconds_since(t0);
  });
  report.cells = std::move(cells);

  for (std::size_t k = 0; k < included.size(); ++k) {
    const auto& first = report.cells[k * sizes.size()].metrics.at("class_test_error");
    const auto& last = report.cells[k * sizes.size() + sizes.size() - 1].metrics.at("class_test_error");
    const double slack = 3.0 * std::hypot(*first.stderr_, *last.stderr_);
    report.checks.push_back({"error_decreasing", members[included[k]].id, sizes.back(),
                             *last.value <= *first.value + slack,
                             "last " + io::format_double(*last.value) + " vs first " + io::format_double(*first.value) +
                                 " + slack " + io::format_double(slack)});
  }
  detail::add_aggregates(report, sizes);
  return report;
}

/// Worst-case (max over the family) error of the equivalence-class test and of
/// PC structure recovery, per sample size.
inline ExperimentReport run_uniform_sweep(const ExperimentConfig& config, unsigned threads = worker_count()) {
  if (config.demo != Demo::Uniform) throw ConfigError("demo: expected 'uniform'");
  config.validate();
  ExperimentReport report;
  report.demo = config.demo;
  report.config = to_json(config);
  report.seed = config.seed;

  const auto& members = config.family.members();
  const auto& sizes = config.sample_sizes;
  std::vector<ReportCell> cells(members.size() * sizes.size());
  parallel_for(cells.size(), threads, [&](std::size_t cell) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t mi = cell / sizes.size();
    const std::size_t n = sizes[cell % sizes.size()];
    const Lsem& model = members[mi].model;
    const Cpdag truth = cpdag_of(model.graph());
    const Cpdag other = detail::alternative_class(model.graph());
    std::size_t type1 = 0, type2 = 0, wrong_structure = 0;
    for (std::size_t rep = 0; rep < config.replications; ++rep) {
      auto s = summarize(sample(model, n, sub_seed(config.seed, mi, n, rep)));
      if (equivalence_class_test(s, truth, config.lambda).verdict != Verdict::Accept) ++type1;
      if (equivalence_class_test(s, other, config.lambda).verdict == Verdict::Accept) ++type2;
      if (!(pc_search(s, config.lambda).cpdag == truth)) ++wrong_structure;
    }
    ReportCell& out = cells[cell];
    out.model_id = members[mi].id;
    out.n = n;
    Metric t1 = detail::rate(type1, config.replications), t2 = detail::rate(type2, config.replications);
    out.metrics["type1"] = t1;
    out.metrics["type2"] = t2;
    out.metrics["class_test_error"] = *t1.value >= *t2.value ? t1 : t2;
    out.metrics["structure_error"] = detail::rate(wrong_structure, config.replications);
    out.wall_seconds = detail::seconds_since(t0);
  });
  report.cells = std::move(cells);
  detail::add_aggregates(report, sizes);

  for (std::size_t i = 1; i < sizes.size(); ++i) {
    const auto& prev = report.find("max_over_grid", sizes[i - 1])->metrics.at("class_test_error");
    const auto& cur = report.find("max_over_grid", sizes[i])->metrics.at("class_test_error");
    const double slack = 3.0 * std::hypot(*prev.stderr_, *cur.stderr_);
    report.checks.push_back({"worst_case_non_increasing", "max_over_grid", sizes[i], *cur.value <= *prev.value + slack,
                             io::format_double(*cur.value) + " <= " + io::format_double(*prev.value) + " + " +
                                 io::format_double(slack)});
  }
  return report;
}

namespace detail {

/// Generalized test of H0: theta(X3 -> X4) = theta0 on one dataset.
struct AdversarialRule {
  std::string name;
  std::function<Verdict(const CorrelationSample&)> decide;
};

inline Verdict fisher_z_accepts(const CorrelationSample& s, double theta0, double level) {
  const double r = clamped(s.r(2, 3));
  const double z = std::abs(fisher_z(r) - fisher_z(theta0)) * std::sqrt(static_cast<double>(s.n) - 3.0);
  return z <= normal_quantile(0.5 + level / 2.0) ? Verdict::Accept : Verdict::Reject;
}

inline std::vector<AdversarialRule> adversarial_rules(const ExperimentConfig& c) {
  const Cpdag g1_class = cpdag_of(canonical_g1());
  std::vector<AdversarialRule> rules;
  rules.push_back({"class_test", [=](const CorrelationSample& s) {
                     if (equivalence_class_test(s, g1_class, c.lambda).verdict != Verdict::Accept) return Verdict::Reject;
                     return fisher_z_accepts(s, c.theta0, c.level);
                   }});
  auto region_rule = [=](DiscoveryMode mode) {
    return [=](const CorrelationSample& s) {
      auto region = region_from(s, discover(s, c.lambda, mode), 2, 3, c.level, 1e-3);
      switch (region.classify(c.theta0)) {
        case ConfidenceRegion::kAccepted: return Verdict::Accept;
        case ConfidenceRegion::kRejected: return Verdict::Reject;
        default: return Verdict::NoConclusion;
      }
    };
  };
  rules.push_back({"estimate_plain", region_rule(DiscoveryMode::plain())});
  if (c.gate) rules.push_back({"estimate_gated", region_rule(DiscoveryMode::gated(*c.gate))});
  rules.push_back({"known_graph_regression", [=](const CorrelationSample& s) { return fisher_z_accepts(s, c.theta0, c.level); }});
  return rules;
}

}  // namespace detail

/// err1 = P1(not accept), err2 = P2(accept) for every built-in rule; checks
/// err1 + err2 >= 1 - pinsker_bound(kl, n) - 3 sigma.
inline ExperimentReport run_adversarial_demo(const ExperimentConfig& config, unsigned threads = worker_count()) {
  if (config.demo != Demo::Adversarial) throw ConfigError("demo: expected 'adversarial'");
  config.validate();
  const auto& pair = config.family.pair();
  if (!pair) throw ConfigError("family: adversarial family has no pair");
  if (std::abs(pair->gamma - pair->theta0) > 0.0 || pair->theta0 != config.theta0)
    throw ConfigError("theta0: does not match the pair's effect");
  ExperimentReport report;
  report.demo = config.demo;
  report.config = to_json(config);
  report.config["kl"] = pair->kl;
  report.seed = config.seed;

  const Lsem p1 = pair->m1(), p2 = pair->m2();
  if (std::abs(true_direct_effect(p1, "X3", "X4") - config.theta0) > 0.0 || true_direct_effect(p2, "X3", "X4") != 0.0)
    throw ConfigError("family: pair does not realize effects theta0 and 0");
  const auto rules = detail::adversarial_rules(config);
  const auto& sizes = config.sample_sizes;

  // Every rule sees the same replicated datasets.
  std::vector<std::vector<std::size_t>> miss1(sizes.size(), std::vector<std::size_t>(rules.size(), 0));
  std::vector<std::vector<std::size_t>> hit2 = miss1;
  std::vector<double> wall(sizes.size(), 0.0);
  parallel_for(sizes.size(), threads, [&](std::size_t si) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = sizes[si];
    for (std::size_t rep = 0; rep < config.replications; ++rep) {
      auto s1 = summarize(sample(p1, n, sub_seed(config.seed, 0, n, rep, 1)));
      auto s2 = summarize(sample(p2, n, sub_seed(config.seed, 1, n, rep, 2)));
      for (std::size_t r = 0; r < rules.size(); ++r) {
        if (rules[r].decide(s1) != Verdict::Accept) ++miss1[si][r];
        if (rules[r].decide(s2) == Verdict::Accept) ++hit2[si][r];
      }
    }
    wall[si] = detail::seconds_since(t0);
  });

  for (std::size_t r = 0; r < rules.size(); ++r)
    for (std::size_t si = 0; si < sizes.size(); ++si) {
      const std::size_t n = sizes[si];
      Metric e1 = detail::rate(miss1[si][r], config.replications);
      Metric e2 = detail::rate(hit2[si][r], config.replications);
      const double sigma = std::hypot(*e1.stderr_, *e2.stderr_);
      const double bound = pinsker_bound(pair->kl, n);
      const double sum = *e1.value + *e2.value;
      const double floor = 1.0 - bound - 3.0 * sigma;
      ReportCell cell{rules[r].name, n, {}, wall[si]};
      cell.metrics["err1"] = e1;
      cell.metrics["err2"] = e2;
      cell.metrics["err_sum"] = {sum, sigma};
      cell.metrics["n_kl"] = {static_cast<double>(n) * pair->kl, std::nullopt};
      cell.metrics["pinsker_bound"] = {bound, std::nullopt};
      cell.metrics["lower_bound"] = {floor, std::nullopt};
      cell.metrics["holds"] = {sum >= floor ? 1.0 : 0.0, std::nullopt};
      report.cells.push_back(std::move(cell));
      report.checks.push_back({"pinsker_inequality", rules[r].name, n, sum >= floor,
                               "err1 + err2 = " + io::format_double(sum) + " >= " + io::format_double(floor)});
    }
  return report;
}

inline ExperimentReport run_experiment(const ExperimentConfig& config, unsigned threads = worker_count()) {
  switch (config.demo) {
    case Demo::Pointwise: return run_pointwise_demo(config, threads);
    case Demo::Uniform: return run_uniform_sweep(config, threads);
    case Demo::Adversarial: return run_adversarial_demo(config, threads);
  }
  throw ConfigError("demo: unknown");
}

/// Sample size at which n * kl reaches `target`.
inline std::size_t indistinguishable_n(double kl, double target) {
  if (!(kl > 0.0) || !(target > 0.0)) throw DomainError("kl and target must be positive");
  return static_cast<std::size_t>(std::max(8.0, std::round(target / kl)));
}

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

class ConfigReader {
 public:
  ConfigReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  std::string where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError(where(key) + ": missing");
    return j_.at(key);
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    used_.insert(key);
    if (!has(key)) {
      if (fallback) return *fallback;
      throw ConfigError(where(key) + ": missing");
    }
    if (!j_.at(key).is_number()) throw ConfigError(where(key) + ": expected a number");
    return j_.at(key).get<double>();
  }

  std::uint64_t unsigned_int(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt) {
    used_.insert(key);
    if (!has(key)) {
      if (fallback) return *fallback;
      throw ConfigError(where(key) + ": missing");
    }
    const json& v = j_.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      throw ConfigError(where(key) + ": expected a non-negative integer");
    return j_.at(key).get<std::uint64_t>();
  }

  std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    used_.insert(key);
    if (!has(key)) {
      if (fallback) return *fallback;
      throw ConfigError(where(key) + ": missing");
    }
    if (!j_.at(key).is_string()) throw ConfigError(where(key) + ": expected a string");
    return j_.at(key).get<std::string>();
  }

  bool boolean(const std::string& key, bool fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    if (!j_.at(key).is_boolean()) throw ConfigError(where(key) + ": expected true or false");
    return j_.at(key).get<bool>();
  }

  std::vector<double> numbers(const std::string& key) {
    const json& a = raw(key);
    if (!a.is_array()) throw ConfigError(where(key) + ": expected an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_number()) throw ConfigError(where(key) + "[" + std::to_string(i) + "]: expected a number");
      out.push_back(a[i].get<double>());
    }
    return out;
  }

  void reject_unknown() const {
    for (const auto& [key, value] : j_.items())
      if (!used_.count(key)) throw ConfigError(where(key) + ": unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace detail

/// Parses the JSON mirror of ExperimentConfig. Errors name the field path.
inline ExperimentConfig config_from_json(const json& j) {
  detail::ConfigReader top(j, "");
  ExperimentConfig c;
  const std::string demo = top.string("demo");
  if (demo == "pointwise") c.demo = Demo::Pointwise;
  else if (demo == "uniform") c.demo = Demo::Uniform;
  else if (demo == "adversarial") c.demo = Demo::Adversarial;
  else throw ConfigError("demo: expected 'pointwise', 'uniform' or 'adversarial'");

  c.replications = top.unsigned_int("replications", 500);
  c.seed = top.unsigned_int("seed", 20021);
  c.lambda = top.number("lambda", 0.2);
  if (top.has("gate")) c.gate = top.number("gate");
  else top.boolean("gate", false);
  c.theta0 = top.number("theta0", 0.5);
  c.epsilon = top.number("epsilon", 1e-4);
  c.delta = top.number("delta", 0.25);
  c.level = top.number("level", 0.95);
  c.allow_lambda_mismatch = top.boolean("allow_lambda_mismatch", false);

  detail::ConfigReader fam(top.raw("family"), "family");
  const std::string kind = fam.string("kind");
  try {
    if (kind == "grid") {
      const json& models = fam.raw("models");
      if (!models.is_array() || models.empty()) throw ConfigError("family.models: expected a non-empty array");
      std::vector<NamedModel> ms;
      for (std::size_t i = 0; i < models.size(); ++i) {
        const std::string at = "family.models[" + std::to_string(i) + "]";
        detail::ConfigReader mr(models[i], at);
        std::string id = mr.string("id", "m" + std::to_string(i));
        mr.raw("vertices");
        mr.raw("edges");
        mr.raw("coefficients");
        mr.reject_unknown();
        try {
          ms.push_back({id, io::lsem_from_json(models[i], at)});
        } catch (const NotStandardizable& e) {
          throw ConfigError(at + ": " + e.what());
        } catch (const ParseError& e) {
          throw ConfigError(e.what());
        }
      }
      c.family = ModelFamily::grid(std::move(ms), fam.string("description", ""));
    } else if (kind == "lambda_sf") {
      LambdaSfSpec spec;
      spec.vertices = fam.unsigned_int("vertices", 4);
      if (fam.has("lattice")) spec.lattice = fam.numbers("lattice");
      spec.lambda = fam.number("lambda", c.lambda);
      spec.models = fam.unsigned_int("models", 100);
      spec.seed = fam.unsigned_int("seed", c.seed);
      for (double v : spec.lattice)
        if (!(v > 0.0 && v < 1.0)) throw ConfigError("family.lattice: values must lie in (0,1)");
      if (!(spec.lambda > 0.0 && spec.lambda < 1.0)) throw ConfigError("family.lambda: must lie in (0,1)");
      c.family = ModelFamily::lambda_sf(spec);
    } else if (kind == "adversarial") {
      const double k = fam.number("k", 0.1);
      c.delta = fam.number("delta", c.delta);
      if (!(k > 0.0 && k < 0.5)) throw ConfigError("family.k: must lie in (0, 1/2)");
      if (!(c.theta0 != 0.0 && std::abs(c.theta0) < 1.0)) throw ConfigError("theta0: must be non-zero with |theta0| < 1");
      if (!(c.epsilon > 0.0)) throw ConfigError("epsilon: must be positive");
      if (!(c.delta > 0.0 && c.delta < std::abs(c.theta0))) throw ConfigError("family.delta: must lie in (0, |theta0|)");
      c.family = ModelFamily::adversarial(construct_pair(c.theta0, k, c.epsilon), c.delta);
    } else {
      throw ConfigError("family.kind: expected 'grid', 'lambda_sf' or 'adversarial'");
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("family: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("family: ") + e.what());
  }
  fam.reject_unknown();

  if (top.has("sample_sizes")) {
    for (double v : top.numbers("sample_sizes")) {
      if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("sample_sizes: expected positive integers");
      c.sample_sizes.push_back(static_cast<std::size_t>(v));
    }
  }
  if (top.has("nkl_targets")) {
    if (c.demo != Demo::Adversarial) throw ConfigError("nkl_targets: only valid for the adversarial demo");
    if (!c.sample_sizes.empty()) throw ConfigError("nkl_targets: give either sample_sizes or nkl_targets");
    for (double t : top.numbers("nkl_targets")) {
      if (!(t > 0.0)) throw ConfigError("nkl_targets: values must be positive");
      c.sample_sizes.push_back(indistinguishable_n(c.family.pair()->kl, t));
    }
  }
  top.reject_unknown();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Report output

enum class ReportFormat { Csv, Json };

namespace detail {

inline json metric_json(const Metric& m) {
  return {{"value", m.value ? json(*m.value) : json(nullptr)}, {"stderr", m.stderr_ ? json(*m.stderr_) : json(nullptr)}};
}

inline json cells_json(const std::vector<ReportCell>& cells, bool timing) {
  json out = json::array();
  for (const auto& c : cells) {
    json metrics = json::object();
    for (const auto& [name, m] : c.metrics) metrics[name] = metric_json(m);
    json cell = {{"model_id", c.model_id}, {"n", c.n}, {"metrics", metrics}};
    if (timing) cell["wall_seconds"] = c.wall_seconds;
    out.push_back(cell);
  }
  return out;
}

}  // namespace detail

/// Wall-clock times are left out unless `include_timing`, so that reports from
/// the same (config, seed) are byte-identical.
inline json report_to_json(const ExperimentReport& r, bool include_timing = false) {
  json excluded = json::array(), checks = json::array();
  for (const auto& e : r.excluded) excluded.push_back({{"model_id", e.model_id}, {"reason", e.reason}});
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name}, {"model_id", c.model_id}, {"n", c.n}, {"holds", c.holds}, {"detail", c.detail}});
  return {{"schema_version", kReportSchemaVersion},
          {"demo", to_string(r.demo)},
          {"seed", r.seed},
          {"config", r.config},
          {"cells", detail::cells_json(r.cells, include_timing)},
          {"aggregates", detail::cells_json(r.aggregates, include_timing)},
          {"worst_case_label", "max over grid"},
          {"excluded", excluded},
          {"checks", checks},
          {"all_checks_hold", r.all_checks_hold()}};
}

/// model_id,n,metric,value,stderr; missing values are written as `null`.
inline std::string report_to_csv(const ExperimentReport& r) {
  std::string out = "model_id,n,metric,value,stderr\n";
  auto field = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string("null"); };
  for (const auto* list : {&r.cells, &r.aggregates})
    for (const auto& c : *list)
      for (const auto& [name, m] : c.metrics)
        out += c.model_id + "," + std::to_string(c.n) + "," + name + "," + field(m.value) + "," + field(m.stderr_) + "\n";
  return out;
}

inline void emit_report(const ExperimentReport& r, const std::string& path, ReportFormat format,
                        bool include_timing = false) {
  const std::string body = format == ReportFormat::Csv ? report_to_csv(r) : report_to_json(r, include_timing).dump(2) + "\n";
  try {
    io::write_text_file(path, body);
  } catch (const IoError& e) {
    throw IoError(std::string("report: ") + e.what());
  }
}

}  // namespace faithful
