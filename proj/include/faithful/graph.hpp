#pragma once

// Directed acyclic graphs, d-separation, and Markov equivalence classes.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "faithful/error.hpp"

namespace faithful {

struct Edge {
  std::string parent;
  std::string child;

  auto operator<=>(const Edge&) const = default;
};

/// Unordered pair of labels, stored with `first < second` lexicographically.
struct UndirectedEdge {
  std::string first;
  std::string second;

  UndirectedEdge() = default;
  UndirectedEdge(std::string a, std::string b) : first(std::move(a)), second(std::move(b)) {
    if (second < first) std::swap(first, second);
  }
  auto operator<=>(const UndirectedEdge&) const = default;
};

/// (a, b, C) with a < b and C sorted, all lexicographically.
struct SeparationTriple {
  std::string a;
  std::string b;
  std::vector<std::string> c;

  auto operator<=>(const SeparationTriple&) const = default;
};

/// Caps for the exhaustive (pair x conditioning-subset) enumerations.
struct EnumerationLimits {
  std::size_t max_vertices = 8;
};

namespace detail {

inline std::size_t find_label(const std::vector<std::string>& labels, std::string_view label) {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw InvalidArgument("unknown vertex label '" + std::string(label) + "'");
  return static_cast<std::size_t>(it - labels.begin());
}

inline void check_unique_labels(const std::vector<std::string>& labels) {
  std::vector<std::string> sorted = labels;
  std::sort(sorted.begin(), sorted.end());
  auto dup = std::adjacent_find(sorted.begin(), sorted.end());
  if (dup != sorted.end()) throw InvalidArgument("duplicate vertex label '" + *dup + "'");
  for (const auto& l : labels)
    if (l.empty()) throw InvalidArgument("empty vertex label");
}

/// Indices of `labels` ordered lexicographically by label.
inline std::vector<std::size_t> lexicographic_order(const std::vector<std::string>& labels) {
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return labels[x] < labels[y]; });
  return order;
}

/// Calls `visit(subset)` for every size-`k` subset of `pool`, preserving pool order.
template <class Visit>
bool for_each_subset_of_size(const std::vector<std::size_t>& pool, std::size_t k, Visit&& visit) {
  if (k > pool.size()) return false;
  std::vector<std::size_t> pick(k);
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  std::vector<std::size_t> subset(k);
  while (true) {
    for (std::size_t i = 0; i < k; ++i) subset[i] = pool[pick[i]];
    if (visit(std::span<const std::size_t>(subset))) return true;
    std::size_t i = k;
    while (i > 0 && pick[i - 1] == pool.size() - k + (i - 1)) --i;
    if (i == 0) return false;
    ++pick[i - 1];
    for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
}

/// Every subset of `pool`, in increasing size and lexicographic (pool) order within a size.
template <class Visit>
void for_each_subset(const std::vector<std::size_t>& pool, Visit&& visit) {
  for (std::size_t k = 0; k <= pool.size(); ++k)
    for_each_subset_of_size(pool, k, [&](std::span<const std::size_t> s) {
      visit(s);
      return false;
    });
}

}  // namespace detail

class Dag {
 public:
  Dag() = default;

  Dag(std::vector<std::string> vertices, const std::vector<Edge>& edges)
      : vertices_(std::move(vertices)) {
    detail::check_unique_labels(vertices_);
    init_storage();
    for (const auto& e : edges)
      add_edge(detail::find_label(vertices_, e.parent), detail::find_label(vertices_, e.child));
    finish();
  }

  static Dag from_indices(std::vector<std::string> vertices,
                          const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    Dag g;
    g.vertices_ = std::move(vertices);
    detail::check_unique_labels(g.vertices_);
    g.init_storage();
    for (auto [from, to] : edges) {
      if (from >= g.size() || to >= g.size()) throw InvalidArgument("edge index out of range");
      g.add_edge(from, to);
    }
    g.finish();
    return g;
  }

  std::size_t size() const noexcept { return vertices_.size(); }
  const std::vector<std::string>& vertices() const noexcept { return vertices_; }
  const std::string& label(std::size_t i) const { return vertices_.at(i); }
  std::size_t index_of(std::string_view label) const { return detail::find_label(vertices_, label); }

  bool has_edge(std::size_t from, std::size_t to) const { return adj_[from * size() + to] != 0; }
  bool adjacent(std::size_t a, std::size_t b) const { return has_edge(a, b) || has_edge(b, a); }
  const std::vector<std::size_t>& parents(std::size_t v) const { return parents_[v]; }
  const std::vector<std::size_t>& children(std::size_t v) const { return children_[v]; }
  std::size_t edge_count() const noexcept { return edge_count_; }
  const std::vector<std::size_t>& topological_order() const noexcept { return topo_; }

  /// Edges as labels, sorted.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j : children_[i]) out.push_back({vertices_[i], vertices_[j]});
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<std::pair<std::size_t, std::size_t>> edge_indices() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j : children_[i]) out.emplace_back(i, j);
    return out;
  }

  friend bool operator==(const Dag& x, const Dag& y) {
    return x.vertices_ == y.vertices_ && x.adj_ == y.adj_;
  }

 private:
  void init_storage() {
    adj_.assign(size() * size(), 0);
    parents_.assign(size(), {});
    children_.assign(size(), {});
  }

  void add_edge(std::size_t from, std::size_t to) {
    if (from == to) throw InvalidArgument("self-loop on '" + vertices_[from] + "'");
    if (has_edge(from, to))
      throw InvalidArgument("duplicate edge " + vertices_[from] + " -> " + vertices_[to]);
    adj_[from * size() + to] = 1;
    parents_[to].push_back(from);
    children_[from].push_back(to);
    ++edge_count_;
  }

  void finish() {
    for (auto& p : parents_) std::sort(p.begin(), p.end());
    for (auto& c : children_) std::sort(c.begin(), c.end());
    // Kahn's algorithm; ties broken by index so the order is deterministic.
    std::vector<std::size_t> indegree(size());
    for (std::size_t v = 0; v < size(); ++v) indegree[v] = parents_[v].size();
    std::vector<std::size_t> ready;
    for (std::size_t v = 0; v < size(); ++v)
      if (indegree[v] == 0) ready.push_back(v);
    topo_.clear();
    while (!ready.empty()) {
      auto it = std::min_element(ready.begin(), ready.end());
      std::size_t v = *it;
      ready.erase(it);
      topo_.push_back(v);
      for (std::size_t c : children_[v])
        if (--indegree[c] == 0) ready.push_back(c);
    }
    if (topo_.size() != size()) throw InvalidArgument("graph contains a directed cycle");
  }

  std::vector<std::string> vertices_;
  std::vector<std::uint8_t> adj_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> topo_;
  std::size_t edge_count_ = 0;
};

/// Partially directed graph in adjacency-mark form: i -> j iff link(i,j) && !link(j,i);
/// i -- j iff both are set. Working representation for orientation and PC.
class PartialGraph {
 public:
  explicit PartialGraph(std::size_t p) : p_(p), link_(p * p, 0), locked_(p * p, 0) {}

  std::size_t size() const noexcept { return p_; }
  bool link(std::size_t i, std::size_t j) const { return link_[i * p_ + j] != 0; }
  bool adjacent(std::size_t i, std::size_t j) const { return link(i, j) || link(j, i); }
  bool directed(std::size_t i, std::size_t j) const { return link(i, j) && !link(j, i); }
  bool undirected(std::size_t i, std::size_t j) const { return link(i, j) && link(j, i); }
  bool locked(std::size_t i, std::size_t j) const { return locked_[i * p_ + j] != 0; }

  void set_undirected(std::size_t i, std::size_t j) {
    link_[i * p_ + j] = 1;
    link_[j * p_ + i] = 1;
  }
  void remove(std::size_t i, std::size_t j) {
    link_[i * p_ + j] = 0;
    link_[j * p_ + i] = 0;
  }
  /// Turns i -- j into i -> j. No-op on locked or non-undirected edges.
  bool orient(std::size_t i, std::size_t j) {
    if (!undirected(i, j) || locked(i, j)) return false;
    link_[j * p_ + i] = 0;
    return true;
  }
  void lock_undirected(std::size_t i, std::size_t j) {
    set_undirected(i, j);
    locked_[i * p_ + j] = 1;
    locked_[j * p_ + i] = 1;
  }

  std::vector<std::size_t> neighbors(std::size_t i) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < p_; ++j)
      if (j != i && adjacent(i, j)) out.push_back(j);
    return out;
  }

  const std::vector<std::uint8_t>& links() const noexcept { return link_; }

 private:
  std::size_t p_;
  std::vector<std::uint8_t> link_;
  std::vector<std::uint8_t> locked_;
};

/// Applies Meek's rules R1-R4 until no undirected edge can be oriented.
inline void apply_meek_rules(PartialGraph& g) {
  const std::size_t p = g.size();
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t a = 0; a < p; ++a) {
      for (std::size_t b = 0; b < p; ++b) {
        if (a == b || !g.undirected(a, b) || g.locked(a, b)) continue;
        bool orient = false;
        // R1: c -> a -- b, c and b non-adjacent.
        for (std::size_t c = 0; c < p && !orient; ++c)
          if (c != b && g.directed(c, a) && !g.adjacent(c, b)) orient = true;
        // R2: a -> c -> b.
        for (std::size_t c = 0; c < p && !orient; ++c)
          if (g.directed(a, c) && g.directed(c, b)) orient = true;
        // R3: a -- c -> b, a -- d -> b, c and d non-adjacent.
        for (std::size_t c = 0; c < p && !orient; ++c) {
          if (!g.undirected(a, c) || !g.directed(c, b)) continue;
          for (std::size_t d = c + 1; d < p && !orient; ++d)
            if (g.undirected(a, d) && g.directed(d, b) && !g.adjacent(c, d)) orient = true;
        }
        // R4: a -- c -> d -> b, a adjacent to d, c and b non-adjacent.
        for (std::size_t c = 0; c < p && !orient; ++c) {
          if (c == b || !g.undirected(a, c) || g.adjacent(c, b)) continue;
          for (std::size_t d = 0; d < p && !orient; ++d)
            if (g.directed(c, d) && g.directed(d, b) && g.adjacent(a, d)) orient = true;
        }
        if (orient && g.orient(a, b)) changed = true;
      }
    }
  }
}

/// Completed partially directed acyclic graph: the canonical representative of a
/// Markov equivalence class.
class Cpdag {
 public:
  Cpdag() = default;

  Cpdag(std::vector<std::string> vertices, const std::vector<Edge>& directed,
        const std::vector<UndirectedEdge>& undirected)
      : vertices_(std::move(vertices)) {
    detail::check_unique_labels(vertices_);
    link_.assign(size() * size(), 0);
    for (const auto& e : directed) {
      std::size_t i = index_of(e.parent), j = index_of(e.child);
      if (i == j) throw InvalidArgument("self-loop on '" + e.parent + "'");
      if (link(i, j) || link(j, i)) throw InvalidArgument("edge listed twice: " + e.parent + " -> " + e.child);
      link_[i * size() + j] = 1;
    }
    for (const auto& e : undirected) {
      std::size_t i = index_of(e.first), j = index_of(e.second);
      if (i == j) throw InvalidArgument("self-loop on '" + e.first + "'");
      if (link(i, j) || link(j, i))
        throw InvalidArgument("edge listed twice: " + e.first + " -- " + e.second);
      link_[i * size() + j] = 1;
      link_[j * size() + i] = 1;
    }
  }

  static Cpdag from_partial(std::vector<std::string> vertices, const PartialGraph& g) {
    Cpdag c;
    c.vertices_ = std::move(vertices);
    c.link_ = g.links();
    return c;
  }

  std::size_t size() const noexcept { return vertices_.size(); }
  const std::vector<std::string>& vertices() const noexcept { return vertices_; }
  std::size_t index_of(std::string_view label) const { return detail::find_label(vertices_, label); }

  bool link(std::size_t i, std::size_t j) const { return link_[i * size() + j] != 0; }
  bool adjacent(std::size_t i, std::size_t j) const { return link(i, j) || link(j, i); }
  bool directed(std::size_t i, std::size_t j) const { return link(i, j) && !link(j, i); }
  bool undirected(std::size_t i, std::size_t j) const { return link(i, j) && link(j, i); }

  std::vector<Edge> directed_edges() const {
    std::vector<Edge> out;
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j = 0; j < size(); ++j)
        if (directed(i, j)) out.push_back({vertices_[i], vertices_[j]});
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<UndirectedEdge> undirected_edges() const {
    std::vector<UndirectedEdge> out;
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j = i + 1; j < size(); ++j)
        if (undirected(i, j)) out.emplace_back(vertices_[i], vertices_[j]);
    std::sort(out.begin(), out.end());
    return out;
  }

  bool fully_directed() const {
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j = i + 1; j < size(); ++j)
        if (undirected(i, j)) return false;
    return true;
  }

  /// A member DAG of the class (Dor-Tarsi consistent extension).
  /// Throws InvalidArgument when the graph admits no extension.
  Dag to_dag() const {
    const std::size_t p = size();
    std::vector<std::uint8_t> alive(p, 1);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j)
        if (directed(i, j)) edges.emplace_back(i, j);
    for (std::size_t removed = 0; removed < p; ++removed) {
      bool found = false;
      for (std::size_t x = 0; x < p && !found; ++x) {
        if (!alive[x]) continue;
        bool sink = true;
        std::vector<std::size_t> nbrs;
        std::vector<std::size_t> undirected_nbrs;
        for (std::size_t y = 0; y < p; ++y) {
          if (!alive[y] || y == x || !adjacent(x, y)) continue;
          nbrs.push_back(y);
          if (directed(x, y)) sink = false;
          if (undirected(x, y)) undirected_nbrs.push_back(y);
        }
        if (!sink) continue;
        bool clique = true;
        for (std::size_t y : undirected_nbrs)
          for (std::size_t z : nbrs)
            if (z != y && !adjacent(y, z)) clique = false;
        if (!clique) continue;
        for (std::size_t y : undirected_nbrs) edges.emplace_back(y, x);
        alive[x] = 0;
        found = true;
      }
      if (!found) throw InvalidArgument("partially directed graph has no consistent DAG extension");
    }
    return Dag::from_indices(vertices_, edges);
  }

  friend bool operator==(const Cpdag& x, const Cpdag& y) {
    return x.vertices_ == y.vertices_ && x.link_ == y.link_;
  }

 private:
  std::vector<std::string> vertices_;
  std::vector<std::uint8_t> link_;
};

// ---------------------------------------------------------------------------
// d-separation

/// Reachability ("Bayes ball") test. Indices must be valid and distinct from `c`.
inline bool d_separated(const Dag& g, std::size_t a, std::size_t b, std::span<const std::size_t> c) {
  const std::size_t p = g.size();
  std::vector<std::uint8_t> in_c(p, 0);
  for (std::size_t v : c) in_c[v] = 1;

  // Ancestors of C, including C itself.
  std::vector<std::uint8_t> anc(p, 0);
  std::vector<std::size_t> stack(c.begin(), c.end());
  while (!stack.empty()) {
    std::size_t v = stack.back();
    stack.pop_back();
    if (anc[v]) continue;
    anc[v] = 1;
    for (std::size_t u : g.parents(v)) stack.push_back(u);
  }

  // State (v, up): reached v from a child; (v, down): reached v from a parent.
  enum : std::uint8_t { kUp = 1, kDown = 2 };
  std::vector<std::uint8_t> seen(p, 0);
  std::deque<std::pair<std::size_t, std::uint8_t>> queue{{a, kUp}};
  while (!queue.empty()) {
    auto [v, dir] = queue.front();
    queue.pop_front();
    if (seen[v] & dir) continue;
    seen[v] |= dir;
    if (v == b && !in_c[v]) return false;
    if (dir == kUp) {
      if (in_c[v]) continue;
      for (std::size_t u : g.parents(v)) queue.emplace_back(u, kUp);
      for (std::size_t u : g.children(v)) queue.emplace_back(u, kDown);
    } else {
      if (!in_c[v])
        for (std::size_t u : g.children(v)) queue.emplace_back(u, kDown);
      if (anc[v])
        for (std::size_t u : g.parents(v)) queue.emplace_back(u, kUp);
    }
  }
  return true;
}

inline bool is_d_separated(const Dag& g, std::string_view a, std::string_view b,
                           const std::vector<std::string>& c) {
  std::size_t ia = g.index_of(a), ib = g.index_of(b);
  if (ia == ib) throw InvalidArgument("d-separation query needs two distinct vertices");
  std::vector<std::size_t> ic;
  for (const auto& l : c) {
    std::size_t v = g.index_of(l);
    if (v == ia || v == ib) throw InvalidArgument("conditioning set contains a query vertex");
    ic.push_back(v);
  }
  std::sort(ic.begin(), ic.end());
  ic.erase(std::unique(ic.begin(), ic.end()), ic.end());
  return d_separated(g, ia, ib, ic);
}

namespace detail {

inline SeparationTriple make_triple(const std::vector<std::string>& labels, std::size_t a,
                                    std::size_t b, std::span<const std::size_t> c) {
  SeparationTriple t{labels[a], labels[b], {}};
  if (t.b < t.a) std::swap(t.a, t.b);
  for (std::size_t v : c) t.c.push_back(labels[v]);
  std::sort(t.c.begin(), t.c.end());
  return t;
}

inline void check_cap(std::size_t p, const EnumerationLimits& limits) {
  if (p > limits.max_vertices)
    throw SizeLimit("exhaustive enumeration over " + std::to_string(p) +
                    " vertices exceeds the cap of " + std::to_string(limits.max_vertices));
}

/// Calls `visit(a, b, c)` for every unordered pair a < b (index order) and
/// every conditioning subset of the remaining vertices.
template <class Visit>
void for_each_pair_and_subset(std::size_t p, Visit&& visit) {
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = a + 1; b < p; ++b) {
      std::vector<std::size_t> rest;
      for (std::size_t v = 0; v < p; ++v)
        if (v != a && v != b) rest.push_back(v);
      for_each_subset(rest, [&](std::span<const std::size_t> c) { visit(a, b, c); });
    }
}

}  // namespace detail

/// Every (a, b, C) with a d-separated from b given C, in canonical order.
inline std::vector<SeparationTriple> entailed_zero_set(const Dag& g, const EnumerationLimits& limits = {}) {
  detail::check_cap(g.size(), limits);
  std::vector<SeparationTriple> out;
  detail::for_each_pair_and_subset(g.size(), [&](std::size_t a, std::size_t b, std::span<const std::size_t> c) {
    if (d_separated(g, a, b, c)) out.push_back(detail::make_triple(g.vertices(), a, b, c));
  });
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Markov equivalence

inline Cpdag cpdag_of(const Dag& g) {
  const std::size_t p = g.size();
  PartialGraph pg(p);
  for (auto [i, j] : g.edge_indices()) pg.set_undirected(i, j);
  // v-structures a -> c <- b with a, b non-adjacent
  for (std::size_t c = 0; c < p; ++c) {
    const auto& pa = g.parents(c);
    for (std::size_t x = 0; x < pa.size(); ++x)
      for (std::size_t y = x + 1; y < pa.size(); ++y)
        if (!g.adjacent(pa[x], pa[y])) {
          pg.orient(pa[x], c);
          pg.orient(pa[y], c);
        }
  }
  apply_meek_rules(pg);
  return Cpdag::from_partial(g.vertices(), pg);
}

namespace detail {

/// Index map from g2's vertices to g1's; throws when the vertex sets differ.
inline std::vector<std::size_t> align_vertices(const std::vector<std::string>& v1,
                                               const std::vector<std::string>& v2) {
  auto s1 = v1, s2 = v2;
  std::sort(s1.begin(), s1.end());
  std::sort(s2.begin(), s2.end());
  if (s1 != s2) throw InvalidArgument("graphs are over different vertex sets");
  std::vector<std::size_t> map(v2.size());
  for (std::size_t i = 0; i < v2.size(); ++i) map[i] = find_label(v1, v2[i]);
  return map;
}

}  // namespace detail

/// Same skeleton and same v-structures.
inline bool markov_equivalent(const Dag& g1, const Dag& g2) {
  auto map = detail::align_vertices(g1.vertices(), g2.vertices());
  const std::size_t p = g1.size();
  std::vector<std::size_t> inv(p);
  for (std::size_t i = 0; i < p; ++i) inv[map[i]] = i;
  auto edge2 = [&](std::size_t i, std::size_t j) { return g2.has_edge(inv[i], inv[j]); };
  auto adj2 = [&](std::size_t i, std::size_t j) { return edge2(i, j) || edge2(j, i); };
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j)
      if (g1.adjacent(i, j) != adj2(i, j)) return false;
  for (std::size_t c = 0; c < p; ++c)
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = a + 1; b < p; ++b) {
        if (a == c || b == c || g1.adjacent(a, b)) continue;
        bool v1 = g1.has_edge(a, c) && g1.has_edge(b, c);
        bool v2 = edge2(a, c) && edge2(b, c);
        if (v1 != v2) return false;
      }
  return true;
}

/// Labels "X1", ..., "Xn".
inline std::vector<std::string> default_labels(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back("X" + std::to_string(i));
  return out;
}

/// All labeled DAGs on n vertices (labels X1..Xn), each exactly once.
inline std::vector<Dag> enumerate_dags(std::size_t n) {
  if (n > 5) throw SizeLimit("enumerate_dags supports at most 5 vertices");
  auto labels = default_labels(n);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  std::size_t total = 1;
  for (std::size_t k = 0; k < pairs.size(); ++k) total *= 3;

  std::vector<Dag> out;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t code = 0; code < total; ++code) {
    edges.clear();
    std::size_t rest = code;
    for (auto [i, j] : pairs) {
      std::size_t state = rest % 3;
      rest /= 3;
      if (state == 1) edges.emplace_back(i, j);
      if (state == 2) edges.emplace_back(j, i);
    }
    try {
      out.push_back(Dag::from_indices(labels, edges));
    } catch (const InvalidArgument&) {
      // cyclic orientation
    }
  }
  return out;
}

}  // namespace faithful
