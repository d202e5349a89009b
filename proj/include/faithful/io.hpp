#pragma once

// File formats: graph / model JSON, dataset CSV, discovery results, and the
// adversarial certificate.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "faithful/adversary.hpp"
#include "faithful/discovery.hpp"
#include "faithful/error.hpp"
#include "faithful/graph.hpp"
#include "faithful/lsem.hpp"
#include "faithful/types.hpp"

namespace faithful::io {

using json = nlohmann::json;

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw IoError("cannot format number");
  return std::string(buf, end);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // byte offset -> line number
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i)
      if (text[i] == '\n') ++line;
    throw ParseError(source + ": malformed JSON at line " + std::to_string(line) + " (byte " +
                         std::to_string(e.byte) + "): " + e.what(),
                     line);
  }
}

inline json read_json_file(const std::string& path) { return parse_json(read_text_file(path), path); }

// ---------------------------------------------------------------------------
// Graphs and models

inline json to_json(const Dag& g) {
  json edges = json::array();
  for (const auto& e : g.edges()) edges.push_back({e.parent, e.child});
  return {{"vertices", g.vertices()}, {"edges", edges}};
}

inline json to_json(const Cpdag& c) {
  json directed = json::array(), undirected = json::array();
  for (const auto& e : c.directed_edges()) directed.push_back({e.parent, e.child});
  for (const auto& e : c.undirected_edges()) undirected.push_back({e.first, e.second});
  return {{"vertices", c.vertices()}, {"directed", directed}, {"undirected", undirected}};
}

inline json to_json(const Lsem& m) {
  json out = to_json(m.graph());
  json coefs = json::array();
  for (const auto& c : m.coefficients()) coefs.push_back({c.parent, c.child, c.value});
  out["coefficients"] = coefs;
  return out;
}

inline json to_json(const CorrelationMatrix& s) {
  json rows = json::array();
  for (std::size_t i = 0; i < s.size(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < s.size(); ++j) row.push_back(s(i, j));
    rows.push_back(row);
  }
  return {{"labels", s.labels()}, {"matrix", rows}};
}

namespace detail {

inline const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
  return j.at(key);
}

inline std::string as_label(const json& j, const std::string& where) {
  if (!j.is_string()) throw ParseError(where + ": expected a string label");
  return j.get<std::string>();
}

inline double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ParseError(where + ": expected a number");
  return j.get<double>();
}

}  // namespace detail

inline Dag dag_from_json(const json& j, const std::string& where = "graph") {
  const json& vs = detail::require(j, "vertices", where);
  const json& es = detail::require(j, "edges", where);
  if (!vs.is_array() || !es.is_array()) throw ParseError(where + ": 'vertices' and 'edges' must be arrays");
  std::vector<std::string> vertices;
  for (std::size_t i = 0; i < vs.size(); ++i)
    vertices.push_back(detail::as_label(vs[i], where + ".vertices[" + std::to_string(i) + "]"));
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < es.size(); ++i) {
    std::string at = where + ".edges[" + std::to_string(i) + "]";
    if (!es[i].is_array() || es[i].size() != 2) throw ParseError(at + ": expected [parent, child]");
    edges.push_back({detail::as_label(es[i][0], at), detail::as_label(es[i][1], at)});
  }
  try {
    return Dag(std::move(vertices), edges);
  } catch (const InvalidArgument& e) {
    throw ParseError(where + ": " + e.what());
  }
}

/// Graph JSON extended with "coefficients": [[parent, child, value]].
/// Throws NotStandardizable unchanged so callers can name the vertex.
inline Lsem lsem_from_json(const json& j, const std::string& where = "model") {
  Dag g = dag_from_json(j, where);
  const json& cs = detail::require(j, "coefficients", where);
  if (!cs.is_array()) throw ParseError(where + ": 'coefficients' must be an array");
  std::vector<Coefficient> coefs;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    std::string at = where + ".coefficients[" + std::to_string(i) + "]";
    if (!cs[i].is_array() || cs[i].size() != 3) throw ParseError(at + ": expected [parent, child, value]");
    coefs.push_back({detail::as_label(cs[i][0], at), detail::as_label(cs[i][1], at), detail::as_number(cs[i][2], at)});
  }
  try {
    return Lsem(std::move(g), coefs);
  } catch (const NotStandardizable&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ParseError(where + ": " + e.what());
  }
}

inline Cpdag cpdag_from_json(const json& j, const std::string& where = "cpdag") {
  const json& vs = detail::require(j, "vertices", where);
  std::vector<std::string> vertices;
  for (std::size_t i = 0; i < vs.size(); ++i) vertices.push_back(detail::as_label(vs[i], where + ".vertices"));
  std::vector<Edge> directed;
  std::vector<UndirectedEdge> undirected;
  for (const auto& e : detail::require(j, "directed", where)) {
    if (!e.is_array() || e.size() != 2) throw ParseError(where + ".directed: expected pairs");
    directed.push_back({detail::as_label(e[0], where), detail::as_label(e[1], where)});
  }
  for (const auto& e : detail::require(j, "undirected", where)) {
    if (!e.is_array() || e.size() != 2) throw ParseError(where + ".undirected: expected pairs");
    undirected.emplace_back(detail::as_label(e[0], where), detail::as_label(e[1], where));
  }
  try {
    return Cpdag(std::move(vertices), directed, undirected);
  } catch (const InvalidArgument& e) {
    throw ParseError(where + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Discovery output

inline json to_json(const SeparationRecord& r) {
  return {{"a", r.triple.a},          {"b", r.triple.b},
          {"c", r.triple.c},          {"test", r.test},
          {"verdict", static_cast<int>(r.verdict)}, {"statistic", r.statistic},
          {"cutoff", r.cutoff}};
}

inline json to_json(const DiscoveryResult& r) {
  json log = json::array();
  for (const auto& rec : r.log) log.push_back(to_json(rec));
  json out = {{"outcome", r.no_conclusion() ? "no_conclusion" : "structure"},
              {"cpdag", r.no_conclusion() ? json(nullptr) : to_json(*r.structure)},
              {"log", log},
              {"conflicts", r.conflicts}};
  return out;
}

inline json intervals_to_json(const std::vector<Interval>& ivs) {
  json out = json::array();
  for (const auto& iv : ivs) out.push_back({iv.lo, iv.hi});
  return out;
}

inline json to_json(const GeneralizedEstimate& e) {
  if (e.is_singleton()) return {{"kind", "singleton"}, {"value", e.value()}};
  return {{"kind", "subset"}, {"intervals", intervals_to_json(e.intervals())}};
}

inline json to_json(const ConfidenceRegion& r) {
  return {{"level", r.level()},
          {"resolution", r.resolution()},
          {"s0", intervals_to_json(r.s0())},
          {"s1", intervals_to_json(r.s1())},
          {"s2", intervals_to_json(r.s2())}};
}

// ---------------------------------------------------------------------------
// Adversarial certificate

inline json to_json(const CanonicalPair& p) {
  json ineq = json::array();
  for (const auto& q : p.inequalities.inequalities)
    ineq.push_back({{"name", q.name}, {"lhs", q.lhs}, {"rhs", q.rhs}, {"holds", q.holds}});
  json log = json::array();
  for (const auto& s : p.search_log)
    log.push_back({{"scale", s.scale}, {"kl", s.kl}, {"verified", s.verified}, {"note", s.note}});
  return {{"theta0", p.theta0},
          {"k", p.k},
          {"epsilon", p.epsilon},
          {"scale", p.scale},
          {"mu1", {{"alpha", p.alpha}, {"beta", p.beta}, {"gamma", p.gamma}}},
          {"mu2", {{"f", p.f}, {"g", p.g}, {"h", p.h}, {"m", p.m}, {"n", p.n}}},
          {"model1", to_json(p.m1())},
          {"model2", to_json(p.m2())},
          {"sigma1", to_json(p.sigma1)},
          {"sigma2", to_json(p.sigma2)},
          {"kl", p.kl},
          {"k_constraint_m2", {{"holds", p.inequalities.holds}, {"inequalities", ineq}}},
          {"search_log", log}};
}

// ---------------------------------------------------------------------------
// Dataset CSV: header of labels, one sample per row.

inline DataMatrix parse_csv(const std::string& text, const std::string& source = "csv") {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) {
      auto b = cell.find_first_not_of(" \t\r");
      auto e = cell.find_last_not_of(" \t\r");
      out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  std::vector<std::string> labels;
  while (labels.empty() && std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    labels = split(line);
  }
  if (labels.empty()) throw ParseError(source + ": missing header row", line_no);
  for (const auto& l : labels)
    if (l.empty()) throw ParseError(source + ": empty column label in header", line_no);

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split(line);
    if (cells.size() != labels.size())
      throw ParseError(source + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                           " fields, expected " + std::to_string(labels.size()),
                       line_no);
    for (const auto& c : cells) {
      double v = 0.0;
      auto [end, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc{} || end != c.data() + c.size() || !std::isfinite(v))
        throw ParseError(source + ": line " + std::to_string(line_no) + ": '" + c + "' is not a finite number",
                         line_no);
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw ParseError(source + ": no data rows", line_no);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(labels.size()));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < labels.size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * labels.size() + c];
  try {
    return DataMatrix(std::move(labels), std::move(m));
  } catch (const InvalidArgument& e) {
    throw ParseError(source + ": " + e.what(), 1);
  }
}

inline DataMatrix read_csv(const std::string& path) { return parse_csv(read_text_file(path), path); }

inline std::string to_csv(const DataMatrix& d) {
  std::string out;
  for (std::size_t j = 0; j < d.cols(); ++j) out += (j ? "," : "") + d.labels()[j];
  out += '\n';
  for (std::size_t i = 0; i < d.rows(); ++i) {
    for (std::size_t j = 0; j < d.cols(); ++j) {
      if (j) out += ',';
      out += format_double(d.values()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    out += '\n';
  }
  return out;
}

inline void write_csv(const DataMatrix& d, const std::string& path) { write_text_file(path, to_csv(d)); }

}  // namespace faithful::io
