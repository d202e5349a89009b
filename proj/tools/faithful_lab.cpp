// faithful_lab: discovery on datasets, model audits, adversarial certificates
// and Monte-Carlo sweeps.
//
// Exit codes: 0 success, 1 user error (bad flags, inputs, or a failed check),
// 2 internal error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "faithful/faithful.hpp"

namespace fs = std::filesystem;
using faithful::json;

namespace {

constexpr std::uint64_t kDefaultSeed = 20021;

enum Exit { kOk = 0, kUser = 1, kInternal = 2 };

/// Echo of the resolved options. Paths of output files are left out of the
/// copy embedded in outputs, so reruns into another path compare equal.
struct Echo {
  json options = json::object();

  template <class T>
  void set(const std::string& key, const T& v) { options[key] = v; }

  void print(const std::string& command, const std::string& out_path) const {
    std::cout << "faithful_lab " << command << "\n";
    for (const auto& [k, v] : options.items()) std::cout << "  " << k << " = " << v.dump() << "\n";
    if (!out_path.empty()) std::cout << "  out = " << out_path << "\n";
  }
};

std::pair<std::string, std::string> split_effect(const std::string& spec) {
  auto comma = spec.find(',');
  if (comma == std::string::npos || comma == 0 || comma + 1 == spec.size() ||
      spec.find(',', comma + 1) != std::string::npos)
    throw faithful::InvalidArgument("--effect expects X,Y; got '" + spec + "'");
  return {spec.substr(0, comma), spec.substr(comma + 1)};
}

std::string sibling(const std::string& out, const std::string& suffix) {
  fs::path p(out);
  fs::path name = p.stem().string() + suffix;
  return (p.parent_path() / name).string();
}

// --------------------------------------------------------------------------

struct DiscoverArgs {
  std::string data, out, effect;
  double lambda = 0.0;
  std::optional<double> gate, level;
  double gate_level = 0.01;
  double resolution = 1e-3;
};

int run_discover(const DiscoverArgs& a) {
  Echo echo;
  echo.set("data", a.data);
  echo.set("lambda", a.lambda);
  echo.set("gate", a.gate ? json(*a.gate) : json(nullptr));
  echo.set("gate_level", a.gate_level);
  echo.set("effect", a.effect.empty() ? json(nullptr) : json(a.effect));
  echo.set("level", a.level ? json(*a.level) : json(nullptr));
  echo.set("resolution", a.resolution);
  echo.print("discover", a.out);

  faithful::detail::check_open_unit(a.lambda, "lambda");
  if (a.gate) faithful::detail::check_open_unit(*a.gate, "gate");
  if (a.level && a.effect.empty()) throw faithful::InvalidArgument("--level needs --effect");

  const faithful::DataMatrix d = faithful::io::read_csv(a.data);
  const auto s = faithful::summarize(d);
  const auto mode = a.gate ? faithful::DiscoveryMode::gated(*a.gate, a.gate_level) : faithful::DiscoveryMode::plain();
  const auto result = faithful::discover(s, a.lambda, mode);

  json out = {{"options", echo.options}, {"n", d.rows()}, {"result", faithful::io::to_json(result)}};
  if (!a.effect.empty()) {
    auto [x, y] = split_effect(a.effect);
    const std::size_t ix = d.index_of(x), iy = d.index_of(y);
    if (ix == iy) throw faithful::InvalidArgument("--effect needs two distinct variables");
    const auto est = faithful::estimate_from(s, result, ix, iy);
    out["estimate"] = faithful::io::to_json(est);
    std::cout << "estimate: " << out["estimate"].dump() << "\n";
    if (a.level) {
      const auto region = faithful::region_from(s, result, ix, iy, *a.level, a.resolution);
      out["region"] = faithful::io::to_json(region);
    }
  }
  faithful::io::write_text_file(a.out, out.dump(2) + "\n");
  std::cout << "outcome: " << (result.no_conclusion() ? "no_conclusion" : "structure") << "\n";
  if (result.structure) std::cout << "cpdag: " << faithful::io::to_json(*result.structure).dump() << "\n";
  if (!result.conflicts.empty()) std::cout << "orientation conflicts: " << result.conflicts.size() << "\n";
  return kOk;
}

// --------------------------------------------------------------------------

struct CheckArgs {
  std::string model, out;
  std::optional<double> k, lambda;
};

std::string triple_text(const faithful::SeparationTriple& t) {
  std::string c;
  for (const auto& l : t.c) c += (c.empty() ? "" : ",") + l;
  return t.a + " " + t.b + " | {" + c + "}";
}

int run_check(const CheckArgs& a) {
  Echo echo;
  echo.set("model", a.model);
  echo.set("k", a.k ? json(*a.k) : json(nullptr));
  echo.set("lambda", a.lambda ? json(*a.lambda) : json(nullptr));
  echo.print("check", a.out);
  if (a.k.has_value() == a.lambda.has_value()) throw faithful::InvalidArgument("give exactly one of --k or --lambda");

  const auto m = faithful::io::lsem_from_json(faithful::io::read_json_file(a.model), a.model);
  json report = {{"options", echo.options}};
  bool holds = false;
  json witnesses = json::array();
  if (a.k) {
    faithful::detail::check_open_unit(*a.k, "k");
    const auto r = faithful::satisfies_k_constraint(m, *a.k);
    holds = r.holds;
    report["constraint"] = "k";
    for (const auto& v : r.violations) {
      witnesses.push_back({{"a", v.triple.a}, {"b", v.triple.b}, {"c", v.triple.c},
                           {"partial_correlation", v.partial_correlation}, {"coefficient", v.coefficient}});
      std::cout << "  violation: |rho(" << triple_text(v.triple) << ")| = " << faithful::io::format_double(std::abs(v.partial_correlation))
                << " < k * |" << faithful::io::format_double(v.coefficient) << "|\n";
    }
  } else {
    faithful::detail::check_open_unit(*a.lambda, "lambda");
    const auto r = faithful::is_lambda_strong_faithful(m, *a.lambda);
    holds = r.holds;
    report["constraint"] = "lambda";
    for (const auto& v : r.violations) {
      witnesses.push_back({{"a", v.triple.a}, {"b", v.triple.b}, {"c", v.triple.c},
                           {"partial_correlation", v.partial_correlation}, {"d_connected", v.d_connected}});
      std::cout << "  violation: rho(" << triple_text(v.triple) << ") = " << faithful::io::format_double(v.partial_correlation)
                << (v.d_connected ? " is d-connected but not above lambda\n" : " is d-separated but nonzero\n");
    }
  }
  report["holds"] = holds;
  report["violations"] = witnesses;
  if (!a.out.empty()) faithful::io::write_text_file(a.out, report.dump(2) + "\n");
  std::cout << (holds ? "pass" : "fail") << " (" << witnesses.size() << " violations)\n";
  return holds ? kOk : kUser;
}

// --------------------------------------------------------------------------

struct AdversaryArgs {
  double theta0 = 0.0, k = 0.0, epsilon = 0.0;
  std::string out;
  std::size_t samples = 0;
  std::uint64_t seed = kDefaultSeed;
};

int run_adversary(const AdversaryArgs& a) {
  Echo echo;
  echo.set("theta0", a.theta0);
  echo.set("k", a.k);
  echo.set("epsilon", a.epsilon);
  echo.set("samples", a.samples);
  echo.set("seed", a.seed);
  echo.print("adversary", a.out);

  const auto pair = faithful::construct_pair(a.theta0, a.k, a.epsilon);
  json cert = faithful::io::to_json(pair);
  cert["options"] = echo.options;
  faithful::io::write_text_file(a.out, cert.dump(2) + "\n");
  std::cout << "kl: " << faithful::io::format_double(pair.kl) << " at scale " << faithful::io::format_double(pair.scale)
            << "\n";
  if (a.samples > 0) {
    const std::string p1 = sibling(a.out, "_P1.csv"), p2 = sibling(a.out, "_P2.csv");
    faithful::io::write_csv(faithful::sample(pair.m1(), a.samples, faithful::sub_seed(a.seed, 0, a.samples, 0, 1)), p1);
    faithful::io::write_csv(faithful::sample(pair.m2(), a.samples, faithful::sub_seed(a.seed, 1, a.samples, 0, 2)), p2);
    std::cout << "datasets: " << p1 << ", " << p2 << "\n";
  }
  return kOk;
}

// --------------------------------------------------------------------------

struct SimulateArgs {
  std::string config, out, format = "json";
  std::optional<std::uint64_t> seed;
  bool timing = false;
};

int run_simulate(const SimulateArgs& a) {
  json j = faithful::io::read_json_file(a.config);
  if (a.seed) {
    if (!j.is_object()) throw faithful::ConfigError("config: expected an object");
    j["seed"] = *a.seed;
  }
  auto config = faithful::config_from_json(j);
  Echo echo;
  echo.set("config", a.config);
  echo.set("format", a.format);
  echo.set("seed", config.seed);
  echo.set("timing", a.timing);
  echo.set("threads", faithful::worker_count());
  echo.print("simulate", a.out);

  const auto report = faithful::run_experiment(config);
  faithful::emit_report(report, a.out, a.format == "csv" ? faithful::ReportFormat::Csv : faithful::ReportFormat::Json,
                        a.timing);
  std::size_t held = 0;
  for (const auto& c : report.checks) held += c.holds;
  std::cout << "demo: " << faithful::to_string(report.demo) << ", cells: " << report.cells.size()
            << ", excluded: " << report.excluded.size() << ", checks holding: " << held << "/" << report.checks.size()
            << "\n";
  for (const auto& e : report.excluded) std::cout << "  excluded " << e.model_id << ": " << e.reason << "\n";
  for (const auto& c : report.checks)
    if (!c.holds) std::cout << "  check failed: " << c.name << " " << c.model_id << " n=" << c.n << ": " << c.detail << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"faithful_lab: causal discovery under strong faithfulness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "faithful_lab 1.0");

  DiscoverArgs da;
  auto* discover = app.add_subcommand("discover", "PC discovery on a CSV dataset");
  discover->add_option("--data", da.data, "CSV dataset")->required();
  discover->add_option("--lambda", da.lambda, "separation threshold in (0,1)")->required();
  discover->add_option("--gate", da.gate, "refuse when a retained correlation may be below this");
  discover->add_option("--gate-level", da.gate_level, "level of the gate's magnitude tests")->capture_default_str();
  discover->add_option("--effect", da.effect, "X,Y: estimate the direct effect of X on Y");
  discover->add_option("--level", da.level, "confidence level for the effect region");
  discover->add_option("--resolution", da.resolution, "grid spacing of the region")->capture_default_str();
  discover->add_option("--out", da.out, "output JSON")->required();

  CheckArgs ca;
  auto* check = app.add_subcommand("check", "audit a model against the k-constraint or lambda-strong faithfulness");
  check->add_option("--model", ca.model, "model JSON")->required();
  auto* kopt = check->add_option("--k", ca.k, "k-constraint constant in (0,1)");
  auto* lopt = check->add_option("--lambda", ca.lambda, "strength threshold in (0,1)");
  kopt->excludes(lopt);
  check->add_option("--out", ca.out, "optional JSON report");

  AdversaryArgs aa;
  auto* adversary = app.add_subcommand("adversary", "construct a verified indistinguishable pair");
  adversary->add_option("--theta0", aa.theta0, "effect under the first model, non-zero")->required();
  adversary->add_option("--k", aa.k, "k-constraint constant in (0, 1/2)")->required();
  adversary->add_option("--epsilon", aa.epsilon, "KL bound")->required();
  adversary->add_option("--out", aa.out, "certificate JSON")->required();
  adversary->add_option("--samples", aa.samples, "also write this many samples from each model");
  adversary->add_option("--seed", aa.seed, "seed for the samples")->capture_default_str();

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "run a Monte-Carlo experiment");
  simulate->add_option("--config", sa.config, "experiment JSON")->required();
  simulate->add_option("--out", sa.out, "report path")->required();
  simulate->add_option("--format", sa.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  simulate->add_option("--seed", sa.seed, "override the config seed");
  simulate->add_flag("--timing", sa.timing, "include wall-clock seconds per cell");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUser;
  }

  try {
    if (*discover) return run_discover(da);
    if (*check) return run_check(ca);
    if (*adversary) return run_adversary(aa);
    return run_simulate(sa);
  } catch (const faithful::NumericalError& e) {
    std::cerr << "internal numerical error: " << e.what() << "\n";
    return kInternal;
  } catch (const faithful::ConstructionFailed& e) {
    std::cerr << "construction failed: " << e.what() << "\n";
    return kInternal;
  } catch (const faithful::NotStandardizable& e) {
    std::cerr << "not standardizable: " << e.what() << "\n";
    return kUser;
  } catch (const faithful::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUser;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}
