#include "distcurrents/runner.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "distcurrents/bnv.hpp"
#include "distcurrents/currents.hpp"
#include "distcurrents/distminor.hpp"
#include "distcurrents/errors.hpp"
#include "distcurrents/expr.hpp"
#include "distcurrents/extension.hpp"
#include "distcurrents/field_io.hpp"
#include "distcurrents/grid.hpp"
#include "distcurrents/multiindex.hpp"
#include "distcurrents/sobolev.hpp"

namespace distcurrents {

namespace {

using json = nlohmann::json;

constexpr double kPi = 3.14159265358979312;

json labels_json(const MultiIndex& idx) {
  json out = json::array();
  for (int i = 0; i < idx.size(); ++i) out.push_back(idx.label(i));
  return out;
}

json grid_json(const BoxGrid& g) {
  json lower = json::array(), upper = json::array(), res = json::array();
  for (int a = 0; a < g.dim(); ++a) {
    lower.push_back(g.lower(a));
    upper.push_back(g.upper(a));
    res.push_back(g.res(a));
  }
  return json{{"lower", lower}, {"upper", upper}, {"resolution", res}};
}

BoxGrid build_grid(const BoxSpec& box) {
  if (box.lower.empty())
    throw std::invalid_argument("config: [box] is required for this operation");
  return BoxGrid(std::span<const double>(box.lower),
                 std::span<const double>(box.upper),
                 std::span<const int>(box.resolution));
}

SampledMap load_map(const RunConfig& cfg, int threads) {
  if (!cfg.map.file.empty()) return read_field(cfg.map.file);
  if (cfg.map.exprs.empty())
    throw std::invalid_argument("config: [map] needs expr or file");
  BoxGrid g = build_grid(cfg.box);
  return sample_map(dsl::VectorExpression::parse(cfg.map.exprs, g.dim()), g, threads);
}

MultiIndex make_index(const std::vector<int>& labels, int ambient) {
  return MultiIndex(std::span<const int>(labels.data(), labels.size()), ambient);
}

MultiIndex beta_or_full(const OperationSpec& op, int N) {
  return op.beta_given ? make_index(op.beta, N) : MultiIndex::full(N);
}

DivMinorOptions minor_options(const OperationSpec& op) {
  DivMinorOptions opts;
  opts.profile.kind =
      op.extension == "product" ? ExtensionKind::ProductCutoff : ExtensionKind::Averaging;
  opts.layers = op.layers;
  opts.threads = op.threads;
  return opts;
}

TestFunction make_psi(const RunConfig& cfg, const BoxGrid& g) {
  if (cfg.operation.psi.empty())
    throw std::invalid_argument("config: operation psi is required");
  return sample_test_function(dsl::Expression::parse(cfg.operation.psi, g.dim()), g, 0.0,
                              cfg.operation.threads);
}

DomainForm point_mass_form(const RunConfig& cfg, int n) {
  if (cfg.operation.psi.empty())
    throw std::invalid_argument("config: operation psi is required");
  std::vector<DomainFormTerm> terms;
  terms.push_back({make_index(cfg.operation.alpha, n),
                   dsl::Expression::parse(cfg.operation.psi, n)});
  return DomainForm(n, static_cast<int>(cfg.operation.alpha.size()), std::move(terms));
}

const char* extension_name(ExtensionKind kind) {
  return kind == ExtensionKind::ProductCutoff ? "product" : "averaging";
}

json coarea_json(const CoareaCheck& check, std::uint64_t seed) {
  return json{{"lhs", check.lhs},
              {"rhs", check.rhs},
              {"error", check.error},
              {"samples", check.samples},
              {"degenerate_levels", check.degenerate_levels},
              {"seed", seed}};
}

// Level-set export next to a coarea run: extract one level (given, or the
// center of the sampled value range) and write its pieces as CSV.
json export_level_csv(const SampledMap& source, const RunConfig& cfg) {
  LevelSetExtractor extractor(source);
  std::vector<double> y = cfg.operation.level;
  if (y.empty()) {
    y.resize(extractor.components());
    for (int c = 0; c < extractor.components(); ++c) {
      double lo = 0.0, hi = 0.0;
      extractor.value_range(c, lo, hi);
      y[c] = 0.5 * (lo + hi);
    }
  }
  if (static_cast<int>(y.size()) != extractor.components())
    throw std::invalid_argument("config: level needs one entry per map component");

  const LevelSetCurrent cur = extractor.extract(y);
  std::ofstream out(cfg.output.csv);
  if (!out) throw std::runtime_error("cannot write '" + cfg.output.csv + "'");
  write_level_set_csv(cur, out);

  json level = json::array();
  for (double v : y) level.push_back(v);
  return json{{"path", cfg.output.csv},
              {"level", level},
              {"pieces", cur.pieces.size()},
              {"degenerate_crossings", cur.degenerate_crossings}};
}

SampledMap extended_for_export(const SampledMap& u, const OperationSpec& op) {
  int layers = op.layers;
  if (layers == 0)
    for (int a = 0; a < u.grid().dim(); ++a) layers = std::max(layers, u.grid().res(a));
  DivMinorOptions opts = minor_options(op);
  return extend_map(u, cylinder_grid(u.grid(), layers), opts.profile, opts.threads);
}

// ==== operations ====

void run_norm(const RunConfig& cfg, json& results) {
  SampledMap u = load_map(cfg, cfg.operation.threads);
  SobolevParams prm{cfg.operation.s, cfg.operation.p};
  PairSumOptions pairs;
  pairs.threads = cfg.operation.threads;
  const SeminormValue sv = gagliardo_seminorm(u, prm, pairs);
  const double lp = lp_norm(u, prm.p);
  results = json{{"seminorm", sv.value},      {"lp_norm", lp},
                 {"wsp_norm", lp + sv.value}, {"nodes_used", sv.nodes_used},
                 {"subsampled", sv.subsampled}, {"s", prm.s},
                 {"p", prm.p},                {"masked_nodes", u.masked_count()},
                 {"grid", grid_json(u.grid())}};
}

void run_minor(const RunConfig& cfg, json& results) {
  SampledMap u = load_map(cfg, cfg.operation.threads);
  const int n = u.grid().dim();
  TestFunction psi = make_psi(cfg, u.grid());
  const MultiIndex alpha = make_index(cfg.operation.alpha, n);
  const MultiIndex beta = beta_or_full(cfg.operation, u.components());
  const DistributionalEvaluation ev = div_minor(u, alpha, beta, psi, minor_options(cfg.operation));

  json terms = json::array();
  for (const auto& [axis, value] : ev.terms) terms.push_back(json{{"axis", axis}, {"value", value}});
  results = json{{"value", ev.value},
                 {"alpha", labels_json(alpha)},
                 {"beta", labels_json(beta)},
                 {"terms", terms},
                 {"masked_integrand_nodes", ev.masked},
                 {"extension", extension_name(ev.extension)},
                 {"quadrature", grid_json(ev.quadrature)},
                 {"masked_nodes", u.masked_count()},
                 {"grid", grid_json(u.grid())}};
}

void run_tu(const RunConfig& cfg, json& results) {
  SampledMap u = load_map(cfg, cfg.operation.threads);
  const int n = u.grid().dim();
  const int N = u.components();
  if (cfg.operation.psi.empty())
    throw std::invalid_argument("config: operation psi is required");
  const dsl::Expression coeff = dsl::Expression::parse(cfg.operation.psi, n + N);
  const MultiIndex alpha = make_index(cfg.operation.alpha, n);
  const MultiIndex beta = beta_or_full(cfg.operation, N);
  const CurrentComponentValue c =
      tu_component(u, alpha, beta, coeff, minor_options(cfg.operation));
  results = json{{"value", c.value},
                 {"alpha", labels_json(alpha)},
                 {"beta", labels_json(beta)},
                 {"masked_integrand_nodes", c.masked},
                 {"extension", cfg.operation.extension},
                 {"masked_nodes", u.masked_count()},
                 {"grid", grid_json(u.grid())}};
}

void run_jacobian(const RunConfig& cfg, json& results) {
  SampledMap u = load_map(cfg, cfg.operation.threads);
  const DomainForm form = point_mass_form(cfg, u.grid().dim());
  const JacobianCurrentEval ju = ju_eval(u, form, minor_options(cfg.operation));

  json breakdown = json::array();
  for (const JacobianTermValue& term : ju.breakdown)
    breakdown.push_back(json{{"alpha", labels_json(term.alpha)}, {"value", term.value}});
  results = json{{"value", ju.value},
                 {"breakdown", breakdown},
                 {"extension", cfg.operation.extension},
                 {"masked_nodes", u.masked_count()},
                 {"grid", grid_json(u.grid())}};
}

void run_coarea(const RunConfig& cfg, json& results) {
  SampledMap u = load_map(cfg, cfg.operation.threads);
  CoareaOptions opts;
  opts.mc.samples = cfg.operation.samples;
  opts.mc.seed = cfg.operation.seed;
  opts.mc.threads = cfg.operation.threads;
  opts.minor = minor_options(cfg.operation);

  if (cfg.operation.kind == "strong-coarea") {
    results = coarea_json(strong_coarea_check(u, opts.mc), opts.mc.seed);
  } else if (cfg.operation.kind == "chain") {
    if (cfg.operation.target.empty())
      throw std::invalid_argument("config: chain needs target expressions");
    const dsl::VectorExpression F =
        dsl::VectorExpression::parse(cfg.operation.target, u.components());
    const DomainForm form = point_mass_form(cfg, u.grid().dim());
    results = coarea_json(chain_rule_check(u, F, form, opts), opts.mc.seed);
  } else {
    const DomainForm form = point_mass_form(cfg, u.grid().dim());
    results = coarea_json(weak_coarea_check(u, form, opts), opts.mc.seed);
  }
  results["masked_nodes"] = u.masked_count();
  results["grid"] = grid_json(u.grid());

  if (!cfg.output.csv.empty()) {
    if (cfg.operation.kind == "strong-coarea") {
      results["level_export"] = export_level_csv(u, cfg);
    } else {
      results["level_export"] = export_level_csv(extended_for_export(u, cfg.operation), cfg);
    }
  }
}

void run_vortex_demo(const RunConfig& cfg, json& results) {
  RunConfig demo = cfg;
  if (demo.box.lower.empty()) {
    demo.box.lower = {-1.0, -1.0};
    demo.box.upper = {1.0, 1.0};
    demo.box.resolution = {64, 64};
  }
  if (demo.map.exprs.empty() && demo.map.file.empty())
    demo.map.exprs = {"x1 / sqrt(x1^2 + x2^2)", "x2 / sqrt(x1^2 + x2^2)"};
  if (demo.operation.psi.empty()) demo.operation.psi = "bump(0, 0; 0.5)";
  demo.operation.alpha.clear();

  SampledMap u = load_map(demo, demo.operation.threads);
  if (u.grid().dim() != 2 || u.components() != 2)
    throw std::invalid_argument("vortex-demo runs on two components over a plane box");

  const JacobianCurrentEval ju = ju_eval(u, point_mass_form(demo, 2), minor_options(demo.operation));
  const dsl::Expression psi = dsl::Expression::parse(demo.operation.psi, 2);
  const double origin[] = {0.0, 0.0};
  const double target = kPi * psi.evaluate(origin);
  results = json{{"value", ju.value},
                 {"target", target},
                 {"relative_error", std::abs(ju.value - target) / std::abs(target)},
                 {"psi_origin", psi.evaluate(origin)},
                 {"masked_nodes", u.masked_count()},
                 {"grid", grid_json(u.grid())}};
}

void run_selftest(json& results) {
  json props;
  int failed = 0;
  for (const auto& [name, pass] : selftest_properties()) {
    props[name] = pass ? "pass" : "fail";
    if (!pass) ++failed;
  }
  results = json{{"properties", props}, {"failed", failed}};
}

void run_convergence(const RunConfig& cfg, json& results, json& tables) {
  const std::vector<int>& levels = cfg.operation.levels;
  if (levels.size() < 2)
    throw std::invalid_argument("config: convergence needs at least two levels");
  for (size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 4) throw std::invalid_argument("config: levels must be >= 4");
    if (i > 0 && levels[i] <= levels[i - 1])
      throw std::invalid_argument("config: levels must strictly increase");
  }

  RunConfig base = cfg;
  const bool vortex = cfg.operation.series == "vortex";
  if (vortex) {
    if (!base.map.exprs.empty() || !base.map.file.empty())
      throw std::invalid_argument("config: the vortex series defines its own map");
    base.map.exprs = {"x1 / sqrt(x1^2 + x2^2)", "x2 / sqrt(x1^2 + x2^2)"};
    if (base.box.lower.empty()) {
      base.box.lower = {-1.0, -1.0};
      base.box.upper = {1.0, 1.0};
      base.box.resolution = {64, 64};
    }
    if (base.operation.psi.empty()) base.operation.psi = "bump(0, 0; 0.5)";
    base.operation.alpha.clear();
  } else if (base.map.exprs.empty()) {
    throw std::invalid_argument("config: the minor series needs map expressions");
  }
  if (base.box.lower.empty())
    throw std::invalid_argument("config: [box] is required for this operation");

  double target = 0.0;
  if (vortex) {
    const dsl::Expression psi = dsl::Expression::parse(base.operation.psi, 2);
    const double origin[] = {0.0, 0.0};
    target = kPi * psi.evaluate(origin);
  }

  json rows = json::array();
  double prev_error = 0.0;
  double min_order = 0.0;
  bool have_order = false;
  for (size_t i = 0; i < levels.size(); ++i) {
    RunConfig step = base;
    for (int& r : step.box.resolution) r = levels[i];
    SampledMap u = load_map(step, step.operation.threads);
    const int n = u.grid().dim();

    double value = 0.0, oracle = 0.0;
    if (vortex) {
      value = ju_eval(u, point_mass_form(step, n), minor_options(step.operation)).value;
      oracle = target;
    } else {
      TestFunction psi = make_psi(step, u.grid());
      const MultiIndex alpha = make_index(step.operation.alpha, n);
      const MultiIndex beta = beta_or_full(step.operation, u.components());
      value = div_minor(u, alpha, beta, psi, minor_options(step.operation)).value;
      oracle = pointwise_minor_integral(u, alpha, beta, psi, step.operation.threads);
    }
    const double error = std::abs(value - oracle);

    json row{{"resolution", levels[i]}, {"value", value}, {"oracle", oracle}, {"error", error}};
    if (i > 0 && error > 0.0 && prev_error > 0.0) {
      const double order = std::log2(prev_error / error);
      row["order"] = order;
      min_order = have_order ? std::min(min_order, order) : order;
      have_order = true;
    } else {
      row["order"] = nullptr;
    }
    rows.push_back(row);
    prev_error = error;
  }

  tables["convergence"] = rows;
  results = json{{"series", cfg.operation.series}, {"rows", rows.size()},
                 {"final_error", prev_error}};
  if (have_order) results["min_order"] = min_order;
}

}  // namespace

std::string run_operation(const RunConfig& cfg, bool include_timing) {
  const std::string& kind = cfg.operation.kind;
  if (kind.empty()) throw std::invalid_argument("config: operation kind is required");

  const auto started = std::chrono::steady_clock::now();
  json results;
  json tables = json::object();

  if (kind == "norm") {
    run_norm(cfg, results);
  } else if (kind == "minor") {
    run_minor(cfg, results);
  } else if (kind == "tu") {
    run_tu(cfg, results);
  } else if (kind == "jacobian") {
    run_jacobian(cfg, results);
  } else if (kind == "coarea" || kind == "chain" || kind == "strong-coarea") {
    run_coarea(cfg, results);
  } else if (kind == "vortex-demo") {
    run_vortex_demo(cfg, results);
  } else if (kind == "selftest") {
    run_selftest(results);
  } else if (kind == "convergence") {
    run_convergence(cfg, results, tables);
  } else {
    throw std::invalid_argument("config: unknown operation kind '" + kind + "'");
  }

  if (!cfg.output.field.empty() && kind != "selftest" && kind != "convergence") {
    // Persist the sampled input so a run can be replayed from its own data.
    SampledMap u = load_map(cfg, cfg.operation.threads);
    write_field(cfg.output.field, u);
    results["field_export"] = json{{"path", cfg.output.field}};
  }

  json config_echo = json::object();
  for (const ConfigEntry& entry : cfg.echo) config_echo[entry.section][entry.key] = entry.value;

  json report{{"config", config_echo},
              {"results", results},
              {"tables", tables},
              {"meta", json{{"format_version", 1},
                            {"operation", kind},
                            {"version", "0.1.0"}}}};
  if (include_timing) {
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    report["meta"]["wall_clock_seconds"] = elapsed.count();
  }
  return report.dump(2) + "\n";
}

}  // namespace distcurrents
