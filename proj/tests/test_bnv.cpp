#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "distcurrents/bnv.hpp"
#include "distcurrents/currents.hpp"
#include "distcurrents/extension.hpp"
#include "doctest.h"

using namespace distcurrents;

namespace {

BoxGrid square(double a, double b, int r) {
  double lo[] = {a, a};
  double hi[] = {b, b};
  int res[] = {r, r};
  return BoxGrid(lo, hi, res);
}

BoxGrid boxn(int n, double a, double b, int r) {
  std::array<double, kMaxGridDim> lo, hi;
  std::array<int, kMaxGridDim> res;
  for (int i = 0; i < n; ++i) {
    lo[i] = a;
    hi[i] = b;
    res[i] = r;
  }
  return BoxGrid(std::span<const double>(lo.data(), n), std::span<const double>(hi.data(), n),
                 std::span<const int>(res.data(), n));
}

SampledMap plane_map(const BoxGrid& g, const std::string& e1, const std::string& e2) {
  return sample_map(dsl::VectorExpression::parse(std::vector<std::string>{e1, e2}, 2), g);
}

SampledMap vortex_map(const BoxGrid& g) {
  return plane_map(g, "x1 / sqrt(x1^2 + x2^2)", "x2 / sqrt(x1^2 + x2^2)");
}

// Polynomial cap supported on the disk of squared radius r2; C^2 at the rim.
std::string cap_bump(double r2) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "(max(0, %.6g - x1^2 - x2^2) / %.6g)^3", r2, r2);
  return buf;
}

DomainForm point_form(const std::string& src) {
  std::vector<DomainFormTerm> terms;
  terms.push_back({MultiIndex(2), dsl::Expression::parse(src, 2)});
  return DomainForm(2, 0, std::move(terms));
}

long flatten(const BoxGrid& g, std::span<const int> idx) {
  long node = 0;
  for (int a = 0; a < g.dim(); ++a) node = node * g.res(a) + idx[a];
  return node;
}

}  // namespace

TEST_SUITE("bnv") {

// ==== forms and the distributional pairing ====

TEST_CASE("domain forms validate their terms") {
  dsl::Expression c2 = dsl::Expression::parse("x1 + x2", 2);
  dsl::Expression c3 = dsl::Expression::parse("x1", 3);

  std::vector<DomainFormTerm> ok;
  ok.push_back({MultiIndex({1}, 2), c2});
  DomainForm form(2, 1, ok);
  CHECK(form.dim() == 2);
  CHECK(form.degree() == 1);
  CHECK(form.terms().size() == 1);

  std::vector<DomainFormTerm> wrong_ambient;
  wrong_ambient.push_back({MultiIndex({1}, 3), c2});
  CHECK_THROWS_AS(DomainForm(2, 1, wrong_ambient), std::invalid_argument);

  std::vector<DomainFormTerm> wrong_degree;
  wrong_degree.push_back({MultiIndex({1, 2}, 2), c2});
  CHECK_THROWS_AS(DomainForm(2, 1, wrong_degree), std::invalid_argument);

  std::vector<DomainFormTerm> wrong_arity;
  wrong_arity.push_back({MultiIndex({1}, 2), c3});
  CHECK_THROWS_AS(DomainForm(2, 1, wrong_arity), std::invalid_argument);

  std::vector<DomainFormTerm> repeated;
  repeated.push_back({MultiIndex({1}, 2), c2});
  repeated.push_back({MultiIndex({1}, 2), c2});
  CHECK_THROWS_AS(DomainForm(2, 1, repeated), std::invalid_argument);
}

TEST_CASE("jacobian pairing needs compatible shapes") {
  BoxGrid g = square(-1.0, 1.0, 8);
  SampledMap one = sample_map(dsl::VectorExpression::parse(std::vector<std::string>{"x1^2"}, 2), g);
  CHECK_THROWS_AS(ju_eval(one, point_form("bump(0, 0; 0.5)")), std::invalid_argument);

  std::vector<DomainFormTerm> terms;
  terms.push_back({MultiIndex({1}, 2), dsl::Expression::parse("x1", 2)});
  DomainForm degree_one(2, 1, terms);
  CHECK_THROWS_AS(ju_eval(plane_map(g, "x1", "x2"), degree_one), std::invalid_argument);
}

TEST_CASE("smooth maps match the pointwise jacobian") {
  BoxGrid g = square(-1.0, 1.0, 64);
  SampledMap u = plane_map(g, "x1 + 0.3*sin(x2)", "x2 - 0.2*cos(x1)");
  DomainForm form = point_form(cap_bump(0.9));
  JacobianCurrentEval ju = ju_eval(u, form);

  // det Du = 1 - 0.06*cos(x2)*sin(x1), integrated against the cap on a
  // fine quadrature lattice.
  dsl::Expression psi = dsl::Expression::parse(cap_bump(0.9), 2);
  double oracle = 0.0;
  const int q = 400;
  const double h = 2.0 / q;
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j < q; ++j) {
      const double x1 = -1.0 + (i + 0.5) * h;
      const double x2 = -1.0 + (j + 0.5) * h;
      const double z[] = {x1, x2};
      oracle += (1.0 - 0.06 * std::cos(x2) * std::sin(x1)) * psi.evaluate(z);
    }
  }
  oracle *= h * h;

  CHECK(ju.value == doctest::Approx(oracle).epsilon(0.005));
  REQUIRE(ju.breakdown.size() == 1);
  CHECK(ju.breakdown[0].value == ju.value);
}

TEST_CASE("vortex jacobian concentrates the ball mass") {
  BoxGrid g = square(-1.0, 1.0, 64);
  dsl::Expression psi = dsl::Expression::parse("bump(0, 0; 0.5)", 2);
  const double origin[] = {0.0, 0.0};
  const double target = 3.14159265358979312 * psi.evaluate(origin);

  JacobianCurrentEval ju = ju_eval(vortex_map(g), point_form("bump(0, 0; 0.5)"));
  CHECK(ju.value == doctest::Approx(target).epsilon(0.03));
}

TEST_CASE("mollified vortices approach the point mass monotonically") {
  BoxGrid g = square(-1.0, 1.0, 64);
  SampledMap u = vortex_map(g);
  DomainForm form = point_form("bump(0, 0; 0.5)");
  const double target = 3.14159265358979312;

  double radii[] = {0.2, 0.1, 0.05};
  double dev[3];
  for (int i = 0; i < 3; ++i) {
    SampledMap soft = mollify(u, radii[i]);
    dev[i] = std::abs(ju_eval(soft, form).value - target);
  }
  CHECK(dev[1] < dev[0]);
  CHECK(dev[2] < dev[1]);
}

TEST_CASE("jacobian pairing agrees with the pushforward routes") {
  BoxGrid g = square(-1.0, 1.0, 32);
  SampledMap u = vortex_map(g);
  const std::string src = cap_bump(0.25);

  JacobianCurrentEval ju = ju_eval(u, point_form(src));
  TestFunction psi = sample_test_function(dsl::Expression::parse(src, 2), g, 0.0);
  PushforwardComparison pf = pushforward_check(u, MultiIndex(2), MultiIndex({1, 2}, 2), psi);

  // Same quadrature on both sides, so the minor route matches exactly.
  CHECK(ju.value == pf.minor_route);
  CHECK(std::abs(ju.value - pf.boundary_route) <= 1e-10 * std::abs(ju.value));
}

TEST_CASE("vortex line in three variables splits across directions") {
  BoxGrid g = boxn(3, -1.0, 1.0, 24);
  SampledMap u = sample_map(
      dsl::VectorExpression::parse(
          std::vector<std::string>{"x1 / sqrt(x1^2 + x2^2)", "x2 / sqrt(x1^2 + x2^2)"}, 3),
      g);

  dsl::Expression psi = dsl::Expression::parse("bump(0, 0, 0; 0.8)", 3);
  std::vector<DomainFormTerm> terms;
  terms.push_back({MultiIndex({3}, 3), psi});
  DomainForm form(3, 1, terms);

  JacobianCurrentEval ju = ju_eval(u, form);
  REQUIRE(ju.breakdown.size() == 3);
  CHECK(ju.breakdown[0].value == 0.0);
  CHECK(ju.breakdown[1].value == 0.0);
  CHECK(ju.breakdown[2].value == ju.value);

  // The singular set is the x3 axis, so the pairing integrates psi along it.
  double line = 0.0;
  const int q = 2000;
  const double h = 2.0 / q;
  for (int i = 0; i < q; ++i) {
    const double z[] = {0.0, 0.0, -1.0 + (i + 0.5) * h};
    line += psi.evaluate(z);
  }
  line *= h * 3.14159265358979312;
  CHECK(ju.value == doctest::Approx(line).epsilon(0.05));
}

// ==== level set extraction ====

TEST_CASE("affine levels are straight segments oriented down the cylinder") {
  BoxGrid g = square(-1.0, 1.0, 32);
  SampledMap u = plane_map(g, "2*x1 + x2", "x2");
  SampledMap ext = extend_map(u, cylinder_grid(g, 32));

  LevelSetExtractor extractor(ext);
  CHECK(extractor.dim() == 3);
  CHECK(extractor.components() == 2);

  // y = A(0.1, 0.05); the averaged extension reproduces the affine map away
  // from the walls, so low pieces sit over the preimage with coarea factor
  // det A and orientation -e3.
  const double y[] = {0.25, 0.05};
  LevelSetCurrent cur = extractor.extract(y);
  CHECK(cur.dim == 3);
  CHECK(cur.piece_dim == 1);
  CHECK(cur.degenerate_crossings == 0);
  REQUIRE(!cur.pieces.empty());

  int low = 0;
  for (const LevelPiece& p : cur.pieces) {
    if (p.a[2] > 0.2 || p.b[2] > 0.2) continue;
    ++low;
    CHECK(p.a[0] == doctest::Approx(0.1).epsilon(1e-5));
    CHECK(p.a[1] == doctest::Approx(0.05).epsilon(1e-5));
    CHECK(p.b[0] == doctest::Approx(0.1).epsilon(1e-5));
    CHECK(p.jacobian == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(p.zeta[0] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(p.zeta[1] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(p.zeta[2] == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(p.in_core);
    CHECK(p.b[2] < p.a[2]);  // b - a follows zeta, which points down the cylinder
  }
  CHECK(low >= 3);
}

TEST_CASE("extracted curves terminate on the complex hull") {
  BoxGrid g = square(0.0, 1.0, 32);
  SampledMap u = plane_map(g, "x1", "x2");
  BoxGrid g3 = cylinder_grid(g, 32);
  SampledMap ext = extend_map(u, g3);

  const double y[] = {0.37, 0.55};
  LevelSetCurrent cur = level_set_current(ext, y);
  REQUIRE(!cur.pieces.empty());

  // Signed endpoint sums cancel along the curve; only its two ends survive,
  // and both must lie on a face of the sampled hull.
  std::map<std::array<long, 3>, int> net;
  auto key = [](const std::array<double, kMaxGridDim>& p) {
    return std::array<long, 3>{std::llround(p[0] * 1e12), std::llround(p[1] * 1e12),
                               std::llround(p[2] * 1e12)};
  };
  for (const LevelPiece& p : cur.pieces) {
    net[key(p.a)] -= 1;
    net[key(p.b)] += 1;
  }

  int ends = 0;
  for (const auto& [pt, count] : net) {
    if (count == 0) continue;
    ++ends;
    CHECK(std::abs(count) == 1);
    bool on_face = false;
    for (int a = 0; a < 3; ++a) {
      const double v = pt[a] * 1e-12;
      if (std::abs(v - g3.coord(a, 0)) < 1e-9) on_face = true;
      if (std::abs(v - g3.coord(a, g3.res(a) - 1)) < 1e-9) on_face = true;
    }
    CHECK(on_face);
  }
  CHECK(ends == 2);
}

TEST_CASE("levels outside the sampled range are empty") {
  BoxGrid g = square(0.0, 1.0, 12);
  SampledMap ext = extend_map(plane_map(g, "x1", "x2"), cylinder_grid(g, 12));
  const double y[] = {5.0, 5.0};
  LevelSetCurrent cur = level_set_current(ext, y);
  CHECK(cur.pieces.empty());
  CHECK(cur.degenerate_crossings == 0);
}

TEST_CASE("value collisions resolve by perturbation") {
  BoxGrid g = square(-1.0, 1.0, 32);
  SampledMap ext = extend_map(plane_map(g, "2*x1 + x2", "x2"), cylinder_grid(g, 32));
  BoxGrid g3 = ext.grid();

  // Aim exactly at a sampled value pair; the tie must still extract cleanly.
  int idx[] = {20, 13, 7};
  const long node = flatten(g3, idx);
  const double y[] = {ext.value(node, 0), ext.value(node, 1)};
  LevelSetCurrent cur = level_set_current(ext, y);
  CHECK(!cur.pieces.empty());
  CHECK(cur.degenerate_crossings == 0);
}

TEST_CASE("csv export lists one row per piece") {
  BoxGrid g = square(-1.0, 1.0, 16);
  SampledMap ext = extend_map(vortex_map(g), cylinder_grid(g, 16));
  const double y[] = {0.3, -0.2};
  LevelSetCurrent cur = level_set_current(ext, y);
  REQUIRE(!cur.pieces.empty());

  std::ostringstream out;
  write_level_set_csv(cur, out);
  std::istringstream in(out.str());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "a1,a2,a3,b1,b2,b3,zeta1,zeta2,zeta3,measure,jacobian,core");

  long rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    long commas = 0;
    for (char c : line)
      if (c == ',') ++commas;
    CHECK(commas == 11);
  }
  CHECK(rows == static_cast<long>(cur.pieces.size()));
}

TEST_CASE("extraction rejects unsupported shapes") {
  BoxGrid g = square(0.0, 1.0, 8);
  SampledMap one = sample_map(dsl::VectorExpression::parse(std::vector<std::string>{"x1"}, 2), g);
  CHECK_THROWS_AS(LevelSetExtractor{one}, std::invalid_argument);

  BoxGrid g4 = boxn(4, 0.0, 1.0, 4);
  SampledMap thin =
      sample_map(dsl::VectorExpression::parse(std::vector<std::string>{"x1", "x2"}, 4), g4);
  CHECK_THROWS_AS(LevelSetExtractor{thin}, std::invalid_argument);

  SampledMap u = plane_map(g, "x1", "x2");
  CHECK_THROWS_AS(LevelSetExtractor(u, 1.5), std::invalid_argument);
}

// ==== coarea checks ====

TEST_CASE("weak coarea holds for an affine map") {
  BoxGrid g = square(-1.0, 1.0, 48);
  SampledMap u = plane_map(g, "2*x1 + x2", "x2");
  CoareaOptions opts;
  opts.mc.samples = 16384;
  opts.mc.seed = 1;

  CoareaCheck res = weak_coarea_check(u, point_form("bump(0, 0; 0.5)"), opts);
  CHECK(res.samples == 16384);
  CHECK(res.degenerate_levels == 0);
  CHECK(res.lhs > 0.2);
  CHECK(res.error <= 0.015);
}

TEST_CASE("weak coarea holds for the vortex") {
  BoxGrid g = square(-1.0, 1.0, 48);
  SampledMap u = vortex_map(g);
  CoareaOptions opts;
  opts.mc.samples = 256;
  opts.mc.seed = 7;

  CoareaCheck res = weak_coarea_check(u, point_form("bump(0, 0; 0.5)"), opts);
  CHECK(res.lhs == doctest::Approx(3.14159265358979312).epsilon(0.03));
  CHECK(res.error <= 0.04);
}

TEST_CASE("chain rule tracks scaling and rotation") {
  BoxGrid g = square(-1.0, 1.0, 64);
  SampledMap u = vortex_map(g);
  DomainForm form = point_form("bump(0, 0; 0.5)");
  CoareaOptions opts;
  opts.mc.samples = 256;
  opts.mc.seed = 7;
  const double pi = 3.14159265358979312;

  dsl::VectorExpression twice =
      dsl::VectorExpression::parse(std::vector<std::string>{"2*x1", "2*x2"}, 2);
  CoareaCheck doubled = chain_rule_check(u, twice, form, opts);
  CHECK(doubled.lhs == doctest::Approx(4.0 * pi).epsilon(0.03));
  CHECK(doubled.error <= 0.03);

  dsl::VectorExpression rot = dsl::VectorExpression::parse(
      std::vector<std::string>{"cos(0.7)*x1 - sin(0.7)*x2", "sin(0.7)*x1 + cos(0.7)*x2"}, 2);
  CoareaCheck rotated = chain_rule_check(u, rot, form, opts);
  CHECK(rotated.lhs == doctest::Approx(pi).epsilon(0.03));
  CHECK(rotated.error <= 0.03);

  // The identity composition reuses the plain weak check; only the numeric
  // derivative of F separates the two sides, by rounding alone.
  dsl::VectorExpression id = dsl::VectorExpression::parse(std::vector<std::string>{"x1", "x2"}, 2);
  CoareaCheck same = chain_rule_check(u, id, form, opts);
  CoareaCheck weak = weak_coarea_check(u, form, opts);
  CHECK(same.lhs == weak.lhs);
  CHECK(same.rhs == doctest::Approx(weak.rhs).epsilon(1e-9));
}

TEST_CASE("chain rule rejects bad compositions") {
  BoxGrid g = square(-1.0, 1.0, 16);
  SampledMap u = vortex_map(g);
  DomainForm form = point_form("bump(0, 0; 0.5)");

  dsl::VectorExpression wide = dsl::VectorExpression::parse(
      std::vector<std::string>{"x1", "x2", "x1 + x2"}, 3);
  CHECK_THROWS_AS(chain_rule_check(u, wide, form), std::invalid_argument);

  // Derivative blows up at sampled values, which must be caught up front.
  dsl::VectorExpression pole =
      dsl::VectorExpression::parse(std::vector<std::string>{"sqrt(x1 - 5)", "x2"}, 2);
  CHECK_THROWS_AS(chain_rule_check(u, pole, form), std::invalid_argument);
}

TEST_CASE("strong coarea recovers closed-form masses") {
  MonteCarloOptions mc;
  mc.samples = 8192;
  mc.seed = 11;

  BoxGrid gs = square(0.0, 1.0, 128);
  CoareaCheck fold = strong_coarea_check(plane_map(gs, "x1^2", "x2"), mc);
  CHECK(fold.lhs == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fold.error <= 0.025);

  BoxGrid ga = square(-1.0, 1.0, 96);
  CoareaCheck affine =
      strong_coarea_check(plane_map(ga, "1.3*x1 - 0.4*x2", "0.2*x1 + 0.9*x2"), mc);
  CHECK(affine.lhs == doctest::Approx(5.0).epsilon(1e-10));
  CHECK(affine.error <= 0.03);

  CoareaCheck still = strong_coarea_check(plane_map(square(0.0, 1.0, 16), "0.3", "0.7"), mc);
  CHECK(still.lhs == 0.0);
  CHECK(still.rhs == 0.0);
  CHECK(still.error == 0.0);
}

TEST_CASE("strong coarea counts level segments in three variables") {
  BoxGrid g = boxn(3, 0.0, 1.0, 12);
  SampledMap u = sample_map(
      dsl::VectorExpression::parse(std::vector<std::string>{"x1", "x2"}, 3), g);
  MonteCarloOptions mc;
  mc.samples = 1024;
  mc.seed = 11;

  CoareaCheck res = strong_coarea_check(u, mc);
  CHECK(res.lhs == doctest::Approx(1.0).epsilon(1e-12));
  // Levels live inside the hull of the sample points, a (1 - h)^3 box, so
  // the level-measure side sees the truncated mass.
  const double h = 1.0 / 12.0;
  const double hull = (1.0 - h) * (1.0 - h) * (1.0 - h);
  CHECK(res.rhs == doctest::Approx(res.lhs * hull).epsilon(0.02));
}

TEST_CASE("strong coarea rejects masked or flat shapes") {
  MonteCarloOptions mc;
  mc.samples = 64;

  BoxGrid g = square(-1.0, 1.0, 12);
  SampledMap holes = plane_map(g, "sqrt(x1)", "x2");
  CHECK(holes.masked_count() > 0);
  CHECK_THROWS_AS(strong_coarea_check(holes, mc), DegenerateInputError);

  BoxGrid g4 = boxn(4, 0.0, 1.0, 4);
  SampledMap thin =
      sample_map(dsl::VectorExpression::parse(std::vector<std::string>{"x1", "x2"}, 4), g4);
  CHECK_THROWS_AS(strong_coarea_check(thin, mc), std::invalid_argument);
}

// ==== mass lower bound ====

TEST_CASE("mass lower bound grows along nested dictionaries") {
  BoxGrid g = square(-1.0, 1.0, 64);
  SampledMap u = vortex_map(g);

  std::vector<DomainForm> dict;
  dict.push_back(point_form(cap_bump(0.25)));
  dict.push_back(point_form(cap_bump(0.49)));
  dict.push_back(point_form(cap_bump(0.9)));

  const double m1 = bnv_mass(u, std::span<const DomainForm>(dict.data(), 1));
  const double m2 = bnv_mass(u, std::span<const DomainForm>(dict.data(), 2));
  const double m3 = bnv_mass(u, dict);
  CHECK(m1 < m2);
  CHECK(m2 < m3);
  CHECK(m3 == doctest::Approx(3.14159265358979312).epsilon(0.03));

  SampledMap smooth = plane_map(g, "x1 + 0.3*sin(x2)", "x2 - 0.2*cos(x1)");
  DomainForm widest = point_form(cap_bump(0.9));
  std::vector<DomainForm> single{widest};
  CHECK(bnv_mass(smooth, single) == ju_eval(smooth, widest).value);

  CHECK_THROWS_AS(bnv_mass(u, std::span<const DomainForm>()), std::invalid_argument);
}

// ==== determinism ====

TEST_CASE("monte carlo reports are reproducible") {
  BoxGrid g = square(-1.0, 1.0, 32);
  SampledMap u = vortex_map(g);
  DomainForm form = point_form("bump(0, 0; 0.5)");

  CoareaOptions a;
  a.mc.samples = 64;
  a.mc.seed = 3;
  a.mc.threads = 1;
  a.minor.threads = 1;
  CoareaOptions b = a;
  b.mc.threads = 3;
  b.minor.threads = 3;

  CoareaCheck ra = weak_coarea_check(u, form, a);
  CoareaCheck rb = weak_coarea_check(u, form, b);
  CHECK(ra.lhs == rb.lhs);
  CHECK(ra.rhs == rb.rhs);

  CoareaOptions c = a;
  c.mc.seed = 4;
  CoareaCheck rc = weak_coarea_check(u, form, c);
  CHECK(rc.lhs == ra.lhs);
  CHECK(rc.rhs != ra.rhs);
}

}  // TEST_SUITE
