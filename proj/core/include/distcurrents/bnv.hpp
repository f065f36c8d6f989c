#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "distcurrents/distminor.hpp"
#include "distcurrents/expr.hpp"
#include "distcurrents/extension.hpp"
#include "distcurrents/grid.hpp"
#include "distcurrents/multiindex.hpp"

namespace distcurrents {

// ==== forms on the domain box ====

/// One term of a form living on the domain alone: a direction subset of the
/// domain axes and a coefficient reading just the x slots.
struct DomainFormTerm {
  MultiIndex alpha;
  dsl::Expression coefficient;
};

class DomainForm {
 public:
  /// Terms must be pairwise distinct in alpha, carry the declared degree,
  /// and use arity-dim coefficients.
  DomainForm(int dim, int degree, std::vector<DomainFormTerm> terms);

  int dim() const noexcept { return n_; }
  int degree() const noexcept { return degree_; }
  const std::vector<DomainFormTerm>& terms() const noexcept { return terms_; }

 private:
  int n_ = 0;
  int degree_ = 0;
  std::vector<DomainFormTerm> terms_;
};

// ==== distributional Jacobian ====

struct JacobianTermValue {
  MultiIndex alpha;
  double value = 0.0;
};

/// Pairing of the distributional Jacobian current with a domain form, plus
/// the per-direction breakdown over every index of the form's degree; value
/// is the plain sum of the breakdown entries.
struct JacobianCurrentEval {
  double value = 0.0;
  std::vector<JacobianTermValue> breakdown;
};

/// Sums sigma(alpha, complement) times the full-row distributional minor in
/// the complementary directions against each coefficient. Requires a map
/// with 2 <= components <= dim and a form of degree dim - components.
JacobianCurrentEval ju_eval(const SampledMap& u, const DomainForm& omega,
                            const DivMinorOptions& opts = {});

// ==== level set extraction ====

/// One oriented piece of an extracted level set: a segment from a to b, or a
/// single crossing with a == b. zeta is the unit orientation; for point
/// crossings it degenerates to the crossing sign stored in zeta[0]. measure
/// is the segment length, or 1 per point. jacobian is the local coarea
/// factor, the euclidean norm of the maximal-minor vector.
struct LevelPiece {
  std::array<double, kMaxGridDim> a{};
  std::array<double, kMaxGridDim> b{};
  std::array<double, kMaxGridDim> zeta{};
  double measure = 0.0;
  double jacobian = 0.0;
  bool in_core = true;
};

struct LevelSetCurrent {
  std::vector<double> y;
  int dim = 0;        // ambient dimension the pieces live in
  int piece_dim = 0;  // 0 for point crossings, 1 for segments
  std::vector<LevelPiece> pieces;
  long degenerate_crossings = 0;
  double max_jacobian = 0.0;
};

/// Marching simplices over the Kuhn triangulation of the sample lattice.
/// Supports maps with 2 or 3 components whose level sets are points or
/// segments (grid dimension equal to the component count, or one more).
/// Ties against sample values are broken by a deterministic hash
/// perturbation of the values; a level that stays ambiguous after the
/// retry budget raises DegenerateInputError. Build once per map; extract()
/// is const and safe to call from several threads.
class LevelSetExtractor {
 public:
  /// core_threshold flags pieces whose coarea factor falls below this
  /// fraction of the largest one in the same extraction.
  explicit LevelSetExtractor(const SampledMap& w, double core_threshold = 1e-8);

  LevelSetCurrent extract(std::span<const double> y) const;

  /// Per-component [lo, hi] over the unmasked samples.
  void value_range(int component, double& lo, double& hi) const;

  int dim() const noexcept { return d_; }
  int components() const noexcept { return N_; }

 private:
  bool solve_crossing(std::span<const long> nodes, std::span<const double> y,
                      double amp, std::uint64_t salt,
                      std::array<double, kMaxGridDim>& pos) const;
  bool trace(std::span<const double> y, double amp, std::uint64_t salt,
             LevelSetCurrent& out) const;

  const SampledMap* w_;
  int d_ = 0;
  int N_ = 0;
  int kstar_ = 0;  // piece dimension
  double threshold_;
  std::array<long, kMaxGridDim> node_stride_{};
  std::array<int, kMaxGridDim> cubes_{};
  long cube_count_ = 0;
  std::array<double, kMaxMatrixDim> lo_{};
  std::array<double, kMaxMatrixDim> hi_{};
  std::array<double, kMaxMatrixDim> scale_{};
  std::vector<std::array<int, kMaxGridDim>> perms_;
  std::vector<long> bucket_start_;
  std::vector<long> bucket_cubes_;
};

/// One-shot extraction from an already extended (or plain) sampled map.
LevelSetCurrent level_set_current(const SampledMap& extended, std::span<const double> y);

/// Writes pieces as CSV: endpoints, orientation, measure, jacobian, core flag.
void write_level_set_csv(const LevelSetCurrent& current, std::ostream& out);

// ==== coarea and chain rule ====

struct MonteCarloOptions {
  int samples = 256;
  std::uint64_t seed = 1;
  int threads = 0;
};

/// Two-sided comparison: lhs from the distributional pairing, rhs from the
/// Monte Carlo level-set side, error = |lhs - rhs| / (|lhs| + 1e-12).
/// samples is the realized stratified count; degenerate_levels counts draws
/// whose extraction stayed ambiguous and contributed zero.
struct CoareaCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double error = 0.0;
  long samples = 0;
  long degenerate_levels = 0;
};

struct CoareaOptions {
  MonteCarloOptions mc{};
  DivMinorOptions minor{};
};

/// Distributional Jacobian against the averaged extension's level currents:
/// lhs = ju_eval, rhs = volume-weighted Monte Carlo mean over levels y of
/// the level current paired with d(omega extended by the cutoff ramp).
/// Requires a square-dimensional map (2 or 3 components).
CoareaCheck weak_coarea_check(const SampledMap& u, const DomainForm& omega,
                              const CoareaOptions& opts = {});

/// Composition rule: lhs = ju_eval of F(u) sampled nodewise, rhs reweights
/// the level currents of u itself by det DF at each sampled level. F must
/// map the target space to itself with finite derivatives at every sample.
CoareaCheck chain_rule_check(const SampledMap& u, const dsl::VectorExpression& F,
                             const DomainForm& omega, const CoareaOptions& opts = {});

/// Unsigned coarea mass check on the map's own grid: lhs integrates the sum
/// of absolute maximal minors of Du, rhs averages the level-set measure over
/// Monte Carlo levels. Requires an unmasked map.
CoareaCheck strong_coarea_check(const SampledMap& u, const MonteCarloOptions& opts = {});

/// Largest ju_eval pairing over the dictionary; a lower bound for the mass
/// when every dictionary form has comass at most one.
double bnv_mass(const SampledMap& u, std::span<const DomainForm> dictionary,
                const DivMinorOptions& opts = {});

}  // namespace distcurrents
