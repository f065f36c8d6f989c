#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "distcurrents/expr.hpp"
#include "distcurrents/exterior.hpp"

namespace distcurrents {

inline constexpr int kMaxGridDim = 4;

/// Axis-aligned box discretized into res[a] cells per axis. Sample nodes sit
/// at cell midpoints, so boundary faces and interior singularity-prone points
/// (such as the origin for even resolutions) never coincide with a node.
/// Linear node order is row-major: the last axis varies fastest.
class BoxGrid {
 public:
  BoxGrid() = default;
  BoxGrid(std::span<const double> lower, std::span<const double> upper,
          std::span<const int> res);

  int dim() const noexcept { return dim_; }
  long node_count() const noexcept;
  int res(int axis) const { return res_[axis]; }
  double lower(int axis) const { return lower_[axis]; }
  double upper(int axis) const { return upper_[axis]; }
  double extent(int axis) const { return upper_[axis] - lower_[axis]; }
  double spacing(int axis) const { return (upper_[axis] - lower_[axis]) / res_[axis]; }
  double cell_volume() const;
  double min_spacing() const;

  long flatten(std::span<const int> idx) const;
  void unflatten(long node, std::span<int> idx) const;

  /// Midpoint coordinate of cell i along an axis: lower + (i + 1/2) h.
  double coord(int axis, int i) const { return lower_[axis] + (i + 0.5) * spacing(axis); }
  void node_coord(std::span<const int> idx, std::span<double> out) const;

  /// Distance from x to the nearest boundary face (negative outside the box).
  double boundary_distance(std::span<const double> x) const;

  bool same_geometry(const BoxGrid& other) const;

 private:
  int dim_ = 0;
  std::array<double, kMaxGridDim> lower_{}, upper_{};
  std::array<int, kMaxGridDim> res_{};
};

/// Vector-valued samples on a BoxGrid, node-major then component. Nodes where
/// sampling produced a non-finite component carry a mask bit; masked nodes
/// are excluded from quadrature and stencils.
class SampledMap {
 public:
  SampledMap() = default;
  SampledMap(BoxGrid grid, int components);

  const BoxGrid& grid() const noexcept { return grid_; }
  int components() const noexcept { return components_; }

  double value(long node, int c) const { return values_[node * components_ + c]; }
  double& value(long node, int c) { return values_[node * components_ + c]; }
  void values_at(long node, std::span<double> out) const;

  std::span<const double> raw() const noexcept { return values_; }
  std::span<double> raw() noexcept { return {values_.data(), values_.size()}; }

  bool has_mask() const noexcept { return !mask_.empty(); }
  bool masked(long node) const { return has_mask() && mask_[node] != 0; }
  void set_mask(long node);
  long masked_count() const;
  /// Marks every node with a non-finite component.
  void recompute_mask();

  /// Free-form origin note (expression text, file path); not serialized.
  std::string provenance;

 private:
  BoxGrid grid_;
  int components_ = 0;
  std::vector<double> values_;
  std::vector<unsigned char> mask_;
};

/// Samples a vector expression at every node. Arity must match grid dim.
SampledMap sample_map(const dsl::VectorExpression& f, const BoxGrid& grid, int threads = 0);

/// Node-wise a - b on a shared grid with matching component counts. The
/// result is masked wherever either operand is.
SampledMap map_difference(const SampledMap& a, const SampledMap& b);

/// Compactly supported scalar test data: values plus a gradient per node
/// (layout node*dim + axis) and the support margin away from the boundary
/// inside which every value must vanish.
class TestFunction {
 public:
  TestFunction(BoxGrid grid, std::vector<double> values, std::vector<double> gradient,
               double support_margin);

  const BoxGrid& grid() const noexcept { return grid_; }
  double value(long node) const { return values_[node]; }
  double gradient(long node, int axis) const { return gradient_[node * grid_.dim() + axis]; }
  std::span<const double> values() const noexcept { return values_; }
  double support_margin() const noexcept { return margin_; }

  /// sup over nodes of the Euclidean gradient norm.
  double max_gradient_norm() const;

 private:
  BoxGrid grid_;
  std::vector<double> values_, gradient_;
  double margin_;
};

/// Samples psi and differentiates it on the grid (central differences inside,
/// second-order one-sided at the boundary layer). Throws if any node within
/// the support margin of the boundary carries a nonzero value.
TestFunction sample_test_function(const dsl::Expression& psi, const BoxGrid& grid,
                                  double support_margin, int threads = 0);

/// Dense Jacobian samples: rows = map components, cols = grid axes.
class JacobianField {
 public:
  JacobianField(BoxGrid grid, int rows);

  const BoxGrid& grid() const noexcept { return grid_; }
  int rows() const noexcept { return rows_; }
  Matrix matrix(long node) const;
  void set(long node, const Matrix& m);
  bool masked(long node) const { return !mask_.empty() && mask_[node] != 0; }
  void set_mask(long node);
  long masked_count() const;

  /// Stencil description, fixed for this implementation.
  static const char* scheme() { return "central-2 interior, one-sided-2 boundary"; }

 private:
  BoxGrid grid_;
  int rows_ = 0;
  std::vector<double> entries_;
  std::vector<unsigned char> mask_;
};

/// Second-order difference along one axis at position i of r samples with
/// step h: central inside, one-sided at the two ends. pick(j) reads the
/// sample at index j on that axis.
template <typename Pick>
double fd_axis(const Pick& pick, int i, int r, double h) {
  if (i > 0 && i + 1 < r) return (pick(i + 1) - pick(i - 1)) / (2.0 * h);
  if (i == 0) return (-3.0 * pick(0) + 4.0 * pick(1) - pick(2)) / (2.0 * h);
  return (3.0 * pick(r - 1) - 4.0 * pick(r - 2) + pick(r - 3)) / (2.0 * h);
}

/// Differentiates u on its own grid. Requires at least 3 cells per axis.
/// Nodes whose stencil touches a masked node are masked.
JacobianField jacobian(const SampledMap& u, int threads = 0);

/// Jacobian at one node without materializing the field. Returns false (and
/// leaves `out` unspecified) if the stencil touches a masked node.
bool jacobian_at(const SampledMap& u, std::span<const int> idx, Matrix& out);

struct IntegrateResult {
  double value = 0.0;
  long masked = 0;
};

/// Midpoint-rule integral of per-node samples: cell volume times the pairwise
/// sum of entries. Non-finite entries count as masked and are skipped.
IntegrateResult integrate(std::span<const double> node_values, const BoxGrid& grid);

}  // namespace distcurrents
