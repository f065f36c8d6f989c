#pragma once

#include <compare>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace distcurrents {

/// Permutation sign restricted to {-1, +1}.
struct Sign {
  int value = 1;

  constexpr Sign operator*(Sign other) const { return Sign{value * other.value}; }
  constexpr double operator*(double x) const { return value * x; }
  constexpr bool operator==(const Sign&) const = default;
};

/// Strictly increasing tuple of axis labels drawn from {1, ..., ambient}.
///
/// Construction and printing use 1-based labels; storage is 0-based so the
/// entries can index matrices and grids directly. The conversion happens
/// exactly once, in the constructor.
class MultiIndex {
 public:
  /// The empty index in the given ambient dimension.
  explicit MultiIndex(int ambient);

  /// From 1-based labels; must be strictly increasing within [1, ambient].
  MultiIndex(std::initializer_list<int> labels, int ambient);
  MultiIndex(std::span<const int> labels, int ambient);

  /// The full index (1, 2, ..., ambient).
  static MultiIndex full(int ambient);

  int ambient() const noexcept { return ambient_; }
  int size() const noexcept { return static_cast<int>(entries_.size()); }
  bool empty() const noexcept { return entries_.empty(); }

  /// 0-based storage entry, usable as a row/column/axis offset.
  int axis(int i) const;
  /// 1-based label, as written in formulas.
  int label(int i) const;

  bool contains(int label) const;

  /// Removes a label that must be present.
  MultiIndex remove(int label) const;
  /// Inserts a label that must be absent; result stays strictly increasing.
  MultiIndex add(int label) const;
  /// The complementary index within {1, ..., ambient}.
  MultiIndex complement() const;
  /// Same entries inside a strictly larger ambient dimension.
  MultiIndex widen(int new_ambient) const;

  auto operator<=>(const MultiIndex&) const = default;

  /// Renders 1-based labels, e.g. "(1,3)"; the empty index prints as "0".
  std::string to_string() const;

 private:
  int ambient_ = 0;
  std::vector<int> entries_;  // 0-based, strictly increasing
};

/// All multi-indices with k entries in ambient dimension n, in lexicographic
/// order of their label tuples. k = 0 yields exactly the empty index.
std::vector<MultiIndex> enumerate_indices(int k, int n);

/// Sign of the permutation that sorts the concatenation (a, b).
/// Requires disjoint indices in the same ambient dimension. When either
/// argument is empty the sign is +1.
Sign sigma(const MultiIndex& a, const MultiIndex& b);

}  // namespace distcurrents
