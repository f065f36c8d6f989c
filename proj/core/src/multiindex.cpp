#include "distcurrents/multiindex.hpp"

#include <algorithm>
#include <stdexcept>

namespace distcurrents {

namespace {

void check_ambient(int ambient) {
  if (ambient < 0 || ambient > 32) {
    throw std::invalid_argument("multi-index ambient dimension must lie in [0, 32], got " +
                                std::to_string(ambient));
  }
}

}  // namespace

MultiIndex::MultiIndex(int ambient) : ambient_(ambient) { check_ambient(ambient); }

MultiIndex::MultiIndex(std::span<const int> labels, int ambient) : ambient_(ambient) {
  check_ambient(ambient);
  entries_.reserve(labels.size());
  int prev = 0;
  for (int v : labels) {
    if (v < 1 || v > ambient) {
      throw std::invalid_argument("multi-index label " + std::to_string(v) +
                                  " outside [1, " + std::to_string(ambient) + "]");
    }
    if (v <= prev) {
      throw std::invalid_argument("multi-index labels must be strictly increasing");
    }
    prev = v;
    entries_.push_back(v - 1);
  }
}

MultiIndex::MultiIndex(std::initializer_list<int> labels, int ambient)
    : MultiIndex(std::span<const int>(labels.begin(), labels.size()), ambient) {}

MultiIndex MultiIndex::full(int ambient) {
  MultiIndex m(ambient);
  m.entries_.resize(ambient);
  for (int i = 0; i < ambient; ++i) m.entries_[i] = i;
  return m;
}

int MultiIndex::axis(int i) const {
  if (i < 0 || i >= size()) throw std::invalid_argument("multi-index position out of range");
  return entries_[i];
}

int MultiIndex::label(int i) const { return axis(i) + 1; }

bool MultiIndex::contains(int label) const {
  return std::binary_search(entries_.begin(), entries_.end(), label - 1);
}

MultiIndex MultiIndex::remove(int label) const {
  if (!contains(label)) {
    throw std::invalid_argument("cannot remove absent label " + std::to_string(label) +
                                " from " + to_string());
  }
  MultiIndex out(ambient_);
  out.entries_.reserve(entries_.size() - 1);
  for (int e : entries_) {
    if (e != label - 1) out.entries_.push_back(e);
  }
  return out;
}

MultiIndex MultiIndex::add(int label) const {
  if (label < 1 || label > ambient_) {
    throw std::invalid_argument("label " + std::to_string(label) + " outside ambient [1, " +
                                std::to_string(ambient_) + "]");
  }
  if (contains(label)) {
    throw std::invalid_argument("label " + std::to_string(label) + " already present in " +
                                to_string());
  }
  MultiIndex out(ambient_);
  out.entries_.reserve(entries_.size() + 1);
  bool placed = false;
  for (int e : entries_) {
    if (!placed && e > label - 1) {
      out.entries_.push_back(label - 1);
      placed = true;
    }
    out.entries_.push_back(e);
  }
  if (!placed) out.entries_.push_back(label - 1);
  return out;
}

MultiIndex MultiIndex::complement() const {
  MultiIndex out(ambient_);
  out.entries_.reserve(ambient_ - size());
  std::size_t k = 0;
  for (int e = 0; e < ambient_; ++e) {
    if (k < entries_.size() && entries_[k] == e) {
      ++k;
    } else {
      out.entries_.push_back(e);
    }
  }
  return out;
}

MultiIndex MultiIndex::widen(int new_ambient) const {
  if (new_ambient < ambient_) {
    throw std::invalid_argument("widen target must not shrink the ambient dimension");
  }
  MultiIndex out(new_ambient);
  out.entries_ = entries_;
  return out;
}

std::string MultiIndex::to_string() const {
  if (empty()) return "0";
  std::string s = "(";
  for (int i = 0; i < size(); ++i) {
    if (i) s += ',';
    s += std::to_string(entries_[i] + 1);
  }
  s += ')';
  return s;
}

std::vector<MultiIndex> enumerate_indices(int k, int n) {
  check_ambient(n);
  if (k < 0 || k > n) {
    throw std::invalid_argument("cannot enumerate " + std::to_string(k) +
                                "-indices in ambient dimension " + std::to_string(n));
  }
  std::vector<MultiIndex> out;
  std::vector<int> pick(k);
  for (int i = 0; i < k; ++i) pick[i] = i + 1;
  while (true) {
    out.emplace_back(std::span<const int>(pick.data(), pick.size()), n);
    // advance the rightmost label that still has room
    int i = k - 1;
    while (i >= 0 && pick[i] == n - (k - 1 - i)) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
  return out;
}

Sign sigma(const MultiIndex& a, const MultiIndex& b) {
  if (a.ambient() != b.ambient()) {
    throw std::invalid_argument("sigma requires matching ambient dimensions");
  }
  // Both tuples are internally sorted, so the permutation sorting (a, b) has
  // one inversion per pair a_i > b_j. Disjointness rules out ties.
  long inversions = 0;
  for (int i = 0; i < a.size(); ++i) {
    for (int j = 0; j < b.size(); ++j) {
      if (a.axis(i) == b.axis(j)) {
        throw std::invalid_argument("sigma requires disjoint indices, both contain label " +
                                    std::to_string(a.label(i)));
      }
      if (a.axis(i) > b.axis(j)) ++inversions;
    }
  }
  return Sign{(inversions % 2 == 0) ? 1 : -1};
}

}  // namespace distcurrents
