#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace fracvis {

template <class S>
struct Interval {
  S lo;
  S hi;

  friend bool operator==(const Interval& a, const Interval& b) {
    return a.lo == b.lo && a.hi == b.hi;
  }
};

// Canonical union of closed intervals over an exactly ordered scalar
// (int64_t for fixed-denominator shadow coordinates, Rat for arcs).
// Invariants: sorted, pairwise disjoint, touching intervals merged, so
// consecutive members satisfy hi_i < lo_{i+1} strictly.
//
// Closed-set convention: a point query on a stored endpoint counts as
// covered, but "uncovered" reports only components of positive length,
// closed up.  Occlusion sweeps treat zero-length leftovers (grazing
// contact) as fully occluded.
template <class S>
class IntervalUnion {
 public:
  void insert(S lo, S hi) {
    if (hi < lo) throw std::invalid_argument("interval with hi < lo");
    size_t i = first_reaching(lo);
    size_t j = i;
    while (j < xs_.size() && xs_[j].lo <= hi) {
      if (xs_[j].lo < lo) lo = xs_[j].lo;
      if (hi < xs_[j].hi) hi = xs_[j].hi;
      ++j;
    }
    if (i == j) {
      xs_.insert(xs_.begin() + i, Interval<S>{lo, hi});
    } else {
      xs_[i] = Interval<S>{lo, hi};
      xs_.erase(xs_.begin() + i + 1, xs_.begin() + j);
    }
  }

  // Positive-length components of [lo, hi] minus the union, closed up.
  std::vector<Interval<S>> uncovered(S lo, S hi) const {
    if (hi < lo) throw std::invalid_argument("interval with hi < lo");
    std::vector<Interval<S>> out;
    S cursor = lo;
    for (size_t i = first_reaching(lo); i < xs_.size(); ++i) {
      const auto& iv = xs_[i];
      if (iv.hi < cursor || iv.hi == cursor) continue;
      if (hi < iv.lo) break;
      if (cursor < iv.lo) {
        S end = iv.lo < hi ? iv.lo : hi;
        if (cursor < end) out.push_back(Interval<S>{cursor, end});
      }
      cursor = iv.hi < hi ? iv.hi : hi;
      if (!(cursor < hi)) return out;
    }
    if (cursor < hi) out.push_back(Interval<S>{cursor, hi});
    return out;
  }

  S uncovered_length(S lo, S hi) const {
    S total = S(0);
    for (const auto& iv : uncovered(lo, hi)) total += iv.hi - iv.lo;
    return total;
  }

  bool covers(S lo, S hi) const { return uncovered(lo, hi).empty(); }

  bool contains_point(S z) const {
    size_t i = first_reaching(z);
    return i < xs_.size() && !(z < xs_[i].lo);
  }

  S total_length() const {
    S total = S(0);
    for (const auto& iv : xs_) total += iv.hi - iv.lo;
    return total;
  }

  const std::vector<Interval<S>>& pieces() const { return xs_; }
  bool empty() const { return xs_.empty(); }
  size_t size() const { return xs_.size(); }

 private:
  // Index of the first interval with hi >= z.
  size_t first_reaching(const S& z) const {
    auto it = std::partition_point(xs_.begin(), xs_.end(),
                                   [&](const Interval<S>& iv) { return iv.hi < z; });
    return size_t(it - xs_.begin());
  }

  std::vector<Interval<S>> xs_;
};

template <typename S>
void union_insert(IntervalUnion<S>& u, const Interval<S>& piece) {
  u.insert(piece.lo, piece.hi);
}

// Relative complement piece \ u as a canonical union of closed components.
template <typename S>
IntervalUnion<S> uncovered_part(const IntervalUnion<S>& u,
                                const Interval<S>& piece) {
  IntervalUnion<S> out;
  for (const auto& c : u.uncovered(piece.lo, piece.hi)) out.insert(c.lo, c.hi);
  return out;
}

}  // namespace fracvis
