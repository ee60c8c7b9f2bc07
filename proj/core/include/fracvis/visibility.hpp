#pragma once

#include <cstdint>
#include <stdexcept>
#include <variant>
#include <vector>

#include "fracvis/geometry.hpp"
#include "fracvis/grid.hpp"
#include "fracvis/rational.hpp"

namespace fracvis {

using SightSpec = std::variant<LineSight, Viewpoint>;

// A marked square failed its witness verification where no recovery path
// exists; this signals an ordering bug, never a tolerable condition.
struct CertificationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Depth-n retained squares meeting the visible part of the depth-n
// approximation, with per-scale ancestor counts.
//
// counts[j] is the number of distinct level-j ancestors of marked
// squares, 0 <= j <= level.  witness_params[i] is the certified sight
// parameter for marked[i]: the shadow coordinate of the witness fiber
// (line sights) or the pseudo-angle of the witness ray (point sights).
struct VisibleCover {
  SightSpec sight;
  int level = 0;
  std::vector<DyadicSquare> marked;   // sorted by (ix, iy)
  std::vector<Rat> witness_params;    // parallel to marked
  std::vector<int64_t> counts;        // counts[j] = N_j, size level+1

  // Point sights only: the center-distance fast path failed witness
  // verification and the exact elementary-arc algorithm produced the
  // cover; the diff against the fast path is kept for audit.
  bool used_fallback = false;
  std::vector<DyadicSquare> fallback_added;
  std::vector<DyadicSquare> fallback_removed;
};

// Front-to-back sweep over the level-n squares ordered by <center, side*d>;
// a square is marked iff its shadow has an uncovered part of positive
// length.  Every marked square is witness-verified before returning;
// failure throws CertificationError.
VisibleCover visible_from_line(const PercolationTree& tree, int n,
                               const DirectionSpec& d, int side);

// Front-to-back sweep ordered by squared distance from x to square
// centers (ties by (ix, iy)).  The distance order is heuristic, so every
// marked square is witness-verified; on any failure the cover is
// recomputed by the exact elementary-arc algorithm and the discrepancy
// recorded in the fallback fields.
VisibleCover visible_from_point(const PercolationTree& tree, int n,
                                const Viewpoint& x);

// Reconstructs the stored witness ray of a marked square and re-verifies
// that its first hit over all level-n squares is that square.  Throws
// CertificationError on failure and std::invalid_argument if sq is not
// marked.
Ray witness_ray(const VisibleCover& cover, const DyadicSquare& sq,
                const PercolationTree& tree, int n);

// Casts R sight rays with exact rational parameters evenly spaced across
// the shadow of the unit square (line sights) or the direction cone to it
// (point sights) and returns the sorted set of first-hit squares.  Rays
// whose parameter coincides exactly with a shadow endpoint graze some
// square and certify only zero-length visibility, so they are skipped;
// the result is therefore a subset of any correct cover's marked set.
std::vector<DyadicSquare> ray_cast_oracle(const PercolationTree& tree, int n,
                                          const SightSpec& sight, int64_t R);

// Reference implementation: one exact first-hit query per ray over the
// full square list.  Quadratic; for tests.
std::vector<DyadicSquare> ray_cast_oracle_direct(const PercolationTree& tree,
                                                 int n, const SightSpec& sight,
                                                 int64_t R);

// Parameter-measure account of where sq is the first hit: the total
// length of the open elementary intervals it wins and how many of the R
// grid rays fall inside them.  Positive length with zero grid hits
// certifies that a cover/oracle discrepancy at this R is grazing-scale.
struct VisibleSpan {
  Rat length;
  int64_t grid_hits = 0;
};

VisibleSpan visible_span(const PercolationTree& tree, int n,
                         const SightSpec& sight, const DyadicSquare& sq,
                         int64_t R);

}  // namespace fracvis
