#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fracvis/geometry.hpp"
#include "fracvis/grid.hpp"
#include "fracvis/rational.hpp"
#include "fracvis/visibility.hpp"

namespace fracvis {

// Box-count rows N_k over a contiguous range of levels, with the
// provenance needed to reproduce them.
struct ScalingTable {
  int k_lo = 0;
  std::vector<int64_t> counts;  // counts[i] = N_{k_lo + i}
  Rat p;
  int M = 2;
  int n = 0;
  std::string sight;  // "line a,b,s", "point x1,x2", or "set"
  uint64_t seed = 0;
};

// Number of distinct level-k ancestors of a same-level square set.
int64_t box_count(const std::vector<DyadicSquare>& squares, int k, int M);

struct SlopeFit {
  double slope = 0.0;
  double max_residual = 0.0;
  bool exact = false;  // integer-ratio path: slope and residuals are exact
};

// Ordinary least squares of log_M(N_k) against k over table rows
// k_from..k_to inclusive.  When every consecutive count ratio is an exact
// power of M the regression runs in rational arithmetic and the reported
// values are exact; otherwise doubles.
SlopeFit dim_slope(const ScalingTable& table, int k_from, int k_to);

// log(M^2 p)/log M, clamped to 0 when M^2 p < 1.
double theoretical_dim(const Rat& p, int M);

// 1/2 + sqrt(d - 3/4); domain error below 3/4.
double oneil_bound(double d);

// Sign of the source line's slope implied by sight direction d: -1 for
// negative slope (a*b >= 0, axis directions by convention), +1 otherwise.
int slope_sign_for(const DirectionSpec& d);

// True iff sq sits in a designated corner cell of the M^2-subdivision
// grid of its grandparent: upper-left/lower-right for slope_sign < 0,
// lower-left/upper-right for slope_sign > 0.
bool is_corner(const DyadicSquare& sq, int slope_sign, int M);

// Memo for repeated block tests against one (tree, d, m) triple; keyed by
// the level n-2 square.
struct BlockCache {
  int base_level = 0;  // Q~ level
  int m = 0;
  DirectionSpec d;
  std::map<Cell, bool> memo;
};

// True iff the eps=1/8 carved projection of the retained level n-2
// square qt is exactly contained in the union of shadows of its retained
// depth-m descendants.  One-sided: may flip true -> false as m grows,
// never false -> true.
bool is_block(const PercolationTree& tree, const Cell& qt, int n,
              const DirectionSpec& d, int m, BlockCache* cache = nullptr);

// Deterministic stripe of level-n grid squares whose centers project
// into I (half-open [lo, hi) binning), ordered front to back.
struct StripeProcess {
  Interval<Rat> interval;
  std::vector<Cell> q_list;  // all grid squares, sorted by <center, side*d>
  std::vector<Cell> c_list;  // retained subsequence, same order
  std::vector<int> z;        // z[i] = 1 iff c_list[i] is a corner
  std::vector<int> x;        // partial sums of z
};

StripeProcess stripe_squares(const PercolationTree& tree, int n,
                             const DirectionSpec& d, int side,
                             const Interval<Rat>& I);

struct StripeCount {
  int64_t y = 0;
  int first_block = 0;  // 1-based index of Q_B in c_list; 0 = none found
};

// Covering count above I: the first non-corner block-inducing member of
// C_I plus all later members sharing its grandparent; |C_I| when no
// member qualifies.
StripeCount stripe_cover_count(const PercolationTree& tree, int n,
                               const DirectionSpec& d, int side,
                               const Interval<Rat>& I, int m,
                               BlockCache* cache = nullptr);

// Exact-length subintervals of eps * M^-n * max(|a|,|b|) covering the
// shadow extent of the unit square, the last one possibly shorter.
// Requires the direction-dependent bound eps < |ab| / (2(a^2+b^2)), so
// axis directions are rejected.
std::vector<Interval<Rat>> stripe_decomposition(const DirectionSpec& d,
                                                int side, int n,
                                                const Rat& eps, int M = 2);

// Largest 2^-k strictly below the stripe bound for d.
Rat stripe_default_eps(const DirectionSpec& d);

struct LengthEstimate {
  double value = 0.0;       // sqrt(2) * M^-n * S
  int64_t s = 0;            // S = sum of Y over stripes
  std::vector<int64_t> y;   // per-stripe counts
  std::vector<int> first_block;
  std::vector<Interval<Rat>> intervals;
};

LengthEstimate visible_length_estimate(const PercolationTree& tree, int n,
                                       const DirectionSpec& d, int side,
                                       const Rat& eps, int m);

// True iff the carved projection (line) or carved arc (point) of the
// unit square at eps is exactly contained in the union of depth-m
// retained shadows.  Monotone nonincreasing in m on a fixed tree.
bool projection_coverage(const PercolationTree& tree, int m,
                         const DirectionSpec& d, const Rat& eps);
bool radial_coverage(const PercolationTree& tree, int m, const Viewpoint& x,
                     const Rat& eps);

// Retained level-k squares crossed by the full line through a and b on
// two parallel closed sides.
int64_t count_passed(const PercolationTree& tree, int k, const RatPoint& a,
                     const RatPoint& b);

// Retained level-k squares whose concentric lambda-scaled square's shadow
// (interval or arc, by sight kind) contains coordinate z.
int64_t count_shadow_hits(const PercolationTree& tree, int k, const Rat& z,
                          const SightSpec& sight, const Rat& lambda);

}  // namespace fracvis
