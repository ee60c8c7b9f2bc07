#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "fracvis/grid.hpp"
#include "fracvis/interval_union.hpp"
#include "fracvis/rational.hpp"

namespace fracvis {

// Direction of sight rays, stored as a reduced integer vector (a, b).
// The perpendicular used for shadows is fixed as d_perp = (-b, a); the
// shadow coordinate of a point is <pt, d_perp> = -b*x + a*y, unnormalized.
struct DirectionSpec {
  int64_t a = 1;
  int64_t b = 0;

  friend bool operator==(const DirectionSpec&, const DirectionSpec&) = default;
};

// Throws std::invalid_argument on (0, 0); divides out gcd otherwise.
DirectionSpec make_direction(int64_t a, int64_t b);

// side = +1: rays travel along +d; side = -1: along -d.
struct LineSight {
  DirectionSpec d;
  int side = +1;
};

// External viewpoint, strictly outside the closed unit square.
struct Viewpoint {
  RatPoint x;
};

Viewpoint make_viewpoint(Rat x1, Rat x2);  // throws std::domain_error inside

Rat shadow_coord(const RatPoint& pt, const DirectionSpec& d);

// Closed shadow interval [min, max] of <corner, d_perp> over the four
// corners of the cell; width is M^-level * (|a| + |b|).
Interval<Rat> project_square(const Cell& c, int level, int M,
                             const DirectionSpec& d);
Interval<Rat> project_square(const DyadicSquare& sq, int M,
                             const DirectionSpec& d);

// Same interval in units of M^-level: endpoints are exact int64 because
// corner coordinates are integers at that scale.
Interval<int64_t> project_cell_scaled(const Cell& c, const DirectionSpec& d);

// Angular coordinate system at an external viewpoint.  Directions are
// ordered by an exact piecewise-rational pseudo-angle t in (-2, 2),
// measured against the reference direction from x to the center of the
// unit square; since x lies outside, every direction toward the square
// stays strictly inside the open half-turn around the reference, so t is
// a monotone, exactly computable angular coordinate and arcs are plain
// intervals in t.
class ArcFrame {
 public:
  explicit ArcFrame(const Viewpoint& vp);

  const Viewpoint& viewpoint() const { return vp_; }

  Rat t_of_point(const RatPoint& q) const;
  // World-frame direction (not normalized) whose pseudo-angle is t.
  RatPoint dir_of_t(const Rat& t) const;

  // Minimal closed arc of directions from x to the cell; endpoints are
  // directions to two of its corners.
  Interval<Rat> arc_of_cell(const Cell& c, int level, int M) const;
  Interval<Rat> arc_of_polygon(const std::vector<RatPoint>& vertices) const;

 private:
  Viewpoint vp_;
  RatPoint r_;  // reference: center of unit square minus x
};

using ArcUnion = IntervalUnion<Rat>;

// Minimal closed arc of sight directions from the frame's viewpoint to sq.
Interval<Rat> shadow_arc(const DyadicSquare& sq, int M, const ArcFrame& frame);

// Corner-carving modes: which corner notches of side eps*side(Q) are
// removed.  Two-corner modes serve line sights (the pair depends on the
// sign of slope of the source line, i.e. on sign(a*b)); the four-corner
// mode serves point sights.
enum class CarveMode {
  kUpperLeftLowerRight,  // directions with a*b >= 0
  kLowerLeftUpperRight,  // directions with a*b < 0
  kAllFour,
};

CarveMode carve_mode_for(const DirectionSpec& d);

// Closure of the carved square: the cell minus half-open corner notches.
// Vertices are listed counterclockwise; projections and arcs of the
// carved region are vertex min/max (linear functionals and viewing
// angles attain extremes at polygon vertices).
struct CarvedRegion {
  Cell cell;
  int level = 0;
  int M = 2;
  Rat eps;
  CarveMode mode = CarveMode::kUpperLeftLowerRight;
  std::vector<RatPoint> vertices;
};

// Throws std::invalid_argument unless 0 < eps < 1/2.
CarvedRegion carve(const Cell& c, int level, int M, const Rat& eps,
                   CarveMode mode);

Interval<Rat> carved_projection(const CarvedRegion& region,
                                const DirectionSpec& d);
Interval<Rat> carved_arc(const CarvedRegion& region, const ArcFrame& frame);

// A sight ray for exact first-hit queries.  LineFiber is the full line
// {pt : <pt, d_perp> = z} traversed along side*d with entry parameter
// <pt, side*d>; PointRay is {origin + t*u : t >= 0} with parameter t.
struct LineFiber {
  DirectionSpec d;
  int side = +1;
  Rat z;
};

struct PointRay {
  RatPoint origin;
  RatPoint u;
};

using Ray = std::variant<LineFiber, PointRay>;

struct FirstHit {
  DyadicSquare square;
  Rat entry;
};

// Exact slab test per square; returns the square with minimal entry
// parameter.  All tied squares share the entry point (the ray position at
// the tied parameter), and the smallest (level, ix, iy) wins.
std::optional<FirstHit> ray_first_hit(const Ray& ray,
                                      const std::vector<DyadicSquare>& squares,
                                      int M);

// Entry/exit parameter window of one square on a ray, if it is hit.
std::optional<Interval<Rat>> ray_window(const Ray& ray, const DyadicSquare& sq,
                                        int M);

}  // namespace fracvis
