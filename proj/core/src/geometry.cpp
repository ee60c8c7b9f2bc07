#include "fracvis/geometry.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace fracvis {

DirectionSpec make_direction(int64_t a, int64_t b) {
  if (a == 0 && b == 0) {
    throw std::invalid_argument("direction must be nonzero");
  }
  uint64_t ua = a < 0 ? uint64_t(-(a + 1)) + 1 : uint64_t(a);
  uint64_t ub = b < 0 ? uint64_t(-(b + 1)) + 1 : uint64_t(b);
  uint64_t g = std::gcd(ua, ub);
  return DirectionSpec{a / int64_t(g), b / int64_t(g)};
}

Viewpoint make_viewpoint(Rat x1, Rat x2) {
  Rat zero(0), one(1);
  bool inside = zero <= x1 && x1 <= one && zero <= x2 && x2 <= one;
  if (inside) {
    throw std::domain_error("viewpoint must lie outside the closed unit square");
  }
  return Viewpoint{RatPoint{std::move(x1), std::move(x2)}};
}

Rat shadow_coord(const RatPoint& pt, const DirectionSpec& d) {
  return pt.x * Rat(-d.b) + pt.y * Rat(d.a);
}

Interval<Rat> project_square(const Cell& c, int level, int M,
                             const DirectionSpec& d) {
  Interval<int64_t> w = project_cell_scaled(c, d);
  Rat side = cell_side(level, M);
  return Interval<Rat>{Rat(w.lo) * side, Rat(w.hi) * side};
}

Interval<Rat> project_square(const DyadicSquare& sq, int M,
                             const DirectionSpec& d) {
  if (sq.ix > INT32_MAX || sq.iy > INT32_MAX || sq.ix < 0 || sq.iy < 0) {
    throw std::out_of_range("square index out of the supported lattice range");
  }
  return project_square(Cell{int32_t(sq.ix), int32_t(sq.iy)}, sq.level, M, d);
}

Interval<Rat> shadow_arc(const DyadicSquare& sq, int M, const ArcFrame& frame) {
  if (sq.ix > INT32_MAX || sq.iy > INT32_MAX || sq.ix < 0 || sq.iy < 0) {
    throw std::out_of_range("square index out of the supported lattice range");
  }
  return frame.arc_of_cell(Cell{int32_t(sq.ix), int32_t(sq.iy)}, sq.level, M);
}

Interval<int64_t> project_cell_scaled(const Cell& c, const DirectionSpec& d) {
  // w = -b*cx + a*cy over the corner lattice points of the cell.
  int64_t ix = c.ix, iy = c.iy;
  int64_t xs[2] = {-d.b * ix, -d.b * (ix + 1)};
  int64_t ys[2] = {d.a * iy, d.a * (iy + 1)};
  int64_t xlo = std::min(xs[0], xs[1]), xhi = std::max(xs[0], xs[1]);
  int64_t ylo = std::min(ys[0], ys[1]), yhi = std::max(ys[0], ys[1]);
  return Interval<int64_t>{xlo + ylo, xhi + yhi};
}

ArcFrame::ArcFrame(const Viewpoint& vp) : vp_(vp) {
  Rat half(1, 2);
  r_ = RatPoint{half - vp_.x.x, half - vp_.x.y};
}

namespace {

Rat diamond_t(const Rat& x, const Rat& y) {
  int ys = y.sign();
  if (ys == 0) {
    if (x.sign() > 0) return Rat(0);
    throw std::domain_error("direction opposite to the arc reference");
  }
  Rat s = x.abs() + y.abs();
  Rat q = x / s;
  return ys > 0 ? Rat(1) - q : q - Rat(1);
}

}  // namespace

Rat ArcFrame::t_of_point(const RatPoint& q) const {
  Rat ux = q.x - vp_.x.x;
  Rat uy = q.y - vp_.x.y;
  Rat x = ux * r_.x + uy * r_.y;   // <u, r>
  Rat y = r_.x * uy - r_.y * ux;   // cross(r, u)
  return diamond_t(x, y);
}

RatPoint ArcFrame::dir_of_t(const Rat& t) const {
  Rat two(2);
  if (!(t.abs() < two)) {
    throw std::domain_error("pseudo-angle out of range");
  }
  Rat x, y;
  if (t.sign() >= 0) {
    x = Rat(1) - t;
    y = t <= Rat(1) ? t : two - t;
  } else {
    Rat s = t.abs();
    x = Rat(1) - s;
    y = -(s <= Rat(1) ? s : two - s);
  }
  // u = x*r + y*rot90(r), rot90(r) = (-r_.y, r_.x).
  return RatPoint{x * r_.x - y * r_.y, x * r_.y + y * r_.x};
}

Interval<Rat> ArcFrame::arc_of_cell(const Cell& c, int level, int M) const {
  Rat side = cell_side(level, M);
  Rat x0 = Rat(int64_t(c.ix)) * side;
  Rat y0 = Rat(int64_t(c.iy)) * side;
  std::vector<RatPoint> corners = {
      {x0, y0}, {x0 + side, y0}, {x0 + side, y0 + side}, {x0, y0 + side}};
  return arc_of_polygon(corners);
}

Interval<Rat> ArcFrame::arc_of_polygon(const std::vector<RatPoint>& vertices) const {
  if (vertices.empty()) {
    throw std::invalid_argument("empty polygon");
  }
  Rat lo = t_of_point(vertices[0]);
  Rat hi = lo;
  for (size_t i = 1; i < vertices.size(); ++i) {
    Rat t = t_of_point(vertices[i]);
    lo = min(lo, t);
    hi = max(hi, t);
  }
  return Interval<Rat>{std::move(lo), std::move(hi)};
}

CarveMode carve_mode_for(const DirectionSpec& d) {
  // The source line runs along d_perp; its slope is negative exactly when
  // a*b > 0.  Axis-parallel directions use the negative-slope corner pair.
  int sa = (d.a > 0) - (d.a < 0), sb = (d.b > 0) - (d.b < 0);
  return sa * sb >= 0 ? CarveMode::kUpperLeftLowerRight
                      : CarveMode::kLowerLeftUpperRight;
}

CarvedRegion carve(const Cell& c, int level, int M, const Rat& eps,
                   CarveMode mode) {
  if (!(Rat(0) < eps && eps < Rat(1, 2))) {
    throw std::invalid_argument("carve size must satisfy 0 < eps < 1/2");
  }
  Rat side = cell_side(level, M);
  Rat x0 = Rat(int64_t(c.ix)) * side;
  Rat y0 = Rat(int64_t(c.iy)) * side;
  Rat x1 = x0 + side, y1 = y0 + side;
  Rat h = eps * side;

  CarvedRegion region;
  region.cell = c;
  region.level = level;
  region.M = M;
  region.eps = eps;
  region.mode = mode;

  auto& v = region.vertices;
  switch (mode) {
    case CarveMode::kUpperLeftLowerRight:
      v = {{x0, y0},          {x1 - h, y0},     {x1 - h, y0 + h},
           {x1, y0 + h},      {x1, y1},         {x0 + h, y1},
           {x0 + h, y1 - h},  {x0, y1 - h}};
      break;
    case CarveMode::kLowerLeftUpperRight:
      v = {{x0 + h, y0},      {x1, y0},         {x1, y1 - h},
           {x1 - h, y1 - h},  {x1 - h, y1},     {x0, y1},
           {x0, y0 + h},      {x0 + h, y0 + h}};
      break;
    case CarveMode::kAllFour:
      v = {{x0 + h, y0},      {x1 - h, y0},     {x1 - h, y0 + h},
           {x1, y0 + h},      {x1, y1 - h},     {x1 - h, y1 - h},
           {x1 - h, y1},      {x0 + h, y1},     {x0 + h, y1 - h},
           {x0, y1 - h},      {x0, y0 + h},     {x0 + h, y0 + h}};
      break;
  }
  return region;
}

Interval<Rat> carved_projection(const CarvedRegion& region,
                                const DirectionSpec& d) {
  Rat lo = shadow_coord(region.vertices[0], d);
  Rat hi = lo;
  for (size_t i = 1; i < region.vertices.size(); ++i) {
    Rat w = shadow_coord(region.vertices[i], d);
    lo = min(lo, w);
    hi = max(hi, w);
  }
  return Interval<Rat>{std::move(lo), std::move(hi)};
}

Interval<Rat> carved_arc(const CarvedRegion& region, const ArcFrame& frame) {
  return frame.arc_of_polygon(region.vertices);
}

namespace {

struct SlabState {
  bool miss = false;
  bool has_lo = false, has_hi = false;
  Rat lo, hi;

  // Constrain base + tau*vel to [wlo, whi].
  void axis(const Rat& base, const Rat& vel, const Rat& wlo, const Rat& whi) {
    if (miss) return;
    int s = vel.sign();
    if (s == 0) {
      if (base < wlo || whi < base) miss = true;
      return;
    }
    Rat a = (wlo - base) / vel;
    Rat b = (whi - base) / vel;
    if (s < 0) std::swap(a, b);
    if (!has_lo || a > lo) { lo = a; has_lo = true; }
    if (!has_hi || b < hi) { hi = b; has_hi = true; }
    if (has_lo && has_hi && hi < lo) miss = true;
  }
};

}  // namespace

std::optional<Interval<Rat>> ray_window(const Ray& ray, const DyadicSquare& sq,
                                        int M) {
  Rat side = cell_side(sq.level, M);
  Rat x0 = Rat(sq.ix) * side, y0 = Rat(sq.iy) * side;
  Rat x1 = x0 + side, y1 = y0 + side;

  if (const LineFiber* f = std::get_if<LineFiber>(&ray)) {
    // base point z*d_perp/|d|^2 lies on the fiber and is orthogonal to the
    // travel direction e = side*d, so <pt(tau), e> = tau*|d|^2.
    Rat n2 = Rat(f->d.a * f->d.a + f->d.b * f->d.b);
    Rat bx = f->z * Rat(-f->d.b) / n2;
    Rat by = f->z * Rat(f->d.a) / n2;
    Rat ex = Rat(f->side * f->d.a), ey = Rat(f->side * f->d.b);
    SlabState s;
    s.axis(bx, ex, x0, x1);
    s.axis(by, ey, y0, y1);
    if (s.miss) return std::nullopt;
    // Whole line: both bounds exist because e has a nonzero component and
    // the square is bounded on every axis.
    return Interval<Rat>{s.lo * n2, s.hi * n2};
  }
  const PointRay& r = std::get<PointRay>(ray);
  if (r.u.x.is_zero() && r.u.y.is_zero()) {
    throw std::invalid_argument("ray direction must be nonzero");
  }
  SlabState s;
  s.axis(r.origin.x, r.u.x, x0, x1);
  s.axis(r.origin.y, r.u.y, y0, y1);
  if (s.miss) return std::nullopt;
  Rat lo = s.has_lo ? s.lo : Rat(0);
  if (lo.sign() < 0) lo = Rat(0);
  if (s.has_hi && s.hi < lo) return std::nullopt;
  Rat hi = s.has_hi ? s.hi : lo;
  return Interval<Rat>{std::move(lo), std::move(hi)};
}

std::optional<FirstHit> ray_first_hit(const Ray& ray,
                                      const std::vector<DyadicSquare>& squares,
                                      int M) {
  std::optional<FirstHit> best;
  for (const DyadicSquare& sq : squares) {
    auto w = ray_window(ray, sq, M);
    if (!w) continue;
    if (!best || w->lo < best->entry) {
      best = FirstHit{sq, w->lo};
    } else if (w->lo == best->entry) {
      auto key = [](const DyadicSquare& s) {
        return std::tuple<int, int64_t, int64_t>(s.level, s.ix, s.iy);
      };
      if (key(sq) < key(best->square)) best->square = sq;
    }
  }
  return best;
}

}  // namespace fracvis
