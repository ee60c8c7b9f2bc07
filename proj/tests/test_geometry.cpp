#include <doctest.h>

#include <fracvis/geometry.hpp>
#include <fracvis/grid.hpp>

#include <stdexcept>

using namespace fracvis;

TEST_CASE("make_direction reduces and validates") {
  DirectionSpec d = make_direction(4, 6);
  CHECK(d.a == 2);
  CHECK(d.b == 3);
  DirectionSpec n = make_direction(-4, 6);
  CHECK(n.a == -2);
  CHECK(n.b == 3);
  CHECK(make_direction(0, -5) == make_direction(0, -1));
  CHECK_THROWS_AS(make_direction(0, 0), std::invalid_argument);
}

TEST_CASE("make_viewpoint rejects points in the closed square") {
  CHECK_NOTHROW(make_viewpoint(Rat(-1), Rat(-1)));
  CHECK_NOTHROW(make_viewpoint(Rat(1, 2), Rat(-3)));
  CHECK_NOTHROW(make_viewpoint(Rat(5, 4), Rat(9, 4)));
  CHECK_THROWS_AS(make_viewpoint(Rat(1, 2), Rat(1, 2)), std::domain_error);
  CHECK_THROWS_AS(make_viewpoint(Rat(0), Rat(0)), std::domain_error);
  CHECK_THROWS_AS(make_viewpoint(Rat(1), Rat(1, 2)), std::domain_error);
}

TEST_CASE("project_square matches corner extremes") {
  // cell [1/4,1/2] x [1/2,3/4], d = (1,1): z = -x + y over corners
  Interval<Rat> iv = project_square(Cell{1, 2}, 2, 2, make_direction(1, 1));
  CHECK(iv.lo == Rat(0));
  CHECK(iv.hi == Rat(1, 2));

  // width is side * (|a| + |b|)
  Interval<Rat> w = project_square(Cell{0, 0}, 3, 2, make_direction(2, -1));
  CHECK(w.hi - w.lo == Rat(3, 8));

  // axis direction (1,0): z = -0*x + 1*y? no: d_perp = (0,1) -> z = y
  Interval<Rat> ax = project_square(Cell{3, 1}, 2, 2, make_direction(1, 0));
  CHECK(ax.lo == Rat(1, 4));
  CHECK(ax.hi == Rat(1, 2));

  Interval<Rat> sq2 = project_square(DyadicSquare{2, 1, 2}, 2, make_direction(1, 1));
  CHECK(sq2.lo == iv.lo);
  CHECK(sq2.hi == iv.hi);
}

TEST_CASE("project_cell_scaled agrees with the rational projection") {
  DirectionSpec d = make_direction(3, -2);
  Cell c{5, 2};
  int level = 3;
  Interval<int64_t> s = project_cell_scaled(c, d);
  Interval<Rat> r = project_square(c, level, 2, d);
  CHECK(Rat(s.lo, 1) * cell_side(level, 2) == r.lo);
  CHECK(Rat(s.hi, 1) * cell_side(level, 2) == r.hi);
}

TEST_CASE("carve_mode_for follows sign of a*b") {
  CHECK(carve_mode_for(make_direction(1, 1)) == CarveMode::kUpperLeftLowerRight);
  CHECK(carve_mode_for(make_direction(-2, -3)) == CarveMode::kUpperLeftLowerRight);
  CHECK(carve_mode_for(make_direction(1, -1)) == CarveMode::kLowerLeftUpperRight);
  CHECK(carve_mode_for(make_direction(-1, 2)) == CarveMode::kLowerLeftUpperRight);
  // axis directions have a*b == 0, grouped with the >= 0 mode
  CHECK(carve_mode_for(make_direction(1, 0)) == CarveMode::kUpperLeftLowerRight);
  CHECK(carve_mode_for(make_direction(0, 1)) == CarveMode::kUpperLeftLowerRight);
}

TEST_CASE("carve validates eps and keeps vertices inside the cell") {
  Cell c{0, 0};
  CHECK_THROWS_AS(carve(c, 0, 2, Rat(0), CarveMode::kAllFour), std::invalid_argument);
  CHECK_THROWS_AS(carve(c, 0, 2, Rat(1, 2), CarveMode::kAllFour), std::invalid_argument);

  CarvedRegion r = carve(c, 0, 2, Rat(1, 8), CarveMode::kAllFour);
  CHECK(r.vertices.size() == 12);
  for (const auto& v : r.vertices) {
    CHECK(Rat(0) <= v.x);
    CHECK(v.x <= Rat(1));
    CHECK(Rat(0) <= v.y);
    CHECK(v.y <= Rat(1));
  }
  CarvedRegion two = carve(c, 0, 2, Rat(1, 8), CarveMode::kUpperLeftLowerRight);
  CHECK(two.vertices.size() == 8);
}

TEST_CASE("carved_projection shrinks by eps at both shadow ends") {
  // unit square, d = (1,1), eps = 1/8: full shadow [-1,1], carved removes
  // the upper-left corner (z near 1) and lower-right corner (z near -1),
  // each cutting eps off its end.
  CarvedRegion r = carve(Cell{0, 0}, 0, 2, Rat(1, 8),
                         CarveMode::kUpperLeftLowerRight);
  Interval<Rat> iv = carved_projection(r, make_direction(1, 1));
  CHECK(iv.lo == Rat(-7, 8));
  CHECK(iv.hi == Rat(7, 8));

  // axis direction (1,0): shadow z = y in [0,1]; the carved corners do not
  // touch the horizontal mid-span, so the projection keeps full width via
  // the surviving corners on each horizontal edge.
  Interval<Rat> ax = carved_projection(r, make_direction(1, 0));
  CHECK(ax.lo == Rat(0));
  CHECK(ax.hi == Rat(1));
}

TEST_CASE("arc frame pseudo-angle is exact and invertible") {
  Viewpoint vp = make_viewpoint(Rat(-1), Rat(-1));
  ArcFrame frame(vp);
  CHECK(frame.viewpoint().x.x == Rat(-1));

  for (auto q : {RatPoint{Rat(0), Rat(0)}, RatPoint{Rat(1), Rat(0)},
                 RatPoint{Rat(1, 3), Rat(2, 3)}, RatPoint{Rat(1), Rat(1)}}) {
    Rat t = frame.t_of_point(q);
    CHECK(Rat(-2) < t);
    CHECK(t < Rat(2));
    RatPoint u = frame.dir_of_t(t);
    // u is parallel to q - x with positive scale: cross product vanishes,
    // dot product positive
    Rat dx = q.x - vp.x.x;
    Rat dy = q.y - vp.x.y;
    CHECK(u.x * dy - u.y * dx == Rat(0));
    CHECK(u.x * dx + u.y * dy > Rat(0));
  }

  // monotone along a sweep of directions from corner to corner
  Rat t_prev = frame.t_of_point(RatPoint{Rat(1), Rat(0)});
  for (int i = 1; i <= 8; ++i) {
    RatPoint q{Rat(1), Rat(i, 8)};
    Rat t = frame.t_of_point(q);
    CHECK(t_prev < t);
    t_prev = t;
  }
}

TEST_CASE("arc_of_cell spans the corner hull") {
  Viewpoint vp = make_viewpoint(Rat(-1), Rat(-1));
  ArcFrame frame(vp);
  Cell c{0, 0};
  Interval<Rat> arc = frame.arc_of_cell(c, 1, 2);
  // extreme corners of [0,1/2]^2 from (-1,-1) are (1/2,0) and (0,1/2)
  Rat t_lo = frame.t_of_point(RatPoint{Rat(1, 2), Rat(0)});
  Rat t_hi = frame.t_of_point(RatPoint{Rat(0), Rat(1, 2)});
  if (t_hi < t_lo) std::swap(t_lo, t_hi);
  CHECK(arc.lo == t_lo);
  CHECK(arc.hi == t_hi);

  Interval<Rat> same = shadow_arc(DyadicSquare{1, 0, 0}, 2, frame);
  CHECK(same == arc);

  Interval<Rat> poly = frame.arc_of_polygon(
      {RatPoint{Rat(1, 2), Rat(0)}, RatPoint{Rat(1, 2), Rat(1, 2)},
       RatPoint{Rat(0), Rat(1, 2)}, RatPoint{Rat(0), Rat(0)}});
  CHECK(poly == arc);
}

TEST_CASE("carved_arc is contained in the full arc") {
  Viewpoint vp = make_viewpoint(Rat(1, 2), Rat(-3));
  ArcFrame frame(vp);
  Cell c{1, 1};
  CarvedRegion r = carve(c, 1, 2, Rat(1, 8), CarveMode::kAllFour);
  Interval<Rat> full = frame.arc_of_cell(c, 1, 2);
  Interval<Rat> carved = carved_arc(r, frame);
  CHECK(full.lo <= carved.lo);
  CHECK(carved.hi <= full.hi);
  CHECK(carved.lo < carved.hi);
}

TEST_CASE("ray_window computes exact slab intersections") {
  // fiber z = 3/4 in direction (1,1): line y = x + 3/4
  LineFiber f{make_direction(1, 1), +1, Rat(3, 4)};
  auto w = ray_window(Ray{f}, DyadicSquare{1, 0, 1}, 2);
  REQUIRE(w.has_value());
  CHECK(w->lo < w->hi);
  // square [1/2,1] x [0,1/2] is entirely below the line: no window
  CHECK_FALSE(ray_window(Ray{f}, DyadicSquare{1, 1, 0}, 2).has_value());

  PointRay pr{RatPoint{Rat(-1), Rat(-1)}, RatPoint{Rat(1), Rat(1)}};
  auto pw = ray_window(Ray{pr}, DyadicSquare{0, 0, 0}, 2);
  REQUIRE(pw.has_value());
  CHECK(pw->lo == Rat(1));
  CHECK(pw->hi == Rat(2));
}

TEST_CASE("ray_first_hit returns minimal entry with deterministic ties") {
  // full level-1 grid, fiber z = 3/4 along (1,1): the line y = x + 3/4
  // meets [0,1/2]x[1/2,1] first (entry at x = 0)
  std::vector<DyadicSquare> grid1;
  for (int ix = 0; ix < 2; ++ix)
    for (int iy = 0; iy < 2; ++iy) grid1.push_back({1, ix, iy});
  LineFiber f{make_direction(1, 1), +1, Rat(3, 4)};
  auto hit = ray_first_hit(Ray{f}, grid1, 2);
  REQUIRE(hit.has_value());
  CHECK(hit->square == DyadicSquare{1, 0, 1});

  // z = 0 along (1,1): the diagonal touches (0,0), (1,1) squares and
  // grazes corners of the other two at the shared center; first entry is
  // at the lower-left square, tie broken toward smallest (level, ix, iy)
  LineFiber g{make_direction(1, 1), +1, Rat(0)};
  auto hit2 = ray_first_hit(Ray{g}, grid1, 2);
  REQUIRE(hit2.has_value());
  CHECK(hit2->square == DyadicSquare{1, 0, 0});

  // reversed side: same fiber traversed the other way lands on (1,1)
  LineFiber h{make_direction(1, 1), -1, Rat(0)};
  auto hit3 = ray_first_hit(Ray{h}, grid1, 2);
  REQUIRE(hit3.has_value());
  CHECK(hit3->square == DyadicSquare{1, 1, 1});

  // point ray from outside hits the near face square
  PointRay pr{RatPoint{Rat(1, 2), Rat(-3)}, RatPoint{Rat(0), Rat(1)}};
  auto hit4 = ray_first_hit(Ray{pr}, grid1, 2);
  REQUIRE(hit4.has_value());
  CHECK(hit4->square.iy == 0);

  CHECK_FALSE(ray_first_hit(Ray{f}, {}, 2).has_value());
}
