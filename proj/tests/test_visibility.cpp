#include <doctest.h>

#include <fracvis/grid.hpp>
#include <fracvis/visibility.hpp>

#include <algorithm>
#include <set>

using namespace fracvis;

namespace {

PercolationTree full_tree(int depth) {
  return generate(PercParams{Rat(1), 2, depth, 1});
}

std::set<std::pair<int64_t, int64_t>> cells_of(const std::vector<DyadicSquare>& v) {
  std::set<std::pair<int64_t, int64_t>> out;
  for (const auto& s : v) out.insert({s.ix, s.iy});
  return out;
}

bool subset_of(const std::vector<DyadicSquare>& a,
               const std::vector<DyadicSquare>& b) {
  auto bs = cells_of(b);
  for (const auto& s : a)
    if (!bs.count({s.ix, s.iy})) return false;
  return true;
}

}  // namespace

TEST_CASE("full grid, diagonal sight, level 1: upper-left staircase") {
  PercolationTree t = full_tree(1);
  VisibleCover cover = visible_from_line(t, 1, make_direction(1, 1), +1);
  REQUIRE(cover.marked.size() == 3);
  auto cs = cells_of(cover.marked);
  CHECK(cs.count({0, 0}));
  CHECK(cs.count({0, 1}));
  CHECK(cs.count({1, 0}));
  CHECK_FALSE(cs.count({1, 1}));
  REQUIRE(cover.counts.size() == 2);
  CHECK(cover.counts[0] == 1);
  CHECK(cover.counts[1] == 3);
  CHECK(cover.witness_params.size() == 3);
}

TEST_CASE("occlusion: far square hidden behind a near one") {
  PercParams params{Rat(1, 2), 2, 1, 1};
  PercolationTree t =
      from_levels(params, {{{0, 0}}, {{0, 0}, {1, 1}}});
  VisibleCover cover = visible_from_line(t, 1, make_direction(1, 1), +1);
  REQUIRE(cover.marked.size() == 1);
  CHECK(cover.marked[0] == DyadicSquare{1, 0, 0});

  // opposite side reverses the roles
  VisibleCover rev = visible_from_line(t, 1, make_direction(1, 1), -1);
  REQUIRE(rev.marked.size() == 1);
  CHECK(rev.marked[0] == DyadicSquare{1, 1, 1});
}

TEST_CASE("exact staircase counts at p=1 for the diagonal sight") {
  int n = 6;
  PercolationTree t = full_tree(n);
  VisibleCover cover = visible_from_line(t, n, make_direction(1, 1), +1);
  CHECK(int64_t(cover.marked.size()) == 2 * ipow(2, n) - 1);
  for (int k = 0; k <= n; ++k) CHECK(cover.counts[k] == 2 * ipow(2, k) - 1);
}

TEST_CASE("axis sight at p=1 sees one square per column") {
  int n = 4;
  PercolationTree t = full_tree(n);
  // d = (0,1): vertical rays; side +1 travels upward, so the visible part
  // from the source line below is the bottom row
  VisibleCover cover = visible_from_line(t, n, make_direction(0, 1), +1);
  REQUIRE(int64_t(cover.marked.size()) == ipow(2, n));
  for (const auto& s : cover.marked) CHECK(s.iy == 0);
  VisibleCover top = visible_from_line(t, n, make_direction(0, 1), -1);
  for (const auto& s : top.marked) CHECK(s.iy == ipow(2, n) - 1);
}

TEST_CASE("point sight from below-left at level 1") {
  PercolationTree t = full_tree(1);
  VisibleCover cover = visible_from_point(t, 1, make_viewpoint(Rat(-1), Rat(-1)));
  auto cs = cells_of(cover.marked);
  REQUIRE(cover.marked.size() == 3);
  CHECK(cs.count({0, 0}));
  CHECK(cs.count({0, 1}));
  CHECK(cs.count({1, 0}));
  CHECK_FALSE(cover.used_fallback);
}

TEST_CASE("point sight below the square sees the bottom row plus flanks") {
  PercolationTree t = full_tree(1);
  VisibleCover cover = visible_from_point(t, 1, make_viewpoint(Rat(1, 2), Rat(-3)));
  auto cs = cells_of(cover.marked);
  CHECK(cs.count({0, 0}));
  CHECK(cs.count({1, 0}));
  // top squares are strictly occluded by the bottom row from x=(1/2,-3):
  // the viewing cone of each upper square is inside the lower row's cone
  CHECK_FALSE(cs.count({0, 1}));
  CHECK_FALSE(cs.count({1, 1}));
}

TEST_CASE("witness rays re-verify for every marked square") {
  PercolationTree t = generate(PercParams{Rat(3, 4), 2, 5, 31});
  REQUIRE_FALSE(is_extinct(t, 5));

  VisibleCover line = visible_from_line(t, 5, make_direction(2, 1), +1);
  for (const auto& s : line.marked) CHECK_NOTHROW(witness_ray(line, s, t, 5));
  CHECK_THROWS_AS(witness_ray(line, DyadicSquare{5, -1, -1}, t, 5),
                  std::invalid_argument);

  VisibleCover pt = visible_from_point(t, 5, make_viewpoint(Rat(2), Rat(2)));
  for (const auto& s : pt.marked) CHECK_NOTHROW(witness_ray(pt, s, t, 5));
}

TEST_CASE("oracle is a subset of the cover and grows with R") {
  PercolationTree t = generate(PercParams{Rat(3, 4), 2, 4, 77});
  REQUIRE_FALSE(is_extinct(t, 4));
  SightSpec line{LineSight{make_direction(1, 2), +1}};
  SightSpec point{Viewpoint{make_viewpoint(Rat(-1, 2), Rat(1, 2)).x}};

  for (const SightSpec& sight : {line, point}) {
    VisibleCover cover =
        std::holds_alternative<LineSight>(sight)
            ? visible_from_line(t, 4, std::get<LineSight>(sight).d,
                                std::get<LineSight>(sight).side)
            : visible_from_point(t, 4, std::get<Viewpoint>(sight));
    auto small = ray_cast_oracle(t, 4, sight, 64);
    auto big = ray_cast_oracle(t, 4, sight, 1024);
    CHECK(subset_of(small, big));
    CHECK(subset_of(big, cover.marked));
  }
}

TEST_CASE("fast oracle equals the direct reference") {
  PercolationTree t = generate(PercParams{Rat(2, 3), 2, 3, 5});
  REQUIRE_FALSE(is_extinct(t, 3));
  SightSpec line{LineSight{make_direction(1, 1), -1}};
  SightSpec point{Viewpoint{make_viewpoint(Rat(5, 4), Rat(9, 4)).x}};
  for (const SightSpec& sight : {line, point}) {
    auto fast = ray_cast_oracle(t, 3, sight, 41);
    auto direct = ray_cast_oracle_direct(t, 3, sight, 41);
    CHECK(fast == direct);
  }
}

TEST_CASE("oracle converges to the cover on a generic instance") {
  PercolationTree t = generate(PercParams{Rat(3, 4), 2, 4, 101});
  REQUIRE_FALSE(is_extinct(t, 4));
  DirectionSpec d = make_direction(3, 2);
  VisibleCover cover = visible_from_line(t, 4, d, +1);
  auto oracle = ray_cast_oracle(t, 4, SightSpec{LineSight{d, +1}}, 16384);
  CHECK(oracle == cover.marked);
}

TEST_CASE("visible_span accounts for winner lengths") {
  PercolationTree t = full_tree(1);
  SightSpec sight{LineSight{make_direction(1, 1), +1}};
  // all three staircase squares get positive span; total equals the
  // shadow width 2 of the unit square
  Rat total(0);
  for (auto cell : {std::pair{0, 0}, {0, 1}, {1, 0}}) {
    VisibleSpan sp = visible_span(t, 1, sight,
                                  DyadicSquare{1, cell.first, cell.second}, 256);
    CHECK(sp.length > Rat(0));
    CHECK(sp.grid_hits > 0);
    total += sp.length;
  }
  CHECK(total == Rat(2));
  // the occluded square has zero span
  VisibleSpan hidden = visible_span(t, 1, sight, DyadicSquare{1, 1, 1}, 256);
  CHECK(hidden.length == Rat(0));
  CHECK(hidden.grid_hits == 0);
}

TEST_CASE("covers are deterministic across repeated computation") {
  PercolationTree t = generate(PercParams{Rat(3, 5), 2, 5, 2024});
  REQUIRE_FALSE(is_extinct(t, 5));
  VisibleCover a = visible_from_line(t, 5, make_direction(1, 3), +1);
  VisibleCover b = visible_from_line(t, 5, make_direction(1, 3), +1);
  CHECK(a.marked == b.marked);
  CHECK(a.witness_params == b.witness_params);
  CHECK(a.counts == b.counts);

  VisibleCover pa = visible_from_point(t, 5, make_viewpoint(Rat(-2), Rat(3)));
  VisibleCover pb = visible_from_point(t, 5, make_viewpoint(Rat(-2), Rat(3)));
  CHECK(pa.marked == pb.marked);
  CHECK(pa.used_fallback == pb.used_fallback);
}

TEST_CASE("marked sets are sorted and counts consistent") {
  PercolationTree t = generate(PercParams{Rat(3, 4), 2, 6, 8});
  REQUIRE_FALSE(is_extinct(t, 6));
  VisibleCover cover = visible_from_line(t, 6, make_direction(1, 1), +1);
  CHECK(std::is_sorted(cover.marked.begin(), cover.marked.end(),
                       [](const DyadicSquare& x, const DyadicSquare& y) {
                         return std::pair{x.ix, x.iy} < std::pair{y.ix, y.iy};
                       }));
  // counts[j] must equal the number of distinct level-j ancestors
  for (int j = 0; j <= 6; ++j) {
    std::set<std::pair<int64_t, int64_t>> anc;
    for (const auto& s : cover.marked) {
      DyadicSquare a = ancestor(s, 6 - j, 2);
      anc.insert({a.ix, a.iy});
    }
    CHECK(cover.counts[j] == int64_t(anc.size()));
  }
  CHECK(cover.counts[6] == int64_t(cover.marked.size()));
}

TEST_CASE("empty tree yields empty cover") {
  PercParams params{Rat(1, 2), 2, 2, 1};
  PercolationTree t = from_levels(params, {{{0, 0}}, {}, {}});
  VisibleCover cover = visible_from_line(t, 2, make_direction(1, 1), +1);
  CHECK(cover.marked.empty());
  CHECK(cover.counts == std::vector<int64_t>{0, 0, 0});
  VisibleCover pc = visible_from_point(t, 2, make_viewpoint(Rat(-1), Rat(-1)));
  CHECK(pc.marked.empty());
}
