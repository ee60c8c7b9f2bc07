#include <doctest.h>

#include <fracvis/grid.hpp>

#include <algorithm>
#include <stdexcept>

using namespace fracvis;

TEST_CASE("validate rejects bad params") {
  PercParams ok{Rat(1, 2), 2, 4, 1};
  CHECK_NOTHROW(validate(ok));
  CHECK_THROWS_AS(validate(PercParams{Rat(0), 2, 4, 1}), std::invalid_argument);
  CHECK_THROWS_AS(validate(PercParams{Rat(3, 2), 2, 4, 1}), std::invalid_argument);
  CHECK_THROWS_AS(validate(PercParams{Rat(-1, 2), 2, 4, 1}), std::invalid_argument);
  CHECK_THROWS_AS(validate(PercParams{Rat(1, 2), 1, 4, 1}), std::invalid_argument);
  CHECK_THROWS_AS(validate(PercParams{Rat(1, 2), 2, -1, 1}), std::invalid_argument);
}

TEST_CASE("ipow exact values and overflow guard") {
  CHECK(ipow(2, 0) == 1);
  CHECK(ipow(2, 10) == 1024);
  CHECK(ipow(3, 4) == 81);
  CHECK(ipow(2, 62) == (int64_t(1) << 62));
  CHECK_THROWS_AS(ipow(2, 63), std::out_of_range);
}

TEST_CASE("cell coordinates are exact dyadic rationals") {
  Cell c{3, 5};
  CHECK(cell_lo_x(c, 3, 2) == Rat(3, 8));
  CHECK(cell_lo_y(c, 3, 2) == Rat(5, 8));
  CHECK(cell_side(3, 2) == Rat(1, 8));
  CHECK(cell_side(0, 2) == Rat(1));
  CHECK(cell_lo_x(Cell{2, 0}, 2, 3) == Rat(2, 9));
}

TEST_CASE("generate is deterministic and structurally sound") {
  PercParams params{Rat(3, 4), 2, 6, 12345};
  PercolationTree a = generate(params);
  PercolationTree b = generate(params);
  REQUIRE(a.levels.size() == 7);
  for (int k = 0; k <= 6; ++k) CHECK(a.levels[k] == b.levels[k]);

  CHECK(a.levels[0].size() == 1);
  CHECK(a.levels[0][0] == Cell{0, 0});
  for (int k = 0; k <= 6; ++k) {
    const auto& lv = a.levels[k];
    CHECK(std::is_sorted(lv.begin(), lv.end()));
    CHECK(std::adjacent_find(lv.begin(), lv.end()) == lv.end());
    int64_t side = ipow(2, k);
    for (const Cell& c : lv) {
      CHECK(c.ix >= 0);
      CHECK(c.iy >= 0);
      CHECK(c.ix < side);
      CHECK(c.iy < side);
      if (k > 0) CHECK(contains(a, k - 1, ancestor_cell(c, 1, 2)));
    }
  }

  PercolationTree c = generate(PercParams{Rat(3, 4), 2, 6, 12346});
  bool same = true;
  for (int k = 0; k <= 6; ++k) same = same && a.levels[k] == c.levels[k];
  CHECK_FALSE(same);
}

TEST_CASE("p=1 retains the full grid") {
  PercolationTree t = generate(PercParams{Rat(1), 2, 5, 7});
  for (int k = 0; k <= 5; ++k)
    CHECK(int64_t(squares_at(t, k).size()) == ipow(4, k));
  CHECK_FALSE(is_extinct(t, 5));
}

TEST_CASE("from_levels validates shape") {
  PercParams params{Rat(1, 2), 2, 1, 1};
  std::vector<std::vector<Cell>> good{{{0, 0}}, {{0, 1}, {1, 0}}};
  PercolationTree t = from_levels(params, good);
  CHECK(squares_at(t, 1).size() == 2);

  // orphan: level-2 cell with missing parent
  PercParams p2{Rat(1, 2), 2, 2, 1};
  std::vector<std::vector<Cell>> orphan{{{0, 0}}, {{0, 0}}, {{3, 3}}};
  CHECK_THROWS_AS(from_levels(p2, orphan), std::invalid_argument);

  std::vector<std::vector<Cell>> unsorted{{{0, 0}}, {{1, 0}, {0, 1}}};
  CHECK_THROWS_AS(from_levels(params, unsorted), std::invalid_argument);

  std::vector<std::vector<Cell>> badroot{{{0, 1}}, {{0, 1}}};
  CHECK_THROWS_AS(from_levels(params, badroot), std::invalid_argument);

  std::vector<std::vector<Cell>> oob{{{0, 0}}, {{0, 2}}};
  CHECK_THROWS_AS(from_levels(params, oob), std::invalid_argument);
}

TEST_CASE("extinction_level and survives_to agree with generate") {
  for (uint64_t seed = 1; seed <= 60; ++seed) {
    for (auto p : {Rat(1, 4), Rat(2, 5), Rat(3, 4)}) {
      PercParams params{p, 2, 6, seed};
      PercolationTree t = generate(params);
      int ext = extinction_level(params);
      bool surv = survives_to(params);
      if (ext == -1) {
        CHECK_FALSE(t.levels[6].empty());
        CHECK(surv);
      } else {
        REQUIRE(ext >= 1);
        REQUIRE(ext <= 6);
        CHECK(t.levels[ext].empty());
        CHECK_FALSE(t.levels[ext - 1].empty());
        CHECK_FALSE(surv);
      }
    }
  }
}

TEST_CASE("ancestor arithmetic") {
  DyadicSquare sq{5, 25, 9};
  DyadicSquare a = ancestor(sq, 2, 2);
  CHECK(a.level == 3);
  CHECK(a.ix == 6);
  CHECK(a.iy == 2);
  CHECK(ancestor(sq, 0, 2) == sq);
  CHECK(ancestor_cell(Cell{7, 6}, 1, 2) == Cell{3, 3});
  CHECK(ancestor_cell(Cell{8, 0}, 2, 3) == Cell{0, 0});
}

TEST_CASE("for_each_descendant enumerates the retained subtree") {
  PercolationTree t = generate(PercParams{Rat(3, 4), 2, 5, 99});
  REQUIRE_FALSE(t.levels[5].empty());
  // pick a level-2 cell; its descendants at level 5 must match a filter scan
  REQUIRE_FALSE(t.levels[2].empty());
  Cell anc = t.levels[2][0];
  std::vector<Cell> got;
  for_each_descendant(t, anc, 2, 5, [&](const Cell& c) { got.push_back(c); });
  std::vector<Cell> want;
  for (const Cell& c : t.levels[5])
    if (ancestor_cell(c, 3, 2) == anc) want.push_back(c);
  CHECK(got == want);
  CHECK(std::is_sorted(got.begin(), got.end()));
}
