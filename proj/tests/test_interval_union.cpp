#include <doctest.h>

#include <fracvis/interval_union.hpp>
#include <fracvis/rational.hpp>

#include <cstdint>

using namespace fracvis;

TEST_CASE("insert merges overlapping and touching intervals") {
  IntervalUnion<int64_t> u;
  u.insert(0, 10);
  u.insert(20, 30);
  CHECK(u.size() == 2);
  u.insert(10, 20);  // closed touch, all three merge
  REQUIRE(u.size() == 1);
  CHECK(u.pieces()[0] == Interval<int64_t>{0, 30});
  u.insert(-5, -1);
  CHECK(u.size() == 2);
  u.insert(-1, 0);
  CHECK(u.size() == 1);
  CHECK(u.total_length() == 35);
  CHECK_THROWS_AS(u.insert(5, 4), std::invalid_argument);
}

TEST_CASE("degenerate intervals are legal and merge by contact") {
  IntervalUnion<int64_t> u;
  u.insert(5, 5);
  CHECK(u.size() == 1);
  CHECK(u.contains_point(5));
  CHECK(u.total_length() == 0);
  u.insert(5, 9);
  CHECK(u.size() == 1);
  CHECK(u.pieces()[0] == Interval<int64_t>{5, 9});
}

TEST_CASE("uncovered reports positive-length gaps only") {
  IntervalUnion<int64_t> u;
  u.insert(2, 4);
  u.insert(6, 8);
  auto gaps = u.uncovered(0, 10);
  REQUIRE(gaps.size() == 3);
  CHECK(gaps[0] == Interval<int64_t>{0, 2});
  CHECK(gaps[1] == Interval<int64_t>{4, 6});
  CHECK(gaps[2] == Interval<int64_t>{8, 10});
  CHECK(u.uncovered_length(0, 10) == 6);

  CHECK(u.uncovered(2, 4).empty());
  CHECK(u.covers(2, 4));
  CHECK(u.covers(3, 3));
  CHECK_FALSE(u.covers(2, 5));
  // querying exactly a stored endpoint: zero-length leftover is dropped
  CHECK(u.uncovered(4, 4).empty());
  auto tail = u.uncovered(3, 6);
  REQUIRE(tail.size() == 1);
  CHECK(tail[0] == Interval<int64_t>{4, 6});
}

TEST_CASE("contains_point respects closed endpoints") {
  IntervalUnion<int64_t> u;
  u.insert(1, 3);
  CHECK(u.contains_point(1));
  CHECK(u.contains_point(3));
  CHECK(u.contains_point(2));
  CHECK_FALSE(u.contains_point(0));
  CHECK_FALSE(u.contains_point(4));
  CHECK_FALSE(IntervalUnion<int64_t>{}.contains_point(0));
}

TEST_CASE("works over exact rationals") {
  IntervalUnion<Rat> u;
  u.insert(Rat(0), Rat(1, 3));
  u.insert(Rat(1, 3), Rat(1, 2));
  REQUIRE(u.size() == 1);
  CHECK(u.pieces()[0].lo == Rat(0));
  CHECK(u.pieces()[0].hi == Rat(1, 2));
  u.insert(Rat(2, 3), Rat(3, 4));
  CHECK(u.uncovered_length(Rat(0), Rat(1)) == Rat(1, 2) - Rat(1, 12));
  auto gaps = u.uncovered(Rat(0), Rat(1));
  REQUIRE(gaps.size() == 2);
  CHECK(gaps[0].lo == Rat(1, 2));
  CHECK(gaps[0].hi == Rat(2, 3));
  CHECK(gaps[1].lo == Rat(3, 4));
  CHECK(gaps[1].hi == Rat(1));
}

TEST_CASE("free helpers wrap member operations") {
  IntervalUnion<int64_t> u;
  union_insert(u, Interval<int64_t>{0, 4});
  union_insert(u, Interval<int64_t>{8, 12});
  IntervalUnion<int64_t> rest = uncovered_part(u, Interval<int64_t>{2, 10});
  REQUIRE(rest.size() == 1);
  CHECK(rest.pieces()[0] == Interval<int64_t>{4, 8});
  IntervalUnion<int64_t> none = uncovered_part(u, Interval<int64_t>{0, 4});
  CHECK(none.empty());
}

TEST_CASE("insertion order does not matter") {
  IntervalUnion<int64_t> a;
  IntervalUnion<int64_t> b;
  int64_t xs[][2] = {{0, 2}, {9, 11}, {4, 6}, {1, 5}, {20, 20}, {11, 13}};
  for (auto& iv : xs) a.insert(iv[0], iv[1]);
  for (int i = 5; i >= 0; --i) b.insert(xs[i][0], xs[i][1]);
  CHECK(a.pieces() == b.pieces());
  REQUIRE(a.size() == 3);
  CHECK(a.pieces()[0] == Interval<int64_t>{0, 6});
  CHECK(a.pieces()[1] == Interval<int64_t>{9, 13});
  CHECK(a.pieces()[2] == Interval<int64_t>{20, 20});
}
