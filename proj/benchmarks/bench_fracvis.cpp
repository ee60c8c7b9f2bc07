#include <benchmark/benchmark.h>

#include <cstdint>
#include <random>

#include <fracvis/analysis.hpp>
#include <fracvis/grid.hpp>
#include <fracvis/interval_union.hpp>
#include <fracvis/montecarlo.hpp>
#include <fracvis/visibility.hpp>

namespace {

using namespace fracvis;

PercParams params_for(int depth, uint64_t seed) {
  PercParams p;
  p.p = Rat(3, 4);
  p.M = 2;
  p.depth = depth;
  p.seed = seed;
  return p;
}

// One fixed supercritical realization per depth so runs compare like with
// like across invocations.
const PercolationTree& tree_for(int depth) {
  static PercolationTree t5 = generate(params_for(5, 11));
  static PercolationTree t6 = generate(params_for(6, 11));
  static PercolationTree t7 = generate(params_for(7, 11));
  switch (depth) {
    case 5: return t5;
    case 6: return t6;
    default: return t7;
  }
}

void BM_Generate(benchmark::State& state) {
  int depth = int(state.range(0));
  uint64_t seed = 1;
  for (auto _ : state) {
    PercolationTree t = generate(params_for(depth, seed++));
    benchmark::DoNotOptimize(t.levels.data());
  }
}
BENCHMARK(BM_Generate)->Arg(6)->Arg(8)->Arg(10);

void BM_ExtinctionOracle(benchmark::State& state) {
  int n = int(state.range(0));
  for (auto _ : state) {
    double q = extinction_oracle_d(Rat(1, 2), 2, n);
    benchmark::DoNotOptimize(q);
  }
}
BENCHMARK(BM_ExtinctionOracle)->Arg(10)->Arg(20)->Arg(40);

void BM_IntervalUnionInsert(benchmark::State& state) {
  int64_t n = state.range(0);
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int64_t> lo_of(0, 1 << 20);
  std::uniform_int_distribution<int64_t> len_of(1, 1 << 8);
  std::vector<Interval<int64_t>> pieces;
  pieces.reserve(size_t(n));
  for (int64_t i = 0; i < n; ++i) {
    int64_t lo = lo_of(rng);
    pieces.push_back(Interval<int64_t>{lo, lo + len_of(rng)});
  }
  for (auto _ : state) {
    IntervalUnion<int64_t> u;
    for (const auto& piece : pieces) u.insert(piece.lo, piece.hi);
    benchmark::DoNotOptimize(u.size());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_IntervalUnionInsert)->Arg(1000)->Arg(10000);

void BM_LineCover(benchmark::State& state) {
  int depth = int(state.range(0));
  const PercolationTree& tree = tree_for(depth);
  DirectionSpec d = make_direction(1, 1);
  for (auto _ : state) {
    VisibleCover cover = visible_from_line(tree, depth, d, +1);
    benchmark::DoNotOptimize(cover.marked.data());
  }
}
BENCHMARK(BM_LineCover)->Arg(5)->Arg(6)->Arg(7);

void BM_PointCover(benchmark::State& state) {
  int depth = int(state.range(0));
  const PercolationTree& tree = tree_for(depth);
  Viewpoint x = make_viewpoint(Rat(-1), Rat(-1));
  for (auto _ : state) {
    VisibleCover cover = visible_from_point(tree, depth, x);
    benchmark::DoNotOptimize(cover.marked.data());
  }
}
BENCHMARK(BM_PointCover)->Arg(5)->Arg(6);

void BM_RayOracle(benchmark::State& state) {
  int depth = 5;
  const PercolationTree& tree = tree_for(depth);
  SightSpec sight = LineSight{make_direction(2, 1), +1};
  int64_t R = state.range(0);
  for (auto _ : state) {
    auto hits = ray_cast_oracle(tree, depth, sight, R);
    benchmark::DoNotOptimize(hits.data());
  }
}
BENCHMARK(BM_RayOracle)->Arg(1 << 10)->Arg(1 << 14);

void BM_CountPassed(benchmark::State& state) {
  int depth = int(state.range(0));
  const PercolationTree& tree = tree_for(depth);
  RatPoint a{Rat(0), Rat(1, 3)};
  RatPoint b{Rat(1), Rat(1, 3) + Rat(1, 8192)};
  for (auto _ : state) {
    int64_t c = count_passed(tree, depth, a, b);
    benchmark::DoNotOptimize(c);
  }
}
BENCHMARK(BM_CountPassed)->Arg(6)->Arg(7);

}  // namespace

BENCHMARK_MAIN();
