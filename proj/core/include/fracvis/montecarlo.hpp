#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fracvis/geometry.hpp"
#include "fracvis/grid.hpp"
#include "fracvis/rational.hpp"

namespace fracvis {

// Exact n-step extinction probability q_n: q_0 = 0,
// q_{j+1} = (1 - p + p q_j)^(M^2).  The reduced form of each iterate keeps
// its gcd-free shape under powering, so no per-step canonicalization beyond
// the affine step is needed.  Denominator bit counts still grow like
// (M^2)^n, so depths whose exact value would exceed the guard throw
// length_error; use extinction_oracle_d there.
Rat extinction_oracle(const Rat& p, int M, int n);

// Same iteration in 256-bit floating point.  The map is a contraction on
// [0,1], so per-step rounding (< 2^-200) never accumulates past double
// precision.
double extinction_oracle_d(const Rat& p, int M, int n);

// Limit q_infty as the least fixed point: iterate until successive values
// agree to 1e-15.  Equals 0 iff M^2 p <= 1 (p above 1/M^2 survival regime);
// equals 1 when p <= 1/M^2.
double extinction_limit(const Rat& p, int M);

enum class ExperimentKind {
  kExtinction,
  kDimension,
  kVisibleDimension,
  kCorner,
  kBlock,
  kStripeLength,
  kCoverage,
  kPassedCounts,
};

const char* kind_name(ExperimentKind kind);
ExperimentKind kind_from_name(const std::string& name);

// One experiment sweep.  Zero-valued fields take kind-specific defaults
// (resolved() applies them); validate_config rejects contradictory settings.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kExtinction;
  std::vector<Rat> ps;
  int M = 2;
  int depth = 6;
  int64_t trials = 100;
  uint64_t seed = 1;
  std::vector<DirectionSpec> directions;
  std::vector<RatPoint> viewpoints;
  Rat eps;                 // 0 = per-direction default stripe width
  int m = 0;               // block / coverage / length resolution, 0 = default
  int k_lo = 0;            // scale range, 0/0 = kind default
  int k_hi = 0;
  std::vector<int> ms;     // corner tail-bound horizons
  double eta = 0.2;        // corner tail-bound slack
  std::vector<std::array<RatPoint, 2>> lines;  // passed_counts sight lines
  int n_growth = 0;        // passed_counts growth offset, 0 = default
};

std::vector<DirectionSpec> default_directions();
std::vector<RatPoint> default_viewpoints();

void validate_config(const ExperimentConfig& config);
ExperimentConfig resolved(const ExperimentConfig& config);

// Mean / stderr of a sample plus a normal 95% interval; stderr uses the
// n-1 denominator and is 0 for a single value.
struct Aggregate {
  double mean = 0;
  double se = 0;
  double lo = 0;
  double hi = 0;
  int64_t count = 0;
};

Aggregate aggregate(const std::vector<double>& values);

// Wilson 95% interval for hits out of total; never degenerates to [0,0]
// or [1,1] for total > 0.
Aggregate aggregate_proportion(int64_t hits, int64_t total);

struct ExperimentCell {
  std::string label;
  std::vector<std::pair<std::string, double>> scalars;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> notes;
};

struct ExperimentReport {
  ExperimentConfig config;  // resolved form
  std::vector<ExperimentCell> cells;
  std::vector<std::string> flags;
  std::vector<uint64_t> trial_seeds;
  int64_t trials_run = 0;
  int64_t trials_discarded = 0;
};

// Worker threads used by run(): FRACVIS_THREADS if set (>= 1), else
// hardware concurrency.  Trial outcomes are reduced in trial order, so the
// report is identical for every worker count.
int worker_count();

ExperimentReport run(const ExperimentConfig& config);

}  // namespace fracvis
