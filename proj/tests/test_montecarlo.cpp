#include <doctest.h>

#include <fracvis/io.hpp>
#include <fracvis/montecarlo.hpp>

#include <cmath>
#include <cstdlib>

using namespace fracvis;

namespace {

const ExperimentCell& cell_of(const ExperimentReport& rep, size_t i = 0) {
  REQUIRE(rep.cells.size() > i);
  return rep.cells[i];
}

double scalar_of(const ExperimentCell& cell, const std::string& name) {
  for (const auto& [k, v] : cell.scalars)
    if (k == name) return v;
  FAIL("missing scalar ", name, " in cell ", cell.label);
  return 0;
}

bool has_scalar(const ExperimentCell& cell, const std::string& name) {
  for (const auto& [k, v] : cell.scalars)
    if (k == name) return true;
  return false;
}

}  // namespace

TEST_CASE("extinction oracle exact small cases") {
  // q_1 = (1 - p)^4 at M = 2
  CHECK(extinction_oracle(Rat(1, 2), 2, 1) == Rat(1, 16));
  CHECK(extinction_oracle(Rat(1, 2), 2, 0) == Rat(0));
  // q_2 = (1/2 + q_1/2)^4 = (17/32)^4
  CHECK(extinction_oracle(Rat(1, 2), 2, 2) == Rat(83521, 1048576));
  CHECK(extinction_oracle(Rat(1), 2, 5) == Rat(0));
  // M = 3: q_1 = (1 - p)^9
  Rat q13 = extinction_oracle(Rat(1, 2), 3, 1);
  CHECK(q13 == Rat(1, 512));
}

TEST_CASE("extinction oracle float path agrees with exact") {
  for (auto p : {Rat(1, 2), Rat(3, 10), Rat(7, 10)}) {
    for (int n : {1, 3, 6, 9}) {
      double exact = extinction_oracle(p, 2, n).to_double();
      double fl = extinction_oracle_d(p, 2, n);
      CHECK(fl == doctest::Approx(exact).epsilon(1e-14));
    }
  }
  CHECK(extinction_oracle_d(Rat(1, 2), 2, 2) ==
        doctest::Approx(0.0796518325805664).epsilon(1e-13));
  CHECK(extinction_oracle_d(Rat(1, 2), 2, 4) ==
        doctest::Approx(0.08659093401901499).epsilon(1e-12));
}

TEST_CASE("deep exact oracle throws length_error, float path survives") {
  CHECK_THROWS_AS(extinction_oracle(Rat(12345, 65536), 2, 30), std::length_error);
  double deep = extinction_oracle_d(Rat(1, 2), 2, 60);
  CHECK(deep > 0.087);
  CHECK(deep < 0.088);
}

TEST_CASE("extinction_limit frozen values") {
  CHECK(extinction_limit(Rat(1, 2), 2) ==
        doctest::Approx(0.08737802538415272).epsilon(1e-10));
  CHECK(extinction_limit(Rat(3, 5), 2) ==
        doctest::Approx(0.030640985).epsilon(1e-6));
  CHECK(extinction_limit(Rat(1), 2) == 0.0);
  CHECK(extinction_limit(Rat(1, 4), 2) == 1.0);
  CHECK(extinction_limit(Rat(1, 8), 2) == 1.0);
}

TEST_CASE("aggregate basics") {
  Aggregate a = aggregate({1.0, 2.0, 3.0});
  CHECK(a.mean == doctest::Approx(2.0));
  CHECK(a.se == doctest::Approx(std::sqrt(1.0 / 3.0)));
  CHECK(a.count == 3);
  CHECK(a.lo < a.mean);
  CHECK(a.hi > a.mean);

  Aggregate one = aggregate({5.0});
  CHECK(one.mean == 5.0);
  CHECK(one.se == 0.0);
  CHECK(aggregate({}).count == 0);
}

TEST_CASE("aggregate_proportion Wilson interval") {
  Aggregate w = aggregate_proportion(0, 100);
  CHECK(w.lo == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(w.hi == doctest::Approx(0.036994).epsilon(1e-3));
  CHECK(w.hi > 0.0);  // never degenerate at the boundary

  Aggregate h = aggregate_proportion(50, 100);
  CHECK(h.mean == doctest::Approx(0.5));
  CHECK(h.lo > 0.40);
  CHECK(h.hi < 0.60);

  Aggregate full = aggregate_proportion(100, 100);
  CHECK(full.lo < 1.0);
  CHECK(full.hi == doctest::Approx(1.0));
}

TEST_CASE("kind names round trip") {
  for (auto kind : {ExperimentKind::kExtinction, ExperimentKind::kDimension,
                    ExperimentKind::kVisibleDimension, ExperimentKind::kCorner,
                    ExperimentKind::kBlock, ExperimentKind::kStripeLength,
                    ExperimentKind::kCoverage, ExperimentKind::kPassedCounts})
    CHECK(kind_from_name(kind_name(kind)) == kind);
  CHECK_THROWS(kind_from_name("no-such-kind"));
}

TEST_CASE("validate_config rejects contradictions") {
  ExperimentConfig c;
  c.kind = ExperimentKind::kExtinction;
  CHECK_THROWS(validate_config(c));  // ps empty
  c.ps = {Rat(1, 2)};
  CHECK_NOTHROW(validate_config(c));
  c.trials = 0;
  CHECK_THROWS(validate_config(c));
  c.trials = 10;
  c.ps = {Rat(2)};
  CHECK_THROWS(validate_config(c));
  c.ps = {Rat(1, 2)};
  c.depth = -1;
  CHECK_THROWS(validate_config(c));

  ExperimentConfig s;
  s.kind = ExperimentKind::kStripeLength;
  s.ps = {Rat(3, 4)};
  s.depth = 8;
  s.directions = {make_direction(1, 0)};  // axis direction: no stripe bound
  CHECK_THROWS(validate_config(s));
  s.directions = {make_direction(1, 1)};
  s.eps = Rat(1, 2);  // above the (1,1) bound 1/4
  CHECK_THROWS(validate_config(s));
  s.eps = Rat(1, 8);
  CHECK_NOTHROW(validate_config(s));

  ExperimentConfig d;
  d.kind = ExperimentKind::kDimension;
  d.ps = {Rat(3, 4)};
  d.depth = 6;
  d.k_lo = 5;
  d.k_hi = 6;  // span < 2
  CHECK_THROWS(validate_config(d));
  d.k_lo = 2;
  d.k_hi = 7;  // past depth
  CHECK_THROWS(validate_config(d));
  d.k_lo = 0;
  d.k_hi = 0;
  CHECK_NOTHROW(validate_config(d));
}

TEST_CASE("resolved fills kind defaults") {
  ExperimentConfig c;
  c.kind = ExperimentKind::kVisibleDimension;
  c.ps = {Rat(3, 4)};
  c.depth = 6;
  ExperimentConfig r = resolved(c);
  CHECK_FALSE(r.directions.empty());
  CHECK_FALSE(r.viewpoints.empty());
  CHECK(r.k_lo == 2);
  CHECK(r.k_hi == 6);

  ExperimentConfig e;
  e.kind = ExperimentKind::kCorner;
  e.ps = {Rat(3, 4)};
  e.depth = 8;
  ExperimentConfig re = resolved(e);
  CHECK(re.ms == std::vector<int>{10, 20, 40});
  CHECK_FALSE(re.directions.empty());
  CHECK(re.viewpoints.empty());  // line-only kind

  ExperimentConfig pc;
  pc.kind = ExperimentKind::kPassedCounts;
  pc.ps = {Rat(1)};
  pc.depth = 6;
  ExperimentConfig rp = resolved(pc);
  CHECK_FALSE(rp.lines.empty());
  CHECK(rp.k_hi == 6);
  CHECK(rp.n_growth >= 1);
}

TEST_CASE("extinction run matches the oracle closely") {
  ExperimentConfig c;
  c.kind = ExperimentKind::kExtinction;
  c.ps = {Rat(1, 2)};
  c.depth = 6;
  c.trials = 4000;
  c.seed = 7;
  ExperimentReport rep = run(c);
  const auto& cell = cell_of(rep);
  double oracle = scalar_of(cell, "oracle");
  CHECK(oracle == doctest::Approx(extinction_oracle(Rat(1, 2), 2, 6).to_double()));
  double qhat = scalar_of(cell, "q_hat_mean");
  double se = scalar_of(cell, "q_hat_se");
  CHECK(std::abs(qhat - oracle) < 4 * std::max(se, 1e-12));
  CHECK(std::abs(scalar_of(cell, "z_score")) < 4.0);
  CHECK(rep.trials_run == 4000);
  CHECK(rep.trial_seeds.size() == 4000);
}

TEST_CASE("dimension run at p=1 gives slope exactly 2") {
  ExperimentConfig c;
  c.kind = ExperimentKind::kDimension;
  c.ps = {Rat(1)};
  c.depth = 6;
  c.trials = 2;
  ExperimentReport rep = run(c);
  const auto& cell = cell_of(rep);
  CHECK(scalar_of(cell, "slope_mean") == 2.0);
  CHECK(scalar_of(cell, "theoretical") == doctest::Approx(2.0));
  CHECK(scalar_of(cell, "survivors") == 2.0);
}

TEST_CASE("visible dimension run at p=1 has slope near 1 for lines") {
  ExperimentConfig c;
  c.kind = ExperimentKind::kVisibleDimension;
  c.ps = {Rat(1)};
  c.depth = 6;
  c.trials = 1;
  c.directions = {make_direction(1, 1)};
  ExperimentReport rep = run(c);
  const auto& cell = cell_of(rep);
  double slope = scalar_of(cell, "slope_mean");
  CHECK(slope > 0.9);
  CHECK(slope < 1.15);
}

TEST_CASE("coverage run reports monotone columns") {
  ExperimentConfig c;
  c.kind = ExperimentKind::kCoverage;
  c.ps = {Rat(3, 4)};
  c.depth = 6;
  c.trials = 40;
  c.k_lo = 2;
  c.k_hi = 6;
  c.directions = {make_direction(1, 1)};
  c.viewpoints = {};
  ExperimentReport rep = run(c);
  const auto& cell = cell_of(rep);
  CHECK(scalar_of(cell, "violations") == 0.0);
  REQUIRE_FALSE(cell.rows.empty());
  // q_hat column nonincreasing in m
  for (size_t i = 1; i < cell.rows.size(); ++i)
    CHECK(cell.rows[i][1] <= cell.rows[i - 1][1] + 1e-12);
}

TEST_CASE("block run yields positive block probability at p=1") {
  ExperimentConfig c;
  c.kind = ExperimentKind::kBlock;
  c.ps = {Rat(1)};
  c.depth = 8;
  c.m = 8;
  c.trials = 2;
  c.directions = {make_direction(1, 1)};
  ExperimentReport rep = run(c);
  const auto& cell = cell_of(rep);
  CHECK(scalar_of(cell, "q_hat_mean") == doctest::Approx(1.0));
}

TEST_CASE("passed counts run at p=1 tracks 2^k") {
  ExperimentConfig c;
  c.kind = ExperimentKind::kPassedCounts;
  c.ps = {Rat(1)};
  c.depth = 6;
  c.trials = 1;
  ExperimentReport rep = run(c);
  const auto& cell = cell_of(rep);
  REQUIRE_FALSE(cell.rows.empty());
  // mean_v column doubles per level for near-horizontal lines
  for (size_t i = 1; i < cell.rows.size(); ++i) {
    double ratio = cell.rows[i][1] / cell.rows[i - 1][1];
    CHECK(ratio > 1.8);
    CHECK(ratio < 2.2);
  }
}

TEST_CASE("reports are byte-identical across reruns and worker counts") {
  ExperimentConfig c;
  c.kind = ExperimentKind::kExtinction;
  c.ps = {Rat(1, 2), Rat(7, 10)};
  c.depth = 5;
  c.trials = 500;
  c.seed = 11;

  setenv("FRACVIS_THREADS", "1", 1);
  std::string one = dump_json(report_to_json(run(c)));
  setenv("FRACVIS_THREADS", "3", 1);
  std::string three = dump_json(report_to_json(run(c)));
  unsetenv("FRACVIS_THREADS");
  std::string natural = dump_json(report_to_json(run(c)));

  CHECK(one == three);
  CHECK(one == natural);
}

TEST_CASE("worker_count honors the environment override") {
  setenv("FRACVIS_THREADS", "4", 1);
  CHECK(worker_count() == 4);
  setenv("FRACVIS_THREADS", "not-a-number", 1);
  CHECK(worker_count() >= 1);  // garbage falls back to hardware
  unsetenv("FRACVIS_THREADS");
  CHECK(worker_count() >= 1);
}

TEST_CASE("corner run produces a contraction estimate") {
  ExperimentConfig c;
  c.kind = ExperimentKind::kCorner;
  c.ps = {Rat(3, 4)};
  c.depth = 6;
  c.trials = 60;
  c.ms = {5, 10};
  ExperimentReport rep = run(c);
  const auto& cell = cell_of(rep);
  double zeta = scalar_of(cell, "zeta_hat");
  CHECK(zeta >= 0.0);
  CHECK(zeta < 1.0);
  CHECK(has_scalar(cell, "tail_emp_m5"));
  CHECK(has_scalar(cell, "tail_bound_m10"));
  double eta = scalar_of(cell, "eta");
  CHECK(eta > 0.0);
}
