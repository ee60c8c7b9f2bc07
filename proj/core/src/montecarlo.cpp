#include "fracvis/montecarlo.hpp"

#include <gmp.h>
#include <gmpxx.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>

#include "fracvis/analysis.hpp"
#include "fracvis/prng.hpp"
#include "fracvis/visibility.hpp"

namespace fracvis {

namespace {

constexpr double kZ95 = 1.959963984540054;

void check_law(const Rat& p, int M, int n) {
  if (p.sign() <= 0 || p > Rat(1))
    throw std::invalid_argument("retention probability must be in (0, 1]");
  if (M < 2 || M > 100) throw std::invalid_argument("M must be in [2, 100]");
  if (n < 0) throw std::invalid_argument("depth must be nonnegative");
}

}  // namespace

Rat extinction_oracle(const Rat& p, int M, int n) {
  check_law(p, M, n);
  const unsigned long e = static_cast<unsigned long>(M) * static_cast<unsigned long>(M);
  // gcd(a^e, b^e) = gcd(a, b)^e, so powering a reduced fraction keeps it
  // reduced; only the affine step needs canonicalization.
  Rat q(0);
  for (int j = 0; j < n; ++j) {
    Rat t = Rat(1) - p + p * q;
    mpz_class tn = t.num(), td = t.den();
    size_t bits = mpz_sizeinbase(td.get_mpz_t(), 2);
    if (bits > (size_t(1) << 25) / e)
      throw std::length_error(
          "exact extinction value too large at this depth; "
          "use extinction_oracle_d");
    mpz_class pn, pd;
    mpz_pow_ui(pn.get_mpz_t(), tn.get_mpz_t(), e);
    mpz_pow_ui(pd.get_mpz_t(), td.get_mpz_t(), e);
    q = Rat(pn, pd);
  }
  return q;
}

double extinction_oracle_d(const Rat& p, int M, int n) {
  check_law(p, M, n);
  const unsigned long e = static_cast<unsigned long>(M) * static_cast<unsigned long>(M);
  mpf_class q(0, 256), t(0, 256), pf(0, 256);
  mpf_set_q(pf.get_mpf_t(), p.raw().get_mpq_t());
  for (int j = 0; j < n; ++j) {
    t = 1 - pf + pf * q;
    mpf_pow_ui(q.get_mpf_t(), t.get_mpf_t(), e);
  }
  return q.get_d();
}

double extinction_limit(const Rat& p, int M) {
  check_law(p, M, 0);
  if (p <= Rat(1, static_cast<long long>(M) * M)) return 1.0;
  const unsigned long e = static_cast<unsigned long>(M) * static_cast<unsigned long>(M);
  mpf_class q(0, 256), t(0, 256), pf(0, 256), prev(0, 256), diff(0, 256);
  mpf_set_q(pf.get_mpf_t(), p.raw().get_mpq_t());
  for (int j = 0; j < 200000; ++j) {
    prev = q;
    t = 1 - pf + pf * q;
    mpf_pow_ui(q.get_mpf_t(), t.get_mpf_t(), e);
    diff = abs(q - prev);
    if (diff < 1e-18) break;
  }
  return q.get_d();
}

const char* kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kExtinction: return "extinction";
    case ExperimentKind::kDimension: return "dimension";
    case ExperimentKind::kVisibleDimension: return "visible_dimension";
    case ExperimentKind::kCorner: return "corner";
    case ExperimentKind::kBlock: return "block";
    case ExperimentKind::kStripeLength: return "stripe_length";
    case ExperimentKind::kCoverage: return "coverage";
    case ExperimentKind::kPassedCounts: return "passed_counts";
  }
  throw std::invalid_argument("unknown experiment kind");
}

ExperimentKind kind_from_name(const std::string& name) {
  static const std::pair<const char*, ExperimentKind> table[] = {
      {"extinction", ExperimentKind::kExtinction},
      {"dimension", ExperimentKind::kDimension},
      {"visible_dimension", ExperimentKind::kVisibleDimension},
      {"corner", ExperimentKind::kCorner},
      {"block", ExperimentKind::kBlock},
      {"stripe_length", ExperimentKind::kStripeLength},
      {"coverage", ExperimentKind::kCoverage},
      {"passed_counts", ExperimentKind::kPassedCounts},
  };
  for (const auto& [n, k] : table)
    if (name == n) return k;
  throw std::invalid_argument("unknown experiment kind: " + name);
}

std::vector<DirectionSpec> default_directions() {
  return {DirectionSpec{1, 1}, DirectionSpec{2, 1}, DirectionSpec{1, 2}};
}

std::vector<RatPoint> default_viewpoints() {
  return {RatPoint{Rat(-1), Rat(-1)}, RatPoint{Rat(2), Rat(2)}};
}

namespace {

bool line_only_kind(ExperimentKind k) {
  return k == ExperimentKind::kCorner || k == ExperimentKind::kBlock ||
         k == ExperimentKind::kStripeLength;
}

bool sighted_kind(ExperimentKind k) {
  return k == ExperimentKind::kVisibleDimension ||
         k == ExperimentKind::kCoverage;
}

Rat stripe_bound(const DirectionSpec& d) {
  long long a = d.a, b = d.b;
  long long num = a * b < 0 ? -a * b : a * b;
  return Rat(num, 2 * (a * a + b * b));
}

std::vector<std::array<RatPoint, 2>> default_lines() {
  auto mk = [](long long cn, long long cd, long long sn, long long sd) {
    Rat c(cn, cd), s(sn, sd);
    return std::array<RatPoint, 2>{RatPoint{Rat(0), c},
                                   RatPoint{Rat(1), c + s}};
  };
  return {mk(1, 3, 0, 1), mk(2, 5, 1, 4096), mk(3, 7, -1, 4096),
          mk(5, 11, 1, 8192)};
}

}  // namespace

ExperimentConfig resolved(const ExperimentConfig& in) {
  ExperimentConfig c = in;
  for (auto& d : c.directions) d = make_direction(d.a, d.b);
  if (line_only_kind(c.kind) && c.directions.empty())
    c.directions = default_directions();
  if (sighted_kind(c.kind) && c.directions.empty() && c.viewpoints.empty()) {
    c.directions = default_directions();
    c.viewpoints = default_viewpoints();
  }
  switch (c.kind) {
    case ExperimentKind::kExtinction:
      break;
    case ExperimentKind::kDimension:
    case ExperimentKind::kVisibleDimension:
    case ExperimentKind::kCoverage:
      if (c.k_lo == 0 && c.k_hi == 0) {
        c.k_lo = 2;
        c.k_hi = c.depth;
      }
      break;
    case ExperimentKind::kCorner:
      if (c.ms.empty()) c.ms = {10, 20, 40};
      break;
    case ExperimentKind::kBlock:
      if (c.m == 0) c.m = c.depth;
      break;
    case ExperimentKind::kStripeLength:
      if (c.k_lo == 0 && c.k_hi == 0) {
        c.k_lo = 4;
        c.k_hi = std::max(4, c.depth - 4);
      }
      break;
    case ExperimentKind::kPassedCounts:
      if (c.lines.empty()) c.lines = default_lines();
      if (c.n_growth == 0) c.n_growth = std::min(4, std::max(1, c.depth - 1));
      if (c.k_lo == 0 && c.k_hi == 0) {
        c.k_hi = c.depth;
        c.k_lo = std::max(1, c.k_hi - c.n_growth);
      }
      break;
  }
  return c;
}

namespace {

void validate_resolved(const ExperimentConfig& c) {
  if (c.ps.empty()) throw std::invalid_argument("config needs at least one p");
  for (const Rat& p : c.ps) {
    PercParams probe{p, c.M, c.depth, 0};
    validate(probe);
  }
  if (c.trials < 1 || c.trials > 10000000)
    throw std::invalid_argument("trials must be in [1, 1e7]");
  if (!c.eps.is_zero() && (c.eps.sign() <= 0 || c.eps >= Rat(1, 2)))
    throw std::invalid_argument("eps must lie in (0, 1/2)");
  if (line_only_kind(c.kind)) {
    if (c.directions.empty())
      throw std::invalid_argument("stripe experiments need directions");
    for (const auto& d : c.directions) {
      if (d.a == 0 || d.b == 0)
        throw std::invalid_argument("stripe directions must be off-axis");
      if (!c.eps.is_zero() && c.eps >= stripe_bound(d))
        throw std::invalid_argument("eps exceeds the stripe bound for " +
                                    std::to_string(d.a) + "," +
                                    std::to_string(d.b));
    }
  }
  if (sighted_kind(c.kind)) {
    if (c.directions.empty() && c.viewpoints.empty())
      throw std::invalid_argument("sighted experiments need a direction or viewpoint");
    for (const auto& v : c.viewpoints) make_viewpoint(v.x, v.y);
  }
  switch (c.kind) {
    case ExperimentKind::kExtinction:
      break;
    case ExperimentKind::kDimension:
    case ExperimentKind::kVisibleDimension:
      if (c.k_lo < 0 || c.k_hi > c.depth || c.k_hi - c.k_lo < 2)
        throw std::invalid_argument("slope range needs >= 3 levels within depth");
      break;
    case ExperimentKind::kCorner:
      if (c.depth < 4) throw std::invalid_argument("corner runs need depth >= 4");
      if (c.ms.empty()) throw std::invalid_argument("corner runs need horizons");
      for (int m : c.ms)
        if (m < 1) throw std::invalid_argument("horizons must be >= 1");
      if (!(c.eta > 0 && c.eta < 1))
        throw std::invalid_argument("eta must lie in (0, 1)");
      break;
    case ExperimentKind::kBlock:
      if (c.m < 6 || c.m > c.depth)
        throw std::invalid_argument("block depth m must lie in [6, depth]");
      break;
    case ExperimentKind::kStripeLength:
      if (c.k_lo < 4 || c.k_hi > c.depth || c.k_lo > c.k_hi)
        throw std::invalid_argument("length range must lie in [4, depth]");
      break;
    case ExperimentKind::kCoverage:
      if (c.k_lo < 0 || c.k_hi > c.depth || c.k_lo > c.k_hi)
        throw std::invalid_argument("coverage range must lie in [0, depth]");
      break;
    case ExperimentKind::kPassedCounts:
      if (c.lines.empty())
        throw std::invalid_argument("passed_counts needs at least one line");
      for (const auto& ln : c.lines)
        if (ln[0].x == ln[1].x && ln[0].y == ln[1].y)
          throw std::invalid_argument("degenerate sight line");
      if (c.k_lo < 1 || c.k_hi > c.depth || c.k_lo > c.k_hi)
        throw std::invalid_argument("count range must lie in [1, depth]");
      if (c.n_growth < 1 || c.k_hi - c.n_growth < c.k_lo - 1)
        throw std::invalid_argument("growth offset exceeds the count range");
      break;
  }
}

}  // namespace

void validate_config(const ExperimentConfig& config) {
  validate_resolved(resolved(config));
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  a.count = static_cast<int64_t>(values.size());
  if (values.empty()) return a;
  double sum = 0;
  for (double v : values) sum += v;
  a.mean = sum / double(values.size());
  if (values.size() > 1) {
    double ss = 0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.se = std::sqrt(ss / double(values.size() - 1) / double(values.size()));
  }
  a.lo = a.mean - kZ95 * a.se;
  a.hi = a.mean + kZ95 * a.se;
  return a;
}

Aggregate aggregate_proportion(int64_t hits, int64_t total) {
  Aggregate a;
  a.count = total;
  if (total <= 0) return a;
  double nn = double(total);
  double ph = double(hits) / nn;
  a.mean = ph;
  a.se = std::sqrt(ph * (1 - ph) / nn);
  double z2 = kZ95 * kZ95;
  double denom = 1 + z2 / nn;
  double center = (ph + z2 / (2 * nn)) / denom;
  double half = kZ95 * std::sqrt(ph * (1 - ph) / nn + z2 / (4 * nn * nn)) / denom;
  a.lo = std::max(0.0, center - half);
  a.hi = std::min(1.0, center + half);
  return a;
}

int worker_count() {
  if (const char* env = std::getenv("FRACVIS_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 256) return int(v);
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : int(hc);
}

namespace {

// Runs fn(0..count-1) on the worker pool and returns results indexed by
// trial, so the reduction order never depends on scheduling.
template <typename R, typename Fn>
std::vector<R> parallel_map(int64_t count, Fn&& fn) {
  std::vector<R> out(static_cast<size_t>(count));
  int workers = static_cast<int>(std::min<int64_t>(worker_count(), count));
  if (workers <= 1) {
    for (int64_t i = 0; i < count; ++i) out[size_t(i)] = fn(i);
    return out;
  }
  std::atomic<int64_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  pool.reserve(size_t(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (!failed.load(std::memory_order_relaxed)) {
        int64_t i = next.fetch_add(1, std::memory_order_relaxed);
        if (i >= count) return;
        try {
          out[size_t(i)] = fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mu);
          if (!err) err = std::current_exception();
          failed.store(true, std::memory_order_relaxed);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
  return out;
}

std::string p_label(const Rat& p) { return "p=" + p.str(); }

std::string dir_label(const DirectionSpec& d) {
  return "d=(" + std::to_string(d.a) + "," + std::to_string(d.b) + ")";
}

std::string vp_label(const RatPoint& x) {
  return "x=(" + x.x.str() + "," + x.y.str() + ")";
}

std::string line_label(const std::array<RatPoint, 2>& ln) {
  return "line=(" + ln[0].x.str() + "," + ln[0].y.str() + ")-(" +
         ln[1].x.str() + "," + ln[1].y.str() + ")";
}

void push_scalar(ExperimentCell& c, const std::string& key, double v) {
  c.scalars.emplace_back(key, v);
}

void push_agg(ExperimentCell& c, const std::string& prefix, const Aggregate& a) {
  push_scalar(c, prefix + "_mean", a.mean);
  push_scalar(c, prefix + "_se", a.se);
  push_scalar(c, prefix + "_lo", a.lo);
  push_scalar(c, prefix + "_hi", a.hi);
  push_scalar(c, prefix + "_count", double(a.count));
}

uint64_t seed_for(const ExperimentConfig& cfg, size_t p_idx, int64_t t) {
  return derive_trial_seed(cfg.seed,
                           uint64_t(p_idx) * uint64_t(cfg.trials) + uint64_t(t));
}

void flag_small_sample(ExperimentReport& rep, const std::string& label,
                       int64_t survivors) {
  if (survivors < 30)
    rep.flags.push_back(label + ": only " + std::to_string(survivors) +
                        " surviving trials (< 30)");
}

Rat stripe_eps_for(const ExperimentConfig& cfg, const DirectionSpec& d) {
  return cfg.eps.is_zero() ? stripe_default_eps(d) : cfg.eps;
}

// Sights shared by the visible_dimension and coverage kinds: all
// directions first, then all viewpoints.
struct SightRef {
  bool is_line = true;
  size_t idx = 0;
};

std::vector<SightRef> sight_list(const ExperimentConfig& cfg) {
  std::vector<SightRef> out;
  for (size_t i = 0; i < cfg.directions.size(); ++i)
    out.push_back(SightRef{true, i});
  for (size_t i = 0; i < cfg.viewpoints.size(); ++i)
    out.push_back(SightRef{false, i});
  return out;
}

std::string sight_label(const ExperimentConfig& cfg, const SightRef& s) {
  return s.is_line ? dir_label(cfg.directions[s.idx])
                   : vp_label(cfg.viewpoints[s.idx]);
}

void run_extinction(const ExperimentConfig& cfg, ExperimentReport& rep) {
  for (size_t pi = 0; pi < cfg.ps.size(); ++pi) {
    const Rat& p = cfg.ps[pi];
    auto res = parallel_map<char>(cfg.trials, [&](int64_t t) {
      PercParams pp{p, cfg.M, cfg.depth, seed_for(cfg, pi, t)};
      return char(!survives_to(pp));
    });
    int64_t hits = 0;
    for (char r : res) hits += r;
    ExperimentCell cell;
    cell.label = p_label(p);
    Aggregate emp = aggregate_proportion(hits, cfg.trials);
    double oracle = extinction_oracle_d(p, cfg.M, cfg.depth);
    double limit = extinction_limit(p, cfg.M);
    double se_or = std::sqrt(std::max(0.0, oracle * (1 - oracle)) /
                             double(cfg.trials));
    double gap = emp.mean - oracle;
    double zscore = gap == 0 ? 0.0 : gap / std::max(se_or, 1e-300);
    push_agg(cell, "q_hat", emp);
    push_scalar(cell, "oracle", oracle);
    push_scalar(cell, "oracle_limit", limit);
    push_scalar(cell, "z_score", zscore);
    rep.cells.push_back(std::move(cell));
  }
}

struct DimTrial {
  char ok = 0;
  double slope = 0;
  std::vector<int64_t> counts;
};

void run_dimension(const ExperimentConfig& cfg, ExperimentReport& rep) {
  const int klo = cfg.k_lo, khi = cfg.k_hi;
  for (size_t pi = 0; pi < cfg.ps.size(); ++pi) {
    const Rat& p = cfg.ps[pi];
    auto res = parallel_map<DimTrial>(cfg.trials, [&](int64_t t) {
      DimTrial out;
      PercParams pp{p, cfg.M, cfg.depth, seed_for(cfg, pi, t)};
      PercolationTree tree = generate(pp);
      if (is_extinct(tree, cfg.depth)) return out;
      std::vector<DyadicSquare> leaves;
      leaves.reserve(tree.levels[size_t(cfg.depth)].size());
      for (const Cell& c : tree.levels[size_t(cfg.depth)])
        leaves.push_back(DyadicSquare{cfg.depth, c.ix, c.iy});
      ScalingTable st;
      st.k_lo = klo;
      st.p = p;
      st.M = cfg.M;
      st.n = cfg.depth;
      st.sight = "set";
      st.seed = pp.seed;
      for (int k = klo; k <= khi; ++k)
        st.counts.push_back(box_count(leaves, k, cfg.M));
      out.ok = 1;
      out.slope = dim_slope(st, klo, khi).slope;
      out.counts = std::move(st.counts);
      return out;
    });
    std::vector<double> slopes;
    std::vector<double> mean_counts(size_t(khi - klo + 1), 0.0);
    int64_t survivors = 0;
    for (const auto& r : res) {
      if (!r.ok) continue;
      ++survivors;
      slopes.push_back(r.slope);
      for (size_t i = 0; i < r.counts.size(); ++i)
        mean_counts[i] += double(r.counts[i]);
    }
    rep.trials_discarded += cfg.trials - survivors;
    ExperimentCell cell;
    cell.label = p_label(p);
    Aggregate sagg = aggregate(slopes);
    double theo = theoretical_dim(p, cfg.M);
    push_scalar(cell, "survivors", double(survivors));
    push_scalar(cell, "discarded", double(cfg.trials - survivors));
    push_agg(cell, "slope", sagg);
    push_scalar(cell, "theoretical", theo);
    push_scalar(cell, "abs_gap", std::abs(sagg.mean - theo));
    cell.columns = {"k", "mean_count"};
    for (int k = klo; k <= khi; ++k)
      cell.rows.push_back(
          {double(k), survivors ? mean_counts[size_t(k - klo)] / double(survivors)
                                : 0.0});
    flag_small_sample(rep, cell.label, survivors);
    rep.cells.push_back(std::move(cell));
  }
}

struct VisTrialSight {
  double slope = 0;
  char bounded = 0;
  int first_k = 0;
  std::vector<double> ratios;
};

struct VisTrial {
  char ok = 0;
  std::vector<VisTrialSight> per_sight;
};

void run_visible_dimension(const ExperimentConfig& cfg, ExperimentReport& rep) {
  const int klo = cfg.k_lo, khi = cfg.k_hi;
  auto sights = sight_list(cfg);
  for (size_t pi = 0; pi < cfg.ps.size(); ++pi) {
    const Rat& p = cfg.ps[pi];
    auto res = parallel_map<VisTrial>(cfg.trials, [&](int64_t t) {
      VisTrial out;
      PercParams pp{p, cfg.M, cfg.depth, seed_for(cfg, pi, t)};
      PercolationTree tree = generate(pp);
      if (is_extinct(tree, cfg.depth)) return out;
      out.ok = 1;
      out.per_sight.resize(sights.size());
      for (size_t si = 0; si < sights.size(); ++si) {
        const SightRef& s = sights[si];
        VisibleCover cover =
            s.is_line
                ? visible_from_line(tree, cfg.depth, cfg.directions[s.idx], 1)
                : visible_from_point(
                      tree, cfg.depth,
                      make_viewpoint(cfg.viewpoints[s.idx].x,
                                     cfg.viewpoints[s.idx].y));
        ScalingTable st;
        st.k_lo = klo;
        st.p = p;
        st.M = cfg.M;
        st.n = cfg.depth;
        st.sight = s.is_line ? "line" : "point";
        st.seed = pp.seed;
        for (int k = klo; k <= khi; ++k)
          st.counts.push_back(cover.counts[size_t(k)]);
        VisTrialSight& vs = out.per_sight[si];
        vs.slope = dim_slope(st, klo, khi).slope;
        // first_k = least k whose whole suffix [k, khi] obeys the
        // N_k <= a_k M^k cap; 0 when even khi breaks it.
        int first_ok = 0;
        bool all = true, suffix = true;
        for (int k = khi; k >= klo; --k) {
          double ak = s.is_line ? double(k) * k : double(k) * k * k;
          double cap = ak * std::pow(double(cfg.M), k);
          bool okk = double(st.counts[size_t(k - klo)]) <= cap;
          all = all && okk;
          if (suffix && okk)
            first_ok = k;
          else
            suffix = false;
          vs.ratios.push_back(double(st.counts[size_t(k - klo)]) /
                              std::pow(double(cfg.M), k));
        }
        std::reverse(vs.ratios.begin(), vs.ratios.end());
        vs.bounded = char(all);
        vs.first_k = first_ok;
      }
      return out;
    });
    int64_t survivors = 0;
    for (const auto& r : res) survivors += r.ok;
    rep.trials_discarded += cfg.trials - survivors;
    for (size_t si = 0; si < sights.size(); ++si) {
      std::vector<double> slopes, firsts;
      int64_t bounded = 0;
      std::vector<double> mean_ratio(size_t(khi - klo + 1), 0.0);
      for (const auto& r : res) {
        if (!r.ok) continue;
        const VisTrialSight& vs = r.per_sight[si];
        slopes.push_back(vs.slope);
        bounded += vs.bounded;
        if (vs.first_k > 0) firsts.push_back(double(vs.first_k));
        for (size_t i = 0; i < mean_ratio.size(); ++i)
          mean_ratio[i] += vs.ratios[i];
      }
      ExperimentCell cell;
      cell.label = p_label(p) + " " + sight_label(cfg, sights[si]);
      push_scalar(cell, "survivors", double(survivors));
      push_agg(cell, "slope", slopes.empty() ? Aggregate{} : aggregate(slopes));
      push_agg(cell, "share_bounded", aggregate_proportion(bounded, survivors));
      push_agg(cell, "first_k", firsts.empty() ? Aggregate{} : aggregate(firsts));
      cell.columns = {"k", "mean_ratio"};
      for (int k = klo; k <= khi; ++k)
        cell.rows.push_back(
            {double(k), survivors ? mean_ratio[size_t(k - klo)] / double(survivors)
                                  : 0.0});
      flag_small_sample(rep, cell.label, survivors);
      rep.cells.push_back(std::move(cell));
    }
  }
}

struct CornerTrial {
  char ok = 0;
  // (position i, X_{i-1}) -> (corner hits, total)
  std::map<std::pair<int64_t, int64_t>, std::pair<int64_t, int64_t>> buckets;
  std::map<int, std::map<int64_t, int64_t>> xm_hist;
  int64_t stripes = 0;
};

void run_corner(const ExperimentConfig& cfg, ExperimentReport& rep) {
  for (size_t pi = 0; pi < cfg.ps.size(); ++pi) {
    const Rat& p = cfg.ps[pi];
    auto res = parallel_map<CornerTrial>(cfg.trials, [&](int64_t t) {
      CornerTrial out;
      PercParams pp{p, cfg.M, cfg.depth, seed_for(cfg, pi, t)};
      PercolationTree tree = generate(pp);
      if (is_extinct(tree, cfg.depth)) return out;
      out.ok = 1;
      for (const auto& d : cfg.directions) {
        Rat eps = stripe_eps_for(cfg, d);
        auto ivs = stripe_decomposition(d, 1, cfg.depth, eps, cfg.M);
        for (const auto& I : ivs) {
          StripeProcess sp = stripe_squares(tree, cfg.depth, d, 1, I);
          int64_t len = int64_t(sp.c_list.size());
          for (int64_t i = 1; i <= len; ++i) {
            int64_t xprev = i >= 2 ? sp.x[size_t(i - 2)] : 0;
            auto& b = out.buckets[{i, xprev}];
            b.first += sp.z[size_t(i - 1)];
            b.second += 1;
          }
          for (int m : cfg.ms) {
            int64_t xm =
                len == 0 ? 0 : sp.x[size_t(std::min<int64_t>(m, len) - 1)];
            out.xm_hist[m][xm] += 1;
          }
          out.stripes += 1;
        }
      }
      return out;
    });
    CornerTrial pooled;
    int64_t survivors = 0;
    for (const auto& r : res) {
      if (!r.ok) continue;
      ++survivors;
      pooled.stripes += r.stripes;
      for (const auto& [key, v] : r.buckets) {
        auto& b = pooled.buckets[key];
        b.first += v.first;
        b.second += v.second;
      }
      for (const auto& [m, hist] : r.xm_hist)
        for (const auto& [x, cnt] : hist) pooled.xm_hist[m][x] += cnt;
    }
    rep.trials_discarded += cfg.trials - survivors;
    ExperimentCell cell;
    cell.label = p_label(p);
    double zeta = 0;
    bool any_bucket = false;
    int64_t hits_all = 0, total_all = 0;
    for (const auto& [key, v] : pooled.buckets) {
      hits_all += v.first;
      total_all += v.second;
      if (v.second >= 50) {
        any_bucket = true;
        zeta = std::max(zeta, double(v.first) / double(v.second));
      }
    }
    if (!any_bucket) {
      zeta = total_all ? double(hits_all) / double(total_all) : 0.0;
      rep.flags.push_back(cell.label +
                          ": no (i, X) bucket reached 50 samples; "
                          "zeta_hat falls back to the pooled rate");
    }
    push_scalar(cell, "survivors", double(survivors));
    push_scalar(cell, "stripes", double(pooled.stripes));
    push_scalar(cell, "zeta_hat", zeta);
    push_scalar(cell, "corner_rate",
                total_all ? double(hits_all) / double(total_all) : 0.0);
    push_scalar(cell, "eta", cfg.eta);
    for (int m : cfg.ms) {
      double thr = (zeta + cfg.eta) * m;
      int64_t exceed = 0, tot = 0;
      for (const auto& [x, cnt] : pooled.xm_hist[m]) {
        tot += cnt;
        if (double(x) > thr) exceed += cnt;
      }
      Aggregate tail = aggregate_proportion(exceed, tot);
      std::string suffix = "_m" + std::to_string(m);
      push_scalar(cell, "tail_emp" + suffix, tail.mean);
      push_scalar(cell, "tail_se" + suffix, tail.se);
      push_scalar(cell, "tail_bound" + suffix,
                  std::exp(-cfg.eta * cfg.eta * double(m) / 2.0));
    }
    cell.columns = {"i", "x_prev", "total", "hits", "freq"};
    for (const auto& [key, v] : pooled.buckets) {
      if (v.second < 50) continue;
      cell.rows.push_back({double(key.first), double(key.second),
                           double(v.second), double(v.first),
                           double(v.first) / double(v.second)});
    }
    flag_small_sample(rep, cell.label, survivors);
    rep.cells.push_back(std::move(cell));
  }
}

struct BlockTrialDir {
  int64_t blocks = 0;
  int64_t total = 0;
  std::map<int64_t, int64_t> y_hist;
};

struct BlockTrial {
  char ok = 0;
  std::vector<BlockTrialDir> per_dir;
};

void run_block(const ExperimentConfig& cfg, ExperimentReport& rep) {
  const int m = cfg.m;
  const int n = std::max(4, m - 4);
  for (size_t pi = 0; pi < cfg.ps.size(); ++pi) {
    const Rat& p = cfg.ps[pi];
    auto res = parallel_map<BlockTrial>(cfg.trials, [&](int64_t t) {
      BlockTrial out;
      PercParams pp{p, cfg.M, cfg.depth, seed_for(cfg, pi, t)};
      PercolationTree tree = generate(pp);
      if (is_extinct(tree, cfg.depth)) return out;
      out.ok = 1;
      out.per_dir.resize(cfg.directions.size());
      for (size_t di = 0; di < cfg.directions.size(); ++di) {
        const DirectionSpec& d = cfg.directions[di];
        BlockTrialDir& bd = out.per_dir[di];
        BlockCache cache;
        cache.base_level = n - 2;
        cache.m = m;
        cache.d = d;
        for (const Cell& qt : tree.levels[size_t(n - 2)]) {
          bd.total += 1;
          bd.blocks += is_block(tree, qt, n, d, m, &cache) ? 1 : 0;
        }
        Rat eps = stripe_eps_for(cfg, d);
        for (const auto& I : stripe_decomposition(d, 1, n, eps, cfg.M)) {
          StripeCount sc = stripe_cover_count(tree, n, d, 1, I, m, &cache);
          bd.y_hist[sc.y] += 1;
        }
      }
      return out;
    });
    int64_t survivors = 0;
    for (const auto& r : res) survivors += r.ok;
    rep.trials_discarded += cfg.trials - survivors;
    for (size_t di = 0; di < cfg.directions.size(); ++di) {
      int64_t blocks = 0, total = 0;
      std::map<int64_t, int64_t> y_hist;
      for (const auto& r : res) {
        if (!r.ok) continue;
        blocks += r.per_dir[di].blocks;
        total += r.per_dir[di].total;
        for (const auto& [y, cnt] : r.per_dir[di].y_hist) y_hist[y] += cnt;
      }
      ExperimentCell cell;
      cell.label = p_label(p) + " " + dir_label(cfg.directions[di]);
      Aggregate q = aggregate_proportion(blocks, total);
      push_scalar(cell, "survivors", double(survivors));
      push_scalar(cell, "stripe_level", double(n));
      push_scalar(cell, "block_depth", double(m));
      push_agg(cell, "q_hat", q);
      int64_t stripes = 0, ymax = 0;
      for (const auto& [y, cnt] : y_hist) {
        stripes += cnt;
        ymax = std::max(ymax, y);
      }
      // Survival frequencies of the per-stripe covering count, with an
      // exponential-tail fit over well-sampled rows.
      cell.columns = {"y", "count", "surv_frac"};
      std::vector<double> xs, ys;
      int64_t ge = stripes;
      for (int64_t y = 0; y <= ymax; ++y) {
        auto it = y_hist.find(y);
        int64_t cnt = it == y_hist.end() ? 0 : it->second;
        double frac = stripes ? double(ge) / double(stripes) : 0.0;
        cell.rows.push_back({double(y), double(cnt), frac});
        if (y >= 1 && ge >= 30 && frac > 0) {
          xs.push_back(double(y));
          ys.push_back(std::log(frac));
        }
        ge -= cnt;
      }
      double gamma = 0;
      if (xs.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (size_t i = 0; i < xs.size(); ++i) {
          sx += xs[i];
          sy += ys[i];
          sxx += xs[i] * xs[i];
          sxy += xs[i] * ys[i];
        }
        double nn = double(xs.size());
        double den = nn * sxx - sx * sx;
        if (den > 0) gamma = -(nn * sxy - sx * sy) / den;
      }
      push_scalar(cell, "gamma_hat", gamma);
      push_scalar(cell, "gamma_geom",
                  q.mean < 1 ? -std::log1p(-q.mean) : 0.0);
      push_scalar(cell, "stripes", double(stripes));
      flag_small_sample(rep, cell.label, survivors);
      rep.cells.push_back(std::move(cell));
    }
  }
}

struct LengthTrialRow {
  int64_t s = 0;
  double value = 0;
  double ratio = 0;
};

struct LengthTrial {
  char ok = 0;
  // per direction, per n in [k_lo, k_hi]
  std::vector<std::vector<LengthTrialRow>> rows;
};

void run_stripe_length(const ExperimentConfig& cfg, ExperimentReport& rep) {
  const int klo = cfg.k_lo, khi = cfg.k_hi;
  for (size_t pi = 0; pi < cfg.ps.size(); ++pi) {
    const Rat& p = cfg.ps[pi];
    auto res = parallel_map<LengthTrial>(cfg.trials, [&](int64_t t) {
      LengthTrial out;
      PercParams pp{p, cfg.M, cfg.depth, seed_for(cfg, pi, t)};
      PercolationTree tree = generate(pp);
      if (is_extinct(tree, cfg.depth)) return out;
      out.ok = 1;
      out.rows.resize(cfg.directions.size());
      for (size_t di = 0; di < cfg.directions.size(); ++di) {
        const DirectionSpec& d = cfg.directions[di];
        Rat eps = stripe_eps_for(cfg, d);
        for (int nn = klo; nn <= khi; ++nn) {
          int mm = std::min(nn + 4, cfg.depth);
          LengthEstimate le = visible_length_estimate(tree, nn, d, 1, eps, mm);
          LengthTrialRow row;
          row.s = le.s;
          row.value = le.value;
          row.ratio = double(le.s) * eps.to_double() /
                      std::pow(double(cfg.M), nn);
          out.rows[di].push_back(row);
        }
      }
      return out;
    });
    int64_t survivors = 0;
    for (const auto& r : res) survivors += r.ok;
    rep.trials_discarded += cfg.trials - survivors;
    for (size_t di = 0; di < cfg.directions.size(); ++di) {
      ExperimentCell cell;
      cell.label = p_label(p) + " " + dir_label(cfg.directions[di]);
      cell.columns = {"n", "mean_s", "mean_length", "mean_ratio", "max_ratio"};
      double max_ratio_all = 0;
      std::vector<double> top_lengths;
      for (int nn = klo; nn <= khi; ++nn) {
        size_t ri = size_t(nn - klo);
        double sum_s = 0, sum_len = 0, sum_ratio = 0, max_ratio = 0;
        for (const auto& r : res) {
          if (!r.ok) continue;
          const LengthTrialRow& row = r.rows[di][ri];
          sum_s += double(row.s);
          sum_len += row.value;
          sum_ratio += row.ratio;
          max_ratio = std::max(max_ratio, row.ratio);
          if (nn == khi) top_lengths.push_back(row.value);
        }
        double inv = survivors ? 1.0 / double(survivors) : 0.0;
        cell.rows.push_back({double(nn), sum_s * inv, sum_len * inv,
                             sum_ratio * inv, max_ratio});
        max_ratio_all = std::max(max_ratio_all, max_ratio);
      }
      push_scalar(cell, "survivors", double(survivors));
      push_scalar(cell, "max_ratio", max_ratio_all);
      push_agg(cell, "length",
               top_lengths.empty() ? Aggregate{} : aggregate(top_lengths));
      flag_small_sample(rep, cell.label, survivors);
      rep.cells.push_back(std::move(cell));
    }
  }
}

struct CoverageTrial {
  // per sight, per m in [k_lo, k_hi]
  std::vector<std::vector<char>> cov;
  int64_t violations = 0;
};

void run_coverage(const ExperimentConfig& cfg, ExperimentReport& rep) {
  const int klo = cfg.k_lo, khi = cfg.k_hi;
  auto sights = sight_list(cfg);
  Rat eps = cfg.eps.is_zero() ? Rat(1, 8) : cfg.eps;
  for (size_t pi = 0; pi < cfg.ps.size(); ++pi) {
    const Rat& p = cfg.ps[pi];
    auto res = parallel_map<CoverageTrial>(cfg.trials, [&](int64_t t) {
      CoverageTrial out;
      PercParams pp{p, cfg.M, cfg.depth, seed_for(cfg, pi, t)};
      PercolationTree tree = generate(pp);
      out.cov.resize(sights.size());
      for (size_t si = 0; si < sights.size(); ++si) {
        const SightRef& s = sights[si];
        for (int mm = klo; mm <= khi; ++mm) {
          bool covered =
              s.is_line
                  ? projection_coverage(tree, mm, cfg.directions[s.idx], eps)
                  : radial_coverage(tree, mm,
                                    make_viewpoint(cfg.viewpoints[s.idx].x,
                                                   cfg.viewpoints[s.idx].y),
                                    eps);
          // Coverage is monotone nonincreasing in depth, so a covered
          // level above an uncovered one is a defect.
          if (mm > klo && covered && !out.cov[si][size_t(mm - 1 - klo)])
            out.violations += 1;
          out.cov[si].push_back(char(covered));
        }
      }
      return out;
    });
    for (size_t si = 0; si < sights.size(); ++si) {
      ExperimentCell cell;
      cell.label = p_label(p) + " " + sight_label(cfg, sights[si]);
      cell.columns = {"m", "q_hat", "lo", "hi"};
      for (int mm = klo; mm <= khi; ++mm) {
        int64_t hits = 0;
        for (const auto& r : res) hits += r.cov[si][size_t(mm - klo)];
        Aggregate a = aggregate_proportion(hits, cfg.trials);
        cell.rows.push_back({double(mm), a.mean, a.lo, a.hi});
      }
      int64_t viol = 0;
      for (const auto& r : res) viol += r.violations;
      push_scalar(cell, "violations", double(viol));
      push_scalar(cell, "eps", eps.to_double());
      rep.cells.push_back(std::move(cell));
    }
  }
}

struct PassedTrial {
  // per line, per k in [k_lo, k_hi]
  std::vector<std::vector<int64_t>> v;
};

void run_passed_counts(const ExperimentConfig& cfg, ExperimentReport& rep) {
  const int klo = cfg.k_lo, khi = cfg.k_hi;
  const int kg = khi - cfg.n_growth;
  for (size_t pi = 0; pi < cfg.ps.size(); ++pi) {
    const Rat& p = cfg.ps[pi];
    auto res = parallel_map<PassedTrial>(cfg.trials, [&](int64_t t) {
      PassedTrial out;
      PercParams pp{p, cfg.M, cfg.depth, seed_for(cfg, pi, t)};
      PercolationTree tree = generate(pp);
      out.v.resize(cfg.lines.size());
      for (size_t li = 0; li < cfg.lines.size(); ++li)
        for (int k = klo; k <= khi; ++k)
          out.v[li].push_back(
              count_passed(tree, k, cfg.lines[li][0], cfg.lines[li][1]));
      return out;
    });
    for (size_t li = 0; li < cfg.lines.size(); ++li) {
      ExperimentCell cell;
      cell.label = p_label(p) + " " + line_label(cfg.lines[li]);
      cell.columns = {"k", "mean_v", "pos_rate", "pos_lo", "pos_hi"};
      for (int k = klo; k <= khi; ++k) {
        double sum = 0;
        int64_t pos = 0;
        for (const auto& r : res) {
          int64_t v = r.v[li][size_t(k - klo)];
          sum += double(v);
          pos += v > 0;
        }
        Aggregate pa = aggregate_proportion(pos, cfg.trials);
        cell.rows.push_back({double(k), sum / double(cfg.trials), pa.mean,
                             pa.lo, pa.hi});
      }
      std::vector<double> growth;
      for (const auto& r : res) {
        int64_t base = r.v[li][size_t(kg - klo)];
        if (base > 0)
          growth.push_back(double(r.v[li][size_t(khi - klo)]) / double(base));
      }
      double threshold = (std::pow(double(cfg.M), cfg.n_growth) - 1.0) *
                         std::pow(p.to_double(), cfg.n_growth);
      push_scalar(cell, "n_growth", double(cfg.n_growth));
      push_agg(cell, "growth", growth.empty() ? Aggregate{} : aggregate(growth));
      push_scalar(cell, "threshold", threshold);
      push_scalar(cell, "supercritical", threshold > 2.0 ? 1.0 : 0.0);
      rep.cells.push_back(std::move(cell));
    }
  }
}

}  // namespace

ExperimentReport run(const ExperimentConfig& config) {
  ExperimentConfig cfg = resolved(config);
  validate_resolved(cfg);
  ExperimentReport rep;
  rep.config = cfg;
  rep.trials_run = int64_t(cfg.ps.size()) * cfg.trials;
  rep.trial_seeds.reserve(size_t(rep.trials_run));
  for (size_t pi = 0; pi < cfg.ps.size(); ++pi)
    for (int64_t t = 0; t < cfg.trials; ++t)
      rep.trial_seeds.push_back(seed_for(cfg, pi, t));
  switch (cfg.kind) {
    case ExperimentKind::kExtinction: run_extinction(cfg, rep); break;
    case ExperimentKind::kDimension: run_dimension(cfg, rep); break;
    case ExperimentKind::kVisibleDimension: run_visible_dimension(cfg, rep); break;
    case ExperimentKind::kCorner: run_corner(cfg, rep); break;
    case ExperimentKind::kBlock: run_block(cfg, rep); break;
    case ExperimentKind::kStripeLength: run_stripe_length(cfg, rep); break;
    case ExperimentKind::kCoverage: run_coverage(cfg, rep); break;
    case ExperimentKind::kPassedCounts: run_passed_counts(cfg, rep); break;
  }
  return rep;
}

}  // namespace fracvis
