#include "fracvis/visibility.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <numeric>
#include <set>
#include <sstream>

#include "fracvis/interval_union.hpp"

namespace fracvis {

namespace {

DyadicSquare to_square(const Cell& c, int n) {
  return DyadicSquare{n, c.ix, c.iy};
}

std::string cell_str(const Cell& c, int n) {
  std::ostringstream os;
  os << "(" << c.ix << "," << c.iy << ")@" << n;
  return os.str();
}

std::vector<int64_t> ancestor_counts(std::vector<Cell> cur, int n, int M) {
  std::vector<int64_t> counts(size_t(n) + 1, 0);
  std::sort(cur.begin(), cur.end());
  cur.erase(std::unique(cur.begin(), cur.end()), cur.end());
  counts[size_t(n)] = int64_t(cur.size());
  for (int j = n - 1; j >= 0; --j) {
    for (Cell& c : cur) c = ancestor_cell(c, 1, M);
    std::sort(cur.begin(), cur.end());
    cur.erase(std::unique(cur.begin(), cur.end()), cur.end());
    counts[size_t(j)] = int64_t(cur.size());
  }
  return counts;
}

// Reorders (cell, witness param) pairs into lexicographic cell order and
// writes them into the cover.
void assemble_marks(VisibleCover& cover,
                    std::vector<std::pair<Cell, Rat>> marks, int n, int M) {
  std::sort(marks.begin(), marks.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  cover.marked.reserve(marks.size());
  cover.witness_params.reserve(marks.size());
  std::vector<Cell> cells;
  cells.reserve(marks.size());
  for (auto& m : marks) {
    cover.marked.push_back(to_square(m.first, n));
    cover.witness_params.push_back(std::move(m.second));
    cells.push_back(m.first);
  }
  cover.counts = ancestor_counts(std::move(cells), n, M);
}

// ---------------------------------------------------------------------------
// Line sights.  All shadow endpoints at level n are integers in units of
// M^-n, so the sweep, the stabbing structure, and witness placement run
// in int64.

constexpr int64_t kMaxDirComponent = int64_t(1) << 20;

struct LineContext {
  const std::vector<Cell>* leaves = nullptr;
  DirectionSpec d;
  int side = +1;
  int n = 0;
  int M = 2;
  Rat unit;  // M^-n
  std::vector<Interval<int64_t>> sh;        // scaled shadows
  int64_t wmin = 0;
  std::vector<std::vector<int32_t>> buckets;  // unit-interval stab lists
};

LineContext make_line_context(const std::vector<Cell>& leaves,
                              const DirectionSpec& d, int side, int n, int M) {
  if (std::llabs(d.a) > kMaxDirComponent || std::llabs(d.b) > kMaxDirComponent) {
    throw std::invalid_argument("direction components too large");
  }
  if (side != +1 && side != -1) {
    throw std::invalid_argument("side must be +1 or -1");
  }
  LineContext ctx;
  ctx.leaves = &leaves;
  ctx.d = d;
  ctx.side = side;
  ctx.n = n;
  ctx.M = M;
  ctx.unit = cell_side(n, M);
  ctx.sh.reserve(leaves.size());
  for (const Cell& c : leaves) ctx.sh.push_back(project_cell_scaled(c, d));
  if (!leaves.empty()) {
    int64_t wmin = ctx.sh[0].lo, wmax = ctx.sh[0].hi;
    for (const auto& iv : ctx.sh) {
      wmin = std::min(wmin, iv.lo);
      wmax = std::max(wmax, iv.hi);
    }
    ctx.wmin = wmin;
    int64_t width = wmax - wmin;
    if (width > (int64_t(1) << 28)) {
      throw std::length_error("shadow range too wide for the stab index");
    }
    ctx.buckets.resize(size_t(width));
    for (size_t i = 0; i < ctx.sh.size(); ++i) {
      for (int64_t j = ctx.sh[i].lo; j < ctx.sh[i].hi; ++j) {
        ctx.buckets[size_t(j - wmin)].push_back(int32_t(i));
      }
    }
  }
  return ctx;
}

// Scaled witness coordinate inside [m, m+len]: m plus half the odd part
// of len, returned doubled so it stays integral.  The value has 2-adic
// valuation -1, hence never equals an integer shadow endpoint: the
// witness fiber grazes no square.
int64_t line_witness_z2(const Interval<int64_t>& comp) {
  int64_t len = comp.hi - comp.lo;
  int64_t odd = len >> std::countr_zero(uint64_t(len));
  return 2 * comp.lo + odd;
}

struct LineSweep {
  std::vector<int32_t> marked;               // leaf indices, sweep order
  std::vector<Interval<int64_t>> witness;    // longest uncovered component
};

LineSweep line_sweep(const LineContext& ctx) {
  const auto& leaves = *ctx.leaves;
  int64_t ea = ctx.side * ctx.d.a, eb = ctx.side * ctx.d.b;
  std::vector<int32_t> order(leaves.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int64_t> key(leaves.size());
  for (size_t i = 0; i < leaves.size(); ++i) {
    key[i] = (2 * int64_t(leaves[i].ix) + 1) * ea +
             (2 * int64_t(leaves[i].iy) + 1) * eb;
  }
  std::sort(order.begin(), order.end(), [&](int32_t u, int32_t v) {
    if (key[u] != key[v]) return key[u] < key[v];
    return leaves[u] < leaves[v];
  });

  // Endpoints are integers, so uncovered components of positive length
  // are exactly maximal runs of uncovered unit cells; a bitmap over the
  // shadow range replaces an interval union at O(|a|+|b|) per square.
  LineSweep out;
  std::vector<char> covered(ctx.buckets.size(), 0);
  for (int32_t i : order) {
    const auto& s = ctx.sh[size_t(i)];
    int64_t total = 0, best_lo = 0, best_len = 0, run_lo = 0, run_len = 0;
    for (int64_t j = s.lo; j <= s.hi; ++j) {
      if (j < s.hi && !covered[size_t(j - ctx.wmin)]) {
        if (run_len == 0) run_lo = j;
        ++run_len;
      } else if (run_len > 0) {
        total += run_len;
        if (run_len > best_len) {
          best_len = run_len;
          best_lo = run_lo;
        }
        run_len = 0;
      }
    }
    if (total > 0) {
      out.marked.push_back(i);
      out.witness.push_back(Interval<int64_t>{best_lo, best_lo + best_len});
      for (int64_t j = s.lo; j < s.hi; ++j) covered[size_t(j - ctx.wmin)] = 1;
    }
  }
  return out;
}

// Exact certification: the witness fiber's true first hit, computed over
// the complete stab list of squares meeting the fiber (an exact
// equivalence, not the sweep's ordering heuristic).  A square's entry
// parameter lies within (|ea|+|eb|) half-units of its doubled center key
// and every stab candidate is hit, so the first hit lies in the band
// within 2(|ea|+|eb|) of the minimal key; only the band needs exact
// windows, the rest are strictly later.
void line_certify(const LineContext& ctx, const LineSweep& sweep) {
  const auto& leaves = *ctx.leaves;
  int64_t ea = ctx.side * ctx.d.a, eb = ctx.side * ctx.d.b;
  int64_t r2 = std::llabs(ea) + std::llabs(eb);
  auto key_of = [&](int32_t j) {
    return ea * (2 * int64_t(leaves[size_t(j)].ix) + 1) +
           eb * (2 * int64_t(leaves[size_t(j)].iy) + 1);
  };
  for (size_t k = 0; k < sweep.marked.size(); ++k) {
    int32_t i = sweep.marked[k];
    int64_t z2 = line_witness_z2(sweep.witness[k]);
    int64_t bucket = (z2 - 1) / 2 - ctx.wmin;
    std::optional<FirstHit> hit;
    Cell hit_cell{};
    if (bucket >= 0 && bucket < int64_t(ctx.buckets.size())) {
      const auto& cand = ctx.buckets[size_t(bucket)];
      int64_t kmin = 0;
      bool have = false;
      for (int32_t j : cand) {
        int64_t kc = key_of(j);
        if (!have || kc < kmin) {
          kmin = kc;
          have = true;
        }
      }
      Rat z = Rat(z2, 2) * ctx.unit;
      Ray fiber = LineFiber{ctx.d, ctx.side, z};
      for (int32_t j : cand) {
        if (key_of(j) > kmin + 2 * r2) continue;
        const Cell& c = leaves[size_t(j)];
        auto win = ray_window(fiber, to_square(c, ctx.n), ctx.M);
        if (!win) continue;
        if (!hit || win->lo < hit->entry ||
            (win->lo == hit->entry && c < hit_cell)) {
          hit = FirstHit{to_square(c, ctx.n), win->lo};
          hit_cell = c;
        }
      }
    }
    if (!hit || !(hit->square == to_square(leaves[size_t(i)], ctx.n))) {
      throw CertificationError(
          "line witness failed for square " + cell_str(leaves[size_t(i)], ctx.n) +
          ": the sweep order is inconsistent with an exact first hit");
    }
  }
}

// ---------------------------------------------------------------------------
// Point sights.

struct PointContext {
  const std::vector<Cell>* leaves = nullptr;
  Viewpoint x;
  ArcFrame frame;
  int n = 0;
  int M = 2;
  std::vector<Interval<Rat>> arcs;
  std::vector<Rat> endpoints;  // all arc endpoints, sorted (dups kept)

  PointContext(const Viewpoint& vp) : x(vp), frame(vp) {}
};

PointContext make_point_context(const std::vector<Cell>& leaves,
                                const Viewpoint& x, int n, int M) {
  PointContext ctx(x);
  ctx.leaves = &leaves;
  ctx.n = n;
  ctx.M = M;
  ctx.arcs.reserve(leaves.size());
  ctx.endpoints.reserve(2 * leaves.size());
  for (const Cell& c : leaves) {
    ctx.arcs.push_back(ctx.frame.arc_of_cell(c, n, M));
    ctx.endpoints.push_back(ctx.arcs.back().lo);
    ctx.endpoints.push_back(ctx.arcs.back().hi);
  }
  std::sort(ctx.endpoints.begin(), ctx.endpoints.end());
  return ctx;
}

bool int128_coord(const Rat& q, int64_t limit, int64_t* num, int64_t* den) {
  if (!q.num().fits_slong_p() || !q.den().fits_slong_p()) return false;
  int64_t p = q.num().get_si(), d = q.den().get_si();
  if (std::llabs(p) > limit || d > limit) return false;
  *num = p;
  *den = d;
  return true;
}

// Front-to-back order: squared distance from x to cell centers, ties by
// (ix, iy).  The integer fast path and the rational fallback compute the
// same exact order.
std::vector<int32_t> point_order(const PointContext& ctx) {
  const auto& leaves = *ctx.leaves;
  std::vector<int32_t> order(leaves.size());
  std::iota(order.begin(), order.end(), 0);
  int64_t S = ipow(ctx.M, ctx.n);
  int64_t px, qx, py, qy;
  constexpr int64_t kLim = int64_t(1) << 20;
  if (S <= kLim && int128_coord(ctx.x.x.x, kLim, &px, &qx) &&
      int128_coord(ctx.x.x.y, kLim, &py, &qy)) {
    std::vector<unsigned __int128> key(leaves.size());
    int64_t qx2 = qx * qx, qy2 = qy * qy;
    for (size_t i = 0; i < leaves.size(); ++i) {
      int64_t ax = (2 * int64_t(leaves[i].ix) + 1) * qx - 2 * S * px;
      int64_t ay = (2 * int64_t(leaves[i].iy) + 1) * qy - 2 * S * py;
      unsigned __int128 tx = (__int128)ax * ax, ty = (__int128)ay * ay;
      key[i] = tx * (unsigned __int128)qy2 + ty * (unsigned __int128)qx2;
    }
    std::sort(order.begin(), order.end(), [&](int32_t u, int32_t v) {
      if (key[u] != key[v]) return key[u] < key[v];
      return leaves[u] < leaves[v];
    });
    return order;
  }
  std::vector<Rat> key(leaves.size());
  Rat side = cell_side(ctx.n, ctx.M);
  Rat half(1, 2);
  for (size_t i = 0; i < leaves.size(); ++i) {
    Rat cx = (Rat(int64_t(leaves[i].ix)) + half) * side - ctx.x.x.x;
    Rat cy = (Rat(int64_t(leaves[i].iy)) + half) * side - ctx.x.x.y;
    key[i] = cx * cx + cy * cy;
  }
  std::sort(order.begin(), order.end(), [&](int32_t u, int32_t v) {
    if (!(key[u] == key[v])) return key[u] < key[v];
    return leaves[u] < leaves[v];
  });
  return order;
}

struct PointSweep {
  std::vector<int32_t> marked;             // leaf indices, sweep order
  std::vector<Interval<Rat>> witness;      // longest uncovered component
};

PointSweep point_sweep(const PointContext& ctx,
                       const std::vector<int32_t>& order) {
  PointSweep out;
  ArcUnion covered;
  for (int32_t i : order) {
    const auto& a = ctx.arcs[size_t(i)];
    auto comps = covered.uncovered(a.lo, a.hi);
    bool any = false;
    const Interval<Rat>* best = nullptr;
    for (const auto& c : comps) {
      if (c.hi - c.lo > Rat(0)) {
        if (!best || c.hi - c.lo > best->hi - best->lo) best = &c;
        any = true;
      }
    }
    if (any) {
      out.marked.push_back(i);
      out.witness.push_back(*best);
    }
    covered.insert(a.lo, a.hi);
  }
  return out;
}

bool is_endpoint(const PointContext& ctx, const Rat& t) {
  return std::binary_search(ctx.endpoints.begin(), ctx.endpoints.end(), t);
}

// Witness parameter inside (lo, hi) that equals no arc endpoint, so the
// witness ray grazes no square's corner.  Dyadic subdivision points are
// pairwise distinct and each endpoint can exclude at most one of them,
// so the search terminates.
Rat pick_nongrazing(const PointContext& ctx, const Interval<Rat>& comp) {
  Rat span = comp.hi - comp.lo;
  for (int pow = 1; pow <= 48; ++pow) {
    int64_t den = int64_t(1) << pow;
    for (int64_t num = 1; num < den; num += 2) {
      Rat t = comp.lo + span * Rat(num, den);
      if (!is_endpoint(ctx, t)) return t;
      if (num > 4096) break;  // move to a finer level rather than scan wide
    }
  }
  throw std::logic_error("no non-grazing witness parameter found");
}

// Batch exact first hits at ascending query parameters: a plane sweep
// over arc endpoints maintains the set of squares whose closed arc
// contains the query (equivalently: whose square the query ray meets).
// Queries must avoid all endpoints.
struct ArcQuery {
  Rat t;
  int32_t tag = 0;
};

std::vector<int32_t> batch_first_hits(const PointContext& ctx,
                                      const std::vector<ArcQuery>& queries) {
  const auto& leaves = *ctx.leaves;
  struct Ev {
    Rat t;
    int32_t idx;
    bool add;
  };
  std::vector<Ev> evs;
  evs.reserve(2 * ctx.arcs.size());
  for (size_t i = 0; i < ctx.arcs.size(); ++i) {
    evs.push_back(Ev{ctx.arcs[i].lo, int32_t(i), true});
    evs.push_back(Ev{ctx.arcs[i].hi, int32_t(i), false});
  }
  std::sort(evs.begin(), evs.end(), [](const Ev& a, const Ev& b) {
    if (!(a.t == b.t)) return a.t < b.t;
    if (a.add != b.add) return a.add;
    return a.idx < b.idx;
  });

  std::vector<int32_t> result(queries.size(), -1);
  std::set<int32_t> active;
  size_t ei = 0;
  for (size_t qi = 0; qi < queries.size(); ++qi) {
    const Rat& t = queries[qi].t;
    while (ei < evs.size() && evs[ei].t < t) {
      if (evs[ei].add) {
        active.insert(evs[ei].idx);
      } else {
        active.erase(evs[ei].idx);
      }
      ++ei;
    }
    if (active.empty()) continue;
    std::vector<DyadicSquare> cand;
    cand.reserve(active.size());
    for (int32_t i : active) cand.push_back(to_square(leaves[size_t(i)], ctx.n));
    Ray ray = PointRay{ctx.x.x, ctx.frame.dir_of_t(t)};
    auto hit = ray_first_hit(ray, cand, ctx.M);
    if (hit) {
      auto it = std::lower_bound(
          leaves.begin(), leaves.end(),
          Cell{int32_t(hit->square.ix), int32_t(hit->square.iy)});
      result[qi] = int32_t(it - leaves.begin());
    }
  }
  return result;
}

// Ground-truth cover: between consecutive arc endpoints the first-hit
// square is constant, so marking the winner of every elementary arc
// midpoint reproduces exactly the squares that are frontmost on a
// positive-length set of directions.
PointSweep exact_point_cover(const PointContext& ctx) {
  std::vector<Rat> ev(ctx.endpoints);
  ev.erase(std::unique(ev.begin(), ev.end()), ev.end());

  std::vector<ArcQuery> queries;
  std::vector<Interval<Rat>> spans;
  for (size_t j = 0; j + 1 < ev.size(); ++j) {
    queries.push_back(ArcQuery{(ev[j] + ev[j + 1]) / Rat(2), 0});
    spans.push_back(Interval<Rat>{ev[j], ev[j + 1]});
  }
  std::vector<int32_t> winners = batch_first_hits(ctx, queries);

  PointSweep out;
  std::vector<char> seen(ctx.leaves->size(), 0);
  for (size_t j = 0; j < winners.size(); ++j) {
    int32_t w = winners[j];
    if (w < 0 || seen[size_t(w)]) continue;
    seen[size_t(w)] = 1;
    out.marked.push_back(w);
    out.witness.push_back(spans[j]);
  }
  return out;
}

}  // namespace

VisibleCover visible_from_line(const PercolationTree& tree, int n,
                               const DirectionSpec& d, int side) {
  if (d.a == 0 && d.b == 0) throw std::invalid_argument("zero direction");
  const auto& leaves = squares_at(tree, n);
  int M = tree.params.M;

  VisibleCover cover;
  cover.sight = LineSight{d, side};
  cover.level = n;
  if (leaves.empty()) {
    cover.counts.assign(size_t(n) + 1, 0);
    return cover;
  }

  LineContext ctx = make_line_context(leaves, d, side, n, M);
  LineSweep sweep = line_sweep(ctx);
  line_certify(ctx, sweep);

  std::vector<std::pair<Cell, Rat>> marks;
  marks.reserve(sweep.marked.size());
  for (size_t k = 0; k < sweep.marked.size(); ++k) {
    Rat z = Rat(line_witness_z2(sweep.witness[k]), 2) * ctx.unit;
    marks.emplace_back(leaves[size_t(sweep.marked[k])], std::move(z));
  }
  assemble_marks(cover, std::move(marks), n, M);
  return cover;
}

VisibleCover visible_from_point(const PercolationTree& tree, int n,
                                const Viewpoint& x) {
  Rat zero(0), one(1);
  if (zero <= x.x.x && x.x.x <= one && zero <= x.x.y && x.x.y <= one) {
    throw std::domain_error("viewpoint must lie outside the closed unit square");
  }
  const auto& leaves = squares_at(tree, n);
  int M = tree.params.M;

  VisibleCover cover;
  cover.sight = x;
  cover.level = n;
  if (leaves.empty()) {
    cover.counts.assign(size_t(n) + 1, 0);
    return cover;
  }

  PointContext ctx = make_point_context(leaves, x, n, M);
  PointSweep sweep = point_sweep(ctx, point_order(ctx));

  // Mandatory post-pass: verify one non-grazing witness per marked
  // square against an exact first hit.
  std::vector<Rat> params(sweep.marked.size());
  std::vector<size_t> by_t(sweep.marked.size());
  std::iota(by_t.begin(), by_t.end(), size_t(0));
  for (size_t k = 0; k < sweep.marked.size(); ++k) {
    params[k] = pick_nongrazing(ctx, sweep.witness[k]);
  }
  std::sort(by_t.begin(), by_t.end(),
            [&](size_t u, size_t v) { return params[u] < params[v]; });
  std::vector<ArcQuery> queries;
  queries.reserve(by_t.size());
  for (size_t k : by_t) queries.push_back(ArcQuery{params[k], int32_t(k)});
  std::vector<int32_t> hits = batch_first_hits(ctx, queries);

  bool all_ok = true;
  for (size_t qi = 0; qi < queries.size(); ++qi) {
    size_t k = size_t(queries[qi].tag);
    if (hits[qi] != sweep.marked[k]) {
      all_ok = false;
      break;
    }
  }

  if (all_ok) {
    std::vector<std::pair<Cell, Rat>> marks;
    marks.reserve(sweep.marked.size());
    for (size_t k = 0; k < sweep.marked.size(); ++k) {
      marks.emplace_back(leaves[size_t(sweep.marked[k])], params[k]);
    }
    assemble_marks(cover, std::move(marks), n, M);
    return cover;
  }

  // A witness failed: the distance heuristic misordered some occlusion.
  // Recompute from scratch by elementary arcs and report the diff.
  PointSweep exact = exact_point_cover(ctx);
  cover.used_fallback = true;

  std::vector<Cell> fast_cells, exact_cells;
  for (int32_t i : sweep.marked) fast_cells.push_back(leaves[size_t(i)]);
  for (int32_t i : exact.marked) exact_cells.push_back(leaves[size_t(i)]);
  std::sort(fast_cells.begin(), fast_cells.end());
  std::sort(exact_cells.begin(), exact_cells.end());
  std::vector<Cell> added, removed;
  std::set_difference(exact_cells.begin(), exact_cells.end(),
                      fast_cells.begin(), fast_cells.end(),
                      std::back_inserter(added));
  std::set_difference(fast_cells.begin(), fast_cells.end(),
                      exact_cells.begin(), exact_cells.end(),
                      std::back_inserter(removed));
  for (const Cell& c : added) cover.fallback_added.push_back(to_square(c, n));
  for (const Cell& c : removed) cover.fallback_removed.push_back(to_square(c, n));

  std::vector<std::pair<Cell, Rat>> marks;
  marks.reserve(exact.marked.size());
  for (size_t k = 0; k < exact.marked.size(); ++k) {
    // The elementary arc's midpoint is strictly between consecutive
    // distinct endpoints, hence non-grazing and already verified as
    // hitting this square first.
    Rat mid = (exact.witness[k].lo + exact.witness[k].hi) / Rat(2);
    marks.emplace_back(leaves[size_t(exact.marked[k])], std::move(mid));
  }
  assemble_marks(cover, std::move(marks), n, M);
  return cover;
}

Ray witness_ray(const VisibleCover& cover, const DyadicSquare& sq,
                const PercolationTree& tree, int n) {
  auto it = std::lower_bound(cover.marked.begin(), cover.marked.end(), sq,
                             [](const DyadicSquare& a, const DyadicSquare& b) {
                               if (a.ix != b.ix) return a.ix < b.ix;
                               return a.iy < b.iy;
                             });
  if (it == cover.marked.end() || !(*it == sq)) {
    throw std::invalid_argument("square is not marked in this cover");
  }
  const Rat& param = cover.witness_params[size_t(it - cover.marked.begin())];

  Ray ray;
  if (const LineSight* ls = std::get_if<LineSight>(&cover.sight)) {
    ray = LineFiber{ls->d, ls->side, param};
  } else {
    ArcFrame frame(std::get<Viewpoint>(cover.sight));
    ray = PointRay{frame.viewpoint().x, frame.dir_of_t(param)};
  }

  const auto& leaves = squares_at(tree, n);
  std::vector<DyadicSquare> all;
  all.reserve(leaves.size());
  for (const Cell& c : leaves) all.push_back(to_square(c, n));
  auto hit = ray_first_hit(ray, all, tree.params.M);
  if (!hit || !(hit->square == sq)) {
    throw CertificationError("witness ray verification failed for square " +
                             cell_str(Cell{int32_t(sq.ix), int32_t(sq.iy)}, n));
  }
  return ray;
}

// ---------------------------------------------------------------------------
// Ray-cast oracles.

namespace {

struct OracleFrame {
  std::vector<Interval<Rat>> arcs;  // per-leaf parameter interval
  std::vector<Rat> endpoints;       // sorted (dups kept)
  Rat lo, hi;                       // parameter range of the unit square
  std::function<Ray(const Rat&)> ray_at;
  const PointContext* pctx = nullptr;  // set for point sights
};

OracleFrame make_oracle_frame(const std::vector<Cell>& leaves, int n, int M,
                              const SightSpec& sight,
                              std::optional<PointContext>& pstore) {
  OracleFrame fr;
  if (const LineSight* ls = std::get_if<LineSight>(&sight)) {
    DirectionSpec d = ls->d;
    int side = ls->side;
    fr.arcs.reserve(leaves.size());
    for (const Cell& c : leaves) fr.arcs.push_back(project_square(c, n, M, d));
    auto q0 = project_square(Cell{0, 0}, 0, M, d);
    fr.lo = q0.lo;
    fr.hi = q0.hi;
    fr.ray_at = [d, side](const Rat& z) { return Ray(LineFiber{d, side, z}); };
  } else {
    const Viewpoint& x = std::get<Viewpoint>(sight);
    pstore.emplace(make_point_context(leaves, x, n, M));
    PointContext& ctx = *pstore;
    fr.arcs = ctx.arcs;
    auto cone = ctx.frame.arc_of_cell(Cell{0, 0}, 0, M);
    fr.lo = cone.lo;
    fr.hi = cone.hi;
    fr.ray_at = [&ctx](const Rat& t) {
      return Ray(PointRay{ctx.x.x, ctx.frame.dir_of_t(t)});
    };
    fr.pctx = &ctx;
  }
  fr.endpoints.reserve(2 * fr.arcs.size());
  for (const auto& a : fr.arcs) {
    fr.endpoints.push_back(a.lo);
    fr.endpoints.push_back(a.hi);
  }
  std::sort(fr.endpoints.begin(), fr.endpoints.end());
  return fr;
}

std::vector<DyadicSquare> sorted_squares(std::vector<Cell> cells, int n) {
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  std::vector<DyadicSquare> out;
  out.reserve(cells.size());
  for (const Cell& c : cells) out.push_back(to_square(c, n));
  return out;
}

int64_t clamp_index(const Rat& q) {
  mpz_class f = q.floor();
  if (!f.fits_slong_p()) return f < 0 ? INT64_MIN / 2 : INT64_MAX / 2;
  return f.get_si();
}

}  // namespace

std::vector<DyadicSquare> ray_cast_oracle(const PercolationTree& tree, int n,
                                          const SightSpec& sight, int64_t R) {
  if (R < 1) throw std::invalid_argument("ray count must be at least 1");
  const auto& leaves = squares_at(tree, n);
  if (leaves.empty()) return {};
  int M = tree.params.M;

  std::optional<PointContext> pstore;
  OracleFrame fr = make_oracle_frame(leaves, n, M, sight, pstore);

  std::vector<Rat> ev(fr.endpoints);
  ev.erase(std::unique(ev.begin(), ev.end()), ev.end());

  // Active-arc sweep over elementary intervals; the first hit is constant
  // on each open interval, so one exact query per interval decides every
  // grid ray inside it.  Grid rays landing exactly on an endpoint lie in
  // no open interval and are skipped by the index arithmetic itself.
  struct Ev {
    Rat t;
    int32_t idx;
    bool add;
  };
  std::vector<Ev> evs;
  evs.reserve(2 * fr.arcs.size());
  for (size_t i = 0; i < fr.arcs.size(); ++i) {
    evs.push_back(Ev{fr.arcs[i].lo, int32_t(i), true});
    evs.push_back(Ev{fr.arcs[i].hi, int32_t(i), false});
  }
  std::sort(evs.begin(), evs.end(), [](const Ev& a, const Ev& b) {
    if (!(a.t == b.t)) return a.t < b.t;
    if (a.add != b.add) return a.add;
    return a.idx < b.idx;
  });

  Rat span = fr.hi - fr.lo;
  Rat rays(R + 1);
  std::set<int32_t> active;
  size_t ei = 0;
  std::vector<Cell> result;
  for (size_t j = 0; j + 1 < ev.size(); ++j) {
    Rat mid = (ev[j] + ev[j + 1]) / Rat(2);
    while (ei < evs.size() && evs[ei].t < mid) {
      if (evs[ei].add) {
        active.insert(evs[ei].idx);
      } else {
        active.erase(evs[ei].idx);
      }
      ++ei;
    }
    if (active.empty()) continue;
    // Grid indices i with ev[j] < lo + span*i/(R+1) < ev[j+1].
    int64_t first = clamp_index((ev[j] - fr.lo) * rays / span) + 1;
    int64_t last = -clamp_index((fr.lo - ev[j + 1]) * rays / span) - 1;
    first = std::max(first, int64_t(1));
    last = std::min(last, R);
    if (first > last) continue;

    std::vector<DyadicSquare> cand;
    cand.reserve(active.size());
    for (int32_t i : active) cand.push_back(to_square(leaves[size_t(i)], n));
    auto hit = ray_first_hit(fr.ray_at(mid), cand, M);
    if (hit) {
      result.push_back(Cell{int32_t(hit->square.ix), int32_t(hit->square.iy)});
    }
  }
  return sorted_squares(std::move(result), n);
}

VisibleSpan visible_span(const PercolationTree& tree, int n,
                         const SightSpec& sight, const DyadicSquare& sq,
                         int64_t R) {
  if (R < 1) throw std::invalid_argument("ray count must be at least 1");
  VisibleSpan out;
  const auto& leaves = squares_at(tree, n);
  if (leaves.empty()) return out;
  int M = tree.params.M;

  std::optional<PointContext> pstore;
  OracleFrame fr = make_oracle_frame(leaves, n, M, sight, pstore);

  std::vector<Rat> ev(fr.endpoints);
  ev.erase(std::unique(ev.begin(), ev.end()), ev.end());

  struct Ev {
    Rat t;
    int32_t idx;
    bool add;
  };
  std::vector<Ev> evs;
  evs.reserve(2 * fr.arcs.size());
  for (size_t i = 0; i < fr.arcs.size(); ++i) {
    evs.push_back(Ev{fr.arcs[i].lo, int32_t(i), true});
    evs.push_back(Ev{fr.arcs[i].hi, int32_t(i), false});
  }
  std::sort(evs.begin(), evs.end(), [](const Ev& a, const Ev& b) {
    if (!(a.t == b.t)) return a.t < b.t;
    if (a.add != b.add) return a.add;
    return a.idx < b.idx;
  });

  Rat span = fr.hi - fr.lo;
  Rat rays(R + 1);
  std::set<int32_t> active;
  size_t ei = 0;
  for (size_t j = 0; j + 1 < ev.size(); ++j) {
    Rat mid = (ev[j] + ev[j + 1]) / Rat(2);
    while (ei < evs.size() && evs[ei].t < mid) {
      if (evs[ei].add) {
        active.insert(evs[ei].idx);
      } else {
        active.erase(evs[ei].idx);
      }
      ++ei;
    }
    if (active.empty()) continue;
    std::vector<DyadicSquare> cand;
    cand.reserve(active.size());
    for (int32_t i : active) cand.push_back(to_square(leaves[size_t(i)], n));
    auto hit = ray_first_hit(fr.ray_at(mid), cand, M);
    if (!hit || !(hit->square == sq)) continue;
    out.length = out.length + (ev[j + 1] - ev[j]);
    int64_t first = clamp_index((ev[j] - fr.lo) * rays / span) + 1;
    int64_t last = -clamp_index((fr.lo - ev[j + 1]) * rays / span) - 1;
    first = std::max(first, int64_t(1));
    last = std::min(last, R);
    if (first <= last) out.grid_hits += last - first + 1;
  }
  return out;
}

std::vector<DyadicSquare> ray_cast_oracle_direct(const PercolationTree& tree,
                                                 int n, const SightSpec& sight,
                                                 int64_t R) {
  if (R < 1) throw std::invalid_argument("ray count must be at least 1");
  const auto& leaves = squares_at(tree, n);
  if (leaves.empty()) return {};
  int M = tree.params.M;

  std::optional<PointContext> pstore;
  OracleFrame fr = make_oracle_frame(leaves, n, M, sight, pstore);

  std::vector<DyadicSquare> all;
  all.reserve(leaves.size());
  for (const Cell& c : leaves) all.push_back(to_square(c, n));

  Rat span = fr.hi - fr.lo;
  std::vector<Cell> result;
  for (int64_t i = 1; i <= R; ++i) {
    Rat t = fr.lo + span * Rat(i, R + 1);
    if (std::binary_search(fr.endpoints.begin(), fr.endpoints.end(), t)) {
      continue;  // grazing ray: certifies only zero-length visibility
    }
    auto hit = ray_first_hit(fr.ray_at(t), all, M);
    if (hit) {
      result.push_back(Cell{int32_t(hit->square.ix), int32_t(hit->square.iy)});
    }
  }
  return sorted_squares(std::move(result), n);
}

}  // namespace fracvis
