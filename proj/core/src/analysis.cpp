#include "fracvis/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fracvis {

namespace {

mpz_class ceil_rat(const Rat& q) { return -((-q).floor()); }

int64_t to_i64(const mpz_class& z) {
  if (!z.fits_slong_p()) {
    throw std::overflow_error("index out of int64 range");
  }
  return z.get_si();
}

// A closed rational interval is inside a canonical union iff one merged
// piece contains it whole (pieces are separated by positive gaps).
template <typename S>
bool union_contains(const IntervalUnion<S>& u, const Rat& lo, const Rat& hi);

template <>
bool union_contains(const IntervalUnion<int64_t>& u, const Rat& lo,
                    const Rat& hi) {
  for (const auto& p : u.pieces()) {
    if (Rat(p.lo) <= lo && hi <= Rat(p.hi)) return true;
  }
  return false;
}

template <>
bool union_contains(const IntervalUnion<Rat>& u, const Rat& lo,
                    const Rat& hi) {
  for (const auto& p : u.pieces()) {
    if (p.lo <= lo && hi <= p.hi) return true;
  }
  return false;
}

}  // namespace

int64_t box_count(const std::vector<DyadicSquare>& squares, int k, int M) {
  if (squares.empty()) return 0;
  int n = squares[0].level;
  if (k < 0 || k > n) {
    throw std::out_of_range("box level outside [0, n]");
  }
  std::vector<std::pair<int64_t, int64_t>> anc;
  anc.reserve(squares.size());
  for (const auto& sq : squares) {
    DyadicSquare a = ancestor(sq, n - k, M);
    anc.emplace_back(a.ix, a.iy);
  }
  std::sort(anc.begin(), anc.end());
  anc.erase(std::unique(anc.begin(), anc.end()), anc.end());
  return int64_t(anc.size());
}

SlopeFit dim_slope(const ScalingTable& table, int k_from, int k_to) {
  int lo = table.k_lo, hi = table.k_lo + int(table.counts.size()) - 1;
  if (k_from < lo || k_to > hi || k_from > k_to) {
    throw std::out_of_range("slope range outside the table");
  }
  int npts = k_to - k_from + 1;
  if (npts < 3) {
    throw std::invalid_argument("slope needs at least 3 rows");
  }
  for (int k = k_from; k <= k_to; ++k) {
    if (table.counts[size_t(k - lo)] < 1) {
      throw std::domain_error("empty count in slope range");
    }
  }

  // Exact path: every consecutive ratio an integer power of M makes
  // log_M(N_k) integral up to a common shift, so the regression closes
  // over the rationals.
  std::vector<int64_t> t(size_t(npts), 0);
  bool exact = true;
  for (int i = 1; i < npts && exact; ++i) {
    int64_t prev = table.counts[size_t(k_from - lo + i - 1)];
    int64_t curr = table.counts[size_t(k_from - lo + i)];
    int64_t big = std::max(prev, curr), small = std::min(prev, curr);
    if (big % small != 0) {
      exact = false;
      break;
    }
    int64_t q = big / small;
    int64_t s = 0;
    while (q % table.M == 0) {
      q /= table.M;
      ++s;
    }
    if (q != 1) {
      exact = false;
      break;
    }
    t[size_t(i)] = t[size_t(i - 1)] + (curr >= prev ? s : -s);
  }

  SlopeFit fit;
  if (exact) {
    int64_t sx = 0, sy = 0, sxy = 0, sxx = 0;
    for (int i = 0; i < npts; ++i) {
      int64_t x = k_from + i, y = t[size_t(i)];
      sx += x;
      sy += y;
      sxy += x * y;
      sxx += x * x;
    }
    Rat slope(npts * sxy - sx * sy, npts * sxx - sx * sx);
    Rat icpt = (Rat(sy) - slope * Rat(sx)) / Rat(npts);
    Rat worst(0);
    for (int i = 0; i < npts; ++i) {
      Rat r = (Rat(t[size_t(i)]) - slope * Rat(k_from + i) - icpt).abs();
      worst = max(worst, r);
    }
    fit.slope = slope.to_double();
    fit.max_residual = worst.to_double();
    fit.exact = true;
    return fit;
  }

  double logm = std::log(double(table.M));
  double sx = 0, sy = 0, sxy = 0, sxx = 0;
  for (int i = 0; i < npts; ++i) {
    double x = k_from + i;
    double y = std::log(double(table.counts[size_t(k_from - lo + i)])) / logm;
    sx += x;
    sy += y;
    sxy += x * y;
    sxx += x * x;
  }
  double den = npts * sxx - sx * sx;
  double slope = (npts * sxy - sx * sy) / den;
  double icpt = (sy - slope * sx) / npts;
  double worst = 0;
  for (int i = 0; i < npts; ++i) {
    double x = k_from + i;
    double y = std::log(double(table.counts[size_t(k_from - lo + i)])) / logm;
    worst = std::max(worst, std::fabs(y - slope * x - icpt));
  }
  fit.slope = slope;
  fit.max_residual = worst;
  fit.exact = false;
  return fit;
}

double theoretical_dim(const Rat& p, int M) {
  double v = p.to_double() * M * M;
  if (v < 1.0) return 0.0;
  return std::log(v) / std::log(double(M));
}

double oneil_bound(double d) {
  if (d < 0.75) {
    throw std::domain_error("bound needs dimension at least 3/4");
  }
  return 0.5 + std::sqrt(d - 0.75);
}

int slope_sign_for(const DirectionSpec& d) {
  int sa = (d.a > 0) - (d.a < 0), sb = (d.b > 0) - (d.b < 0);
  return sa * sb >= 0 ? -1 : +1;
}

bool is_corner(const DyadicSquare& sq, int slope_sign, int M) {
  if (sq.level < 2) {
    throw std::out_of_range("corner classification needs level >= 2");
  }
  DyadicSquare g = ancestor(sq, 2, M);
  int64_t mm = int64_t(M) * M;
  int64_t rx = sq.ix - g.ix * mm;
  int64_t ry = sq.iy - g.iy * mm;
  int64_t top = mm - 1;
  if (slope_sign < 0) {
    return (rx == 0 && ry == top) || (rx == top && ry == 0);
  }
  return (rx == 0 && ry == 0) || (rx == top && ry == top);
}

bool is_block(const PercolationTree& tree, const Cell& qt, int n,
              const DirectionSpec& d, int m, BlockCache* cache) {
  int M = tree.params.M;
  if (n < 2) throw std::invalid_argument("block test needs n >= 2");
  if (m < n - 2) throw std::invalid_argument("block depth below the square");
  if (m > tree.params.depth) {
    throw std::out_of_range("block depth past the tree");
  }
  if (!contains(tree, n - 2, qt)) {
    throw std::domain_error("block test on a non-retained square");
  }
  if (cache) {
    if (cache->base_level != n - 2 || cache->m != m || !(cache->d == d)) {
      throw std::invalid_argument("block cache bound to other parameters");
    }
    auto it = cache->memo.find(qt);
    if (it != cache->memo.end()) return it->second;
  }

  CarvedRegion region = carve(qt, n - 2, M, Rat(1, 8), carve_mode_for(d));
  Interval<Rat> want = carved_projection(region, d);

  IntervalUnion<int64_t> shadows;
  for_each_descendant(tree, qt, n - 2, m, [&](const Cell& c) {
    auto s = project_cell_scaled(c, d);
    shadows.insert(s.lo, s.hi);
  });

  Rat scale(ipow(M, m));
  bool ok = union_contains(shadows, want.lo * scale, want.hi * scale);
  if (cache) cache->memo.emplace(qt, ok);
  return ok;
}

StripeProcess stripe_squares(const PercolationTree& tree, int n,
                             const DirectionSpec& d, int side,
                             const Interval<Rat>& I) {
  if (!(I.lo < I.hi)) throw std::domain_error("empty stripe interval");
  int M = tree.params.M;
  auto extent = project_square(Cell{0, 0}, 0, M, d);
  if (I.lo < extent.lo || extent.hi < I.hi) {
    throw std::domain_error("stripe interval outside the shadow extent");
  }
  const auto& leaves = squares_at(tree, n);
  (void)leaves;

  int64_t S = ipow(M, n);
  Rat denom(2 * S);

  StripeProcess out;
  out.interval = I;

  // Centers with projection in [lo, hi): the center key
  // k = a(2iy+1) - b(2ix+1) is an integer, so the rational bounds reduce
  // to two exact integer cutoffs computed once per stripe, and each
  // column's admissible rows follow from int64 floor/ceil divisions.
  int64_t A = to_i64(ceil_rat(I.lo * denom));
  int64_t B = to_i64(ceil_rat(I.hi * denom)) - 1;
  auto floordiv = [](int64_t num, int64_t den) {
    int64_t q = num / den, r = num % den;
    return r != 0 && ((r < 0) != (den < 0)) ? q - 1 : q;
  };
  for (int64_t ix = 0; ix < S; ++ix) {
    int64_t t = -d.b * (2 * ix + 1);
    int64_t iy_min, iy_max;
    if (d.a == 0) {
      if (t < A || t > B) continue;
      iy_min = 0;
      iy_max = S - 1;
    } else {
      // a*(2iy+1) in [A - t, B - t]
      int64_t lo2 = A - t, hi2 = B - t;
      int64_t q_lo, q_hi;  // bounds for 2iy+1
      if (d.a > 0) {
        q_lo = -floordiv(-lo2, d.a);
        q_hi = floordiv(hi2, d.a);
      } else {
        q_lo = -floordiv(-hi2, d.a);
        q_hi = floordiv(lo2, d.a);
      }
      iy_min = -floordiv(-(q_lo - 1), 2);
      iy_max = floordiv(q_hi - 1, 2);
      iy_min = std::max(iy_min, int64_t(0));
      iy_max = std::min(iy_max, S - 1);
    }
    for (int64_t iy = iy_min; iy <= iy_max; ++iy) {
      out.q_list.push_back(Cell{int32_t(ix), int32_t(iy)});
    }
  }

  int64_t ea = side * d.a, eb = side * d.b;
  auto key = [&](const Cell& c) {
    return (2 * int64_t(c.ix) + 1) * ea + (2 * int64_t(c.iy) + 1) * eb;
  };
  std::sort(out.q_list.begin(), out.q_list.end(),
            [&](const Cell& u, const Cell& v) {
              int64_t ku = key(u), kv = key(v);
              if (ku != kv) return ku < kv;
              return u < v;
            });

  int ss = slope_sign_for(d);
  for (const Cell& c : out.q_list) {
    if (!contains(tree, n, c)) continue;
    out.c_list.push_back(c);
    int corner =
        n >= 2 ? int(is_corner(DyadicSquare{n, c.ix, c.iy}, ss, M)) : 0;
    out.z.push_back(corner);
    out.x.push_back((out.x.empty() ? 0 : out.x.back()) + corner);
  }
  return out;
}

StripeCount stripe_cover_count(const PercolationTree& tree, int n,
                               const DirectionSpec& d, int side,
                               const Interval<Rat>& I, int m,
                               BlockCache* cache) {
  StripeProcess sp = stripe_squares(tree, n, d, side, I);
  int M = tree.params.M;
  StripeCount out;
  for (size_t i = 0; i < sp.c_list.size(); ++i) {
    if (sp.z[i]) continue;
    Cell qt = ancestor_cell(sp.c_list[i], 2, M);
    if (!is_block(tree, qt, n, d, m, cache)) continue;
    int64_t extra = 0;
    for (size_t j = i + 1; j < sp.c_list.size(); ++j) {
      if (ancestor_cell(sp.c_list[j], 2, M) == qt) ++extra;
    }
    out.y = int64_t(i + 1) + extra;
    out.first_block = int(i + 1);
    return out;
  }
  out.y = int64_t(sp.c_list.size());
  out.first_block = 0;
  return out;
}

namespace {

Rat stripe_bound(const DirectionSpec& d) {
  int64_t ab = d.a * d.b;
  if (ab < 0) ab = -ab;
  return Rat(ab, 2 * (d.a * d.a + d.b * d.b));
}

}  // namespace

std::vector<Interval<Rat>> stripe_decomposition(const DirectionSpec& d,
                                                int side, int n,
                                                const Rat& eps, int M) {
  (void)side;  // both orientations share the decomposition
  if (d.a == 0 || d.b == 0) {
    throw std::domain_error("stripe decomposition needs a non-axis direction");
  }
  if (!(Rat(0) < eps) || !(eps < stripe_bound(d))) {
    throw std::domain_error("stripe width outside the direction's bound");
  }
  int64_t mx = std::max(std::llabs(d.a), std::llabs(d.b));
  Rat len = eps * Rat(mx) * cell_side(n, M);
  std::vector<Interval<Rat>> out;
  auto extent = project_square(Cell{0, 0}, 0, M, d);
  Rat cur = extent.lo;
  while (cur < extent.hi) {
    Rat next = min(cur + len, extent.hi);
    out.push_back(Interval<Rat>{cur, next});
    cur = next;
  }
  return out;
}

Rat stripe_default_eps(const DirectionSpec& d) {
  Rat bound = stripe_bound(d);
  if (bound.is_zero()) {
    throw std::domain_error("axis directions admit no stripe width");
  }
  for (int k = 1; k <= 62; ++k) {
    Rat cand(1, int64_t(1) << k);
    if (cand < bound) return cand;
  }
  throw std::domain_error("stripe bound too small");
}

LengthEstimate visible_length_estimate(const PercolationTree& tree, int n,
                                       const DirectionSpec& d, int side,
                                       const Rat& eps, int m) {
  int M = tree.params.M;
  LengthEstimate out;
  out.intervals = stripe_decomposition(d, side, n, eps, M);
  BlockCache cache;
  cache.base_level = n - 2;
  cache.m = m;
  cache.d = d;
  for (const auto& I : out.intervals) {
    StripeCount c = stripe_cover_count(tree, n, d, side, I, m, &cache);
    out.y.push_back(c.y);
    out.first_block.push_back(c.first_block);
    out.s += c.y;
  }
  out.value = std::sqrt(2.0) * std::pow(double(M), -double(n)) * double(out.s);
  return out;
}

bool projection_coverage(const PercolationTree& tree, int m,
                         const DirectionSpec& d, const Rat& eps) {
  int M = tree.params.M;
  CarvedRegion region = carve(Cell{0, 0}, 0, M, eps, carve_mode_for(d));
  Interval<Rat> want = carved_projection(region, d);
  IntervalUnion<int64_t> shadows;
  for (const Cell& c : squares_at(tree, m)) {
    auto s = project_cell_scaled(c, d);
    shadows.insert(s.lo, s.hi);
  }
  Rat scale(ipow(M, m));
  return union_contains(shadows, want.lo * scale, want.hi * scale);
}

bool radial_coverage(const PercolationTree& tree, int m, const Viewpoint& x,
                     const Rat& eps) {
  int M = tree.params.M;
  ArcFrame frame(x);
  CarvedRegion region = carve(Cell{0, 0}, 0, M, eps, CarveMode::kAllFour);
  Interval<Rat> want = carved_arc(region, frame);
  IntervalUnion<Rat> arcs;
  for (const Cell& c : squares_at(tree, m)) {
    auto a = frame.arc_of_cell(c, m, M);
    arcs.insert(a.lo, a.hi);
  }
  return union_contains(arcs, want.lo, want.hi);
}

int64_t count_passed(const PercolationTree& tree, int k, const RatPoint& a,
                     const RatPoint& b) {
  Rat dx = b.x - a.x, dy = b.y - a.y;
  if (dx.is_zero() && dy.is_zero()) {
    throw std::domain_error("degenerate line");
  }
  squares_at(tree, k);
  int M = tree.params.M;
  bool has_slope = !dx.is_zero();
  bool has_inv = !dy.is_zero();
  Rat slope = has_slope ? dy / dx : Rat(0);
  Rat inv = has_inv ? dx / dy : Rat(0);

  // Line meets the closed square iff its y-range over the square's x-slab
  // overlaps the square's y-interval (vertical lines: x membership).
  auto meets = [&](const Cell& c, int level) {
    Rat side = cell_side(level, M);
    Rat x0 = Rat(int64_t(c.ix)) * side, y0 = Rat(int64_t(c.iy)) * side;
    Rat x1 = x0 + side, y1 = y0 + side;
    if (!has_slope) return x0 <= a.x && a.x <= x1;
    Rat ya = a.y + (x0 - a.x) * slope;
    Rat yb = a.y + (x1 - a.x) * slope;
    const Rat& lo = ya < yb ? ya : yb;
    const Rat& hi = ya < yb ? yb : ya;
    return y0 <= hi && lo <= y1;
  };

  // A passing level-k square touches the line, hence so does every ancestor
  // square; pruning subtrees whose square misses the line drops no hits.
  std::vector<Cell> frontier;
  for (const Cell& c : squares_at(tree, 0))
    if (meets(c, 0)) frontier.push_back(c);
  for (int j = 1; j <= k; ++j) {
    std::vector<Cell> next;
    for (const Cell& c : frontier)
      for (int cx = 0; cx < M; ++cx)
        for (int cy = 0; cy < M; ++cy) {
          Cell child{c.ix * M + cx, c.iy * M + cy};
          if (contains(tree, j, child) && meets(child, j))
            next.push_back(child);
        }
    frontier = std::move(next);
  }

  Rat side = cell_side(k, M);
  int64_t count = 0;
  for (const Cell& c : frontier) {
    Rat x0 = Rat(int64_t(c.ix)) * side, y0 = Rat(int64_t(c.iy)) * side;
    Rat x1 = x0 + side, y1 = y0 + side;
    bool passed = false;
    if (has_slope) {
      Rat ya = a.y + (x0 - a.x) * slope;
      Rat yb = a.y + (x1 - a.x) * slope;
      passed = y0 <= ya && ya <= y1 && y0 <= yb && yb <= y1;
    }
    if (!passed && has_inv) {
      Rat xa = a.x + (y0 - a.y) * inv;
      Rat xb = a.x + (y1 - a.y) * inv;
      passed = x0 <= xa && xa <= x1 && x0 <= xb && xb <= x1;
    }
    if (passed) ++count;
  }
  return count;
}

int64_t count_shadow_hits(const PercolationTree& tree, int k, const Rat& z,
                          const SightSpec& sight, const Rat& lambda) {
  if (!(Rat(0) < lambda) || Rat(1) < lambda) {
    throw std::domain_error("scale factor outside (0, 1]");
  }
  int M = tree.params.M;
  Rat side = cell_side(k, M);
  Rat half(1, 2);
  int64_t count = 0;

  if (const LineSight* ls = std::get_if<LineSight>(&sight)) {
    const DirectionSpec& d = ls->d;
    Rat halfwidth =
        lambda * side * Rat(std::llabs(d.a) + std::llabs(d.b), 1) * half;
    for (const Cell& c : squares_at(tree, k)) {
      Rat wc = (Rat(-d.b * (2 * int64_t(c.ix) + 1), 1) +
                Rat(d.a * (2 * int64_t(c.iy) + 1), 1)) *
               side * half;
      if ((z - wc).abs() <= halfwidth) ++count;
    }
    return count;
  }

  const Viewpoint& x = std::get<Viewpoint>(sight);
  ArcFrame frame(x);
  Rat shrink = lambda * side * half;
  for (const Cell& c : squares_at(tree, k)) {
    Rat cx = (Rat(int64_t(c.ix)) + half) * side;
    Rat cy = (Rat(int64_t(c.iy)) + half) * side;
    std::vector<RatPoint> corners = {{cx - shrink, cy - shrink},
                                     {cx + shrink, cy - shrink},
                                     {cx + shrink, cy + shrink},
                                     {cx - shrink, cy + shrink}};
    auto arc = frame.arc_of_polygon(corners);
    if (arc.lo <= z && z <= arc.hi) ++count;
  }
  return count;
}

}  // namespace fracvis
