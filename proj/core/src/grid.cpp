#include "fracvis/grid.hpp"

#include <algorithm>
#include <stdexcept>

#include "fracvis/prng.hpp"

namespace fracvis {

void validate(const PercParams& params) {
  if (params.p.sign() <= 0 || params.p > Rat(1))
    throw std::invalid_argument("p must lie in (0, 1]");
  if (params.M < 2) throw std::invalid_argument("M must be at least 2");
  if (params.depth < 0) throw std::invalid_argument("depth must be nonnegative");
  int64_t r = 1;
  for (int i = 0; i < params.depth; ++i) {
    r *= params.M;
    if (r > INT32_MAX) throw std::out_of_range("depth past the practical ceiling");
  }
}

int64_t ipow(int M, int e) {
  if (e < 0) throw std::out_of_range("negative exponent");
  int64_t r = 1;
  for (int i = 0; i < e; ++i) {
    if (r > (int64_t(1) << 62) / M) throw std::out_of_range("grid too deep");
    r *= M;
  }
  return r;
}

Rat cell_lo_x(const Cell& c, int level, int M) {
  return Rat(c.ix, ipow(M, level));
}

Rat cell_lo_y(const Cell& c, int level, int M) {
  return Rat(c.iy, ipow(M, level));
}

Rat cell_side(int level, int M) { return Rat(1, ipow(M, level)); }

namespace {

RetentionRule rule_for(const PercParams& params) {
  mpz_class num = params.p.num();
  mpz_class den = params.p.den();
  if (!num.fits_ulong_p() || !den.fits_ulong_p())
    throw std::invalid_argument("p numerator/denominator out of range");
  return make_retention_rule(num.get_ui(), den.get_ui());
}

// Emits the retained children of one sorted parent level in lexicographic
// order without sorting: parents are grouped by column, and children of a
// column group are emitted child-column-major, then parent-row, then
// child-row, which is exactly (ix, iy) order.
void next_level(const std::vector<Cell>& parents, int M,
                const RetentionRule& rule, uint64_t lvl_key,
                std::vector<Cell>& out) {
  out.clear();
  size_t i = 0;
  while (i < parents.size()) {
    size_t j = i;
    while (j < parents.size() && parents[j].ix == parents[i].ix) ++j;
    for (int cx = 0; cx < M; ++cx) {
      int64_t ix = int64_t(parents[i].ix) * M + cx;
      for (size_t t = i; t < j; ++t) {
        for (int cy = 0; cy < M; ++cy) {
          int64_t iy = int64_t(parents[t].iy) * M + cy;
          if (rule.keep(square_hash(lvl_key, uint64_t(ix), uint64_t(iy))))
            out.push_back(Cell{int32_t(ix), int32_t(iy)});
        }
      }
    }
    i = j;
  }
}

}  // namespace

PercolationTree generate(const PercParams& params) {
  validate(params);
  ipow(params.M, params.depth);  // range guard
  PercolationTree tree;
  tree.params = params;
  tree.levels.resize(params.depth + 1);
  tree.levels[0] = {Cell{0, 0}};
  RetentionRule rule = rule_for(params);
  for (int k = 1; k <= params.depth; ++k) {
    next_level(tree.levels[k - 1], params.M, rule,
               level_key(params.seed, uint32_t(k)), tree.levels[k]);
    if (tree.levels[k].empty()) break;  // deeper levels stay empty
  }
  return tree;
}

int extinction_level(const PercParams& params) {
  validate(params);
  ipow(params.M, params.depth);
  RetentionRule rule = rule_for(params);
  std::vector<Cell> cur = {Cell{0, 0}};
  std::vector<Cell> next;
  for (int k = 1; k <= params.depth; ++k) {
    next_level(cur, params.M, rule, level_key(params.seed, uint32_t(k)), next);
    if (next.empty()) return k;
    cur.swap(next);
  }
  return -1;
}

namespace {

bool branch_survives(const Cell& c, int level, int depth, int M,
                     const RetentionRule& rule,
                     const std::vector<uint64_t>& keys) {
  if (level == depth) return true;
  for (int cy = 0; cy < M; ++cy) {
    for (int cx = 0; cx < M; ++cx) {
      Cell ch{c.ix * M + cx, c.iy * M + cy};
      if (!rule.keep(square_hash(keys[size_t(level) + 1], uint64_t(ch.ix),
                                 uint64_t(ch.iy))))
        continue;
      if (branch_survives(ch, level + 1, depth, M, rule, keys)) return true;
    }
  }
  return false;
}

}  // namespace

bool survives_to(const PercParams& params) {
  validate(params);
  ipow(params.M, params.depth);
  RetentionRule rule = rule_for(params);
  std::vector<uint64_t> keys(size_t(params.depth) + 1);
  for (int k = 0; k <= params.depth; ++k)
    keys[size_t(k)] = level_key(params.seed, uint32_t(k));
  return branch_survives(Cell{0, 0}, 0, params.depth, params.M, rule, keys);
}

PercolationTree from_levels(const PercParams& params,
                            std::vector<std::vector<Cell>> levels) {
  validate(params);
  if (levels.size() != size_t(params.depth) + 1)
    throw std::invalid_argument("level count does not match depth");
  if (levels[0] != std::vector<Cell>{Cell{0, 0}})
    throw std::invalid_argument("level 0 must be the unit square");
  for (int k = 1; k <= params.depth; ++k) {
    int64_t extent = ipow(params.M, k);
    const auto& lvl = levels[k];
    for (size_t i = 0; i < lvl.size(); ++i) {
      const Cell& c = lvl[i];
      if (c.ix < 0 || c.iy < 0 || c.ix >= extent || c.iy >= extent)
        throw std::invalid_argument("cell index out of range");
      if (i > 0 && !(lvl[i - 1] < c))
        throw std::invalid_argument("level not sorted or has duplicates");
      Cell parent = ancestor_cell(c, 1, params.M);
      if (!std::binary_search(levels[k - 1].begin(), levels[k - 1].end(), parent))
        throw std::invalid_argument("orphan cell: parent not retained");
    }
  }
  PercolationTree tree;
  tree.params = params;
  tree.levels = std::move(levels);
  return tree;
}

const std::vector<Cell>& squares_at(const PercolationTree& tree, int k) {
  if (k < 0 || size_t(k) >= tree.levels.size())
    throw std::out_of_range("level out of range");
  return tree.levels[k];
}

bool is_extinct(const PercolationTree& tree, int k) {
  return squares_at(tree, k).empty();
}

bool contains(const PercolationTree& tree, int k, const Cell& c) {
  const auto& lvl = squares_at(tree, k);
  return std::binary_search(lvl.begin(), lvl.end(), c);
}

DyadicSquare ancestor(const DyadicSquare& sq, int levels_up, int M) {
  if (levels_up < 0 || levels_up > sq.level)
    throw std::out_of_range("ancestor levels_up out of range");
  int64_t q = ipow(M, levels_up);
  int64_t ax = sq.ix >= 0 ? sq.ix / q : -((-sq.ix + q - 1) / q);
  int64_t ay = sq.iy >= 0 ? sq.iy / q : -((-sq.iy + q - 1) / q);
  return DyadicSquare{sq.level - levels_up, ax, ay};
}

Cell ancestor_cell(const Cell& c, int levels_up, int M) {
  int64_t q = ipow(M, levels_up);
  return Cell{int32_t(c.ix / q), int32_t(c.iy / q)};
}

void for_each_descendant(const PercolationTree& tree, const Cell& anc,
                         int anc_level, int m,
                         const std::function<void(const Cell&)>& fn) {
  if (m < anc_level) throw std::out_of_range("descendant level above ancestor");
  const auto& lvl = squares_at(tree, m);
  int64_t q = ipow(tree.params.M, m - anc_level);
  for (int64_t cx = int64_t(anc.ix) * q; cx < int64_t(anc.ix + 1) * q; ++cx) {
    auto lo = std::lower_bound(lvl.begin(), lvl.end(),
                               Cell{int32_t(cx), int32_t(int64_t(anc.iy) * q)});
    auto hi = std::lower_bound(
        lvl.begin(), lvl.end(),
        Cell{int32_t(cx), int32_t(int64_t(anc.iy + 1) * q)});
    for (auto it = lo; it != hi; ++it) fn(*it);
  }
}

}  // namespace fracvis
