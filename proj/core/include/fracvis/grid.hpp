#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fracvis/rational.hpp"

namespace fracvis {

// Parameters of one percolation tree.  p is kept as an exact rational so
// that serialized trees round-trip losslessly and the retention threshold
// is derived deterministically.
struct PercParams {
  Rat p;
  int M = 2;
  int depth = 0;
  uint64_t seed = 0;
};

// Throws std::invalid_argument on p outside (0,1], M < 2 or depth < 0.
void validate(const PercParams& params);

// Grid cell at one level: the closed square
// [ix*M^-k, (ix+1)*M^-k] x [iy*M^-k, (iy+1)*M^-k].
struct Cell {
  int32_t ix = 0;
  int32_t iy = 0;

  friend bool operator==(const Cell& a, const Cell& b) {
    return a.ix == b.ix && a.iy == b.iy;
  }
  friend bool operator<(const Cell& a, const Cell& b) {
    if (a.ix != b.ix) return a.ix < b.ix;
    return a.iy < b.iy;
  }
};

struct DyadicSquare {
  int level = 0;
  int64_t ix = 0;
  int64_t iy = 0;

  friend bool operator==(const DyadicSquare&, const DyadicSquare&) = default;
};

// M^e as int64, throws std::out_of_range once past the practical ceiling.
int64_t ipow(int M, int e);

// Exact corner coordinates of a cell.
Rat cell_lo_x(const Cell& c, int level, int M);
Rat cell_lo_y(const Cell& c, int level, int M);
Rat cell_side(int level, int M);

// Full percolation realization to params.depth.  levels[k] is the sorted
// (ix, iy) list of retained level-k squares; levels[0] == {(0,0)}.
struct PercolationTree {
  PercParams params;
  std::vector<std::vector<Cell>> levels;
};

// Pure function of params: child decisions are independent coin flips
// keyed by (seed, level, ix, iy); a square is retained iff its parent is
// retained and its own flip succeeds.
PercolationTree generate(const PercParams& params);

// Streaming variant for extinction studies: returns the smallest k with
// C_k empty, or -1 when C_depth is nonempty.  No tree is materialized.
int extinction_level(const PercParams& params);

// True iff C_depth is nonempty for the tree determined by params.  Explores
// depth-first and stops at the first surviving branch, so for supercritical p
// it touches O(depth) squares instead of the whole tree.
bool survives_to(const PercParams& params);

// Builds a tree from explicit level sets, validating shape: level 0 is
// {(0,0)}, indices in range, lists sorted and duplicate-free, and every
// cell's parent retained.  Used by tests and by the tree loader.
PercolationTree from_levels(const PercParams& params,
                            std::vector<std::vector<Cell>> levels);

const std::vector<Cell>& squares_at(const PercolationTree& tree, int k);
bool is_extinct(const PercolationTree& tree, int k);
bool contains(const PercolationTree& tree, int k, const Cell& c);

// Ancestor levels_up levels above, by exact floor division.
DyadicSquare ancestor(const DyadicSquare& sq, int levels_up, int M);
Cell ancestor_cell(const Cell& c, int levels_up, int M);

// Retained level-m descendants of anc (a retained level-j cell, j <= m),
// in lexicographic order.
void for_each_descendant(const PercolationTree& tree, const Cell& anc,
                         int anc_level, int m,
                         const std::function<void(const Cell&)>& fn);

}  // namespace fracvis
