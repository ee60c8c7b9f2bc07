#pragma once

#include <cstdint>

namespace fracvis {

// Counter-based randomness.  Every retention decision is a pure function
// of (master seed, level, ix, iy), so regenerating a tree from its params
// is bit-reproducible and trials can be evaluated in any order or thread.

inline uint64_t mix64(uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ull;

// Per-level key, hoisted out of the per-square loop by callers.
inline uint64_t level_key(uint64_t seed, uint32_t level) {
  return mix64(seed + kGolden * (uint64_t(level) + 1));
}

inline uint64_t square_hash(uint64_t lvl_key, uint64_t ix, uint64_t iy) {
  return mix64(lvl_key ^ (ix * 0xff51afd7ed558ccdull + iy + 0x63652362));
}

// Threshold comparison: retain iff hash < floor(p * 2^64), with p == 1
// mapping to "always".  The represented probability differs from p by
// less than 2^-64.
struct RetentionRule {
  uint64_t threshold = 0;
  bool always = false;

  bool keep(uint64_t h) const { return always || h < threshold; }
};

// num/den must be a canonical rational in (0, 1], den > 0.
inline RetentionRule make_retention_rule(uint64_t num, uint64_t den) {
  RetentionRule r;
  if (num == den) {
    r.always = true;
    return r;
  }
  r.threshold = static_cast<uint64_t>(((static_cast<unsigned __int128>(num)) << 64) / den);
  return r;
}

inline uint64_t derive_trial_seed(uint64_t master, uint64_t trial_index) {
  return mix64(mix64(master) ^ (kGolden * (trial_index + 1)));
}

}  // namespace fracvis
