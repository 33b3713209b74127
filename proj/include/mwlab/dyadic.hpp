#pragma once

// Dyadic lattice on [0,1). Intervals are encoded as (level, index) integers so
// tree logic never touches floating-point endpoints.
//
// Orientation: the Plus child I+ is the LEFT half (index 2k) and the Minus
// child I- is the RIGHT half (index 2k+1). Selector intervals S_I descend
// through Minus children, i.e. opposite to the Plus direction; this is what
// keeps {S_I : I in D+} pairwise disjoint.

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mwlab {

/// Deepest level representable; indices must fit in 64-bit integers.
inline constexpr int kMaxLevel = 62;

enum class IntervalClass { Root, Plus, Minus };

struct Interval {
  int level = 0;
  std::uint64_t index = 0;

  constexpr Interval() = default;
  /// Throws RangeError unless 0 <= level <= kMaxLevel and index < 2^level.
  Interval(int level, std::uint64_t index);

  static constexpr Interval root() { return {}; }

  constexpr auto operator<=>(const Interval&) const = default;

  IntervalClass klass() const {
    if (level == 0) return IntervalClass::Root;
    return (index & 1u) == 0 ? IntervalClass::Plus : IntervalClass::Minus;
  }
  bool is_root() const { return level == 0; }

  Interval plus() const;
  Interval minus() const;
  /// Throws PreconditionError on the root.
  Interval parent() const;
  /// Ancestor at `lvl` (lvl <= level).
  Interval ancestor(int lvl) const;
  bool contains(const Interval& other) const;

  /// Exact measure 2^-level.
  double measure() const;
  /// Left/right endpoints as doubles, for display only.
  double left() const;
  double right() const;

  /// Position in a level-major array of D^{<= n}: 2^level - 1 + index.
  std::uint64_t flat() const { return (std::uint64_t{1} << level) - 1 + index; }
  static Interval from_flat(std::uint64_t flat);

  /// "n:k"
  std::string str() const;
  static Interval parse(std::string_view text);
};

struct Children {
  Interval plus;
  Interval minus;
};

Children children(const Interval& I);

/// All I in D(K) with level <= maxLevel, level-major then index order.
/// Throws RangeError if maxLevel < K.level.
std::vector<Interval> descendants(const Interval& K, int maxLevel);

/// Number of intervals in D^{<= n}.
inline std::uint64_t count_upto(int n) { return (std::uint64_t{2} << n) - 1; }

/// Plus-class intervals of levels 1..maxLevel.
std::vector<Interval> plus_class(int maxLevel);

/// Level-(n+1) descendant of I reached through Minus children only.
/// Throws PreconditionError if I.level > n.
Interval s_interval(const Interval& I, int n);

enum class SelectorOrientation {
  Opposed,  ///< descend through Minus children (library convention)
  Aligned,  ///< descend through Plus children; used to show the collision
};

Interval s_interval(const Interval& I, int n, SelectorOrientation orientation);

struct DisjointnessReport {
  bool disjoint = true;
  std::size_t checked = 0;
  std::optional<std::pair<Interval, Interval>> collision;
};

/// Exhaustive check that {S_I : I in D+^{<= n}} are pairwise distinct.
DisjointnessReport verify_s_disjoint(int n,
                                     SelectorOrientation orientation = SelectorOrientation::Opposed);

/// Step sign along the path from the root: +1 when the step into level `step`
/// went to a Plus child, -1 for Minus. 1 <= step <= I.level.
inline int step_sign(const Interval& I, int step) {
  return ((I.index >> (I.level - step)) & 1u) == 0 ? +1 : -1;
}

}  // namespace mwlab
