#include "mwlab/dyadic.hpp"

#include "mwlab/errors.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <unordered_map>

namespace mwlab {

Interval::Interval(int lvl, std::uint64_t idx) : level(lvl), index(idx) {
  if (lvl < 0 || lvl > kMaxLevel)
    throw RangeError("dyadic level " + std::to_string(lvl) + " outside [0, 62]");
  if (idx >= (std::uint64_t{1} << lvl))
    throw RangeError("dyadic index " + std::to_string(idx) + " outside level " +
                     std::to_string(lvl));
}

Interval Interval::plus() const { return Interval(level + 1, index << 1); }
Interval Interval::minus() const { return Interval(level + 1, (index << 1) | 1u); }

Interval Interval::parent() const {
  if (level == 0) throw PreconditionError("the root interval has no parent");
  Interval p;
  p.level = level - 1;
  p.index = index >> 1;
  return p;
}

Interval Interval::ancestor(int lvl) const {
  if (lvl < 0 || lvl > level) throw RangeError("ancestor level out of range");
  Interval p;
  p.level = lvl;
  p.index = index >> (level - lvl);
  return p;
}

bool Interval::contains(const Interval& other) const {
  return other.level >= level && (other.index >> (other.level - level)) == index;
}

double Interval::measure() const { return std::ldexp(1.0, -level); }
double Interval::left() const { return std::ldexp(static_cast<double>(index), -level); }
double Interval::right() const { return std::ldexp(static_cast<double>(index + 1), -level); }

Interval Interval::from_flat(std::uint64_t flat) {
  int lvl = std::bit_width(flat + 1) - 1;
  return Interval(lvl, flat + 1 - (std::uint64_t{1} << lvl));
}

std::string Interval::str() const { return std::to_string(level) + ":" + std::to_string(index); }

Interval Interval::parse(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos) throw DomainError("interval must be 'n:k'");
  int lvl = 0;
  std::uint64_t idx = 0;
  auto r1 = std::from_chars(text.data(), text.data() + colon, lvl);
  auto r2 = std::from_chars(text.data() + colon + 1, text.data() + text.size(), idx);
  if (r1.ec != std::errc() || r2.ec != std::errc() || r1.ptr != text.data() + colon ||
      r2.ptr != text.data() + text.size())
    throw DomainError("interval must be 'n:k', got '" + std::string(text) + "'");
  return Interval(lvl, idx);
}

Children children(const Interval& I) { return {I.plus(), I.minus()}; }

std::vector<Interval> descendants(const Interval& K, int maxLevel) {
  if (maxLevel < K.level)
    throw RangeError("descendants: maxLevel " + std::to_string(maxLevel) + " below level " +
                     std::to_string(K.level));
  if (maxLevel > kMaxLevel) throw RangeError("descendants: maxLevel exceeds depth cap");
  std::vector<Interval> out;
  out.reserve(static_cast<std::size_t>(count_upto(maxLevel - K.level)));
  for (int lvl = K.level; lvl <= maxLevel; ++lvl) {
    int shift = lvl - K.level;
    std::uint64_t first = K.index << shift;
    std::uint64_t n = std::uint64_t{1} << shift;
    for (std::uint64_t j = 0; j < n; ++j) out.push_back(Interval(lvl, first + j));
  }
  return out;
}

std::vector<Interval> plus_class(int maxLevel) {
  if (maxLevel < 1) throw RangeError("plus_class: maxLevel must be >= 1");
  std::vector<Interval> out;
  out.reserve(static_cast<std::size_t>((std::uint64_t{1} << maxLevel) - 1));
  for (int lvl = 1; lvl <= maxLevel; ++lvl) {
    std::uint64_t n = std::uint64_t{1} << lvl;
    for (std::uint64_t k = 0; k < n; k += 2) out.push_back(Interval(lvl, k));
  }
  return out;
}

Interval s_interval(const Interval& I, int n, SelectorOrientation orientation) {
  if (I.level > n)
    throw PreconditionError("s_interval: " + I.str() + " is deeper than n = " + std::to_string(n));
  int shift = n + 1 - I.level;
  std::uint64_t base = I.index << shift;
  if (orientation == SelectorOrientation::Opposed) base += (std::uint64_t{1} << shift) - 1;
  return Interval(n + 1, base);
}

Interval s_interval(const Interval& I, int n) {
  return s_interval(I, n, SelectorOrientation::Opposed);
}

DisjointnessReport verify_s_disjoint(int n, SelectorOrientation orientation) {
  DisjointnessReport rep;
  std::unordered_map<std::uint64_t, Interval> seen;
  for (const Interval& I : plus_class(n)) {
    Interval s = s_interval(I, n, orientation);
    ++rep.checked;
    auto [it, inserted] = seen.emplace(s.index, I);
    if (!inserted) {
      rep.disjoint = false;
      rep.collision = std::make_pair(it->second, I);
      return rep;
    }
  }
  return rep;
}

}  // namespace mwlab
