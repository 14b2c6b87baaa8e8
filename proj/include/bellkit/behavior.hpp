#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>

#include "bellkit/core.hpp"

namespace bellkit {

/// Sign-to-bit convention used everywhere a sign indexes an array:
/// +1 -> 0, -1 -> 1.
constexpr int sign_bit(int sign) { return sign == 1 ? 0 : 1; }
constexpr int bit_sign(int bit) { return bit == 0 ? 1 : -1; }

/// The 16 conditional probabilities p(a, b | x, y) of a two-party,
/// two-setting, two-outcome scenario.
struct Behavior {
  std::array<double, 16> p{};

  static constexpr std::size_t index(int x, int y, int a, int b) {
    return static_cast<std::size_t>(((2 * x + y) * 2 + sign_bit(a)) * 2 + sign_bit(b));
  }

  double& at(int x, int y, int a, int b) { return p[index(x, y, a, b)]; }
  double at(int x, int y, int a, int b) const { return p[index(x, y, a, b)]; }

  /// E(x, y) = sum_ab a b p(a, b | x, y).
  double correlation(int x, int y) const;

  /// Distribution of (a, b) at (x, y) in the order (+,+), (+,-), (-,+), (-,-).
  std::array<double, 4> context(int x, int y) const;

  friend bool operator==(const Behavior&, const Behavior&) = default;
};

/// CSV with header `x,y,a,b,p` and exactly 16 data rows, one per cell.
std::string format_behavior_csv(const Behavior& b);
Behavior parse_behavior_csv(std::istream& in);

}  // namespace bellkit
