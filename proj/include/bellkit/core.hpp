#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bellkit/error.hpp"
#include "bellkit/rng.hpp"

namespace bellkit {

/// An outcome value, exactly +1 or -1.
class Sign {
 public:
  /// Throws bellkit::Error unless v is +1 or -1.
  explicit Sign(int v);

  static constexpr Sign plus() { return Sign(Raw{1}); }
  static constexpr Sign minus() { return Sign(Raw{-1}); }

  constexpr int value() const { return value_; }
  constexpr Sign operator-() const { return Sign(Raw{static_cast<std::int8_t>(-value_)}); }

  friend constexpr bool operator==(Sign, Sign) = default;
  friend constexpr int operator*(Sign l, Sign r) { return l.value_ * r.value_; }

 private:
  struct Raw {
    std::int8_t v;
  };
  explicit constexpr Sign(Raw r) : value_(r.v) {}
  std::int8_t value_;
};

/// One row of the counterfactual spreadsheet: the outcome Alice would see
/// under each of her settings and likewise for Bob.
struct CounterfactualRow {
  Sign a = Sign::plus();
  Sign a_prime = Sign::plus();
  Sign b = Sign::plus();
  Sign b_prime = Sign::plus();

  Sign alice(int x) const { return x == 0 ? a : a_prime; }
  Sign bob(int y) const { return y == 0 ? b : b_prime; }

  friend bool operator==(const CounterfactualRow&, const CounterfactualRow&) = default;
};

/// N x 4 table of counterfactual outcomes. Operations reject empty tables.
struct CounterfactualTable {
  std::vector<CounterfactualRow> rows;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }

  friend bool operator==(const CounterfactualTable&, const CounterfactualTable&) = default;
};

struct SettingPair {
  std::uint8_t x = 0;  // 0 selects A, 1 selects A'
  std::uint8_t y = 0;  // 0 selects B, 1 selects B'

  friend bool operator==(SettingPair, SettingPair) = default;
};

struct SettingsStream {
  std::vector<SettingPair> pairs;

  std::size_t size() const { return pairs.size(); }

  friend bool operator==(const SettingsStream&, const SettingsStream&) = default;
};

struct ObservedRun {
  int x = 0;
  int y = 0;
  Sign a_out = Sign::plus();
  Sign b_out = Sign::plus();
  std::size_t row_index = 0;

  friend bool operator==(const ObservedRun&, const ObservedRun&) = default;
};

/// Cells are always stored in the order (0,0), (0,1), (1,0), (1,1),
/// i.e. <AB>, <AB'>, <A'B>, <A'B'>.
constexpr std::size_t cell_index(int x, int y) { return static_cast<std::size_t>(2 * x + y); }

struct ChshSummary {
  std::array<double, 4> corr{};
  std::array<std::size_t, 4> counts{};
  double s = 0.0;
  double se = 0.0;
  std::size_t n_total = 0;

  friend bool operator==(const ChshSummary&, const ChshSummary&) = default;
};

/// CHSH combination of four correlations in storage order.
constexpr double chsh_combination(const std::array<double, 4>& c) {
  return c[0] + c[1] + c[2] - c[3];
}

/// AB + AB' + A'B - A'B' for one row; always +2 or -2.
int row_chsh_term(const CounterfactualRow& row);

/// Average of row_chsh_term over the table; lies in [-2, 2].
double full_table_chsh(const CounterfactualTable& table);

/// n independent fair setting pairs. Each pair consumes one 64-bit draw:
/// x is its top bit, y the next bit.
SettingsStream sample_settings(std::size_t n, RngSeed seed);

/// Keeps only the columns selected by each run's settings.
std::vector<ObservedRun> observe(const CounterfactualTable& table, const SettingsStream& settings);

/// Per-cell correlations, the CHSH statistic and its delta-method
/// standard error sqrt(sum (1 - corr^2) / count). Throws when a cell is
/// empty ("undefined correlation").
ChshSummary observed_correlations(std::span<const ObservedRun> runs);

/// Per-cell sums and counts without the final division, for callers that
/// need to tolerate empty cells.
struct CellTally {
  std::array<long long, 4> sum{};
  std::array<std::size_t, 4> count{};

  void add(int x, int y, int product) {
    sum[cell_index(x, y)] += product;
    ++count[cell_index(x, y)];
  }
  bool complete() const { return count[0] && count[1] && count[2] && count[3]; }
  std::size_t min_count() const;
  /// Undefined when !complete().
  double chsh() const;
};

enum class EstimateMode { monte_carlo, exhaustive };

inline constexpr std::uint64_t kDefaultExhaustiveCap = std::uint64_t{1} << 24;

/// Fraction of setting assignments for which the observed CHSH statistic
/// is strictly greater than 2. Assignments leaving a cell empty count in
/// the denominator but never as successes. Exhaustive mode enumerates all
/// 4^n assignments and ignores `trials` and `seed`.
double conjecture1_estimate(const CounterfactualTable& table, std::uint64_t trials, RngSeed seed,
                            EstimateMode mode, std::uint64_t exhaustive_cap = kDefaultExhaustiveCap);

// CSV formats. Tables: header `A,Ap,B,Bp`; settings: header `x,y`;
// observed runs: header `x,y,a,b`. Lines end in '\n'.
std::string format_table_csv(const CounterfactualTable& table);
CounterfactualTable parse_table_csv(std::istream& in);
std::string format_settings_csv(const SettingsStream& settings);
SettingsStream parse_settings_csv(std::istream& in);
std::string format_runs_csv(std::span<const ObservedRun> runs);
std::vector<ObservedRun> parse_runs_csv(std::istream& in);

}  // namespace bellkit
