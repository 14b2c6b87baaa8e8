#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bellkit/behavior.hpp"
#include "bellkit/core.hpp"

namespace bellkit::lhv {

/// Outcomes prescribed for each local setting; Alice's outcome depends
/// only on x and Bob's only on y.
struct DeterministicStrategy {
  Sign a0 = Sign::plus();
  Sign a1 = Sign::plus();
  Sign b0 = Sign::plus();
  Sign b1 = Sign::plus();

  Sign alice(int x) const { return x == 0 ? a0 : a1; }
  Sign bob(int y) const { return y == 0 ? b0 : b1; }
  CounterfactualRow row() const { return {a0, a1, b0, b1}; }
  Behavior behavior() const;

  friend bool operator==(const DeterministicStrategy&, const DeterministicStrategy&) = default;
};

/// All 16 strategies. Order: (a0, a1, b0, b1) read as a 4-bit big-endian
/// counter where bit 0 means -1 and bit 1 means +1, so index 0 is all -1
/// and index 15 is all +1.
std::vector<DeterministicStrategy> enumerate_deterministic();

/// A probability mixture of deterministic strategies. The sampled
/// strategy plays the role of the hidden variable.
class LhvModel {
 public:
  enum class Kind { deterministic, mixture };

  static LhvModel deterministic(DeterministicStrategy s);
  /// Throws unless weights are nonnegative, sized like strategies and sum
  /// to 1 within 1e-12.
  static LhvModel mixture(std::vector<DeterministicStrategy> strategies, std::vector<double> weights);
  /// Equal weight on all 16 strategies.
  static LhvModel uniform();

  Kind kind() const { return kind_; }
  const std::vector<DeterministicStrategy>& strategies() const { return strategies_; }
  const std::vector<double>& weights() const { return weights_; }

  /// One uniform draw, inverse CDF over the weights.
  const DeterministicStrategy& sample(Rng& rng) const;

  /// The induced behavior, sum_k w_k * vertex_k.
  Behavior behavior() const;

 private:
  LhvModel(Kind k, std::vector<DeterministicStrategy> s, std::vector<double> w);
  Kind kind_;
  std::vector<DeterministicStrategy> strategies_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

/// n independent rows, each the sampled strategy's outcomes.
CounterfactualTable generate_table(const LhvModel& model, std::size_t n, RngSeed seed);

enum class Ternary : std::int8_t { minus = -1, none = 0, plus = 1 };

constexpr bool detected(Ternary t) { return t != Ternary::none; }
inline Ternary to_ternary(Sign s) { return s.value() == 1 ? Ternary::plus : Ternary::minus; }
/// Throws if t is Ternary::none.
Sign to_sign(Ternary t);

/// Pearle-style detection-loophole cheater. Each emitted pair agrees on a
/// desired setting pair (uniform), draws outcomes from the target's cell
/// for that pair, and each particle goes undetected when the actual
/// setting differs from the desired one. `wing_keep` additionally keeps a
/// detection with that probability, independently per wing (1 = no
/// thinning).
struct CheaterConfig {
  Behavior target;
  double wing_keep = 1.0;
};

/// Per-wing keep probability giving the 1 : 2x19 : 361 split of every
/// 400 emitted pairs (pairs thinned by a factor 1/100).
inline constexpr double kWeihsWingKeep = 0.1;

/// Throws unless the target passes positivity and normalization.
void validate_cheater(const CheaterConfig& config);

/// One emission measured at (x, y). Consumes exactly four uniform draws
/// so seed replays stay aligned regardless of outcome.
std::pair<Ternary, Ternary> cheater_run(const CheaterConfig& config, int x, int y, Rng& rng);

struct TernaryRun {
  int x = 0;
  int y = 0;
  Ternary a = Ternary::none;
  Ternary b = Ternary::none;

  friend bool operator==(const TernaryRun&, const TernaryRun&) = default;
};

struct LoopholeData {
  std::vector<TernaryRun> runs;
  std::size_t both = 0;
  std::size_t only_a = 0;
  std::size_t only_b = 0;
  std::size_t none = 0;

  std::size_t exactly_one() const { return only_a + only_b; }
};

using LoopholeSource = std::variant<LhvModel, CheaterConfig>;

/// n emissions with settings from sample_settings(n, derive_seed(seed, 0))
/// and model randomness from derive_seed(seed, 1). Honest models always
/// detect both particles.
LoopholeData simulate_loophole_experiment(const LoopholeSource& source, std::size_t n, RngSeed seed);

/// Coincidence-only observed runs (both wings detected).
std::vector<ObservedRun> coincidences(const std::vector<TernaryRun>& runs);

/// CSV `x,y,a,b` with 0 for no detection.
std::string format_ternary_csv(const std::vector<TernaryRun>& runs);
std::vector<TernaryRun> parse_ternary_csv(std::istream& in);

}  // namespace bellkit::lhv
