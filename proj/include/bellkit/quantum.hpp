#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "bellkit/core.hpp"

namespace bellkit::quantum {

inline constexpr double kPi = 3.14159265358979323846;

/// Measurement angles (radians) for Alice's two settings and Bob's two.
struct AngleSet {
  double alpha = 0.0;
  double alpha_prime = 0.0;
  double beta = 0.0;
  double beta_prime = 0.0;

  double alice(int x) const { return x == 0 ? alpha : alpha_prime; }
  double bob(int y) const { return y == 0 ? beta : beta_prime; }

  friend bool operator==(const AngleSet&, const AngleSet&) = default;
};

/// Joint outcome distribution of one setting pair, ordered
/// (+,+), (+,-), (-,+), (-,-).
struct JointTable {
  double p_pp = 0.25;
  double p_pm = 0.25;
  double p_mp = 0.25;
  double p_mm = 0.25;

  double product_mean() const { return p_pp + p_mm - p_pm - p_mp; }
};

/// -cos(theta_a - theta_b).
double singlet_correlation(double theta_a, double theta_b);

/// p(+,+) = p(-,-) = (1 - cos theta)/4, p(+,-) = p(-,+) = (1 + cos theta)/4.
JointTable joint_outcome_table(double theta);

/// Draws one outcome pair from `table` using a single uniform draw
/// (inverse CDF over the four cells in storage order).
std::pair<Sign, Sign> sample_joint(const JointTable& table, Rng& rng);

/// One singlet run at settings (x, y).
std::pair<Sign, Sign> sample_run(const AngleSet& angles, int x, int y, Rng& rng);

/// alpha = 0, alpha' = pi/2, beta = 5pi/4, beta' = 3pi/4.
AngleSet canonical_angles();

/// Correlations implied by `angles` in cell storage order.
std::array<double, 4> correlations(const AngleSet& angles);

/// n singlet runs. Settings come from sample_settings(n, derive_seed(seed, 0));
/// outcomes from an Rng seeded with derive_seed(seed, 1).
std::vector<ObservedRun> simulate_experiment(const AngleSet& angles, std::size_t n, RngSeed seed);

}  // namespace bellkit::quantum
