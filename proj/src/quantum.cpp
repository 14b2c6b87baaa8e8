#include "bellkit/quantum.hpp"

#include <cmath>

namespace bellkit::quantum {

double singlet_correlation(double theta_a, double theta_b) { return -std::cos(theta_a - theta_b); }

JointTable joint_outcome_table(double theta) {
  const double c = std::cos(theta);
  const double same = 0.25 * (1.0 - c);
  const double diff = 0.25 * (1.0 + c);
  return {same, diff, diff, same};
}

std::pair<Sign, Sign> sample_joint(const JointTable& t, Rng& rng) {
  const double u = rng.uniform();
  if (u < t.p_pp) return {Sign::plus(), Sign::plus()};
  if (u < t.p_pp + t.p_pm) return {Sign::plus(), Sign::minus()};
  if (u < t.p_pp + t.p_pm + t.p_mp) return {Sign::minus(), Sign::plus()};
  return {Sign::minus(), Sign::minus()};
}

std::pair<Sign, Sign> sample_run(const AngleSet& angles, int x, int y, Rng& rng) {
  return sample_joint(joint_outcome_table(angles.alice(x) - angles.bob(y)), rng);
}

AngleSet canonical_angles() { return {0.0, kPi / 2.0, 5.0 * kPi / 4.0, 3.0 * kPi / 4.0}; }

std::array<double, 4> correlations(const AngleSet& angles) {
  std::array<double, 4> c{};
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) c[cell_index(x, y)] = singlet_correlation(angles.alice(x), angles.bob(y));
  }
  return c;
}

std::vector<ObservedRun> simulate_experiment(const AngleSet& angles, std::size_t n, RngSeed seed) {
  const auto settings = sample_settings(n, derive_seed(seed, 0));
  std::array<JointTable, 4> tables;
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) tables[cell_index(x, y)] = joint_outcome_table(angles.alice(x) - angles.bob(y));
  }
  Rng rng(derive_seed(seed, 1));
  std::vector<ObservedRun> runs;
  runs.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto [x, y] = settings.pairs[j];
    const auto [a, b] = sample_joint(tables[cell_index(x, y)], rng);
    runs.push_back({x, y, a, b, j});
  }
  return runs;
}

}  // namespace bellkit::quantum
