#pragma once

#include <cstdint>
#include <string_view>

namespace bellkit::bounds {

enum class BoundMethod { theorem1, two_term, two_term_optimized };
std::string_view to_string(BoundMethod m);

/// Probability that the observed CHSH statistic exceeds 2 + eta for a
/// local-realist table of n rows. `raw` is the formula value before
/// clamping to [0, 1]; `delta` is the split parameter of the two-term
/// bound (0 for theorem1).
struct BoundReport {
  std::uint64_t n = 0;
  double eta = 0.0;
  double probability = 1.0;
  double raw = 1.0;
  double delta = 0.0;
  BoundMethod method = BoundMethod::theorem1;
};

enum class Loophole { detection, coincidence };
std::string_view to_string(Loophole l);

/// Local-realist CHSH limit 2 + delta when only a fraction gamma of the
/// particles is detected (detection loophole) or when coincidences are
/// defined by the particles' own detection times (coincidence loophole).
struct EfficiencyBound {
  double gamma = 1.0;
  double delta = 0.0;
  double limit = 2.0;
  Loophole loophole = Loophole::detection;
};

/// min(1, exp(-2 n t^2)); the one-sided Hoeffding tail for binomial and
/// hypergeometric sample means. Throws on negative t.
double hoeffding_tail(std::uint64_t n, double t);

/// min(1, 8 exp(-n (eta/16)^2)).
BoundReport theorem1_bound(std::uint64_t n, double eta);

/// min(1, 4 exp(-2 n delta^2) + 4 exp(-2 (1/4 - delta) n (eta/8)^2)),
/// delta in (0, 1/4).
BoundReport two_term_bound(std::uint64_t n, double eta, double delta);

/// The split that makes the two-term bound collapse onto theorem1_bound:
/// 8 delta^2 = (eta/8)^2.
double canonical_delta(double eta);

/// two_term_bound minimised over delta: a 1024-point grid on (0, 1/4)
/// followed by golden-section refinement to relative tolerance 1e-9.
BoundReport two_term_bound_optimized(std::uint64_t n, double eta);

/// Smallest n >= 1 with theorem1_bound(n, eta).probability <= alpha.
std::uint64_t min_runs_for(double eta, double alpha);

/// 2 + 4 (1/gamma - 1), gamma in (0, 1].
EfficiencyBound larsson_detection_bound(double gamma);

/// 2 + 6 (1/gamma - 1), gamma in (0, 1].
EfficiencyBound larsson_coincidence_bound(double gamma);

EfficiencyBound larsson_bound(double gamma, Loophole loophole);

/// Quantum maximum of |S|.
inline constexpr double kTsirelson = 2.8284271247461900976;
constexpr double tsirelson_limit() { return kTsirelson; }

}  // namespace bellkit::bounds
