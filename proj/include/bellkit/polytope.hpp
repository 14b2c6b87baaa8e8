#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "bellkit/behavior.hpp"
#include "bellkit/quantum.hpp"

namespace bellkit::polytope {

inline constexpr double kValidationTolerance = 1e-9;
inline constexpr double kFacetTolerance = 1e-9;
inline constexpr double kFeasibilityTolerance = 1e-8;

struct Validation {
  bool positivity = false;
  bool normalization = false;
  bool no_signalling = false;

  bool all() const { return positivity && normalization && no_signalling; }
};

/// Positivity, per-context normalization and both parties' no-signalling
/// equalities, each checked to 1e-9.
Validation validate(const Behavior& b);

/// Sign pattern (s00, s01, s10, s11) of facet k applied to
/// (E00, E01, E10, E11). The 8 patterns are those with an odd number of
/// minus signs, listed lexicographically with + before -; pattern 0 is the
/// usual (+, +, +, -).
std::array<int, 4> facet_signs(std::size_t k);

struct FacetReport {
  std::array<double, 8> values{};
  double max_abs = 0.0;
  /// Facets whose value exceeds 2 by more than kFacetTolerance.
  std::vector<std::size_t> violated_facets;
};

/// Throws if the behavior fails normalization.
FacetReport chsh_facets(const Behavior& b);

/// The 16 local-deterministic behaviors, in enumerate_deterministic order.
std::vector<Behavior> local_vertices();

/// Each context (x, y) is joint_outcome_table(alice(x) - bob(y)).
Behavior quantum_behavior(const quantum::AngleSet& angles);

/// p(a, b | x, y) = 1/2 when bit(a) xor bit(b) == x and y, else 0.
Behavior pr_box();

enum class Classification { local, quantum_compatible_unknown, no_signalling_superquantum, signalling, invalid };
std::string_view to_string(Classification c);

/// invalid -> signalling -> local (all facets <= 2) -> superquantum (some
/// facet > 2 sqrt 2 + 1e-9) -> quantum-compatible-unknown. Membership in the
/// quantum set is never asserted.
Classification classify(const Behavior& b);

/// Weights w >= 0, sum w = 1, with sum_k w_k vertex_k = b, found by a
/// two-phase simplex (Bland's rule) at tolerance 1e-8; nullopt when no
/// such mixture exists.
std::optional<std::array<double, 16>> local_mixture_weights(const Behavior& b);

}  // namespace bellkit::polytope
