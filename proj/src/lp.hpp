#pragma once

#include <optional>
#include <vector>

namespace bellkit::lp {

/// Finds x >= 0 with A x = b, or nullopt. Phase-one simplex with Bland's
/// anti-cycling rule; infeasible when the minimal artificial sum exceeds
/// `tolerance`. A is row-major, rows.size() == b.size().
std::optional<std::vector<double>> feasible_point(const std::vector<std::vector<double>>& a,
                                                  const std::vector<double>& b, double tolerance);

}  // namespace bellkit::lp
