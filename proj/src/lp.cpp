#include "lp.hpp"

#include <cmath>
#include <cstddef>

#include "bellkit/error.hpp"

namespace bellkit::lp {

std::optional<std::vector<double>> feasible_point(const std::vector<std::vector<double>>& a,
                                                  const std::vector<double>& b, double tolerance) {
  constexpr double kPivot = 1e-12;
  const std::size_t m = b.size();
  if (a.size() != m || m == 0) throw Error("lp: row count mismatch");
  const std::size_t n = a[0].size();
  const std::size_t cols = n + m;  // originals, then one artificial per row
  const std::size_t rhs = cols;

  // Rows 0..m-1 constraints, row m reduced costs of the phase-one objective.
  std::vector<std::vector<double>> t(m + 1, std::vector<double>(cols + 1, 0.0));
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (a[i].size() != n) throw Error("lp: ragged matrix");
    const double flip = b[i] < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) t[i][j] = flip * a[i][j];
    t[i][n + i] = 1.0;
    t[i][rhs] = flip * b[i];
    basis[i] = n + i;
    for (std::size_t j = 0; j < n; ++j) t[m][j] -= t[i][j];
    t[m][rhs] -= t[i][rhs];
  }

  for (;;) {
    std::size_t enter = cols;
    for (std::size_t j = 0; j < cols; ++j) {
      if (t[m][j] < -kPivot) {
        enter = j;
        break;
      }
    }
    if (enter == cols) break;

    std::size_t leave = m;
    double best = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (t[i][enter] <= kPivot) continue;
      const double ratio = t[i][rhs] / t[i][enter];
      if (leave == m || ratio < best - kPivot || (std::abs(ratio - best) <= kPivot && basis[i] < basis[leave])) {
        leave = i;
        best = ratio;
      }
    }
    if (leave == m) break;  // unbounded direction; cannot happen for phase one

    const double piv = t[leave][enter];
    for (auto& v : t[leave]) v /= piv;
    for (std::size_t i = 0; i <= m; ++i) {
      if (i == leave) continue;
      const double f = t[i][enter];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= cols; ++j) t[i][j] -= f * t[leave][j];
    }
    basis[leave] = enter;
  }

  if (-t[m][rhs] > tolerance) return std::nullopt;
  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] < n) x[basis[i]] = t[i][rhs];
  }
  return x;
}

}  // namespace bellkit::lp
