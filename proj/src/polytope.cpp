#include "bellkit/polytope.hpp"

#include <algorithm>
#include <cmath>

#include "bellkit/bounds.hpp"
#include "bellkit/lhv.hpp"
#include "lp.hpp"

namespace bellkit::polytope {

Validation validate(const Behavior& b) {
  Validation v;
  v.positivity = std::all_of(b.p.begin(), b.p.end(), [](double p) { return p >= -kValidationTolerance; });

  v.normalization = true;
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      const auto c = b.context(x, y);
      if (std::abs(c[0] + c[1] + c[2] + c[3] - 1.0) > kValidationTolerance) v.normalization = false;
    }
  }

  v.no_signalling = true;
  for (int s : {1, -1}) {
    for (int setting = 0; setting < 2; ++setting) {
      // Alice's marginal p(a|x) must not depend on y; Bob's p(b|y) not on x.
      const double alice_y0 = b.at(setting, 0, s, 1) + b.at(setting, 0, s, -1);
      const double alice_y1 = b.at(setting, 1, s, 1) + b.at(setting, 1, s, -1);
      const double bob_x0 = b.at(0, setting, 1, s) + b.at(0, setting, -1, s);
      const double bob_x1 = b.at(1, setting, 1, s) + b.at(1, setting, -1, s);
      if (std::abs(alice_y0 - alice_y1) > kValidationTolerance || std::abs(bob_x0 - bob_x1) > kValidationTolerance) {
        v.no_signalling = false;
      }
    }
  }
  return v;
}

std::array<int, 4> facet_signs(std::size_t k) {
  static const auto patterns = [] {
    std::vector<std::array<int, 4>> out;
    for (unsigned m = 0; m < 16; ++m) {
      std::array<int, 4> s{};
      int minus = 0;
      for (int i = 0; i < 4; ++i) {
        s[static_cast<std::size_t>(i)] = ((m >> (3 - i)) & 1U) ? -1 : 1;
        minus += s[static_cast<std::size_t>(i)] < 0;
      }
      if (minus % 2 == 1) out.push_back(s);
    }
    // Lexicographic with + first puts (+,+,+,-) first.
    return out;
  }();
  if (k >= patterns.size()) throw Error("facet index must be 0..7");
  return patterns[k];
}

FacetReport chsh_facets(const Behavior& b) {
  if (!validate(b).normalization) throw Error("invalid behavior: contexts are not normalized");
  const std::array<double, 4> e{b.correlation(0, 0), b.correlation(0, 1), b.correlation(1, 0), b.correlation(1, 1)};
  FacetReport r;
  for (std::size_t k = 0; k < 8; ++k) {
    const auto s = facet_signs(k);
    double v = 0.0;
    for (std::size_t i = 0; i < 4; ++i) v += s[i] * e[i];
    r.values[k] = v;
    r.max_abs = std::max(r.max_abs, std::abs(v));
    if (v > 2.0 + kFacetTolerance) r.violated_facets.push_back(k);
  }
  return r;
}

std::vector<Behavior> local_vertices() {
  std::vector<Behavior> out;
  for (const auto& s : lhv::enumerate_deterministic()) out.push_back(s.behavior());
  return out;
}

Behavior quantum_behavior(const quantum::AngleSet& angles) {
  Behavior b;
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      const auto t = quantum::joint_outcome_table(angles.alice(x) - angles.bob(y));
      b.at(x, y, 1, 1) = t.p_pp;
      b.at(x, y, 1, -1) = t.p_pm;
      b.at(x, y, -1, 1) = t.p_mp;
      b.at(x, y, -1, -1) = t.p_mm;
    }
  }
  return b;
}

Behavior pr_box() {
  Behavior b;
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      for (int a : {1, -1}) {
        for (int bb : {1, -1}) b.at(x, y, a, bb) = ((sign_bit(a) ^ sign_bit(bb)) == (x & y)) ? 0.5 : 0.0;
      }
    }
  }
  return b;
}

std::string_view to_string(Classification c) {
  switch (c) {
    case Classification::local: return "local";
    case Classification::quantum_compatible_unknown: return "quantum-compatible-unknown";
    case Classification::no_signalling_superquantum: return "no-signalling-superquantum";
    case Classification::signalling: return "signalling";
    case Classification::invalid: return "invalid";
  }
  return "?";
}

Classification classify(const Behavior& b) {
  const auto v = validate(b);
  if (!v.positivity || !v.normalization) return Classification::invalid;
  if (!v.no_signalling) return Classification::signalling;
  const auto f = chsh_facets(b);
  if (f.max_abs <= 2.0 + kFacetTolerance) return Classification::local;
  if (f.max_abs > bounds::kTsirelson + kFacetTolerance) return Classification::no_signalling_superquantum;
  return Classification::quantum_compatible_unknown;
}

std::optional<std::array<double, 16>> local_mixture_weights(const Behavior& b) {
  const auto vertices = local_vertices();
  std::vector<std::vector<double>> a(17, std::vector<double>(16, 0.0));
  std::vector<double> rhs(17, 0.0);
  for (std::size_t i = 0; i < 16; ++i) {
    for (std::size_t k = 0; k < 16; ++k) a[i][k] = vertices[k].p[i];
    rhs[i] = b.p[i];
  }
  for (std::size_t k = 0; k < 16; ++k) a[16][k] = 1.0;
  rhs[16] = 1.0;

  const auto x = lp::feasible_point(a, rhs, kFeasibilityTolerance);
  if (!x) return std::nullopt;
  std::array<double, 16> w{};
  std::copy(x->begin(), x->end(), w.begin());
  return w;
}

}  // namespace bellkit::polytope
