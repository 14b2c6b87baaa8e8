#include "bellkit/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bellkit/error.hpp"

namespace bellkit::bounds {

std::string_view to_string(BoundMethod m) {
  switch (m) {
    case BoundMethod::theorem1: return "theorem1";
    case BoundMethod::two_term: return "two-term";
    case BoundMethod::two_term_optimized: return "two-term-optimized";
  }
  return "?";
}

std::string_view to_string(Loophole l) { return l == Loophole::detection ? "detection" : "coincidence"; }

namespace {

double clamp01(double p) { return std::clamp(p, 0.0, 1.0); }

void check_eta(double eta) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw Error("eta must be a finite value >= 0");
}

// log(4 exp(-2 n d^2) + 4 exp(-2 (1/4 - d) n (eta/8)^2)), stable for large n.
double log_two_term(double n, double eta, double delta) {
  const double eps = eta / 8.0;
  const double l1 = std::log(4.0) - 2.0 * n * delta * delta;
  const double l2 = std::log(4.0) - 2.0 * (0.25 - delta) * n * eps * eps;
  const double hi = std::max(l1, l2);
  return hi + std::log1p(std::exp(std::min(l1, l2) - hi));
}

BoundReport make_two_term(std::uint64_t n, double eta, double delta, double log_p, BoundMethod m) {
  BoundReport r;
  r.n = n;
  r.eta = eta;
  r.delta = delta;
  r.raw = std::exp(log_p);
  r.probability = clamp01(r.raw);
  r.method = m;
  return r;
}

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error("gamma must lie in (0, 1], got " + std::to_string(gamma));
}

}  // namespace

double hoeffding_tail(std::uint64_t n, double t) {
  if (!(t >= 0.0)) throw Error("hoeffding_tail: t must be >= 0");
  return clamp01(std::exp(-2.0 * static_cast<double>(n) * t * t));
}

BoundReport theorem1_bound(std::uint64_t n, double eta) {
  if (n == 0) throw Error("theorem1_bound: n must be >= 1");
  check_eta(eta);
  const double q = eta / 16.0;
  BoundReport r;
  r.n = n;
  r.eta = eta;
  r.raw = 8.0 * std::exp(-static_cast<double>(n) * q * q);
  r.probability = clamp01(r.raw);
  r.method = BoundMethod::theorem1;
  return r;
}

BoundReport two_term_bound(std::uint64_t n, double eta, double delta) {
  check_eta(eta);
  if (!(delta > 0.0 && delta < 0.25)) throw Error("two_term_bound: delta must lie in (0, 1/4)");
  return make_two_term(n, eta, delta, log_two_term(static_cast<double>(n), eta, delta), BoundMethod::two_term);
}

double canonical_delta(double eta) { return (eta / 8.0) / std::sqrt(8.0); }

BoundReport two_term_bound_optimized(std::uint64_t n, double eta) {
  if (n == 0) throw Error("two_term_bound_optimized: n must be >= 1");
  check_eta(eta);
  const double nd = static_cast<double>(n);
  constexpr int kGrid = 1024;
  const auto grid = [](int i) { return 0.25 * (i + 1) / (kGrid + 1); };
  const auto f = [&](double d) { return log_two_term(nd, eta, d); };

  int best = 0;
  double best_val = f(grid(0));
  for (int i = 1; i < kGrid; ++i) {
    const double v = f(grid(i));
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }

  double lo = best == 0 ? grid(0) * 1e-3 : grid(best - 1);
  double hi = best == kGrid - 1 ? 0.25 * (1.0 - 1e-12) : grid(best + 1);
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - phi * (hi - lo);
  double d = lo + phi * (hi - lo);
  double fc = f(c);
  double fd = f(d);
  while (hi - lo > 1e-9 * 0.5 * (hi + lo)) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - phi * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + phi * (hi - lo);
      fd = f(d);
    }
  }
  double arg = 0.5 * (lo + hi);
  double val = f(arg);
  if (best_val < val) {
    arg = grid(best);
    val = best_val;
  }
  return make_two_term(n, eta, arg, val, BoundMethod::two_term_optimized);
}

std::uint64_t min_runs_for(double eta, double alpha) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw Error("min_runs_for: eta must be > 0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error("min_runs_for: alpha must lie in (0, 1]");
  const auto ok = [&](std::uint64_t n) { return theorem1_bound(n, eta).probability <= alpha; };
  if (ok(1)) return 1;
  const double q = eta / 16.0;
  auto n = static_cast<std::uint64_t>(std::ceil(std::log(8.0 / alpha) / (q * q)));
  n = std::max<std::uint64_t>(n, 2);
  while (n > 2 && ok(n - 1)) --n;
  while (!ok(n)) ++n;
  return n;
}

EfficiencyBound larsson_detection_bound(double gamma) {
  check_gamma(gamma);
  const double delta = 4.0 * (1.0 / gamma - 1.0);
  return {gamma, delta, 2.0 + delta, Loophole::detection};
}

EfficiencyBound larsson_coincidence_bound(double gamma) {
  check_gamma(gamma);
  const double delta = 6.0 * (1.0 / gamma - 1.0);
  return {gamma, delta, 2.0 + delta, Loophole::coincidence};
}

EfficiencyBound larsson_bound(double gamma, Loophole loophole) {
  return loophole == Loophole::detection ? larsson_detection_bound(gamma) : larsson_coincidence_bound(gamma);
}

}  // namespace bellkit::bounds
