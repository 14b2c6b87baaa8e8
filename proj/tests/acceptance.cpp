// Acceptance checks, one line per criterion:
//
//   acceptance              run everything
//   acceptance --only NAME  run one check (names listed by --list)
//
// Exit status is 1 if any selected check fails.
#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "bellkit/bounds.hpp"
#include "bellkit/cli.hpp"
#include "bellkit/challengers.hpp"
#include "bellkit/core.hpp"
#include "bellkit/events.hpp"
#include "bellkit/lhv.hpp"
#include "bellkit/polytope.hpp"
#include "bellkit/qrc.hpp"
#include "bellkit/quantum.hpp"

using namespace bellkit;

namespace {

const double kRoot2 = std::sqrt(2.0);

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 6) {
  std::ostringstream o;
  o << std::setprecision(prec) << v;
  return o.str();
}

CounterfactualTable random_table(std::size_t n, Rng& rng) {
  CounterfactualTable t;
  t.rows.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto w = rng.next_u64();
    const auto s = [&](int k) { return Sign(((w >> k) & 1U) ? 1 : -1); };
    t.rows.push_back({s(0), s(1), s(2), s(3)});
  }
  return t;
}

Outcome fact1() {
  bool ok = true;
  for (int bits = 0; bits < 16; ++bits) {
    const auto s = [&](int k) { return Sign(((bits >> k) & 1) ? 1 : -1); };
    const int v = row_chsh_term({s(3), s(2), s(1), s(0)});
    ok = ok && (v == 2 || v == -2);
  }
  Rng rng(RngSeed{1});
  double lo = 0;
  double hi = 0;
  for (int i = 0; i < 100000; ++i) {
    const double v = full_table_chsh(random_table(1 + rng.next_u64() % 32, rng));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  ok = ok && lo >= -2.0 && hi <= 2.0;
  return {ok, "16 rows in {-2,+2}; 1e5 tables span [" + fmt(lo) + ", " + fmt(hi) + "]"};
}

Outcome eq6() {
  double mean = 0;
  double se_lo = 1;
  double se_hi = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = observed_correlations(quantum::simulate_experiment(quantum::canonical_angles(), 15000, RngSeed{seed}));
    mean += s.s / 100;
    se_lo = std::min(se_lo, s.se);
    se_hi = std::max(se_hi, s.se);
  }
  const bool ok = std::abs(mean - 2 * kRoot2) <= 0.01 && se_lo >= 0.019 && se_hi <= 0.025;
  return {ok, "mean s = " + fmt(mean, 7) + " (2 sqrt2 = " + fmt(2 * kRoot2, 7) + "), se in [" + fmt(se_lo, 4) + ", " +
                  fmt(se_hi, 4) + "]"};
}

Outcome theorem1_anchor() {
  const double p = bounds::theorem1_bound(15000, 0.73).probability;
  bool chain = true;
  bool collapse = true;
  int grid = 0;
  for (std::uint64_t n : {100ULL, 800ULL, 1000ULL, 15000ULL, 100000ULL, 1000000ULL}) {
    for (int k = 1; k <= 40; ++k) {
      const double eta = 0.05 * k;
      const double d = bounds::canonical_delta(eta);
      const auto tt = bounds::two_term_bound(n, eta, d);
      collapse = collapse && tt.probability <= bounds::theorem1_bound(n, eta).probability * (1 + 1e-9);
      if (8 * (0.25 - d) >= 1) chain = chain && tt.raw <= 8 * std::exp(-2.0 * n * d * d) * (1 + 1e-12);
      ++grid;
    }
  }
  const double tt = bounds::two_term_bound(15000, 0.73, bounds::canonical_delta(0.73)).probability;
  return {p < 1e-12 && collapse && chain,
          "theorem1(15000, 0.73) = " + fmt(p, 10) + ", two-term at canonical delta = " + fmt(tt, 10) +
              ", appendix chain holds on " + std::to_string(grid) + " (N, eta) points: " + (chain && collapse ? "yes" : "no")};
}

Outcome larsson() {
  const double target = 2 * kRoot2;
  const double det = bounds::larsson_detection_bound(1 / kRoot2).limit;
  const double coi = bounds::larsson_coincidence_bound(3 * (1 - 1 / kRoot2)).limit;
  const bool det_ok = std::abs(det - target) <= 1e-12 * target;
  const bool coi_ok = std::abs(coi - target) <= 1e-12 * target;
  const double crossing = 2 / (1 + kRoot2);
  return {det_ok && coi_ok, "detection(1/sqrt2) = " + fmt(det, 17) + (det_ok ? " ok" : " != 2 sqrt2") +
                                "; coincidence(3(1-1/sqrt2)) = " + fmt(coi, 17) + (coi_ok ? " ok" : " != 2 sqrt2") +
                                "; 2+4(1/g-1) reaches 2 sqrt2 at g = 2/(1+sqrt2) = " + fmt(crossing, 17)};
}

Outcome loophole() {
  const std::size_t n = 400000;
  const lhv::CheaterConfig cfg{polytope::quantum_behavior(quantum::canonical_angles()), 1.0};
  const auto data = lhv::simulate_loophole_experiment(cfg, n, RngSeed{2024});
  const auto stream = events::stream_from_runs(data.runs, 1000, 100, RngSeed{2025});
  const auto paired = events::pair_by_window(stream, 200);
  const auto rep = events::analyze(paired);
  const double rate = static_cast<double>(paired.pairs.size()) / n;
  const double g = rep.efficiency.gamma_hat;
  const bool ok = std::abs(rate - 0.25) <= 0.01 && std::abs(g - 0.5) <= 0.02 && rep.summary.s >= 2.7 &&
                  !rep.detection_adjusted.violated && rep.naive.violated;
  return {ok, "coincidence rate " + fmt(rate, 5) + ", gamma_hat " + fmt(g, 5) + ", coincidence s " +
                  fmt(rep.summary.s, 5) + ", detection-adjusted limit " + fmt(rep.detection_adjusted.limit, 5) + " -> " +
                  (rep.detection_adjusted.violated ? "violated" : "not violated")};
}

Outcome pairing() {
  Rng rng(RngSeed{3});
  bool conserved = true;
  bool ordered = true;
  for (int i = 0; i < 1000; ++i) {
    std::vector<events::TimedEvent> ev;
    const int m = static_cast<int>(rng.next_u64() % 200);
    for (int k = 0; k < m; ++k) {
      ev.push_back({static_cast<std::int64_t>(rng.next_u64() % 5000), rng.bit() ? events::Wing::A : events::Wing::B,
                    rng.bit(), Sign(rng.bit() ? 1 : -1)});
    }
    std::stable_sort(ev.begin(), ev.end(), [](const auto& l, const auto& r) { return l.t_ns < r.t_ns; });
    const events::EventStream s{ev};
    const std::int64_t w = 1 + static_cast<std::int64_t>(rng.next_u64() % 400);
    const auto win = events::pair_by_window(s, w);
    const auto lat = events::pair_by_lattice(s, w);
    for (const auto* r : {&win, &lat}) {
      conserved = conserved && 2 * r->pairs.size() + r->total_singles_a() + r->total_singles_b() == s.size();
    }
    ordered = ordered && lat.pairs.size() <= win.pairs.size();
  }
  const events::EventStream contrast{{{90, events::Wing::A, 0, Sign(1)}, {110, events::Wing::B, 0, Sign(1)}}};
  const auto cw = events::pair_by_window(contrast, 100).pairs.size();
  const auto cl = events::pair_by_lattice(contrast, 100).pairs.size();
  return {conserved && ordered && cw == 1 && cl == 0,
          std::string("conservation ") + (conserved ? "exact" : "BROKEN") + ", lattice <= window " +
              (ordered ? "always" : "NOT always") + "; A@90/B@110 w=100: window " + std::to_string(cw) +
              " pair, lattice " + std::to_string(cl)};
}

Outcome polytope_suite() {
  bool vertices = true;
  for (const auto& v : polytope::local_vertices()) {
    const auto f = polytope::chsh_facets(v);
    vertices = vertices && f.max_abs == 2.0 && f.violated_facets.empty();
  }
  Rng rng(RngSeed{4});
  double qmax = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto a = [&] { return 2 * quantum::kPi * rng.uniform(); };
    qmax = std::max(qmax, polytope::chsh_facets(polytope::quantum_behavior({a(), a(), a(), a()})).max_abs);
  }
  const auto pr = polytope::pr_box();
  const bool pr_ok = polytope::chsh_facets(pr).max_abs == 4.0 && polytope::validate(pr).no_signalling;
  const auto verts = polytope::local_vertices();
  int mixtures_ok = 0;
  for (int i = 0; i < 1000; ++i) {
    Behavior b;
    std::array<double, 16> w{};
    double sum = 0;
    for (auto& x : w) sum += (x = -std::log(1 - rng.uniform()));
    for (std::size_t k = 0; k < 16; ++k)
      for (std::size_t j = 0; j < 16; ++j) b.p[j] += w[k] / sum * verts[k].p[j];
    mixtures_ok += polytope::classify(b) == polytope::Classification::local && polytope::local_mixture_weights(b);
  }
  const bool ok = vertices && qmax <= 2 * kRoot2 + 1e-9 && pr_ok && mixtures_ok == 1000;
  return {ok, std::string("16 vertices max |facet| = 2: ") + (vertices ? "yes" : "no") + "; quantum max over 1e4 = " +
                  fmt(qmax, 12) + "; pr-box facet 4 and no-signalling: " + (pr_ok ? "yes" : "no") +
                  "; local mixtures classified local and LP-feasible: " + std::to_string(mixtures_ok) + "/1000"};
}

Outcome conjecture() {
  double max_p = 0;
  std::size_t above = 0;
  for (std::uint32_t bits = 0; bits < (1U << 16); ++bits) {
    CounterfactualTable t;
    for (int r = 0; r < 4; ++r) {
      const auto nib = (bits >> (4 * (3 - r))) & 0xFU;
      const auto s = [&](int k) { return Sign(((nib >> (3 - k)) & 1U) ? 1 : -1); };
      t.rows.push_back({s(0), s(1), s(2), s(3)});
    }
    const double p = conjecture1_estimate(t, 0, RngSeed{0}, EstimateMode::exhaustive);
    max_p = std::max(max_p, p);
    above += p > 0.5;
  }
  Rng rng(RngSeed{5});
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const auto t = random_table(6, rng);
    const double ex = conjecture1_estimate(t, 0, RngSeed{0}, EstimateMode::exhaustive);
    const double mc = conjecture1_estimate(t, 100000, RngSeed{rng.next_u64()}, EstimateMode::monte_carlo);
    worst = std::max(worst, std::abs(ex - mc));
  }
  const bool ok = max_p <= 0.5 && above == 0 && worst <= 0.01;
  std::string d = "n=4 sweep over 65536 tables: max Pr(s>2) = " + fmt(max_p, 8) + ", tables above 1/2: " +
                  std::to_string(above) + "; Monte Carlo vs exhaustive on 100 six-row tables: max gap " + fmt(worst, 4);
  if (above) d += "  ** COUNTEREXAMPLE TO THE CONJECTURE **";
  return {ok, d};
}

Outcome qrc_end_to_end() {
  qrc::ChallengeConfig c;
  challengers::NativeSpreadsheetChallenger lhv(challengers::Kind::lhv);
  std::size_t lhv_passes = 0;
  std::size_t lhv_max_won = 0;
  std::size_t q_passes = 0;
  std::size_t q_min_won = 99;
  for (std::uint64_t v = 0; v < 20; ++v) {
    const auto a = qrc::run_spreadsheet_verdict(lhv, c, RngSeed{1000 + v});
    lhv_passes += a.verdict.pass;
    lhv_max_won = std::max(lhv_max_won, a.verdict.sessions_won);
    const auto b = qrc::run_harness_quantum_verdict(quantum::canonical_angles(), c, RngSeed{2000 + v});
    q_passes += b.verdict.pass;
    q_min_won = std::min(q_min_won, b.verdict.sessions_won);
  }
  const bool ok = lhv_passes == 0 && lhv_max_won < 50 && q_passes >= 19;
  return {ok, "honest LHV: 0/20 expected, got " + std::to_string(lhv_passes) + "/20 passes (max sessions won " +
                  std::to_string(lhv_max_won) + "/99); harness quantum: " + std::to_string(q_passes) +
                  "/20 passes (min sessions won " + std::to_string(q_min_won) + "/99)"};
}

Outcome reproducibility() {
  const std::string dir = std::filesystem::temp_directory_path() / "bellkit-acceptance";
  std::filesystem::create_directories(dir);
  const std::string events = dir + "/events.ndjson";
  const std::string behavior = dir + "/behavior.csv";
  {
    std::ostringstream o, e;
    cli::run({"simulate", "--model", "cheater", "--n", "20000", "--seed", "8", "--events-out", events}, o, e);
    std::ostringstream b;
    cli::run({"polytope", "emit", "--which", "quantum"}, b, e);
    std::ofstream(behavior) << b.str();
  }
  const std::vector<std::vector<std::string>> cmds = {
      {"simulate", "--model", "quantum", "--n", "5000"},
      {"simulate", "--model", "lhv", "--n", "5000"},
      {"simulate", "--model", "cheater", "--n", "20000"},
      {"bound", "theorem1", "--n", "15000", "--eta", "0.73"},
      {"bound", "two-term-opt", "--n", "15000", "--eta", "0.73"},
      {"bound", "larsson-curve", "--from", "0.5", "--to", "1", "--step", "0.05"},
      {"analyze", events, "--window-ns", "200"},
      {"analyze", events, "--window-ns", "1000", "--method", "lattice"},
      {"polytope", "classify", behavior},
      {"polytope", "facets", "pr-box"},
      {"conjecture", "--random-tables", "5", "--rows", "5", "--trials", "5000"},
      {"conjecture", "--sweep", "3"},
      {"qrc", "spreadsheet", "--native", "lhv", "--trials", "5"},
      {"qrc", "spreadsheet", "--harness-quantum", "--trials", "5"},
      {"qrc", "interactive", "--native", "memory", "--trials", "3"},
      {"qrc", "three-node", "--oracle", "--trials", "2"},
      {"qrc", "determinism", "--native", "lhv"},
      {"qrc", "probe", "--native", "cheat-y"},
  };
  std::size_t same = 0;
  std::string bad;
  for (auto c : cmds) {
    c.push_back("--json");
    std::ostringstream o1, e1;
    const int r1 = cli::run(c, o1, e1);
    std::string seed;
    std::istringstream lines(o1.str());
    std::string line;
    while (std::getline(lines, line)) {
      const auto at = line.find("\"seed\":");
      if (line.find("\"type\":\"config\"") != std::string::npos && at != std::string::npos) {
        const auto end = line.find_first_of(",}", at);
        seed = line.substr(at + 7, end - at - 7);
        break;
      }
    }
    auto again = c;
    if (!seed.empty()) {
      again.push_back("--seed");
      again.push_back(seed);
    }
    std::ostringstream o2, e2;
    const int r2 = cli::run(again, o2, e2);
    if (r1 == 0 && r2 == 0 && !o1.str().empty() && o1.str() == o2.str()) {
      ++same;
    } else if (bad.empty()) {
      bad = c[0] + " " + c[1];
    }
  }
  return {same == cmds.size(), std::to_string(same) + "/" + std::to_string(cmds.size()) +
                                   " commands byte-identical on rerun with the echoed seed" +
                                   (bad.empty() ? "" : "; first mismatch: " + bad)};
}

struct Check {
  std::string name;
  std::string title;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Check> checks = {
      {"fact1", "Fact 1 exhaustive", 1, fact1},
      {"tsirelson-simulation", "Canonical-angle simulation", 10, eq6},
      {"theorem1-anchor", "Theorem 1 numeric anchor", 1, theorem1_anchor},
      {"larsson-thresholds", "Larsson thresholds", 1, larsson},
      {"loophole-demo", "Loophole demonstration", 30, loophole},
      {"pairing", "Pairing conservation and contrast", 5, pairing},
      {"polytope", "Polytope suite", 30, polytope_suite},
      {"conjecture1", "Conjecture 1 evidence", 300, conjecture},
      {"qrc", "QRC referee end-to-end", 120, qrc_end_to_end},
      {"reproducibility", "Reproducibility", 120, reproducibility},
  };
  CLI::App app{"bellkit acceptance checks"};
  std::string only;
  bool list = false;
  app.add_option("--only", only, "run a single check");
  app.add_flag("--list", list, "list check names");
  CLI11_PARSE(app, argc, argv);
  if (list) {
    for (const auto& c : checks) std::cout << c.name << '\n';
    return 0;
  }
  int failures = 0;
  int ran = 0;
  for (const auto& c : checks) {
    if (!only.empty() && c.name != only) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << "  " << c.title << ": " << o.detail << " [" << fmt(secs, 3) << " s"
              << (in_time ? "" : ", over the " + fmt(c.budget_s) + " s budget") << "]" << std::endl;
  }
  if (ran == 0) {
    std::cerr << "no check named '" << only << "'\n";
    return 2;
  }
  return failures ? 1 : 0;
}
