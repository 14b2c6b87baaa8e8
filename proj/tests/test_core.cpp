#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "bellkit/core.hpp"
#include "bellkit/quantum.hpp"

using namespace bellkit;

namespace {

CounterfactualRow row(int a, int ap, int b, int bp) { return {Sign(a), Sign(ap), Sign(b), Sign(bp)}; }

CounterfactualTable random_table(std::size_t n, Rng& rng) {
  CounterfactualTable t;
  for (std::size_t j = 0; j < n; ++j) {
    const auto w = rng.next_u64();
    const auto s = [&](int k) { return Sign(((w >> k) & 1U) ? 1 : -1); };
    t.rows.push_back({s(0), s(1), s(2), s(3)});
  }
  return t;
}

}  // namespace

TEST(Sign, RejectsAnythingButPlusMinusOne) {
  EXPECT_EQ(Sign(1).value(), 1);
  EXPECT_EQ(Sign(-1).value(), -1);
  EXPECT_THROW(Sign(0), Error);
  EXPECT_THROW(Sign(2), Error);
  EXPECT_EQ(-Sign::plus(), Sign::minus());
  EXPECT_EQ(Sign::minus() * Sign::minus(), 1);
}

TEST(Rng, EngineMatchesStandardReferenceValue) {
  // The standard fixes the 10000th output of a default-seeded mt19937_64.
  Rng rng(RngSeed{5489});
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  EXPECT_EQ(v, 9981545732273789042ULL);
}

TEST(Rng, SeedDerivationMatchesSplitMixReference) {
  // Values computed independently in Python.
  EXPECT_EQ(mix64(0), 16294208416658607535ULL);
  EXPECT_EQ(mix64(1), 10451216379200822465ULL);
  EXPECT_EQ(derive_seed(RngSeed{42}, 0).value, 16802529142090723433ULL);
  EXPECT_EQ(derive_seed(RngSeed{42}, 1).value, 18282978806604486323ULL);
}

TEST(Rng, SaveRestoreReplaysTheSameDraws) {
  Rng rng(RngSeed{9});
  for (int i = 0; i < 17; ++i) rng.next_u64();
  const auto state = rng.save();
  std::vector<std::uint64_t> first;
  for (int i = 0; i < 8; ++i) first.push_back(rng.next_u64());
  Rng other(RngSeed{1});
  other.restore(state);
  for (auto v : first) EXPECT_EQ(other.next_u64(), v);
  EXPECT_THROW(other.restore("garbage"), Error);
}

TEST(Rng, UniformStaysInUnitInterval) {
  Rng rng(RngSeed{3});
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(RowChshTerm, Examples) {
  EXPECT_EQ(row_chsh_term(row(1, 1, 1, 1)), 2);
  EXPECT_EQ(row_chsh_term(row(-1, 1, 1, 1)), -2);
  EXPECT_EQ(row_chsh_term(row(1, 1, 1, -1)), 2);
}

TEST(RowChshTerm, ExhaustiveOverAllSixteenRows) {
  for (int bits = 0; bits < 16; ++bits) {
    const auto s = [&](int k) { return ((bits >> k) & 1) ? 1 : -1; };
    const int a = s(3), ap = s(2), b = s(1), bp = s(0);
    const int brute = a * b + a * bp + ap * b - ap * bp;
    const int v = row_chsh_term(row(a, ap, b, bp));
    EXPECT_EQ(v, brute);
    EXPECT_TRUE(v == 2 || v == -2);
  }
}

TEST(FullTableChsh, Examples) {
  CounterfactualTable t;
  for (int i = 0; i < 4; ++i) t.rows.push_back(row(1, 1, 1, 1));
  EXPECT_DOUBLE_EQ(full_table_chsh(t), 2.0);
  EXPECT_DOUBLE_EQ(full_table_chsh({{row(1, 1, 1, 1), row(-1, -1, -1, -1)}}), 2.0);
  EXPECT_THROW(full_table_chsh({}), Error);
}

TEST(FullTableChsh, RandomTablesStayWithinTwo) {
  Rng rng(RngSeed{11});
  for (int i = 0; i < 2000; ++i) {
    const auto t = random_table(1 + rng.next_u64() % 50, rng);
    const double v = full_table_chsh(t);
    ASSERT_GE(v, -2.0);
    ASSERT_LE(v, 2.0);
  }
}

TEST(SampleSettings, DeterministicAndBalanced) {
  EXPECT_EQ(sample_settings(4, RngSeed{5}), sample_settings(4, RngSeed{5}));
  EXPECT_NE(sample_settings(64, RngSeed{5}), sample_settings(64, RngSeed{6}));
  EXPECT_EQ(sample_settings(1, RngSeed{5}).size(), 1U);
  EXPECT_THROW(sample_settings(0, RngSeed{5}), Error);

  const std::size_t n = 1000000;
  const auto s = sample_settings(n, RngSeed{77});
  std::array<std::size_t, 4> c{};
  for (const auto& p : s.pairs) ++c[cell_index(p.x, p.y)];
  for (auto k : c) EXPECT_NEAR(static_cast<double>(k) / n, 0.25, 0.002);
}

TEST(SampleSettings, SingleRunHitsEveryCellEvenly) {
  std::array<std::size_t, 4> c{};
  for (std::uint64_t s = 0; s < 40000; ++s) {
    const auto p = sample_settings(1, RngSeed{s}).pairs[0];
    ++c[cell_index(p.x, p.y)];
  }
  for (auto k : c) EXPECT_NEAR(k / 40000.0, 0.25, 0.01);
}

TEST(Observe, SelectsColumns) {
  const CounterfactualTable t{{row(1, -1, -1, 1), row(1, -1, -1, 1)}};
  const SettingsStream s{{{0, 0}, {1, 1}}};
  const auto runs = observe(t, s);
  EXPECT_EQ(runs[0].a_out.value(), 1);
  EXPECT_EQ(runs[0].b_out.value(), -1);
  EXPECT_EQ(runs[1].a_out.value(), -1);
  EXPECT_EQ(runs[1].b_out.value(), 1);
  EXPECT_EQ(runs[1].row_index, 1U);
  EXPECT_THROW(observe(t, SettingsStream{{{0, 0}}}), Error);
}

TEST(Observe, ConstantSettingsReproduceColumnProducts) {
  Rng rng(RngSeed{21});
  const auto t = random_table(500, rng);
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      SettingsStream s;
      s.pairs.assign(t.size(), SettingPair{static_cast<std::uint8_t>(x), static_cast<std::uint8_t>(y)});
      const auto runs = observe(t, s);
      long long direct = 0;
      long long seen = 0;
      for (std::size_t j = 0; j < t.size(); ++j) {
        direct += t.rows[j].alice(x) * t.rows[j].bob(y);
        seen += runs[j].a_out * runs[j].b_out;
      }
      EXPECT_EQ(seen, direct);
    }
  }
}

TEST(ObservedCorrelations, EmptyCellIsAnError) {
  std::vector<ObservedRun> runs{{0, 0, Sign(1), Sign(1), 0}, {0, 0, Sign(1), Sign(1), 1}};
  try {
    observed_correlations(runs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("undefined correlation"), std::string::npos);
  }
}

TEST(ObservedCorrelations, SyntheticTsirelsonCorrelations) {
  // Cell correlations of +-1/sqrt2 cannot come from +-1 products exactly, so
  // build cells whose products average to those values in the limit and check
  // the combination algebra on the exact inputs instead.
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(chsh_combination({r, r, r, -r}), 2.0 * std::sqrt(2.0), 1e-15);

  // 1000 runs per cell with 854 agreeing products gives 0.708.
  std::vector<ObservedRun> runs;
  std::size_t idx = 0;
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      const int sign = (x == 1 && y == 1) ? -1 : 1;
      for (int k = 0; k < 1000; ++k) {
        const int prod = k < 854 ? sign : -sign;
        runs.push_back({x, y, Sign(1), Sign(prod), idx++});
      }
    }
  }
  const auto s = observed_correlations(runs);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(std::abs(s.corr[c]), 0.708, 1e-12);
  EXPECT_NEAR(s.s, 4 * 0.708, 1e-12);
  EXPECT_EQ(s.n_total, 4000U);
}

TEST(ObservedCorrelations, StandardErrorMatchesDirectBinomialVariance) {
  Rng rng(RngSeed{4});
  const auto t = random_table(3000, rng);
  const auto runs = observe(t, sample_settings(t.size(), RngSeed{8}));
  const auto s = observed_correlations(runs);

  // Direct route: per-cell sample variance of the products (1/n
  // normalisation) divided by the count, summed over cells.
  double var = 0.0;
  std::size_t total = 0;
  for (int c = 0; c < 4; ++c) {
    double sum = 0;
    double sum2 = 0;
    std::size_t n = 0;
    for (const auto& r : runs) {
      if (static_cast<int>(cell_index(r.x, r.y)) != c) continue;
      const double p = r.a_out * r.b_out;
      sum += p;
      sum2 += p * p;
      ++n;
    }
    const double mean = sum / n;
    var += (sum2 / n - mean * mean) / n;
    total += n;
    EXPECT_EQ(s.counts[c], n);
  }
  EXPECT_NEAR(s.se * s.se, var, 1e-14);
  EXPECT_EQ(total, s.n_total);
  EXPECT_NEAR(s.s, s.corr[0] + s.corr[1] + s.corr[2] - s.corr[3], 1e-15);
}

TEST(ObservedCorrelations, RandomTablesStayInRange) {
  Rng rng(RngSeed{14});
  for (int i = 0; i < 300; ++i) {
    const auto t = random_table(40, rng);
    const auto runs = observe(t, sample_settings(t.size(), RngSeed{rng.next_u64()}));
    CellTally tally;
    for (const auto& r : runs) tally.add(r.x, r.y, r.a_out * r.b_out);
    if (!tally.complete()) continue;
    const auto s = observed_correlations(runs);
    for (double c : s.corr) {
      ASSERT_GE(c, -1.0);
      ASSERT_LE(c, 1.0);
    }
    ASSERT_LE(std::abs(s.s), 4.0);
  }
}

TEST(Conjecture1, ConstantRowsNeverExceedTwo) {
  CounterfactualTable t;
  for (int i = 0; i < 6; ++i) t.rows.push_back(row(1, 1, 1, -1));
  EXPECT_EQ(conjecture1_estimate(t, 0, RngSeed{0}, EstimateMode::exhaustive), 0.0);
  EXPECT_EQ(conjecture1_estimate(t, 10000, RngSeed{1}, EstimateMode::monte_carlo), 0.0);
}

TEST(Conjecture1, FourRowExampleMatchesBruteForceOracle) {
  // Independent brute force over the 256 assignments: 4 successes.
  const CounterfactualTable t{{row(1, 1, 1, 1), row(1, 1, 1, 1), row(-1, -1, 1, 1), row(1, -1, -1, 1)}};
  EXPECT_DOUBLE_EQ(conjecture1_estimate(t, 0, RngSeed{0}, EstimateMode::exhaustive), 4.0 / 256.0);
}

TEST(Conjecture1, ExhaustiveCapIsEnforced) {
  CounterfactualTable t;
  for (int i = 0; i < 13; ++i) t.rows.push_back(row(1, 1, 1, 1));
  EXPECT_THROW(conjecture1_estimate(t, 0, RngSeed{0}, EstimateMode::exhaustive), Error);
  EXPECT_THROW(conjecture1_estimate(t, 0, RngSeed{0}, EstimateMode::exhaustive, 1000), Error);
}

TEST(Conjecture1, MonteCarloAgreesWithExhaustive) {
  Rng rng(RngSeed{31});
  for (int i = 0; i < 10; ++i) {
    const auto t = random_table(6, rng);
    const double ex = conjecture1_estimate(t, 0, RngSeed{0}, EstimateMode::exhaustive);
    const double mc = conjecture1_estimate(t, 100000, RngSeed{rng.next_u64()}, EstimateMode::monte_carlo);
    EXPECT_NEAR(mc, ex, 0.01);
    EXPECT_LE(ex, 0.5);
  }
}

TEST(Csv, RoundTrips) {
  Rng rng(RngSeed{2});
  const auto t = random_table(20, rng);
  std::istringstream tin(format_table_csv(t));
  EXPECT_EQ(parse_table_csv(tin), t);

  const auto s = sample_settings(20, RngSeed{3});
  std::istringstream sin(format_settings_csv(s));
  EXPECT_EQ(parse_settings_csv(sin), s);

  const auto runs = observe(t, s);
  std::istringstream rin(format_runs_csv(runs));
  const auto back = parse_runs_csv(rin);
  ASSERT_EQ(back.size(), runs.size());
  for (std::size_t j = 0; j < runs.size(); ++j) {
    EXPECT_EQ(back[j].x, runs[j].x);
    EXPECT_EQ(back[j].a_out, runs[j].a_out);
    EXPECT_EQ(back[j].b_out, runs[j].b_out);
  }
}

TEST(Csv, TableFormatIsExact) {
  const CounterfactualTable t{{row(1, -1, -1, 1)}};
  EXPECT_EQ(format_table_csv(t), "A,Ap,B,Bp\n1,-1,-1,1\n");
}

TEST(Csv, RejectsMalformedInput) {
  for (const char* bad : {"A,Ap,B\n1,1,1\n", "A,Ap,B,Bp\n1,1,1\n", "A,Ap,B,Bp\n1,0,1,1\n", "A,Ap,B,Bp\n1,1,1,x\n",
                          "x,y,z,w\n1,1,1,1\n"}) {
    std::istringstream in(bad);
    EXPECT_THROW(parse_table_csv(in), Error) << bad;
  }
  std::istringstream s("x,y\n0,2\n");
  EXPECT_THROW(parse_settings_csv(s), Error);
}
