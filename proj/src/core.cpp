#include "bellkit/core.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>

#include "csv.hpp"

namespace bellkit {

Sign::Sign(int v) : value_(static_cast<std::int8_t>(v)) {
  if (v != 1 && v != -1) throw Error("sign must be +1 or -1, got " + std::to_string(v));
}

int row_chsh_term(const CounterfactualRow& row) {
  return row.a * row.b + row.a * row.b_prime + row.a_prime * row.b - row.a_prime * row.b_prime;
}

double full_table_chsh(const CounterfactualTable& table) {
  if (table.empty()) throw Error("empty table");
  long long total = 0;
  for (const auto& row : table.rows) total += row_chsh_term(row);
  return static_cast<double>(total) / static_cast<double>(table.size());
}

SettingsStream sample_settings(std::size_t n, RngSeed seed) {
  if (n == 0) throw Error("settings stream needs n >= 1");
  Rng rng(seed);
  SettingsStream out;
  out.pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t w = rng.next_u64();
    out.pairs.push_back({static_cast<std::uint8_t>(w >> 63), static_cast<std::uint8_t>((w >> 62) & 1U)});
  }
  return out;
}

std::vector<ObservedRun> observe(const CounterfactualTable& table, const SettingsStream& settings) {
  if (settings.size() != table.size()) {
    throw Error("settings length " + std::to_string(settings.size()) + " does not match table length " +
                std::to_string(table.size()));
  }
  std::vector<ObservedRun> runs;
  runs.reserve(table.size());
  for (std::size_t j = 0; j < table.size(); ++j) {
    const auto [x, y] = settings.pairs[j];
    const auto& row = table.rows[j];
    runs.push_back({x, y, row.alice(x), row.bob(y), j});
  }
  return runs;
}

std::size_t CellTally::min_count() const { return *std::min_element(count.begin(), count.end()); }

double CellTally::chsh() const {
  std::array<double, 4> c{};
  for (std::size_t k = 0; k < 4; ++k) c[k] = static_cast<double>(sum[k]) / static_cast<double>(count[k]);
  return chsh_combination(c);
}

ChshSummary observed_correlations(std::span<const ObservedRun> runs) {
  CellTally tally;
  for (const auto& r : runs) tally.add(r.x, r.y, r.a_out * r.b_out);
  if (!tally.complete()) throw Error("undefined correlation: a setting cell has no runs");

  ChshSummary out;
  double var = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    out.counts[k] = tally.count[k];
    out.corr[k] = static_cast<double>(tally.sum[k]) / static_cast<double>(tally.count[k]);
    var += (1.0 - out.corr[k] * out.corr[k]) / static_cast<double>(tally.count[k]);
  }
  out.s = chsh_combination(out.corr);
  out.se = std::sqrt(var);
  out.n_total = runs.size();
  return out;
}

namespace {

// s > 2 decided exactly: multiply through by the product of the counts.
bool exceeds_two(const CellTally& t) {
  if (!t.complete()) return false;
  __int128 l = 1;
  for (auto c : t.count) l *= static_cast<__int128>(c);
  __int128 num = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    const __int128 term = static_cast<__int128>(t.sum[k]) * (l / static_cast<__int128>(t.count[k]));
    num += k == 3 ? -term : term;
  }
  return num > 2 * l;
}

// Products of the four cells for each row, indexed by cell.
std::vector<std::array<int, 4>> row_products(const CounterfactualTable& table) {
  std::vector<std::array<int, 4>> out;
  out.reserve(table.size());
  for (const auto& r : table.rows) {
    out.push_back({r.a * r.b, r.a * r.b_prime, r.a_prime * r.b, r.a_prime * r.b_prime});
  }
  return out;
}

std::uint64_t count_exhaustive(const std::vector<std::array<int, 4>>& products, std::size_t j, CellTally& t) {
  if (j == products.size()) return exceeds_two(t) ? 1 : 0;
  std::uint64_t wins = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    t.sum[k] += products[j][k];
    ++t.count[k];
    wins += count_exhaustive(products, j + 1, t);
    t.sum[k] -= products[j][k];
    --t.count[k];
  }
  return wins;
}

}  // namespace

double conjecture1_estimate(const CounterfactualTable& table, std::uint64_t trials, RngSeed seed,
                            EstimateMode mode, std::uint64_t exhaustive_cap) {
  if (table.empty()) throw Error("empty table");
  const auto products = row_products(table);

  if (mode == EstimateMode::exhaustive) {
    const std::size_t n = table.size();
    if (2 * n >= 64 || (std::uint64_t{1} << (2 * n)) > exhaustive_cap) {
      throw Error("exhaustive enumeration of 4^" + std::to_string(n) + " assignments exceeds cap " +
                  std::to_string(exhaustive_cap));
    }
    CellTally t;
    const std::uint64_t wins = count_exhaustive(products, 0, t);
    return static_cast<double>(wins) / static_cast<double>(std::uint64_t{1} << (2 * n));
  }

  if (trials == 0) throw Error("monte carlo estimate needs trials >= 1");
  Rng rng(seed);
  std::uint64_t wins = 0;
  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    CellTally t;
    std::uint64_t bits = 0;
    int left = 0;
    for (const auto& p : products) {
      if (left == 0) {
        bits = rng.next_u64();
        left = 32;
      }
      const std::size_t k = static_cast<std::size_t>(bits & 3U);
      bits >>= 2;
      --left;
      t.sum[k] += p[k];
      ++t.count[k];
    }
    if (exceeds_two(t)) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(trials);
}

std::string format_table_csv(const CounterfactualTable& table) {
  std::string out = "A,Ap,B,Bp\n";
  out.reserve(out.size() + table.size() * 12);
  for (const auto& r : table.rows) {
    out += std::to_string(r.a.value()) + ',' + std::to_string(r.a_prime.value()) + ',' +
           std::to_string(r.b.value()) + ',' + std::to_string(r.b_prime.value()) + '\n';
  }
  return out;
}

CounterfactualTable parse_table_csv(std::istream& in) {
  CounterfactualTable table;
  csv::read(in, {"A", "Ap", "B", "Bp"}, [&](const std::vector<std::string>& f, std::size_t line) {
    table.rows.push_back({csv::sign_field(f[0], line), csv::sign_field(f[1], line), csv::sign_field(f[2], line),
                          csv::sign_field(f[3], line)});
  });
  return table;
}

std::string format_settings_csv(const SettingsStream& settings) {
  std::string out = "x,y\n";
  for (const auto& p : settings.pairs) {
    out += std::to_string(p.x) + ',' + std::to_string(p.y) + '\n';
  }
  return out;
}

SettingsStream parse_settings_csv(std::istream& in) {
  SettingsStream s;
  csv::read(in, {"x", "y"}, [&](const std::vector<std::string>& f, std::size_t line) {
    s.pairs.push_back(
        {static_cast<std::uint8_t>(csv::bit_field(f[0], line)), static_cast<std::uint8_t>(csv::bit_field(f[1], line))});
  });
  return s;
}

std::string format_runs_csv(std::span<const ObservedRun> runs) {
  std::string out = "x,y,a,b\n";
  for (const auto& r : runs) {
    out += std::to_string(r.x) + ',' + std::to_string(r.y) + ',' + std::to_string(r.a_out.value()) + ',' +
           std::to_string(r.b_out.value()) + '\n';
  }
  return out;
}

std::vector<ObservedRun> parse_runs_csv(std::istream& in) {
  std::vector<ObservedRun> runs;
  csv::read(in, {"x", "y", "a", "b"}, [&](const std::vector<std::string>& f, std::size_t line) {
    runs.push_back({csv::bit_field(f[0], line), csv::bit_field(f[1], line), csv::sign_field(f[2], line),
                    csv::sign_field(f[3], line), runs.size()});
  });
  return runs;
}

}  // namespace bellkit
