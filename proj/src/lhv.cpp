#include "bellkit/lhv.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>

#include "bellkit/polytope.hpp"
#include "csv.hpp"

namespace bellkit::lhv {

Behavior DeterministicStrategy::behavior() const {
  Behavior b;
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) b.at(x, y, alice(x).value(), bob(y).value()) = 1.0;
  }
  return b;
}

std::vector<DeterministicStrategy> enumerate_deterministic() {
  std::vector<DeterministicStrategy> out;
  out.reserve(16);
  const auto s = [](unsigned bit) { return bit ? Sign::plus() : Sign::minus(); };
  for (unsigned k = 0; k < 16; ++k) {
    out.push_back({s((k >> 3) & 1U), s((k >> 2) & 1U), s((k >> 1) & 1U), s(k & 1U)});
  }
  return out;
}

LhvModel::LhvModel(Kind k, std::vector<DeterministicStrategy> s, std::vector<double> w)
    : kind_(k), strategies_(std::move(s)), weights_(std::move(w)) {
  cumulative_.resize(weights_.size());
  std::partial_sum(weights_.begin(), weights_.end(), cumulative_.begin());
}

LhvModel LhvModel::deterministic(DeterministicStrategy s) { return LhvModel(Kind::deterministic, {s}, {1.0}); }

LhvModel LhvModel::mixture(std::vector<DeterministicStrategy> strategies, std::vector<double> weights) {
  if (strategies.empty() || strategies.size() != weights.size()) {
    throw Error("invalid weights: need one weight per strategy");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error("invalid weights: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error("invalid weights: sum is " + std::to_string(total));
  return LhvModel(Kind::mixture, std::move(strategies), std::move(weights));
}

LhvModel LhvModel::uniform() { return mixture(enumerate_deterministic(), std::vector<double>(16, 1.0 / 16.0)); }

const DeterministicStrategy& LhvModel::sample(Rng& rng) const {
  const double u = rng.uniform() * cumulative_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), strategies_.size() - 1);
  return strategies_[k];
}

Behavior LhvModel::behavior() const {
  Behavior out;
  for (std::size_t k = 0; k < strategies_.size(); ++k) {
    const auto v = strategies_[k].behavior();
    for (std::size_t i = 0; i < 16; ++i) out.p[i] += weights_[k] * v.p[i];
  }
  return out;
}

CounterfactualTable generate_table(const LhvModel& model, std::size_t n, RngSeed seed) {
  if (n == 0) throw Error("generate_table needs n >= 1");
  Rng rng(seed);
  CounterfactualTable t;
  t.rows.reserve(n);
  for (std::size_t j = 0; j < n; ++j) t.rows.push_back(model.sample(rng).row());
  return t;
}

Sign to_sign(Ternary t) {
  if (t == Ternary::none) throw Error("no-detection has no sign");
  return Sign(static_cast<int>(t));
}

void validate_cheater(const CheaterConfig& config) {
  const auto v = polytope::validate(config.target);
  if (!v.positivity || !v.normalization) throw Error("cheater target is not a valid behavior");
  if (!(config.wing_keep > 0.0 && config.wing_keep <= 1.0)) throw Error("wing_keep must lie in (0, 1]");
}

std::pair<Ternary, Ternary> cheater_run(const CheaterConfig& config, int x, int y, Rng& rng) {
  const int desired = std::min(3, static_cast<int>(rng.uniform() * 4.0));
  const int want_x = desired >> 1;
  const int want_y = desired & 1;

  const auto cell = config.target.context(want_x, want_y);
  const double u = rng.uniform();
  int k = 0;
  double acc = cell[0];
  while (k < 3 && u >= acc) acc += cell[++k];
  const Ternary a = (k < 2) ? Ternary::plus : Ternary::minus;
  const Ternary b = (k % 2 == 0) ? Ternary::plus : Ternary::minus;

  const bool keep_a = rng.uniform() < config.wing_keep;
  const bool keep_b = rng.uniform() < config.wing_keep;
  return {(x == want_x && keep_a) ? a : Ternary::none, (y == want_y && keep_b) ? b : Ternary::none};
}

LoopholeData simulate_loophole_experiment(const LoopholeSource& source, std::size_t n, RngSeed seed) {
  if (n == 0) throw Error("simulate_loophole_experiment needs n >= 1");
  const auto settings = sample_settings(n, derive_seed(seed, 0));
  Rng rng(derive_seed(seed, 1));
  if (const auto* c = std::get_if<CheaterConfig>(&source)) validate_cheater(*c);

  LoopholeData out;
  out.runs.reserve(n);
  for (const auto [x, y] : settings.pairs) {
    TernaryRun r{x, y, Ternary::none, Ternary::none};
    if (const auto* model = std::get_if<LhvModel>(&source)) {
      const auto& s = model->sample(rng);
      r.a = to_ternary(s.alice(x));
      r.b = to_ternary(s.bob(y));
    } else {
      std::tie(r.a, r.b) = cheater_run(std::get<CheaterConfig>(source), x, y, rng);
    }
    if (detected(r.a) && detected(r.b)) {
      ++out.both;
    } else if (detected(r.a)) {
      ++out.only_a;
    } else if (detected(r.b)) {
      ++out.only_b;
    } else {
      ++out.none;
    }
    out.runs.push_back(r);
  }
  return out;
}

std::vector<ObservedRun> coincidences(const std::vector<TernaryRun>& runs) {
  std::vector<ObservedRun> out;
  for (std::size_t j = 0; j < runs.size(); ++j) {
    const auto& r = runs[j];
    if (detected(r.a) && detected(r.b)) out.push_back({r.x, r.y, to_sign(r.a), to_sign(r.b), j});
  }
  return out;
}

std::string format_ternary_csv(const std::vector<TernaryRun>& runs) {
  std::string out = "x,y,a,b\n";
  for (const auto& r : runs) {
    out += std::to_string(r.x) + ',' + std::to_string(r.y) + ',' + std::to_string(static_cast<int>(r.a)) + ',' +
           std::to_string(static_cast<int>(r.b)) + '\n';
  }
  return out;
}

std::vector<TernaryRun> parse_ternary_csv(std::istream& in) {
  std::vector<TernaryRun> runs;
  const auto ternary = [](const std::string& s, std::size_t line) {
    const auto v = csv::int_field(s, line);
    if (v < -1 || v > 1) csv::fail(line, "expected -1, 0 or 1, got '" + s + "'");
    return static_cast<Ternary>(v);
  };
  csv::read(in, {"x", "y", "a", "b"}, [&](const std::vector<std::string>& f, std::size_t line) {
    runs.push_back({csv::bit_field(f[0], line), csv::bit_field(f[1], line), ternary(f[2], line), ternary(f[3], line)});
  });
  return runs;
}

}  // namespace bellkit::lhv
