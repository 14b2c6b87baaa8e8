#include "bellkit/events.hpp"

#include <algorithm>
#include <deque>
#include <istream>
#include <json.hpp>

namespace bellkit::events {

using ordered_json = nlohmann::ordered_json;

ParseError::ParseError(std::size_t line, std::size_t column, const std::string& what)
    : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

namespace {

std::size_t column_of(const std::string& line, const std::string& key) {
  const auto pos = line.find("\"" + key + "\"");
  return pos == std::string::npos ? 1 : pos + 1;
}

TimedEvent parse_record(const std::string& line, std::size_t lineno) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(lineno, std::max<std::size_t>(e.byte, 1), "malformed JSON");
  }
  if (!j.is_object()) throw ParseError(lineno, 1, "record must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "t_ns" && key != "wing" && key != "setting" && key != "outcome") {
      throw ParseError(lineno, column_of(line, key), "unknown field '" + key + "'");
    }
  }
  const auto require = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key)) throw ParseError(lineno, 1, std::string("missing field '") + key + "'");
    return j.at(key);
  };

  TimedEvent e;
  const auto& t = require("t_ns");
  if (!t.is_number_integer() || (t.is_number_unsigned() ? false : t.get<std::int64_t>() < 0)) {
    throw ParseError(lineno, column_of(line, "t_ns"), "t_ns must be a nonnegative integer");
  }
  e.t_ns = t.get<std::int64_t>();

  const auto& w = require("wing");
  if (!w.is_string() || (w != "A" && w != "B")) {
    throw ParseError(lineno, column_of(line, "wing"), "wing must be \"A\" or \"B\"");
  }
  e.wing = w == "A" ? Wing::A : Wing::B;

  const auto& s = require("setting");
  if (!s.is_number_integer() || (s != 0 && s != 1)) {
    throw ParseError(lineno, column_of(line, "setting"), "setting must be 0 or 1");
  }
  e.setting = s.get<int>();

  const auto& o = require("outcome");
  if (!o.is_number_integer() || (o != 1 && o != -1)) {
    throw ParseError(lineno, column_of(line, "outcome"), "outcome must be 1 or -1");
  }
  e.outcome = Sign(o.get<int>());
  return e;
}

int wing_index(Wing w) { return w == Wing::A ? 0 : 1; }

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

void add_single(PairingResult& r, const TimedEvent& e) {
  if (e.wing == Wing::A) {
    ++r.singles_a[static_cast<std::size_t>(e.setting)];
  } else {
    ++r.singles_b[static_cast<std::size_t>(e.setting)];
  }
}

void add_pair(PairingResult& r, const TimedEvent& p, const TimedEvent& q) {
  const auto& a = p.wing == Wing::A ? p : q;
  const auto& b = p.wing == Wing::A ? q : p;
  r.pairs.push_back({a.setting, b.setting, a.outcome, b.outcome, a.t_ns, b.t_ns});
}

void check_window(std::int64_t w_ns) {
  if (w_ns <= 0) throw Error("window must be > 0 ns");
}

}  // namespace

EventStream parse_event_stream(std::istream& in, UnsortedPolicy policy) {
  EventStream out;
  std::string line;
  std::size_t lineno = 0;
  std::array<std::int64_t, 2> last{-1, -1};
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto e = parse_record(line, lineno);
    auto& prev = last[static_cast<std::size_t>(wing_index(e.wing))];
    if (e.t_ns < prev && policy == UnsortedPolicy::reject) {
      throw ParseError(lineno, column_of(line, "t_ns"), "timestamps must be nondecreasing within a wing");
    }
    prev = std::max(prev, e.t_ns);
    out.events.push_back(e);
  }
  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const TimedEvent& l, const TimedEvent& r) { return l.t_ns < r.t_ns; });
  return out;
}

std::string format_event_stream(const EventStream& stream) {
  std::string out;
  for (const auto& e : stream.events) {
    out += "{\"t_ns\":" + std::to_string(e.t_ns) + ",\"wing\":\"" + (e.wing == Wing::A ? "A" : "B") +
           "\",\"setting\":" + std::to_string(e.setting) + ",\"outcome\":" + std::to_string(e.outcome.value()) + "}\n";
  }
  return out;
}

std::string_view to_string(PairingMethod m) { return m == PairingMethod::window ? "window" : "lattice"; }

std::vector<ObservedRun> PairingResult::observed() const {
  std::vector<ObservedRun> out;
  out.reserve(pairs.size());
  for (std::size_t j = 0; j < pairs.size(); ++j) out.push_back({pairs[j].x, pairs[j].y, pairs[j].a_out, pairs[j].b_out, j});
  return out;
}

PairingResult pair_by_window(const EventStream& stream, std::int64_t w_ns) {
  check_window(w_ns);
  PairingResult r;
  r.method = PairingMethod::window;
  r.window_ns = w_ns;
  // At most one of the two queues is nonempty at any time.
  std::array<std::deque<const TimedEvent*>, 2> pending;
  for (const auto& e : stream.events) {
    const int own = wing_index(e.wing);
    auto& opp = pending[static_cast<std::size_t>(1 - own)];
    while (!opp.empty() && e.t_ns - opp.front()->t_ns > w_ns) {
      add_single(r, *opp.front());
      opp.pop_front();
    }
    if (!opp.empty()) {
      add_pair(r, *opp.front(), e);
      opp.pop_front();
    } else {
      pending[static_cast<std::size_t>(own)].push_back(&e);
    }
  }
  for (const auto& q : pending) {
    for (const auto* e : q) add_single(r, *e);
  }
  return r;
}

PairingResult pair_by_lattice(const EventStream& stream, std::int64_t w_ns, std::int64_t origin_ns) {
  check_window(w_ns);
  PairingResult r;
  r.method = PairingMethod::lattice;
  r.window_ns = w_ns;
  r.lattice_origin_ns = origin_ns;
  const auto& ev = stream.events;
  std::size_t i = 0;
  while (i < ev.size()) {
    const auto k = floor_div(ev[i].t_ns - origin_ns, w_ns);
    std::size_t j = i;
    std::vector<const TimedEvent*> in_a, in_b;
    while (j < ev.size() && floor_div(ev[j].t_ns - origin_ns, w_ns) == k) {
      (ev[j].wing == Wing::A ? in_a : in_b).push_back(&ev[j]);
      ++j;
    }
    if (in_a.size() == 1 && in_b.size() == 1) {
      add_pair(r, *in_a[0], *in_b[0]);
    } else {
      for (const auto* e : in_a) add_single(r, *e);
      for (const auto* e : in_b) add_single(r, *e);
    }
    i = j;
  }
  return r;
}

PairingResult pairing_from_runs(const std::vector<lhv::TernaryRun>& runs) {
  PairingResult r;
  r.method = PairingMethod::lattice;
  r.window_ns = 1;
  for (std::size_t j = 0; j < runs.size(); ++j) {
    const auto& run = runs[j];
    const auto t = static_cast<std::int64_t>(j);
    if (lhv::detected(run.a) && lhv::detected(run.b)) {
      r.pairs.push_back({run.x, run.y, lhv::to_sign(run.a), lhv::to_sign(run.b), t, t});
    } else if (lhv::detected(run.a)) {
      ++r.singles_a[static_cast<std::size_t>(run.x)];
    } else if (lhv::detected(run.b)) {
      ++r.singles_b[static_cast<std::size_t>(run.y)];
    }
  }
  return r;
}

EfficiencyEstimate estimate_gamma(const PairingResult& result) {
  std::array<double, 4> pairs{};
  for (const auto& p : result.pairs) pairs[cell_index(p.x, p.y)] += 1.0;
  EfficiencyEstimate est;
  est.gamma_hat = 1.0;
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      const auto c = cell_index(x, y);
      if (pairs[c] == 0.0) {
        throw Error("empty cell: no pairs at settings (" + std::to_string(x) + "," + std::to_string(y) + ")");
      }
      const double a_given_b = pairs[c] / (pairs[c] + 0.5 * static_cast<double>(result.singles_b[static_cast<std::size_t>(y)]));
      const double b_given_a = pairs[c] / (pairs[c] + 0.5 * static_cast<double>(result.singles_a[static_cast<std::size_t>(x)]));
      est.rates[0][c] = a_given_b;
      est.rates[1][c] = b_given_a;
      est.gamma_hat = std::min({est.gamma_hat, a_given_b, b_given_a});
    }
  }
  return est;
}

AnalysisReport verdicts(const ChshSummary& summary, const EfficiencyEstimate& efficiency) {
  AnalysisReport r;
  r.summary = summary;
  r.efficiency = efficiency;
  const auto line = [&](double limit) { return VerdictLine{limit, summary.s > limit}; };
  r.naive = line(2.0);
  r.detection_adjusted = line(bounds::larsson_detection_bound(efficiency.gamma_hat).limit);
  r.coincidence_adjusted = line(bounds::larsson_coincidence_bound(efficiency.gamma_hat).limit);
  return r;
}

AnalysisReport analyze(const PairingResult& result) {
  const auto runs = result.observed();
  const auto summary = observed_correlations(runs);
  return verdicts(summary, estimate_gamma(result));
}

std::string format_verdict_json(const AnalysisReport& report, const PairingResult& result) {
  const auto verdict = [](const VerdictLine& v) {
    return ordered_json{{"limit", v.limit}, {"verdict", v.violated ? "violated" : "not violated"}};
  };
  ordered_json j;
  j["type"] = "verdict";
  j["method"] = to_string(result.method);
  j["window_ns"] = result.window_ns;
  if (result.method == PairingMethod::lattice) j["lattice_origin_ns"] = result.lattice_origin_ns;
  j["pairs"] = result.pairs.size();
  j["singles_a"] = result.singles_a;
  j["singles_b"] = result.singles_b;
  j["corr"] = report.summary.corr;
  j["counts"] = report.summary.counts;
  j["s"] = report.summary.s;
  j["se"] = report.summary.se;
  j["gamma_hat"] = report.efficiency.gamma_hat;
  j["gamma_estimator"] = report.efficiency.estimator;
  j["naive"] = verdict(report.naive);
  j["detection_adjusted"] = verdict(report.detection_adjusted);
  j["coincidence_adjusted"] = verdict(report.coincidence_adjusted);
  return j.dump();
}

EventStream stream_from_runs(const std::vector<lhv::TernaryRun>& runs, std::int64_t period_ns,
                             std::int64_t jitter_ns, RngSeed seed) {
  if (period_ns <= 0 || jitter_ns < 0 || jitter_ns >= period_ns) {
    throw Error("stream_from_runs: need 0 <= jitter < period");
  }
  Rng rng(seed);
  EventStream s;
  for (std::size_t j = 0; j < runs.size(); ++j) {
    const auto base = static_cast<std::int64_t>(j) * period_ns;
    const auto ja = static_cast<std::int64_t>(rng.uniform() * static_cast<double>(jitter_ns));
    const auto jb = static_cast<std::int64_t>(rng.uniform() * static_cast<double>(jitter_ns));
    const auto& r = runs[j];
    std::vector<TimedEvent> emitted;
    if (lhv::detected(r.a)) emitted.push_back({base + ja, Wing::A, r.x, lhv::to_sign(r.a)});
    if (lhv::detected(r.b)) emitted.push_back({base + jb, Wing::B, r.y, lhv::to_sign(r.b)});
    std::stable_sort(emitted.begin(), emitted.end(),
                     [](const TimedEvent& l, const TimedEvent& rr) { return l.t_ns < rr.t_ns; });
    s.events.insert(s.events.end(), emitted.begin(), emitted.end());
  }
  return s;
}

EventStream stream_from_runs(const std::vector<ObservedRun>& runs, std::int64_t period_ns, std::int64_t jitter_ns,
                             RngSeed seed) {
  std::vector<lhv::TernaryRun> t;
  t.reserve(runs.size());
  for (const auto& r : runs) t.push_back({r.x, r.y, lhv::to_ternary(r.a_out), lhv::to_ternary(r.b_out)});
  return stream_from_runs(t, period_ns, jitter_ns, seed);
}

}  // namespace bellkit::events
