#include "bellkit/qrc.hpp"

#include <algorithm>
#include <cstdio>
#include <json.hpp>
#include <sstream>

#include "bellkit/lhv.hpp"

namespace bellkit::qrc {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::spreadsheet: return "spreadsheet";
    case Mode::interactive: return "interactive";
    case Mode::three_node: return "three-node";
  }
  return "?";
}

std::string_view to_string(ProbeStatus s) {
  switch (s) {
    case ProbeStatus::consistent: return "consistent";
    case ProbeStatus::inconsistent: return "inconsistent";
    case ProbeStatus::unsupported: return "unsupported";
    case ProbeStatus::vacuous: return "vacuous";
  }
  return "?";
}

void ChallengeConfig::validate() const {
  if (!(threshold > 2.0 && threshold < bounds::kTsirelson)) throw Error("threshold must lie in (2, 2 sqrt 2)");
  if (n == 0) throw Error("n must be >= 1");
  if (trials == 0) throw Error("trials must be >= 1");
  if (4 * min_cell > n) throw Error("min_cell * 4 must not exceed n");
}

namespace {

Mode mode_from_string(std::string_view s) {
  if (s == "spreadsheet") return Mode::spreadsheet;
  if (s == "interactive") return Mode::interactive;
  if (s == "three-node") return Mode::three_node;
  throw Error("unknown mode '" + std::string(s) + "'");
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::array<std::size_t, 4> settings_counts(const std::vector<RunRecord>& runs) {
  std::array<std::size_t, 4> c{};
  for (const auto& r : runs) {
    if (!r.voided) ++c[cell_index(r.x, r.y)];
  }
  return c;
}

std::size_t min_of(const std::array<std::size_t, 4>& c) { return *std::min_element(c.begin(), c.end()); }

json parse_message(const std::string& line, const std::string& where) {
  try {
    auto j = json::parse(line);
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
      throw ProtocolViolation(where + ": message without a string \"type\" field");
    }
    return j;
  } catch (const json::parse_error&) {
    throw ProtocolViolation(where + ": malformed JSON '" + line.substr(0, 80) + "'");
  }
}

std::string read_required(io::LineChannel& ch, std::chrono::milliseconds timeout, const std::string& where) {
  std::optional<std::string> line;
  try {
    line = ch.read_line(timeout);
  } catch (const io::Timeout&) {
    throw ChallengerFailure(where + ": timeout");
  } catch (const io::LineTooLong& e) {
    throw ProtocolViolation(where + ": " + e.what());
  }
  if (!line) throw ChallengerFailure(where + ": challenger disconnected");
  return *line;
}

void send(io::LineChannel& ch, const ordered_json& msg, const std::string& where) {
  try {
    ch.write_line(msg.dump());
  } catch (const io::ChannelClosed&) {
    throw ChallengerFailure(where + ": challenger disconnected");
  }
}

int outcome_field(const json& msg, const char* key, bool allow_zero, const std::string& where) {
  if (!msg.contains(key) || !msg[key].is_number_integer()) {
    throw ProtocolViolation(where + ": field '" + key + "' missing or not an integer");
  }
  const int v = msg[key].get<int>();
  if (v == 1 || v == -1 || (allow_zero && v == 0)) return v;
  throw ProtocolViolation(where + ": field '" + key + "' has illegal value " + std::to_string(v));
}

// Draws settings until each cell has min_cell runs or the redraw budget is spent.
SettingsStream referee_settings(const ChallengeConfig& config, RngSeed base, SessionTranscript& t) {
  SettingsStream settings;
  for (std::size_t k = 0;; ++k) {
    settings = sample_settings(config.n, derive_seed(base, k));
    std::array<std::size_t, 4> c{};
    for (const auto& p : settings.pairs) ++c[cell_index(p.x, p.y)];
    t.settings_redraws = k;
    if (min_of(c) >= config.min_cell) break;
    if (k == config.max_settings_redraws) {
      t.anomalies.push_back("min_cell " + std::to_string(config.min_cell) + " not reached after " +
                            std::to_string(k) + " redraws");
      break;
    }
    t.anomalies.push_back("settings draw " + std::to_string(k) + " left a cell with " + std::to_string(min_of(c)) +
                          " runs; redrawn");
  }
  return settings;
}

void finish(SessionTranscript& t) {
  const auto sc = score_runs(t.runs, t.config);
  t.summary = sc.summary;
  t.loophole_report = sc.loophole_report;
  t.win = sc.win;
  if (!sc.summary) t.anomalies.push_back("a setting cell has no usable runs; correlation undefined");
}

SessionTranscript new_transcript(Mode mode, const ChallengeConfig& config, std::string identity, RngSeed seed) {
  SessionTranscript t;
  t.mode = mode;
  t.config = config;
  t.challenger = std::move(identity);
  t.session_seed = seed.value;
  t.challenger_seed = derive_seed(seed, 0).value;
  t.settings_seed = derive_seed(seed, 1).value;
  return t;
}

}  // namespace

Score score_runs(const std::vector<RunRecord>& runs, const ChallengeConfig& config) {
  Score sc;
  sc.min_cell_met = min_of(settings_counts(runs)) >= config.min_cell;

  if (config.loophole) {
    std::vector<lhv::TernaryRun> ternary;
    for (const auto& r : runs) {
      if (!r.voided) ternary.push_back({r.x, r.y, static_cast<lhv::Ternary>(r.a), static_cast<lhv::Ternary>(r.b)});
    }
    const auto pairing = events::pairing_from_runs(ternary);
    CellTally tally;
    for (const auto& p : pairing.pairs) tally.add(p.x, p.y, p.a_out * p.b_out);
    if (!tally.complete()) return sc;
    sc.loophole_report = events::analyze(pairing);
    sc.summary = sc.loophole_report->summary;
    sc.win = sc.min_cell_met && sc.summary->s > config.threshold && sc.loophole_report->detection_adjusted.violated;
    return sc;
  }

  std::vector<ObservedRun> observed;
  observed.reserve(runs.size());
  for (std::size_t j = 0; j < runs.size(); ++j) {
    const auto& r = runs[j];
    if (r.voided) continue;
    observed.push_back({r.x, r.y, Sign(r.a), Sign(r.b), j});
  }
  CellTally tally;
  for (const auto& o : observed) tally.add(o.x, o.y, o.a_out * o.b_out);
  if (!tally.complete()) return sc;
  sc.summary = observed_correlations(observed);
  sc.win = sc.min_cell_met && sc.summary->s > config.threshold;
  return sc;
}

Score rescore(const SessionTranscript& t) { return score_runs(t.runs, t.config); }

Verdict make_verdict(const std::vector<SessionTranscript>& sessions, const ChallengeConfig& config) {
  Verdict v;
  v.sessions_total = sessions.size();
  v.sessions_won = static_cast<std::size_t>(std::count_if(sessions.begin(), sessions.end(),
                                                          [](const SessionTranscript& s) { return s.win; }));
  v.pass = 2 * v.sessions_won > v.sessions_total;
  v.bound = bounds::theorem1_bound(config.n, config.threshold - 2.0);
  v.bound_note = "single-session tail 8 exp(-n (eta/16)^2) at eta = threshold - 2";
  if (config.mode != Mode::spreadsheet) {
    v.bound_note += "; conservative, martingale-based constants not re-derived for challengers with memory";
  }
  return v;
}

std::string commitment(int x, int y, std::string_view nonce) {
  std::string s = std::to_string(x) + "," + std::to_string(y) + ",";
  s.append(nonce);
  return io::sha256_hex(s);
}

bool audit_commitments(const SessionTranscript& t) {
  return std::all_of(t.runs.begin(), t.runs.end(),
                     [](const RunRecord& r) { return r.hash.empty() || commitment(r.x, r.y, r.nonce) == r.hash; });
}

namespace {

ordered_json summary_json(const ChshSummary& s) {
  return ordered_json{{"corr", s.corr}, {"counts", s.counts}, {"s", s.s}, {"se", s.se}, {"n_total", s.n_total}};
}

}  // namespace

std::string transcript_to_json(const SessionTranscript& t) {
  ordered_json j;
  j["type"] = "transcript";
  j["mode"] = to_string(t.mode);
  j["config"] = {{"n", t.config.n},
                 {"trials", t.config.trials},
                 {"threshold", t.config.threshold},
                 {"min_cell", t.config.min_cell},
                 {"loophole", t.config.loophole}};
  j["challenger"] = t.challenger;
  j["session_seed"] = t.session_seed;
  j["challenger_seed"] = t.challenger_seed;
  j["settings_seed"] = t.settings_seed;
  j["settings_redraws"] = t.settings_redraws;
  auto runs = ordered_json::array();
  for (const auto& r : t.runs) {
    ordered_json o{{"x", r.x}, {"y", r.y}};
    o["row"] = r.row ? ordered_json(*r.row) : ordered_json(nullptr);
    o["a"] = r.a;
    o["b"] = r.b;
    if (!r.hash.empty()) {
      o["nonce"] = r.nonce;
      o["hash"] = r.hash;
    }
    if (r.voided) o["voided"] = true;
    runs.push_back(std::move(o));
  }
  j["runs"] = std::move(runs);
  j["summary"] = t.summary ? summary_json(*t.summary) : ordered_json(nullptr);
  if (t.loophole_report) {
    const auto& l = *t.loophole_report;
    j["loophole"] = {{"gamma_hat", l.efficiency.gamma_hat},
                     {"gamma_estimator", l.efficiency.estimator},
                     {"detection_limit", l.detection_adjusted.limit},
                     {"coincidence_limit", l.coincidence_adjusted.limit},
                     {"naive", l.naive.violated ? "violated" : "not violated"},
                     {"detection_adjusted", l.detection_adjusted.violated ? "violated" : "not violated"},
                     {"coincidence_adjusted", l.coincidence_adjusted.violated ? "violated" : "not violated"}};
  }
  j["win"] = t.win;
  j["anomalies"] = t.anomalies;
  return j.dump();
}

SessionTranscript transcript_from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    SessionTranscript t;
    t.mode = mode_from_string(j.at("mode").get<std::string>());
    const auto& c = j.at("config");
    t.config.mode = t.mode;
    t.config.n = c.at("n").get<std::size_t>();
    t.config.trials = c.at("trials").get<std::size_t>();
    t.config.threshold = c.at("threshold").get<double>();
    t.config.min_cell = c.at("min_cell").get<std::size_t>();
    t.config.loophole = c.at("loophole").get<bool>();
    t.challenger = j.at("challenger").get<std::string>();
    t.session_seed = j.at("session_seed").get<std::uint64_t>();
    t.challenger_seed = j.at("challenger_seed").get<std::uint64_t>();
    t.settings_seed = j.at("settings_seed").get<std::uint64_t>();
    t.settings_redraws = j.at("settings_redraws").get<std::size_t>();
    for (const auto& o : j.at("runs")) {
      RunRecord r;
      r.x = o.at("x").get<int>();
      r.y = o.at("y").get<int>();
      if (!o.at("row").is_null()) r.row = o.at("row").get<std::array<int, 4>>();
      r.a = o.at("a").get<int>();
      r.b = o.at("b").get<int>();
      r.nonce = o.value("nonce", "");
      r.hash = o.value("hash", "");
      r.voided = o.value("voided", false);
      t.runs.push_back(std::move(r));
    }
    if (!j.at("summary").is_null()) {
      const auto& s = j.at("summary");
      ChshSummary sum;
      sum.corr = s.at("corr").get<std::array<double, 4>>();
      sum.counts = s.at("counts").get<std::array<std::size_t, 4>>();
      sum.s = s.at("s").get<double>();
      sum.se = s.at("se").get<double>();
      sum.n_total = s.at("n_total").get<std::size_t>();
      t.summary = sum;
    }
    t.win = j.at("win").get<bool>();
    t.anomalies = j.at("anomalies").get<std::vector<std::string>>();
    return t;
  } catch (const json::exception& e) {
    throw Error(std::string("invalid transcript: ") + e.what());
  }
}

std::string verdict_to_json(const Verdict& v) {
  ordered_json j;
  j["type"] = "verdict";
  j["sessions_won"] = v.sessions_won;
  j["sessions_total"] = v.sessions_total;
  j["pass"] = v.pass;
  j["bound"] = {{"method", bounds::to_string(v.bound.method)},
                {"n", v.bound.n},
                {"eta", v.bound.eta},
                {"probability", v.bound.probability},
                {"raw", v.bound.raw}};
  j["bound_note"] = v.bound_note;
  return j.dump();
}

// ---------------------------------------------------------------------------

std::string ProcessSpreadsheetChallenger::identity() const {
  if (!label_.empty()) return label_;
  std::string s;
  for (const auto& a : argv_) s += (s.empty() ? "" : " ") + a;
  return s;
}

std::string ProcessSpreadsheetChallenger::produce(std::uint64_t seed, std::size_t n,
                                                  std::chrono::milliseconds timeout) {
  auto argv = argv_;
  argv.insert(argv.end(), {"--seed", std::to_string(seed), "--n", std::to_string(n)});
  // Rows are at most "-1,-1,-1,-1\r\n"; anything far beyond that is not a table.
  const auto r = io::run_capture(argv, timeout, 1024 + 32 * (n + 1));
  if (r.overflow) throw ProtocolViolation("malformed table: output exceeds the size of " + std::to_string(n) + " rows");
  if (r.timed_out) throw ChallengerFailure("challenger timed out after " + std::to_string(timeout.count()) + " ms");
  if (r.exit_code != 0) throw ChallengerFailure("challenger exited with status " + std::to_string(r.exit_code));
  return r.out;
}

CounterfactualTable parse_challenger_table(const std::string& csv, std::size_t expected_rows) {
  CounterfactualTable table;
  try {
    std::istringstream in(csv);
    table = parse_table_csv(in);
  } catch (const Error& e) {
    throw ProtocolViolation(std::string("malformed table: ") + e.what());
  }
  if (table.size() != expected_rows) {
    throw ProtocolViolation("wrong row count: expected " + std::to_string(expected_rows) + ", got " +
                            std::to_string(table.size()));
  }
  return table;
}

SessionTranscript run_spreadsheet_session(SpreadsheetChallenger& challenger, const ChallengeConfig& config,
                                          RngSeed seed) {
  config.validate();
  auto t = new_transcript(Mode::spreadsheet, config, challenger.identity(), seed);
  t.config.mode = Mode::spreadsheet;
  const auto csv = challenger.produce(t.challenger_seed, config.n, config.challenger_timeout);
  const auto table = parse_challenger_table(csv, config.n);

  // Settings are only drawn once the table is in hand.
  const auto settings = referee_settings(config, RngSeed{t.settings_seed}, t);
  t.runs.reserve(config.n);
  for (std::size_t j = 0; j < config.n; ++j) {
    const auto [x, y] = settings.pairs[j];
    const auto& row = table.rows[j];
    RunRecord r;
    r.x = x;
    r.y = y;
    r.row = std::array<int, 4>{row.a.value(), row.a_prime.value(), row.b.value(), row.b_prime.value()};
    r.a = row.alice(x).value();
    r.b = row.bob(y).value();
    t.runs.push_back(std::move(r));
  }
  finish(t);
  return t;
}

VerdictRun run_spreadsheet_verdict(SpreadsheetChallenger& challenger, const ChallengeConfig& config, RngSeed seed) {
  VerdictRun out;
  for (std::size_t i = 0; i < config.trials; ++i) {
    out.sessions.push_back(run_spreadsheet_session(challenger, config, derive_seed(seed, i)));
  }
  out.verdict = make_verdict(out.sessions, config);
  return out;
}

SessionTranscript run_harness_quantum_session(const quantum::AngleSet& angles, const ChallengeConfig& config,
                                              RngSeed seed) {
  config.validate();
  auto t = new_transcript(Mode::spreadsheet, config, "harness:quantum-simulator", seed);
  t.anomalies.push_back("non-compliant harness mode: challenger reads the referee's settings");
  const auto settings = referee_settings(config, RngSeed{t.settings_seed}, t);
  Rng rng(RngSeed{t.challenger_seed});
  for (const auto [x, y] : settings.pairs) {
    const auto [a, b] = quantum::sample_run(angles, x, y, rng);
    RunRecord r;
    r.x = x;
    r.y = y;
    r.a = a.value();
    r.b = b.value();
    t.runs.push_back(std::move(r));
  }
  finish(t);
  return t;
}

VerdictRun run_harness_quantum_verdict(const quantum::AngleSet& angles, const ChallengeConfig& config, RngSeed seed) {
  VerdictRun out;
  for (std::size_t i = 0; i < config.trials; ++i) {
    out.sessions.push_back(run_harness_quantum_session(angles, config, derive_seed(seed, i)));
  }
  out.verdict = make_verdict(out.sessions, config);
  return out;
}

DeterminismReport verify_determinism(SpreadsheetChallenger& challenger, std::uint64_t seed, std::size_t n,
                                     std::chrono::milliseconds timeout) {
  DeterminismReport r;
  const auto first = challenger.produce(seed, n, timeout);
  const auto second = challenger.produce(seed, n, timeout);
  r.deterministic = first == second;
  if (!r.deterministic) r.notes.push_back("two runs with the same seed produced different output");
  const auto other = challenger.produce(mix64(seed), n, timeout);
  r.seed_sensitive = other != first;
  if (!r.seed_sensitive) r.notes.push_back("output does not depend on the seed argument");
  return r;
}

// ---------------------------------------------------------------------------

std::string ProcessProbeTarget::identity() const {
  if (!label_.empty()) return label_;
  std::string s;
  for (const auto& a : argv_) s += (s.empty() ? "" : " ") + a;
  return s;
}

std::optional<std::pair<int, int>> ProcessProbeTarget::single_run(std::uint64_t seed, int x, int y) {
  auto argv = argv_;
  argv.insert(argv.end(), {"--seed", std::to_string(seed), "--x", std::to_string(x), "--y", std::to_string(y)});
  const auto r = io::run_capture(argv, timeout_);
  if (r.timed_out) throw ChallengerFailure("probe timed out");
  if (r.exit_code != 0) return std::nullopt;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  int a = 0;
  int b = 0;
  char comma = 0;
  std::istringstream ls(line);
  if (!(ls >> a >> comma >> b) || comma != ',' || (a != 1 && a != -1) || (b != 1 && b != -1)) {
    throw ProtocolViolation("probe output must be 'a,b' with values +-1, got '" + line + "'");
  }
  return std::pair{a, b};
}

std::optional<std::pair<int, int>> ChannelProbeTarget::single_run(std::uint64_t seed, int x, int y) {
  const std::string where = "probe";
  send(channel_, ordered_json{{"type", "probe"}, {"seed", seed}, {"x", x}, {"y", y}}, where);
  const auto msg = parse_message(read_required(channel_, timeout_, where), where);
  if (msg["type"] == "unsupported") return std::nullopt;
  if (msg["type"] != "outcome") throw ProtocolViolation("probe: expected outcome message");
  return std::pair{outcome_field(msg, "a", false, where), outcome_field(msg, "b", false, where)};
}

ProbeReport consistency_probe(ProbeTarget& target, RngSeed seed, std::size_t rounds) {
  ProbeReport rep;
  for (std::size_t r = 0; r < rounds; ++r) {
    const auto s = derive_seed(seed, r).value;
    std::array<std::array<std::pair<int, int>, 2>, 2> out{};
    for (int x = 0; x < 2; ++x) {
      for (int y = 0; y < 2; ++y) {
        const auto o = target.single_run(s, x, y);
        if (!o) {
          rep.status = ProbeStatus::unsupported;
          rep.detail = "challenger refused single-run replay";
          return rep;
        }
        out[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)] = *o;
      }
    }
    ++rep.rounds;
    for (int k = 0; k < 2; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      if (out[kk][0].first != out[kk][1].first) {
        rep.status = ProbeStatus::inconsistent;
        rep.detail = "round " + std::to_string(r) + ": Alice's outcome at x=" + std::to_string(k) +
                     " changes with Bob's setting";
        return rep;
      }
      if (out[0][kk].second != out[1][kk].second) {
        rep.status = ProbeStatus::inconsistent;
        rep.detail = "round " + std::to_string(r) + ": Bob's outcome at y=" + std::to_string(k) +
                     " changes with Alice's setting";
        return rep;
      }
    }
  }
  rep.status = ProbeStatus::consistent;
  rep.detail = std::to_string(rep.rounds) + " rounds replayed under all four setting pairs";
  return rep;
}

ProbeReport consistency_probe(SpreadsheetChallenger& challenger, RngSeed seed, std::chrono::milliseconds timeout) {
  parse_challenger_table(challenger.produce(seed.value, 1, timeout), 1);
  ProbeReport rep;
  rep.status = ProbeStatus::vacuous;
  rep.rounds = 1;
  rep.detail = "spreadsheet output fixes every counterfactual value before settings exist";
  return rep;
}

// ---------------------------------------------------------------------------

SessionTranscript run_interactive_session(io::LineChannel& channel, const ChallengeConfig& config, RngSeed seed,
                                          std::string identity, std::uint64_t session_id) {
  if (config.n == 0) throw Error("n must be >= 1");
  auto t = new_transcript(Mode::interactive, config, std::move(identity), seed);
  t.config.mode = Mode::interactive;
  Rng rng(RngSeed{t.settings_seed});

  ordered_json hello{{"type", "hello"}, {"n", config.n}, {"session", session_id}};
  if (config.loophole) hello["loophole"] = true;
  send(channel, hello, "hello");

  t.runs.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    const std::string where = "round " + std::to_string(i);
    const auto w = rng.next_u64();
    RunRecord r;
    r.x = static_cast<int>(w >> 63);
    r.y = static_cast<int>((w >> 62) & 1U);
    r.nonce = hex64(rng.next_u64()) + hex64(rng.next_u64());
    r.hash = commitment(r.x, r.y, r.nonce);
    send(channel, ordered_json{{"type", "commit"}, {"hash", r.hash}}, where);

    const auto msg = parse_message(read_required(channel, config.round_timeout, where), where);
    if (msg["type"] != "row") {
      throw ProtocolViolation(where + ": expected a row, got '" + msg["type"].get<std::string>() + "'");
    }
    const std::array<int, 4> row{outcome_field(msg, "a", config.loophole, where),
                                 outcome_field(msg, "ap", config.loophole, where),
                                 outcome_field(msg, "b", config.loophole, where),
                                 outcome_field(msg, "bp", config.loophole, where)};
    r.row = row;
    r.a = row[static_cast<std::size_t>(r.x)];
    r.b = row[static_cast<std::size_t>(2 + r.y)];
    send(channel, ordered_json{{"type", "reveal"}, {"x", r.x}, {"y", r.y}, {"nonce", r.nonce}}, where);
    t.runs.push_back(std::move(r));
  }
  finish(t);
  ordered_json result{{"type", "result"}, {"s", t.summary ? t.summary->s : 0.0}, {"win", t.win}};
  send(channel, result, "result");
  return t;
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kMaxStrayMessages = 64;

int read_station_outcome(io::LineChannel& station, const char* name, const ChallengeConfig& config,
                         const std::string& where, RunRecord& r, SessionTranscript& t) {
  for (int stray = 0;; ++stray) {
    if (stray > kMaxStrayMessages) throw ProtocolViolation(where + ": station " + name + " flooded the mediator");
    const auto line = read_required(station, config.round_timeout, where + " station " + name);
    json msg;
    try {
      msg = json::parse(line);
    } catch (const json::parse_error&) {
      msg = nullptr;
    }
    if (msg.is_object() && msg.value("type", "") == "outcome") {
      return outcome_field(msg, "value", false, where + " station " + name);
    }
    const std::string kind = msg.is_object() ? msg.value("type", "?") : "unparseable";
    t.anomalies.push_back(where + ": station " + name + " sent '" + kind + "' message; not routed, round voided");
    r.voided = true;
  }
}

}  // namespace

SessionTranscript run_three_node_challenge(io::LineChannel& source, io::LineChannel& alice, io::LineChannel& bob,
                                           const ChallengeConfig& config, RngSeed seed) {
  if (config.n == 0) throw Error("n must be >= 1");
  auto t = new_transcript(Mode::three_node, config, "three-node", seed);
  t.config.mode = Mode::three_node;
  Rng rng(RngSeed{t.settings_seed});
  t.runs.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    const std::string where = "round " + std::to_string(i);
    send(source, ordered_json{{"type", "emit"}}, where + " source");
    const auto emit = parse_message(read_required(source, config.round_timeout, where + " source"), where + " source");
    if (emit["type"] != "emit" || !emit.contains("a") || !emit.contains("b")) {
      throw ProtocolViolation(where + ": source must answer with {\"type\":\"emit\",\"a\":...,\"b\":...}");
    }
    send(alice, ordered_json{{"type", "message"}, {"payload", emit["a"]}}, where + " station A");
    send(bob, ordered_json{{"type", "message"}, {"payload", emit["b"]}}, where + " station B");

    // From here on the source is cut off; the only inputs are the settings.
    const auto w = rng.next_u64();
    RunRecord r;
    r.x = static_cast<int>(w >> 63);
    r.y = static_cast<int>((w >> 62) & 1U);
    send(alice, ordered_json{{"type", "setting"}, {"value", r.x}}, where + " station A");
    send(bob, ordered_json{{"type", "setting"}, {"value", r.y}}, where + " station B");
    r.a = read_station_outcome(alice, "A", config, where, r, t);
    r.b = read_station_outcome(bob, "B", config, where, r, t);
    t.runs.push_back(std::move(r));
  }
  finish(t);
  return t;
}

SessionTranscript run_three_node_oracle(const quantum::AngleSet& angles, const ChallengeConfig& config,
                                        RngSeed seed) {
  if (config.n == 0) throw Error("n must be >= 1");
  auto t = new_transcript(Mode::three_node, config, "mediator-test:quantum-oracle", seed);
  t.config.mode = Mode::three_node;
  t.anomalies.push_back("mediator test mode: outcomes drawn by an oracle that sees both settings");
  Rng settings_rng(RngSeed{t.settings_seed});
  Rng oracle_rng(RngSeed{t.challenger_seed});
  for (std::size_t i = 0; i < config.n; ++i) {
    const auto w = settings_rng.next_u64();
    RunRecord r;
    r.x = static_cast<int>(w >> 63);
    r.y = static_cast<int>((w >> 62) & 1U);
    const auto [a, b] = quantum::sample_run(angles, r.x, r.y, oracle_rng);
    r.a = a.value();
    r.b = b.value();
    t.runs.push_back(std::move(r));
  }
  finish(t);
  return t;
}

}  // namespace bellkit::qrc
