#include "bellkit/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <json.hpp>
#include <random>
#include <sstream>
#include <thread>

#include "bellkit/bounds.hpp"
#include "bellkit/challengers.hpp"
#include "bellkit/events.hpp"
#include "bellkit/lhv.hpp"
#include "bellkit/polytope.hpp"
#include "bellkit/qrc.hpp"
#include "bellkit/quantum.hpp"

namespace bellkit::cli {

namespace {

using ordered_json = nlohmann::ordered_json;
using std::chrono::milliseconds;

constexpr std::string_view kVersion = "0.1.0";

class UsageError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Output

// Every report is a sequence of flat-ish records. --json prints them as
// NDJSON; otherwise each record becomes a small "key: value" block.
class Emitter {
 public:
  Emitter(std::ostream& out, bool json) : out_(out), json_(json) {}

  void emit(const ordered_json& rec) {
    if (json_) {
      out_ << rec.dump() << '\n';
      return;
    }
    out_ << rec.value("type", "record") << '\n';
    for (const auto& [k, v] : rec.items()) {
      if (k == "type") continue;
      print(k, v);
    }
  }

  void text(const std::string& s) { out_ << s; }
  bool json() const { return json_; }

 private:
  void print(const std::string& key, const ordered_json& v) {
    if (v.is_object()) {
      for (const auto& [k, sub] : v.items()) print(key + "." + k, sub);
      return;
    }
    out_ << "  " << key << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
  }

  std::ostream& out_;
  bool json_;
};

ordered_json summary_record(const ChshSummary& s, std::string_view label) {
  return ordered_json{{"type", "summary"}, {"of", label},       {"corr", s.corr}, {"counts", s.counts},
                      {"s", s.s},          {"se", s.se},        {"n_total", s.n_total}};
}

ordered_json bound_record(const bounds::BoundReport& b) {
  ordered_json j{{"type", "bound"}, {"method", bounds::to_string(b.method)}, {"n", b.n}, {"eta", b.eta}};
  if (b.method != bounds::BoundMethod::theorem1) j["delta"] = b.delta;
  j["probability"] = b.probability;
  j["raw"] = b.raw;
  return j;
}

ordered_json efficiency_record(const bounds::EfficiencyBound& e) {
  return ordered_json{{"type", "efficiency_bound"},
                      {"loophole", bounds::to_string(e.loophole)},
                      {"gamma", e.gamma},
                      {"delta", e.delta},
                      {"limit", e.limit}};
}

// ---------------------------------------------------------------------------
// Inputs

std::uint64_t resolve_seed(const std::string& text) {
  const auto parse = [](const std::string& s, const char* what) {
    try {
      std::size_t pos = 0;
      const auto v = std::stoull(s, &pos, 0);
      if (pos != s.size()) throw std::invalid_argument(s);
      return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
      throw UsageError(std::string("invalid ") + what + " '" + s + "'");
    }
  };
  if (!text.empty()) return parse(text, "--seed");
  if (const char* env = std::getenv("BELLKIT_SEED"); env != nullptr && *env != '\0') return parse(env, "BELLKIT_SEED");
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) | rd();
}

std::string read_file(const std::string& path) {
  if (path == "-") {
    std::stringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write '" + path + "'");
  f << data;
}

quantum::AngleSet parse_angles(const std::string& text) {
  if (text == "canonical") return quantum::canonical_angles();
  std::array<double, 4> v{};
  std::istringstream in(text);
  std::string field;
  std::size_t k = 0;
  while (std::getline(in, field, ',')) {
    if (k == 4) throw UsageError("--angles takes 'canonical' or four comma-separated radians");
    try {
      v[k++] = std::stod(field);
    } catch (const std::exception&) {
      throw UsageError("bad angle '" + field + "'");
    }
  }
  if (k != 4) throw UsageError("--angles takes 'canonical' or four comma-separated radians");
  return {v[0], v[1], v[2], v[3]};
}

lhv::DeterministicStrategy parse_strategy(const std::string& text) {
  std::array<Sign, 4> s{Sign::plus(), Sign::plus(), Sign::plus(), Sign::plus()};
  std::istringstream in(text);
  std::string field;
  std::size_t k = 0;
  while (std::getline(in, field, ',')) {
    if (k == 4 || (field != "+" && field != "-" && field != "1" && field != "-1")) {
      throw UsageError("--strategy takes four of +,-,1,-1 separated by commas");
    }
    s[k++] = (field == "+" || field == "1") ? Sign::plus() : Sign::minus();
  }
  if (k != 4) throw UsageError("--strategy takes four signs");
  return {s[0], s[1], s[2], s[3]};
}

Behavior read_behavior(const std::string& spec) {
  if (spec == "canonical") return polytope::quantum_behavior(quantum::canonical_angles());
  if (spec == "pr-box") return polytope::pr_box();
  std::istringstream in(read_file(spec));
  return parse_behavior_csv(in);
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string model;
  std::string angles = "canonical";
  std::string strategy;
  bool uniform = false;
  std::string target = "canonical";
  double wing_keep = 1.0;
  std::size_t n = 10000;
  std::string seed;
  std::string runs_out;
  std::string table_out;
  std::string events_out;
  std::int64_t period_ns = 1000;
  std::int64_t jitter_ns = 100;
  bool json = false;
};

void write_events(const SimulateArgs& a, const events::EventStream& s) {
  if (!a.events_out.empty()) write_file(a.events_out, events::format_event_stream(s));
}

void cmd_simulate(const SimulateArgs& a, Emitter& em) {
  const auto seed = resolve_seed(a.seed);
  ordered_json cfg{{"type", "config"}, {"command", "simulate"}, {"version", kVersion}, {"model", a.model},
                   {"n", a.n},         {"seed", seed}};

  if (a.model == "quantum") {
    const auto angles = parse_angles(a.angles);
    cfg["angles"] = {angles.alpha, angles.alpha_prime, angles.beta, angles.beta_prime};
    em.emit(cfg);
    const auto runs = quantum::simulate_experiment(angles, a.n, RngSeed{seed});
    const auto sum = observed_correlations(runs);
    em.emit(summary_record(sum, "all runs"));
    em.emit(bound_record(bounds::theorem1_bound(a.n, std::max(0.0, sum.s - 2.0))));
    if (!a.runs_out.empty()) write_file(a.runs_out, format_runs_csv(runs));
    if (!a.events_out.empty()) {
      write_events(a, events::stream_from_runs(runs, a.period_ns, a.jitter_ns, derive_seed(RngSeed{seed}, 2)));
    }
    return;
  }

  if (a.model == "lhv") {
    auto model = lhv::LhvModel::uniform();
    if (!a.strategy.empty()) {
      if (a.uniform) throw UsageError("--uniform and --strategy are exclusive");
      model = lhv::LhvModel::deterministic(parse_strategy(a.strategy));
      cfg["strategy"] = a.strategy;
    } else {
      cfg["mixture"] = "uniform";
    }
    em.emit(cfg);
    const auto table = lhv::generate_table(model, a.n, derive_seed(RngSeed{seed}, 1));
    const auto settings = sample_settings(a.n, derive_seed(RngSeed{seed}, 0));
    const auto runs = observe(table, settings);
    const auto sum = observed_correlations(runs);
    em.emit(ordered_json{{"type", "table"}, {"rows", table.size()}, {"full_table_chsh", full_table_chsh(table)}});
    em.emit(summary_record(sum, "all runs"));
    em.emit(bound_record(bounds::theorem1_bound(a.n, std::max(0.0, sum.s - 2.0))));
    if (!a.table_out.empty()) write_file(a.table_out, format_table_csv(table));
    if (!a.runs_out.empty()) write_file(a.runs_out, format_runs_csv(runs));
    if (!a.events_out.empty()) {
      write_events(a, events::stream_from_runs(runs, a.period_ns, a.jitter_ns, derive_seed(RngSeed{seed}, 2)));
    }
    return;
  }

  if (a.model == "cheater") {
    lhv::CheaterConfig config{read_behavior(a.target), a.wing_keep};
    lhv::validate_cheater(config);
    cfg["target"] = a.target;
    cfg["wing_keep"] = a.wing_keep;
    em.emit(cfg);
    const auto data = lhv::simulate_loophole_experiment(config, a.n, RngSeed{seed});
    em.emit(ordered_json{{"type", "detections"},
                         {"emitted", data.runs.size()},
                         {"both", data.both},
                         {"only_a", data.only_a},
                         {"only_b", data.only_b},
                         {"none", data.none}});
    const auto pairing = events::pairing_from_runs(data.runs);
    const auto report = events::analyze(pairing);
    em.emit(summary_record(report.summary, "coincidences"));
    const auto verdict = [](const events::VerdictLine& v) {
      return ordered_json{{"limit", v.limit}, {"verdict", v.violated ? "violated" : "not violated"}};
    };
    em.emit(ordered_json{{"type", "loophole"},
                         {"gamma_hat", report.efficiency.gamma_hat},
                         {"gamma_estimator", report.efficiency.estimator},
                         {"naive", verdict(report.naive)},
                         {"detection_adjusted", verdict(report.detection_adjusted)},
                         {"coincidence_adjusted", verdict(report.coincidence_adjusted)}});
    if (!a.runs_out.empty()) write_file(a.runs_out, lhv::format_ternary_csv(data.runs));
    if (!a.events_out.empty()) {
      write_events(a, events::stream_from_runs(data.runs, a.period_ns, a.jitter_ns, derive_seed(RngSeed{seed}, 2)));
    }
    return;
  }
  throw UsageError("--model must be quantum, lhv or cheater");
}

// ---------------------------------------------------------------------------
// bound

struct BoundArgs {
  std::uint64_t n = 0;
  double eta = -1.0;
  double delta = -1.0;
  double alpha = -1.0;
  double gamma = -1.0;
  double t = -1.0;
  std::string loophole = "detection";
  double from = 0.5;
  double to = 1.0;
  double step = 0.01;
  bool json = false;
};

bounds::Loophole parse_loophole(const std::string& s) {
  if (s == "detection") return bounds::Loophole::detection;
  if (s == "coincidence") return bounds::Loophole::coincidence;
  throw UsageError("--loophole must be detection or coincidence");
}

void need(bool ok, const char* what) {
  if (!ok) throw UsageError(what);
}

void cmd_bound(const std::string& which, const BoundArgs& a, Emitter& em) {
  if (which == "theorem1") {
    need(a.n >= 1 && a.eta >= 0, "theorem1 needs --n >= 1 and --eta >= 0");
    em.emit(bound_record(bounds::theorem1_bound(a.n, a.eta)));
  } else if (which == "two-term") {
    need(a.n >= 1 && a.eta >= 0, "two-term needs --n >= 1 and --eta >= 0");
    const double delta = a.delta < 0 ? bounds::canonical_delta(a.eta) : a.delta;
    em.emit(bound_record(bounds::two_term_bound(a.n, a.eta, delta)));
  } else if (which == "two-term-opt") {
    need(a.n >= 1 && a.eta > 0, "two-term-opt needs --n >= 1 and --eta > 0");
    em.emit(bound_record(bounds::two_term_bound_optimized(a.n, a.eta)));
  } else if (which == "min-runs") {
    need(a.eta > 0 && a.alpha > 0 && a.alpha <= 1, "min-runs needs --eta > 0 and --alpha in (0, 1]");
    const auto n = bounds::min_runs_for(a.eta, a.alpha);
    em.emit(ordered_json{{"type", "min_runs"},
                         {"eta", a.eta},
                         {"alpha", a.alpha},
                         {"n", n},
                         {"bound_at_n", bounds::theorem1_bound(n, a.eta).probability}});
  } else if (which == "larsson") {
    need(a.gamma > 0 && a.gamma <= 1, "larsson needs --gamma in (0, 1]");
    em.emit(efficiency_record(bounds::larsson_bound(a.gamma, parse_loophole(a.loophole))));
  } else if (which == "larsson-curve") {
    need(a.from > 0 && a.to <= 1 && a.from <= a.to && a.step > 0, "larsson-curve needs 0 < from <= to <= 1, step > 0");
    const auto steps = static_cast<std::size_t>(std::floor((a.to - a.from) / a.step + 1e-9));
    if (!em.json()) em.text("gamma,detection_limit,coincidence_limit\n");
    for (std::size_t k = 0; k <= steps; ++k) {
      const double g = a.from + static_cast<double>(k) * a.step;
      const double d = bounds::larsson_detection_bound(g).limit;
      const double c = bounds::larsson_coincidence_bound(g).limit;
      if (em.json()) {
        em.emit(ordered_json{{"type", "larsson_point"}, {"gamma", g}, {"detection_limit", d}, {"coincidence_limit", c}});
      } else {
        std::ostringstream line;
        line.precision(17);
        line << g << ',' << d << ',' << c << '\n';
        em.text(line.str());
      }
    }
  } else if (which == "tsirelson") {
    em.emit(ordered_json{{"type", "constant"}, {"name", "tsirelson"}, {"value", bounds::tsirelson_limit()}});
  } else if (which == "hoeffding") {
    need(a.t >= 0, "hoeffding needs --n and --t >= 0");
    em.emit(ordered_json{{"type", "hoeffding"}, {"n", a.n}, {"t", a.t}, {"probability", bounds::hoeffding_tail(a.n, a.t)}});
  }
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
  std::string file;
  std::string method = "window";
  std::int64_t window_ns = 0;
  std::int64_t origin_ns = 0;
  bool sort = false;
  std::string summary_csv;
  bool json = false;
};

std::string summary_csv(const ChshSummary& s) {
  std::ostringstream out;
  out.precision(17);
  out << "x,y,count,corr\n";
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) out << x << ',' << y << ',' << s.counts[cell_index(x, y)] << ',' << s.corr[cell_index(x, y)] << '\n';
  }
  return out.str();
}

void cmd_analyze(const AnalyzeArgs& a, Emitter& em) {
  need(a.window_ns > 0, "--window-ns must be positive");
  std::istringstream in(read_file(a.file));
  const auto stream =
      events::parse_event_stream(in, a.sort ? events::UnsortedPolicy::sort : events::UnsortedPolicy::reject);
  events::PairingResult pr;
  if (a.method == "window") {
    pr = events::pair_by_window(stream, a.window_ns);
  } else if (a.method == "lattice") {
    pr = events::pair_by_lattice(stream, a.window_ns, a.origin_ns);
  } else {
    throw UsageError("--method must be window or lattice");
  }
  em.emit(ordered_json{{"type", "config"},
                       {"command", "analyze"},
                       {"version", kVersion},
                       {"file", a.file},
                       {"events", stream.size()},
                       {"method", a.method},
                       {"window_ns", a.window_ns},
                       {"lattice_origin_ns", a.origin_ns}});
  const auto report = events::analyze(pr);
  em.emit(ordered_json::parse(events::format_verdict_json(report, pr)));
  if (!a.summary_csv.empty()) write_file(a.summary_csv, summary_csv(report.summary));
}

// ---------------------------------------------------------------------------
// polytope

struct PolytopeArgs {
  std::string file;
  std::string which = "quantum";
  std::string angles = "canonical";
  std::size_t index = 0;
  bool json = false;
};

void cmd_polytope(const std::string& action, const PolytopeArgs& a, Emitter& em) {
  if (action == "emit") {
    Behavior b;
    if (a.which == "quantum") {
      b = polytope::quantum_behavior(parse_angles(a.angles));
    } else if (a.which == "pr-box") {
      b = polytope::pr_box();
    } else if (a.which == "vertex") {
      need(a.index < 16, "--index must be below 16");
      b = polytope::local_vertices()[a.index];
    } else if (a.which == "uniform") {
      b.p.fill(0.25);
    } else {
      throw UsageError("--which must be quantum, pr-box, vertex or uniform");
    }
    em.text(format_behavior_csv(b));
    return;
  }
  const auto b = read_behavior(a.file);
  const auto v = polytope::validate(b);
  if (action == "classify") {
    ordered_json j{{"type", "classification"},
                   {"file", a.file},
                   {"class", polytope::to_string(polytope::classify(b))},
                   {"positivity", v.positivity},
                   {"normalization", v.normalization},
                   {"no_signalling", v.no_signalling}};
    if (v.normalization) j["max_abs_facet"] = polytope::chsh_facets(b).max_abs;
    if (v.all()) j["local_mixture_found"] = polytope::local_mixture_weights(b).has_value();
    em.emit(j);
  } else {
    const auto f = polytope::chsh_facets(b);
    ordered_json signs = ordered_json::array();
    for (std::size_t k = 0; k < 8; ++k) signs.push_back(polytope::facet_signs(k));
    em.emit(ordered_json{{"type", "facets"},
                         {"file", a.file},
                         {"signs", signs},
                         {"values", f.values},
                         {"max_abs", f.max_abs},
                         {"violated", f.violated_facets}});
  }
}

// ---------------------------------------------------------------------------
// qrc

struct QrcArgs {
  std::string challenger;
  std::string native;
  bool harness_quantum = false;
  std::string connect;
  std::string source;
  std::string alice;
  std::string bob;
  bool oracle = false;
  bool loophole = false;
  std::size_t n = 800;
  std::size_t trials = 99;
  double threshold = 1.0 + std::sqrt(2.0);
  std::size_t min_cell = 100;
  double timeout_s = 60.0;
  double round_timeout_s = 10.0;
  std::size_t rounds = 8;
  bool spreadsheet_probe = false;
  std::string seed;
  std::string transcripts;
  bool json = false;
};

qrc::ChallengeConfig make_config(const QrcArgs& a, qrc::Mode mode) {
  qrc::ChallengeConfig c;
  c.n = a.n;
  c.trials = a.trials;
  c.threshold = a.threshold;
  c.min_cell = a.min_cell;
  c.mode = mode;
  c.loophole = a.loophole;
  c.challenger_timeout = milliseconds(static_cast<long long>(a.timeout_s * 1000));
  c.round_timeout = milliseconds(static_cast<long long>(a.round_timeout_s * 1000));
  try {
    c.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return c;
}

ordered_json config_record(const std::string& action, const qrc::ChallengeConfig& c, std::uint64_t seed,
                           const std::string& challenger) {
  return ordered_json{{"type", "config"},
                      {"command", "qrc " + action},
                      {"version", kVersion},
                      {"challenger", challenger},
                      {"mode", qrc::to_string(c.mode)},
                      {"n", c.n},
                      {"trials", c.trials},
                      {"threshold", c.threshold},
                      {"min_cell", c.min_cell},
                      {"loophole", c.loophole},
                      {"challenger_timeout_ms", c.challenger_timeout.count()},
                      {"round_timeout_ms", c.round_timeout.count()},
                      {"seed", seed}};
}

// Challenger command lines go through the shell so quoting works; `exec`
// keeps the challenger as the direct child and "$@" receives the
// referee's own flags.
std::vector<std::string> command(const std::string& text, const char* flag) {
  if (io::split_command(text).empty()) throw UsageError(std::string(flag) + " is empty");
  return {"/bin/sh", "-c", "exec " + text + " \"$@\"", "sh"};
}

void report_sessions(const std::vector<qrc::SessionTranscript>& sessions, const qrc::ChallengeConfig& config,
                     const QrcArgs& a, Emitter& em) {
  std::string all;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    const auto& t = sessions[i];
    ordered_json j{{"type", "session"}, {"index", i}, {"session_seed", t.session_seed}};
    j["s"] = t.summary ? ordered_json(t.summary->s) : ordered_json(nullptr);
    j["se"] = t.summary ? ordered_json(t.summary->se) : ordered_json(nullptr);
    if (t.loophole_report) j["gamma_hat"] = t.loophole_report->efficiency.gamma_hat;
    j["win"] = t.win;
    j["settings_redraws"] = t.settings_redraws;
    j["anomalies"] = t.anomalies.size();
    em.emit(j);
    if (!a.transcripts.empty()) all += qrc::transcript_to_json(t) + "\n";
  }
  if (!a.transcripts.empty()) write_file(a.transcripts, all);
  const auto v = qrc::make_verdict(sessions, config);
  em.emit(ordered_json::parse(qrc::verdict_to_json(v)));
}

// The challenger's end of an in-process session runs on its own thread.
template <typename F>
void with_peer(F&& referee_side, std::function<void(io::FdChannel&)> peer) {
  auto [mine, theirs] = io::channel_pair();
  std::thread t([&peer, ch = std::move(theirs)]() mutable {
    try {
      peer(ch);
    } catch (const std::exception&) {
      // the referee reports the failure from its side
    }
  });
  try {
    referee_side(mine);
  } catch (...) {
    mine.close_write();
    t.join();
    throw;
  }
  mine.close_write();
  t.join();
}

qrc::SessionTranscript interactive_once(const QrcArgs& a, const qrc::ChallengeConfig& config, RngSeed session,
                                        std::size_t index) {
  const auto cseed = derive_seed(session, 0).value;
  if (!a.native.empty()) {
    const auto kind = challengers::parse_kind(a.native);
    qrc::SessionTranscript out;
    with_peer([&](io::FdChannel& ch) { out = qrc::run_interactive_session(ch, config, session, "native:" + a.native, index); },
              [&](io::FdChannel& ch) { challengers::serve_interactive(ch, kind, cseed); });
    return out;
  }
  if (!a.connect.empty()) {
    io::FdChannel ch = [&] {
      try {
        return io::connect_tcp(a.connect);
      } catch (const Error& e) {
        throw qrc::ChallengerFailure(e.what());
      }
    }();
    return qrc::run_interactive_session(ch, config, session, "tcp:" + a.connect, index);
  }
  auto argv = command(a.challenger, "--challenger");
  argv.insert(argv.end(), {"--seed", std::to_string(cseed)});
  io::Subprocess proc(argv);
  auto t = qrc::run_interactive_session(proc.channel(), config, session, a.challenger, index);
  proc.wait(milliseconds(2000));
  return t;
}

qrc::SessionTranscript three_node_once(const QrcArgs& a, const qrc::ChallengeConfig& config, RngSeed session) {
  if (a.oracle) return qrc::run_three_node_oracle(quantum::canonical_angles(), config, session);
  const auto cseed = derive_seed(session, 0).value;
  if (!a.native.empty()) {
    const auto station_kind = challengers::parse_kind(a.native);
    auto [src_ref, src_peer] = io::channel_pair();
    auto [a_ref, a_peer] = io::channel_pair();
    auto [b_ref, b_peer] = io::channel_pair();
    std::vector<std::thread> peers;
    peers.emplace_back([ch = std::move(src_peer), cseed]() mutable {
      try {
        challengers::serve_source(ch, cseed);
      } catch (const std::exception&) {
      }
    });
    peers.emplace_back([ch = std::move(a_peer), station_kind]() mutable {
      try {
        challengers::serve_station(ch, 'A', station_kind);
      } catch (const std::exception&) {
      }
    });
    peers.emplace_back([ch = std::move(b_peer), station_kind]() mutable {
      try {
        challengers::serve_station(ch, 'B', station_kind);
      } catch (const std::exception&) {
      }
    });
    const auto close_all = [&] {
      src_ref.close_write();
      a_ref.close_write();
      b_ref.close_write();
      for (auto& t : peers) t.join();
    };
    try {
      auto t = qrc::run_three_node_challenge(src_ref, a_ref, b_ref, config, session);
      t.challenger = "native:" + a.native;
      close_all();
      return t;
    } catch (...) {
      close_all();
      throw;
    }
  }
  need(!a.source.empty() && !a.alice.empty() && !a.bob.empty(), "three-node needs --source, --alice and --bob");
  const auto spawn = [&](const std::string& cmd, const char* flag) {
    auto argv = command(cmd, flag);
    argv.insert(argv.end(), {"--seed", std::to_string(cseed)});
    return std::make_unique<io::Subprocess>(argv);
  };
  auto src = spawn(a.source, "--source");
  auto al = spawn(a.alice, "--alice");
  auto bo = spawn(a.bob, "--bob");
  auto t = qrc::run_three_node_challenge(src->channel(), al->channel(), bo->channel(), config, session);
  t.challenger = a.source + " | " + a.alice + " | " + a.bob;
  for (auto* p : {src.get(), al.get(), bo.get()}) p->wait(milliseconds(2000));
  return t;
}

std::unique_ptr<qrc::SpreadsheetChallenger> spreadsheet_challenger(const QrcArgs& a) {
  if (!a.native.empty()) return std::make_unique<challengers::NativeSpreadsheetChallenger>(challengers::parse_kind(a.native));
  need(!a.challenger.empty(), "need --challenger CMD or --native KIND");
  return std::make_unique<qrc::ProcessSpreadsheetChallenger>(command(a.challenger, "--challenger"), a.challenger);
}

std::string challenger_label(const QrcArgs& a) {
  if (a.harness_quantum) return "harness:quantum-simulator";
  if (a.oracle) return "mediator-test:quantum-oracle";
  if (!a.native.empty()) return "native:" + a.native;
  if (!a.connect.empty()) return "tcp:" + a.connect;
  if (!a.source.empty()) return a.source + " | " + a.alice + " | " + a.bob;
  return a.challenger;
}

void cmd_qrc(const std::string& action, const QrcArgs& a, Emitter& em) {
  const auto seed = resolve_seed(a.seed);
  const RngSeed master{seed};

  if (action == "spreadsheet") {
    const auto config = make_config(a, qrc::Mode::spreadsheet);
    if (a.loophole) throw UsageError("--loophole applies to interactive mode only");
    em.emit(config_record(action, config, seed, challenger_label(a)));
    qrc::VerdictRun vr;
    if (a.harness_quantum) {
      vr = qrc::run_harness_quantum_verdict(quantum::canonical_angles(), config, master);
    } else {
      auto ch = spreadsheet_challenger(a);
      vr = qrc::run_spreadsheet_verdict(*ch, config, master);
    }
    report_sessions(vr.sessions, config, a, em);
  } else if (action == "interactive") {
    const auto config = make_config(a, qrc::Mode::interactive);
    need(!a.native.empty() || !a.connect.empty() || !a.challenger.empty(),
         "need --challenger CMD, --native KIND or --connect HOST:PORT");
    em.emit(config_record(action, config, seed, challenger_label(a)));
    std::vector<qrc::SessionTranscript> sessions;
    for (std::size_t i = 0; i < config.trials; ++i) sessions.push_back(interactive_once(a, config, derive_seed(master, i), i));
    report_sessions(sessions, config, a, em);
  } else if (action == "three-node") {
    const auto config = make_config(a, qrc::Mode::three_node);
    em.emit(config_record(action, config, seed, challenger_label(a)));
    std::vector<qrc::SessionTranscript> sessions;
    for (std::size_t i = 0; i < config.trials; ++i) sessions.push_back(three_node_once(a, config, derive_seed(master, i)));
    report_sessions(sessions, config, a, em);
  } else if (action == "determinism") {
    auto ch = spreadsheet_challenger(a);
    em.emit(ordered_json{{"type", "config"}, {"command", "qrc determinism"}, {"version", kVersion},
                         {"challenger", ch->identity()}, {"n", a.n}, {"seed", seed}});
    const auto r = qrc::verify_determinism(*ch, seed, a.n, milliseconds(static_cast<long long>(a.timeout_s * 1000)));
    em.emit(ordered_json{{"type", "determinism"},
                         {"deterministic", r.deterministic},
                         {"seed_sensitive", r.seed_sensitive},
                         {"notes", r.notes}});
  } else if (action == "probe") {
    em.emit(ordered_json{{"type", "config"}, {"command", "qrc probe"}, {"version", kVersion},
                         {"challenger", challenger_label(a)}, {"rounds", a.rounds}, {"seed", seed}});
    qrc::ProbeReport r;
    if (a.spreadsheet_probe) {
      auto ch = spreadsheet_challenger(a);
      r = qrc::consistency_probe(*ch, master, milliseconds(static_cast<long long>(a.timeout_s * 1000)));
    } else if (!a.native.empty()) {
      challengers::NativeProbeTarget target(challengers::parse_kind(a.native));
      r = qrc::consistency_probe(target, master, a.rounds);
    } else if (!a.connect.empty()) {
      auto ch = io::connect_tcp(a.connect);
      qrc::ChannelProbeTarget target(ch, "tcp:" + a.connect, milliseconds(static_cast<long long>(a.round_timeout_s * 1000)));
      r = qrc::consistency_probe(target, master, a.rounds);
    } else {
      need(!a.challenger.empty(), "need --challenger CMD, --native KIND or --connect HOST:PORT");
      qrc::ProcessProbeTarget target(command(a.challenger, "--challenger"),
                                     milliseconds(static_cast<long long>(a.timeout_s * 1000)), a.challenger);
      r = qrc::consistency_probe(target, master, a.rounds);
    }
    em.emit(ordered_json{{"type", "probe"},
                         {"status", qrc::to_string(r.status)},
                         {"consistent", r.consistent()},
                         {"rounds", r.rounds},
                         {"detail", r.detail}});
  }
}

// ---------------------------------------------------------------------------
// conjecture

struct ConjectureArgs {
  std::string table;
  std::string mode = "auto";
  std::uint64_t trials = 100000;
  std::size_t sweep = 0;
  std::size_t random_tables = 0;
  std::size_t rows = 4;
  std::size_t jobs = 1;
  std::string seed;
  bool json = false;
};

// Runs f(i) for i in [0, count) over `jobs` threads; each index's result
// lands in its own slot, so output never depends on the job count.
template <typename T, typename F>
std::vector<T> parallel_map(std::size_t count, std::size_t jobs, F f) {
  std::vector<T> out(count);
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex m;
  for (std::size_t j = 0; j < jobs; ++j) {
    pool.emplace_back([&, j] {
      try {
        for (std::size_t i = j; i < count; i += jobs) out[i] = f(i);
      } catch (...) {
        std::lock_guard lock(m);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

CounterfactualTable table_from_bits(std::uint64_t bits, std::size_t rows) {
  CounterfactualTable t;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto nib = (bits >> (4 * r)) & 0xFU;
    const auto s = [&](unsigned k) { return ((nib >> (3 - k)) & 1U) ? Sign::plus() : Sign::minus(); };
    t.rows.push_back({s(0), s(1), s(2), s(3)});
  }
  return t;
}

ordered_json rows_json(const CounterfactualTable& t) {
  auto rows = ordered_json::array();
  for (const auto& r : t.rows) rows.push_back({r.a.value(), r.a_prime.value(), r.b.value(), r.b_prime.value()});
  return rows;
}

void cmd_conjecture(const ConjectureArgs& a, Emitter& em) {
  const auto seed = resolve_seed(a.seed);
  const int chosen = (!a.table.empty()) + (a.sweep > 0) + (a.random_tables > 0);
  need(chosen == 1, "choose exactly one of --table, --sweep, --random-tables");
  ordered_json cfg{{"type", "config"}, {"command", "conjecture"}, {"version", kVersion}, {"seed", seed}, {"jobs", a.jobs}};

  if (!a.table.empty()) {
    std::istringstream in(read_file(a.table));
    const auto table = parse_table_csv(in);
    auto mode = EstimateMode::monte_carlo;
    if (a.mode == "exhaustive" || (a.mode == "auto" && table.size() <= 12)) mode = EstimateMode::exhaustive;
    if (a.mode != "auto" && a.mode != "exhaustive" && a.mode != "monte-carlo") {
      throw UsageError("--mode must be auto, exhaustive or monte-carlo");
    }
    cfg["table"] = a.table;
    cfg["rows"] = table.size();
    cfg["mode"] = mode == EstimateMode::exhaustive ? "exhaustive" : "monte-carlo";
    if (mode == EstimateMode::monte_carlo) cfg["trials"] = a.trials;
    em.emit(cfg);
    const double p = conjecture1_estimate(table, a.trials, RngSeed{seed}, mode);
    em.emit(ordered_json{{"type", "conjecture"}, {"proportion_s_above_2", p}, {"within_half", p <= 0.5}});
    return;
  }

  if (a.sweep > 0) {
    need(a.sweep <= 4, "--sweep supports at most 4 rows (2^16 tables)");
    const std::size_t count = std::size_t{1} << (4 * a.sweep);
    cfg["sweep_rows"] = a.sweep;
    cfg["tables"] = count;
    em.emit(cfg);
    const auto props = parallel_map<double>(count, a.jobs, [&](std::size_t i) {
      return conjecture1_estimate(table_from_bits(i, a.sweep), 0, RngSeed{0}, EstimateMode::exhaustive);
    });
    const auto it = std::max_element(props.begin(), props.end());
    const auto above = static_cast<std::size_t>(std::count_if(props.begin(), props.end(), [](double p) { return p > 0.5; }));
    const auto at_max = static_cast<std::size_t>(std::count(props.begin(), props.end(), *it));
    em.emit(ordered_json{{"type", "sweep"},
                         {"tables", count},
                         {"max_proportion", *it},
                         {"tables_at_max", at_max},
                         {"first_argmax", rows_json(table_from_bits(static_cast<std::uint64_t>(it - props.begin()), a.sweep))},
                         {"tables_above_half", above},
                         {"within_half", above == 0}});
    return;
  }

  need(a.rows >= 1 && a.rows <= 12, "--rows must be in 1..12 for the exhaustive comparison");
  cfg["random_tables"] = a.random_tables;
  cfg["rows"] = a.rows;
  cfg["trials"] = a.trials;
  em.emit(cfg);
  struct Pair {
    double exhaustive = 0.0;
    double monte_carlo = 0.0;
  };
  const auto results = parallel_map<Pair>(a.random_tables, a.jobs, [&](std::size_t i) {
    const auto ts = derive_seed(RngSeed{seed}, i);
    Rng rng(ts);
    const auto table = table_from_bits(rng.next_u64(), a.rows);
    return Pair{conjecture1_estimate(table, 0, RngSeed{0}, EstimateMode::exhaustive),
                conjecture1_estimate(table, a.trials, derive_seed(ts, 1), EstimateMode::monte_carlo)};
  });
  double max_diff = 0.0;
  double max_p = 0.0;
  for (const auto& r : results) {
    max_diff = std::max(max_diff, std::abs(r.exhaustive - r.monte_carlo));
    max_p = std::max(max_p, r.exhaustive);
  }
  em.emit(ordered_json{{"type", "monte_carlo_check"},
                       {"tables", results.size()},
                       {"max_abs_difference", max_diff},
                       {"max_exhaustive_proportion", max_p},
                       {"within_half", max_p <= 0.5}});
}

// ---------------------------------------------------------------------------

void add_json(CLI::App* app, bool& flag) { app->add_flag("--json", flag, "NDJSON output"); }
void add_seed(CLI::App* app, std::string& seed) {
  app->add_option("--seed", seed, "64-bit seed (default: $BELLKIT_SEED, else random; always echoed)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"bellkit: finite-sample CHSH laboratory"};
  app.name("bellkit");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "simulate quantum, LHV or cheater experiments");
  simulate->add_option("--model", sim.model, "quantum | lhv | cheater")->required()->check(CLI::IsMember({"quantum", "lhv", "cheater"}));
  simulate->add_option("--angles", sim.angles, "'canonical' or a,a',b,b' in radians");
  simulate->add_flag("--uniform", sim.uniform, "lhv: uniform mixture of the 16 strategies (default)");
  simulate->add_option("--strategy", sim.strategy, "lhv: deterministic a0,a1,b0,b1 signs");
  simulate->add_option("--target", sim.target, "cheater: canonical | pr-box | behavior CSV");
  simulate->add_option("--wing-keep", sim.wing_keep, "cheater: per-wing keep probability")->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--n", sim.n, "runs")->check(CLI::PositiveNumber);
  simulate->add_option("--runs-out", sim.runs_out, "write runs CSV");
  simulate->add_option("--table-out", sim.table_out, "lhv: write the counterfactual table CSV");
  simulate->add_option("--events-out", sim.events_out, "write a timed NDJSON event stream");
  simulate->add_option("--period-ns", sim.period_ns, "event stream emission period");
  simulate->add_option("--jitter-ns", sim.jitter_ns, "event stream detection jitter");
  add_seed(simulate, sim.seed);
  add_json(simulate, sim.json);

  BoundArgs bnd;
  auto* bound = app.add_subcommand("bound", "tail bounds and loophole-adjusted limits");
  bound->require_subcommand(1);
  bool bound_json = false;
  add_json(bound, bound_json);
  std::vector<std::pair<std::string, CLI::App*>> bound_subs;
  for (const auto* name : {"theorem1", "two-term", "two-term-opt", "min-runs", "larsson", "larsson-curve", "tsirelson", "hoeffding"}) {
    auto* s = bound->add_subcommand(name);
    bound_subs.emplace_back(name, s);
    add_json(s, bnd.json);
  }
  const auto sub = [&](const char* name) {
    return std::find_if(bound_subs.begin(), bound_subs.end(), [&](const auto& p) { return p.first == name; })->second;
  };
  for (const auto* name : {"theorem1", "two-term", "two-term-opt", "hoeffding"}) sub(name)->add_option("--n", bnd.n)->required();
  for (const auto* name : {"theorem1", "two-term", "two-term-opt", "min-runs"}) sub(name)->add_option("--eta", bnd.eta)->required();
  sub("two-term")->add_option("--delta", bnd.delta, "default: canonical split 8 delta^2 = (eta/8)^2");
  sub("min-runs")->add_option("--alpha", bnd.alpha)->required();
  sub("larsson")->add_option("--gamma", bnd.gamma)->required();
  sub("larsson")->add_option("--loophole", bnd.loophole, "detection | coincidence");
  sub("larsson-curve")->add_option("--from", bnd.from);
  sub("larsson-curve")->add_option("--to", bnd.to);
  sub("larsson-curve")->add_option("--step", bnd.step);
  sub("hoeffding")->add_option("--t", bnd.t)->required();

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "pair a timed event stream and report loophole verdicts");
  analyze->add_option("file", an.file, "NDJSON event stream ('-' for stdin)")->required();
  analyze->add_option("--method", an.method, "window | lattice");
  analyze->add_option("--window-ns", an.window_ns, "coincidence window / lattice spacing")->required();
  analyze->add_option("--lattice-origin-ns", an.origin_ns, "lattice origin");
  analyze->add_flag("--sort", an.sort, "sort unsorted input instead of rejecting it");
  analyze->add_option("--summary-csv", an.summary_csv, "write the per-cell summary as CSV");
  add_json(analyze, an.json);

  PolytopeArgs pa;
  auto* poly = app.add_subcommand("polytope", "2x2x2 behaviors: classification and facets");
  poly->require_subcommand(1);
  bool poly_json = false;
  add_json(poly, poly_json);
  auto* classify = poly->add_subcommand("classify", "classify a behavior CSV");
  auto* facets = poly->add_subcommand("facets", "the 8 CHSH facet values");
  auto* emit = poly->add_subcommand("emit", "write a reference behavior as CSV");
  for (auto* s : {classify, facets}) {
    s->add_option("file", pa.file, "behavior CSV, or canonical / pr-box")->required();
    add_json(s, pa.json);
  }
  emit->add_option("--which", pa.which, "quantum | pr-box | vertex | uniform");
  emit->add_option("--angles", pa.angles, "quantum: 'canonical' or a,a',b,b'");
  emit->add_option("--index", pa.index, "vertex index 0..15");

  QrcArgs qa;
  auto* qrc_cmd = app.add_subcommand("qrc", "referee challenge sessions");
  qrc_cmd->require_subcommand(1);
  bool qrc_json = false;
  add_json(qrc_cmd, qrc_json);
  std::vector<std::pair<std::string, CLI::App*>> qrc_subs;
  for (const auto* name : {"spreadsheet", "interactive", "three-node", "determinism", "probe"}) {
    auto* s = qrc_cmd->add_subcommand(name);
    qrc_subs.emplace_back(name, s);
    add_json(s, qa.json);
    add_seed(s, qa.seed);
    s->add_option("--native", qa.native, "in-process challenger kind (lhv, fixed, wallclock, cheat-y, ...)");
    s->add_option("--timeout-s", qa.timeout_s, "challenger timeout");
    s->add_option("--round-timeout-s", qa.round_timeout_s, "per-round timeout");
  }
  for (auto& [name, s] : qrc_subs) {
    if (name != "three-node") s->add_option("--challenger", qa.challenger, "challenger command line");
    if (name == "spreadsheet" || name == "interactive" || name == "three-node") {
      s->add_option("--n", qa.n, "runs per session")->check(CLI::PositiveNumber);
      s->add_option("--trials", qa.trials, "sessions per verdict")->check(CLI::PositiveNumber);
      s->add_option("--threshold", qa.threshold, "winning CHSH value");
      s->add_option("--min-cell", qa.min_cell, "minimum runs per setting pair");
      s->add_option("--transcripts", qa.transcripts, "write session transcripts as NDJSON");
    }
    if (name == "determinism") s->add_option("--n", qa.n, "rows requested")->check(CLI::PositiveNumber);
  }
  qrc_subs[0].second->add_flag("--harness-quantum", qa.harness_quantum, "non-compliant quantum simulator (harness self-test)");
  qrc_subs[1].second->add_option("--connect", qa.connect, "challenger listening at HOST:PORT");
  qrc_subs[1].second->add_flag("--loophole", qa.loophole, "accept 0 (no detection) and adjust the verdict");
  qrc_subs[2].second->add_option("--source", qa.source, "source command line");
  qrc_subs[2].second->add_option("--alice", qa.alice, "station A command line");
  qrc_subs[2].second->add_option("--bob", qa.bob, "station B command line");
  qrc_subs[2].second->add_flag("--oracle", qa.oracle, "mediator self-test with a quantum oracle");
  qrc_subs[4].second->add_option("--rounds", qa.rounds, "probe rounds");
  qrc_subs[4].second->add_option("--connect", qa.connect, "interactive challenger at HOST:PORT");
  qrc_subs[4].second->add_flag("--spreadsheet", qa.spreadsheet_probe, "challenger is a spreadsheet program");

  ConjectureArgs ca;
  auto* conj = app.add_subcommand("conjecture", "how often can a local table beat 2 under random settings?");
  conj->add_option("--table", ca.table, "table CSV");
  conj->add_option("--mode", ca.mode, "auto | exhaustive | monte-carlo");
  conj->add_option("--trials", ca.trials, "Monte Carlo setting assignments");
  conj->add_option("--sweep", ca.sweep, "exhaustive sweep over every table with this many rows (<= 4)");
  conj->add_option("--random-tables", ca.random_tables, "compare Monte Carlo with exhaustive on K random tables");
  conj->add_option("--rows", ca.rows, "rows per random table");
  conj->add_option("--jobs", ca.jobs, "worker threads")->check(CLI::PositiveNumber);
  add_seed(conj, ca.seed);
  add_json(conj, ca.json);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (simulate->parsed()) {
      Emitter em(out, sim.json);
      cmd_simulate(sim, em);
    } else if (bound->parsed()) {
      Emitter em(out, bnd.json || bound_json);
      for (const auto& [name, s] : bound_subs) {
        if (s->parsed()) cmd_bound(name, bnd, em);
      }
    } else if (analyze->parsed()) {
      Emitter em(out, an.json);
      cmd_analyze(an, em);
    } else if (poly->parsed()) {
      Emitter em(out, pa.json || poly_json);
      cmd_polytope(classify->parsed() ? "classify" : facets->parsed() ? "facets" : "emit", pa, em);
    } else if (qrc_cmd->parsed()) {
      Emitter em(out, qa.json || qrc_json);
      for (const auto& [name, s] : qrc_subs) {
        if (s->parsed()) cmd_qrc(name, qa, em);
      }
    } else if (conj->parsed()) {
      Emitter em(out, ca.json);
      cmd_conjecture(ca, em);
    }
    out.flush();
    return kOk;
  } catch (const qrc::ProtocolViolation& e) {
    err << "protocol violation: " << e.what() << '\n';
    return kProtocolViolation;
  } catch (const qrc::ChallengerFailure& e) {
    err << "challenger failure: " << e.what() << '\n';
    return kChallengerFailure;
  } catch (const events::ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
}

}  // namespace bellkit::cli
