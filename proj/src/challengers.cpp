#include "bellkit/challengers.hpp"

#include <array>
#include <cmath>
#include <json.hpp>

#include "bellkit/quantum.hpp"

namespace bellkit::challengers {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Kind, std::string_view>, 8> kNames{{
    {Kind::lhv, "lhv"},
    {Kind::wallclock, "wallclock"},
    {Kind::fixed, "fixed"},
    {Kind::cheat_y, "cheat-y"},
    {Kind::cheater, "cheater"},
    {Kind::memory, "memory"},
    {Kind::eager, "eager"},
    {Kind::chatty, "chatty"},
}};

constexpr std::uint64_t kFixedSeed = 0x5eed5eed5eed5eedULL;

double draw_lambda(Rng& rng) { return 2.0 * quantum::kPi * rng.uniform(); }

std::array<int, 4> hidden_angle_row(double lambda) {
  const auto ang = quantum::canonical_angles();
  return {hidden_angle_outcome(ang.alpha, lambda), hidden_angle_outcome(ang.alpha_prime, lambda),
          -hidden_angle_outcome(ang.beta, lambda), -hidden_angle_outcome(ang.beta_prime, lambda)};
}

std::string row_csv_table(Rng& rng, std::size_t n) {
  CounterfactualTable t;
  t.rows.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto r = hidden_angle_row(draw_lambda(rng));
    t.rows.push_back({Sign(r[0]), Sign(r[1]), Sign(r[2]), Sign(r[3])});
  }
  return format_table_csv(t);
}

// Best deterministic row for a predicted setting pair: the observed
// product pushes that cell's term of S upward.
std::array<int, 4> memory_row(int px, int py, Rng& rng) {
  std::array<int, 4> r{};
  for (auto& v : r) v = rng.bit() ? 1 : -1;
  const int want = (px == 1 && py == 1) ? -1 : 1;
  r[static_cast<std::size_t>(2 + py)] = want * r[static_cast<std::size_t>(px)];
  return r;
}

// Detection-loophole row: only the desired column on each side is filled.
std::array<int, 4> cheater_row(Rng& rng) {
  const auto w = rng.next_u64();
  const int dx = static_cast<int>(w >> 63);
  const int dy = static_cast<int>((w >> 62) & 1U);
  const auto [a, b] = quantum::sample_run(quantum::canonical_angles(), dx, dy, rng);
  std::array<int, 4> r{};
  r[static_cast<std::size_t>(dx)] = a.value();
  r[static_cast<std::size_t>(2 + dy)] = b.value();
  return r;
}

json read_json(io::LineChannel& ch, std::chrono::milliseconds timeout, bool& eof) {
  const auto line = ch.read_line(timeout);
  if (!line) {
    eof = true;
    return nullptr;
  }
  eof = false;
  auto j = json::parse(*line, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("type")) throw Error("unreadable message '" + *line + "'");
  return j;
}

json probe_reply(Kind kind, const json& msg) {
  const auto o = single_run(kind, msg.at("seed").get<std::uint64_t>(), msg.at("x").get<int>(), msg.at("y").get<int>());
  if (!o) return json{{"type", "unsupported"}};
  return json{{"type", "outcome"}, {"a", o->first}, {"b", o->second}};
}

}  // namespace

std::string_view to_string(Kind k) {
  for (const auto& [kind, name] : kNames) {
    if (kind == k) return name;
  }
  return "?";
}

Kind parse_kind(std::string_view name) {
  for (const auto& [kind, n] : kNames) {
    if (n == name) return kind;
  }
  throw Error("unknown challenger kind '" + std::string(name) + "'");
}

int hidden_angle_outcome(double theta, double lambda) { return std::cos(theta - lambda) >= 0.0 ? 1 : -1; }

std::string spreadsheet(Kind kind, std::uint64_t seed, std::size_t n) {
  if (kind == Kind::fixed) seed = kFixedSeed;
  if (kind == Kind::wallclock) {
    seed ^= static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
  }
  Rng rng(RngSeed{seed});
  return row_csv_table(rng, n);
}

std::optional<std::pair<int, int>> single_run(Kind kind, std::uint64_t seed, int x, int y) {
  switch (kind) {
    case Kind::lhv:
    case Kind::fixed:
    case Kind::memory:
    case Kind::cheat_y: {
      Rng rng(RngSeed{kind == Kind::fixed ? kFixedSeed : seed});
      const auto r = hidden_angle_row(draw_lambda(rng));
      int a = r[static_cast<std::size_t>(x)];
      const int b = r[static_cast<std::size_t>(2 + y)];
      if (kind == Kind::cheat_y && y == 1) a = -a;
      return std::pair{a, b};
    }
    default:
      return std::nullopt;
  }
}

ClientReport serve_interactive(io::LineChannel& channel, Kind kind, std::uint64_t seed,
                               std::chrono::milliseconds timeout) {
  ClientReport rep;
  Rng rng(RngSeed{kind == Kind::fixed ? kFixedSeed : seed});
  std::string pending_hash;
  int last_x = 0;
  int last_y = 0;
  for (;;) {
    bool eof = false;
    const auto msg = read_json(channel, timeout, eof);
    if (eof) return rep;
    const auto type = msg["type"].get<std::string>();
    if (type == "hello") continue;
    if (type == "probe") {
      channel.write_line(probe_reply(kind, msg).dump());
    } else if (type == "commit") {
      pending_hash = msg.at("hash").get<std::string>();
      if (kind == Kind::eager) channel.write_line(R"({"type":"settings_request"})");
      std::array<int, 4> r{};
      if (kind == Kind::cheater) {
        r = cheater_row(rng);
      } else if (kind == Kind::memory) {
        r = memory_row(last_x, last_y, rng);
      } else {
        r = hidden_angle_row(draw_lambda(rng));
      }
      channel.write_line(json{{"type", "row"}, {"a", r[0]}, {"ap", r[1]}, {"b", r[2]}, {"bp", r[3]}}.dump());
    } else if (type == "reveal") {
      last_x = msg.at("x").get<int>();
      last_y = msg.at("y").get<int>();
      if (qrc::commitment(last_x, last_y, msg.at("nonce").get<std::string>()) != pending_hash) {
        rep.audited = false;
        throw Error("audit failure: reveal does not match commitment in round " + std::to_string(rep.rounds));
      }
      ++rep.rounds;
    } else if (type == "result") {
      rep.s = msg.at("s").get<double>();
      rep.win = msg.at("win").get<bool>();
      return rep;
    } else {
      throw Error("unexpected referee message '" + type + "'");
    }
  }
}

std::size_t serve_source(io::LineChannel& channel, std::uint64_t seed, std::chrono::milliseconds timeout) {
  Rng rng(RngSeed{seed});
  std::size_t emitted = 0;
  for (;;) {
    bool eof = false;
    const auto msg = read_json(channel, timeout, eof);
    if (eof) return emitted;
    if (msg["type"] != "emit") throw Error("source: unexpected message");
    const double lambda = draw_lambda(rng);
    channel.write_line(json{{"type", "emit"}, {"a", lambda}, {"b", lambda}}.dump());
    ++emitted;
  }
}

std::size_t serve_station(io::LineChannel& channel, char wing, Kind kind, std::chrono::milliseconds timeout) {
  if (wing != 'A' && wing != 'B') throw Error("station wing must be A or B");
  const auto ang = quantum::canonical_angles();
  double lambda = 0.0;
  std::size_t rounds = 0;
  for (;;) {
    bool eof = false;
    const auto msg = read_json(channel, timeout, eof);
    if (eof) return rounds;
    if (msg["type"] == "message") {
      lambda = msg.at("payload").get<double>();
    } else if (msg["type"] == "setting") {
      const int s = msg.at("value").get<int>();
      if (kind == Kind::chatty) {
        channel.write_line(json{{"type", "send"}, {"to", wing == 'A' ? "B" : "A"}, {"setting", s}}.dump());
      }
      const int out = wing == 'A' ? hidden_angle_outcome(ang.alice(s), lambda)
                                  : -hidden_angle_outcome(ang.bob(s), lambda);
      channel.write_line(json{{"type", "outcome"}, {"value", out}}.dump());
      ++rounds;
    } else {
      throw Error("station: unexpected message");
    }
  }
}

std::string NativeSpreadsheetChallenger::identity() const { return "native:" + std::string(to_string(kind_)); }

std::string NativeSpreadsheetChallenger::produce(std::uint64_t seed, std::size_t n, std::chrono::milliseconds) {
  return spreadsheet(kind_, seed, n);
}

std::string NativeProbeTarget::identity() const { return "native:" + std::string(to_string(kind_)); }

std::optional<std::pair<int, int>> NativeProbeTarget::single_run(std::uint64_t seed, int x, int y) {
  return challengers::single_run(kind_, seed, x, y);
}

}  // namespace bellkit::challengers
