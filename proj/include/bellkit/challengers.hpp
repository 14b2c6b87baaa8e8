#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "bellkit/io.hpp"
#include "bellkit/qrc.hpp"

// Native challenger programs used to exercise the referee. The honest
// model is the classic hidden-angle LHV: each pair carries a uniform angle
// lambda and, at the canonical measurement angles, Alice answers
// sign(cos(alpha - lambda)) and Bob -sign(cos(beta - lambda)). Its CHSH
// value is exactly 2 in expectation, the local maximum.
namespace bellkit::challengers {

enum class Kind {
  lhv,        // honest hidden-angle model
  wallclock,  // mixes the clock into its seed: not reproducible
  fixed,      // ignores its seed
  cheat_y,    // single-run replay where Alice's outcome depends on y
  cheater,    // interactive rows with 0 = "no detection" (detection loophole)
  memory,     // honest but conditions each row on the last revealed settings
  eager,      // asks for the settings before sending its row
  chatty,     // three-node station that tries to message its partner
};

std::string_view to_string(Kind k);
/// Throws bellkit::Error on unknown names.
Kind parse_kind(std::string_view name);

/// Outcome of the hidden-angle model at measurement angle `theta` for a
/// pair carrying `lambda`; Bob's wing negates it.
int hidden_angle_outcome(double theta, double lambda);

/// Spreadsheet output (CSV text) for `<prog> --seed S --n N`.
std::string spreadsheet(Kind kind, std::uint64_t seed, std::size_t n);

/// One run replayed from `seed` at (x, y); nullopt when the kind refuses
/// single-run replay.
std::optional<std::pair<int, int>> single_run(Kind kind, std::uint64_t seed, int x, int y);

struct ClientReport {
  std::size_t rounds = 0;
  bool audited = true;  // every reveal matched its commitment
  std::optional<double> s;
  bool win = false;
};

/// Client side of the interactive protocol until the referee sends its
/// result or closes the channel. Also answers probe messages. Throws
/// bellkit::Error on an audit failure or an unexpected referee message.
ClientReport serve_interactive(io::LineChannel& channel, Kind kind, std::uint64_t seed,
                               std::chrono::milliseconds timeout = std::chrono::milliseconds(30'000));

/// Three-node source: answers each emit with the same hidden angle for both
/// stations. Returns the number of emissions at end of input.
std::size_t serve_source(io::LineChannel& channel, std::uint64_t seed,
                         std::chrono::milliseconds timeout = std::chrono::milliseconds(30'000));

/// Three-node station for wing 'A' or 'B'. Kind::chatty adds one stray
/// message per round.
std::size_t serve_station(io::LineChannel& channel, char wing, Kind kind,
                          std::chrono::milliseconds timeout = std::chrono::milliseconds(30'000));

class NativeSpreadsheetChallenger : public qrc::SpreadsheetChallenger {
 public:
  explicit NativeSpreadsheetChallenger(Kind kind) : kind_(kind) {}
  std::string identity() const override;
  std::string produce(std::uint64_t seed, std::size_t n, std::chrono::milliseconds timeout) override;

 private:
  Kind kind_;
};

class NativeProbeTarget : public qrc::ProbeTarget {
 public:
  explicit NativeProbeTarget(Kind kind) : kind_(kind) {}
  std::string identity() const override;
  std::optional<std::pair<int, int>> single_run(std::uint64_t seed, int x, int y) override;

 private:
  Kind kind_;
};

}  // namespace bellkit::challengers
