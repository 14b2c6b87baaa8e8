#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bellkit/bounds.hpp"
#include "bellkit/core.hpp"
#include "bellkit/events.hpp"
#include "bellkit/io.hpp"
#include "bellkit/quantum.hpp"

namespace bellkit::qrc {

/// The challenger broke the wire protocol (exit code 2 at the CLI).
class ProtocolViolation : public Error {
 public:
  using Error::Error;
};

/// The challenger crashed, hung or vanished (exit code 3 at the CLI).
class ChallengerFailure : public Error {
 public:
  using Error::Error;
};

enum class Mode { spreadsheet, interactive, three_node };
std::string_view to_string(Mode m);

struct ChallengeConfig {
  std::size_t n = 800;
  std::size_t trials = 99;
  double threshold = 1.0 + std::sqrt(2.0);
  std::size_t min_cell = 100;
  Mode mode = Mode::spreadsheet;
  /// Interactive mode only: rows may carry 0 (no detection) and the
  /// verdict is loophole-adjusted.
  bool loophole = false;
  std::chrono::milliseconds challenger_timeout{60'000};
  std::chrono::milliseconds round_timeout{10'000};
  std::size_t max_settings_redraws = 16;

  /// Throws unless 2 < threshold < 2 sqrt 2, 4 min_cell <= n, n >= 1 and
  /// trials >= 1.
  void validate() const;
};

/// One referee round. `row` holds (A, A', B, B') when the challenger
/// committed to a full row; `a`/`b` are the observed values (0 = no
/// detection in loophole mode).
struct RunRecord {
  int x = 0;
  int y = 0;
  std::optional<std::array<int, 4>> row;
  int a = 0;
  int b = 0;
  std::string nonce;
  std::string hash;
  bool voided = false;
};

struct SessionTranscript {
  Mode mode = Mode::spreadsheet;
  ChallengeConfig config;
  std::string challenger;
  std::uint64_t session_seed = 0;
  std::uint64_t challenger_seed = 0;
  std::uint64_t settings_seed = 0;
  std::size_t settings_redraws = 0;
  std::vector<RunRecord> runs;
  std::optional<ChshSummary> summary;
  std::optional<events::AnalysisReport> loophole_report;
  bool win = false;
  std::vector<std::string> anomalies;
};

/// Result of scoring a list of rounds. Pure function of its inputs.
struct Score {
  std::optional<ChshSummary> summary;
  std::optional<events::AnalysisReport> loophole_report;
  bool min_cell_met = false;
  bool win = false;
};

/// Strict mode: win iff every cell has >= min_cell runs and s > threshold.
/// Loophole mode: coincidences only, and s must also beat the
/// detection-loophole limit at the estimated efficiency.
Score score_runs(const std::vector<RunRecord>& runs, const ChallengeConfig& config);
Score rescore(const SessionTranscript& t);

struct Verdict {
  std::size_t sessions_won = 0;
  std::size_t sessions_total = 0;
  bool pass = false;  // strictly more than half the sessions won
  bounds::BoundReport bound;
  std::string bound_note;
};

Verdict make_verdict(const std::vector<SessionTranscript>& sessions, const ChallengeConfig& config);

struct VerdictRun {
  Verdict verdict;
  std::vector<SessionTranscript> sessions;
};

/// sha256_hex of the ASCII string "x,y,nonce".
std::string commitment(int x, int y, std::string_view nonce);

/// True iff every round carrying a hash matches its revealed settings.
bool audit_commitments(const SessionTranscript& t);

std::string transcript_to_json(const SessionTranscript& t);
SessionTranscript transcript_from_json(std::string_view json);
std::string verdict_to_json(const Verdict& v);

// ---------------------------------------------------------------------------
// Spreadsheet mode

/// A program that turns (seed, n) into the CSV text of an N x 4 table.
class SpreadsheetChallenger {
 public:
  virtual ~SpreadsheetChallenger() = default;
  virtual std::string identity() const = 0;
  /// Raw standard output. Throws ChallengerFailure on crash or timeout.
  virtual std::string produce(std::uint64_t seed, std::size_t n, std::chrono::milliseconds timeout) = 0;
};

/// Runs `<argv...> --seed <u64> --n <int>` and captures stdout.
class ProcessSpreadsheetChallenger : public SpreadsheetChallenger {
 public:
  /// `label` names the challenger in transcripts (default: argv joined).
  explicit ProcessSpreadsheetChallenger(std::vector<std::string> argv, std::string label = {})
      : argv_(std::move(argv)), label_(std::move(label)) {}
  std::string identity() const override;
  std::string produce(std::uint64_t seed, std::size_t n, std::chrono::milliseconds timeout) override;

 private:
  std::vector<std::string> argv_;
  std::string label_;
};

/// Parses and checks a challenger table. Throws ProtocolViolation for
/// malformed CSV or a wrong row count.
CounterfactualTable parse_challenger_table(const std::string& csv, std::size_t expected_rows);

/// One session: the challenger gets derive_seed(seed, 0); the referee then
/// draws settings from derive_seed(seed, 1), redrawing (bounded) until
/// every cell holds at least min_cell runs.
SessionTranscript run_spreadsheet_session(SpreadsheetChallenger& challenger, const ChallengeConfig& config,
                                          RngSeed seed);

/// config.trials sessions with session seeds derive_seed(seed, i).
VerdictRun run_spreadsheet_verdict(SpreadsheetChallenger& challenger, const ChallengeConfig& config, RngSeed seed);

/// Harness self-test only: a quantum simulator that sees the referee's
/// settings. Not a compliant challenger; every transcript says so.
SessionTranscript run_harness_quantum_session(const quantum::AngleSet& angles, const ChallengeConfig& config,
                                              RngSeed seed);
VerdictRun run_harness_quantum_verdict(const quantum::AngleSet& angles, const ChallengeConfig& config, RngSeed seed);

struct DeterminismReport {
  bool deterministic = false;
  bool seed_sensitive = true;
  std::vector<std::string> notes;
};

/// Runs the challenger twice with (seed, n); deterministic iff the outputs
/// are byte-identical. A third run with another seed flags challengers
/// that ignore their seed.
DeterminismReport verify_determinism(SpreadsheetChallenger& challenger, std::uint64_t seed, std::size_t n,
                                     std::chrono::milliseconds timeout = std::chrono::milliseconds(60'000));

// ---------------------------------------------------------------------------
// Counterfactual-consistency probe

enum class ProbeStatus { consistent, inconsistent, unsupported, vacuous };
std::string_view to_string(ProbeStatus s);

struct ProbeReport {
  ProbeStatus status = ProbeStatus::unsupported;
  std::size_t rounds = 0;
  std::string detail;

  bool consistent() const { return status == ProbeStatus::consistent || status == ProbeStatus::vacuous; }
};

/// A settings-driven model that can replay one run from a given seed.
class ProbeTarget {
 public:
  virtual ~ProbeTarget() = default;
  virtual std::string identity() const = 0;
  /// (a, b) produced from `seed` at settings (x, y); nullopt if the
  /// challenger refuses single-run replay.
  virtual std::optional<std::pair<int, int>> single_run(std::uint64_t seed, int x, int y) = 0;
};

/// Runs `<argv...> --seed <u64> --x <bit> --y <bit>`, expecting one line
/// "a,b". Any nonzero exit counts as "unsupported".
class ProcessProbeTarget : public ProbeTarget {
 public:
  explicit ProcessProbeTarget(std::vector<std::string> argv,
                              std::chrono::milliseconds timeout = std::chrono::milliseconds(60'000),
                              std::string label = {})
      : argv_(std::move(argv)), timeout_(timeout), label_(std::move(label)) {}
  std::string identity() const override;
  std::optional<std::pair<int, int>> single_run(std::uint64_t seed, int x, int y) override;

 private:
  std::vector<std::string> argv_;
  std::chrono::milliseconds timeout_;
  std::string label_;
};

/// Sends {"type":"probe","seed":S,"x":x,"y":y} and expects
/// {"type":"outcome","a":..,"b":..} or {"type":"unsupported"}.
class ChannelProbeTarget : public ProbeTarget {
 public:
  ChannelProbeTarget(io::LineChannel& channel, std::string identity,
                     std::chrono::milliseconds timeout = std::chrono::milliseconds(10'000))
      : channel_(channel), identity_(std::move(identity)), timeout_(timeout) {}
  std::string identity() const override { return identity_; }
  std::optional<std::pair<int, int>> single_run(std::uint64_t seed, int x, int y) override;

 private:
  io::LineChannel& channel_;
  std::string identity_;
  std::chrono::milliseconds timeout_;
};

/// For each of `rounds` derived seeds, replays all four setting pairs and
/// checks that A does not change with y and B does not change with x.
ProbeReport consistency_probe(ProbeTarget& target, RngSeed seed, std::size_t rounds = 8);

/// Spreadsheet challengers commit to whole rows, so they are consistent by
/// construction; this only checks that a one-row table is produced.
ProbeReport consistency_probe(SpreadsheetChallenger& challenger, RngSeed seed,
                              std::chrono::milliseconds timeout = std::chrono::milliseconds(60'000));

// ---------------------------------------------------------------------------
// Interactive ("rating agency") mode
//
// referee -> {"type":"hello","n":N,"session":ID}            (+ "loophole":true)
// per round:
//   referee -> {"type":"commit","hash":sha256("x,y,nonce")}
//   client  -> {"type":"row","a":±1,"ap":±1,"b":±1,"bp":±1}
//   referee -> {"type":"reveal","x":x,"y":y,"nonce":nonce}
// referee -> {"type":"result","s":S,"win":bool}

/// Settings and nonces come from derive_seed(seed, 1). Throws
/// ProtocolViolation or ChallengerFailure.
SessionTranscript run_interactive_session(io::LineChannel& channel, const ChallengeConfig& config, RngSeed seed,
                                          std::string identity, std::uint64_t session_id = 0);

// ---------------------------------------------------------------------------
// Three-node mode
//
// per round:
//   referee -> source  {"type":"emit"}
//   source  -> referee {"type":"emit","a":<payload>,"b":<payload>}
//   referee -> alice   {"type":"message","payload":<payload a>}   (likewise bob)
//   referee -> alice   {"type":"setting","value":x}               (likewise bob)
//   alice   -> referee {"type":"outcome","value":±1}              (likewise bob)
// Any station line other than its outcome is logged and voids the round.

SessionTranscript run_three_node_challenge(io::LineChannel& source, io::LineChannel& alice, io::LineChannel& bob,
                                           const ChallengeConfig& config, RngSeed seed);

/// Mediator self-test: outcomes come from the singlet sampler with both
/// settings known.
SessionTranscript run_three_node_oracle(const quantum::AngleSet& angles, const ChallengeConfig& config,
                                        RngSeed seed);

}  // namespace bellkit::qrc
