#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bellkit/bounds.hpp"
#include "bellkit/core.hpp"
#include "bellkit/lhv.hpp"

namespace bellkit::events {

enum class Wing : std::uint8_t { A, B };

struct TimedEvent {
  std::int64_t t_ns = 0;
  Wing wing = Wing::A;
  int setting = 0;
  Sign outcome = Sign::plus();

  friend bool operator==(const TimedEvent&, const TimedEvent&) = default;
};

/// Events in merged time order (ties keep input order).
struct EventStream {
  std::vector<TimedEvent> events;

  std::size_t size() const { return events.size(); }
};

/// Parse failure with the 1-based line and column of the first bad record.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

enum class UnsortedPolicy { reject, sort };

/// NDJSON, one record per line:
///   {"t_ns":int,"wing":"A"|"B","setting":0|1,"outcome":1|-1}
/// Blank lines are skipped. Timestamps must be nondecreasing within each
/// wing unless the policy is `sort`.
EventStream parse_event_stream(std::istream& in, UnsortedPolicy policy = UnsortedPolicy::reject);

/// Writes the stream in the same NDJSON schema, one event per line.
std::string format_event_stream(const EventStream& stream);

enum class PairingMethod { window, lattice };
std::string_view to_string(PairingMethod m);

struct PairedRun {
  int x = 0;
  int y = 0;
  Sign a_out = Sign::plus();
  Sign b_out = Sign::plus();
  std::int64_t t_a = 0;
  std::int64_t t_b = 0;
};

struct PairingResult {
  std::vector<PairedRun> pairs;
  std::array<std::size_t, 2> singles_a{};  // by Alice's setting
  std::array<std::size_t, 2> singles_b{};  // by Bob's setting
  PairingMethod method = PairingMethod::window;
  std::int64_t window_ns = 0;
  std::int64_t lattice_origin_ns = 0;

  std::size_t total_singles_a() const { return singles_a[0] + singles_a[1]; }
  std::size_t total_singles_b() const { return singles_b[0] + singles_b[1]; }
  std::vector<ObservedRun> observed() const;
};

/// Greedy earliest-first matching. Scanning in time order, an event pairs
/// with the earliest still-unmatched opposite-wing event no more than
/// w_ns earlier; otherwise it waits for a later partner.
PairingResult pair_by_window(const EventStream& stream, std::int64_t w_ns);

/// Intervals [origin + k w, origin + (k+1) w). An interval holding exactly
/// one A event and one B event yields a pair; every other event is a single.
PairingResult pair_by_lattice(const EventStream& stream, std::int64_t w_ns, std::int64_t origin_ns = 0);

/// Builds the pairing bookkeeping directly from clocked ternary runs: a run
/// with both wings detected is a pair, a run with one wing is a single.
PairingResult pairing_from_runs(const std::vector<lhv::TernaryRun>& runs);

inline constexpr std::string_view kGammaEstimator = "singles-split-evenly-over-unseen-setting";

/// Per-cell conditional detection rates. rates[0][c] is P(A detects | B
/// detects) for cell c, rates[1][c] is P(B | A). A single in wing B with
/// setting y is attributed half to (0, y) and half to (1, y), which is
/// unbiased under fair-coin settings; symmetrically for wing A.
struct EfficiencyEstimate {
  double gamma_hat = 0.0;
  std::array<std::array<double, 4>, 2> rates{};
  std::string_view estimator = kGammaEstimator;
};

/// Throws when a setting pair has no pairs.
EfficiencyEstimate estimate_gamma(const PairingResult& result);

struct VerdictLine {
  double limit = 2.0;
  bool violated = false;
};

struct AnalysisReport {
  ChshSummary summary;
  EfficiencyEstimate efficiency;
  VerdictLine naive;
  VerdictLine detection_adjusted;
  VerdictLine coincidence_adjusted;
};

/// Verdicts for an observed S at a given efficiency: S > 2, S > detection
/// limit and S > coincidence limit.
AnalysisReport verdicts(const ChshSummary& summary, const EfficiencyEstimate& efficiency);

/// observed_correlations on the pairs, estimate_gamma, then verdicts.
AnalysisReport analyze(const PairingResult& result);

/// One NDJSON object describing the report.
std::string format_verdict_json(const AnalysisReport& report, const PairingResult& result);

/// Timed stream for clocked runs: emission j happens at j * period_ns and
/// each detected particle is recorded at that time plus a jitter drawn
/// uniformly from [0, jitter_ns) with an Rng seeded by `seed`. Undetected
/// particles leave no event.
EventStream stream_from_runs(const std::vector<lhv::TernaryRun>& runs, std::int64_t period_ns,
                             std::int64_t jitter_ns, RngSeed seed);
EventStream stream_from_runs(const std::vector<ObservedRun>& runs, std::int64_t period_ns, std::int64_t jitter_ns,
                             RngSeed seed);

}  // namespace bellkit::events
