#pragma once

// Movement-characterization protocol. The user clicks a sequence of
// highlighted keys on the honeycomb; each successful click after the previous
// success yields one movement sample. Targets are drawn from a queue of
// (distance class, direction bin) demands: 225 seeded up front, then
// refinement rounds for weak bins and outliers, capped at 400 targets.

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "abkb/errors.hpp"
#include "abkb/fitts.hpp"
#include "abkb/hexgeom.hpp"
#include "abkb/rng.hpp"

namespace abkb {

inline constexpr int kDistanceClasses = 9;       // 0..8 key-width hops
inline constexpr int kSeedsPerClass = 25;
inline constexpr int kTargetCap = 400;
inline constexpr int kMinBinSamples = 10;
inline constexpr double kWeakR2 = 0.25;          // R^2 <= this is weak
inline constexpr int kMaxDeferrals = 3;
inline constexpr int kLogVersion = 1;

struct TargetDemand {
    int distance_class = 0;
    int angle_bin = 0;
    /// Refinement demands exist to fill one bin and never change direction.
    /// Seeded demands may be issued in another feasible bin when theirs is
    /// unreachable from the current key.
    bool strict_bin = false;
    int deferrals = 0;
};

struct SelectionEvent {
    std::uint64_t sequence_no = 0;
    TargetDemand demand;               ///< as issued (actual direction bin)
    std::size_t target_key = 0;
    std::size_t origin_key = 0;
    std::size_t clicked_key = 0;
    double click_time = 0.0;           ///< s since session start
    double movement_time = 0.0;        ///< s since previous success, pauses excluded
    bool success = false;
};

struct PauseMarker {
    double t0 = 0.0;
    double t1 = 0.0;
};

using LogEntry = std::variant<SelectionEvent, PauseMarker>;

enum class Phase { initial, refining, complete };

const char* to_string(Phase phase) noexcept;

class ProtocolStall : public Error {
public:
    explicit ProtocolStall(std::vector<TargetDemand> dropped);
    const std::vector<TargetDemand>& dropped() const noexcept { return dropped_; }

private:
    std::vector<TargetDemand> dropped_;
};

/// 25 demands per distance class, bins assigned round-robin, shuffled.
std::vector<TargetDemand> seed_initial_queue(std::uint64_t seed);

class CharacterizationSession {
public:
    CharacterizationSession(HexGrid grid, std::uint64_t seed);

    const HexGrid& grid() const noexcept { return grid_; }
    std::uint64_t seed() const noexcept { return seed_; }
    Phase phase() const noexcept { return phase_; }
    int presented_count() const noexcept { return presented_; }
    const std::deque<TargetDemand>& queue() const noexcept { return queue_; }
    const std::vector<LogEntry>& log() const noexcept { return log_; }
    std::vector<SelectionEvent> events() const;
    const std::vector<MovementSample>& samples() const noexcept { return samples_; }
    const std::vector<TargetDemand>& dropped() const noexcept { return dropped_; }

    /// Key of the last successful selection (the grid center before the first).
    std::size_t current_key() const noexcept { return current_key_; }
    std::optional<std::size_t> outstanding_target() const;
    std::optional<TargetDemand> outstanding_demand() const;

    /// Issues a target for the head demand as seen from `current_key`,
    /// deferring or dropping demands that cannot be placed. Throws
    /// ProtocolStall when the queue runs out without issuing a target.
    std::size_t next_target(std::size_t current_key);

    /// Appends an event for the outstanding target. Throws InvalidState when
    /// the event is out of sequence or does not belong to that target.
    void record_selection(const SelectionEvent& event);

    void record_pause(double t0, double t1);

    /// Fits the bins and queues demands for weak bins and unrepeated
    /// outliers; completes the session when nothing is left to ask for.
    void refine();

    /// Makes sure a target is outstanding, refining when the queue is spent.
    /// Returns the target, or nothing once the session is complete.
    std::optional<std::size_t> advance();

    /// Builds the event for a click on `clicked_key` at time `t`, records it
    /// and advances. Returns the recorded event.
    SelectionEvent click(std::size_t clicked_key, double t);

    FitReport fit() const;
    DirectionalFittsModel model() const;

    /// Replaces the pending demands (scripted protocols and tests). Throws
    /// InvalidArgument on out-of-range demands and InvalidState once complete.
    void replace_queue(std::vector<TargetDemand> demands);

    /// Bins that still block completion (too few samples or weak fit).
    std::vector<int> weak_bins() const;

private:
    struct Outstanding {
        TargetDemand demand;
        std::size_t target = 0;
    };

    const std::vector<std::size_t>& candidates(std::size_t from, int distance_class,
                                               int bin) const;
    bool class_reachable(std::size_t from, const TargetDemand& demand) const;
    std::optional<std::size_t> transit_target();
    void issue(const TargetDemand& demand, std::size_t target);
    double movement_time_to(double t) const;
    void complete();

    friend CharacterizationSession import_log(std::string_view document);

    HexGrid grid_;
    std::uint64_t seed_;
    Rng rng_;
    std::size_t start_key_ = 0;
    // feasible_[(from * kDistanceClasses + k) * kAngleBins + bin]
    std::vector<std::vector<std::size_t>> feasible_;
    std::array<std::array<bool, kAngleBins>, kDistanceClasses> realizable_{};

    Phase phase_ = Phase::initial;
    int presented_ = 0;
    std::deque<TargetDemand> queue_;
    std::vector<LogEntry> log_;
    std::vector<MovementSample> samples_;
    std::vector<TargetDemand> dropped_;
    std::vector<bool> represented_;      // per sample: outlier already re-queued
    std::array<int, kAngleBins> issued_per_bin_{};
    std::optional<Outstanding> outstanding_;
    std::size_t current_key_ = 0;
    double last_success_time_ = 0.0;
    double last_event_time_ = 0.0;
    std::uint64_t next_sequence_ = 0;
    bool round_issued_ = true;
};

/// Newline-delimited JSON: a header {version, seed, grid}, then one line per
/// click or pause, in order.
std::string export_log(const CharacterizationSession& session);

/// Rebuilds a session by re-running the protocol with the logged seed and
/// feeding it the logged clicks and pauses. Throws ParseError with the
/// offending line number on malformed input.
CharacterizationSession import_log(std::string_view document);

std::string event_to_line(const CharacterizationSession& session, const LogEntry& entry);
std::string log_header_line(const HexGrid& grid, std::uint64_t seed);

}  // namespace abkb
