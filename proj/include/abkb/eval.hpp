#pragma once

// Simulated users, transcription trials and text-entry metrics.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "abkb/charact.hpp"
#include "abkb/fitts.hpp"
#include "abkb/layout.hpp"

namespace abkb {

inline constexpr int kItrTargets = kAlphabetSize;
inline constexpr double kCharsPerWord = 5.0;

struct SimulatedUser {
    std::string name;
    DirectionalFittsModel model;
    double mt_noise_sd = 0.0;  ///< s, Gaussian, truncated at 0
    double miss_rate = 0.0;    ///< per selection attempt
    std::uint64_t seed = 0;

    void validate() const;
};

/// {name, model, mt_noise_sd, miss_rate, seed}. `model` is either a full
/// model document or {"type": "generic"} / {"type": "anisotropic", a,
/// b_vertical, horizontal_ratio}, with optional key_width_px (default 130).
SimulatedUser user_from_json(const nlohmann::json& doc);
nlohmann::json user_to_json(const SimulatedUser& user);

struct Keystroke {
    int target = 0;                 ///< symbol index
    std::optional<int> selected;    ///< empty when a blank key was hit
    double movement_time = 0.0;     ///< s
    std::size_t origin_key = 0;
    std::size_t target_key = 0;
    bool first_attempt = true;
};

struct TranscriptionTrial {
    std::string prompt;             ///< normalized
    std::vector<Keystroke> keystrokes;
    double total_time = 0.0;        ///< sum of movement times
};

/// Key the cursor rests on before the first keystroke: the symbol key
/// nearest the centroid of the layout's symbol keys.
std::size_t start_key(const KeyboardLayout& layout);

/// Types every prompt on `layout`. Each attempt takes the predicted time plus
/// Gaussian noise; with probability miss_rate it lands on a random
/// neighbouring symbol key and the user tries again from there.
std::vector<TranscriptionTrial> simulate_transcription(const SimulatedUser& user,
                                                       const KeyboardLayout& layout,
                                                       std::span<const std::string> prompts);

struct EvalReport {
    std::string layout_ref;
    std::string user_ref;
    std::size_t n_trials = 0;
    double accuracy = 0.0;   ///< percent of targets hit on the first attempt
    double wpm = 0.0;
    double wpm_star = 0.0;   ///< keystrokes to or from SPACE removed
    double itr = 0.0;        ///< bits/min
};

/// Metrics over the trials. Throws InvalidArgument on an empty list and
/// DegenerateInput when no time elapsed.
EvalReport compute_metrics(std::span<const TranscriptionTrial> trials, const KeyboardLayout& layout);

/// Wolpaw bits/selection times the selection rate, floored at 0.
double wolpaw_itr(int n_targets, double p, double selections_per_minute);

nlohmann::json report_to_json(const EvalReport& report);
std::string report_csv_header();
std::string report_csv_row(const EvalReport& report);

nlohmann::json trial_to_json(const TranscriptionTrial& trial, const KeyboardLayout& layout);

/// Drives a characterization session with the simulated user until it
/// completes. Misses land on a random grid neighbour of the target.
CharacterizationSession simulate_characterization(const SimulatedUser& user, const HexGrid& grid,
                                                  std::uint64_t session_seed);

}  // namespace abkb
