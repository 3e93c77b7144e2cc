#include "abkb/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "abkb/errors.hpp"
#include "abkb/hash.hpp"
#include "abkb/log.hpp"
#include "abkb/rng.hpp"

namespace abkb {

namespace {

// Prompt i of a transcription run draws from its own stream.
constexpr std::uint64_t kPromptStreamBase = 1000;

std::string format_number(double x) {
    std::ostringstream out;
    out.precision(6);
    out << std::fixed << x;
    return out.str();
}

std::string csv_escape(const std::string& text) {
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

void SimulatedUser::validate() const {
    if (!(mt_noise_sd >= 0.0) || !std::isfinite(mt_noise_sd))
        throw InvalidArgument("mt_noise_sd must be finite and >= 0");
    if (!(miss_rate >= 0.0 && miss_rate < 1.0)) throw InvalidArgument("miss_rate must lie in [0, 1)");
    if (!model.any_fitted()) throw InvalidArgument("simulated user needs a fitted model");
}

SimulatedUser user_from_json(const nlohmann::json& doc) {
    try {
        SimulatedUser user;
        user.name = doc.value("name", std::string("user"));
        user.mt_noise_sd = doc.value("mt_noise_sd", 0.0);
        user.miss_rate = doc.value("miss_rate", 0.0);
        user.seed = doc.at("seed").get<std::uint64_t>();
        const auto& m = doc.at("model");
        if (m.contains("bins")) {
            user.model = model_from_json(m);
        } else {
            const auto type = m.at("type").get<std::string>();
            const double w = m.value("key_width_px", 130.0);
            if (type == "generic")
                user.model = generic_model(w);
            else if (type == "anisotropic")
                user.model = anisotropic_model(w, m.at("a").get<double>(), m.at("b_vertical").get<double>(),
                                               m.at("horizontal_ratio").get<double>());
            else
                throw InvalidArgument("user.model.type must be 'generic' or 'anisotropic'");
        }
        user.validate();
        return user;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed user document: ") + e.what());
    }
}

nlohmann::json user_to_json(const SimulatedUser& user) {
    return {{"name", user.name},
            {"model", model_to_json(user.model)},
            {"mt_noise_sd", user.mt_noise_sd},
            {"miss_rate", user.miss_rate},
            {"seed", user.seed}};
}

std::size_t start_key(const KeyboardLayout& layout) {
    double cx = 0.0;
    double cy = 0.0;
    for (int s = 0; s < kAlphabetSize; ++s) {
        cx += layout.position_of(s).center_x;
        cy += layout.position_of(s).center_y;
    }
    cx /= kAlphabetSize;
    cy /= kAlphabetSize;
    std::size_t best = layout.key_of(0);
    double best_d = std::numeric_limits<double>::infinity();
    // Ties go to the lower grid index.
    std::array<std::size_t, kAlphabetSize> keys = layout.keys();
    std::sort(keys.begin(), keys.end());
    for (std::size_t key : keys) {
        const auto& p = layout.grid().at(key);
        const double d = std::hypot(p.center_x - cx, p.center_y - cy);
        if (d < best_d) {
            best_d = d;
            best = key;
        }
    }
    return best;
}

std::vector<TranscriptionTrial> simulate_transcription(const SimulatedUser& user,
                                                       const KeyboardLayout& layout,
                                                       std::span<const std::string> prompts) {
    user.validate();
    const HexGrid& grid = layout.grid();
    const std::size_t home = start_key(layout);
    std::vector<TranscriptionTrial> trials;
    for (std::size_t index = 0; index < prompts.size(); ++index) {
        TranscriptionTrial trial;
        trial.prompt = normalize_line(prompts[index]);
        if (trial.prompt.empty()) {
            warn("skipping prompt " + std::to_string(index) + ": no characters from the alphabet");
            continue;
        }
        Rng rng = make_rng(user.seed, kPromptStreamBase + index);
        std::size_t cursor = home;
        for (char c : trial.prompt) {
            const int target = symbol_index(c);
            const std::size_t target_key = layout.key_of(target);
            bool first = true;
            while (true) {
                Keystroke k;
                k.target = target;
                k.origin_key = cursor;
                k.target_key = target_key;
                k.first_attempt = first;
                const double predicted = movement_cost(user.model, grid.at(cursor), grid.at(target_key));
                const double noise = user.mt_noise_sd > 0.0 ? user.mt_noise_sd * standard_normal(rng) : 0.0;
                k.movement_time = std::max(0.0, predicted + noise);
                std::size_t landed = target_key;
                if (user.miss_rate > 0.0 && uniform_unit(rng) < user.miss_rate) {
                    std::vector<std::size_t> around;
                    for (std::size_t n : grid.neighbors(target_key))
                        if (layout.symbol_at(n)) around.push_back(n);
                    if (!around.empty())
                        landed = around[static_cast<std::size_t>(uniform_index(rng, around.size()))];
                    else if (auto all = grid.neighbors(target_key); !all.empty())
                        landed = all[static_cast<std::size_t>(uniform_index(rng, all.size()))];
                }
                k.selected = layout.symbol_at(landed);
                trial.total_time += k.movement_time;
                trial.keystrokes.push_back(k);
                cursor = landed;
                first = false;
                if (landed == target_key) break;
            }
        }
        trials.push_back(std::move(trial));
    }
    return trials;
}

double wolpaw_itr(int n_targets, double p, double selections_per_minute) {
    if (n_targets < 2) throw InvalidArgument("Wolpaw ITR needs at least two targets");
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("accuracy must lie in [0, 1]");
    if (!(selections_per_minute >= 0.0)) throw InvalidArgument("selection rate must be >= 0");
    const double n = n_targets;
    double bits = std::log2(n);
    if (p > 0.0) bits += p * std::log2(p);
    if (p < 1.0) bits += (1.0 - p) * std::log2((1.0 - p) / (n - 1.0));
    return std::max(0.0, bits * selections_per_minute);
}

EvalReport compute_metrics(std::span<const TranscriptionTrial> trials, const KeyboardLayout& layout) {
    if (trials.empty()) throw InvalidArgument("no trials to score");
    const std::size_t space_key = layout.key_of(kSpaceIndex);
    std::size_t targets = 0;
    std::size_t first_hits = 0;
    std::size_t keystrokes = 0;
    double seconds = 0.0;
    std::size_t star_keystrokes = 0;
    double star_seconds = 0.0;
    for (const auto& trial : trials) {
        for (const auto& k : trial.keystrokes) {
            ++keystrokes;
            seconds += k.movement_time;
            if (k.first_attempt) {
                ++targets;
                if (k.selected && *k.selected == k.target) ++first_hits;
            }
            if (k.target != kSpaceIndex && k.origin_key != space_key) {
                ++star_keystrokes;
                star_seconds += k.movement_time;
            }
        }
    }
    if (!(seconds > 0.0)) throw DegenerateInput("trials took no time; rates are undefined");

    EvalReport report;
    report.layout_ref = std::string(to_string(layout.kind())) + ":fnv1a64:" +
                        fnv1a64_hex(layout_to_json(layout).dump());
    report.n_trials = trials.size();
    const double p = targets ? static_cast<double>(first_hits) / static_cast<double>(targets) : 0.0;
    report.accuracy = 100.0 * p;
    const double minutes = seconds / 60.0;
    report.wpm = static_cast<double>(keystrokes) / minutes / kCharsPerWord;
    report.wpm_star =
        star_seconds > 0.0 ? static_cast<double>(star_keystrokes) / (star_seconds / 60.0) / kCharsPerWord : 0.0;
    report.itr = wolpaw_itr(kItrTargets, p, static_cast<double>(keystrokes) / minutes);
    return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
    return {{"layout", report.layout_ref},
            {"user", report.user_ref},
            {"n_trials", report.n_trials},
            {"accuracy_pct", report.accuracy},
            {"wpm", report.wpm},
            {"wpm_star", report.wpm_star},
            {"itr_bits_per_min", report.itr}};
}

std::string report_csv_header() {
    return "layout,user,n_trials,accuracy_pct,wpm,wpm_star,itr_bits_per_min";
}

std::string report_csv_row(const EvalReport& r) {
    return csv_escape(r.layout_ref) + "," + csv_escape(r.user_ref) + "," + std::to_string(r.n_trials) +
           "," + format_number(r.accuracy) + "," + format_number(r.wpm) + "," +
           format_number(r.wpm_star) + "," + format_number(r.itr);
}

nlohmann::json trial_to_json(const TranscriptionTrial& trial, const KeyboardLayout& layout) {
    nlohmann::json keys = nlohmann::json::array();
    for (const auto& k : trial.keystrokes) {
        const auto& o = layout.grid().at(k.origin_key);
        const auto& t = layout.grid().at(k.target_key);
        keys.push_back({{"target", std::string(1, symbol_char(k.target))},
                        {"selected", k.selected ? nlohmann::json(std::string(1, symbol_char(*k.selected)))
                                                : nlohmann::json(nullptr)},
                        {"mt", k.movement_time},
                        {"origin", {{"row", o.row}, {"col", o.col}}},
                        {"target_key", {{"row", t.row}, {"col", t.col}}},
                        {"first_attempt", k.first_attempt}});
    }
    return {{"prompt", trial.prompt}, {"keystrokes", std::move(keys)}, {"total_time", trial.total_time}};
}

}  // namespace abkb
