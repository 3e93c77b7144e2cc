#include "abkb/charact.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <tuple>

#include "abkb/log.hpp"

namespace abkb {

namespace {

std::string describe(const TargetDemand& d) {
    return "(class " + std::to_string(d.distance_class) + ", bin " + std::to_string(d.angle_bin) +
           ")";
}

std::string dropped_message(const std::vector<TargetDemand>& dropped) {
    std::string msg = "no remaining demand can be placed; dropped";
    for (const auto& d : dropped) msg += " " + describe(d);
    return msg;
}

}  // namespace

const char* to_string(Phase phase) noexcept {
    switch (phase) {
        case Phase::initial: return "initial";
        case Phase::refining: return "refining";
        case Phase::complete: return "complete";
    }
    return "unknown";
}

ProtocolStall::ProtocolStall(std::vector<TargetDemand> dropped)
    : Error(dropped_message(dropped)), dropped_(std::move(dropped)) {}

std::vector<TargetDemand> seed_initial_queue(std::uint64_t seed) {
    std::vector<TargetDemand> demands;
    demands.reserve(kDistanceClasses * kSeedsPerClass);
    int next_bin = 0;
    for (int k = 0; k < kDistanceClasses; ++k) {
        for (int i = 0; i < kSeedsPerClass; ++i) {
            demands.push_back({k, next_bin, false, 0});
            next_bin = (next_bin + 1) % kAngleBins;
        }
    }
    Rng rng = make_rng(seed, 1);
    shuffle(std::span<TargetDemand>(demands), rng);
    return demands;
}

CharacterizationSession::CharacterizationSession(HexGrid grid, std::uint64_t seed)
    : grid_(std::move(grid)), seed_(seed), rng_(make_rng(seed, 2)) {
    const std::size_t n = grid_.size();
    double cx = 0.0;
    double cy = 0.0;
    for (const auto& p : grid_.positions()) {
        cx += p.center_x;
        cy += p.center_y;
    }
    start_key_ = grid_.nearest(cx / static_cast<double>(n), cy / static_cast<double>(n));
    current_key_ = start_key_;

    const double w = grid_.key_width();
    feasible_.assign(n * kDistanceClasses * kAngleBins, {});
    for (std::size_t from = 0; from < n; ++from) {
        for (std::size_t to = 0; to < n; ++to) {
            if (to == from) continue;
            const double d = distance_px(grid_.at(from), grid_.at(to));
            const int k = static_cast<int>(std::floor(d / w + 0.5));
            if (k < 1 || k >= kDistanceClasses) continue;
            const int bin = angle_bin(angle_deg(grid_.at(from), grid_.at(to)));
            feasible_[(from * kDistanceClasses + static_cast<std::size_t>(k)) * kAngleBins +
                      static_cast<std::size_t>(bin)]
                .push_back(to);
            realizable_[static_cast<std::size_t>(k)][static_cast<std::size_t>(bin)] = true;
        }
    }
    for (int bin = 0; bin < kAngleBins; ++bin) realizable_[0][static_cast<std::size_t>(bin)] = true;

    const auto seeded = seed_initial_queue(seed);
    queue_.assign(seeded.begin(), seeded.end());
}

const std::vector<std::size_t>& CharacterizationSession::candidates(std::size_t from,
                                                                    int distance_class,
                                                                    int bin) const {
    return feasible_[(from * kDistanceClasses + static_cast<std::size_t>(distance_class)) *
                         kAngleBins +
                     static_cast<std::size_t>(bin)];
}

bool CharacterizationSession::class_reachable(std::size_t from, const TargetDemand& demand) const {
    if (demand.distance_class == 0) return true;
    if (demand.strict_bin) return !candidates(from, demand.distance_class, demand.angle_bin).empty();
    for (int bin = 0; bin < kAngleBins; ++bin)
        if (!candidates(from, demand.distance_class, bin).empty()) return true;
    return false;
}

std::vector<SelectionEvent> CharacterizationSession::events() const {
    std::vector<SelectionEvent> out;
    for (const auto& entry : log_)
        if (const auto* e = std::get_if<SelectionEvent>(&entry)) out.push_back(*e);
    return out;
}

std::optional<std::size_t> CharacterizationSession::outstanding_target() const {
    if (!outstanding_) return std::nullopt;
    return outstanding_->target;
}

std::optional<TargetDemand> CharacterizationSession::outstanding_demand() const {
    if (!outstanding_) return std::nullopt;
    return outstanding_->demand;
}

void CharacterizationSession::issue(const TargetDemand& demand, std::size_t target) {
    outstanding_ = Outstanding{demand, target};
    ++presented_;
    ++issued_per_bin_[static_cast<std::size_t>(demand.angle_bin)];
    round_issued_ = true;
}

std::size_t CharacterizationSession::next_target(std::size_t from) {
    if (phase_ == Phase::complete) throw InvalidState("characterization session is complete");
    if (outstanding_) throw InvalidState("a target is already outstanding");
    if (from >= grid_.size()) throw InvalidArgument("current key is outside the grid");
    if (presented_ >= kTargetCap) throw InvalidState("target cap reached");

    std::vector<TargetDemand> dropped;
    while (!queue_.empty()) {
        TargetDemand demand = queue_.front();
        queue_.pop_front();

        if (demand.distance_class == 0) {
            issue(demand, from);
            return from;
        }

        // Direction preference: the demanded bin, then (for seeded demands)
        // the other reachable bins, least-issued and closest first.
        std::vector<int> bins;
        const int k = demand.distance_class;
        if (!candidates(from, k, demand.angle_bin).empty()) bins.push_back(demand.angle_bin);
        if (!demand.strict_bin) {
            std::vector<int> others;
            for (int bin = 0; bin < kAngleBins; ++bin)
                if (bin != demand.angle_bin && !candidates(from, k, bin).empty())
                    others.push_back(bin);
            std::sort(others.begin(), others.end(), [&](int x, int y) {
                const auto key = [&](int b) {
                    return std::tuple(issued_per_bin_[static_cast<std::size_t>(b)],
                                      bin_distance(b, demand.angle_bin), b);
                };
                return key(x) < key(y);
            });
            bins.insert(bins.end(), others.begin(), others.end());
        }

        if (bins.empty()) {
            if (demand.deferrals >= kMaxDeferrals) {
                warn("dropping infeasible demand " + describe(demand) + " after " +
                     std::to_string(kMaxDeferrals) + " deferrals");
                dropped.push_back(demand);
                dropped_.push_back(demand);
                continue;
            }
            ++demand.deferrals;
            const std::size_t pos =
                queue_.empty() ? 0 : 1 + static_cast<std::size_t>(uniform_index(rng_, queue_.size()));
            queue_.insert(queue_.begin() + static_cast<std::ptrdiff_t>(pos), demand);
            continue;
        }

        // Prefer landing keys from which the next moving demand stays placeable.
        const TargetDemand* upcoming = nullptr;
        for (const auto& d : queue_) {
            if (d.distance_class > 0) {
                upcoming = &d;
                break;
            }
        }
        int chosen_bin = bins.front();
        std::vector<std::size_t> pool;
        if (upcoming) {
            for (int bin : bins) {
                for (std::size_t key : candidates(from, k, bin))
                    if (class_reachable(key, *upcoming)) pool.push_back(key);
                if (!pool.empty()) {
                    chosen_bin = bin;
                    break;
                }
            }
        }
        if (pool.empty()) pool = candidates(from, k, chosen_bin);

        const std::size_t target = pool[static_cast<std::size_t>(uniform_index(rng_, pool.size()))];
        demand.angle_bin = chosen_bin;
        issue(demand, target);
        return target;
    }
    throw ProtocolStall(std::move(dropped));
}

double CharacterizationSession::movement_time_to(double t) const {
    double mt = t - last_success_time_;
    for (const auto& entry : log_) {
        if (const auto* p = std::get_if<PauseMarker>(&entry)) {
            const double lo = std::max(p->t0, last_success_time_);
            const double hi = std::min(p->t1, t);
            if (hi > lo) mt -= hi - lo;
        }
    }
    return mt;
}

void CharacterizationSession::record_selection(const SelectionEvent& event) {
    if (!outstanding_) throw InvalidState("no outstanding target to select");
    if (event.sequence_no != next_sequence_)
        throw InvalidState("event out of sequence: expected #" + std::to_string(next_sequence_) +
                           ", got #" + std::to_string(event.sequence_no));
    if (event.target_key != outstanding_->target)
        throw InvalidState("event targets a key other than the outstanding target");
    if (event.origin_key != current_key_)
        throw InvalidState("event origin differs from the last successful selection");
    if (event.clicked_key >= grid_.size()) throw InvalidArgument("clicked key is outside the grid");
    if (!std::isfinite(event.click_time) || event.click_time < last_event_time_)
        throw InvalidState("event out of sequence: click time goes backwards");
    const double mt = movement_time_to(event.click_time);
    if (!(mt > 0.0)) throw InvalidState("event out of sequence: nonpositive movement time");
    if (event.success != (event.clicked_key == event.target_key))
        throw InvalidState("event success flag disagrees with the clicked key");

    SelectionEvent stored = event;
    stored.demand = outstanding_->demand;
    stored.movement_time = mt;
    log_.emplace_back(stored);
    ++next_sequence_;
    last_event_time_ = event.click_time;

    if (!event.success) return;

    const KeyPosition& origin = grid_.at(event.origin_key);
    const KeyPosition& target = grid_.at(event.target_key);
    MovementSample sample;
    sample.distance = distance_px(origin, target);
    if (event.origin_key != event.target_key) sample.angle = angle_deg(origin, target);
    sample.movement_time = mt;
    sample.demanded_bin = stored.demand.angle_bin;
    sample.distance_class = stored.demand.distance_class;
    samples_.push_back(sample);
    represented_.push_back(false);

    current_key_ = event.target_key;
    last_success_time_ = event.click_time;
    outstanding_.reset();
}

void CharacterizationSession::record_pause(double t0, double t1) {
    if (!std::isfinite(t0) || !std::isfinite(t1) || t1 < t0)
        throw InvalidArgument("pause interval must satisfy t0 <= t1");
    if (t0 < last_event_time_) throw InvalidState("pause starts before the last recorded click");
    log_.emplace_back(PauseMarker{t0, t1});
    last_event_time_ = t1;
}

FitReport CharacterizationSession::fit() const {
    return fit_bins_detailed(samples_, grid_.key_width());
}

DirectionalFittsModel CharacterizationSession::model() const { return fit().model; }

std::vector<int> CharacterizationSession::weak_bins() const {
    std::vector<int> weak;
    if (samples_.empty()) {
        for (int bin = 0; bin < kAngleBins; ++bin) weak.push_back(bin);
        return weak;
    }
    const auto report = fit();
    for (int bin = 0; bin < kAngleBins; ++bin) {
        const auto& b = report.model.bin(bin);
        if (!b.fitted || b.n_samples < kMinBinSamples || b.r_squared <= kWeakR2)
            weak.push_back(bin);
    }
    return weak;
}

void CharacterizationSession::replace_queue(std::vector<TargetDemand> demands) {
    if (phase_ == Phase::complete) throw InvalidState("characterization session is complete");
    for (const auto& d : demands)
        if (d.distance_class < 0 || d.distance_class >= kDistanceClasses || d.angle_bin < 0 ||
            d.angle_bin >= kAngleBins || d.deferrals < 0)
            throw InvalidArgument("demand out of range " + describe(d));
    queue_.assign(demands.begin(), demands.end());
    round_issued_ = true;
}

void CharacterizationSession::complete() {
    phase_ = Phase::complete;
    queue_.clear();
    outstanding_.reset();
}

void CharacterizationSession::refine() {
    if (phase_ == Phase::complete) return;
    if (!queue_.empty()) throw InvalidState("refinement requires an exhausted queue");
    if (outstanding_) throw InvalidState("refinement requires no outstanding target");
    if (presented_ >= kTargetCap) {
        complete();
        return;
    }

    std::vector<TargetDemand> added;
    for (int bin : weak_bins()) {
        for (int k = 1; k < kDistanceClasses; ++k)
            if (realizable_[static_cast<std::size_t>(k)][static_cast<std::size_t>(bin)])
                added.push_back({k, bin, true, 0});
    }
    if (!samples_.empty()) {
        for (std::size_t idx : fit().outliers) {
            if (represented_[idx]) continue;
            represented_[idx] = true;
            const auto& s = samples_[idx];
            added.push_back({s.distance_class, s.bin(), true, 0});
        }
    }

    const auto room = static_cast<std::size_t>(kTargetCap - presented_);
    if (added.size() > room) added.resize(room);
    if (added.empty()) {
        complete();
        return;
    }
    shuffle(std::span<TargetDemand>(added), rng_);
    queue_.assign(added.begin(), added.end());
    phase_ = Phase::refining;
    round_issued_ = false;
}

std::optional<std::size_t> CharacterizationSession::transit_target() {
    // Refinement rounds often ask for one direction only. When nothing in the
    // queue can be placed from here, move to the nearest key from which the
    // head demand can, instead of burning its deferrals.
    if (phase_ != Phase::refining || queue_.empty()) return std::nullopt;
    for (const auto& d : queue_)
        if (class_reachable(current_key_, d)) return std::nullopt;
    const TargetDemand& head = queue_.front();
    const auto& here = grid_.at(current_key_);
    std::optional<std::size_t> best;
    double best_d = 0.0;
    for (std::size_t key = 0; key < grid_.size(); ++key) {
        if (key == current_key_ || !class_reachable(key, head)) continue;
        const double d = distance_px(here, grid_.at(key));
        if (!best || d < best_d) {
            best = key;
            best_d = d;
        }
    }
    if (!best) return std::nullopt;
    const int k = std::min(kDistanceClasses - 1,
                           static_cast<int>(std::floor(best_d / grid_.key_width() + 0.5)));
    issue({std::max(1, k), angle_bin(angle_deg(here, grid_.at(*best))), false, 0}, *best);
    return *best;
}

std::optional<std::size_t> CharacterizationSession::advance() {
    while (phase_ != Phase::complete) {
        if (outstanding_) return outstanding_->target;
        if (presented_ >= kTargetCap) {
            complete();
            break;
        }
        if (!queue_.empty()) {
            if (auto transit = transit_target()) return *transit;
            try {
                return next_target(current_key_);
            } catch (const ProtocolStall&) {
                // queue is spent; fall through to refinement
            }
        }
        if (!round_issued_) {
            warn("refinement round could not place any target; completing");
            complete();
            break;
        }
        refine();
    }
    return std::nullopt;
}

SelectionEvent CharacterizationSession::click(std::size_t clicked_key, double t) {
    if (phase_ == Phase::complete) throw InvalidState("characterization session is complete");
    if (!advance()) throw InvalidState("characterization session is complete");
    SelectionEvent event;
    event.sequence_no = next_sequence_;
    event.demand = outstanding_->demand;
    event.target_key = outstanding_->target;
    event.origin_key = current_key_;
    event.clicked_key = clicked_key;
    event.click_time = t;
    event.success = clicked_key == outstanding_->target;
    record_selection(event);
    const auto stored = std::get<SelectionEvent>(log_.back());
    advance();
    return stored;
}

// ---------------------------------------------------------------------------
// NDJSON event log

namespace {

nlohmann::json key_json(const HexGrid& grid, std::size_t key) {
    const auto& p = grid.at(key);
    return {{"row", p.row}, {"col", p.col}};
}

std::size_t key_from(const HexGrid& grid, const nlohmann::json& doc) {
    return grid.index_of(doc.at("row").get<int>(), doc.at("col").get<int>());
}

}  // namespace

std::string log_header_line(const HexGrid& grid, std::uint64_t seed) {
    nlohmann::json header = {{"version", kLogVersion}, {"seed", seed}, {"grid", grid_to_json(grid)}};
    return header.dump();
}

std::string event_to_line(const CharacterizationSession& session, const LogEntry& entry) {
    nlohmann::json doc;
    if (const auto* e = std::get_if<SelectionEvent>(&entry)) {
        const auto& grid = session.grid();
        doc = {{"type", "click"},
               {"seq", e->sequence_no},
               {"demand",
                {{"distance_class", e->demand.distance_class}, {"angle_bin", e->demand.angle_bin}}},
               {"target", key_json(grid, e->target_key)},
               {"origin", key_json(grid, e->origin_key)},
               {"clicked", key_json(grid, e->clicked_key)},
               {"t", e->click_time},
               {"mt", e->movement_time},
               {"success", e->success}};
    } else {
        const auto& p = std::get<PauseMarker>(entry);
        doc = {{"type", "pause"}, {"t0", p.t0}, {"t1", p.t1}};
    }
    return doc.dump();
}

std::string export_log(const CharacterizationSession& session) {
    std::string out = log_header_line(session.grid(), session.seed());
    out += '\n';
    for (const auto& entry : session.log()) {
        out += event_to_line(session, entry);
        out += '\n';
    }
    return out;
}

CharacterizationSession import_log(std::string_view document) {
    std::istringstream in{std::string(document)};
    std::string line;
    std::size_t line_no = 0;

    auto parse = [&](const std::string& text) {
        try {
            return nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
        }
    };

    std::optional<CharacterizationSession> session;
    bool warned_foreign = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const auto doc = parse(line);
        try {
            if (!session) {
                if (!doc.is_object() || !doc.contains("version") || !doc.contains("seed") ||
                    !doc.contains("grid"))
                    throw ParseError(line_no, "expected header {version, seed, grid}");
                if (doc.at("version").get<int>() != kLogVersion)
                    throw ParseError(line_no, "unsupported log version");
                session.emplace(grid_from_json(doc.at("grid")), doc.at("seed").get<std::uint64_t>());
                continue;
            }
            const auto type = doc.at("type").get<std::string>();
            if (type == "pause") {
                session->record_pause(doc.at("t0").get<double>(), doc.at("t1").get<double>());
                continue;
            }
            if (type != "click") throw ParseError(line_no, "unknown entry type '" + type + "'");

            const HexGrid& grid = session->grid();
            SelectionEvent event;
            event.sequence_no = doc.at("seq").get<std::uint64_t>();
            event.demand.distance_class = doc.at("demand").at("distance_class").get<int>();
            event.demand.angle_bin = doc.at("demand").at("angle_bin").get<int>();
            event.target_key = key_from(grid, doc.at("target"));
            event.origin_key = key_from(grid, doc.at("origin"));
            event.clicked_key = key_from(grid, doc.at("clicked"));
            event.click_time = doc.at("t").get<double>();
            event.success = doc.at("success").get<bool>();
            if (event.demand.distance_class < 0 || event.demand.distance_class >= kDistanceClasses ||
                event.demand.angle_bin < 0 || event.demand.angle_bin >= kAngleBins)
                throw ParseError(line_no, "demand out of range");

            session->advance();
            const bool matches = session->outstanding_ &&
                                 session->outstanding_->target == event.target_key &&
                                 session->current_key_ == event.origin_key;
            if (!matches) {
                // A log written by another protocol instance: take its targets as given.
                if (!warned_foreign) {
                    warn("log diverges from the seeded protocol at line " + std::to_string(line_no) +
                         "; replaying recorded targets verbatim");
                    warned_foreign = true;
                }
                if (!session->outstanding_) ++session->presented_;
                session->outstanding_ =
                    CharacterizationSession::Outstanding{event.demand, event.target_key};
                session->current_key_ = event.origin_key;
                if (session->phase_ == Phase::complete) session->phase_ = Phase::refining;
            }
            session->record_selection(event);
            const auto& stored = std::get<SelectionEvent>(session->log_.back());
            if (doc.contains("mt") && doc.at("mt").get<double>() != stored.movement_time &&
                std::abs(doc.at("mt").get<double>() - stored.movement_time) > 1e-9)
                throw ParseError(line_no, "recorded mt disagrees with click times");
        } catch (const ParseError&) {
            throw;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, std::string("malformed entry: ") + e.what());
        } catch (const Error& e) {
            throw ParseError(line_no, e.what());
        }
    }
    if (!session) throw ParseError(line_no + 1, "missing header line");
    if (!warned_foreign) session->advance();
    return std::move(*session);
}

}  // namespace abkb
