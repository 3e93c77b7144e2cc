#include "abkb/service.hpp"

#include <filesystem>
#include <mutex>
#include <random>
#include <sstream>
#include <vector>

#include "abkb/charact.hpp"
#include "abkb/corpus.hpp"
#include "abkb/errors.hpp"
#include "abkb/eval.hpp"
#include "abkb/fileio.hpp"
#include "abkb/hash.hpp"
#include "abkb/layout.hpp"
#include "abkb/log.hpp"

// After Eigen: resolv.h, pulled in by httplib, defines a macro named _res.
#include <httplib.h>

namespace abkb {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Raised inside handlers; becomes an error reply with the given status.
struct HttpError : std::runtime_error {
    HttpError(int status, const std::string& message) : std::runtime_error(message), status(status) {}
    int status;
};

HttpReply json_reply(int status, const json& body) { return {status, body.dump(), "application/json"}; }

HttpReply error_reply(int status, const std::string& message) {
    return json_reply(status, json{{"error", message}});
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::string part;
    std::istringstream in(path.substr(0, path.find('?')));
    while (std::getline(in, part, '/'))
        if (!part.empty()) parts.push_back(part);
    return parts;
}

bool valid_id(const std::string& id) {
    if (id.empty() || id.size() > 64) return false;
    for (char c : id)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
    return true;
}

const json& field(const json& body, const char* name) {
    if (!body.contains(name)) throw HttpError(400, std::string(name) + ": required");
    return body.at(name);
}

double number_field(const json& body, const char* name) {
    const auto& v = field(body, name);
    if (!v.is_number()) throw HttpError(400, std::string(name) + ": must be a number");
    return v.get<double>();
}

std::uint64_t seed_field(const json& body, const char* name) {
    const auto& v = field(body, name);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        throw HttpError(400, std::string(name) + ": must be a nonnegative integer");
    return v.get<std::uint64_t>();
}

std::string string_field(const json& body, const char* name) {
    const auto& v = field(body, name);
    if (!v.is_string()) throw HttpError(400, std::string(name) + ": must be a string");
    return v.get<std::string>();
}

// Accepts "A".."Z" (any case), " " or "SPACE".
std::optional<int> symbol_field(const json& body, const char* name, bool nullable) {
    const auto& v = field(body, name);
    if (nullable && v.is_null()) return std::nullopt;
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (s == "SPACE" || s == "space") return kSpaceIndex;
        if (s.size() == 1) {
            const int idx = symbol_index(static_cast<char>(std::toupper(static_cast<unsigned char>(s[0]))));
            if (idx >= 0) return idx;
        }
    }
    throw HttpError(400, std::string(name) + ": must be a letter A-Z or SPACE");
}

json per_bin_r2(const CharacterizationSession& session) {
    json out = json::array();
    if (session.samples().empty()) {
        for (int k = 0; k < kAngleBins; ++k) out.push_back(nullptr);
        return out;
    }
    const auto model = session.model();
    for (int k = 0; k < kAngleBins; ++k) {
        const auto& b = model.bin(k);
        out.push_back(b.fitted ? json(b.r_squared) : json(nullptr));
    }
    return out;
}

// Drops an unterminated final line left by a crash mid-append; it was never
// acknowledged because replies wait for the sync.
std::string recover_log(const std::string& path) {
    std::string text = read_text(path);
    if (!text.empty() && text.back() != '\n') {
        const auto cut = text.find_last_of('\n');
        text.resize(cut == std::string::npos ? 0 : cut + 1);
        warn("discarding a partial trailing line in " + path);
        write_atomic(path, text);
    }
    return text;
}

struct TypedKey {
    int target = 0;
    std::optional<int> selected;
    double t = 0.0;
};

json typed_key_json(const TypedKey& k) {
    return {{"type", "keystroke"},
            {"char_target", std::string(1, symbol_char(k.target))},
            {"char_selected",
             k.selected ? json(std::string(1, symbol_char(*k.selected))) : json(nullptr)},
            {"t", k.t}};
}

}  // namespace

struct Service::Impl {
    struct SessionState {
        std::mutex mu;
        CharacterizationSession session;
        std::string log_path;
        std::size_t persisted = 0;
        std::optional<std::int64_t> last_client_seq;
        std::string last_reply;
        explicit SessionState(CharacterizationSession s) : session(std::move(s)) {}
    };

    struct TrialState {
        std::mutex mu;
        std::string layout_id;
        KeyboardLayout layout;
        std::string prompt;
        std::vector<TypedKey> keys;
        std::optional<std::string> result;
        std::string path;
    };

    ServiceOptions options;
    fs::path root;
    std::mutex registry_mu;
    std::map<std::string, std::shared_ptr<SessionState>> sessions;
    std::map<std::string, std::shared_ptr<TrialState>> trials;
    std::mutex id_mu;
    std::mt19937_64 id_rng{std::random_device{}()};
    httplib::Server server;

    explicit Impl(ServiceOptions opts) : options(std::move(opts)), root(options.data_dir) {
        for (const char* sub : {"sessions", "models", "layouts", "trials"}) fs::create_directories(root / sub);
        replay();
    }

    std::string new_id() {
        std::lock_guard lock(id_mu);
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(id_rng()));
        return buf;
    }

    std::string session_path(const std::string& id) const { return (root / "sessions" / (id + ".ndjson")).string(); }
    std::string model_path(const std::string& id) const { return (root / "models" / (id + ".json")).string(); }
    std::string layout_path(const std::string& id) const { return (root / "layouts" / (id + ".json")).string(); }
    std::string trial_path(const std::string& id) const { return (root / "trials" / (id + ".ndjson")).string(); }

    void replay() {
        for (const auto& entry : fs::directory_iterator(root / "sessions")) {
            if (entry.path().extension() != ".ndjson") continue;
            const std::string id = entry.path().stem().string();
            try {
                auto state = std::make_shared<SessionState>(import_log(recover_log(entry.path().string())));
                state->log_path = entry.path().string();
                state->persisted = state->session.log().size();
                if (state->session.phase() == Phase::complete && !fs::exists(model_path(id)))
                    write_model(id, state->session);
                sessions.emplace(id, std::move(state));
            } catch (const std::exception& e) {
                warn("cannot restore session " + id + ": " + e.what());
            }
        }
        for (const auto& entry : fs::directory_iterator(root / "trials")) {
            if (entry.path().extension() != ".ndjson") continue;
            const std::string id = entry.path().stem().string();
            try {
                restore_trial(id, entry.path().string());
            } catch (const std::exception& e) {
                warn("cannot restore trial " + id + ": " + e.what());
            }
        }
    }

    void restore_trial(const std::string& id, const std::string& path) {
        std::istringstream in(recover_log(path));
        std::string line;
        auto state = std::make_shared<TrialState>();
        state->path = path;
        bool header = true;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto doc = json::parse(line);
            if (header) {
                state->layout_id = doc.at("layout_id").get<std::string>();
                state->prompt = doc.at("prompt").get<std::string>();
                state->layout = layout_from_json(read_json(layout_path(state->layout_id)));
                header = false;
                continue;
            }
            const auto type = doc.at("type").get<std::string>();
            if (type == "keystroke") {
                state->keys.push_back({*symbol_field(doc, "char_target", false),
                                       symbol_field(doc, "char_selected", true), doc.at("t").get<double>()});
            } else if (type == "finish") {
                state->result = doc.at("reply").dump();
            }
        }
        if (header) throw Error("empty trial log");
        trials.emplace(id, std::move(state));
    }

    void write_model(const std::string& id, const CharacterizationSession& session) {
        write_atomic(model_path(id), json_document(model_to_json(session.model())));
    }

    std::shared_ptr<SessionState> find_session(const std::string& id) {
        std::lock_guard lock(registry_mu);
        auto it = sessions.find(id);
        if (it == sessions.end()) throw HttpError(404, "unknown session '" + id + "'");
        return it->second;
    }

    std::shared_ptr<TrialState> find_trial(const std::string& id) {
        std::lock_guard lock(registry_mu);
        auto it = trials.find(id);
        if (it == trials.end()) throw HttpError(404, "unknown trial '" + id + "'");
        return it->second;
    }

    // Appends the log entries not yet on disk. On failure the in-memory session
    // is rebuilt from the file so it never runs ahead of what was persisted.
    void persist(SessionState& state) {
        const auto& log = state.session.log();
        std::string lines;
        for (std::size_t i = state.persisted; i < log.size(); ++i)
            lines += event_to_line(state.session, log[i]) + "\n";
        if (lines.empty()) return;
        try {
            append_durable(state.log_path, lines);
        } catch (const std::exception& e) {
            state.session = import_log(recover_log(state.log_path));
            state.persisted = state.session.log().size();
            throw HttpError(500, std::string("could not persist event: ") + e.what());
        }
        state.persisted = log.size();
    }

    json progress(const CharacterizationSession& s) const {
        return {{"presented", s.presented_count()}, {"cap", kTargetCap}, {"per_bin_r2", per_bin_r2(s)}};
    }

    json target_json(const CharacterizationSession& s) const {
        const auto t = s.outstanding_target();
        return t ? key_ref_to_json(s.grid().at(*t)) : json(nullptr);
    }

    // --- sessions -----------------------------------------------------------

    HttpReply create_session(const json& body) {
        const std::uint64_t seed = seed_field(body, "seed");
        HexGrid grid = standard_grid();
        if (body.contains("grid") && !body.at("grid").is_null()) {
            try {
                grid = grid_from_json(body.at("grid"));
            } catch (const std::exception& e) {
                throw HttpError(400, std::string("grid: ") + e.what());
            }
        }
        auto state = std::make_shared<SessionState>(CharacterizationSession(grid, seed));
        const std::string id = new_id();
        state->log_path = session_path(id);
        write_atomic(state->log_path, log_header_line(grid, seed) + "\n");
        state->session.advance();
        json reply = {{"session_id", id},
                      {"first_target", target_json(state->session)},
                      {"progress", progress(state->session)}};
        {
            std::lock_guard lock(registry_mu);
            sessions.emplace(id, std::move(state));
        }
        return json_reply(201, reply);
    }

    HttpReply session_status(const std::string& id) {
        auto state = find_session(id);
        std::lock_guard lock(state->mu);
        const auto& s = state->session;
        return json_reply(200, {{"session_id", id},
                                {"phase", to_string(s.phase())},
                                {"status", s.phase() == Phase::complete ? "complete" : "active"},
                                {"next_target", target_json(s)},
                                {"events", s.events().size()},
                                {"samples", s.samples().size()},
                                {"progress", progress(s)}});
    }

    HttpReply session_log(const std::string& id) {
        auto state = find_session(id);
        std::lock_guard lock(state->mu);
        return {200, read_text(state->log_path), "application/x-ndjson"};
    }

    HttpReply click(const std::string& id, const json& body) {
        auto state = find_session(id);
        std::lock_guard lock(state->mu);
        std::optional<std::int64_t> client_seq;
        if (body.contains("client_seq") && !body.at("client_seq").is_null()) {
            if (!body.at("client_seq").is_number_integer())
                throw HttpError(400, "client_seq: must be an integer");
            client_seq = body.at("client_seq").get<std::int64_t>();
            if (state->last_client_seq) {
                if (*client_seq == *state->last_client_seq) return {200, state->last_reply, "application/json"};
                if (*client_seq < *state->last_client_seq)
                    throw HttpError(409, "client_seq: already superseded");
            }
        }
        auto& session = state->session;
        const auto& key = field(body, "clicked_key");
        if (!key.is_object() || !key.contains("row") || !key.contains("col") || !key.at("row").is_number_integer() ||
            !key.at("col").is_number_integer())
            throw HttpError(400, "clicked_key: must be {row, col} integers");
        const int row = key.at("row").get<int>();
        const int col = key.at("col").get<int>();
        if (!session.grid().contains(row, col)) throw HttpError(400, "clicked_key: not on the grid");
        const double t = number_field(body, "t");
        if (session.phase() == Phase::complete) throw HttpError(409, "session is complete");

        SelectionEvent event;
        try {
            event = session.click(session.grid().index_of(row, col), t);
        } catch (const InvalidState& e) {
            if (session.phase() == Phase::complete) throw HttpError(409, e.what());
            throw HttpError(400, std::string("t: ") + e.what());
        }
        persist(*state);
        if (session.phase() == Phase::complete) write_model(id, session);

        const json reply = {{"success", event.success},
                            {"seq", event.sequence_no},
                            {"next_target", target_json(session)},
                            {"phase", to_string(session.phase())},
                            {"progress", progress(session)}};
        state->last_reply = reply.dump();
        if (client_seq) state->last_client_seq = client_seq;
        return {200, state->last_reply, "application/json"};
    }

    HttpReply pause(const std::string& id, const json& body) {
        auto state = find_session(id);
        std::lock_guard lock(state->mu);
        const double t0 = number_field(body, "t0");
        const double t1 = number_field(body, "t1");
        if (state->session.phase() == Phase::complete) throw HttpError(409, "session is complete");
        try {
            state->session.record_pause(t0, t1);
        } catch (const Error& e) {
            throw HttpError(400, std::string("t0/t1: ") + e.what());
        }
        persist(*state);
        return {204, "", "application/json"};
    }

    HttpReply session_model(const std::string& id) {
        auto state = find_session(id);
        std::lock_guard lock(state->mu);
        if (state->session.phase() != Phase::complete)
            throw HttpError(409, "session is still running; the model is available once it completes");
        return {200, read_text(model_path(id)), "application/json"};
    }

    // --- layouts ------------------------------------------------------------

    DigraphMatrix corpus(const std::string& ref) const {
        std::string path;
        if (auto it = options.corpora.find(ref); it != options.corpora.end())
            path = it->second;
        else if (valid_id(ref))
            path = (root / "corpora" / (ref + ".txt")).string();
        if (path.empty() || !fs::exists(path)) throw HttpError(400, "corpus_ref: unknown corpus '" + ref + "'");
        return ingest_file(path);
    }

    HttpReply create_layout(const json& body) {
        const std::string kind_text = string_field(body, "kind");
        LayoutKind kind;
        try {
            kind = layout_kind_from_string(kind_text);
        } catch (const InvalidArgument& e) {
            throw HttpError(400, std::string("kind: ") + e.what());
        }
        const bool flip = body.value("flip", false);
        KeyboardLayout layout;
        if (kind == LayoutKind::qwerty) {
            layout = qwerty_layout();
        } else {
            const std::uint64_t seed = seed_field(body, "seed");
            const DigraphMatrix digraphs = corpus(string_field(body, "corpus_ref"));
            SolverParams params;
            if (body.contains("solver") && body.at("solver").is_object()) {
                const auto& s = body.at("solver");
                params.restarts = s.value("restarts", params.restarts);
                params.max_iters = s.value("max_iters", params.max_iters);
                params.tol = s.value("tol", params.tol);
            }
            DirectionalFittsModel model = generic_model(130.0);
            if (kind == LayoutKind::personalized) model = resolve_model(body);
            try {
                layout = generate_layout(kind, model, digraphs, standard_grid(), params, seed);
            } catch (const InvalidArgument& e) {
                throw HttpError(400, std::string("solver: ") + e.what());
            }
        }
        if (flip) layout = flip_vertical(layout);
        const std::string document = json_document(layout_to_json(layout));
        const std::string id = "L" + fnv1a64_hex(document);
        write_atomic(layout_path(id), document);
        return json_reply(200, {{"layout_id", id}, {"layout", json::parse(document)}});
    }

    DirectionalFittsModel resolve_model(const json& body) {
        if (body.contains("session_id") && !body.at("session_id").is_null()) {
            const std::string sid = string_field(body, "session_id");
            auto state = find_session(sid);
            std::lock_guard lock(state->mu);
            if (state->session.phase() != Phase::complete)
                throw HttpError(409, "session_id: session has not completed");
            return model_from_json(read_json(model_path(sid)));
        }
        if (body.contains("model_ref") && !body.at("model_ref").is_null()) {
            const std::string ref = string_field(body, "model_ref");
            if (!valid_id(ref) || !fs::exists(model_path(ref)))
                throw HttpError(404, "model_ref: unknown model '" + ref + "'");
            return model_from_json(read_json(model_path(ref)));
        }
        throw HttpError(400, "model_ref: personalized layouts need model_ref or session_id");
    }

    HttpReply get_layout(const std::string& id) {
        if (!valid_id(id) || !fs::exists(layout_path(id))) throw HttpError(404, "unknown layout '" + id + "'");
        return {200, read_text(layout_path(id)), "application/json"};
    }

    // --- trials -------------------------------------------------------------

    HttpReply create_trial(const json& body) {
        const std::string layout_id = string_field(body, "layout_id");
        if (!valid_id(layout_id) || !fs::exists(layout_path(layout_id)))
            throw HttpError(404, "layout_id: unknown layout '" + layout_id + "'");
        const std::string prompt = normalize_line(string_field(body, "prompt"));
        if (prompt.empty()) throw HttpError(400, "prompt: has no characters from A-Z or space");
        auto state = std::make_shared<TrialState>();
        state->layout_id = layout_id;
        state->layout = layout_from_json(read_json(layout_path(layout_id)));
        state->prompt = prompt;
        const std::string id = new_id();
        state->path = trial_path(id);
        write_atomic(state->path, json{{"layout_id", layout_id}, {"prompt", prompt}}.dump() + "\n");
        {
            std::lock_guard lock(registry_mu);
            trials.emplace(id, std::move(state));
        }
        return json_reply(201, {{"trial_id", id}, {"prompt", prompt}});
    }

    HttpReply keystroke(const std::string& id, const json& body) {
        auto state = find_trial(id);
        std::lock_guard lock(state->mu);
        TypedKey k;
        k.target = *symbol_field(body, "char_target", false);
        k.selected = symbol_field(body, "char_selected", true);
        k.t = number_field(body, "t");
        if (state->result) throw HttpError(409, "trial is finished");
        const double previous = state->keys.empty() ? 0.0 : state->keys.back().t;
        if (!(k.t >= previous)) throw HttpError(400, "t: must not precede the previous keystroke");
        append_durable(state->path, typed_key_json(k).dump() + "\n");
        state->keys.push_back(k);
        return {204, "", "application/json"};
    }

    HttpReply finish(const std::string& id) {
        auto state = find_trial(id);
        std::lock_guard lock(state->mu);
        if (state->result) return {200, *state->result, "application/json"};
        const KeyboardLayout& layout = state->layout;
        TranscriptionTrial trial;
        trial.prompt = state->prompt;
        std::size_t cursor = start_key(layout);
        double previous = 0.0;
        std::optional<int> missed;  // target of the previous attempt, if it missed
        for (const auto& k : state->keys) {
            Keystroke ks;
            ks.target = k.target;
            ks.selected = k.selected;
            ks.first_attempt = missed != k.target;
            missed = ks.selected != ks.target ? std::optional<int>(k.target) : std::nullopt;
            ks.movement_time = k.t - previous;
            ks.origin_key = cursor;
            ks.target_key = layout.key_of(k.target);
            trial.keystrokes.push_back(ks);
            trial.total_time += ks.movement_time;
            previous = k.t;
            cursor = k.selected ? layout.key_of(*k.selected) : ks.target_key;
        }
        EvalReport report;
        try {
            const std::vector<TranscriptionTrial> one{trial};
            report = compute_metrics(one, layout);
        } catch (const Error& e) {
            throw HttpError(422, e.what());
        }
        report.layout_ref = state->layout_id;
        report.user_ref = "human";
        const json reply = {{"trial_id", id}, {"keystrokes", trial.keystrokes.size()}, {"report", report_to_json(report)}};
        append_durable(state->path, json{{"type", "finish"}, {"reply", reply}}.dump() + "\n");
        state->result = reply.dump();
        return {200, *state->result, "application/json"};
    }

    // --- routing ------------------------------------------------------------

    HttpReply route(const std::string& method, const std::string& path, const std::string& content_type,
                    const std::string& raw) {
        const auto parts = split_path(path);
        const bool get = method == "GET";
        const bool post = method == "POST";

        json body = json::object();
        if (post && !raw.empty()) {
            if (content_type.rfind("application/json", 0) != 0)
                throw HttpError(415, "request bodies must be application/json");
            try {
                body = json::parse(raw);
            } catch (const json::parse_error& e) {
                throw HttpError(400, std::string("body: invalid JSON: ") + e.what());
            }
            if (!body.is_object()) throw HttpError(400, "body: must be a JSON object");
        }
        auto id_at = [&](std::size_t i) {
            if (!valid_id(parts[i])) throw HttpError(404, "unknown id '" + parts[i] + "'");
            return parts[i];
        };

        if (parts.size() == 1 && parts[0] == "healthz" && get) return json_reply(200, {{"status", "ok"}});
        if (!parts.empty() && parts[0] == "sessions") {
            if (parts.size() == 1 && post) return create_session(body);
            if (parts.size() == 2 && get) return session_status(id_at(1));
            if (parts.size() == 3 && parts[2] == "clicks" && post) return click(id_at(1), body);
            if (parts.size() == 3 && parts[2] == "pause" && post) return pause(id_at(1), body);
            if (parts.size() == 3 && parts[2] == "model" && get) return session_model(id_at(1));
            if (parts.size() == 3 && parts[2] == "log" && get) return session_log(id_at(1));
        }
        if (!parts.empty() && parts[0] == "layouts") {
            if (parts.size() == 1 && post) return create_layout(body);
            if (parts.size() == 2 && get) return get_layout(id_at(1));
        }
        if (!parts.empty() && parts[0] == "trials") {
            if (parts.size() == 1 && post) return create_trial(body);
            if (parts.size() == 3 && parts[2] == "keystrokes" && post) return keystroke(id_at(1), body);
            if (parts.size() == 3 && parts[2] == "finish" && post) return finish(id_at(1));
        }
        throw HttpError(404, "no route for " + method + " " + path);
    }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
        const HttpReply reply = handle(req.method, req.path, req.get_header_value("Content-Type"), req.body);
        res.status = reply.status;
        if (!reply.body.empty() || reply.status != 204) res.set_content(reply.body, reply.content_type);
    };
    impl_->server.Get(".*", forward);
    impl_->server.Post(".*", forward);
}

Service::~Service() { stop(); }

HttpReply Service::handle(const std::string& method, const std::string& path, const std::string& content_type,
                          const std::string& body) {
    try {
        return impl_->route(method, path, content_type, body);
    } catch (const HttpError& e) {
        return error_reply(e.status, e.what());
    } catch (const ParseError& e) {
        return error_reply(500, e.what());
    } catch (const InvalidArgument& e) {
        return error_reply(400, e.what());
    } catch (const InvalidState& e) {
        return error_reply(409, e.what());
    } catch (const std::exception& e) {
        return error_reply(500, e.what());
    }
}

int Service::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    if (!impl_->server.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace abkb
