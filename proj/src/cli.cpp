#include "abkb/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>

#include "abkb/charact.hpp"
#include "abkb/corpus.hpp"
#include "abkb/errors.hpp"
#include "abkb/eval.hpp"
#include "abkb/fileio.hpp"
#include "abkb/layout.hpp"
#include "abkb/qap.hpp"
#include "abkb/service.hpp"

namespace abkb {

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

// Thrown for flag combinations CLI11 cannot express.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(double x, int precision = 6) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << x;
    return s.str();
}

std::string format_mapping(const std::vector<int>& mapping) {
    std::string out = "[";
    for (std::size_t i = 0; i < mapping.size(); ++i) out += (i ? "," : "") + std::to_string(mapping[i]);
    return out + "]";
}

struct CharacterizeArgs {
    std::string simulate, replay, out, log_out;
    std::uint64_t seed = 0;
};

struct GenerateArgs {
    std::string kind, model, corpus, out;
    std::uint64_t seed = 0;
    bool flip = false;
    SolverParams solver;
};

struct EnergyArgs {
    std::string layout, corpus, model;
};

struct EvaluateArgs {
    std::vector<std::string> layouts;
    std::string user, prompts, out;
};

struct OracleArgs {
    std::string instance;
    int restarts = 10;
    std::uint64_t seed = 0;
};

struct ServeArgs {
    int port = 8080;
    std::string data_dir, host = "127.0.0.1";
    std::vector<std::string> corpora;
};

void characterize(const CharacterizeArgs& a, CLI::App& cmd, std::ostream& out) {
    CharacterizationSession session = [&] {
        if (!a.simulate.empty()) {
            if (cmd.count("--seed") == 0) throw UsageError("--simulate requires --seed");
            const SimulatedUser user = user_from_json(read_json(a.simulate));
            return simulate_characterization(user, standard_grid(), a.seed);
        }
        if (!a.log_out.empty()) throw UsageError("--log-out applies to --simulate only");
        return import_log(read_text(a.replay));
    }();
    if (session.samples().empty()) throw DegenerateInput("session produced no movement samples");
    const auto model = session.model();
    if (!a.log_out.empty()) write_atomic(a.log_out, export_log(session));
    write_atomic(a.out, json_document(model_to_json(model)));
    int fitted = 0;
    for (const auto& b : model.bins()) fitted += b.fitted ? 1 : 0;
    out << "presented " << session.presented_count() << " targets, " << session.samples().size()
        << " samples, phase " << to_string(session.phase()) << "\n";
    out << "fitted bins " << fitted << "/" << kAngleBins << ", mean intercept "
        << fmt(model.mean_intercept()) << " s\n";
    out << "wrote " << a.out << "\n";
}

void generate(const GenerateArgs& a, CLI::App& cmd, std::ostream& out) {
    const LayoutKind kind = layout_kind_from_string(a.kind);
    KeyboardLayout layout;
    if (kind == LayoutKind::qwerty) {
        layout = qwerty_layout();
    } else {
        if (a.corpus.empty()) throw UsageError("--corpus is required for generated layouts");
        if (cmd.count("--seed") == 0) throw UsageError("--seed is required for generated layouts");
        DirectionalFittsModel model = generic_model(130.0);
        if (kind == LayoutKind::personalized) {
            if (a.model.empty()) throw UsageError("--model is required for personalized layouts");
            model = model_from_json(read_json(a.model));
        }
        layout = generate_layout(kind, model, ingest_file(a.corpus), standard_grid(), a.solver, a.seed);
    }
    if (a.flip) layout = flip_vertical(layout);
    write_atomic(a.out, json_document(layout_to_json(layout)));
    out << "wrote " << to_string(kind) << (a.flip ? " (flipped)" : "") << " layout to " << a.out << "\n";
}

void energy(const EnergyArgs& a, std::ostream& out) {
    const KeyboardLayout layout = layout_from_json(read_json(a.layout));
    const DirectionalFittsModel model =
        a.model.empty() ? generic_model(layout.grid().key_width()) : model_from_json(read_json(a.model));
    const double e = fitts_digraph_energy(layout, ingest_file(a.corpus), model);
    std::ostringstream s;
    s << std::setprecision(17) << e;
    out << "energy_s_per_keystroke " << s.str() << "\n";
}

void evaluate(const EvaluateArgs& a, std::ostream& out) {
    const SimulatedUser user = user_from_json(read_json(a.user));
    const auto prompts = read_phrases(a.prompts);
    if (prompts.empty()) throw InvalidArgument("prompt file '" + a.prompts + "' has no phrases");
    std::string csv = report_csv_header() + "\n";
    out << std::left << std::setw(28) << "layout" << std::right << std::setw(10) << "acc%" << std::setw(10)
        << "wpm" << std::setw(10) << "wpm*" << std::setw(12) << "itr" << "\n";
    for (const auto& path : a.layouts) {
        const KeyboardLayout layout = layout_from_json(read_json(path));
        const auto trials = simulate_transcription(user, layout, prompts);
        EvalReport report = compute_metrics(trials, layout);
        report.layout_ref = path;
        report.user_ref = user.name;
        csv += report_csv_row(report) + "\n";
        out << std::left << std::setw(28) << path << std::right << std::setw(10) << fmt(report.accuracy, 2)
            << std::setw(10) << fmt(report.wpm, 3) << std::setw(10) << fmt(report.wpm_star, 3) << std::setw(12)
            << fmt(report.itr, 3) << "\n";
    }
    if (!a.out.empty()) write_atomic(a.out, csv);
}

void oracle(const OracleArgs& a, std::ostream& out) {
    const QapInstance instance = instance_from_json(read_json(a.instance));
    FaqOptions options;
    options.restarts = a.restarts;
    options.seed = a.seed;
    const auto faq = solve_faq_detailed(instance, options);
    out << "faq objective " << std::setprecision(17) << faq.best.objective << " mapping "
        << format_mapping(faq.best.mapping) << " restart " << faq.best_restart << "\n";
    try {
        const auto exact = brute_force(instance);
        out << "brute_force objective " << std::setprecision(17) << exact.objective << " mapping "
            << format_mapping(exact.mapping) << "\n";
        const double gap = exact.objective > 0 ? (faq.best.objective - exact.objective) / exact.objective : 0.0;
        out << "relative_gap " << std::setprecision(6) << gap << "\n";
    } catch (const SizeGuard& e) {
        out << "brute_force skipped: " << e.what() << "\n";
    }
}

void serve(const ServeArgs& a, std::ostream& out) {
    ServiceOptions options;
    options.data_dir = a.data_dir;
    for (const auto& spec : a.corpora) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError("--corpus expects NAME=PATH");
        options.corpora[spec.substr(0, eq)] = spec.substr(eq + 1);
    }
    Service service(options);
    const int port = service.bind(a.host, a.port);
    out << "listening on http://" << a.host << ":" << port << "\n" << std::flush;
    service.run();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Ability-based keyboard personalization pipeline", "abkb"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    CharacterizeArgs ca;
    auto* c = app.add_subcommand("characterize", "Fit a directional Fitts model from a simulated or logged session");
    auto* sim = c->add_option("--simulate", ca.simulate, "Simulated user JSON")->check(CLI::ExistingFile);
    auto* rep = c->add_option("--replay", ca.replay, "NDJSON characterization log")->check(CLI::ExistingFile);
    sim->excludes(rep);
    c->add_option("--seed", ca.seed, "Session seed (with --simulate)");
    c->add_option("--out", ca.out, "Model JSON to write")->required();
    c->add_option("--log-out", ca.log_out, "Also write the simulated session log");

    GenerateArgs ga;
    auto* g = app.add_subcommand("generate", "Build a keyboard layout");
    g->add_option("--kind", ga.kind, "personalized | generic | qwerty")
        ->required()
        ->check(CLI::IsMember({"personalized", "generic", "qwerty"}));
    g->add_option("--model", ga.model, "Model JSON (personalized)")->check(CLI::ExistingFile);
    g->add_option("--corpus", ga.corpus, "Phrase file")->check(CLI::ExistingFile);
    g->add_option("--seed", ga.seed, "Solver seed");
    g->add_option("--out", ga.out, "Layout JSON to write")->required();
    g->add_flag("--flip", ga.flip, "Flip the layout vertically");
    g->add_option("--restarts", ga.solver.restarts, "Solver restarts")->check(CLI::PositiveNumber);
    g->add_option("--max-iters", ga.solver.max_iters, "Frank-Wolfe iterations per restart")->check(CLI::NonNegativeNumber);
    g->add_option("--tol", ga.solver.tol, "Relative objective change that stops a restart")->check(CLI::NonNegativeNumber);

    EnergyArgs ea;
    auto* e = app.add_subcommand("energy", "Fitts-digraph energy of a layout");
    e->add_option("--layout", ea.layout, "Layout JSON")->required()->check(CLI::ExistingFile);
    e->add_option("--corpus", ea.corpus, "Phrase file")->required()->check(CLI::ExistingFile);
    e->add_option("--model", ea.model, "Model JSON (default: generic constants)")->check(CLI::ExistingFile);

    EvaluateArgs va;
    auto* v = app.add_subcommand("evaluate", "Simulate transcription on layouts and compare metrics");
    v->add_option("--layouts", va.layouts, "Comma-separated layout JSON files")
        ->required()
        ->delimiter(',')
        ->check(CLI::ExistingFile);
    v->add_option("--user", va.user, "Simulated user JSON")->required()->check(CLI::ExistingFile);
    v->add_option("--prompts", va.prompts, "Prompt file, one phrase per line")->required()->check(CLI::ExistingFile);
    v->add_option("--out", va.out, "CSV report to write");

    OracleArgs oa;
    auto* o = app.add_subcommand("oracle", "Solver cross-checks");
    o->require_subcommand(1);
    auto* oq = o->add_subcommand("qap", "Run FAQ and brute force on a QAP instance");
    oq->add_option("--instance", oa.instance, "Instance JSON {n, m, flow, cost}")->required()->check(CLI::ExistingFile);
    oq->add_option("--restarts", oa.restarts, "FAQ restarts")->check(CLI::PositiveNumber);
    oq->add_option("--seed", oa.seed, "FAQ seed");

    ServeArgs sa;
    auto* s = app.add_subcommand("serve", "Run the HTTP service");
    s->add_option("--port", sa.port, "TCP port (0 picks one)")->check(CLI::Range(0, 65535));
    s->add_option("--data-dir", sa.data_dir, "Directory for sessions, models, layouts and trials")->required();
    s->add_option("--host", sa.host, "Bind address (loopback by default)");
    s->add_option("--corpus", sa.corpora, "Corpus available to POST /layouts, as NAME=PATH");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();
    try {
        app.parse(reversed);
        if (c->parsed() && ca.simulate.empty() && ca.replay.empty())
            throw UsageError("characterize needs --simulate or --replay");
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? 0 : kUsageError;
    } catch (const UsageError& ex) {
        err << "error: " << ex.what() << "\n";
        return kUsageError;
    }

    try {
        if (c->parsed()) characterize(ca, *c, out);
        else if (g->parsed()) generate(ga, *g, out);
        else if (e->parsed()) energy(ea, out);
        else if (v->parsed()) evaluate(va, out);
        else if (oq->parsed()) oracle(oa, out);
        else if (s->parsed()) serve(sa, out);
        return 0;
    } catch (const UsageError& ex) {
        err << "error: " << ex.what() << "\n";
        return kUsageError;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << "\n";
        return kRuntimeError;
    }
}

}  // namespace abkb
