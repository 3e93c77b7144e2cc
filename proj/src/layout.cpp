#include "abkb/layout.hpp"

#include <algorithm>
#include <string>
#include <string_view>

#include "abkb/errors.hpp"
#include "abkb/hash.hpp"
#include "abkb/log.hpp"

namespace abkb {

namespace {

constexpr std::string_view kQwertyRows[] = {"QWERTYUIOP", "ASDFGHJKL", "ZXCVBNM "};
constexpr int kQwertyFirstCol[] = {0, 0, 1};

Matrix flow_matrix(const DigraphMatrix& digraphs) {
    const auto p = joint_probabilities(digraphs);
    Matrix flow(kAlphabetSize, kAlphabetSize);
    for (int i = 0; i < kAlphabetSize; ++i)
        for (int j = 0; j < kAlphabetSize; ++j)
            flow(i, j) = p[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return flow;
}

std::string symbol_string(int symbol) { return std::string(1, symbol_char(symbol)); }

}  // namespace

const char* to_string(LayoutKind kind) noexcept {
    switch (kind) {
        case LayoutKind::personalized: return "personalized";
        case LayoutKind::generic: return "generic";
        case LayoutKind::qwerty: return "qwerty";
    }
    return "unknown";
}

LayoutKind layout_kind_from_string(const std::string& text) {
    if (text == "personalized") return LayoutKind::personalized;
    if (text == "generic") return LayoutKind::generic;
    if (text == "qwerty") return LayoutKind::qwerty;
    throw InvalidArgument("unknown layout kind '" + text + "'");
}

KeyboardLayout::KeyboardLayout(LayoutKind kind, HexGrid grid,
                               std::array<std::size_t, kAlphabetSize> keys, Provenance provenance)
    : kind_(kind), grid_(std::move(grid)), keys_(keys), provenance_(std::move(provenance)) {
    std::vector<char> used(grid_.size(), 0);
    for (std::size_t key : keys_) {
        if (key >= grid_.size()) throw InvalidArgument("layout key lies outside the grid");
        if (used[key]) throw InvalidArgument("layout places two symbols on one key");
        used[key] = 1;
    }
}

std::optional<int> KeyboardLayout::symbol_at(std::size_t key) const {
    for (int s = 0; s < kAlphabetSize; ++s)
        if (keys_[static_cast<std::size_t>(s)] == key) return s;
    return std::nullopt;
}

double movement_cost(const DirectionalFittsModel& model, const KeyPosition& p,
                     const KeyPosition& q) {
    if (p.center_x == q.center_x && p.center_y == q.center_y) return predict_mt(model, {}, 0.0);
    return predict_mt(model, angle_deg(p, q), distance_px(p, q));
}

Matrix build_cost_matrix(const DirectionalFittsModel& model, const HexGrid& grid) {
    if (!model.all_fitted()) {
        std::string bins;
        for (int k = 0; k < kAngleBins; ++k)
            if (!model.bin(k).fitted) bins += (bins.empty() ? "" : ",") + std::to_string(k);
        warn("model bins {" + bins + "} are unfitted; using the mean constants of fitted bins");
    }
    const auto m = static_cast<Eigen::Index>(grid.size());
    Matrix cost(m, m);
    for (Eigen::Index p = 0; p < m; ++p)
        for (Eigen::Index q = 0; q < m; ++q)
            cost(p, q) = movement_cost(model, grid.at(static_cast<std::size_t>(p)),
                                       grid.at(static_cast<std::size_t>(q)));
    return cost;
}

std::string model_fingerprint(const DirectionalFittsModel& model) {
    return "fnv1a64:" + fnv1a64_hex(model_to_json(model).dump());
}

KeyboardLayout generate_layout(LayoutKind kind, const DirectionalFittsModel& model,
                               const DigraphMatrix& digraphs, const HexGrid& grid,
                               const SolverParams& params, std::uint64_t seed) {
    if (kind == LayoutKind::qwerty)
        throw InvalidArgument("qwerty layouts are fixed; use qwerty_layout");
    if (grid.size() < static_cast<std::size_t>(kAlphabetSize))
        throw InvalidArgument("grid has " + std::to_string(grid.size()) + " keys, need at least " +
                              std::to_string(kAlphabetSize));
    if (digraphs.total() == 0) throw EmptyCorpus();

    const DirectionalFittsModel used =
        kind == LayoutKind::generic ? generic_model(grid.key_width()) : model;
    QapInstance instance{flow_matrix(digraphs), build_cost_matrix(used, grid)};
    FaqOptions options;
    options.restarts = params.restarts;
    options.max_iters = params.max_iters;
    options.tol = params.tol;
    options.seed = seed;
    const Assignment best = solve_faq(instance, options);

    std::array<std::size_t, kAlphabetSize> keys{};
    for (int s = 0; s < kAlphabetSize; ++s)
        keys[static_cast<std::size_t>(s)] = static_cast<std::size_t>(best.mapping[static_cast<std::size_t>(s)]);
    Provenance prov;
    if (kind == LayoutKind::personalized) prov.model_ref = model_fingerprint(model);
    prov.corpus_ref = corpus_fingerprint(digraphs);
    prov.seed = seed;
    prov.solver = params;
    return {kind, grid, keys, prov};
}

HexGrid qwerty_grid(double key_width) { return build_grid(3, 10, key_width); }

KeyboardLayout qwerty_layout(double key_width) {
    HexGrid grid = qwerty_grid(key_width);
    std::array<std::size_t, kAlphabetSize> keys{};
    for (int r = 0; r < 3; ++r) {
        const auto row = kQwertyRows[r];
        for (std::size_t i = 0; i < row.size(); ++i)
            keys[static_cast<std::size_t>(symbol_index(row[i]))] =
                grid.index_of(r, kQwertyFirstCol[r] + static_cast<int>(i));
    }
    return {LayoutKind::qwerty, std::move(grid), keys, {}};
}

KeyboardLayout flip_vertical(const KeyboardLayout& layout) {
    const HexGrid& grid = layout.grid();
    std::array<std::size_t, kAlphabetSize> keys{};
    for (int s = 0; s < kAlphabetSize; ++s) {
        const auto& p = layout.position_of(s);
        keys[static_cast<std::size_t>(s)] = grid.index_of(grid.rows() - 1 - p.row, p.col);
    }
    Provenance prov = layout.provenance();
    prov.flipped = !prov.flipped;
    return {layout.kind(), grid, keys, prov};
}

double fitts_digraph_energy(const KeyboardLayout& layout, const DigraphMatrix& digraphs,
                            const DirectionalFittsModel& model) {
    const auto p = joint_probabilities(digraphs);
    double energy = 0.0;
    for (int i = 0; i < kAlphabetSize; ++i)
        for (int j = 0; j < kAlphabetSize; ++j) {
            const double pij = p[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            if (pij == 0.0) continue;
            energy += pij * movement_cost(model, layout.position_of(i), layout.position_of(j));
        }
    return energy;
}

nlohmann::json layout_to_json(const KeyboardLayout& layout) {
    nlohmann::json keys = nlohmann::json::array();
    for (int s = 0; s < kAlphabetSize; ++s) {
        const auto& p = layout.position_of(s);
        keys.push_back({{"char", symbol_string(s)},
                        {"row", p.row},
                        {"col", p.col},
                        {"cx", p.center_x},
                        {"cy", p.center_y}});
    }
    const Provenance& prov = layout.provenance();
    nlohmann::json provenance = {
        {"model_ref", prov.model_ref ? nlohmann::json(*prov.model_ref) : nlohmann::json(nullptr)},
        {"corpus_ref", prov.corpus_ref ? nlohmann::json(*prov.corpus_ref) : nlohmann::json(nullptr)},
        {"seed", prov.seed},
        {"flipped", prov.flipped}};
    if (prov.solver)
        provenance["solver"] = {{"algorithm", "faq"},
                                {"restarts", prov.solver->restarts},
                                {"max_iters", prov.solver->max_iters},
                                {"tol", prov.solver->tol}};
    else
        provenance["solver"] = nullptr;
    return {{"kind", to_string(layout.kind())},
            {"grid", grid_to_json(layout.grid())},
            {"keys", std::move(keys)},
            {"provenance", std::move(provenance)}};
}

KeyboardLayout layout_from_json(const nlohmann::json& doc) {
    try {
        const LayoutKind kind = layout_kind_from_string(doc.at("kind").get<std::string>());
        HexGrid grid = grid_from_json(doc.at("grid"));
        const auto& keys_doc = doc.at("keys");
        if (!keys_doc.is_array() || keys_doc.size() != static_cast<std::size_t>(kAlphabetSize))
            throw InvalidArgument("layout.keys must list all 27 symbols");
        std::array<std::size_t, kAlphabetSize> keys{};
        std::array<bool, kAlphabetSize> seen{};
        for (const auto& entry : keys_doc) {
            const auto ch = entry.at("char").get<std::string>();
            const int s = ch.size() == 1 ? symbol_index(ch[0]) : -1;
            if (s < 0) throw InvalidArgument("layout key has unknown char '" + ch + "'");
            if (seen[static_cast<std::size_t>(s)]) throw InvalidArgument("layout lists '" + ch + "' twice");
            seen[static_cast<std::size_t>(s)] = true;
            keys[static_cast<std::size_t>(s)] =
                grid.index_of(entry.at("row").get<int>(), entry.at("col").get<int>());
        }
        Provenance prov;
        if (doc.contains("provenance")) {
            const auto& p = doc.at("provenance");
            if (p.contains("model_ref") && !p.at("model_ref").is_null())
                prov.model_ref = p.at("model_ref").get<std::string>();
            if (p.contains("corpus_ref") && !p.at("corpus_ref").is_null())
                prov.corpus_ref = p.at("corpus_ref").get<std::string>();
            prov.seed = p.value("seed", std::uint64_t{0});
            prov.flipped = p.value("flipped", false);
            if (p.contains("solver") && !p.at("solver").is_null()) {
                const auto& s = p.at("solver");
                prov.solver = SolverParams{s.at("restarts").get<int>(), s.at("max_iters").get<int>(),
                                           s.at("tol").get<double>()};
            }
        }
        return {kind, std::move(grid), keys, std::move(prov)};
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed layout document: ") + e.what());
    }
}

}  // namespace abkb
