#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "abkb/errors.hpp"
#include "abkb/layout.hpp"
#include "support.hpp"

using namespace abkb;

namespace {

const double kNeighborMt = 0.127 + 1.0 / 4.9;  // one bit at the generic slope

const DigraphMatrix& corpus() {
    static const DigraphMatrix m = ingest_file(testing::data_path("phrases500.txt"));
    return m;
}

DigraphMatrix ingest(std::initializer_list<std::string> lines) {
    const std::vector<std::string> v(lines);
    return ingest_phrases(v);
}

// Symbols on the 27 grid keys nearest the centre, A first.
KeyboardLayout compact_layout(const HexGrid& g) {
    std::vector<std::size_t> order(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) order[i] = i;
    const auto& c = g.at(g.index_of(4, 4));
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return distance_px(c, g.at(a)) < distance_px(c, g.at(b));
    });
    std::array<std::size_t, kAlphabetSize> keys{};
    for (int s = 0; s < kAlphabetSize; ++s) keys[static_cast<std::size_t>(s)] = order[static_cast<std::size_t>(s)];
    return KeyboardLayout(LayoutKind::generic, g, keys);
}

// Energy by direct summation over the corpus counts.
double oracle_energy(const KeyboardLayout& l, const DigraphMatrix& d, const DirectionalFittsModel& m) {
    double e = 0.0;
    for (int i = 0; i < kAlphabetSize; ++i)
        for (int j = 0; j < kAlphabetSize; ++j) {
            if (d.count(i, j) == 0) continue;
            const auto& p = l.position_of(i);
            const auto& q = l.position_of(j);
            const double mt = p == q ? m.mean_intercept() : predict_mt(m, angle_deg(p, q), distance_px(p, q));
            e += static_cast<double>(d.count(i, j)) / static_cast<double>(d.total()) * mt;
        }
    return e;
}

}  // namespace

TEST_CASE("build_cost_matrix under the generic model") {
    const auto g = standard_grid();
    const Matrix c = build_cost_matrix(generic_model(130.0), g);
    REQUIRE(c.rows() == 81);
    CHECK((c - c.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    for (Eigen::Index i = 0; i < 81; ++i) CHECK(c(i, i) == doctest::Approx(0.127));
    const auto a = g.index_of(4, 4), b = g.index_of(4, 5);
    CHECK(c(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) == doctest::Approx(kNeighborMt));
    CHECK(kNeighborMt == doctest::Approx(0.3311).epsilon(1e-4));
    CHECK(c.minCoeff() >= 0.0);
    CHECK(c.allFinite());
}

TEST_CASE("build_cost_matrix warns once for models with unfitted bins") {
    testing::WarningCapture w;
    std::vector<MovementSample> samples;
    const auto g = standard_grid();
    for (int k = 1; k <= 4; ++k)
        for (int rep = 0; rep < 3; ++rep) {
            MovementSample s;
            s.distance = 130.0 * k;
            s.angle = 0.0;
            s.movement_time = 0.2 + 0.1 * k;
            samples.push_back(s);
        }
    const auto m = fit_bins(samples, 130.0);
    REQUIRE_FALSE(m.all_fitted());
    build_cost_matrix(m, g);
    CHECK(w.messages.size() == 1);
}

TEST_CASE("qwerty_layout") {
    const auto q = qwerty_layout();
    const auto& g = q.grid();
    CHECK(g.rows() == 3);
    CHECK(q.symbol_at(g.index_of(0, 0)) == symbol_index('Q'));
    CHECK(q.symbol_at(g.index_of(0, 9)) == symbol_index('P'));
    CHECK(q.symbol_at(g.index_of(1, 0)) == symbol_index('A'));
    const auto& m = q.position_of(symbol_index('M'));
    const auto& sp = q.position_of(kSpaceIndex);
    CHECK(sp.row == m.row);
    CHECK(sp.col == m.col + 1);
    CHECK(distance_px(m, sp) == doctest::Approx(130.0));
    std::array<int, 3> per_row{};
    for (int s = 0; s < kAlphabetSize; ++s) ++per_row[static_cast<std::size_t>(q.position_of(s).row)];
    CHECK(per_row == std::array<int, 3>{10, 9, 8});
    CHECK(q.kind() == LayoutKind::qwerty);
    CHECK_THROWS_AS(generate_layout(LayoutKind::qwerty, generic_model(130), corpus(), standard_grid(), {}, 1), InvalidArgument);
}

TEST_CASE("flip_vertical") {
    const auto q = qwerty_layout();
    const auto f = flip_vertical(q);
    CHECK(f.position_of(symbol_index('Q')).row == 2);
    CHECK(f.position_of(symbol_index('Q')).col == 0);
    CHECK(f.position_of(symbol_index('Z')).row == 0);
    CHECK(f.provenance().flipped);
    CHECK(flip_vertical(f) == q);
    const auto c = compact_layout(standard_grid());
    CHECK(flip_vertical(flip_vertical(c)) == c);
    for (int s = 0; s < kAlphabetSize; ++s) CHECK(flip_vertical(c).position_of(s).row == 8 - c.position_of(s).row);
}

TEST_CASE("fitts_digraph_energy examples") {
    const auto g = standard_grid();
    const auto l = compact_layout(g);
    const auto gm = generic_model(130.0);
    CHECK(fitts_digraph_energy(l, ingest({"AA"}), gm) == doctest::Approx(gm.mean_intercept()));
    REQUIRE(distance_px(l.position_of(0), l.position_of(1)) == doctest::Approx(130.0));
    CHECK(fitts_digraph_energy(l, ingest({"AB"}), gm) == doctest::Approx(kNeighborMt));
    // Two equally likely digraphs: the energy is the mean of their times.
    const auto& a = l.position_of(symbol_index('A'));
    const auto& c = l.position_of(symbol_index('C'));
    const double mt_ac = 0.127 + std::log2(distance_px(a, c) / 130.0 + 1.0) / 4.9;
    CHECK(fitts_digraph_energy(l, ingest({"AB", "AC"}), gm) == doctest::Approx((kNeighborMt + mt_ac) / 2.0));
    CHECK_THROWS_AS(fitts_digraph_energy(l, DigraphMatrix{}, gm), EmptyCorpus);
}

TEST_CASE("property: energy equals the QAP objective of the same assignment") {
    const auto g = standard_grid();
    for (const auto& model : {generic_model(130.0), anisotropic_model(130.0, 0.83, 0.5, 2.0)}) {
        const Matrix cost = build_cost_matrix(model, g);
        const auto p = joint_probabilities(corpus());
        Matrix flow(kAlphabetSize, kAlphabetSize);
        for (int i = 0; i < kAlphabetSize; ++i)
            for (int j = 0; j < kAlphabetSize; ++j) flow(i, j) = p[i][j];
        for (const auto& layout : {compact_layout(g), flip_vertical(compact_layout(g))}) {
            std::vector<int> map;
            for (auto k : layout.keys()) map.push_back(static_cast<int>(k));
            const double e = fitts_digraph_energy(layout, corpus(), model);
            CHECK(std::abs(e - objective({flow, cost}, map)) <= 1e-9);
            CHECK(std::abs(e - oracle_energy(layout, corpus(), model)) <= 1e-9);
            CHECK(e > 0.0);
        }
    }
}

TEST_CASE("generate_layout: generic beats QWERTY, flip keeps energy") {
    const auto gm = generic_model(130.0);
    const auto gen = generate_layout(LayoutKind::generic, gm, corpus(), standard_grid(), {}, 1);
    const double e_gen = fitts_digraph_energy(gen, corpus(), gm);
    const double e_qwerty = fitts_digraph_energy(qwerty_layout(), corpus(), gm);
    CHECK(e_gen < e_qwerty);
    CHECK(std::abs(fitts_digraph_energy(flip_vertical(gen), corpus(), gm) - e_gen) <= 1e-9);
    std::set<std::size_t> keys(gen.keys().begin(), gen.keys().end());
    CHECK(keys.size() == 27);
    CHECK(gen.kind() == LayoutKind::generic);
    CHECK_FALSE(gen.provenance().model_ref.has_value());
    CHECK(gen.provenance().corpus_ref == corpus_fingerprint(corpus()));
    CHECK(gen.provenance().seed == 1);
    CHECK(gen.provenance().solver == SolverParams{});
}

TEST_CASE("generate_layout: personalized with generic constants equals generic") {
    const auto gm = generic_model(130.0);
    const auto pers = generate_layout(LayoutKind::personalized, gm, corpus(), standard_grid(), {}, 3);
    const auto gen = generate_layout(LayoutKind::generic, gm, corpus(), standard_grid(), {}, 3);
    CHECK(pers.keys() == gen.keys());
    CHECK(fitts_digraph_energy(pers, corpus(), gm) == fitts_digraph_energy(gen, corpus(), gm));
    CHECK(pers.provenance().model_ref == model_fingerprint(gm));
    CHECK(generate_layout(LayoutKind::personalized, gm, corpus(), standard_grid(), {}, 3) == pers);
}

TEST_CASE("property: the solver beats a random placement") {
    const auto g = standard_grid();
    const auto model = anisotropic_model(130.0, 0.83, 0.5, 2.0);
    SolverParams quick;
    quick.restarts = 3;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto l = generate_layout(LayoutKind::personalized, model, corpus(), g, quick, seed);
        Rng rng = make_rng(seed, 31);
        std::vector<std::size_t> perm(g.size());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        shuffle(std::span<std::size_t>(perm), rng);
        std::array<std::size_t, kAlphabetSize> keys{};
        std::copy_n(perm.begin(), kAlphabetSize, keys.begin());
        const KeyboardLayout random(LayoutKind::personalized, g, keys);
        CHECK(fitts_digraph_energy(l, corpus(), model) <= fitts_digraph_energy(random, corpus(), model));
    }
}

TEST_CASE("property: personalized layouts suit an anisotropic user better than generic ones") {
    const auto g = standard_grid();
    const auto model = anisotropic_model(130.0, 0.83, 0.5, 2.0);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto pers = generate_layout(LayoutKind::personalized, model, corpus(), g, {}, seed);
        const auto gen = generate_layout(LayoutKind::generic, model, corpus(), g, {}, seed);
        CHECK(fitts_digraph_energy(pers, corpus(), model) <= fitts_digraph_energy(gen, corpus(), model));
    }
}

TEST_CASE("generate_layout errors") {
    const auto gm = generic_model(130.0);
    CHECK_THROWS_AS(generate_layout(LayoutKind::generic, gm, DigraphMatrix{}, standard_grid(), {}, 1), EmptyCorpus);
    CHECK_THROWS_AS(generate_layout(LayoutKind::generic, gm, corpus(), build_grid(5, 5, 130.0), {}, 1), InvalidArgument);
}

TEST_CASE("KeyboardLayout rejects repeated or off-grid keys") {
    const auto g = standard_grid();
    auto keys = compact_layout(g).keys();
    keys[3] = keys[4];
    CHECK_THROWS_AS(KeyboardLayout(LayoutKind::generic, g, keys), InvalidArgument);
    keys[3] = 81;
    CHECK_THROWS_AS(KeyboardLayout(LayoutKind::generic, g, keys), InvalidArgument);
}

TEST_CASE("layout JSON round trips bit-exactly") {
    const auto gm = generic_model(130.0);
    SolverParams quick;
    quick.restarts = 2;
    for (const auto& l : {qwerty_layout(), flip_vertical(qwerty_layout()),
                          generate_layout(LayoutKind::personalized, anisotropic_model(130.0, 0.83, 0.5, 2.0), corpus(), standard_grid(), quick, 8)}) {
        const auto doc = layout_to_json(l);
        CHECK(doc.at("keys").size() == 27);
        CHECK(doc.at("keys")[26].at("char") == " ");
        const auto back = layout_from_json(doc);
        CHECK(back == l);
        CHECK(layout_to_json(back).dump() == doc.dump());
        CHECK(layout_from_json(nlohmann::json::parse(doc.dump(2))) == l);
    }
    auto doc = layout_to_json(qwerty_layout());
    doc["keys"][1]["row"] = 0;
    doc["keys"][1]["col"] = 0;
    CHECK_THROWS_AS(layout_from_json(doc), InvalidArgument);
    CHECK(layout_kind_from_string("generic") == LayoutKind::generic);
    CHECK_THROWS_AS(layout_kind_from_string("dvorak"), InvalidArgument);
}
