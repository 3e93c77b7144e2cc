#include <doctest.h>

#include <cmath>
#include <set>

#include "abkb/errors.hpp"
#include "abkb/hexgeom.hpp"
#include "abkb/rng.hpp"

using namespace abkb;

namespace {

// Position of (r, c) by the packing rule, computed independently.
std::pair<double, double> expected_center(int r, int c, double w) {
    return {c * w + (r % 2 == 1 ? w / 2.0 : 0.0), r * w * std::sqrt(3.0) / 2.0};
}

}  // namespace

TEST_CASE("build_grid: 9x9 at 130 px") {
    const HexGrid g = build_grid(9, 9, 130.0);
    CHECK(g.size() == 81);
    CHECK(g.rows() == 9);
    CHECK(g.cols() == 9);
    CHECK(distance_px(g.at(g.index_of(4, 4)), g.at(g.index_of(4, 5))) == doctest::Approx(130.0));
    CHECK(distance_px(g.at(g.index_of(4, 4)), g.at(g.index_of(5, 4))) == doctest::Approx(130.0));
    CHECK(standard_grid() == g);
}

TEST_CASE("build_grid: degenerate 1x1 grid sits at the origin") {
    const HexGrid g = build_grid(1, 1, 130.0);
    REQUIRE(g.size() == 1);
    CHECK(g.at(0).center_x == 0.0);
    CHECK(g.at(0).center_y == 0.0);
}

TEST_CASE("build_grid: 2x2 offsets and vertical pitch") {
    const HexGrid g = build_grid(2, 2, 130.0);
    CHECK(g.at(g.index_of(1, 0)).center_x == doctest::Approx(65.0));
    CHECK(g.at(g.index_of(1, 0)).center_y == doctest::Approx(112.583).epsilon(1e-5));
    CHECK(g.at(g.index_of(0, 1)).center_x == doctest::Approx(130.0));
}

TEST_CASE("build_grid: row-major centers follow the packing rule") {
    const HexGrid g = build_grid(5, 7, 42.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto& p = g.at(i);
        CHECK(p.row == static_cast<int>(i) / 7);
        CHECK(p.col == static_cast<int>(i) % 7);
        const auto [x, y] = expected_center(p.row, p.col, 42.0);
        CHECK(p.center_x == doctest::Approx(x));
        CHECK(p.center_y == doctest::Approx(y));
    }
}

TEST_CASE("build_grid: invalid dimensions") {
    CHECK_THROWS_AS(build_grid(0, 9, 130.0), InvalidArgument);
    CHECK_THROWS_AS(build_grid(9, 0, 130.0), InvalidArgument);
    CHECK_THROWS_AS(build_grid(9, 9, 0.0), InvalidArgument);
    CHECK_THROWS_AS(build_grid(-1, 9, 130.0), InvalidArgument);
    CHECK_THROWS_AS(build_grid(9, 9, -5.0), InvalidArgument);
}

TEST_CASE("distance_px examples") {
    const HexGrid g = standard_grid();
    const auto& p = g.at(g.index_of(2, 2));
    CHECK(distance_px(p, p) == 0.0);
    CHECK(distance_px(p, g.at(g.index_of(2, 3))) == doctest::Approx(130.0));
    CHECK(distance_px(p, g.at(g.index_of(2, 4))) == doctest::Approx(260.0));
}

TEST_CASE("angle_deg examples") {
    const HexGrid g = standard_grid();
    const auto& p = g.at(g.index_of(4, 4));
    CHECK(angle_deg(p, g.at(g.index_of(4, 5))) == doctest::Approx(0.0));
    // Directly above on screen: two rows up, same column (even rows share x).
    CHECK(angle_deg(p, g.at(g.index_of(2, 4))) == doctest::Approx(90.0));
    CHECK(angle_deg(p, g.at(g.index_of(4, 3))) == doctest::Approx(180.0));
    CHECK(angle_deg(p, g.at(g.index_of(6, 4))) == doctest::Approx(270.0));
    // Row 3 is odd, shifted right by 65 px: one hex-diagonal up-right.
    CHECK(angle_deg(p, g.at(g.index_of(3, 4))) == doctest::Approx(60.0));
    CHECK_THROWS_AS(angle_deg(p, p), UndefinedAngle);
}

TEST_CASE("angle_bin examples and boundaries") {
    CHECK(angle_bin(0.0) == 0);
    CHECK(angle_bin(22.5) == 1);
    CHECK(angle_bin(348.74) == 15);
    CHECK(angle_bin(348.76) == 0);
    CHECK(angle_bin(11.25) == 1);   // lower edge inclusive
    CHECK(angle_bin(11.2499) == 0);
    CHECK(angle_bin(90.0) == 4);
    CHECK(angle_bin(180.0) == 8);
    CHECK(angle_bin(270.0) == 12);
    for (int k = 0; k < kAngleBins; ++k) CHECK(angle_bin(k * 22.5) == k);
}

TEST_CASE("property: unit-distance pairs equal the hex adjacency count") {
    for (auto [r, c] : {std::pair{9, 9}, {1, 5}, {4, 3}, {7, 2}, {2, 2}}) {
        const HexGrid g = build_grid(r, c, 100.0);
        int unit_pairs = 0;
        for (std::size_t i = 0; i < g.size(); ++i)
            for (std::size_t j = i + 1; j < g.size(); ++j)
                if (std::abs(distance_px(g.at(i), g.at(j)) - 100.0) < 1e-9) ++unit_pairs;
        // Horizontal pairs plus, between each pair of adjacent rows, two
        // diagonal neighbours per key minus the one that falls off the edge.
        const int expected = r * (c - 1) + (r - 1) * (2 * c - 1);
        CHECK(unit_pairs == expected);
        std::size_t neighbor_total = 0;
        for (std::size_t i = 0; i < g.size(); ++i) neighbor_total += g.neighbors(i).size();
        CHECK(neighbor_total == static_cast<std::size_t>(2 * expected));
    }
    const HexGrid g = standard_grid();
    CHECK(g.neighbors(g.index_of(4, 4)).size() == 6);
    CHECK(g.neighbors(g.index_of(3, 5)).size() == 6);
}

TEST_CASE("property: reversing a vector moves the bin by 8") {
    const HexGrid g = standard_grid();
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j) {
            if (i == j) continue;
            const int a = angle_bin(angle_deg(g.at(i), g.at(j)));
            const int b = angle_bin(angle_deg(g.at(j), g.at(i)));
            CHECK(((a - b) % 16 + 16) % 16 == 8);
        }
}

TEST_CASE("property: distance_px is a metric on random grids") {
    Rng rng = make_rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int rows = 1 + static_cast<int>(uniform_index(rng, 9));
        const int cols = 1 + static_cast<int>(uniform_index(rng, 9));
        const double w = 10.0 + 200.0 * uniform_unit(rng);
        const HexGrid g = build_grid(rows, cols, w);
        for (int s = 0; s < 200; ++s) {
            const auto& p = g.at(uniform_index(rng, g.size()));
            const auto& q = g.at(uniform_index(rng, g.size()));
            const auto& r = g.at(uniform_index(rng, g.size()));
            CHECK(distance_px(p, q) == distance_px(q, p));
            CHECK((distance_px(p, q) == 0.0) == (p == q));
            CHECK(distance_px(p, r) <= distance_px(p, q) + distance_px(q, r) + 1e-9);
        }
    }
}

TEST_CASE("property: build_grid is deterministic and centers are distinct") {
    const HexGrid a = build_grid(9, 9, 130.0);
    const HexGrid b = build_grid(9, 9, 130.0);
    CHECK(a == b);
    std::set<std::pair<double, double>> centers;
    for (const auto& p : a.positions()) centers.insert({p.center_x, p.center_y});
    CHECK(centers.size() == a.size());
}

TEST_CASE("nearest attributes points to the closest center") {
    const HexGrid g = standard_grid();
    const auto& p = g.at(g.index_of(3, 3));
    CHECK(g.nearest(p.center_x + 20, p.center_y - 30) == g.index_of(3, 3));
    CHECK(g.nearest(-500, -500) == g.index_of(0, 0));
}

TEST_CASE("grid JSON round trip") {
    const HexGrid g = build_grid(3, 4, 77.0);
    const auto doc = grid_to_json(g);
    CHECK(doc.at("rows") == 3);
    CHECK(doc.at("cols") == 4);
    CHECK(doc.at("key_width_px") == 77.0);
    CHECK(doc.at("positions").size() == 12);
    CHECK(grid_from_json(doc) == g);
    auto bad = doc;
    bad["positions"][1]["cx"] = 999.0;
    CHECK_THROWS_AS(grid_from_json(bad), InvalidArgument);
    nlohmann::json minimal = {{"rows", 3}, {"cols", 4}, {"key_width_px", 77.0}};
    CHECK(grid_from_json(minimal) == g);
}
