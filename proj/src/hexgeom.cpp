#include "abkb/hexgeom.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "abkb/errors.hpp"

namespace abkb {

namespace {

constexpr double kSqrt3Over2 = std::numbers::sqrt3 / 2.0;

}  // namespace

HexGrid build_grid(int rows, int cols, double key_width) {
    if (rows < 1 || cols < 1)
        throw InvalidArgument("grid needs at least one row and one column");
    if (!(key_width > 0.0) || !std::isfinite(key_width))
        throw InvalidArgument("key width must be positive");

    HexGrid grid;
    grid.rows_ = rows;
    grid.cols_ = cols;
    grid.key_width_ = key_width;
    grid.positions_.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    const double pitch_y = key_width * kSqrt3Over2;
    for (int r = 0; r < rows; ++r) {
        const double offset = (r % 2 == 1) ? key_width / 2.0 : 0.0;
        for (int c = 0; c < cols; ++c)
            grid.positions_.push_back({r, c, c * key_width + offset, r * pitch_y});
    }
    return grid;
}

HexGrid standard_grid() { return build_grid(9, 9, 130.0); }

bool HexGrid::contains(int row, int col) const noexcept {
    return row >= 0 && row < rows_ && col >= 0 && col < cols_;
}

std::size_t HexGrid::index_of(int row, int col) const {
    if (!contains(row, col))
        throw InvalidArgument("key (" + std::to_string(row) + ", " + std::to_string(col) +
                              ") is outside the grid");
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(cols_) +
           static_cast<std::size_t>(col);
}

std::size_t HexGrid::nearest(double x, double y) const {
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < positions_.size(); ++i) {
        const double dx = positions_[i].center_x - x;
        const double dy = positions_[i].center_y - y;
        const double d2 = dx * dx + dy * dy;
        if (d2 < best_d2) {
            best_d2 = d2;
            best = i;
        }
    }
    return best;
}

std::vector<std::size_t> HexGrid::neighbors(std::size_t index) const {
    const KeyPosition& p = at(index);
    // Odd rows are shifted right, so the diagonal neighbours of an odd row
    // sit at columns c and c+1 of the adjacent rows, of an even row at c-1 and c.
    const int lo = (p.row % 2 == 1) ? 0 : -1;
    const int candidates[6][2] = {
        {0, -1}, {0, 1}, {-1, lo}, {-1, lo + 1}, {1, lo}, {1, lo + 1},
    };
    std::vector<std::size_t> out;
    for (const auto& d : candidates) {
        const int r = p.row + d[0];
        const int c = p.col + d[1];
        if (contains(r, c)) out.push_back(index_of(r, c));
    }
    return out;
}

double distance_px(const KeyPosition& p, const KeyPosition& q) {
    return std::hypot(q.center_x - p.center_x, q.center_y - p.center_y);
}

double angle_deg(const KeyPosition& p, const KeyPosition& q) {
    const double dx = q.center_x - p.center_x;
    const double dy_visual = p.center_y - q.center_y;
    if (dx == 0.0 && dy_visual == 0.0)
        throw UndefinedAngle("angle between coincident positions is undefined");
    double deg = std::atan2(dy_visual, dx) * (180.0 / std::numbers::pi);
    if (deg < 0.0) deg += 360.0;
    if (deg >= 360.0) deg -= 360.0;
    return deg;
}

int angle_bin(double angle) {
    double a = std::fmod(angle, 360.0);
    if (a < 0.0) a += 360.0;
    const int bin = static_cast<int>(std::floor((a + kBinWidthDeg / 2.0) / kBinWidthDeg));
    return bin % kAngleBins;
}

int bin_distance(int a, int b) {
    const int d = ((a - b) % kAngleBins + kAngleBins) % kAngleBins;
    return d > kAngleBins / 2 ? kAngleBins - d : d;
}

nlohmann::json key_ref_to_json(const KeyPosition& key) {
    return {{"row", key.row}, {"col", key.col}, {"cx", key.center_x}, {"cy", key.center_y}};
}

nlohmann::json grid_to_json(const HexGrid& grid) {
    nlohmann::json positions = nlohmann::json::array();
    for (const auto& p : grid.positions()) positions.push_back(key_ref_to_json(p));
    return {{"rows", grid.rows()},
            {"cols", grid.cols()},
            {"key_width_px", grid.key_width()},
            {"positions", std::move(positions)}};
}

HexGrid grid_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw InvalidArgument("grid must be a JSON object");
    for (const char* field : {"rows", "cols", "key_width_px"})
        if (!doc.contains(field) || !doc.at(field).is_number())
            throw InvalidArgument(std::string("grid.") + field + " must be a number");
    HexGrid grid = build_grid(doc.at("rows").get<int>(), doc.at("cols").get<int>(),
                              doc.at("key_width_px").get<double>());
    if (doc.contains("positions")) {
        const auto& positions = doc.at("positions");
        if (!positions.is_array() || positions.size() != grid.size())
            throw InvalidArgument("grid.positions does not match rows x cols");
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto& p = positions[i];
            const auto& expect = grid.at(i);
            if (p.at("row").get<int>() != expect.row || p.at("col").get<int>() != expect.col ||
                std::abs(p.at("cx").get<double>() - expect.center_x) > 1e-6 ||
                std::abs(p.at("cy").get<double>() - expect.center_y) > 1e-6)
                throw InvalidArgument("grid.positions[" + std::to_string(i) +
                                      "] is inconsistent with the honeycomb packing");
        }
    }
    return grid;
}

}  // namespace abkb
