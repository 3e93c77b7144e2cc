#pragma once

// Honeycomb key grid. Rows are offset by half a key on odd rows and spaced
// key_width * sqrt(3)/2 apart, so every one of a key's six neighbours sits
// exactly key_width away. Storage uses screen coordinates (y grows down);
// angles are reported in the visual frame (up = 90 degrees).

#include <cstddef>
#include <optional>
#include <vector>

#include <json.hpp>

namespace abkb {

inline constexpr int kAngleBins = 16;
inline constexpr double kBinWidthDeg = 360.0 / kAngleBins;

struct KeyPosition {
    int row = 0;
    int col = 0;
    double center_x = 0.0;
    double center_y = 0.0;

    friend bool operator==(const KeyPosition&, const KeyPosition&) = default;
};

class HexGrid {
public:
    HexGrid() = default;

    int rows() const noexcept { return rows_; }
    int cols() const noexcept { return cols_; }
    double key_width() const noexcept { return key_width_; }
    std::size_t size() const noexcept { return positions_.size(); }

    const std::vector<KeyPosition>& positions() const noexcept { return positions_; }
    const KeyPosition& at(std::size_t index) const { return positions_.at(index); }

    /// Row-major index of (row, col); throws InvalidArgument when off-grid.
    std::size_t index_of(int row, int col) const;
    bool contains(int row, int col) const noexcept;

    /// Key whose center is closest to (x, y); ties go to the lower index.
    std::size_t nearest(double x, double y) const;

    /// Indices of the up-to-six keys at hex-neighbour distance.
    std::vector<std::size_t> neighbors(std::size_t index) const;

    friend bool operator==(const HexGrid&, const HexGrid&) = default;

private:
    friend HexGrid build_grid(int rows, int cols, double key_width);

    int rows_ = 0;
    int cols_ = 0;
    double key_width_ = 0.0;
    std::vector<KeyPosition> positions_;
};

HexGrid build_grid(int rows, int cols, double key_width);

/// 9x9 honeycomb with 130 px keys used for characterization and layouts.
HexGrid standard_grid();

double distance_px(const KeyPosition& p, const KeyPosition& q);

/// Direction of p->q in degrees, [0, 360), counterclockwise from rightward.
/// Throws UndefinedAngle when the centers coincide.
double angle_deg(const KeyPosition& p, const KeyPosition& q);

/// Sixteen 22.5-degree bins centred on multiples of 22.5; lower edge inclusive.
int angle_bin(double angle);

/// Circular distance between two bins, 0..8.
int bin_distance(int a, int b);

nlohmann::json grid_to_json(const HexGrid& grid);
HexGrid grid_from_json(const nlohmann::json& doc);

nlohmann::json key_ref_to_json(const KeyPosition& key);

}  // namespace abkb
