#pragma once

// Keyboard layouts: 27 symbols placed on honeycomb keys, generated by QAP
// over digraph flow and predicted movement time, plus QWERTY and flips.

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "abkb/corpus.hpp"
#include "abkb/fitts.hpp"
#include "abkb/hexgeom.hpp"
#include "abkb/qap.hpp"

namespace abkb {

enum class LayoutKind { personalized, generic, qwerty };

const char* to_string(LayoutKind kind) noexcept;
LayoutKind layout_kind_from_string(const std::string& text);

struct SolverParams {
    int restarts = 10;
    int max_iters = 30;
    double tol = 1e-6;
    friend bool operator==(const SolverParams&, const SolverParams&) = default;
};

struct Provenance {
    std::optional<std::string> model_ref;   ///< content hash of the model used
    std::optional<std::string> corpus_ref;  ///< content hash of the digraph table
    std::uint64_t seed = 0;
    std::optional<SolverParams> solver;
    bool flipped = false;
    friend bool operator==(const Provenance&, const Provenance&) = default;
};

class KeyboardLayout {
public:
    KeyboardLayout() = default;
    /// keys[s] is the grid index holding symbol s. Throws InvalidArgument
    /// when keys repeat or fall off the grid.
    KeyboardLayout(LayoutKind kind, HexGrid grid, std::array<std::size_t, kAlphabetSize> keys,
                   Provenance provenance = {});

    LayoutKind kind() const noexcept { return kind_; }
    const HexGrid& grid() const noexcept { return grid_; }
    const std::array<std::size_t, kAlphabetSize>& keys() const noexcept { return keys_; }
    const Provenance& provenance() const noexcept { return provenance_; }

    std::size_t key_of(int symbol) const { return keys_.at(static_cast<std::size_t>(symbol)); }
    const KeyPosition& position_of(int symbol) const { return grid_.at(key_of(symbol)); }
    /// Symbol on grid key `key`, if any.
    std::optional<int> symbol_at(std::size_t key) const;

    friend bool operator==(const KeyboardLayout&, const KeyboardLayout&) = default;

private:
    LayoutKind kind_ = LayoutKind::generic;
    HexGrid grid_;
    std::array<std::size_t, kAlphabetSize> keys_{};
    Provenance provenance_;
};

/// Predicted seconds to move from key p to key q (mean intercept when p == q).
double movement_cost(const DirectionalFittsModel& model, const KeyPosition& p,
                     const KeyPosition& q);

/// m x m matrix of movement_cost between every pair of grid keys. Warns once
/// when the model has unfitted bins (their constants fall back to the mean).
Matrix build_cost_matrix(const DirectionalFittsModel& model, const HexGrid& grid);

/// Content hash used as model_ref in layout provenance.
std::string model_fingerprint(const DirectionalFittsModel& model);

/// Solves the placement of the 27 symbols over every key of `grid`.
/// `generic` ignores `model` and uses the generic constants.
KeyboardLayout generate_layout(LayoutKind kind, const DirectionalFittsModel& model,
                               const DigraphMatrix& digraphs, const HexGrid& grid,
                               const SolverParams& params, std::uint64_t seed);

/// 3 x 10 staggered honeycomb holding QWERTY (10, 9 and 8 keys per row).
HexGrid qwerty_grid(double key_width = 130.0);
KeyboardLayout qwerty_layout(double key_width = 130.0);

/// Row r becomes row (rows - 1 - r), column unchanged.
KeyboardLayout flip_vertical(const KeyboardLayout& layout);

/// Expected seconds per keystroke, sum of p_ij * movement_cost.
double fitts_digraph_energy(const KeyboardLayout& layout, const DigraphMatrix& digraphs,
                            const DirectionalFittsModel& model);

nlohmann::json layout_to_json(const KeyboardLayout& layout);
KeyboardLayout layout_from_json(const nlohmann::json& doc);

}  // namespace abkb
