#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace abkb {

inline constexpr int kAlphabetSize = 27;
inline constexpr int kSpaceIndex = 26;
inline constexpr std::string_view kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ ";

/// Index of an uppercase letter or space, -1 for anything else.
constexpr int symbol_index(char c) noexcept {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c == ' ') return kSpaceIndex;
    return -1;
}

constexpr char symbol_char(int index) noexcept {
    return kAlphabet[static_cast<std::size_t>(index)];
}

/// Uppercases letters, drops everything outside A-Z and whitespace,
/// collapses whitespace runs to one space and trims the ends.
std::string normalize_line(std::string_view line);

using SymbolMatrix = std::array<std::array<double, kAlphabetSize>, kAlphabetSize>;

class DigraphMatrix {
public:
    DigraphMatrix() = default;

    std::uint64_t count(int from, int to) const {
        return counts_.at(static_cast<std::size_t>(from)).at(static_cast<std::size_t>(to));
    }
    std::uint64_t total() const noexcept { return total_; }

    void add(int from, int to, std::uint64_t n = 1);
    DigraphMatrix& operator+=(const DigraphMatrix& other);

    friend bool operator==(const DigraphMatrix&, const DigraphMatrix&) = default;

private:
    std::array<std::array<std::uint64_t, kAlphabetSize>, kAlphabetSize> counts_{};
    std::uint64_t total_ = 0;
};

/// Counts consecutive symbol pairs within each normalized line.
DigraphMatrix ingest_phrases(std::span<const std::string> lines);
DigraphMatrix ingest_stream(std::istream& in);
DigraphMatrix ingest_file(const std::string& path);

/// counts / total. Throws EmptyCorpus when total is zero.
SymbolMatrix joint_probabilities(const DigraphMatrix& m);

/// Non-empty normalized lines of a phrase file, in order.
std::vector<std::string> read_phrases(const std::string& path);

nlohmann::json digraphs_to_json(const DigraphMatrix& m);
DigraphMatrix digraphs_from_json(const nlohmann::json& doc);

/// Stable short content hash used to reference a corpus from layout files.
std::string corpus_fingerprint(const DigraphMatrix& m);

}  // namespace abkb
