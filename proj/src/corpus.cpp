#include "abkb/corpus.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>

#include "abkb/errors.hpp"
#include "abkb/hash.hpp"

namespace abkb {

std::string normalize_line(std::string_view line) {
    std::string out;
    out.reserve(line.size());
    bool pending_space = false;
    for (char raw : line) {
        const auto c = static_cast<unsigned char>(raw);
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (!std::isalpha(c) || c >= 0x80) continue;
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::toupper(c)));
    }
    return out;
}

void DigraphMatrix::add(int from, int to, std::uint64_t n) {
    counts_.at(static_cast<std::size_t>(from)).at(static_cast<std::size_t>(to)) += n;
    total_ += n;
}

DigraphMatrix& DigraphMatrix::operator+=(const DigraphMatrix& other) {
    for (int i = 0; i < kAlphabetSize; ++i)
        for (int j = 0; j < kAlphabetSize; ++j) add(i, j, other.count(i, j));
    return *this;
}

namespace {

void count_line(DigraphMatrix& m, std::string_view raw) {
    const std::string line = normalize_line(raw);
    for (std::size_t i = 1; i < line.size(); ++i)
        m.add(symbol_index(line[i - 1]), symbol_index(line[i]));
}

}  // namespace

DigraphMatrix ingest_phrases(std::span<const std::string> lines) {
    DigraphMatrix m;
    for (const auto& line : lines) count_line(m, line);
    return m;
}

DigraphMatrix ingest_stream(std::istream& in) {
    DigraphMatrix m;
    std::string line;
    while (std::getline(in, line)) count_line(m, line);
    return m;
}

DigraphMatrix ingest_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open corpus file '" + path + "'");
    return ingest_stream(in);
}

std::vector<std::string> read_phrases(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open phrase file '" + path + "'");
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        auto normalized = normalize_line(line);
        if (!normalized.empty()) out.push_back(std::move(normalized));
    }
    return out;
}

SymbolMatrix joint_probabilities(const DigraphMatrix& m) {
    if (m.total() == 0) throw EmptyCorpus();
    SymbolMatrix p{};
    const auto total = static_cast<double>(m.total());
    for (int i = 0; i < kAlphabetSize; ++i)
        for (int j = 0; j < kAlphabetSize; ++j)
            p[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                static_cast<double>(m.count(i, j)) / total;
    return p;
}

nlohmann::json digraphs_to_json(const DigraphMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < kAlphabetSize; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < kAlphabetSize; ++j) row.push_back(m.count(i, j));
        rows.push_back(std::move(row));
    }
    return {{"alphabet", std::string(kAlphabet)}, {"counts", std::move(rows)}, {"total", m.total()}};
}

DigraphMatrix digraphs_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("alphabet").get<std::string>() != kAlphabet)
            throw InvalidArgument("digraph alphabet must be \"A..Z \"");
        const auto& rows = doc.at("counts");
        if (rows.size() != kAlphabetSize) throw InvalidArgument("digraph counts must be 27x27");
        DigraphMatrix m;
        for (int i = 0; i < kAlphabetSize; ++i) {
            const auto& row = rows.at(static_cast<std::size_t>(i));
            if (row.size() != kAlphabetSize) throw InvalidArgument("digraph counts must be 27x27");
            for (int j = 0; j < kAlphabetSize; ++j)
                m.add(i, j, row.at(static_cast<std::size_t>(j)).get<std::uint64_t>());
        }
        if (doc.contains("total") && doc.at("total").get<std::uint64_t>() != m.total())
            throw InvalidArgument("digraph total does not match the counts");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed digraph document: ") + e.what());
    }
}

std::string corpus_fingerprint(const DigraphMatrix& m) {
    return "fnv1a64:" + fnv1a64_hex(digraphs_to_json(m).dump());
}

}  // namespace abkb
