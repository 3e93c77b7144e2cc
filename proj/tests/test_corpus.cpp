#include <doctest.h>

#include <fstream>
#include <numeric>
#include <sstream>

#include "abkb/corpus.hpp"
#include "abkb/errors.hpp"
#include "abkb/rng.hpp"
#include "support.hpp"

using namespace abkb;

namespace {

DigraphMatrix ingest(std::initializer_list<std::string> lines) {
    const std::vector<std::string> v(lines);
    return ingest_phrases(v);
}

int idx(char c) { return symbol_index(c); }

}  // namespace

TEST_CASE("alphabet order") {
    CHECK(kAlphabet.size() == 27);
    for (int i = 0; i < kAlphabetSize; ++i) CHECK(symbol_index(symbol_char(i)) == i);
    CHECK(symbol_char(kSpaceIndex) == ' ');
    CHECK(symbol_index('a') == -1);
    CHECK(symbol_index('!') == -1);
}

TEST_CASE("normalize_line") {
    CHECK(normalize_line("  My   watch,\tfell!  ") == "MY WATCH FELL");
    CHECK(normalize_line("") == "");
    CHECK(normalize_line("123 ... 456") == "");
    CHECK(normalize_line("don't") == "DONT");
}

TEST_CASE("ingest_phrases: ABBA") {
    const auto m = ingest({"ABBA"});
    CHECK(m.count(idx('A'), idx('B')) == 1);
    CHECK(m.count(idx('B'), idx('B')) == 1);
    CHECK(m.count(idx('B'), idx('A')) == 1);
    CHECK(m.total() == 3);
}

TEST_CASE("ingest_phrases: GO GO") {
    const auto m = ingest({"GO GO"});
    CHECK(m.count(idx('G'), idx('O')) == 2);
    CHECK(m.count(idx('O'), kSpaceIndex) == 1);
    CHECK(m.count(kSpaceIndex, idx('G')) == 1);
    CHECK(m.total() == 4);
}

TEST_CASE("ingest_phrases: phrase length minus one") {
    const std::string phrase = "my watch fell in the water";
    CHECK(phrase.size() == 26);
    CHECK(ingest({phrase}).total() == 25);
}

TEST_CASE("ingest_phrases: no digraph spans lines, empty input is zero") {
    CHECK(ingest({"AB", "CD"}).count(idx('B'), idx('C')) == 0);
    CHECK(ingest({"AB", "CD"}).total() == 2);
    CHECK(ingest({}).total() == 0);
    CHECK(ingest({"", "A", "  "}).total() == 0);
}

TEST_CASE("joint_probabilities examples") {
    auto p = joint_probabilities(ingest({"AB"}));
    CHECK(p[idx('A')][idx('B')] == 1.0);
    double rest = 0.0;
    for (int i = 0; i < kAlphabetSize; ++i)
        for (int j = 0; j < kAlphabetSize; ++j) rest += p[i][j];
    CHECK(rest == 1.0);

    p = joint_probabilities(ingest({"AB", "CD"}));
    CHECK(p[idx('A')][idx('B')] == 0.5);
    CHECK(p[idx('C')][idx('D')] == 0.5);

    p = joint_probabilities(ingest({"ABBA"}));
    for (auto [a, b] : {std::pair{'A', 'B'}, {'B', 'B'}, {'B', 'A'}}) CHECK(p[idx(a)][idx(b)] == doctest::Approx(1.0 / 3.0));

    CHECK_THROWS_AS(joint_probabilities(DigraphMatrix{}), EmptyCorpus);
}

TEST_CASE("property: normalization idempotence and line-order insensitivity") {
    Rng rng = make_rng(5);
    const std::string pool = "abcXYZ  ,.!?'-\t0123 qQ";
    std::vector<std::string> raw;
    for (int i = 0; i < 60; ++i) {
        std::string line;
        const auto len = uniform_index(rng, 40);
        for (std::uint64_t k = 0; k < len; ++k) line += pool[uniform_index(rng, pool.size())];
        raw.push_back(line);
    }
    std::vector<std::string> normalized;
    for (const auto& l : raw) {
        normalized.push_back(normalize_line(l));
        CHECK(normalize_line(normalized.back()) == normalized.back());
    }
    CHECK(ingest_phrases(raw) == ingest_phrases(normalized));

    auto shuffled = raw;
    shuffle(std::span<std::string>(shuffled), rng);
    CHECK(ingest_phrases(shuffled) == ingest_phrases(raw));

    const std::vector<std::string> head(raw.begin(), raw.begin() + 30), tail(raw.begin() + 30, raw.end());
    auto sum = ingest_phrases(head);
    sum += ingest_phrases(tail);
    CHECK(sum == ingest_phrases(raw));
}

TEST_CASE("property: joint probabilities sum to one and marginals are sub-distributions") {
    const auto m = ingest_file(testing::data_path("phrases500.txt"));
    REQUIRE(m.total() > 0);
    const auto p = joint_probabilities(m);
    double total = 0.0;
    for (int i = 0; i < kAlphabetSize; ++i) {
        double row = 0.0, col = 0.0;
        for (int j = 0; j < kAlphabetSize; ++j) {
            CHECK(p[i][j] >= 0.0);
            row += p[i][j];
            col += p[j][i];
        }
        CHECK(row <= 1.0);
        CHECK(col <= 1.0);
        total += row;
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
}

TEST_CASE("vendored phrase files") {
    const auto phrases = read_phrases(testing::data_path("phrases500.txt"));
    CHECK(phrases.size() == 500);
    for (const auto& p : phrases) CHECK(normalize_line(p) == p);
    CHECK(read_phrases(testing::data_path("desk10.txt")).size() == 10);
    std::ifstream in(testing::data_path("phrases500.txt"));
    CHECK(ingest_stream(in) == ingest_phrases(phrases));
    CHECK_THROWS_AS(ingest_file("/nonexistent/corpus.txt"), InvalidArgument);
}

TEST_CASE("digraph JSON round trip and fingerprint") {
    const auto m = ingest({"HELLO WORLD", "GO GO"});
    const auto doc = digraphs_to_json(m);
    CHECK(doc.at("alphabet") == "ABCDEFGHIJKLMNOPQRSTUVWXYZ ");
    CHECK(doc.at("total") == m.total());
    CHECK(doc.at("counts").size() == 27);
    CHECK(digraphs_from_json(doc) == m);
    CHECK(corpus_fingerprint(m) == corpus_fingerprint(digraphs_from_json(doc)));
    CHECK(corpus_fingerprint(m) != corpus_fingerprint(ingest({"HELLO"})));
    auto bad = doc;
    bad["total"] = 999;
    CHECK_THROWS_AS(digraphs_from_json(bad), InvalidArgument);
}
