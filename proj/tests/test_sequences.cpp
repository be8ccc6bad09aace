#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "fracsim/sequences.hpp"

using namespace fracsim;

namespace {

std::vector<ProblemType> types_of(const std::vector<Problem>& problems) {
    std::vector<ProblemType> types;
    for (const Problem& p : problems) types.push_back(p.ptype);
    return types;
}

int count_type(const std::vector<Problem>& problems, ProblemType t) {
    int n = 0;
    for (const Problem& p : problems)
        if (p.ptype == t) ++n;
    return n;
}

}  // namespace

TEST_CASE("every schema yields 48 problems, 16 per type, all parseable") {
    for (SequenceSchema s : {SequenceSchema::BlockedA, SequenceSchema::BlockedB,
                             SequenceSchema::Interleaved, SequenceSchema::Faded}) {
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
            const auto problems = generate_sequence(s, seed);
            REQUIRE(problems.size() == kSequenceLength);
            CHECK(count_type(problems, ProblemType::AddSame) == kProblemsPerType);
            CHECK(count_type(problems, ProblemType::AddDiff) == kProblemsPerType);
            CHECK(count_type(problems, ProblemType::Mul) == kProblemsPerType);
            for (const Problem& p : problems) CHECK(parse_problem(p.id) == p);
        }
    }
}

TEST_CASE("blocked schemas have their fixed type layout") {
    const auto a = generate_sequence(SequenceSchema::BlockedA, 5);
    for (int i = 0; i < 16; ++i) CHECK(a[i].ptype == ProblemType::AddSame);
    for (int i = 16; i < 32; ++i) CHECK(a[i].ptype == ProblemType::AddDiff);
    for (int i = 32; i < 48; ++i) CHECK(a[i].ptype == ProblemType::Mul);

    const auto b = generate_sequence(SequenceSchema::BlockedB, 5);
    for (int i = 0; i < 16; ++i) CHECK(b[i].ptype == ProblemType::Mul);
    for (int i = 16; i < 32; ++i) CHECK(b[i].ptype == ProblemType::AddSame);
    for (int i = 32; i < 48; ++i) CHECK(b[i].ptype == ProblemType::AddDiff);
}

TEST_CASE("faded practice shrinks block sizes and fixes the first round") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto problems = generate_sequence(SequenceSchema::Faded, seed);
        const auto types = types_of(problems);
        // round 1 always runs same-denominator, then conversion, then multiply
        for (int i = 0; i < 3; ++i) CHECK(types[i] == ProblemType::AddSame);
        for (int i = 3; i < 6; ++i) CHECK(types[i] == ProblemType::AddDiff);
        for (int i = 6; i < 9; ++i) CHECK(types[i] == ProblemType::Mul);
        // later rounds keep the round structure: sizes 3,2,2,2,1,1,1,1
        int pos = 9;
        for (int size : {3, 2, 2, 2, 1, 1, 1, 1}) {
            bool seen[kProblemTypeCount] = {};
            for (int block = 0; block < 3; ++block) {
                const ProblemType t = types[pos];
                CHECK_FALSE(seen[static_cast<int>(t)]);
                seen[static_cast<int>(t)] = true;
                for (int k = 0; k < size; ++k) CHECK(types[pos + k] == t);
                pos += size;
            }
        }
        CHECK(pos == kSequenceLength);
    }
}

TEST_CASE("sequence generation is deterministic in the seed") {
    for (SequenceSchema s : {SequenceSchema::Interleaved, SequenceSchema::Faded}) {
        CHECK(generate_sequence(s, 42) == generate_sequence(s, 42));
        CHECK(generate_sequence(s, 42) != generate_sequence(s, 43));
    }
}

TEST_CASE("interleaving puts each type first about a third of the time") {
    int firsts[kProblemTypeCount] = {};
    const int trials = 1000;
    for (int seed = 0; seed < trials; ++seed) {
        const auto problems = generate_sequence(SequenceSchema::Interleaved, seed);
        ++firsts[static_cast<int>(problems.front().ptype)];
    }
    for (int c : firsts) {
        const double freq = static_cast<double>(c) / trials;
        CHECK(freq > 1.0 / 3.0 - 0.05);
        CHECK(freq < 1.0 / 3.0 + 0.05);
    }
}

TEST_CASE("classification inverts generation") {
    for (SequenceSchema s : {SequenceSchema::BlockedA, SequenceSchema::BlockedB,
                             SequenceSchema::Interleaved, SequenceSchema::Faded}) {
        for (std::uint64_t seed = 0; seed < 50; ++seed)
            CHECK(classify_sequence(generate_sequence(s, seed)) == s);
    }
}

TEST_CASE("classification falls back to interleaved and validates input") {
    // a strict rotation is neither blocked nor faded
    std::vector<ProblemType> rotation;
    for (int i = 0; i < kProblemsPerType; ++i) {
        rotation.push_back(ProblemType::AddSame);
        rotation.push_back(ProblemType::AddDiff);
        rotation.push_back(ProblemType::Mul);
    }
    CHECK(classify_sequence(rotation) == SequenceSchema::Interleaved);

    std::vector<ProblemType> short_seq(10, ProblemType::Mul);
    CHECK_THROWS_AS(classify_sequence(short_seq), std::invalid_argument);

    std::vector<ProblemType> unbalanced(kSequenceLength, ProblemType::Mul);
    CHECK_THROWS_AS(classify_sequence(unbalanced), std::invalid_argument);
}
