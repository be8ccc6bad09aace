#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "fracsim/fraction.hpp"
#include "fracsim/rng.hpp"

namespace fracsim {

inline constexpr int kProblemsPerType = 16;
inline constexpr int kSequenceLength = kProblemsPerType * kProblemTypeCount;

enum class SequenceSchema { BlockedA, BlockedB, Interleaved, Faded };

inline const char* sequence_schema_name(SequenceSchema s) {
    switch (s) {
        case SequenceSchema::BlockedA: return "blocked-a";
        case SequenceSchema::BlockedB: return "blocked-b";
        case SequenceSchema::Interleaved: return "interleaved";
        case SequenceSchema::Faded: return "faded";
    }
    throw std::logic_error("sequence_schema_name: bad enum");
}

inline SequenceSchema parse_sequence_schema(const std::string& s) {
    if (s == "blocked-a") return SequenceSchema::BlockedA;
    if (s == "blocked-b") return SequenceSchema::BlockedB;
    if (s == "interleaved") return SequenceSchema::Interleaved;
    if (s == "faded") return SequenceSchema::Faded;
    throw std::invalid_argument("unknown sequence schema: " + s);
}

namespace seq_detail {

// Faded practice: block size shrinks 3 -> 2 -> 1 over nine rounds, each round
// visiting every problem type once. The very first round keeps the canonical
// type order so every student meets same-denominator addition first.
inline constexpr int kFadedRoundSizes[] = {3, 3, 2, 2, 2, 1, 1, 1, 1};

inline std::vector<ProblemType> schedule_types(SequenceSchema schema, Rng& rng) {
    const ProblemType canonical[] = {ProblemType::AddSame, ProblemType::AddDiff,
                                     ProblemType::Mul};
    std::vector<ProblemType> types;
    types.reserve(kSequenceLength);
    switch (schema) {
        case SequenceSchema::BlockedA:
            for (ProblemType t : {ProblemType::AddSame, ProblemType::AddDiff,
                                  ProblemType::Mul})
                types.insert(types.end(), kProblemsPerType, t);
            break;
        case SequenceSchema::BlockedB:
            for (ProblemType t : {ProblemType::Mul, ProblemType::AddSame,
                                  ProblemType::AddDiff})
                types.insert(types.end(), kProblemsPerType, t);
            break;
        case SequenceSchema::Interleaved:
            for (ProblemType t : canonical)
                types.insert(types.end(), kProblemsPerType, t);
            rng.shuffle(types);
            break;
        case SequenceSchema::Faded: {
            bool first = true;
            for (int size : kFadedRoundSizes) {
                std::vector<ProblemType> round(canonical, canonical + kProblemTypeCount);
                if (!first) rng.shuffle(round);
                first = false;
                for (ProblemType t : round) types.insert(types.end(), size, t);
            }
            break;
        }
    }
    return types;
}

}  // namespace seq_detail

inline std::vector<Problem> generate_sequence(SequenceSchema schema, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x5e, static_cast<std::uint64_t>(schema)));
    const std::vector<ProblemType> types = seq_detail::schedule_types(schema, rng);
    std::vector<Problem> problems;
    problems.reserve(types.size());
    for (ProblemType t : types) problems.push_back(new_problem(t, rng));
    return problems;
}

// Recovers the schema from the type pattern alone. Blocked orders are exact;
// faded is recognized by its round structure; everything else with the right
// per-type counts is interleaved.
inline SequenceSchema classify_sequence(const std::vector<ProblemType>& types) {
    if (static_cast<int>(types.size()) != kSequenceLength)
        throw std::invalid_argument("classify_sequence: expected " +
                                    std::to_string(kSequenceLength) + " problems, got " +
                                    std::to_string(types.size()));
    int counts[kProblemTypeCount] = {};
    for (ProblemType t : types) ++counts[static_cast<int>(t)];
    for (int c : counts)
        if (c != kProblemsPerType)
            throw std::invalid_argument(
                "classify_sequence: sequence is not balanced across problem types");

    const auto block_of = [&](int start, int len, ProblemType t) {
        for (int i = start; i < start + len; ++i)
            if (types[i] != t) return false;
        return true;
    };

    if (block_of(0, 16, ProblemType::AddSame) && block_of(16, 16, ProblemType::AddDiff) &&
        block_of(32, 16, ProblemType::Mul))
        return SequenceSchema::BlockedA;
    if (block_of(0, 16, ProblemType::Mul) && block_of(16, 16, ProblemType::AddSame) &&
        block_of(32, 16, ProblemType::AddDiff))
        return SequenceSchema::BlockedB;

    int pos = 0;
    bool faded = true;
    for (int size : seq_detail::kFadedRoundSizes) {
        bool seen[kProblemTypeCount] = {};
        for (int b = 0; b < kProblemTypeCount && faded; ++b) {
            const ProblemType t = types[pos];
            if (seen[static_cast<int>(t)] || !block_of(pos, size, t)) {
                faded = false;
                break;
            }
            seen[static_cast<int>(t)] = true;
            pos += size;
        }
        if (!faded) break;
    }
    if (faded) return SequenceSchema::Faded;
    return SequenceSchema::Interleaved;
}

inline SequenceSchema classify_sequence(const std::vector<Problem>& problems) {
    std::vector<ProblemType> types;
    types.reserve(problems.size());
    for (const Problem& p : problems) types.push_back(p.ptype);
    return classify_sequence(types);
}

}  // namespace fracsim
