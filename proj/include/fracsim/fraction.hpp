#pragma once

#include <compare>
#include <stdexcept>
#include <string>

#include "fracsim/rng.hpp"

namespace fracsim {

struct Fraction {
    int num = 1;
    int den = 1;

    friend auto operator<=>(const Fraction&, const Fraction&) = default;
};

enum class ProblemType { AddSame, AddDiff, Mul };

inline constexpr int kProblemTypeCount = 3;

inline const char* problem_type_name(ProblemType t) {
    switch (t) {
        case ProblemType::AddSame: return "add_same";
        case ProblemType::AddDiff: return "add_diff";
        case ProblemType::Mul: return "mul";
    }
    throw std::logic_error("problem_type_name: bad enum");
}

inline ProblemType parse_problem_type(const std::string& s) {
    if (s == "add_same") return ProblemType::AddSame;
    if (s == "add_diff") return ProblemType::AddDiff;
    if (s == "mul") return ProblemType::Mul;
    throw std::invalid_argument("unknown problem type: " + s);
}

// A problem's id is its display form, e.g. "2/5+1/5" or "2/3*4/5".
// The id round-trips: parse_problem(p.id) reproduces p exactly.
struct Problem {
    std::string id;
    ProblemType ptype = ProblemType::AddSame;
    Fraction left;
    Fraction right;

    friend bool operator==(const Problem&, const Problem&) = default;
};

inline std::string format_problem_id(ProblemType t, Fraction l, Fraction r) {
    const char op = (t == ProblemType::Mul) ? '*' : '+';
    return std::to_string(l.num) + "/" + std::to_string(l.den) + op +
           std::to_string(r.num) + "/" + std::to_string(r.den);
}

inline Problem make_problem(ProblemType t, Fraction l, Fraction r) {
    if (l.num < 1 || l.den < 1 || r.num < 1 || r.den < 1)
        throw std::invalid_argument("make_problem: operands must be >= 1");
    if (t == ProblemType::AddSame && l.den != r.den)
        throw std::invalid_argument("make_problem: add_same requires equal denominators");
    if (t == ProblemType::AddDiff && l.den == r.den)
        throw std::invalid_argument("make_problem: add_diff requires unequal denominators");
    return Problem{format_problem_id(t, l, r), t, l, r};
}

inline Problem parse_problem(const std::string& id) {
    const auto fail = [&](const char* why) {
        throw std::invalid_argument("malformed problem id \"" + id + "\": " + why);
    };
    std::size_t op_pos = id.find_first_of("+*");
    if (op_pos == std::string::npos) fail("missing operator");
    const char op = id[op_pos];

    const auto parse_fraction = [&](const std::string& text) {
        std::size_t slash = text.find('/');
        if (slash == std::string::npos || slash == 0 || slash + 1 >= text.size())
            fail("malformed fraction");
        for (std::size_t i = 0; i < text.size(); ++i) {
            if (i == slash) continue;
            if (text[i] < '0' || text[i] > '9') fail("malformed fraction");
        }
        Fraction f;
        try {
            f.num = std::stoi(text.substr(0, slash));
            f.den = std::stoi(text.substr(slash + 1));
        } catch (const std::exception&) {
            fail("malformed fraction");
        }
        if (f.num < 1 || f.den < 1) fail("operands must be >= 1");
        return f;
    };

    Fraction l = parse_fraction(id.substr(0, op_pos));
    Fraction r = parse_fraction(id.substr(op_pos + 1));
    ProblemType t;
    if (op == '*') {
        t = ProblemType::Mul;
    } else {
        t = (l.den == r.den) ? ProblemType::AddSame : ProblemType::AddDiff;
    }
    Problem p = make_problem(t, l, r);
    if (p.id != id) fail("non-canonical form");
    return p;
}

// Operands are uniform in [1, max_operand]; add_diff draws denominators from
// [2, max_operand] and resamples until they differ.
inline Problem new_problem(ProblemType t, Rng& rng, int max_operand = 10) {
    if (max_operand < 3)
        throw std::invalid_argument("new_problem: max_operand must be >= 3");
    const auto draw = [&](int lo) { return static_cast<int>(rng.uniform_int(lo, max_operand)); };
    Fraction l, r;
    l.num = draw(1);
    r.num = draw(1);
    switch (t) {
        case ProblemType::AddSame:
            l.den = r.den = draw(1);
            break;
        case ProblemType::AddDiff:
            do {
                l.den = draw(2);
                r.den = draw(2);
            } while (l.den == r.den);
            break;
        case ProblemType::Mul:
            l.den = draw(1);
            r.den = draw(1);
            break;
    }
    return make_problem(t, l, r);
}

}  // namespace fracsim
