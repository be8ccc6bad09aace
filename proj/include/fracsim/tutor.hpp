#pragma once

#include <array>
#include <compare>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracsim/fraction.hpp"

namespace fracsim {

// The step-based fraction tutor. A problem is a form of input fields; each
// field accepts one value, the tutor grades it immediately, and a correct
// entry locks the field. add_same and mul problems expose only the check,
// answer and done fields; add_diff additionally exposes the four conversion
// fields once the student confirms that conversion is needed.
enum class FieldId {
    ConvertCheck,
    ConvLeftNum,
    ConvLeftDen,
    ConvRightNum,
    ConvRightDen,
    AnswerNum,
    AnswerDen,
    Done,
};

inline constexpr int kFieldCount = 8;

inline const char* field_name(FieldId f) {
    switch (f) {
        case FieldId::ConvertCheck: return "convert_check";
        case FieldId::ConvLeftNum: return "conv_left_num";
        case FieldId::ConvLeftDen: return "conv_left_den";
        case FieldId::ConvRightNum: return "conv_right_num";
        case FieldId::ConvRightDen: return "conv_right_den";
        case FieldId::AnswerNum: return "answer_num";
        case FieldId::AnswerDen: return "answer_den";
        case FieldId::Done: return "done";
    }
    throw std::logic_error("field_name: bad enum");
}

inline FieldId parse_field(const std::string& s) {
    for (int i = 0; i < kFieldCount; ++i) {
        FieldId f = static_cast<FieldId>(i);
        if (s == field_name(f)) return f;
    }
    throw std::invalid_argument("unknown field: " + s);
}

// convert_check and done take booleans, the rest take integers.
inline bool field_is_boolean(FieldId f) {
    return f == FieldId::ConvertCheck || f == FieldId::Done;
}

struct StepValue {
    bool boolean = false;
    bool flag = false;
    long long number = 0;

    static StepValue of_int(long long v) { return StepValue{false, false, v}; }
    static StepValue of_bool(bool v) { return StepValue{true, v, 0}; }

    friend auto operator<=>(const StepValue&, const StepValue&) = default;

    std::string to_string() const {
        if (boolean) return flag ? "true" : "false";
        return std::to_string(number);
    }
};

enum class FieldState { Hidden, Empty, Locked };

enum class Feedback { Correct, Incorrect };

struct StepAction {
    FieldId field = FieldId::ConvertCheck;
    StepValue value;
};

struct Demonstration {
    FieldId field = FieldId::ConvertCheck;
    StepValue value;
};

struct TutorState {
    Problem problem;
    std::array<FieldState, kFieldCount> fields{};
    std::array<StepValue, kFieldCount> locked_values{};
    bool done = false;

    FieldState state_of(FieldId f) const { return fields[static_cast<int>(f)]; }
    StepValue locked_value(FieldId f) const {
        if (state_of(f) != FieldState::Locked)
            throw std::logic_error("locked_value: field not locked");
        return locked_values[static_cast<int>(f)];
    }
};

namespace tutor_detail {

inline bool is_conversion_field(FieldId f) {
    return f == FieldId::ConvLeftNum || f == FieldId::ConvLeftDen ||
           f == FieldId::ConvRightNum || f == FieldId::ConvRightDen;
}

inline bool locked(const TutorState& s, FieldId f) {
    return s.state_of(f) == FieldState::Locked;
}

}  // namespace tutor_detail

inline TutorState start_problem(const Problem& p) {
    TutorState s;
    s.problem = p;
    for (int i = 0; i < kFieldCount; ++i) {
        FieldId f = static_cast<FieldId>(i);
        s.fields[i] = tutor_detail::is_conversion_field(f) ? FieldState::Hidden
                                                           : FieldState::Empty;
    }
    return s;
}

// The single correct value for a field. The add_diff conversion follows the
// butterfly method: both sides are rewritten over den1*den2 and the converted
// numerators are summed. Results are never reduced.
inline StepValue ground_truth(const Problem& p, FieldId f) {
    const long long n1 = p.left.num, d1 = p.left.den;
    const long long n2 = p.right.num, d2 = p.right.den;
    switch (f) {
        case FieldId::ConvertCheck:
            return StepValue::of_bool(p.ptype == ProblemType::AddDiff);
        case FieldId::ConvLeftNum: return StepValue::of_int(n1 * d2);
        case FieldId::ConvLeftDen: return StepValue::of_int(d1 * d2);
        case FieldId::ConvRightNum: return StepValue::of_int(n2 * d1);
        case FieldId::ConvRightDen: return StepValue::of_int(d1 * d2);
        case FieldId::AnswerNum:
            switch (p.ptype) {
                case ProblemType::AddSame: return StepValue::of_int(n1 + n2);
                case ProblemType::AddDiff: return StepValue::of_int(n1 * d2 + n2 * d1);
                case ProblemType::Mul: return StepValue::of_int(n1 * n2);
            }
            break;
        case FieldId::AnswerDen:
            switch (p.ptype) {
                case ProblemType::AddSame: return StepValue::of_int(d1);
                case ProblemType::AddDiff: return StepValue::of_int(d1 * d2);
                case ProblemType::Mul: return StepValue::of_int(d1 * d2);
            }
            break;
        case FieldId::Done: return StepValue::of_bool(true);
    }
    throw std::logic_error("ground_truth: bad enum");
}

// Whether the ordering constraints admit an entry on the field right now.
// convert_check comes first; on add_diff the conversion runs conv_left_den,
// then conv_right_den and conv_left_num in either order, then conv_right_num;
// the two answer fields follow in either order, and done closes the problem.
inline bool field_admissible(const TutorState& s, FieldId f) {
    using tutor_detail::locked;
    if (s.done) return false;
    if (s.state_of(f) != FieldState::Empty) return false;
    if (f == FieldId::ConvertCheck) return true;
    if (!locked(s, FieldId::ConvertCheck)) return false;

    const bool converting = s.problem.ptype == ProblemType::AddDiff;
    const bool conversion_done =
        !converting ||
        (locked(s, FieldId::ConvLeftDen) && locked(s, FieldId::ConvRightDen) &&
         locked(s, FieldId::ConvLeftNum) && locked(s, FieldId::ConvRightNum));

    switch (f) {
        case FieldId::ConvLeftDen:
            return converting;
        case FieldId::ConvRightDen:
        case FieldId::ConvLeftNum:
            return converting && locked(s, FieldId::ConvLeftDen);
        case FieldId::ConvRightNum:
            return converting && locked(s, FieldId::ConvLeftDen) &&
                   locked(s, FieldId::ConvRightDen) && locked(s, FieldId::ConvLeftNum);
        case FieldId::AnswerNum:
        case FieldId::AnswerDen:
            return conversion_done;
        case FieldId::Done:
            return locked(s, FieldId::AnswerNum) && locked(s, FieldId::AnswerDen);
        default:
            return false;
    }
}

// Grades one entry. Correct locks the field and unhides any newly reachable
// fields; Incorrect leaves the state untouched. Acting on a hidden or locked
// field violates the tutor contract and throws.
inline Feedback check_step(TutorState& s, const StepAction& action) {
    if (s.done) throw std::logic_error("check_step: problem already done");
    const FieldState fs = s.state_of(action.field);
    if (fs == FieldState::Hidden)
        throw std::logic_error(std::string("check_step: field is hidden: ") +
                               field_name(action.field));
    if (fs == FieldState::Locked)
        throw std::logic_error(std::string("check_step: field is locked: ") +
                               field_name(action.field));
    if (action.value.boolean != field_is_boolean(action.field))
        throw std::logic_error(std::string("check_step: value type mismatch on ") +
                               field_name(action.field));

    if (!field_admissible(s, action.field)) return Feedback::Incorrect;
    if (action.value != ground_truth(s.problem, action.field)) return Feedback::Incorrect;

    const int idx = static_cast<int>(action.field);
    s.fields[idx] = FieldState::Locked;
    s.locked_values[idx] = action.value;

    if (action.field == FieldId::ConvertCheck &&
        s.problem.ptype == ProblemType::AddDiff) {
        for (int i = 0; i < kFieldCount; ++i) {
            FieldId f = static_cast<FieldId>(i);
            if (tutor_detail::is_conversion_field(f)) s.fields[i] = FieldState::Empty;
        }
    }
    if (action.field == FieldId::Done) s.done = true;
    return Feedback::Correct;
}

// Fixed hint order; the first admissible field wins.
inline constexpr std::array<FieldId, kFieldCount> kHintOrder = {
    FieldId::ConvertCheck, FieldId::ConvLeftDen,  FieldId::ConvRightDen,
    FieldId::ConvLeftNum,  FieldId::ConvRightNum, FieldId::AnswerNum,
    FieldId::AnswerDen,    FieldId::Done,
};

inline Demonstration next_hint(const TutorState& s) {
    if (s.done) throw std::logic_error("next_hint: problem already done");
    for (FieldId f : kHintOrder) {
        if (field_admissible(s, f)) return Demonstration{f, ground_truth(s.problem, f)};
    }
    throw std::logic_error("next_hint: no admissible field");
}

// The canonical solution path, in hint order. 4 steps for add_same and mul,
// 8 for add_diff.
inline std::vector<Demonstration> required_steps(const Problem& p) {
    std::vector<Demonstration> steps;
    for (FieldId f : kHintOrder) {
        if (p.ptype != ProblemType::AddDiff && tutor_detail::is_conversion_field(f))
            continue;
        steps.push_back(Demonstration{f, ground_truth(p, f)});
    }
    return steps;
}

}  // namespace fracsim
