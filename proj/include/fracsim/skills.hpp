#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "fracsim/tutor.hpp"

namespace fracsim {

enum class SkillGroupId { FracAddSame, FracConvertButterfly, FracMul };

inline const char* skill_group_name(SkillGroupId g) {
    switch (g) {
        case SkillGroupId::FracAddSame: return "frac_add_same";
        case SkillGroupId::FracConvertButterfly: return "frac_convert_butterfly";
        case SkillGroupId::FracMul: return "frac_mul";
    }
    throw std::logic_error("skill_group_name: bad enum");
}

inline SkillGroupId parse_skill_group(const std::string& s) {
    if (s == "frac_add_same") return SkillGroupId::FracAddSame;
    if (s == "frac_convert_butterfly") return SkillGroupId::FracConvertButterfly;
    if (s == "frac_mul") return SkillGroupId::FracMul;
    throw std::invalid_argument("unknown skill group: " + s);
}

enum class ArithOp { Add, Sub, Mul, Div };

inline const char* arith_op_name(ArithOp op) {
    switch (op) {
        case ArithOp::Add: return "add";
        case ArithOp::Sub: return "sub";
        case ArithOp::Mul: return "mul";
        case ArithOp::Div: return "div";
    }
    throw std::logic_error("arith_op_name: bad enum");
}

inline bool arith_op_commutative(ArithOp op) {
    return op == ArithOp::Add || op == ArithOp::Mul;
}

// Internal arithmetic stays in the tutor's integer value space: division only
// applies when the divisor is nonzero and divides evenly.
inline std::optional<long long> apply_arith(ArithOp op, long long a, long long b) {
    switch (op) {
        case ArithOp::Add: return a + b;
        case ArithOp::Sub: return a - b;
        case ArithOp::Mul: return a * b;
        case ArithOp::Div:
            if (b == 0 || a % b != 0) return std::nullopt;
            return a / b;
    }
    return std::nullopt;
}

// A value source a skill condition can bind: a problem operand by role, a
// locked field's value, a scratch slot, or a constant.
struct Source {
    enum class Kind { Operand, Field, Scratch, ConstInt, ConstBool };
    enum class Side { Left, Right };
    enum class Part { Num, Den };

    Kind kind = Kind::ConstInt;
    Side side = Side::Left;
    Part part = Part::Num;
    FieldId field = FieldId::ConvertCheck;
    int slot = 0;
    long long int_value = 0;
    bool bool_value = false;

    static Source operand(Side s, Part p) {
        Source src;
        src.kind = Kind::Operand;
        src.side = s;
        src.part = p;
        return src;
    }
    static Source field_value(FieldId f) {
        Source src;
        src.kind = Kind::Field;
        src.field = f;
        return src;
    }
    static Source scratch(int slot) {
        Source src;
        src.kind = Kind::Scratch;
        src.slot = slot;
        return src;
    }
    static Source const_int(long long v) {
        Source src;
        src.kind = Kind::ConstInt;
        src.int_value = v;
        return src;
    }
    static Source const_bool(bool v) {
        Source src;
        src.kind = Kind::ConstBool;
        src.bool_value = v;
        return src;
    }

    auto tie() const {
        return std::tuple(kind, side, part, field, slot, int_value, bool_value);
    }
    friend bool operator==(const Source& a, const Source& b) { return a.tie() == b.tie(); }
    friend bool operator<(const Source& a, const Source& b) { return a.tie() < b.tie(); }
};

// Resolves an integer-valued source against tutor state. Scratch sources are
// resolved by the caller (they only appear inside compiled computations or in
// working-memory bindings, never against raw tutor state).
inline std::optional<long long> resolve_int_source(const Source& src, const TutorState& s) {
    switch (src.kind) {
        case Source::Kind::Operand: {
            const Fraction& f = (src.side == Source::Side::Left) ? s.problem.left
                                                                 : s.problem.right;
            return (src.part == Source::Part::Num) ? f.num : f.den;
        }
        case Source::Kind::Field:
            if (s.state_of(src.field) != FieldState::Locked) return std::nullopt;
            if (field_is_boolean(src.field)) return std::nullopt;
            return s.locked_value(src.field).number;
        case Source::Kind::ConstInt:
            return src.int_value;
        default:
            return std::nullopt;
    }
}

enum class RelationKind { Equal, NotEqual };

struct Relation {
    RelationKind rel = RelationKind::Equal;
    Source a;
    Source b;

    auto tie() const { return std::tuple(rel, a.tie(), b.tie()); }
    friend bool operator==(const Relation& x, const Relation& y) { return x.tie() == y.tie(); }

    bool holds(const TutorState& s) const {
        auto va = resolve_int_source(a, s);
        auto vb = resolve_int_source(b, s);
        if (!va || !vb) return false;
        return (rel == RelationKind::Equal) ? (*va == *vb) : (*va != *vb);
    }
};

// A compiled computation: a short chain of arithmetic steps over bound
// sources, ending in the value to write. Scratch(i) inside a step refers to
// the result of step i of the same computation.
struct ChainStep {
    ArithOp op = ArithOp::Add;
    Source a;
    Source b;

    auto tie() const { return std::tuple(op, a.tie(), b.tie()); }
    friend bool operator==(const ChainStep& x, const ChainStep& y) { return x.tie() == y.tie(); }
};

struct Computation {
    std::vector<ChainStep> steps;
    Source result;

    friend bool operator==(const Computation&, const Computation&) = default;

    std::optional<StepValue> evaluate(const TutorState& s) const {
        std::vector<long long> slots;
        slots.reserve(steps.size());
        const auto value_of = [&](const Source& src) -> std::optional<long long> {
            if (src.kind == Source::Kind::Scratch) {
                if (src.slot < 0 || src.slot >= static_cast<int>(slots.size()))
                    return std::nullopt;
                return slots[src.slot];
            }
            return resolve_int_source(src, s);
        };
        for (const ChainStep& step : steps) {
            auto a = value_of(step.a);
            auto b = value_of(step.b);
            if (!a || !b) return std::nullopt;
            auto v = apply_arith(step.op, *a, *b);
            if (!v) return std::nullopt;
            slots.push_back(*v);
        }
        if (result.kind == Source::Kind::ConstBool)
            return StepValue::of_bool(result.bool_value);
        auto v = value_of(result);
        if (!v) return std::nullopt;
        return StepValue::of_int(*v);
    }
};

enum class SkillOrigin { Primitive, Authored, Compiled };

inline const char* skill_origin_name(SkillOrigin o) {
    switch (o) {
        case SkillOrigin::Primitive: return "primitive";
        case SkillOrigin::Authored: return "authored";
        case SkillOrigin::Compiled: return "compiled";
    }
    throw std::logic_error("skill_origin_name: bad enum");
}

// Expected-value table key. External actions are valued per problem type and
// target field; internal computations share one per-type row (slot 8).
struct QKey {
    ProblemType ptype = ProblemType::AddSame;
    int slot = 0;  // 0..7 = FieldId, 8 = internal

    static constexpr int kInternalSlot = 8;

    static QKey external(ProblemType p, FieldId f) {
        return QKey{p, static_cast<int>(f)};
    }
    static QKey internal(ProblemType p) { return QKey{p, kInternalSlot}; }

    auto tie() const { return std::tuple(ptype, slot); }
    friend bool operator==(const QKey& a, const QKey& b) { return a.tie() == b.tie(); }
    friend bool operator<(const QKey& a, const QKey& b) { return a.tie() < b.tie(); }
};

struct Skill {
    enum class Kind {
        InternalOp,  // arithmetic over two bound numeric sources, to scratch
        CopyAny,     // write any bound value into any open integer field
        WriteField,  // write a computed value into one fixed field
    };

    std::string id;
    SkillOrigin origin = SkillOrigin::Authored;
    Kind kind = Kind::WriteField;
    ArithOp op = ArithOp::Add;              // InternalOp only
    FieldId target = FieldId::ConvertCheck;  // WriteField only
    Computation effect;                      // WriteField only
    std::vector<Source> gates;               // extra sources that must be bound
    std::vector<Relation> relations;
    std::vector<std::string> chain_ids;      // constituent skills, for compiled
    std::map<QKey, double> qtable;

    bool external() const { return kind != Kind::InternalOp; }

    // Field gates only require the field to be locked, so boolean fields can
    // serve as ordering conditions even though they carry no numeric value.
    bool conditions_hold(const TutorState& s) const {
        for (const Source& g : gates) {
            if (g.kind == Source::Kind::Field) {
                if (s.state_of(g.field) != FieldState::Locked) return false;
            } else if (!resolve_int_source(g, s)) {
                return false;
            }
        }
        for (const Relation& r : relations)
            if (!r.holds(s)) return false;
        return true;
    }
};

// Gate lists are compared in canonical form: explicit gates unioned with the
// field sources the effect reads, since those must be bound either way.
inline std::vector<Source> canonical_gates(const Skill& s) {
    std::vector<Source> gates = s.gates;
    if (s.kind == Skill::Kind::WriteField) {
        const auto add = [&](const Source& src) {
            if (src.kind == Source::Kind::Field) gates.push_back(src);
        };
        for (const ChainStep& step : s.effect.steps) {
            add(step.a);
            add(step.b);
        }
        add(s.effect.result);
    }
    std::sort(gates.begin(), gates.end());
    gates.erase(std::unique(gates.begin(), gates.end()), gates.end());
    return gates;
}

// Structural identity ignores id, origin and learned values; it is what
// compilation uses to avoid storing the same skill twice.
inline bool same_structure(const Skill& a, const Skill& b) {
    return a.kind == b.kind && (a.kind != Skill::Kind::InternalOp || a.op == b.op) &&
           (a.kind != Skill::Kind::WriteField ||
            (a.target == b.target && a.effect == b.effect)) &&
           canonical_gates(a) == canonical_gates(b) && a.relations == b.relations;
}

namespace skill_detail {

inline Skill internal_op(const std::string& id, ArithOp op) {
    Skill s;
    s.id = id;
    s.origin = SkillOrigin::Primitive;
    s.kind = Skill::Kind::InternalOp;
    s.op = op;
    return s;
}

inline Skill write_field(std::string id, SkillOrigin origin, FieldId target,
                         Computation effect, std::vector<Source> gates = {},
                         std::vector<Relation> relations = {}) {
    Skill s;
    s.id = std::move(id);
    s.origin = origin;
    s.kind = Skill::Kind::WriteField;
    s.target = target;
    s.effect = std::move(effect);
    s.gates = std::move(gates);
    s.relations = std::move(relations);
    return s;
}

inline Computation copy_of(Source src) { return Computation{{}, src}; }

inline Computation press(bool v) { return Computation{{}, Source::const_bool(v)}; }

inline Computation one_step(ArithOp op, Source a, Source b) {
    return Computation{{ChainStep{op, a, b}}, Source::scratch(0)};
}

}  // namespace skill_detail

// The five domain-general primitives: four whole-number operations plus one
// copy skill that can fill any open integer field from a bound value.
inline std::vector<Skill> primitive_skills() {
    using namespace skill_detail;
    std::vector<Skill> skills;
    skills.push_back(internal_op("prim/add", ArithOp::Add));
    skills.push_back(internal_op("prim/sub", ArithOp::Sub));
    skills.push_back(internal_op("prim/mul", ArithOp::Mul));
    skills.push_back(internal_op("prim/div", ArithOp::Div));
    Skill copy;
    copy.id = "prim/copy";
    copy.origin = SkillOrigin::Primitive;
    copy.kind = Skill::Kind::CopyAny;
    skills.push_back(copy);
    return skills;
}

// Hand-authored fraction knowledge, organized in three independent groups.
// Every skill is seeded optimistic (+1) at the contexts its group is meant
// for, so prior knowledge fires without waiting for hints.
inline std::vector<Skill> fraction_skills(const std::set<SkillGroupId>& groups) {
    using namespace skill_detail;
    const Source n1 = Source::operand(Source::Side::Left, Source::Part::Num);
    const Source d1 = Source::operand(Source::Side::Left, Source::Part::Den);
    const Source n2 = Source::operand(Source::Side::Right, Source::Part::Num);
    const Source d2 = Source::operand(Source::Side::Right, Source::Part::Den);
    const Relation dens_equal{RelationKind::Equal, d1, d2};
    const Relation dens_differ{RelationKind::NotEqual, d1, d2};
    const Source checked = Source::field_value(FieldId::ConvertCheck);
    const std::vector<Source> answers_locked = {
        Source::field_value(FieldId::AnswerNum), Source::field_value(FieldId::AnswerDen)};

    std::vector<Skill> skills;
    const auto seed = [](Skill s, ProblemType p, FieldId f) {
        s.qtable[QKey::external(p, f)] = 1.0;
        return s;
    };

    if (groups.count(SkillGroupId::FracAddSame)) {
        const auto p = ProblemType::AddSame;
        skills.push_back(seed(write_field("frac_add_same/convert_check",
                                          SkillOrigin::Authored, FieldId::ConvertCheck,
                                          press(false), {}, {dens_equal}),
                              p, FieldId::ConvertCheck));
        skills.push_back(seed(write_field("frac_add_same/answer_num",
                                          SkillOrigin::Authored, FieldId::AnswerNum,
                                          one_step(ArithOp::Add, n1, n2), {checked},
                                          {dens_equal}),
                              p, FieldId::AnswerNum));
        skills.push_back(seed(write_field("frac_add_same/answer_den",
                                          SkillOrigin::Authored, FieldId::AnswerDen,
                                          copy_of(d1), {checked}, {dens_equal}),
                              p, FieldId::AnswerDen));
        skills.push_back(seed(write_field("frac_add_same/done", SkillOrigin::Authored,
                                          FieldId::Done, press(true), answers_locked),
                              p, FieldId::Done));
    }

    if (groups.count(SkillGroupId::FracConvertButterfly)) {
        const auto p = ProblemType::AddDiff;
        const Source cld = Source::field_value(FieldId::ConvLeftDen);
        const Source crd = Source::field_value(FieldId::ConvRightDen);
        const Source cln = Source::field_value(FieldId::ConvLeftNum);
        const Source crn = Source::field_value(FieldId::ConvRightNum);
        skills.push_back(seed(write_field("frac_convert_butterfly/convert_check",
                                          SkillOrigin::Authored, FieldId::ConvertCheck,
                                          press(true), {}, {dens_differ}),
                              p, FieldId::ConvertCheck));
        skills.push_back(seed(write_field("frac_convert_butterfly/conv_left_den",
                                          SkillOrigin::Authored, FieldId::ConvLeftDen,
                                          one_step(ArithOp::Mul, d1, d2)),
                              p, FieldId::ConvLeftDen));
        skills.push_back(seed(write_field("frac_convert_butterfly/conv_right_den",
                                          SkillOrigin::Authored, FieldId::ConvRightDen,
                                          copy_of(cld)),
                              p, FieldId::ConvRightDen));
        skills.push_back(seed(write_field("frac_convert_butterfly/conv_left_num",
                                          SkillOrigin::Authored, FieldId::ConvLeftNum,
                                          one_step(ArithOp::Mul, n1, d2), {cld}),
                              p, FieldId::ConvLeftNum));
        skills.push_back(seed(write_field("frac_convert_butterfly/conv_right_num",
                                          SkillOrigin::Authored, FieldId::ConvRightNum,
                                          one_step(ArithOp::Mul, n2, d1), {cld, crd, cln}),
                              p, FieldId::ConvRightNum));
        skills.push_back(seed(write_field("frac_convert_butterfly/answer_num",
                                          SkillOrigin::Authored, FieldId::AnswerNum,
                                          one_step(ArithOp::Add, cln, crn), {cld, crd}),
                              p, FieldId::AnswerNum));
        skills.push_back(seed(write_field("frac_convert_butterfly/answer_den",
                                          SkillOrigin::Authored, FieldId::AnswerDen,
                                          copy_of(cld), {crd, cln, crn}),
                              p, FieldId::AnswerDen));
        skills.push_back(seed(write_field("frac_convert_butterfly/done",
                                          SkillOrigin::Authored, FieldId::Done,
                                          press(true), answers_locked),
                              p, FieldId::Done));
    }

    if (groups.count(SkillGroupId::FracMul)) {
        const auto p = ProblemType::Mul;
        skills.push_back(seed(write_field("frac_mul/convert_check", SkillOrigin::Authored,
                                          FieldId::ConvertCheck, press(false)),
                              p, FieldId::ConvertCheck));
        skills.push_back(seed(write_field("frac_mul/answer_num", SkillOrigin::Authored,
                                          FieldId::AnswerNum,
                                          one_step(ArithOp::Mul, n1, n2), {checked}),
                              p, FieldId::AnswerNum));
        skills.push_back(seed(write_field("frac_mul/answer_den", SkillOrigin::Authored,
                                          FieldId::AnswerDen,
                                          one_step(ArithOp::Mul, d1, d2), {checked}),
                              p, FieldId::AnswerDen));
        skills.push_back(seed(write_field("frac_mul/done", SkillOrigin::Authored,
                                          FieldId::Done, press(true), answers_locked),
                              p, FieldId::Done));
    }
    return skills;
}

// ---- JSON serialization ----

inline nlohmann::json to_json(const Source& s) {
    using nlohmann::json;
    switch (s.kind) {
        case Source::Kind::Operand:
            return json{{"kind", "operand"},
                        {"side", s.side == Source::Side::Left ? "left" : "right"},
                        {"part", s.part == Source::Part::Num ? "num" : "den"}};
        case Source::Kind::Field:
            return json{{"kind", "field"}, {"field", field_name(s.field)}};
        case Source::Kind::Scratch:
            return json{{"kind", "scratch"}, {"slot", s.slot}};
        case Source::Kind::ConstInt:
            return json{{"kind", "const_int"}, {"value", s.int_value}};
        case Source::Kind::ConstBool:
            return json{{"kind", "const_bool"}, {"value", s.bool_value}};
    }
    throw std::logic_error("to_json(Source): bad enum");
}

inline Source source_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "operand")
        return Source::operand(
            j.at("side").get<std::string>() == "left" ? Source::Side::Left
                                                      : Source::Side::Right,
            j.at("part").get<std::string>() == "num" ? Source::Part::Num
                                                     : Source::Part::Den);
    if (kind == "field") return Source::field_value(parse_field(j.at("field")));
    if (kind == "scratch") return Source::scratch(j.at("slot").get<int>());
    if (kind == "const_int") return Source::const_int(j.at("value").get<long long>());
    if (kind == "const_bool") return Source::const_bool(j.at("value").get<bool>());
    throw std::invalid_argument("source_from_json: unknown kind " + kind);
}

inline nlohmann::json to_json(const Skill& s) {
    using nlohmann::json;
    json conditions = json::array();
    for (const Source& g : s.gates)
        conditions.push_back(json{{"bound", to_json(g)}});
    for (const Relation& r : s.relations)
        conditions.push_back(json{{"relation", r.rel == RelationKind::Equal ? "equal" : "not_equal"},
                                  {"a", to_json(r.a)},
                                  {"b", to_json(r.b)}});

    json effect;
    switch (s.kind) {
        case Skill::Kind::InternalOp:
            effect = json{{"type", "internal"}, {"op", arith_op_name(s.op)}};
            break;
        case Skill::Kind::CopyAny:
            effect = json{{"type", "copy_any"}};
            break;
        case Skill::Kind::WriteField: {
            json steps = json::array();
            for (const ChainStep& c : s.effect.steps)
                steps.push_back(json{{"op", arith_op_name(c.op)},
                                     {"a", to_json(c.a)},
                                     {"b", to_json(c.b)}});
            effect = json{{"type", "write"},
                          {"field", field_name(s.target)},
                          {"steps", steps},
                          {"result", to_json(s.effect.result)}};
            break;
        }
    }

    json qtable = json::array();
    for (const auto& [key, q] : s.qtable) {
        qtable.push_back(json{{"ptype", problem_type_name(key.ptype)},
                              {"slot", key.slot == QKey::kInternalSlot
                                           ? "internal"
                                           : field_name(static_cast<FieldId>(key.slot))},
                              {"q", q}});
    }
    return json{{"id", s.id},
                {"origin", skill_origin_name(s.origin)},
                {"conditions", conditions},
                {"effect", effect},
                {"chain", s.chain_ids},
                {"qtable", qtable}};
}

inline ArithOp parse_arith_op(const std::string& s) {
    if (s == "add") return ArithOp::Add;
    if (s == "sub") return ArithOp::Sub;
    if (s == "mul") return ArithOp::Mul;
    if (s == "div") return ArithOp::Div;
    throw std::invalid_argument("unknown arith op: " + s);
}

inline Skill skill_from_json(const nlohmann::json& j) {
    Skill s;
    s.id = j.at("id").get<std::string>();
    const std::string origin = j.at("origin").get<std::string>();
    if (origin == "primitive") s.origin = SkillOrigin::Primitive;
    else if (origin == "authored") s.origin = SkillOrigin::Authored;
    else if (origin == "compiled") s.origin = SkillOrigin::Compiled;
    else throw std::invalid_argument("skill_from_json: unknown origin " + origin);

    const auto& effect = j.at("effect");
    const std::string type = effect.at("type").get<std::string>();
    if (type == "internal") {
        s.kind = Skill::Kind::InternalOp;
        s.op = parse_arith_op(effect.at("op"));
    } else if (type == "copy_any") {
        s.kind = Skill::Kind::CopyAny;
    } else if (type == "write") {
        s.kind = Skill::Kind::WriteField;
        s.target = parse_field(effect.at("field"));
        for (const auto& step : effect.at("steps"))
            s.effect.steps.push_back(ChainStep{parse_arith_op(step.at("op")),
                                               source_from_json(step.at("a")),
                                               source_from_json(step.at("b"))});
        s.effect.result = source_from_json(effect.at("result"));
    } else {
        throw std::invalid_argument("skill_from_json: unknown effect type " + type);
    }

    for (const auto& c : j.at("conditions")) {
        if (c.contains("bound")) {
            s.gates.push_back(source_from_json(c.at("bound")));
        } else {
            s.relations.push_back(Relation{
                c.at("relation").get<std::string>() == "equal" ? RelationKind::Equal
                                                               : RelationKind::NotEqual,
                source_from_json(c.at("a")), source_from_json(c.at("b"))});
        }
    }
    if (j.contains("chain")) s.chain_ids = j.at("chain").get<std::vector<std::string>>();
    for (const auto& row : j.at("qtable")) {
        QKey key;
        key.ptype = parse_problem_type(row.at("ptype"));
        const std::string slot = row.at("slot").get<std::string>();
        key.slot = (slot == "internal") ? QKey::kInternalSlot
                                        : static_cast<int>(parse_field(slot));
        s.qtable[key] = row.at("q").get<double>();
    }
    return s;
}

}  // namespace fracsim
