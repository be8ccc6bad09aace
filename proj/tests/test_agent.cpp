#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <vector>

#include "fracsim/agent.hpp"
#include "fracsim/logs.hpp"
#include "fracsim/rng.hpp"

using namespace fracsim;

namespace {

AgentConfig config_with(std::set<SkillGroupId> groups, double guess = 0.30) {
    AgentConfig c;
    c.skill_groups = std::move(groups);
    c.params.guess_rate = guess;
    return c;
}

// Independent enumeration of every one-step chain over the given bound
// sources that reaches the goal, with commutative arguments canonicalized.
std::vector<Computation> one_step_oracle(const std::vector<std::pair<Source, long long>>& bound,
                                         long long goal) {
    std::vector<Computation> hits;
    for (ArithOp op : {ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div}) {
        for (std::size_t i = 0; i < bound.size(); ++i) {
            const std::size_t j0 = arith_op_commutative(op) ? i : 0;
            for (std::size_t j = j0; j < bound.size(); ++j) {
                const auto v = apply_arith(op, bound[i].second, bound[j].second);
                if (v && *v == goal)
                    hits.push_back(skill_detail::one_step(op, bound[i].first, bound[j].first));
            }
        }
    }
    return hits;
}

std::vector<std::pair<Source, long long>> bound_sources(const TutorState& ts) {
    std::vector<std::pair<Source, long long>> out;
    const auto add = [&](Source s) {
        if (auto v = resolve_int_source(s, ts)) out.emplace_back(s, *v);
    };
    add(Source::operand(Source::Side::Left, Source::Part::Num));
    add(Source::operand(Source::Side::Left, Source::Part::Den));
    add(Source::operand(Source::Side::Right, Source::Part::Num));
    add(Source::operand(Source::Side::Right, Source::Part::Den));
    for (int f = 0; f < kFieldCount; ++f) {
        const FieldId field = static_cast<FieldId>(f);
        if (!field_is_boolean(field)) add(Source::field_value(field));
    }
    return out;
}

}  // namespace

TEST_CASE("single temporal-difference updates are exact") {
    const CognitiveParams params;  // learning_rate 0.1, discount 0.7
    CHECK_THAT(q_update(0.0, 1.0, 0.0, params),
               Catch::Matchers::WithinAbs(0.1, 1e-12));
    CHECK_THAT(q_update(0.0, -1.0, 0.0, params),
               Catch::Matchers::WithinAbs(-0.1, 1e-12));
    CHECK_THAT(q_update(0.5, 1.0, 0.0, params),
               Catch::Matchers::WithinAbs(0.55, 1e-12));
    // bootstrapped update pulls toward reward + discount * next value
    CHECK_THAT(q_update(0.2, -0.05, 0.6, params),
               Catch::Matchers::WithinAbs(0.2 + 0.1 * (-0.05 + 0.7 * 0.6 - 0.2), 1e-12));
}

TEST_CASE("repeated terminal rewards converge to the reward value") {
    const CognitiveParams params;
    double q = 0.0;
    for (int i = 0; i < 200; ++i) q = q_update(q, 1.0, 0.0, params);
    CHECK(std::abs(q - 1.0) < 0.01);
}

TEST_CASE("action selection covers its three regimes") {
    CognitiveParams params;

    SECTION("no activations always requests a hint") {
        params.guess_rate = 1.0;
        Rng rng(3);
        CHECK(select_action({}, params, rng).kind == DecisionKind::RequestHint);
    }

    std::vector<SkillActivation> acts(3);
    acts[0].q = 0.5;
    acts[1].q = 0.8;
    acts[2].q = 0.8;

    SECTION("pure guessing fires uniformly") {
        params.guess_rate = 1.0;
        Rng rng(17);
        int counts[3] = {};
        for (int i = 0; i < 3000; ++i) {
            const Decision d = select_action(acts, params, rng);
            REQUIRE(d.kind == DecisionKind::Fire);
            ++counts[d.index];
        }
        for (int c : counts) CHECK(c > 800);
    }

    SECTION("greedy selection breaks exact ties uniformly") {
        params.guess_rate = 0.0;
        int counts[3] = {};
        for (std::uint64_t seed = 0; seed < 2000; ++seed) {
            Rng rng(seed);
            const Decision d = select_action(acts, params, rng);
            REQUIRE(d.kind == DecisionKind::Fire);
            ++counts[d.index];
        }
        CHECK(counts[0] == 0);
        CHECK(counts[1] > 600);
        CHECK(counts[2] > 600);
    }

    SECTION("the argmax is invariant to positive scaling") {
        params.guess_rate = 0.0;
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            Rng r1(seed), r2(seed);
            std::vector<SkillActivation> scaled = acts;
            for (SkillActivation& a : scaled) a.q *= 0.25;
            CHECK(select_action(acts, params, r1).index ==
                  select_action(scaled, params, r2).index);
        }
    }

    SECTION("no positive value means hint, even with negatives present") {
        params.guess_rate = 0.0;
        std::vector<SkillActivation> cold(2);
        cold[0].q = 0.0;
        cold[1].q = -0.4;
        Rng rng(9);
        CHECK(select_action(cold, params, rng).kind == DecisionKind::RequestHint);
    }
}

TEST_CASE("a fresh agent matches only internal computations") {
    Agent agent(config_with({}), 11);
    const TutorState ts = start_problem(parse_problem("2/3*4/5"));
    const auto acts = agent.match_skills(ts);
    REQUIRE_FALSE(acts.empty());
    for (const SkillActivation& a : acts) CHECK(a.internal);

    // independent count over the operand values {2,3,4,5}
    const long long v[] = {2, 3, 4, 5};
    int expected = 0;
    for (ArithOp op : {ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div}) {
        for (int i = 0; i < 4; ++i)
            for (int j = arith_op_commutative(op) ? i : 0; j < 4; ++j)
                if (apply_arith(op, v[i], v[j])) ++expected;
    }
    CHECK(acts.size() == static_cast<std::size_t>(expected));
}

TEST_CASE("matching respects field visibility and learned value") {
    Agent agent(config_with({SkillGroupId::FracMul}, 0.0), 13);
    TutorState ts = start_problem(parse_problem("2/3*4/5"));

    // before the check field is locked, only the convert-check skill fires
    auto acts = agent.match_skills(ts);
    int externals = 0;
    for (const SkillActivation& a : acts) {
        if (a.internal) continue;
        ++externals;
        CHECK(a.field == FieldId::ConvertCheck);
        CHECK(a.proposed == StepValue::of_bool(false));
        CHECK(a.q == 1.0);
    }
    CHECK(externals == 1);

    REQUIRE(check_step(ts, {FieldId::ConvertCheck, StepValue::of_bool(false)}) ==
            Feedback::Correct);
    acts = agent.match_skills(ts);
    bool saw_answer_num = false, saw_answer_den = false, saw_locked_target = false;
    for (const SkillActivation& a : acts) {
        if (a.internal) continue;
        if (a.field == FieldId::ConvertCheck) saw_locked_target = true;
        if (a.field == FieldId::AnswerNum) {
            saw_answer_num = true;
            CHECK(a.proposed == StepValue::of_int(8));
            CHECK(a.q == 1.0);
        }
        if (a.field == FieldId::AnswerDen) {
            saw_answer_den = true;
            CHECK(a.proposed == StepValue::of_int(15));
        }
    }
    CHECK(saw_answer_num);
    CHECK(saw_answer_den);
    CHECK_FALSE(saw_locked_target);
}

TEST_CASE("an expert multiplication run leaves its values at the optimum") {
    Agent agent(config_with({SkillGroupId::FracMul}, 0.0), 29);
    for (int i = 0; i < 2; ++i) {
        const RunResult r = agent.run_problem(parse_problem("2/3*4/5"));
        REQUIRE(r.first_attempts.size() == 4);
        for (const StepRecord& rec : r.first_attempts) CHECK(rec.outcome == Outcome::Correct);
    }
    const Skill* answer = agent.find_skill("frac_mul/answer_num");
    REQUIRE(answer != nullptr);
    const auto it = answer->qtable.find(QKey::external(ProblemType::Mul, FieldId::AnswerNum));
    REQUIRE(it != answer->qtable.end());
    CHECK_THAT(it->second, Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("value transfer requires both a foreign row and an attempted component") {
    Agent agent(config_with({SkillGroupId::FracMul}, 0.0), 31);
    const Skill* answer = agent.find_skill("frac_mul/answer_num");
    REQUIRE(answer != nullptr);

    const int slot = static_cast<int>(FieldId::AnswerNum);
    CHECK(agent.expected_value(*answer, ProblemType::Mul, slot) == 1.0);
    // same-field transfer is off until the component has been attempted
    CHECK(agent.expected_value(*answer, ProblemType::AddSame, slot) == 0.0);

    agent.run_problem(parse_problem("2/5+1/5"));  // hints through, marks attempts
    CHECK_THAT(agent.expected_value(*answer, ProblemType::AddSame, slot),
               Catch::Matchers::WithinAbs(0.9, 1e-12));
    // the internal pseudo-context never transfers
    const Skill* add = agent.find_skill("prim/add");
    REQUIRE(add != nullptr);
    CHECK(agent.expected_value(*add, ProblemType::AddSame, QKey::kInternalSlot) == 0.0);
}

TEST_CASE("compilation explains a same-denominator sum uniquely") {
    Agent agent(config_with({}), 37);
    TutorState ts = start_problem(parse_problem("2/9+3/9"));
    REQUIRE(check_step(ts, {FieldId::ConvertCheck, StepValue::of_bool(false)}) ==
            Feedback::Correct);

    const Demonstration demo{FieldId::AnswerNum, StepValue::of_int(5)};
    const auto compiled = agent.explain_and_compile(demo, ts);
    REQUIRE(compiled.size() == 1);
    const Skill& s = *compiled[0];
    CHECK(s.origin == SkillOrigin::Compiled);
    CHECK(s.target == FieldId::AnswerNum);
    const Computation expected = skill_detail::one_step(
        ArithOp::Add, Source::operand(Source::Side::Left, Source::Part::Num),
        Source::operand(Source::Side::Right, Source::Part::Num));
    CHECK(s.effect == expected);
    const auto row = s.qtable.find(QKey::external(ProblemType::AddSame, FieldId::AnswerNum));
    REQUIRE(row != s.qtable.end());
    CHECK_THAT(row->second, Catch::Matchers::WithinAbs(0.7, 1e-12));
    CHECK(s.chain_ids == std::vector<std::string>{"prim/add", "prim/copy"});
}

TEST_CASE("every shortest explanation becomes its own skill") {
    Agent agent(config_with({}), 41);
    TutorState ts = start_problem(parse_problem("1/2+1/3"));
    REQUIRE(check_step(ts, {FieldId::ConvertCheck, StepValue::of_bool(true)}) ==
            Feedback::Correct);

    const Demonstration demo{FieldId::ConvLeftDen, StepValue::of_int(6)};
    const auto compiled = agent.explain_and_compile(demo, ts);

    const auto oracle = one_step_oracle(bound_sources(ts), 6);
    REQUIRE_FALSE(oracle.empty());
    REQUIRE(compiled.size() == oracle.size());
    std::vector<Computation> got;
    for (const Skill* s : compiled) {
        got.push_back(s->effect);
        const auto row =
            s->qtable.find(QKey::external(ProblemType::AddDiff, FieldId::ConvLeftDen));
        REQUIRE(row != s->qtable.end());
        CHECK_THAT(row->second, Catch::Matchers::WithinAbs(0.7, 1e-12));
    }
    for (const Computation& c : oracle)
        CHECK(std::count(got.begin(), got.end(), c) == 1);
}

TEST_CASE("unreachable demonstrations compile nothing") {
    Agent agent(config_with({}), 43);
    TutorState ts = start_problem(parse_problem("1/2+1/3"));
    REQUIRE(check_step(ts, {FieldId::ConvertCheck, StepValue::of_bool(true)}) ==
            Feedback::Correct);
    const std::size_t before = agent.skills().size();
    const auto compiled =
        agent.explain_and_compile({FieldId::ConvLeftDen, StepValue::of_int(1000003)}, ts);
    CHECK(compiled.empty());
    CHECK(agent.skills().size() == before);
}

TEST_CASE("re-demonstration refreshes the existing skill instead of duplicating") {
    Agent agent(config_with({}), 47);
    TutorState ts = start_problem(parse_problem("2/9+3/9"));
    REQUIRE(check_step(ts, {FieldId::ConvertCheck, StepValue::of_bool(false)}) ==
            Feedback::Correct);
    const Demonstration demo{FieldId::AnswerNum, StepValue::of_int(5)};

    const auto first = agent.explain_and_compile(demo, ts);
    REQUIRE(first.size() == 1);
    const std::size_t ltm_size = agent.skills().size();

    const auto second = agent.explain_and_compile(demo, ts);
    REQUIRE(second.size() == 1);
    CHECK(second[0] == first[0]);
    CHECK(agent.skills().size() == ltm_size);
    const auto row =
        first[0]->qtable.find(QKey::external(ProblemType::AddSame, FieldId::AnswerNum));
    REQUIRE(row != first[0]->qtable.end());
    CHECK_THAT(row->second, Catch::Matchers::WithinAbs(0.7, 1e-12));
}

TEST_CASE("demonstrations seed values without temporal-difference noise") {
    Agent agent(config_with({}, 0.0), 53);
    agent.run_problem(parse_problem("2/5+1/5"));
    bool saw_press = false, saw_chain = false;
    for (const Skill* s : agent.skills()) {
        if (s->origin != SkillOrigin::Compiled) continue;
        for (const auto& [key, q] : s->qtable) {
            if (s->effect.steps.empty() && s->effect.result.kind != Source::Kind::Field) {
                CHECK_THAT(q, Catch::Matchers::WithinAbs(1.0, 1e-12));
                saw_press = true;
            }
            if (s->effect.steps.size() == 1) {
                CHECK_THAT(q, Catch::Matchers::WithinAbs(0.7, 1e-12));
                saw_chain = true;
            }
        }
    }
    CHECK(saw_press);
    CHECK(saw_chain);
}

TEST_CASE("an empty-prior agent hints through its entire first problem") {
    Agent agent(config_with({}), 59);
    const RunResult r = agent.run_problem(parse_problem("1/2+1/3"));
    REQUIRE(r.first_attempts.size() == 8);
    for (const StepRecord& rec : r.first_attempts) CHECK(rec.outcome == Outcome::Hint);
    // the transcript contains no graded attempts either: hints all the way
    for (const StepResult& s : r.transcript) CHECK(s.outcome == Outcome::Hint);
}

TEST_CASE("runs are reproducible from the seed") {
    const auto run = [](std::uint64_t seed) {
        Agent agent(config_with({SkillGroupId::FracAddSame}), seed);
        Rng problems(101);
        std::vector<StepRecord> all;
        for (int i = 0; i < 10; ++i) {
            const Problem p = new_problem(i % 2 == 0 ? ProblemType::AddSame
                                                     : ProblemType::Mul,
                                          problems);
            const RunResult r = agent.run_problem(p);
            all.insert(all.end(), r.first_attempts.begin(), r.first_attempts.end());
        }
        return all;
    };
    CHECK(run(7) == run(7));
    CHECK(run(7) != run(8));
}

TEST_CASE("agents round-trip through JSON snapshots") {
    Agent agent(config_with({SkillGroupId::FracMul}), 61);
    Rng problems(103);
    for (int i = 0; i < 6; ++i)
        agent.run_problem(new_problem(static_cast<ProblemType>(i % 3), problems));

    const nlohmann::json snap = agent.to_json();
    Agent restored = Agent::from_json(snap);
    CHECK(restored.to_json() == snap);

    // both copies continue identically
    Rng more(105);
    for (int i = 0; i < 6; ++i) {
        const Problem p = new_problem(static_cast<ProblemType>(i % 3), more);
        const RunResult a = agent.run_problem(p);
        const RunResult b = restored.run_problem(p);
        CHECK(a.first_attempts == b.first_attempts);
    }
}
