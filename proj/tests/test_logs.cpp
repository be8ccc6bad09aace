#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "fracsim/logs.hpp"

using namespace fracsim;

namespace {

StepRecord rec(ProblemType ptype, FieldId field, Outcome outcome) {
    return StepRecord{"", ptype, field, outcome};
}

const CurvePoint& point_at(const LearningCurve& curve, int opportunity) {
    for (const CurvePoint& p : curve.points)
        if (p.opportunity == opportunity) return p;
    FAIL("no curve point at opportunity " << opportunity);
    throw std::logic_error("unreachable");
}

}  // namespace

TEST_CASE("two interleaved knowledge components aggregate by opportunity") {
    // KC a: hint, correct, correct; KC b: correct, incorrect, correct.
    const std::vector<StepRecord> records = {
        rec(ProblemType::AddSame, FieldId::AnswerNum, Outcome::Hint),
        rec(ProblemType::Mul, FieldId::AnswerNum, Outcome::Correct),
        rec(ProblemType::AddSame, FieldId::AnswerNum, Outcome::Correct),
        rec(ProblemType::Mul, FieldId::AnswerNum, Outcome::Incorrect),
        rec(ProblemType::AddSame, FieldId::AnswerNum, Outcome::Correct),
        rec(ProblemType::Mul, FieldId::AnswerNum, Outcome::Correct),
    };
    const LearningCurve curve = learning_curve(records);
    REQUIRE(curve.points.size() == 3);

    const CurvePoint& p0 = point_at(curve, 0);
    CHECK(p0.error_rate == 0.5);
    CHECK(p0.n == 2);
    // sd = sqrt(1/2), so the normal interval pokes past both ends and clamps
    CHECK(p0.ci_low == 0.0);
    CHECK(p0.ci_high == 1.0);

    CHECK(point_at(curve, 1).error_rate == 0.5);
    CHECK(point_at(curve, 2).error_rate == 0.0);

    int total_n = 0;
    for (const CurvePoint& p : curve.points) total_n += p.n;
    CHECK(total_n == static_cast<int>(records.size()));
}

TEST_CASE("degenerate curves") {
    CHECK(learning_curve({}).points.empty());

    const LearningCurve single = learning_curve({
        rec(ProblemType::Mul, FieldId::Done, Outcome::Hint),
    });
    REQUIRE(single.points.size() == 1);
    CHECK(single.points[0].error_rate == 1.0);
    CHECK(single.points[0].n == 1);
    // n = 1 uses the zero-variance convention
    CHECK(single.points[0].ci_low == 1.0);
    CHECK(single.points[0].ci_high == 1.0);
}

TEST_CASE("same field under different problem types is a different component") {
    const auto pairs = opportunity_errors({
        rec(ProblemType::AddSame, FieldId::AnswerNum, Outcome::Correct),
        rec(ProblemType::Mul, FieldId::AnswerNum, Outcome::Correct),
        rec(ProblemType::AddSame, FieldId::AnswerNum, Outcome::Correct),
    });
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0].first == 0);
    CHECK(pairs[1].first == 0);
    CHECK(pairs[2].first == 1);
}

TEST_CASE("curve CSV uses fixed six-digit columns") {
    LearningCurve curve;
    curve.points.push_back(CurvePoint{0, 0.5, 2, 0.0, 1.0});
    curve.points.push_back(CurvePoint{1, 1.0 / 3.0, 3, 0.1, 0.9});
    const std::string csv = emit_curve_csv(curve);
    CHECK(csv ==
          "opportunity,error_rate,n,ci_low,ci_high\n"
          "0,0.500000,2,0.000000,1.000000\n"
          "1,0.333333,3,0.100000,0.900000\n");
}

TEST_CASE("a minimal transaction file parses") {
    const std::string text =
        "student_id,problem_id,step_field,attempt_index,outcome\n"
        "s1,2/5+1/5,convert_check,1,hint\n";
    const auto logs = parse_transactions(text);
    REQUIRE(logs.size() == 1);
    CHECK(logs[0].student_id == "s1");
    REQUIRE(logs[0].sequence.size() == 1);
    CHECK(logs[0].sequence[0].id == "2/5+1/5");
    REQUIRE(logs[0].first_attempts.size() == 1);
    CHECK(logs[0].first_attempts[0].field == FieldId::ConvertCheck);
    // a hint on the first attempt is an error like any other
    CHECK(outcome_is_error(logs[0].first_attempts[0].outcome));
    CHECK_FALSE(logs[0].condition.has_value());
}

TEST_CASE("parsing keeps first attempts and splits repeated problems") {
    const std::string text =
        "student_id,problem_id,step_field,attempt_index,outcome\n"
        "s1,2/3*4/5,convert_check,1,correct\n"
        "s1,2/3*4/5,answer_num,1,incorrect\n"
        "s1,2/3*4/5,answer_num,2,correct\n"
        "s1,2/3*4/5,answer_den,1,correct\n"
        "s1,2/3*4/5,done,1,correct\n"
        "s1,2/3*4/5,convert_check,1,correct\n"
        "s1,2/3*4/5,answer_num,1,correct\n";
    const auto logs = parse_transactions(text);
    REQUIRE(logs.size() == 1);
    // the completed done step closes the first instance, so the repeat is new
    REQUIRE(logs[0].sequence.size() == 2);
    REQUIRE(logs[0].first_attempts.size() == 6);
    CHECK(logs[0].first_attempts[1].outcome == Outcome::Incorrect);
    CHECK(logs[0].first_attempts[4].outcome == Outcome::Correct);
    CHECK(logs[0].first_attempts[5].field == FieldId::AnswerNum);
}

TEST_CASE("students are reported in order of first appearance") {
    const std::string text =
        "student_id,problem_id,step_field,attempt_index,outcome\n"
        "beta,2/5+1/5,convert_check,1,correct\n"
        "alfa,2/5+1/5,convert_check,1,correct\n"
        "beta,2/5+1/5,answer_num,1,correct\n";
    const auto logs = parse_transactions(text);
    REQUIRE(logs.size() == 2);
    CHECK(logs[0].student_id == "beta");
    CHECK(logs[1].student_id == "alfa");
    CHECK(logs[0].first_attempts.size() == 2);
    CHECK(logs[1].first_attempts.size() == 1);
}

TEST_CASE("malformed transactions name the offending line") {
    const std::string header = "student_id,problem_id,step_field,attempt_index,outcome\n";

    CHECK_THROWS_WITH(parse_transactions("who,what\n"),
                      Catch::Matchers::ContainsSubstring("line 1"));
    CHECK_THROWS_WITH(parse_transactions(header + "s1,2/5+1/5,convert_check,1\n"),
                      Catch::Matchers::ContainsSubstring("line 2"));
    CHECK_THROWS_WITH(parse_transactions(header + "s1,x/2+1/3,convert_check,1,correct\n"),
                      Catch::Matchers::ContainsSubstring("line 2"));
    CHECK_THROWS_WITH(parse_transactions(header + "s1,2/5+1/5,north_field,1,correct\n"),
                      Catch::Matchers::ContainsSubstring("north_field"));
    CHECK_THROWS_WITH(parse_transactions(header + "s1,2/5+1/5,convert_check,1,maybe\n"),
                      Catch::Matchers::ContainsSubstring("maybe"));
    CHECK_THROWS_WITH(parse_transactions(header + "s1,2/5+1/5,convert_check,0,correct\n"),
                      Catch::Matchers::ContainsSubstring("line 2"));
    CHECK_THROWS_WITH(
        parse_transactions(header + "s1,2/5+1/5,convert_check,1,correct\n" +
                           "s1,2/5+1/5,convert_check,3,correct\n"),
        Catch::Matchers::ContainsSubstring("line 3"));
    CHECK_THROWS_AS(parse_transactions(""), std::invalid_argument);
}

TEST_CASE("synthesized logs survive the emit/parse round trip") {
    AgentConfig config;
    config.skill_groups = {SkillGroupId::FracAddSame, SkillGroupId::FracMul};
    const auto sequence = generate_sequence(SequenceSchema::BlockedA, 11);
    const SynthResult synth = synth_student(config, sequence, "s-rt", 99);

    const std::string csv = emit_transactions(synth.transactions);
    const auto logs = parse_transactions(csv);
    REQUIRE(logs.size() == 1);
    const StudentLog& parsed = logs[0];
    CHECK(parsed.student_id == "s-rt");
    CHECK(parsed.sequence == sequence);
    CHECK(parsed.first_attempts == synth.log.first_attempts);
    REQUIRE(parsed.condition.has_value());
    CHECK(*parsed.condition == SequenceSchema::BlockedA);
}

TEST_CASE("synthesis is deterministic in the seed") {
    AgentConfig config;
    const auto sequence = generate_sequence(SequenceSchema::Interleaved, 4);
    const SynthResult a = synth_student(config, sequence, "s", 1234);
    const SynthResult b = synth_student(config, sequence, "s", 1234);
    CHECK(emit_transactions(a.transactions) == emit_transactions(b.transactions));
    CHECK(a.log.first_attempts == b.log.first_attempts);
}

TEST_CASE("a full-prior noiseless student never errs") {
    AgentConfig config;
    config.skill_groups = {SkillGroupId::FracAddSame, SkillGroupId::FracConvertButterfly,
                           SkillGroupId::FracMul};
    config.params.guess_rate = 0.0;
    const auto sequence = generate_sequence(SequenceSchema::Interleaved, 7);
    const SynthResult synth = synth_student(config, sequence, "expert", 5);
    for (const StepRecord& r : synth.log.first_attempts)
        CHECK(r.outcome == Outcome::Correct);
    for (const Transaction& t : synth.transactions) CHECK(t.outcome == Outcome::Correct);
}

TEST_CASE("an empty-prior student opens every component with a hint") {
    AgentConfig config;
    const auto sequence = generate_sequence(SequenceSchema::Interleaved, 8);
    const SynthResult synth = synth_student(config, sequence, "novice", 6);
    const auto pairs = opportunity_errors(synth.log.first_attempts);
    REQUIRE(pairs.size() == synth.log.first_attempts.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (pairs[i].first == 0) {
            CHECK(synth.log.first_attempts[i].outcome == Outcome::Hint);
            CHECK(pairs[i].second == 1.0);
        }
    }
}
