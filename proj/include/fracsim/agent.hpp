#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fracsim/rng.hpp"
#include "fracsim/skills.hpp"
#include "fracsim/tutor.hpp"

namespace fracsim {

struct CognitiveParams {
    double guess_rate = 0.30;     // chance of firing a random matched activation
    double action_penalty = 0.05; // cost of each internal computation
    double discount = 0.70;       // decay of future reward across decisions
    double learning_rate = 0.10;  // fixed; not part of the tuning space

    friend bool operator==(const CognitiveParams&, const CognitiveParams&) = default;
};

struct AgentConfig {
    std::set<SkillGroupId> skill_groups;
    CognitiveParams params;

    friend bool operator==(const AgentConfig&, const AgentConfig&) = default;
};

// One TD update. External firings are terminal (next_max_q = 0); internal
// firings bootstrap on the updated value of the next firing in the trace.
inline double q_update(double q, double reward, double next_max_q,
                       const CognitiveParams& params) {
    return q + params.learning_rate * (reward + params.discount * next_max_q - q);
}

enum class Outcome { Correct, Incorrect, Hint };

inline const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::Correct: return "correct";
        case Outcome::Incorrect: return "incorrect";
        case Outcome::Hint: return "hint";
    }
    throw std::logic_error("outcome_name: bad enum");
}

inline Outcome parse_outcome(const std::string& s) {
    if (s == "correct") return Outcome::Correct;
    if (s == "incorrect") return Outcome::Incorrect;
    if (s == "hint") return Outcome::Hint;
    throw std::invalid_argument("unknown outcome: " + s);
}

// Hints and incorrect entries both count as errors in analytics.
inline bool outcome_is_error(Outcome o) { return o != Outcome::Correct; }

// A knowledge component is a problem type paired with a step field.
struct KCLabel {
    ProblemType ptype = ProblemType::AddSame;
    FieldId field = FieldId::ConvertCheck;

    auto tie() const { return std::tuple(ptype, field); }
    friend bool operator==(const KCLabel& a, const KCLabel& b) { return a.tie() == b.tie(); }
    friend bool operator<(const KCLabel& a, const KCLabel& b) { return a.tie() < b.tie(); }
};

// First-attempt outcome of one step, in attempt order.
struct StepRecord {
    std::string problem_id;
    ProblemType ptype = ProblemType::AddSame;
    FieldId field = FieldId::ConvertCheck;
    Outcome outcome = Outcome::Correct;

    friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

inline KCLabel kc_of(const StepRecord& r) { return KCLabel{r.ptype, r.field}; }

struct SkillActivation {
    Skill* skill = nullptr;
    bool internal = false;
    Source a;                  // internal bindings
    Source b;
    long long value = 0;       // internal result
    FieldId field = FieldId::ConvertCheck;  // external target
    StepValue proposed;
    double q = 0.0;
};

enum class DecisionKind { Fire, RequestHint };

struct Decision {
    DecisionKind kind = DecisionKind::RequestHint;
    std::size_t index = 0;
};

// With probability guess_rate, fire a uniformly random matched activation;
// otherwise fire the best activation if its value is positive (ties broken
// uniformly), else request a hint.
inline Decision select_action(const std::vector<SkillActivation>& activations,
                              const CognitiveParams& params, Rng& rng) {
    if (activations.empty()) return Decision{DecisionKind::RequestHint, 0};
    if (rng.bernoulli(params.guess_rate))
        return Decision{DecisionKind::Fire, rng.index(activations.size())};

    std::vector<std::size_t> best;
    double best_q = 0.0;
    for (std::size_t i = 0; i < activations.size(); ++i) {
        const double q = activations[i].q;
        if (q <= 0.0) continue;
        if (best.empty() || q > best_q) {
            best_q = q;
            best.assign(1, i);
        } else if (q == best_q) {
            best.push_back(i);
        }
    }
    if (best.empty()) return Decision{DecisionKind::RequestHint, 0};
    const std::size_t pick = (best.size() == 1) ? best[0] : best[rng.index(best.size())];
    return Decision{DecisionKind::Fire, pick};
}

struct StepResult {
    Outcome outcome = Outcome::Correct;
    FieldId field = FieldId::ConvertCheck;
};

struct RunResult {
    std::vector<StepRecord> first_attempts;
    std::vector<StepResult> transcript;  // every attempt, in order
};

class Agent {
public:
    static constexpr int kInternalLoopCap = 10;
    static constexpr int kMaxChain = 3;
    // A skill with no learned value at the current context falls back to a
    // discounted mean of its same-field values from other problem types, but
    // only once the tutor has interacted with this knowledge component. Cold
    // knowledge components therefore always bottom out in a hint.
    static constexpr double kTransferWeight = 0.9;

    Agent(AgentConfig config, std::uint64_t seed)
        : config_(std::move(config)), rng_(derive_seed(seed, 0x51)) {
        for (Skill& s : primitive_skills()) add_skill(std::move(s));
        for (Skill& s : fraction_skills(config_.skill_groups)) add_skill(std::move(s));
    }

    const AgentConfig& config() const { return config_; }
    const CognitiveParams& params() const { return config_.params; }

    std::vector<const Skill*> skills() const {
        std::vector<const Skill*> out;
        out.reserve(order_.size());
        for (std::size_t i : order_) out.push_back(ltm_[i].get());
        return out;
    }

    const Skill* find_skill(const std::string& id) const {
        for (const auto& s : ltm_)
            if (s->id == id) return s.get();
        return nullptr;
    }

    double expected_value(const Skill& skill, ProblemType p, int slot) const {
        auto it = skill.qtable.find(QKey{p, slot});
        if (it != skill.qtable.end()) return it->second;
        if (slot == QKey::kInternalSlot) return 0.0;
        if (!attempted_[static_cast<int>(p)][slot]) return 0.0;
        double sum = 0.0;
        int n = 0;
        for (const auto& [key, q] : skill.qtable) {
            if (key.slot != slot) continue;
            sum += q;
            ++n;
        }
        return n ? kTransferWeight * (sum / n) : 0.0;
    }

    // All activations whose conditions hold in the current state, sorted by
    // skill id then bindings. External activations enter only when their
    // expected value is positive; an action not predicted to produce reward
    // is never a candidate, which is what drives hint requests.
    std::vector<SkillActivation> match_skills(const TutorState& ts) const {
        std::vector<SkillActivation> acts;
        const ProblemType p = ts.problem.ptype;

        struct Bound {
            Source src;
            long long value;
        };
        std::vector<Bound> sources;
        sources.reserve(4 + kFieldCount + scratch_.size());
        sources.push_back({Source::operand(Source::Side::Left, Source::Part::Num),
                           ts.problem.left.num});
        sources.push_back({Source::operand(Source::Side::Left, Source::Part::Den),
                           ts.problem.left.den});
        sources.push_back({Source::operand(Source::Side::Right, Source::Part::Num),
                           ts.problem.right.num});
        sources.push_back({Source::operand(Source::Side::Right, Source::Part::Den),
                           ts.problem.right.den});
        for (int i = 0; i < kFieldCount; ++i) {
            const FieldId f = static_cast<FieldId>(i);
            if (field_is_boolean(f) || ts.state_of(f) != FieldState::Locked) continue;
            sources.push_back({Source::field_value(f), ts.locked_value(f).number});
        }
        for (std::size_t i = 0; i < scratch_.size(); ++i)
            sources.push_back({Source::scratch(static_cast<int>(i)), scratch_[i]});

        for (std::size_t idx : order_) {
            Skill* skill = ltm_[idx].get();
            switch (skill->kind) {
                case Skill::Kind::InternalOp: {
                    const double q = expected_value(*skill, p, QKey::kInternalSlot);
                    const bool comm = arith_op_commutative(skill->op);
                    for (std::size_t i = 0; i < sources.size(); ++i) {
                        for (std::size_t j = comm ? i : 0; j < sources.size(); ++j) {
                            auto v = apply_arith(skill->op, sources[i].value, sources[j].value);
                            if (!v) continue;
                            SkillActivation act;
                            act.skill = skill;
                            act.internal = true;
                            act.a = sources[i].src;
                            act.b = sources[j].src;
                            act.value = *v;
                            act.q = q;
                            acts.push_back(act);
                        }
                    }
                    break;
                }
                case Skill::Kind::CopyAny: {
                    for (int f = 0; f < kFieldCount; ++f) {
                        const FieldId field = static_cast<FieldId>(f);
                        if (field_is_boolean(field)) continue;
                        if (ts.state_of(field) != FieldState::Empty) continue;
                        const double q = expected_value(*skill, p, f);
                        if (q <= 0.0) continue;
                        for (const Bound& src : sources) {
                            SkillActivation act;
                            act.skill = skill;
                            act.a = src.src;
                            act.field = field;
                            act.proposed = StepValue::of_int(src.value);
                            act.q = q;
                            acts.push_back(act);
                        }
                    }
                    break;
                }
                case Skill::Kind::WriteField: {
                    if (ts.state_of(skill->target) != FieldState::Empty) break;
                    const double q = expected_value(*skill, p, static_cast<int>(skill->target));
                    if (q <= 0.0) break;
                    if (!skill->conditions_hold(ts)) break;
                    auto value = skill->effect.evaluate(ts);
                    if (!value) break;
                    SkillActivation act;
                    act.skill = skill;
                    act.field = skill->target;
                    act.proposed = *value;
                    act.q = q;
                    acts.push_back(act);
                    break;
                }
            }
        }
        return acts;
    }

    // Runs the match-select-fire loop until the step resolves: an external
    // firing is graded by the tutor and credited backward over the trace; a
    // hint applies the demonstrated entry and compiles an explanation for it.
    StepResult step(TutorState& ts) {
        scratch_.clear();
        std::vector<TraceEntry> trace;
        int internal_count = 0;
        const ProblemType p = ts.problem.ptype;

        while (true) {
            if (internal_count >= kInternalLoopCap) return hint_step(ts);
            const auto activations = match_skills(ts);
            const Decision decision = select_action(activations, config_.params, rng_);
            if (decision.kind == DecisionKind::RequestHint) return hint_step(ts);

            const SkillActivation& act = activations[decision.index];
            if (act.internal) {
                scratch_.push_back(act.value);
                trace.push_back({act.skill, QKey::internal(p),
                                 -config_.params.action_penalty, act.q});
                ++internal_count;
                continue;
            }

            const Feedback feedback = check_step(ts, StepAction{act.field, act.proposed});
            const double reward = (feedback == Feedback::Correct) ? 1.0 : -1.0;
            trace.push_back({act.skill, QKey::external(p, act.field), reward, act.q});
            credit_trace(trace);
            mark_attempted(p, act.field);
            return StepResult{feedback == Feedback::Correct ? Outcome::Correct
                                                            : Outcome::Incorrect,
                              act.field};
        }
    }

    RunResult run_problem(const Problem& problem) {
        TutorState ts = start_problem(problem);
        RunResult result;
        std::array<bool, kFieldCount> seen{};
        int guard = 0;
        while (!ts.done) {
            if (++guard > 100000) throw std::logic_error("run_problem: no progress");
            const StepResult r = step(ts);
            result.transcript.push_back(r);
            const int f = static_cast<int>(r.field);
            if (!seen[f]) {
                seen[f] = true;
                result.first_attempts.push_back(
                    StepRecord{problem.id, problem.ptype, r.field, r.outcome});
            }
        }
        return result;
    }

    // Searches for a chain of internal operations, ending in a copy, that
    // reproduces the demonstrated value from problem operands and locked
    // fields. Iterative deepening returns all shortest explanations; each
    // distinct binding becomes (or refreshes) one compiled skill, seeded at
    // the demonstrated context with discount^(chain length - 1).
    std::vector<const Skill*> explain_and_compile(const Demonstration& demo,
                                                  const TutorState& ts) {
        struct Candidate {
            Computation comp;
            std::vector<Source> gates;
            int chain_len = 1;
        };
        std::vector<Candidate> candidates;

        std::vector<Source> base_sources;
        std::vector<long long> base_values;
        const auto add_base = [&](Source src) {
            if (auto v = resolve_int_source(src, ts)) {
                base_sources.push_back(src);
                base_values.push_back(*v);
            }
        };
        add_base(Source::operand(Source::Side::Left, Source::Part::Num));
        add_base(Source::operand(Source::Side::Left, Source::Part::Den));
        add_base(Source::operand(Source::Side::Right, Source::Part::Num));
        add_base(Source::operand(Source::Side::Right, Source::Part::Den));
        std::vector<Source> footprint;
        for (int i = 0; i < kFieldCount; ++i) {
            const FieldId f = static_cast<FieldId>(i);
            if (field_is_boolean(f) || ts.state_of(f) != FieldState::Locked) continue;
            add_base(Source::field_value(f));
            footprint.push_back(Source::field_value(f));
        }

        if (demo.value.boolean) {
            candidates.push_back({skill_detail::press(demo.value.flag), footprint, 1});
        } else {
            const long long goal = demo.value.number;
            const std::size_t n = base_sources.size();
            // depth 0: the value is directly available
            for (std::size_t i = 0; i < n; ++i) {
                if (base_values[i] == goal)
                    candidates.push_back({skill_detail::copy_of(base_sources[i]), {}, 1});
            }
            // depth 1: one arithmetic step
            if (candidates.empty()) {
                for (ArithOp op : {ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div}) {
                    const bool comm = arith_op_commutative(op);
                    for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t j = comm ? i : 0; j < n; ++j) {
                            auto v = apply_arith(op, base_values[i], base_values[j]);
                            if (v && *v == goal)
                                candidates.push_back(
                                    {skill_detail::one_step(op, base_sources[i], base_sources[j]),
                                     {}, 2});
                        }
                    }
                }
            }
            // depth 2: two steps, the second consuming the first
            if (candidates.empty() && kMaxChain >= 3) {
                for (ArithOp op0 : {ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div}) {
                    const bool comm0 = arith_op_commutative(op0);
                    for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t j = comm0 ? i : 0; j < n; ++j) {
                            auto mid = apply_arith(op0, base_values[i], base_values[j]);
                            if (!mid) continue;
                            const ChainStep step0{op0, base_sources[i], base_sources[j]};
                            const Source s0 = Source::scratch(0);
                            for (ArithOp op1 :
                                 {ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div}) {
                                for (std::size_t k = 0; k <= n; ++k) {
                                    const Source other =
                                        (k == n) ? s0 : base_sources[k];
                                    const long long other_v =
                                        (k == n) ? *mid : base_values[k];
                                    auto v1 = apply_arith(op1, *mid, other_v);
                                    if (v1 && *v1 == goal)
                                        candidates.push_back(
                                            {Computation{{step0, ChainStep{op1, s0, other}},
                                                         Source::scratch(1)},
                                             {}, 3});
                                    if (k < n && !arith_op_commutative(op1)) {
                                        auto v2 = apply_arith(op1, other_v, *mid);
                                        if (v2 && *v2 == goal)
                                            candidates.push_back(
                                                {Computation{{step0, ChainStep{op1, other, s0}},
                                                             Source::scratch(1)},
                                                 {}, 3});
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }

        for (Candidate& c : candidates) {
            if (!c.comp.steps.empty() || c.comp.result.kind == Source::Kind::Field) {
                std::vector<Source> gates = c.gates;
                const auto add_gate = [&](const Source& s) {
                    if (s.kind == Source::Kind::Field) gates.push_back(s);
                };
                for (const ChainStep& step : c.comp.steps) {
                    add_gate(step.a);
                    add_gate(step.b);
                }
                add_gate(c.comp.result);
                std::sort(gates.begin(), gates.end());
                gates.erase(std::unique(gates.begin(), gates.end()), gates.end());
                c.gates = std::move(gates);
            }
        }

        std::sort(candidates.begin(), candidates.end(),
                  [](const Candidate& x, const Candidate& y) {
                      return computation_key(x.comp) < computation_key(y.comp);
                  });
        candidates.erase(std::unique(candidates.begin(), candidates.end(),
                                     [](const Candidate& x, const Candidate& y) {
                                         return x.comp == y.comp && x.gates == y.gates;
                                     }),
                         candidates.end());

        std::vector<const Skill*> affected;
        const QKey context = QKey::external(ts.problem.ptype, demo.field);
        for (const Candidate& c : candidates) {
            Skill pattern;
            pattern.kind = Skill::Kind::WriteField;
            pattern.target = demo.field;
            pattern.effect = c.comp;
            pattern.gates = c.gates;
            const double seed_value =
                std::pow(config_.params.discount, c.chain_len - 1);

            Skill* existing = nullptr;
            for (std::size_t idx : order_) {
                if (same_structure(*ltm_[idx], pattern)) {
                    existing = ltm_[idx].get();
                    break;
                }
            }
            if (existing) {
                auto it = existing->qtable.find(context);
                if (it == existing->qtable.end())
                    existing->qtable[context] = seed_value;
                else
                    it->second = q_update(it->second, seed_value, 0.0, config_.params);
                affected.push_back(existing);
                continue;
            }

            pattern.origin = SkillOrigin::Compiled;
            char buf[16];
            std::snprintf(buf, sizeof buf, "c%04d", ++compile_counter_);
            pattern.id = std::string(buf) + "/" + field_name(demo.field);
            for (const ChainStep& step : c.comp.steps)
                pattern.chain_ids.push_back(std::string("prim/") + arith_op_name(step.op));
            pattern.chain_ids.push_back("prim/copy");
            pattern.qtable[context] = seed_value;
            affected.push_back(add_skill(std::move(pattern)));
        }
        return affected;
    }

    nlohmann::json to_json() const {
        nlohmann::json skills = nlohmann::json::array();
        for (std::size_t idx : order_) skills.push_back(fracsim::to_json(*ltm_[idx]));
        nlohmann::json attempted = nlohmann::json::array();
        for (int p = 0; p < kProblemTypeCount; ++p)
            for (int f = 0; f < kFieldCount; ++f)
                if (attempted_[p][f])
                    attempted.push_back(nlohmann::json{
                        {"ptype", problem_type_name(static_cast<ProblemType>(p))},
                        {"field", field_name(static_cast<FieldId>(f))}});
        nlohmann::json rng_state = nlohmann::json::array();
        for (std::uint64_t word : rng_.state()) rng_state.push_back(std::to_string(word));
        return nlohmann::json{{"config", config_to_json(config_)},
                              {"compile_counter", compile_counter_},
                              {"attempted", attempted},
                              {"rng_state", rng_state},
                              {"skills", skills}};
    }

    static Agent from_json(const nlohmann::json& j) {
        Agent agent(config_from_json(j.at("config")), 0);
        agent.ltm_.clear();
        agent.order_.clear();
        for (const auto& s : j.at("skills")) agent.add_skill(skill_from_json(s));
        agent.compile_counter_ = j.at("compile_counter").get<int>();
        for (const auto& a : j.at("attempted"))
            agent.mark_attempted(parse_problem_type(a.at("ptype")),
                                 parse_field(a.at("field")));
        std::array<std::uint64_t, 4> state{};
        for (int i = 0; i < 4; ++i)
            state[i] = std::stoull(j.at("rng_state")[i].get<std::string>());
        agent.rng_.restore(state);
        return agent;
    }

    static nlohmann::json config_to_json(const AgentConfig& c) {
        nlohmann::json groups = nlohmann::json::array();
        for (SkillGroupId g : c.skill_groups) groups.push_back(skill_group_name(g));
        return nlohmann::json{{"skill_groups", groups},
                              {"guess_rate", c.params.guess_rate},
                              {"action_penalty", c.params.action_penalty},
                              {"discount", c.params.discount},
                              {"learning_rate", c.params.learning_rate}};
    }

    static AgentConfig config_from_json(const nlohmann::json& j) {
        AgentConfig c;
        if (j.contains("skill_groups"))
            for (const auto& g : j.at("skill_groups"))
                c.skill_groups.insert(parse_skill_group(g.get<std::string>()));
        if (j.contains("guess_rate")) c.params.guess_rate = j.at("guess_rate");
        if (j.contains("action_penalty")) c.params.action_penalty = j.at("action_penalty");
        if (j.contains("discount")) c.params.discount = j.at("discount");
        if (j.contains("learning_rate")) c.params.learning_rate = j.at("learning_rate");
        return c;
    }

private:
    struct TraceEntry {
        Skill* skill;
        QKey key;
        double reward;
        double q_seen;
    };

    static std::string computation_key(const Computation& c) {
        std::string key;
        const auto append_source = [&](const Source& s) {
            const auto [kind, side, part, field, slot, iv, bv] = s.tie();
            key += std::to_string(static_cast<int>(kind)) + ":" +
                   std::to_string(static_cast<int>(side)) +
                   std::to_string(static_cast<int>(part)) +
                   std::to_string(static_cast<int>(field)) + ":" +
                   std::to_string(slot) + ":" + std::to_string(iv) + ":" +
                   std::to_string(bv) + ";";
        };
        key += std::to_string(c.steps.size()) + "|";
        for (const ChainStep& s : c.steps) {
            key += arith_op_name(s.op);
            append_source(s.a);
            append_source(s.b);
        }
        key += "->";
        append_source(c.result);
        return key;
    }

    Skill* add_skill(Skill s) {
        ltm_.push_back(std::make_unique<Skill>(std::move(s)));
        const std::string& id = ltm_.back()->id;
        auto pos = std::lower_bound(order_.begin(), order_.end(), id,
                                    [&](std::size_t idx, const std::string& key) {
                                        return ltm_[idx]->id < key;
                                    });
        order_.insert(pos, ltm_.size() - 1);
        return ltm_.back().get();
    }

    void credit_trace(std::vector<TraceEntry>& trace) {
        double next_value = 0.0;
        for (auto it = trace.rbegin(); it != trace.rend(); ++it) {
            auto found = it->skill->qtable.find(it->key);
            const double q_old =
                (found != it->skill->qtable.end()) ? found->second : it->q_seen;
            const double q_new = q_update(q_old, it->reward, next_value, config_.params);
            it->skill->qtable[it->key] = q_new;
            next_value = q_new;
        }
    }

    StepResult hint_step(TutorState& ts) {
        const Demonstration demo = next_hint(ts);
        explain_and_compile(demo, ts);
        if (check_step(ts, StepAction{demo.field, demo.value}) != Feedback::Correct)
            throw std::logic_error("hint_step: demonstration rejected by tutor");
        mark_attempted(ts.problem.ptype, demo.field);
        return StepResult{Outcome::Hint, demo.field};
    }

    void mark_attempted(ProblemType p, FieldId f) {
        attempted_[static_cast<int>(p)][static_cast<int>(f)] = true;
    }

    AgentConfig config_;
    Rng rng_;
    std::vector<std::unique_ptr<Skill>> ltm_;
    std::vector<std::size_t> order_;  // ltm_ indices sorted by skill id
    std::vector<long long> scratch_;
    bool attempted_[kProblemTypeCount][kFieldCount] = {};
    int compile_counter_ = 0;
};

}  // namespace fracsim
