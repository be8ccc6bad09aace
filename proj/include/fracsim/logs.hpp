#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fracsim/agent.hpp"
#include "fracsim/fraction.hpp"
#include "fracsim/sequences.hpp"
#include "fracsim/tutor.hpp"

namespace fracsim {

inline constexpr const char* kTransactionsHeader =
    "student_id,problem_id,step_field,attempt_index,outcome";
inline constexpr const char* kCurveHeader = "opportunity,error_rate,n,ci_low,ci_high";

struct Transaction {
    std::string student_id;
    std::string problem_id;
    FieldId step_field = FieldId::ConvertCheck;
    int attempt_index = 1;
    Outcome outcome = Outcome::Correct;
    long long row_index = 0;

    friend bool operator==(const Transaction&, const Transaction&) = default;
};

struct StudentLog {
    std::string student_id;
    std::optional<SequenceSchema> condition;
    std::vector<Problem> sequence;
    std::vector<StepRecord> first_attempts;
};

struct CurvePoint {
    int opportunity = 0;
    double error_rate = 0.0;
    int n = 0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct LearningCurve {
    std::vector<CurvePoint> points;
};

inline std::string emit_transactions(const std::vector<Transaction>& rows) {
    std::string out = kTransactionsHeader;
    out += '\n';
    for (const Transaction& t : rows) {
        out += t.student_id;
        out += ',';
        out += t.problem_id;
        out += ',';
        out += field_name(t.step_field);
        out += ',';
        out += std::to_string(t.attempt_index);
        out += ',';
        out += outcome_name(t.outcome);
        out += '\n';
    }
    return out;
}

namespace log_detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

[[noreturn]] inline void row_error(std::size_t line_no, const std::string& what) {
    throw std::invalid_argument("transactions line " + std::to_string(line_no) + ": " + what);
}

inline std::optional<SequenceSchema> try_classify(const std::vector<Problem>& sequence) {
    try {
        return classify_sequence(sequence);
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
}

}  // namespace log_detail

// Parses the five-column transaction schema into per-student logs. Rows are
// grouped by student in order of first appearance; a student's consecutive
// rows sharing a problem id form one problem instance, with a completed done
// field closing the instance so back-to-back repeats of the same problem
// don't merge.
inline std::vector<StudentLog> parse_transactions(const std::string& text) {
    using log_detail::row_error;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) throw std::invalid_argument("transactions: empty input");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTransactionsHeader)
        row_error(line_no, "expected header \"" + std::string(kTransactionsHeader) + "\"");

    struct OpenProblem {
        Problem problem;
        bool finished = false;
        std::map<FieldId, int> attempts;
    };
    struct Builder {
        StudentLog log;
        std::optional<OpenProblem> open;
    };
    std::vector<Builder> builders;
    std::map<std::string, std::size_t> by_student;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cols = log_detail::split_csv_line(line);
        if (cols.size() != 5)
            row_error(line_no, "expected 5 columns, got " + std::to_string(cols.size()));

        const std::string& student = cols[0];
        FieldId field;
        Outcome outcome;
        Problem problem;
        int attempt = 0;
        try {
            problem = parse_problem(cols[1]);
            field = parse_field(cols[2]);
            outcome = parse_outcome(cols[4]);
        } catch (const std::invalid_argument& e) {
            row_error(line_no, e.what());
        }
        try {
            std::size_t used = 0;
            attempt = std::stoi(cols[3], &used);
            if (used != cols[3].size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            row_error(line_no, "bad attempt_index \"" + cols[3] + "\"");
        }
        if (attempt < 1) row_error(line_no, "attempt_index must be >= 1");

        auto [it, inserted] = by_student.try_emplace(student, builders.size());
        if (inserted) {
            builders.emplace_back();
            builders.back().log.student_id = student;
        }
        Builder& b = builders[it->second];

        if (!b.open || b.open->finished || !(b.open->problem == problem)) {
            b.open = OpenProblem{problem, false, {}};
            b.log.sequence.push_back(problem);
        }
        int& count = b.open->attempts[field];
        if (attempt != count + 1)
            row_error(line_no, "attempt_index " + std::to_string(attempt) + " for field " +
                                   field_name(field) + " does not follow " +
                                   std::to_string(count));
        count = attempt;
        if (field == FieldId::Done && outcome == Outcome::Correct) b.open->finished = true;
        if (attempt == 1)
            b.log.first_attempts.push_back(
                StepRecord{problem.id, problem.ptype, field, outcome});
    }

    std::vector<StudentLog> logs;
    logs.reserve(builders.size());
    for (Builder& b : builders) {
        b.log.condition = log_detail::try_classify(b.log.sequence);
        logs.push_back(std::move(b.log));
    }
    return logs;
}

// (opportunity, error) pairs in record order: opportunity counts prior
// records with the same knowledge component.
inline std::vector<std::pair<int, double>> opportunity_errors(
    const std::vector<StepRecord>& records) {
    std::map<KCLabel, int> seen;
    std::vector<std::pair<int, double>> pairs;
    pairs.reserve(records.size());
    for (const StepRecord& r : records) {
        int& count = seen[kc_of(r)];
        pairs.emplace_back(count, outcome_is_error(r.outcome) ? 1.0 : 0.0);
        ++count;
    }
    return pairs;
}

// Groups pooled (opportunity, error) pairs into curve points with a normal
// approximation confidence interval, clamped to [0, 1].
inline LearningCurve curve_from_pairs(const std::vector<std::pair<int, double>>& pairs) {
    std::map<int, std::vector<double>> groups;
    for (const auto& [opportunity, error] : pairs) groups[opportunity].push_back(error);

    LearningCurve curve;
    curve.points.reserve(groups.size());
    for (const auto& [opportunity, errors] : groups) {
        const int n = static_cast<int>(errors.size());
        double sum = 0.0;
        for (double e : errors) sum += e;
        const double mean = sum / n;
        double sd = 0.0;
        if (n >= 2) {
            double ss = 0.0;
            for (double e : errors) ss += (e - mean) * (e - mean);
            sd = std::sqrt(ss / (n - 1));
        }
        const double half = 1.96 * sd / std::sqrt(static_cast<double>(n));
        CurvePoint pt;
        pt.opportunity = opportunity;
        pt.error_rate = mean;
        pt.n = n;
        pt.ci_low = std::max(0.0, mean - half);
        pt.ci_high = std::min(1.0, mean + half);
        curve.points.push_back(pt);
    }
    return curve;
}

inline LearningCurve learning_curve(const std::vector<StepRecord>& records) {
    return curve_from_pairs(opportunity_errors(records));
}

inline std::string format_fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string emit_curve_csv(const LearningCurve& curve) {
    std::string out = kCurveHeader;
    out += '\n';
    for (const CurvePoint& p : curve.points) {
        out += std::to_string(p.opportunity);
        out += ',';
        out += format_fixed(p.error_rate);
        out += ',';
        out += std::to_string(p.n);
        out += ',';
        out += format_fixed(p.ci_low);
        out += ',';
        out += format_fixed(p.ci_high);
        out += '\n';
    }
    return out;
}

struct SynthResult {
    StudentLog log;
    std::vector<Transaction> transactions;
};

// Runs one agent over a problem sequence and reports both the raw transaction
// rows (every attempt) and the derived per-student log.
inline SynthResult synth_student(const AgentConfig& config,
                                 const std::vector<Problem>& sequence,
                                 const std::string& student_id, std::uint64_t seed) {
    Agent agent(config, seed);
    SynthResult out;
    out.log.student_id = student_id;
    out.log.sequence = sequence;
    long long row = 0;
    for (const Problem& p : sequence) {
        const RunResult r = agent.run_problem(p);
        int attempts[kFieldCount] = {};
        for (const StepResult& s : r.transcript) {
            const int f = static_cast<int>(s.field);
            out.transactions.push_back(
                Transaction{student_id, p.id, s.field, ++attempts[f], s.outcome, row++});
        }
        out.log.first_attempts.insert(out.log.first_attempts.end(),
                                      r.first_attempts.begin(), r.first_attempts.end());
    }
    out.log.condition = log_detail::try_classify(out.log.sequence);
    return out;
}

}  // namespace fracsim
