#pragma once

#include <climits>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fracsim/agent.hpp"
#include "fracsim/logs.hpp"
#include "fracsim/sequences.hpp"

namespace fracsim {

struct Campaign {
    AgentConfig config;
    std::vector<SequenceSchema> schemas;
    int replications = 20;
    std::uint64_t seed = 0;
};

struct RepSummary {
    double mean_error = 0.0;
    double final_window_error = 0.0;  // mean error over the last three opportunities
};

struct ConditionReport {
    SequenceSchema schema = SequenceSchema::Interleaved;
    LearningCurve curve;
    std::vector<RepSummary> replications;
    double mean_error = 0.0;
};

// Aggregates one condition's replications: each point averages every record
// at that opportunity, n counts those records, and the confidence band spans
// the dispersion of per-replication means, so a single replication yields a
// zero-width band.
inline LearningCurve curve_across_replications(
    const std::vector<std::vector<std::pair<int, double>>>& rep_pairs) {
    std::map<int, std::pair<double, int>> pooled;
    std::map<int, std::vector<double>> rep_means;
    for (const auto& pairs : rep_pairs) {
        std::map<int, std::pair<double, int>> local;
        for (const auto& [opportunity, error] : pairs) {
            auto& [sum, count] = local[opportunity];
            sum += error;
            ++count;
        }
        for (const auto& [opportunity, stat] : local) {
            auto& [sum, count] = pooled[opportunity];
            sum += stat.first;
            count += stat.second;
            rep_means[opportunity].push_back(stat.first / stat.second);
        }
    }

    LearningCurve curve;
    curve.points.reserve(pooled.size());
    for (const auto& [opportunity, stat] : pooled) {
        const double mean = stat.first / stat.second;
        const std::vector<double>& means = rep_means[opportunity];
        double sd = 0.0;
        if (means.size() >= 2) {
            double m = 0.0;
            for (double v : means) m += v;
            m /= means.size();
            double ss = 0.0;
            for (double v : means) ss += (v - m) * (v - m);
            sd = std::sqrt(ss / (means.size() - 1));
        }
        const double half = 1.96 * sd / std::sqrt(static_cast<double>(means.size()));
        CurvePoint pt;
        pt.opportunity = opportunity;
        pt.error_rate = mean;
        pt.n = stat.second;
        pt.ci_low = std::max(0.0, mean - half);
        pt.ci_high = std::min(1.0, mean + half);
        curve.points.push_back(pt);
    }
    return curve;
}

// Runs the campaign config over each schema: every replication gets a freshly
// drawn sequence and a fresh agent, opportunities are counted within the
// replication, and the condition curve pools all replications.
inline std::vector<ConditionReport> simulate_counterfactual(const Campaign& campaign) {
    if (campaign.replications < 1)
        throw std::invalid_argument("campaign: replications must be >= 1");
    std::vector<ConditionReport> reports;
    reports.reserve(campaign.schemas.size());
    for (SequenceSchema schema : campaign.schemas) {
        ConditionReport report;
        report.schema = schema;
        std::vector<std::vector<std::pair<int, double>>> rep_pairs;
        rep_pairs.reserve(campaign.replications);
        for (int rep = 0; rep < campaign.replications; ++rep) {
            const auto problems = generate_sequence(
                schema, derive_seed(campaign.seed, 0x5c, static_cast<std::uint64_t>(schema),
                                    static_cast<std::uint64_t>(rep)));
            Agent agent(campaign.config,
                        derive_seed(campaign.seed, 0xa6, static_cast<std::uint64_t>(schema),
                                    static_cast<std::uint64_t>(rep)));
            std::vector<StepRecord> records;
            for (const Problem& p : problems) {
                const RunResult r = agent.run_problem(p);
                records.insert(records.end(), r.first_attempts.begin(),
                               r.first_attempts.end());
            }
            auto pairs = opportunity_errors(records);

            RepSummary summary;
            int max_opportunity = 0;
            for (const auto& [opportunity, error] : pairs)
                max_opportunity = std::max(max_opportunity, opportunity);
            double sum = 0.0, tail_sum = 0.0;
            int tail_n = 0;
            for (const auto& [opportunity, error] : pairs) {
                sum += error;
                if (opportunity >= max_opportunity - 2) {
                    tail_sum += error;
                    ++tail_n;
                }
            }
            summary.mean_error = pairs.empty() ? 0.0 : sum / pairs.size();
            summary.final_window_error = tail_n ? tail_sum / tail_n : 0.0;
            report.replications.push_back(summary);
            rep_pairs.push_back(std::move(pairs));
        }
        report.curve = curve_across_replications(rep_pairs);
        double total = 0.0;
        long long count = 0;
        for (const auto& pairs : rep_pairs)
            for (const auto& [opportunity, error] : pairs) {
                total += error;
                ++count;
            }
        report.mean_error = count ? total / count : 0.0;
        reports.push_back(std::move(report));
    }
    return reports;
}

// Centered moving average with window 3, truncated at the ends.
inline std::vector<double> smoothed_errors(const LearningCurve& curve) {
    const std::size_t n = curve.points.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        int count = 0;
        for (std::size_t j = (i == 0 ? 0 : i - 1); j < std::min(n, i + 2); ++j) {
            sum += curve.points[j].error_rate;
            ++count;
        }
        out[i] = sum / count;
    }
    return out;
}

// First opportunity at which the smoothed curve drops strictly below the
// threshold; INT_MAX when it never does.
inline int crossing_opportunity(const LearningCurve& curve, double threshold) {
    const auto smoothed = smoothed_errors(curve);
    for (std::size_t i = 0; i < smoothed.size(); ++i)
        if (smoothed[i] < threshold) return curve.points[i].opportunity;
    return INT_MAX;
}

inline constexpr int kReportOpportunities[] = {0, 3, 5, 15};
inline constexpr double kReportThresholds[] = {0.5, 0.2, 0.1};

struct ConditionSummary {
    std::string schema;
    double mean_error = 0.0;
    std::map<int, std::optional<double>> error_at;
    std::map<std::string, int> crossings;  // threshold label -> opportunity or INT_MAX
};

struct PairwiseDiff {
    std::string a;
    std::string b;
    double mean_error_diff = 0.0;  // a minus b
};

struct ComparisonTable {
    std::vector<ConditionSummary> conditions;
    std::vector<PairwiseDiff> pairs;
};

inline ComparisonTable compare(const std::vector<ConditionReport>& reports) {
    if (reports.size() < 2)
        throw std::invalid_argument("compare: need at least two condition reports");
    ComparisonTable table;
    for (const ConditionReport& r : reports) {
        ConditionSummary s;
        s.schema = sequence_schema_name(r.schema);
        s.mean_error = r.mean_error;
        for (int opportunity : kReportOpportunities) {
            std::optional<double> value;
            for (const CurvePoint& p : r.curve.points)
                if (p.opportunity == opportunity) value = p.error_rate;
            s.error_at[opportunity] = value;
        }
        for (double threshold : kReportThresholds)
            s.crossings[format_fixed(threshold, 1)] = crossing_opportunity(r.curve, threshold);
        table.conditions.push_back(std::move(s));
    }
    for (std::size_t i = 0; i < reports.size(); ++i)
        for (std::size_t j = i + 1; j < reports.size(); ++j)
            table.pairs.push_back(PairwiseDiff{sequence_schema_name(reports[i].schema),
                                               sequence_schema_name(reports[j].schema),
                                               reports[i].mean_error - reports[j].mean_error});
    return table;
}

inline nlohmann::json comparison_to_json(const ComparisonTable& table) {
    nlohmann::json conditions = nlohmann::json::array();
    for (const ConditionSummary& s : table.conditions) {
        nlohmann::json error_at;
        for (const auto& [opportunity, value] : s.error_at) {
            if (value)
                error_at[std::to_string(opportunity)] = *value;
            else
                error_at[std::to_string(opportunity)] = nullptr;
        }
        nlohmann::json crossings;
        for (const auto& [label, opportunity] : s.crossings) {
            if (opportunity == INT_MAX)
                crossings[label] = nullptr;
            else
                crossings[label] = opportunity;
        }
        conditions.push_back(nlohmann::json{{"schema", s.schema},
                                            {"mean_error", s.mean_error},
                                            {"error_at_opportunity", error_at},
                                            {"threshold_crossings", crossings}});
    }
    nlohmann::json pairs = nlohmann::json::array();
    for (const PairwiseDiff& p : table.pairs)
        pairs.push_back(nlohmann::json{
            {"a", p.a}, {"b", p.b}, {"mean_error_diff", p.mean_error_diff}});
    return nlohmann::json{{"conditions", conditions}, {"pairwise", pairs}};
}

inline nlohmann::json campaign_to_json(const Campaign& c) {
    nlohmann::json schemas = nlohmann::json::array();
    for (SequenceSchema s : c.schemas) schemas.push_back(sequence_schema_name(s));
    return nlohmann::json{{"config", Agent::config_to_json(c.config)},
                          {"schemas", schemas},
                          {"replications", c.replications},
                          {"seed", c.seed}};
}

inline Campaign campaign_from_json(const nlohmann::json& j) {
    Campaign c;
    c.config = Agent::config_from_json(j.at("config"));
    for (const auto& s : j.at("schemas"))
        c.schemas.push_back(parse_sequence_schema(s.get<std::string>()));
    if (j.contains("replications")) c.replications = j.at("replications").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

namespace svg_detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                           "#9467bd", "#ff7f0e", "#8c564b"};
inline constexpr int kPaletteSize = 6;

}  // namespace svg_detail

// Deterministic line chart: one polyline per curve with a translucent
// confidence band, fixed palette, legend on the right.
inline std::string render_curve_svg(const std::vector<LearningCurve>& curves,
                                    const std::vector<std::string>& labels) {
    using svg_detail::kPalette;
    using svg_detail::xml_escape;
    if (curves.empty()) throw std::invalid_argument("render_curve_svg: no curves");
    if (labels.size() != curves.size())
        throw std::invalid_argument("render_curve_svg: one label per curve required");

    const double x0 = 60, x1 = 540, y0 = 20, y1 = 395;
    const int width = 720, height = 440;
    int max_opportunity = 1;
    for (const LearningCurve& c : curves)
        for (const CurvePoint& p : c.points)
            max_opportunity = std::max(max_opportunity, p.opportunity);

    const auto fx = [&](double opportunity) {
        return x0 + (x1 - x0) * opportunity / max_opportunity;
    };
    const auto fy = [&](double error) { return y1 - (y1 - y0) * error; };
    const auto num = [](double v) { return format_fixed(v, 2); };

    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " +
           std::to_string(width) + " " + std::to_string(height) + "\">\n";
    out += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) + "\" height=\"" +
           std::to_string(height) + "\" fill=\"#ffffff\"/>\n";

    out += "<g stroke=\"#333333\" stroke-width=\"1\">\n";
    out += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x0) +
           "\" y2=\"" + num(y1) + "\"/>\n";
    out += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x1) +
           "\" y2=\"" + num(y1) + "\"/>\n";
    out += "</g>\n";

    out += "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333333\">\n";
    for (int i = 0; i <= 4; ++i) {
        const double e = i * 0.25;
        const double y = fy(e);
        out += "<line x1=\"" + num(x0 - 4) + "\" y1=\"" + num(y) + "\" x2=\"" + num(x0) +
               "\" y2=\"" + num(y) + "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
        out += "<text x=\"" + num(x0 - 8) + "\" y=\"" + num(y + 4) +
               "\" text-anchor=\"end\">" + format_fixed(e, 2) + "</text>\n";
    }
    const int x_step = std::max(1, (max_opportunity + 7) / 8);
    for (int o = 0; o <= max_opportunity; o += x_step) {
        const double x = fx(o);
        out += "<line x1=\"" + num(x) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x) +
               "\" y2=\"" + num(y1 + 4) + "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
        out += "<text x=\"" + num(x) + "\" y=\"" + num(y1 + 18) +
               "\" text-anchor=\"middle\">" + std::to_string(o) + "</text>\n";
    }
    out += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(y1 + 34) +
           "\" text-anchor=\"middle\">opportunity</text>\n";
    out += "<text x=\"16\" y=\"" + num((y0 + y1) / 2) +
           "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " + num((y0 + y1) / 2) +
           ")\">error rate</text>\n";
    out += "</g>\n";

    for (std::size_t i = 0; i < curves.size(); ++i) {
        const char* color = kPalette[i % svg_detail::kPaletteSize];
        const LearningCurve& curve = curves[i];
        if (!curve.points.empty()) {
            std::string band;
            for (const CurvePoint& p : curve.points)
                band += num(fx(p.opportunity)) + "," + num(fy(p.ci_high)) + " ";
            for (auto it = curve.points.rbegin(); it != curve.points.rend(); ++it)
                band += num(fx(it->opportunity)) + "," + num(fy(it->ci_low)) + " ";
            band.pop_back();
            out += "<polygon points=\"" + band + "\" fill=\"" + color +
                   "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
        }
        std::string line;
        for (const CurvePoint& p : curve.points)
            line += num(fx(p.opportunity)) + "," + num(fy(p.error_rate)) + " ";
        if (!line.empty()) line.pop_back();
        out += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"" + color +
               "\" stroke-width=\"1.5\"/>\n";
    }

    out += "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333333\">\n";
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const char* color = kPalette[i % svg_detail::kPaletteSize];
        const double ly = y0 + 10 + 18.0 * i;
        out += "<line x1=\"" + num(x1 + 14) + "\" y1=\"" + num(ly) + "\" x2=\"" +
               num(x1 + 38) + "\" y2=\"" + num(ly) + "\" stroke=\"" + color +
               "\" stroke-width=\"1.5\"/>\n";
        out += "<text x=\"" + num(x1 + 44) + "\" y=\"" + num(ly + 4) + "\">" +
               xml_escape(labels[i]) + "</text>\n";
    }
    out += "</g>\n";
    out += "</svg>\n";
    return out;
}

}  // namespace fracsim
