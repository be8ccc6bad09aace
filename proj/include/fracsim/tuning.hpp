#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fracsim/agent.hpp"
#include "fracsim/logs.hpp"
#include "fracsim/rng.hpp"

namespace fracsim {

struct ParamRange {
    double lo = 0.0;
    double hi = 1.0;
};

// Mixed search space: three skill-group inclusion flags plus three continuous
// parameters under uniform priors. The learning rate stays fixed.
struct SearchSpace {
    ParamRange guess_rate{0.0, 1.0};
    ParamRange action_penalty{0.0, 0.2};
    ParamRange discount{0.05, 0.99};
};

struct TpeSettings {
    int n_startup = 5;
    double gamma = 0.25;
    int n_candidates = 24;
};

struct Trial {
    AgentConfig config;
    double loss = 0.0;
    int trial_index = 0;
};

struct TuneResult {
    AgentConfig best;
    double best_loss = 0.0;
    std::vector<Trial> history;
};

namespace tune_detail {

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double norm_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
}

// Acklam's rational approximation to the standard normal quantile.
inline double norm_ppf(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    p = std::clamp(p, 1e-15, 1.0 - 1e-15);
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

inline double quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    if (v.empty()) return 0.0;
    const double idx = p * (v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = idx - lo;
    return v[lo] + frac * (v[hi] - v[lo]);
}

// Kernel density over one bounded dimension: a uniform mixture of Gaussians
// centered at the observations, each truncated to the parameter's range.
struct BoundedKde {
    std::vector<double> centers;
    double bandwidth = 1.0;
    ParamRange range;

    BoundedKde(std::vector<double> values, ParamRange r)
        : centers(std::move(values)), range(r) {
        const double n = static_cast<double>(centers.size());
        double sd = 0.0;
        if (centers.size() >= 2) {
            double mean = 0.0;
            for (double v : centers) mean += v;
            mean /= n;
            double ss = 0.0;
            for (double v : centers) ss += (v - mean) * (v - mean);
            sd = std::sqrt(ss / (n - 1));
        }
        const double iqr = quantile(centers, 0.75) - quantile(centers, 0.25);
        double spread = std::min(sd, iqr / 1.34);
        if (spread <= 0.0) spread = std::max(sd, iqr / 1.34);
        const double h = 0.9 * spread * std::pow(n, -0.2);
        // keep the kernels from degenerating once the sample clusters
        const double floor = (range.hi - range.lo) / std::min(100.0, n + 2.0);
        bandwidth = std::max(h, floor);
    }

    double component_mass(double mu) const {
        const double z = norm_cdf((range.hi - mu) / bandwidth) -
                         norm_cdf((range.lo - mu) / bandwidth);
        return std::max(z, 1e-12);
    }

    double density(double x) const {
        double sum = 0.0;
        for (double mu : centers)
            sum += norm_pdf((x - mu) / bandwidth) / (bandwidth * component_mass(mu));
        return std::max(sum / centers.size(), 1e-300);
    }

    double sample(Rng& rng) const {
        const double mu = centers[rng.index(centers.size())];
        const double alpha = norm_cdf((range.lo - mu) / bandwidth);
        const double u = alpha + rng.uniform() * component_mass(mu);
        const double x = mu + bandwidth * norm_ppf(u);
        return std::clamp(x, range.lo, range.hi);
    }
};

inline constexpr SkillGroupId kGroupOrder[] = {SkillGroupId::FracAddSame,
                                               SkillGroupId::FracConvertButterfly,
                                               SkillGroupId::FracMul};

struct ConfigVector {
    bool groups[3] = {};
    double values[3] = {};
};

inline ConfigVector to_vector(const AgentConfig& c) {
    ConfigVector v;
    for (int i = 0; i < 3; ++i) v.groups[i] = c.skill_groups.count(kGroupOrder[i]) > 0;
    v.values[0] = c.params.guess_rate;
    v.values[1] = c.params.action_penalty;
    v.values[2] = c.params.discount;
    return v;
}

inline AgentConfig from_vector(const ConfigVector& v) {
    AgentConfig c;
    for (int i = 0; i < 3; ++i)
        if (v.groups[i]) c.skill_groups.insert(kGroupOrder[i]);
    c.params.guess_rate = v.values[0];
    c.params.action_penalty = v.values[1];
    c.params.discount = v.values[2];
    return c;
}

inline std::array<ParamRange, 3> ranges_of(const SearchSpace& space) {
    return {space.guess_rate, space.action_penalty, space.discount};
}

inline AgentConfig sample_uniform(const SearchSpace& space, Rng& rng) {
    ConfigVector v;
    for (int i = 0; i < 3; ++i) v.groups[i] = rng.bernoulli(0.5);
    const auto ranges = ranges_of(space);
    for (int i = 0; i < 3; ++i) v.values[i] = rng.uniform(ranges[i].lo, ranges[i].hi);
    return from_vector(v);
}

}  // namespace tune_detail

// One TPE suggestion: before n_startup observations, sample uniformly; after,
// split history at the gamma quantile of loss, model good and bad halves per
// dimension (truncated-Gaussian KDE for continuous, Laplace-smoothed Bernoulli
// for flags), draw candidates from the good model and keep the one with the
// highest good-to-bad density ratio.
inline AgentConfig tpe_suggest(const std::vector<Trial>& history, const SearchSpace& space,
                               Rng& rng, const TpeSettings& settings = {}) {
    using namespace tune_detail;
    if (static_cast<int>(history.size()) < settings.n_startup)
        return sample_uniform(space, rng);

    std::vector<const Trial*> sorted;
    sorted.reserve(history.size());
    for (const Trial& t : history) sorted.push_back(&t);
    std::sort(sorted.begin(), sorted.end(), [](const Trial* a, const Trial* b) {
        return std::tie(a->loss, a->trial_index) < std::tie(b->loss, b->trial_index);
    });
    const std::size_t n_good = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(settings.gamma * sorted.size())));

    const auto ranges = ranges_of(space);
    std::vector<BoundedKde> good_kde, bad_kde;
    double good_true[3] = {}, bad_true[3] = {};
    for (int dim = 0; dim < 3; ++dim) {
        std::vector<double> good_values, bad_values;
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            const ConfigVector v = to_vector(sorted[i]->config);
            if (i < n_good) {
                good_values.push_back(v.values[dim]);
                good_true[dim] += v.groups[dim] ? 1.0 : 0.0;
            } else {
                bad_values.push_back(v.values[dim]);
                bad_true[dim] += v.groups[dim] ? 1.0 : 0.0;
            }
        }
        good_kde.emplace_back(std::move(good_values), ranges[dim]);
        bad_kde.emplace_back(std::move(bad_values), ranges[dim]);
    }
    const double n_bad = static_cast<double>(sorted.size() - n_good);
    double p_good[3], p_bad[3];
    for (int dim = 0; dim < 3; ++dim) {
        p_good[dim] = (good_true[dim] + 1.0) / (n_good + 2.0);
        p_bad[dim] = (bad_true[dim] + 1.0) / (n_bad + 2.0);
    }

    ConfigVector best;
    double best_score = -1e300;
    for (int c = 0; c < settings.n_candidates; ++c) {
        ConfigVector cand;
        for (int dim = 0; dim < 3; ++dim)
            cand.groups[dim] = rng.bernoulli(p_good[dim]);
        for (int dim = 0; dim < 3; ++dim) cand.values[dim] = good_kde[dim].sample(rng);

        double score = 0.0;
        for (int dim = 0; dim < 3; ++dim) {
            score += std::log(good_kde[dim].density(cand.values[dim])) -
                     std::log(bad_kde[dim].density(cand.values[dim]));
            const double pl = cand.groups[dim] ? p_good[dim] : 1.0 - p_good[dim];
            const double pg = cand.groups[dim] ? p_bad[dim] : 1.0 - p_bad[dim];
            score += std::log(pl) - std::log(pg);
        }
        if (score > best_score) {
            best_score = score;
            best = cand;
        }
    }
    return from_vector(best);
}

// Maps each first-attempt record to the index of the problem instance it
// belongs to. A record starting a repeated field, or naming a different
// problem, opens the next instance.
inline std::vector<std::size_t> assign_problem_indices(const StudentLog& log) {
    std::vector<std::size_t> indices;
    indices.reserve(log.first_attempts.size());
    std::size_t idx = 0;
    bool seen[kFieldCount] = {};
    bool started = false;
    for (const StepRecord& r : log.first_attempts) {
        const bool boundary =
            started && (seen[static_cast<int>(r.field)] ||
                        (idx < log.sequence.size() && r.problem_id != log.sequence[idx].id));
        if (boundary) {
            ++idx;
            std::fill(seen, seen + kFieldCount, false);
        }
        started = true;
        if (idx >= log.sequence.size() || r.problem_id != log.sequence[idx].id)
            throw std::invalid_argument(
                "assign_problem_indices: records do not follow the log's sequence");
        seen[static_cast<int>(r.field)] = true;
        indices.push_back(idx);
    }
    return indices;
}

// Fraction of first-attempt steps where seeded replications of the candidate
// agent disagree with the student's recorded correctness, over the log's own
// first `first_k` problems.
inline double objective(const AgentConfig& config, const StudentLog& log, int first_k,
                        int replications, std::uint64_t seed) {
    if (first_k < 1 || static_cast<std::size_t>(first_k) > log.sequence.size())
        throw std::invalid_argument("objective: log covers fewer than first_k problems");

    const auto indices = assign_problem_indices(log);
    std::map<std::pair<std::size_t, FieldId>, bool> student;
    for (std::size_t i = 0; i < log.first_attempts.size(); ++i) {
        if (indices[i] >= static_cast<std::size_t>(first_k)) continue;
        const StepRecord& r = log.first_attempts[i];
        student[{indices[i], r.field}] = outcome_is_error(r.outcome);
    }
    if (student.empty()) return 0.0;

    long long disagreements = 0;
    long long total = 0;
    for (int rep = 0; rep < replications; ++rep) {
        Agent agent(config, derive_seed(seed, 0x0b, static_cast<std::uint64_t>(rep)));
        for (int k = 0; k < first_k; ++k) {
            const RunResult r = agent.run_problem(log.sequence[k]);
            for (const StepRecord& rec : r.first_attempts) {
                const auto it = student.find({static_cast<std::size_t>(k), rec.field});
                if (it == student.end()) continue;
                ++total;
                if (outcome_is_error(rec.outcome) != it->second) ++disagreements;
            }
        }
    }
    return total ? static_cast<double>(disagreements) / total : 0.0;
}

// Generic suggest-evaluate loop used both for log fitting and for synthetic
// benchmark objectives.
inline TuneResult tune_custom(const std::function<double(const AgentConfig&)>& evaluate,
                              const SearchSpace& space, int iterations, std::uint64_t seed,
                              const TpeSettings& settings = {}) {
    if (iterations < 1) throw std::invalid_argument("tune: iterations must be >= 1");
    Rng rng(derive_seed(seed, 0x7e));
    TuneResult result;
    for (int i = 0; i < iterations; ++i) {
        Trial t;
        t.config = tpe_suggest(result.history, space, rng, settings);
        t.loss = evaluate(t.config);
        t.trial_index = i;
        result.history.push_back(t);
        if (i == 0 || t.loss < result.best_loss) {
            result.best = t.config;
            result.best_loss = t.loss;
        }
    }
    return result;
}

inline TuneResult tune(const StudentLog& log, const SearchSpace& space, int iterations,
                       int first_k, std::uint64_t seed, int replications = 5,
                       const TpeSettings& settings = {}) {
    int trial = 0;
    return tune_custom(
        [&](const AgentConfig& config) {
            return objective(config, log, first_k, replications,
                             derive_seed(seed, 0x0e, static_cast<std::uint64_t>(trial++)));
        },
        space, iterations, seed, settings);
}

inline nlohmann::json tune_result_to_json(const TuneResult& r) {
    nlohmann::json history = nlohmann::json::array();
    for (const Trial& t : r.history)
        history.push_back(nlohmann::json{{"trial_index", t.trial_index},
                                         {"loss", t.loss},
                                         {"config", Agent::config_to_json(t.config)}});
    return nlohmann::json{{"best", Agent::config_to_json(r.best)},
                          {"best_loss", r.best_loss},
                          {"history", history}};
}

inline TuneResult tune_result_from_json(const nlohmann::json& j) {
    TuneResult r;
    r.best = Agent::config_from_json(j.at("best"));
    r.best_loss = j.at("best_loss").get<double>();
    for (const auto& t : j.at("history"))
        r.history.push_back(Trial{Agent::config_from_json(t.at("config")),
                                  t.at("loss").get<double>(),
                                  t.at("trial_index").get<int>()});
    return r;
}

}  // namespace fracsim
