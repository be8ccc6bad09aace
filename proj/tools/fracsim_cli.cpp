#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fracsim/fracsim.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty())
        std::cout << content;
    else
        write_file(path, content);
}

fracsim::AgentConfig load_config(const std::string& path) {
    return fracsim::Agent::config_from_json(nlohmann::json::parse(read_file(path)));
}

const fracsim::StudentLog& find_student(const std::vector<fracsim::StudentLog>& logs,
                                        const std::string& id) {
    for (const fracsim::StudentLog& log : logs)
        if (log.student_id == id) return log;
    throw std::runtime_error("student \"" + id + "\" not found in log");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fraction tutor agent simulator"};
    app.require_subcommand(1);

    std::string schema_name = "interleaved";
    std::string schemas_arg = "blocked-a,interleaved,faded";
    std::string config_path, log_path, out_path, out_dir, student_id = "synth";
    std::uint64_t seed = 0;
    int iters = 20, first_k = 10, reps = 20;

    CLI::App* gen = app.add_subcommand("gen-seq", "generate a problem sequence");
    gen->add_option("--schema", schema_name, "blocked-a|blocked-b|interleaved|faded")
        ->required();
    gen->add_option("--seed", seed, "random seed")->required();
    gen->add_option("--out", out_path, "output file (default stdout)");

    CLI::App* synth = app.add_subcommand("synth", "simulate one student, emit transactions");
    synth->add_option("--config", config_path, "agent config JSON")->required();
    synth->add_option("--schema", schema_name, "sequence schema")->required();
    synth->add_option("--seed", seed, "random seed")->required();
    synth->add_option("--student", student_id, "student id for the emitted rows");
    synth->add_option("--out", out_path, "output CSV path")->required();

    CLI::App* tune_cmd = app.add_subcommand("tune", "fit a config to one student's log");
    tune_cmd->add_option("--log", log_path, "transactions CSV")->required();
    tune_cmd->add_option("--student", student_id, "student id")->required();
    tune_cmd->add_option("--iters", iters, "optimization iterations");
    tune_cmd->add_option("--first-k", first_k, "problems used by the objective");
    tune_cmd->add_option("--seed", seed, "random seed")->required();
    tune_cmd->add_option("--out", out_path, "output JSON path")->required();

    CLI::App* sim = app.add_subcommand("simulate", "run a counterfactual campaign");
    sim->add_option("--config", config_path, "agent config JSON")->required();
    sim->add_option("--schemas", schemas_arg, "comma-separated schema list");
    sim->add_option("--reps", reps, "replications per condition");
    sim->add_option("--seed", seed, "random seed")->required();
    sim->add_option("--out-dir", out_dir, "output directory")->required();

    CLI::App* curve_cmd = app.add_subcommand("curve", "learning curve from a log");
    curve_cmd->add_option("--log", log_path, "transactions CSV")->required();
    curve_cmd->add_option("--student", student_id, "student id")->required();
    curve_cmd->add_option("--out", out_path, "output CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const auto problems = fracsim::generate_sequence(
                fracsim::parse_sequence_schema(schema_name), seed);
            nlohmann::json ids = nlohmann::json::array();
            for (const fracsim::Problem& p : problems) ids.push_back(p.id);
            write_output(out_path, ids.dump(2) + "\n");
        } else if (synth->parsed()) {
            const auto schema = fracsim::parse_sequence_schema(schema_name);
            const auto problems = fracsim::generate_sequence(schema, seed);
            const auto result =
                fracsim::synth_student(load_config(config_path), problems, student_id, seed);
            write_file(out_path, fracsim::emit_transactions(result.transactions));
        } else if (tune_cmd->parsed()) {
            const auto logs = fracsim::parse_transactions(read_file(log_path));
            const fracsim::StudentLog& log = find_student(logs, student_id);
            const auto result =
                fracsim::tune(log, fracsim::SearchSpace{}, iters, first_k, seed);
            write_file(out_path, fracsim::tune_result_to_json(result).dump(2) + "\n");
        } else if (sim->parsed()) {
            fracsim::Campaign campaign;
            campaign.config = load_config(config_path);
            std::stringstream ss(schemas_arg);
            std::string token;
            while (std::getline(ss, token, ','))
                if (!token.empty())
                    campaign.schemas.push_back(fracsim::parse_sequence_schema(token));
            if (campaign.schemas.empty()) throw std::runtime_error("no schemas given");
            campaign.replications = reps;
            campaign.seed = seed;

            std::filesystem::create_directories(out_dir);
            const auto reports = fracsim::simulate_counterfactual(campaign);
            std::vector<fracsim::LearningCurve> curves;
            std::vector<std::string> labels;
            for (const fracsim::ConditionReport& report : reports) {
                const std::string name = fracsim::sequence_schema_name(report.schema);
                write_file(out_dir + "/curve_" + name + ".csv",
                           fracsim::emit_curve_csv(report.curve));
                curves.push_back(report.curve);
                labels.push_back(name);
            }
            write_file(out_dir + "/learning_curves.svg",
                       fracsim::render_curve_svg(curves, labels));
            if (reports.size() >= 2)
                write_file(out_dir + "/comparison.json",
                           fracsim::comparison_to_json(fracsim::compare(reports)).dump(2) +
                               "\n");
            write_file(out_dir + "/campaign.json",
                       fracsim::campaign_to_json(campaign).dump(2) + "\n");
        } else if (curve_cmd->parsed()) {
            const auto logs = fracsim::parse_transactions(read_file(log_path));
            const fracsim::StudentLog& log = find_student(logs, student_id);
            write_file(out_path,
                       fracsim::emit_curve_csv(fracsim::learning_curve(log.first_attempts)));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
