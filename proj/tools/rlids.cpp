#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rlids/error.hpp"
#include "rlids/experiment.hpp"
#include "rlids/ingest.hpp"

namespace fs = std::filesystem;
using namespace rlids;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInput = 3;

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> agent_seed;
    std::optional<double> window_len;
    std::optional<std::size_t> episode_len;
    std::string output_dir;
    std::string load_state;
    std::string save_state;
    bool no_alarm_log = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "scenario seed");
    cmd->add_option("--agent-seed", o.agent_seed, "agent seed");
    cmd->add_option("--window-len", o.window_len, "window length in seconds");
    cmd->add_option("--episode-len", o.episode_len, "windows per episode");
    cmd->add_option("-o,--output-dir", o.output_dir, "output directory");
}

ExperimentConfig configure(const Overrides& o) {
    ExperimentConfig cfg = load_config(o.config);
    if (o.seed) cfg.scenario.seed = *o.seed;
    if (o.agent_seed) cfg.agent.seed = *o.agent_seed;
    if (o.window_len) cfg.window_len = from_seconds(*o.window_len);
    if (o.episode_len) cfg.agent.episode_len = *o.episode_len;
    if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
    if (!o.load_state.empty()) cfg.load_state = o.load_state;
    if (!o.save_state.empty()) cfg.save_state = o.save_state;
    if (o.no_alarm_log) cfg.alarm_log = false;
    cfg.validate();
    return cfg;
}

std::string out_path(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir + ": " + ec.message());
}

void print_summary(const RunReport& r) {
    std::printf("windows %zu, episodes %zu, devices %zu\n", r.windows, r.episodes, r.devices);
    for (const auto& a : r.arms) {
        std::printf("%-7s utility %12.1f  hit %.4f  false-alarm %.4f\n", a.arm.c_str(), a.cumulative_utility,
                    a.rates.hit_rate, a.rates.false_alarm_rate);
    }
    for (const auto& t : r.static_thresholds) {
        std::printf("static %s/%s theta %.4f (%s)\n", t.device_class.c_str(), to_string(t.entry.feature).c_str(),
                    t.entry.theta, t.rule.c_str());
    }
}

int run_ingest(const std::string& input, const std::string& output, const std::string& map_path) {
    DeviceMap map;
    if (!map_path.empty()) map = DeviceMap::parse_csv(read_file(map_path));
    const auto bytes = read_binary_file(input);
    const PcapCapture cap = parse_pcap_stream(bytes, map);
    write_file(output, write_summary_csv(cap.records));
    std::printf("%zu records from %zu frames (%zu skipped)\n", cap.records.size(), cap.frames_total, cap.frames_skipped);
    if (cap.error) {
        std::fprintf(stderr, "error: %s at offset %zu (%s)\n", std::string(to_string(cap.error->code)).c_str(),
                     cap.error->offset, cap.error->message.c_str());
        return kExitInput;
    }
    return 0;
}

int run_entropy(const Overrides& o, const std::string& output) {
    const ExperimentConfig cfg = configure(o);
    const PreparedStream s = prepare_stream(cfg);
    const MetricTable table = compute_stream_metrics(s, cfg);
    const std::string path = output.empty() ? out_path(cfg.output_dir, "entropy.csv") : output;
    if (output.empty()) ensure_dir(cfg.output_dir);
    write_file(path, entropy_series_csv(s, table, cfg));
    std::printf("%zu windows x %zu devices x %zu features -> %s\n", table.windows, table.devices, table.features,
                path.c_str());
    return 0;
}

int run_simulate(const Overrides& o) {
    const ExperimentConfig cfg = configure(o);
    if (cfg.mode != ExperimentConfig::Mode::SIMULATE) throw ConfigError("mode", "simulate needs a scenario config");
    const PreparedStream s = prepare_stream(cfg);
    ensure_dir(cfg.output_dir);
    write_file(out_path(cfg.output_dir, "records.csv"), write_summary_csv(s.records));
    write_file(out_path(cfg.output_dir, "labels.csv"), s.truth.to_csv());
    write_file(out_path(cfg.output_dir, "device_map.csv"), s.map.to_csv());
    if (s.schedule) write_file(out_path(cfg.output_dir, "schedule.csv"), schedule_to_csv(*s.schedule));
    std::printf("%zu records, %zu windows, %zu attacks -> %s\n", s.records.size(), s.truth.windows(),
                s.schedule ? s.schedule->entries.size() : 0, cfg.output_dir.c_str());
    return 0;
}

int run_experiment(const Overrides& o, bool compare) {
    const ExperimentConfig cfg = configure(o);
    const PreparedStream s = prepare_stream(cfg);
    const MetricTable table = compute_stream_metrics(s, cfg);
    AgentPool pool(s.classes(), cfg);
    if (!cfg.load_state.empty()) load_state(pool, cfg.load_state);
    RunOptions opts;
    opts.static_arm = compare;
    const RunReport r = run_compare(s, table, cfg, pool, opts);

    ensure_dir(cfg.output_dir);
    emit_metrics(r, cfg.output_dir);
    write_file(out_path(cfg.output_dir, "run_report.json"), report_to_json(r).dump(1) + "\n");
    if (cfg.alarm_log && compare) {
        std::string lines;
        for (const auto& l : r.alarm_log) lines += l + "\n";
        write_file(out_path(cfg.output_dir, "alarms.ndjson"), lines);
    }
    std::string save = cfg.save_state;
    if (save.empty() && !compare) save = out_path(cfg.output_dir, "state.json");
    if (!save.empty()) persist_state(pool, save);
    print_summary(r);
    if (!save.empty()) std::printf("state -> %s\n", save.c_str());
    return 0;
}

int run_report(const std::string& dir) {
    const auto doc = nlohmann::json::parse(read_file(out_path(dir, "run_report.json")));
    std::printf("windows %zu, episodes %zu\n", doc.at("windows").get<std::size_t>(), doc.at("episodes").get<std::size_t>());
    double rl = 0.0, st = 0.0;
    bool has_static = false;
    for (const auto& a : doc.at("arms")) {
        const auto name = a.at("arm").get<std::string>();
        const double u = a.at("cumulative_utility").get<double>();
        std::printf("%-7s utility %12.1f  hit %.4f  false-alarm %.4f\n", name.c_str(), u, a.at("hit_rate").get<double>(),
                    a.at("false_alarm_rate").get<double>());
        if (name == "rl") rl = u;
        if (name == "static") {
            st = u;
            has_static = true;
        }
    }
    const auto& fh = doc.at("rl_final_half");
    std::printf("rl final half: hit %.4f  false-alarm %.4f\n", fh.at("hit_rate").get<double>(),
                fh.at("false_alarm_rate").get<double>());
    if (has_static && st != 0.0) std::printf("rl / static utility: %.4f\n", rl / st);
    const auto& inv = doc.at("invariant");
    std::printf("count invariant: %zu checks, %zu violations\n", inv.at("checks").get<std::size_t>(),
                inv.at("violations").get<std::size_t>());
    return 0;
}

int exit_code(ErrorCode c) {
    switch (c) {
        case ErrorCode::ConfigError:
        case ErrorCode::SchemaVersionMismatch:
        case ErrorCode::FingerprintMismatch:
        case ErrorCode::AlphaIsOne:
        case ErrorCode::UnknownTarget: return kExitConfig;
        default: return kExitInput;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entropy-based IoT attack detection with Q-learning threshold tuning"};
    app.require_subcommand(1);

    std::string ingest_in, ingest_out, ingest_map;
    auto* ingest = app.add_subcommand("ingest", "convert a pcap capture to the summary CSV");
    ingest->add_option("-i,--input", ingest_in, "pcap file")->required()->check(CLI::ExistingFile);
    ingest->add_option("-o,--output", ingest_out, "summary CSV to write")->required();
    ingest->add_option("--device-map", ingest_map, "address,device_id CSV")->check(CLI::ExistingFile);

    Overrides ent_o;
    std::string ent_out;
    auto* entropy = app.add_subcommand("entropy", "export the per-window feature series");
    add_common(entropy, ent_o);
    entropy->add_option("--output", ent_out, "CSV path (default <output-dir>/entropy.csv)");

    Overrides sim_o;
    auto* simulate = app.add_subcommand("simulate", "generate labelled traffic from a scenario");
    add_common(simulate, sim_o);

    Overrides train_o;
    auto* train = app.add_subcommand("train", "run the learning arm and persist its tables");
    add_common(train, train_o);
    train->add_option("--load-state", train_o.load_state, "continue from a persisted state");
    train->add_option("--save-state", train_o.save_state, "state file (default <output-dir>/state.json)");

    Overrides cmp_o;
    auto* compare = app.add_subcommand("compare", "static vs learned thresholds on one stream");
    add_common(compare, cmp_o);
    compare->add_option("--load-state", cmp_o.load_state, "start the agents from a persisted state");
    compare->add_option("--save-state", cmp_o.save_state, "persist the agents after the run");
    compare->add_flag("--no-alarm-log", cmp_o.no_alarm_log, "skip alarms.ndjson");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "summarize a finished run");
    report->add_option("-d,--dir", report_dir, "output directory of a compare/train run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*ingest) return run_ingest(ingest_in, ingest_out, ingest_map);
        if (*entropy) return run_entropy(ent_o, ent_out);
        if (*simulate) return run_simulate(sim_o);
        if (*train) return run_experiment(train_o, false);
        if (*compare) return run_experiment(cmp_o, true);
        if (*report) return run_report(report_dir);
    } catch (const Error& e) {
        std::fprintf(stderr, "error [%s]: %s\n", std::string(to_string(e.code())).c_str(), e.what());
        return exit_code(e.code());
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInput;
    }
    return 0;
}
