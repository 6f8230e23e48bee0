#include "rlids/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

#include "rlids/error.hpp"
#include "rlids/ingest.hpp"

namespace rlids {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}

const json* member(const json& obj, std::string_view key) {
    if (!obj.is_object()) return nullptr;
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

template <class T>
T as(const json& v, const std::string& path) {
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(path, "expected a boolean");
        } else if constexpr (std::is_arithmetic_v<T>) {
            if (!v.is_number()) throw ConfigError(path, "expected a number");
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_float() || (v.is_number_integer() && v.get<std::int64_t>() < 0)) {
                    throw ConfigError(path, "expected a non-negative integer");
                }
            }
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(path, "expected a string");
        }
        return v.get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path, e.what());
    }
}

template <class T>
void read(const json& obj, std::string_view key, const std::string& path, T& out) {
    if (const json* v = member(obj, key)) out = as<T>(*v, join(path, key));
}

void read_seconds(const json& obj, std::string_view key, const std::string& path, Micros& out) {
    if (const json* v = member(obj, key)) {
        const double s = as<double>(*v, join(path, key));
        if (!std::isfinite(s)) throw ConfigError(join(path, key), "must be finite");
        out = from_seconds(s);
    }
}

Protocol protocol_field(std::string_view text, const std::string& path) {
    const auto p = parse_protocol(text);
    if (!p) throw ConfigError(path, "unknown protocol '" + std::string(text) + "'");
    return *p;
}

AttackKind kind_field(const json& v, const std::string& path) {
    const auto k = parse_attack_kind(as<std::string>(v, path));
    if (!k) throw ConfigError(path, "unknown attack kind '" + v.get<std::string>() + "'");
    return *k;
}

Ipv4 ip_field(const json& v, const std::string& path) {
    const auto ip = Ipv4::parse(as<std::string>(v, path));
    if (!ip) throw ConfigError(path, "malformed IPv4 address");
    return *ip;
}

std::string resolve_path(const std::string& p, const std::string& base) {
    if (p.empty() || base.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (std::filesystem::path(base) / p).lexically_normal().string();
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
    for (const auto& [k, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
            throw ConfigError(join(path, k), "unknown field");
        }
    }
}

DeviceProfile parse_profile(const json& d, const std::string& path) {
    check_keys(d, path, {"device_id", "class", "ip", "benign_rate", "sent_fraction", "protocol_mix", "peers", "ports"});
    const json* id = member(d, "device_id");
    const json* ip = member(d, "ip");
    if (!id) throw ConfigError(join(path, "device_id"), "required");
    if (!ip) throw ConfigError(join(path, "ip"), "required");
    DeviceProfile p = default_profile(as<std::string>(*id, join(path, "device_id")), ip_field(*ip, join(path, "ip")));
    read(d, "class", path, p.device_class);
    read(d, "benign_rate", path, p.benign_rate);
    read(d, "sent_fraction", path, p.sent_fraction);
    if (const json* mix = member(d, "protocol_mix")) {
        const std::string mp = join(path, "protocol_mix");
        if (!mix->is_object()) throw ConfigError(mp, "expected an object of protocol weights");
        p.protocol_mix.clear();
        for (const auto& [k, w] : mix->items()) p.protocol_mix.emplace_back(protocol_field(k, join(mp, k)), as<double>(w, join(mp, k)));
    }
    if (const json* peers = member(d, "peers")) {
        const std::string pp = join(path, "peers");
        if (!peers->is_object()) throw ConfigError(pp, "expected an object of address weights");
        p.peers.clear();
        for (const auto& [k, w] : peers->items()) p.peers.emplace_back(ip_field(k, join(pp, k)), as<double>(w, join(pp, k)));
    }
    if (const json* ports = member(d, "ports")) {
        const std::string pp = join(path, "ports");
        if (!ports->is_object()) throw ConfigError(pp, "expected an object of port weights");
        p.ports.clear();
        for (const auto& [k, w] : ports->items()) {
            unsigned long port = 0;
            try {
                std::size_t used = 0;
                port = std::stoul(k, &used);
                if (used != k.size() || port > 65535) throw std::out_of_range(k);
            } catch (const std::exception&) {
                throw ConfigError(join(pp, k), "port must be an integer in [0, 65535]");
            }
            p.ports.emplace_back(static_cast<std::uint16_t>(port), as<double>(w, join(pp, k)));
        }
    }
    p.validate();
    return p;
}

void parse_schedule(const json& s, const std::string& path, ScenarioConfig& sc) {
    std::string type = "mutative";
    read(s, "type", path, type);
    if (type == "mutative") {
        check_keys(s, path, {"type", "count", "kinds", "rates", "duration", "gap_min", "gap_max", "lead_in", "tail",
                             "align", "targets"});
        sc.schedule_type = ScheduleType::MUTATIVE;
        auto& m = sc.mutative;
        read(s, "count", path, m.count);
        if (const json* kinds = member(s, "kinds")) {
            m.kinds.clear();
            for (std::size_t i = 0; i < kinds->size(); ++i) m.kinds.push_back(kind_field((*kinds)[i], join(path, "kinds")));
        }
        if (const json* rates = member(s, "rates")) {
            m.rates.clear();
            for (const auto& r : *rates) m.rates.push_back(as<double>(r, join(path, "rates")));
        }
        read_seconds(s, "duration", path, m.duration);
        read_seconds(s, "gap_min", path, m.gap_min);
        read_seconds(s, "gap_max", path, m.gap_max);
        read_seconds(s, "lead_in", path, m.lead_in);
        read_seconds(s, "tail", path, m.tail);
        read_seconds(s, "align", path, m.align);
        if (const json* t = member(s, "targets")) {
            m.targets.clear();
            for (const auto& v : *t) m.targets.push_back(as<std::string>(v, join(path, "targets")));
        }
        if (m.count < 1) throw ConfigError(join(path, "count"), "must be >= 1");
    } else if (type == "periodic") {
        check_keys(s, path, {"type", "kind", "rate", "count", "duration", "gap", "lead_in", "tail", "target"});
        sc.schedule_type = ScheduleType::PERIODIC;
        auto& p = sc.periodic;
        if (const json* k = member(s, "kind")) p.kind = kind_field(*k, join(path, "kind"));
        read(s, "rate", path, p.rate);
        read(s, "count", path, p.count);
        read_seconds(s, "duration", path, p.duration);
        read_seconds(s, "gap", path, p.gap);
        read_seconds(s, "lead_in", path, p.lead_in);
        read_seconds(s, "tail", path, p.tail);
        read(s, "target", path, p.target);
    } else if (type == "explicit") {
        check_keys(s, path, {"type", "span", "attacks"});
        sc.schedule_type = ScheduleType::EXPLICIT;
        read_seconds(s, "span", path, sc.explicit_schedule.span);
        if (const json* list = member(s, "attacks")) {
            for (std::size_t i = 0; i < list->size(); ++i) {
                const json& a = (*list)[i];
                const std::string ap = join(path, "attacks[" + std::to_string(i) + "]");
                check_keys(a, ap, {"kind", "rate", "start", "duration", "target"});
                AttackSpec spec;
                if (const json* k = member(a, "kind")) spec.kind = kind_field(*k, join(ap, "kind"));
                read(a, "rate", ap, spec.rate);
                read_seconds(a, "start", ap, spec.start);
                read_seconds(a, "duration", ap, spec.duration);
                read(a, "target", ap, spec.target);
                sc.explicit_schedule.entries.push_back(spec);
            }
        }
    } else {
        throw ConfigError(join(path, "type"), "must be mutative, periodic or explicit");
    }
}

ScenarioConfig parse_scenario(const json& s, const std::string& path) {
    check_keys(s, path, {"seed", "devices", "shape", "schedule"});
    ScenarioConfig sc;
    read(s, "seed", path, sc.seed);
    if (const json* devs = member(s, "devices")) {
        for (std::size_t i = 0; i < devs->size(); ++i) {
            sc.profiles.push_back(parse_profile((*devs)[i], join(path, "devices[" + std::to_string(i) + "]")));
        }
    }
    if (const json* shape = member(s, "shape")) {
        const std::string sp = join(path, "shape");
        check_keys(*shape, sp, {"flood_sources", "reflectors", "gateway"});
        read(*shape, "flood_sources", sp, sc.shape.flood_sources);
        read(*shape, "reflectors", sp, sc.shape.reflectors);
        if (const json* g = member(*shape, "gateway")) sc.shape.gateway = ip_field(*g, join(sp, "gateway"));
    }
    if (const json* sched = member(s, "schedule")) parse_schedule(*sched, join(path, "schedule"), sc);
    if (sc.schedule_type == ScheduleType::MUTATIVE && sc.mutative.targets.empty()) {
        for (const auto& p : sc.profiles) sc.mutative.targets.push_back(p.device_id);
    }
    if (sc.schedule_type == ScheduleType::PERIODIC && sc.periodic.target.empty() && !sc.profiles.empty()) {
        sc.periodic.target = sc.profiles.front().device_id;
    }
    return sc;
}

FeatureConfig parse_feature_config(const json& f, const std::string& path) {
    check_keys(f, path, {"feature", "direction", "metric"});
    FeatureConfig fc;
    const json* name = member(f, "feature");
    if (!name) throw ConfigError(join(path, "feature"), "required");
    const auto kind = parse_feature(as<std::string>(*name, join(path, "feature")));
    if (!kind) throw ConfigError(join(path, "feature"), "unknown feature '" + name->get<std::string>() + "'");
    fc.feature = *kind;
    if (const json* d = member(f, "direction")) {
        const auto dir = parse_direction(as<std::string>(*d, join(path, "direction")));
        if (!dir) throw ConfigError(join(path, "direction"), "must be ALARM_IF_BELOW or ALARM_IF_ABOVE");
        fc.direction = *dir;
    }
    if (const json* m = member(f, "metric")) {
        const auto metric = parse_metric(as<std::string>(*m, join(path, "metric")));
        if (!metric) throw ConfigError(join(path, "metric"), "must be entropy or kl_baseline");
        fc.metric = *metric;
    }
    return fc;
}

void parse_agent(const json& a, const std::string& path, AgentConfig& cfg) {
    check_keys(a, path, {"learning_rate", "discount", "epsilon", "epsilon_meaning", "explore_decay", "explore_floor",
                         "hit_bins", "fa_bins", "action_grid", "episode_len", "seed"});
    read(a, "learning_rate", path, cfg.learning_rate);
    read(a, "discount", path, cfg.discount);
    read(a, "epsilon", path, cfg.epsilon);
    if (const json* m = member(a, "epsilon_meaning")) {
        const std::string s = as<std::string>(*m, join(path, "epsilon_meaning"));
        if (s == "greedy") {
            cfg.epsilon_meaning = EpsilonMeaning::GREEDY_PROBABILITY;
        } else if (s == "explore") {
            cfg.epsilon_meaning = EpsilonMeaning::EXPLORE_PROBABILITY;
        } else {
            throw ConfigError(join(path, "epsilon_meaning"), "must be greedy or explore");
        }
    }
    read(a, "explore_decay", path, cfg.explore_decay);
    read(a, "explore_floor", path, cfg.explore_floor);
    read(a, "hit_bins", path, cfg.hit_bins);
    read(a, "fa_bins", path, cfg.fa_bins);
    if (const json* g = member(a, "action_grid")) {
        const std::string gp = join(path, "action_grid");
        if (g->is_number_unsigned() || g->is_number_integer()) {
            const auto n = as<std::size_t>(*g, gp);
            if (n < 2) throw ConfigError(gp, "needs at least 2 thresholds");
            cfg.action_grid = AgentConfig::default_action_grid(n);
        } else if (g->is_array()) {
            cfg.action_grid.clear();
            for (const auto& v : *g) cfg.action_grid.push_back(as<double>(v, gp));
        } else {
            throw ConfigError(gp, "expected a threshold count or an array of thresholds");
        }
    }
    read(a, "episode_len", path, cfg.episode_len);
    read(a, "seed", path, cfg.seed);
}

std::vector<std::string> sorted_unique(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

ordered_json counts_json(const ConfusionCounts& c) {
    return {{"n11", c.n11}, {"n12", c.n12}, {"n21", c.n21}, {"n22", c.n22}};
}

}  // namespace

void ExperimentConfig::validate() const {
    if (schema_version != kSchemaVersion) {
        throw Error(ErrorCode::SchemaVersionMismatch, "config schema_version " + std::to_string(schema_version) +
                                                          " is not supported (expected " +
                                                          std::to_string(kSchemaVersion) + ")");
    }
    if (window_len <= 0) throw ConfigError("window_len", "must be positive");
    if (features.empty()) throw ConfigError("features", "at least one feature must be enabled");
    for (std::size_t i = 0; i < features.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (features[i].feature == features[j].feature) {
                throw ConfigError("features", "duplicate feature " + to_string(features[i].feature));
            }
        }
    }
    if (policy.kind == CombinationPolicy::Kind::K_OF_N && (policy.k < 1 || policy.k > features.size())) {
        throw ConfigError("policy.k", "must lie in [1, number of features]");
    }
    entropy.validate();
    utility.validate();
    agent.validate();
    if (baseline_windows < 1) throw ConfigError("baseline_windows", "must be >= 1");
    for (const auto& [f, theta] : static_baseline.thresholds) {
        if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("static_baseline.thresholds." + to_string(f), "theta outside [0, 1]");
    }
    if (mode == Mode::REPLAY) {
        if (replay.records.empty()) throw ConfigError("replay.records", "required in replay mode");
        if (!std::filesystem::exists(replay.records)) throw ConfigError("replay.records", "file not found: " + replay.records);
        if (replay.labels.empty()) throw ConfigError("replay.labels", "required in replay mode");
        if (!std::filesystem::exists(replay.labels)) throw ConfigError("replay.labels", "file not found: " + replay.labels);
        if (!replay.device_map.empty() && !std::filesystem::exists(replay.device_map)) {
            throw ConfigError("replay.device_map", "file not found: " + replay.device_map);
        }
    } else if (scenario.profiles.empty()) {
        throw ConfigError("scenario.devices", "simulate mode needs at least one device");
    }
}

ExperimentConfig parse_config(const json& doc, const std::string& base_dir) {
    check_keys(doc, "", {"schema_version", "mode", "replay", "scenario", "window_len", "features", "device_classes",
                         "policy", "entropy", "baseline_windows", "utility", "agent", "static_baseline",
                         "output_dir", "load_state", "save_state", "alarm_log"});
    ExperimentConfig cfg;
    const json* version = member(doc, "schema_version");
    if (!version) throw ConfigError("schema_version", "required");
    cfg.schema_version = as<int>(*version, "schema_version");
    if (cfg.schema_version != kSchemaVersion) {
        throw Error(ErrorCode::SchemaVersionMismatch,
                    "config schema_version " + std::to_string(cfg.schema_version) + " is not supported");
    }
    std::string mode = "simulate";
    read(doc, "mode", "", mode);
    if (mode == "simulate") {
        cfg.mode = ExperimentConfig::Mode::SIMULATE;
    } else if (mode == "replay") {
        cfg.mode = ExperimentConfig::Mode::REPLAY;
    } else {
        throw ConfigError("mode", "must be replay or simulate");
    }
    if (cfg.mode == ExperimentConfig::Mode::REPLAY && member(doc, "scenario")) {
        throw ConfigError("scenario", "replay mode takes input files, not a scenario");
    }
    if (cfg.mode == ExperimentConfig::Mode::SIMULATE && member(doc, "replay")) {
        throw ConfigError("replay", "simulate mode takes a scenario, not input files");
    }
    if (const json* r = member(doc, "replay")) {
        check_keys(*r, "replay", {"records", "device_map", "labels"});
        read(*r, "records", "replay", cfg.replay.records);
        read(*r, "device_map", "replay", cfg.replay.device_map);
        read(*r, "labels", "replay", cfg.replay.labels);
        cfg.replay.records = resolve_path(cfg.replay.records, base_dir);
        cfg.replay.device_map = resolve_path(cfg.replay.device_map, base_dir);
        cfg.replay.labels = resolve_path(cfg.replay.labels, base_dir);
    }
    if (const json* s = member(doc, "scenario")) cfg.scenario = parse_scenario(*s, "scenario");
    read_seconds(doc, "window_len", "", cfg.window_len);
    if (const json* fs = member(doc, "features")) {
        if (!fs->is_array()) throw ConfigError("features", "expected an array");
        cfg.features.clear();
        for (std::size_t i = 0; i < fs->size(); ++i) {
            cfg.features.push_back(parse_feature_config((*fs)[i], "features[" + std::to_string(i) + "]"));
        }
    }
    if (const json* dc = member(doc, "device_classes")) {
        if (!dc->is_object()) throw ConfigError("device_classes", "expected an object of class -> device list");
        for (const auto& [name, list] : dc->items()) {
            DeviceClassConfig c{name, {}};
            for (const auto& d : list) c.devices.push_back(as<std::string>(d, join("device_classes", name)));
            cfg.device_classes.push_back(std::move(c));
        }
    }
    if (const json* p = member(doc, "policy")) {
        check_keys(*p, "policy", {"kind", "k"});
        std::string kind = "OR";
        read(*p, "kind", "policy", kind);
        if (kind == "OR") {
            cfg.policy = CombinationPolicy::any();
        } else if (kind == "K_OF_N") {
            std::size_t k = 1;
            read(*p, "k", "policy", k);
            cfg.policy = CombinationPolicy::k_of_n(k);
        } else {
            throw ConfigError("policy.kind", "must be OR or K_OF_N");
        }
    }
    if (const json* e = member(doc, "entropy")) {
        check_keys(*e, "entropy", {"base", "alpha", "floor"});
        read(*e, "base", "entropy", cfg.entropy.base);
        read(*e, "alpha", "entropy", cfg.entropy.alpha);
        read(*e, "floor", "entropy", cfg.entropy.floor);
    }
    read(doc, "baseline_windows", "", cfg.baseline_windows);
    if (const json* u = member(doc, "utility")) {
        check_keys(*u, "utility", {"p0", "p1", "c0", "c1", "c2"});
        read(*u, "p0", "utility", cfg.utility.p0);
        read(*u, "p1", "utility", cfg.utility.p1);
        read(*u, "c0", "utility", cfg.utility.c0);
        read(*u, "c1", "utility", cfg.utility.c1);
        read(*u, "c2", "utility", cfg.utility.c2);
    }
    if (const json* a = member(doc, "agent")) parse_agent(*a, "agent", cfg.agent);
    if (const json* sb = member(doc, "static_baseline")) {
        check_keys(*sb, "static_baseline", {"calibration_windows", "thresholds"});
        read(*sb, "calibration_windows", "static_baseline", cfg.static_baseline.calibration_windows);
        if (const json* t = member(*sb, "thresholds")) {
            if (!t->is_object()) throw ConfigError("static_baseline.thresholds", "expected an object of feature -> theta");
            for (const auto& [k, v] : t->items()) {
                const std::string tp = join("static_baseline.thresholds", k);
                const auto f = parse_feature(k);
                if (!f) throw ConfigError(tp, "unknown feature");
                cfg.static_baseline.thresholds.emplace_back(*f, as<double>(v, tp));
            }
        }
    }
    read(doc, "output_dir", "", cfg.output_dir);
    read(doc, "load_state", "", cfg.load_state);
    read(doc, "save_state", "", cfg.save_state);
    read(doc, "alarm_log", "", cfg.alarm_log);
    cfg.output_dir = resolve_path(cfg.output_dir, base_dir);
    cfg.load_state = resolve_path(cfg.load_state, base_dir);
    cfg.save_state = resolve_path(cfg.save_state, base_dir);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("<file>", std::string("malformed config: ") + e.what());
    }
    return parse_config(doc, std::filesystem::path(path).parent_path().string());
}

ordered_json config_to_json(const ExperimentConfig& cfg) {
    ordered_json j;
    j["schema_version"] = cfg.schema_version;
    j["mode"] = cfg.mode == ExperimentConfig::Mode::REPLAY ? "replay" : "simulate";
    j["window_len"] = to_seconds(cfg.window_len);
    ordered_json feats = ordered_json::array();
    for (const auto& f : cfg.features) {
        feats.push_back({{"feature", to_string(f.feature)},
                         {"direction", to_string(f.direction)},
                         {"metric", to_string(f.metric)}});
    }
    j["features"] = std::move(feats);
    j["policy"] = cfg.policy.kind == CombinationPolicy::Kind::OR ? ordered_json{{"kind", "OR"}}
                                                                 : ordered_json{{"kind", "K_OF_N"}, {"k", cfg.policy.k}};
    j["entropy"] = {{"base", cfg.entropy.base}, {"alpha", cfg.entropy.alpha}, {"floor", cfg.entropy.floor}};
    j["utility"] = {{"p0", cfg.utility.p0}, {"p1", cfg.utility.p1}, {"c0", cfg.utility.c0},
                    {"c1", cfg.utility.c1}, {"c2", cfg.utility.c2}};
    j["agent"] = {{"learning_rate", cfg.agent.learning_rate},
                  {"discount", cfg.agent.discount},
                  {"epsilon", cfg.agent.epsilon},
                  {"epsilon_meaning", cfg.agent.epsilon_meaning == EpsilonMeaning::GREEDY_PROBABILITY ? "greedy" : "explore"},
                  {"explore_decay", cfg.agent.explore_decay},
                  {"explore_floor", cfg.agent.explore_floor},
                  {"hit_bins", cfg.agent.hit_bins},
                  {"fa_bins", cfg.agent.fa_bins},
                  {"action_grid", cfg.agent.action_grid},
                  {"episode_len", cfg.agent.episode_len},
                  {"seed", cfg.agent.seed}};
    j["static_baseline"] = {{"calibration_windows", cfg.static_baseline.calibration_windows}};
    if (cfg.mode == ExperimentConfig::Mode::SIMULATE) j["scenario_seed"] = cfg.scenario.seed;
    return j;
}

Schedule build_schedule(const ScenarioConfig& sc) {
    switch (sc.schedule_type) {
        case ScheduleType::MUTATIVE: {
            Rng rng(derive_seed(sc.seed, 2));
            return mutative_schedule(sc.mutative, rng);
        }
        case ScheduleType::PERIODIC: {
            const auto& p = sc.periodic;
            return periodic_schedule(p.kind, p.rate, p.count, p.duration, p.gap, p.lead_in, p.tail, p.target);
        }
        case ScheduleType::EXPLICIT: {
            Schedule s = sc.explicit_schedule;
            std::stable_sort(s.entries.begin(), s.entries.end(),
                             [](const AttackSpec& a, const AttackSpec& b) { return a.start < b.start; });
            if (s.span == 0) {
                for (const auto& e : s.entries) s.span = std::max(s.span, e.end());
            }
            s.validate();
            return s;
        }
    }
    return {};
}

std::vector<std::string> PreparedStream::classes() const { return sorted_unique(device_class); }

PreparedStream stream_from_simulation(Simulation sim, const std::vector<DeviceProfile>& profiles, Micros window_len,
                                      std::optional<Schedule> schedule) {
    PreparedStream s;
    s.records = std::move(sim.records);
    s.map = std::move(sim.devices);
    s.truth = std::move(sim.truth);
    s.window_len = window_len;
    s.origin = s.truth.origin();
    for (const auto& p : profiles) {
        s.devices.push_back(p.device_id);
        s.device_class.push_back(p.device_class);
    }
    s.windows = assign_windows(s.records, window_len, s.origin);
    // Trailing quiet windows still belong to the scenario.
    while (s.windows.size() < s.truth.windows()) {
        Window w;
        w.index = s.windows.size();
        w.start = s.origin + static_cast<Micros>(w.index) * window_len;
        w.end = w.start + window_len;
        w.records = std::span<const PacketRecord>(s.records.data() + s.records.size(), 0);
        s.windows.push_back(w);
    }
    s.schedule = std::move(schedule);
    return s;
}

PreparedStream prepare_stream(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.mode == ExperimentConfig::Mode::SIMULATE) {
        Scenario sc;
        sc.profiles = cfg.scenario.profiles;
        sc.schedule = build_schedule(cfg.scenario);
        sc.shape = cfg.scenario.shape;
        sc.seed = cfg.scenario.seed;
        sc.window_len = cfg.window_len;
        Schedule schedule = sc.schedule;
        return stream_from_simulation(simulate(sc), sc.profiles, cfg.window_len, std::move(schedule));
    }

    PreparedStream s;
    s.window_len = cfg.window_len;
    if (!cfg.replay.device_map.empty()) s.map = DeviceMap::parse_csv(read_file(cfg.replay.device_map));
    const auto& path = cfg.replay.records;
    const bool is_pcap = path.size() >= 5 && (path.ends_with(".pcap") || path.ends_with(".cap"));
    if (is_pcap) {
        const auto bytes = read_binary_file(path);
        PcapCapture cap = parse_pcap_stream(bytes, s.map);
        if (cap.error) {
            throw Error(ErrorCode::InputError, path + ": " + cap.error->message + " at offset " +
                                                   std::to_string(cap.error->offset));
        }
        s.records = std::move(cap.records);
    } else {
        s.records = parse_summary_csv(read_file(path));
    }
    if (s.map.empty()) s.map = DeviceMap::infer(s.records);
    s.origin = default_origin(s.records, cfg.window_len);
    s.truth = GroundTruth::parse_csv(read_file(cfg.replay.labels), s.origin, cfg.window_len);
    s.devices = s.map.devices();
    std::map<std::string, std::string> cls;
    for (const auto& c : cfg.device_classes) {
        for (const auto& d : c.devices) {
            if (!cls.emplace(d, c.name).second) throw ConfigError("device_classes." + c.name, d + " listed twice");
        }
    }
    for (const auto& d : s.devices) {
        auto it = cls.find(d);
        s.device_class.push_back(it == cls.end() ? std::string("default") : it->second);
    }
    s.windows = assign_windows(s.records, cfg.window_len, s.origin);
    return s;
}

std::vector<MetricSpec> metric_specs(const ExperimentConfig& cfg) {
    std::vector<MetricSpec> specs;
    for (const auto& f : cfg.features) specs.push_back({f.feature, f.metric});
    return specs;
}

MetricTable compute_stream_metrics(const PreparedStream& s, const ExperimentConfig& cfg, bool parallel) {
    const auto resolved = ResolvedRecords::resolve(s.records, s.map, s.devices);
    const auto specs = metric_specs(cfg);
    MetricInputs in{s.records, s.windows, &resolved, s.devices.size(), specs, cfg.entropy, cfg.baseline_windows};
    return parallel ? compute_metrics(in) : compute_metrics_serial(in);
}

std::vector<WindowObservations> class_observations(const PreparedStream& s, const MetricTable& table,
                                                   const std::string& device_class, std::size_t feature) {
    std::vector<WindowObservations> out(table.windows);
    for (std::size_t w = 0; w < table.windows; ++w) {
        for (std::size_t d = 0; d < table.devices; ++d) {
            if (s.device_class[d] != device_class) continue;
            FeatureObservation o;
            if (table.measured(w, d, feature)) o.value = table.at(w, d, feature);
            o.truth = s.truth.label(s.devices[d], w);
            out[w].push_back(o);
        }
    }
    return out;
}

std::vector<StaticThreshold> calibrate_static(const PreparedStream& s, const MetricTable& table,
                                              const ExperimentConfig& cfg) {
    std::vector<StaticThreshold> out;
    const std::size_t prefix = std::min(cfg.static_baseline.calibration_windows, table.windows);
    for (const auto& c : s.classes()) {
        for (std::size_t f = 0; f < cfg.features.size(); ++f) {
            const auto& fc = cfg.features[f];
            StaticThreshold st{c, {fc.feature, 0.0, fc.direction}, ""};
            const auto expl = std::find_if(cfg.static_baseline.thresholds.begin(), cfg.static_baseline.thresholds.end(),
                                           [&](const auto& p) { return p.first == fc.feature; });
            if (expl != cfg.static_baseline.thresholds.end()) {
                st.entry.theta = expl->second;
                st.rule = "explicit";
                out.push_back(st);
                continue;
            }
            double sb = 0.0, sb2 = 0.0, sa = 0.0;
            std::size_t nb = 0, na = 0;
            for (std::size_t w = 0; w < prefix; ++w) {
                for (std::size_t d = 0; d < table.devices; ++d) {
                    if (s.device_class[d] != c || !table.measured(w, d, f)) continue;
                    const double v = table.at(w, d, f);
                    if (s.truth.label(s.devices[d], w) == Truth::Attack) {
                        sa += v;
                        ++na;
                    } else {
                        sb += v;
                        sb2 += v * v;
                        ++nb;
                    }
                }
            }
            const bool below = fc.direction == Direction::ALARM_IF_BELOW;
            if (nb == 0) {
                st.entry.theta = below ? 0.0 : 1.0;
                st.rule = "never_alarm";
            } else if (na == 0) {
                const double mean = sb / static_cast<double>(nb);
                const double sd = std::sqrt(std::max(0.0, sb2 / static_cast<double>(nb) - mean * mean));
                st.entry.theta = std::clamp(below ? mean - 3.0 * sd : mean + 3.0 * sd, 0.0, 1.0);
                st.rule = "benign_3sigma";
            } else {
                const double mb = sb / static_cast<double>(nb);
                const double ma = sa / static_cast<double>(na);
                if (below ? ma < mb : ma > mb) {
                    st.entry.theta = std::clamp(0.5 * (mb + ma), 0.0, 1.0);
                    st.rule = "midpoint";
                } else {
                    st.entry.theta = below ? 0.0 : 1.0;
                    st.rule = "never_alarm";
                }
            }
            out.push_back(st);
        }
    }
    return out;
}

AgentPool::AgentPool(const std::vector<std::string>& classes, const ExperimentConfig& cfg) : cfg_(cfg.agent) {
    cfg_.validate();
    std::size_t ordinal = 0;
    for (const auto& c : classes) {
        for (const auto& f : cfg.features) agents_.emplace_back(c, f.feature, cfg_, ordinal++);
    }
}

ThresholdAgent* AgentPool::find(const std::string& device_class, FeatureKind f) {
    for (auto& a : agents_) {
        if (a.device_class() == device_class && a.feature() == f) return &a;
    }
    return nullptr;
}

nlohmann::json AgentPool::to_json() const {
    json agents = json::array();
    for (const auto& a : agents_) agents.push_back(a.to_json());
    return {{"schema_version", kSchemaVersion}, {"fingerprint", cfg_.fingerprint()}, {"agents", std::move(agents)}};
}

void AgentPool::restore(const nlohmann::json& doc) {
    try {
        const int version = doc.at("schema_version").get<int>();
        if (version != kSchemaVersion) {
            throw Error(ErrorCode::SchemaVersionMismatch,
                        "state schema_version " + std::to_string(version) + " is not supported");
        }
        const std::string fp = doc.at("fingerprint").get<std::string>();
        if (fp != cfg_.fingerprint()) {
            throw Error(ErrorCode::FingerprintMismatch,
                        "state was written for '" + fp + "', configured '" + cfg_.fingerprint() + "'");
        }
        std::map<std::string, const json*> by_name;
        for (const auto& a : doc.at("agents")) {
            by_name[a.at("device_class").get<std::string>() + "/" + a.at("feature").get<std::string>()] = &a;
        }
        // Validate every entry before touching any agent.
        for (const auto& a : agents_) {
            if (!by_name.count(a.name())) throw Error(ErrorCode::FingerprintMismatch, "state has no agent " + a.name());
        }
        std::vector<ThresholdAgent> restored = agents_;
        for (auto& a : restored) a.restore(*by_name.at(a.name()));
        agents_ = std::move(restored);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InputError, std::string("malformed state document: ") + e.what());
    }
}

void persist_state(const AgentPool& pool, const std::string& path) { write_file(path, pool.to_json().dump(1) + "\n"); }

void load_state(AgentPool& pool, const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InputError, path + ": " + e.what());
    }
    pool.restore(doc);
}

const ArmSummary* RunReport::arm(const std::string& name) const {
    for (const auto& a : arms) {
        if (a.arm == name) return &a;
    }
    return nullptr;
}

RunReport run_compare(const PreparedStream& s, const MetricTable& table, const ExperimentConfig& cfg, AgentPool& pool,
                      const RunOptions& opts) {
    const std::size_t n = cfg.agent.episode_len;
    const std::size_t nf = cfg.features.size();
    RunReport r;
    r.windows = table.windows;
    r.devices = table.devices;
    r.episodes = table.windows / n;

    const auto classes = s.classes();
    std::map<std::string, std::size_t> class_index;
    for (std::size_t i = 0; i < classes.size(); ++i) class_index[classes[i]] = i;
    std::vector<std::size_t> dev_class(s.devices.size());
    for (std::size_t d = 0; d < s.devices.size(); ++d) dev_class[d] = class_index.at(s.device_class[d]);

    // agent_of[class][feature]
    std::vector<std::vector<ThresholdAgent*>> agent_of(classes.size(), std::vector<ThresholdAgent*>(nf, nullptr));
    for (std::size_t c = 0; c < classes.size(); ++c) {
        for (std::size_t f = 0; f < nf; ++f) {
            agent_of[c][f] = pool.find(classes[c], cfg.features[f].feature);
            if (!agent_of[c][f]) throw ConfigError("features", "no agent for " + classes[c] + "/" + to_string(cfg.features[f].feature));
        }
    }
    for (auto& a : pool.agents()) {
        a.set_learning(opts.learn);
        if (opts.explore) a.set_explore(*opts.explore);
    }

    std::vector<ThresholdVector> rl_vectors(classes.size());
    std::vector<ThresholdVector> static_vectors(classes.size());
    for (std::size_t c = 0; c < classes.size(); ++c) {
        rl_vectors[c].device_class = classes[c];
        static_vectors[c].device_class = classes[c];
        for (const auto& fc : cfg.features) {
            rl_vectors[c].entries.push_back({fc.feature, 0.0, fc.direction});
            static_vectors[c].entries.push_back({fc.feature, 0.0, fc.direction});
        }
    }
    if (opts.static_arm) {
        r.static_thresholds = calibrate_static(s, table, cfg);
        for (const auto& st : r.static_thresholds) {
            static_vectors[class_index.at(st.device_class)].set_theta(st.entry.feature, st.entry.theta);
        }
    }

    ArmSummary rl{"rl", 0.0, {}, {}};
    ArmSummary st{"static", 0.0, {}, {}};
    std::size_t decided = 0;
    const std::size_t half = r.episodes / 2;

    for (std::size_t e = 0; e < r.episodes; ++e) {
        for (std::size_t c = 0; c < classes.size(); ++c) {
            for (std::size_t f = 0; f < nf; ++f) {
                agent_of[c][f]->begin_episode(rl_vectors[c]);
                r.thresholds.push_back({e, agent_of[c][f]->name(), rl_vectors[c].entries[f].theta});
            }
        }
        std::vector<std::vector<ConfusionCounts>> agent_counts(classes.size(), std::vector<ConfusionCounts>(nf));
        ConfusionCounts rl_ep, st_ep;

        for (std::size_t w = e * n; w < (e + 1) * n; ++w) {
            for (std::size_t d = 0; d < table.devices; ++d) {
                const std::size_t c = dev_class[d];
                const Truth truth = s.truth.label(s.devices[d], w);
                FeatureOutcomes rl_out, st_out;
                for (std::size_t f = 0; f < nf; ++f) {
                    const FeatureKind fk = cfg.features[f].feature;
                    if (!table.measured(w, d, f)) {
                        rl_out.emplace_back(fk, FeatureOutcome::NoMeasurement);
                        st_out.emplace_back(fk, FeatureOutcome::NoMeasurement);
                        continue;
                    }
                    const double h = table.at(w, d, f);
                    const FeatureOutcome ro = evaluate_feature(h, rl_vectors[c].entries[f]);
                    rl_out.emplace_back(fk, ro);
                    st_out.emplace_back(fk, evaluate_feature(h, static_vectors[c].entries[f]));
                    agent_counts[c][f] = update_confusion(ro == FeatureOutcome::Alarm, truth, agent_counts[c][f]);
                }
                Verdict rv, sv;
                try {
                    rv = combine_verdicts(std::move(rl_out), cfg.policy);
                    sv = combine_verdicts(std::move(st_out), cfg.policy);
                } catch (const Error& err) {
                    if (err.code() != ErrorCode::NoMeasurement) throw;
                    ++r.undecided;
                    continue;
                }
                ++decided;
                rl_ep = update_confusion(rv, truth, rl_ep);
                st_ep = update_confusion(sv, truth, st_ep);
                if (cfg.alarm_log) {
                    r.alarm_log.push_back(to_alarm_log_line({w, s.devices[d], rv, truth, rl.counts + rl_ep}));
                }
            }
            ++r.invariant_checks;
            const std::size_t seen = decided;
            if ((rl.counts + rl_ep).total() != seen || (st.counts + st_ep).total() != seen) ++r.invariant_violations;
        }

        for (std::size_t c = 0; c < classes.size(); ++c) {
            for (std::size_t f = 0; f < nf; ++f) agent_of[c][f]->finish_episode(agent_counts[c][f], cfg.utility);
        }
        const double rl_reward = period_reward(rl_ep, cfg.utility);
        rl.counts += rl_ep;
        rl.cumulative_utility += rl_reward;
        r.rates.push_back({e, "rl", rl_ep, period_rates(rl_ep), rl_reward});
        if (e >= half) r.rl_final_half += rl_ep;
        if (opts.static_arm) {
            const double st_reward = period_reward(st_ep, cfg.utility);
            st.counts += st_ep;
            st.cumulative_utility += st_reward;
            r.rates.push_back({e, "static", st_ep, period_rates(st_ep), st_reward});
        }
    }

    rl.rates = period_rates(rl.counts);
    st.rates = period_rates(st.counts);
    r.arms.push_back(rl);
    if (opts.static_arm) r.arms.push_back(st);

    for (const auto& a : pool.agents()) {
        const auto policy = greedy_policy(a.table(), a.config());
        for (std::size_t i = 0; i < policy.size(); ++i) r.policy.push_back({a.name(), a.table().state_at(i), policy[i]});
    }
    return r;
}

ordered_json report_to_json(const RunReport& r) {
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["windows"] = r.windows;
    j["episodes"] = r.episodes;
    j["devices"] = r.devices;
    j["undecided"] = r.undecided;
    ordered_json arms = ordered_json::array();
    for (const auto& a : r.arms) {
        arms.push_back({{"arm", a.arm},
                        {"cumulative_utility", a.cumulative_utility},
                        {"hit_rate", a.rates.hit_rate},
                        {"false_alarm_rate", a.rates.false_alarm_rate},
                        {"counts", counts_json(a.counts)}});
    }
    j["arms"] = std::move(arms);
    const Rates fh = period_rates(r.rl_final_half);
    j["rl_final_half"] = {{"hit_rate", fh.hit_rate}, {"false_alarm_rate", fh.false_alarm_rate},
                          {"counts", counts_json(r.rl_final_half)}};
    ordered_json st = ordered_json::array();
    for (const auto& t : r.static_thresholds) {
        st.push_back({{"device_class", t.device_class},
                      {"feature", to_string(t.entry.feature)},
                      {"direction", to_string(t.entry.direction)},
                      {"theta", t.entry.theta},
                      {"rule", t.rule}});
    }
    j["static_thresholds"] = std::move(st);
    j["invariant"] = {{"checks", r.invariant_checks}, {"violations", r.invariant_violations}};
    ordered_json eps = ordered_json::array();
    for (const auto& e : r.rates) {
        eps.push_back({{"episode", e.episode},
                       {"arm", e.arm},
                       {"reward", e.reward},
                       {"hit_rate", e.rates.hit_rate},
                       {"false_alarm_rate", e.rates.false_alarm_rate},
                       {"counts", counts_json(e.counts)}});
    }
    j["episode_series"] = std::move(eps);
    ordered_json th = ordered_json::array();
    for (const auto& t : r.thresholds) th.push_back({{"episode", t.episode}, {"agent", t.agent}, {"threshold", t.threshold}});
    j["threshold_series"] = std::move(th);
    ordered_json pol = ordered_json::array();
    for (const auto& p : r.policy) {
        pol.push_back({{"agent", p.agent}, {"hit_bin", p.state.hit_bin}, {"fa_bin", p.state.fa_bin}, {"threshold", p.threshold}});
    }
    j["policy"] = std::move(pol);
    return j;
}

std::string thresholds_csv(const RunReport& r) {
    std::string out = "episode,agent,threshold\n";
    for (const auto& t : r.thresholds) out += std::to_string(t.episode) + "," + t.agent + "," + fmt6(t.threshold) + "\n";
    return out;
}

std::string rates_csv(const RunReport& r) {
    std::string out = "episode,arm,hit_rate,false_alarm_rate,reward\n";
    for (const auto& e : r.rates) {
        out += std::to_string(e.episode) + "," + e.arm + "," + fmt6(e.rates.hit_rate) + "," +
               fmt6(e.rates.false_alarm_rate) + "," + fmt6(e.reward) + "\n";
    }
    return out;
}

std::string utility_summary_csv(const RunReport& r) {
    std::string out = "arm,cumulative_utility,hit_rate,false_alarm_rate\n";
    for (const auto& a : r.arms) {
        out += a.arm + "," + fmt6(a.cumulative_utility) + "," + fmt6(a.rates.hit_rate) + "," +
               fmt6(a.rates.false_alarm_rate) + "\n";
    }
    return out;
}

std::string policy_csv(const RunReport& r) {
    std::string out = "agent,hit_bin,fa_bin,threshold\n";
    for (const auto& p : r.policy) {
        out += p.agent + "," + std::to_string(p.state.hit_bin) + "," + std::to_string(p.state.fa_bin) + "," +
               fmt6(p.threshold) + "\n";
    }
    return out;
}

void emit_metrics(const RunReport& r, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir + ": " + ec.message());
    const std::filesystem::path p(dir);
    write_file((p / "thresholds.csv").string(), thresholds_csv(r));
    write_file((p / "rates.csv").string(), rates_csv(r));
    write_file((p / "utility_summary.csv").string(), utility_summary_csv(r));
    write_file((p / "policy.csv").string(), policy_csv(r));
}

std::string entropy_series_csv(const PreparedStream& s, const MetricTable& table, const ExperimentConfig& cfg) {
    std::string out = "window_index,window_start,device_id,feature,entropy,distinct_count,total_count\n";
    char start[32];
    for (std::size_t w = 0; w < table.windows; ++w) {
        const Micros t = s.windows[w].start;
        std::snprintf(start, sizeof start, "%lld.%06lld", static_cast<long long>(t / kMicrosPerSecond),
                      static_cast<long long>(t % kMicrosPerSecond));
        for (std::size_t d = 0; d < table.devices; ++d) {
            for (std::size_t f = 0; f < table.features; ++f) {
                std::string name = to_string(cfg.features[f].feature);
                if (cfg.features[f].metric != Metric::ENTROPY) name += "/" + std::string(to_string(cfg.features[f].metric));
                const std::size_t i = table.index(w, d, f);
                out += std::to_string(w) + "," + start + "," + s.devices[d] + "," + name + "," +
                       (table.measured(w, d, f) ? fmt6(table.values[i]) : std::string()) + "," +
                       std::to_string(table.distinct[i]) + "," + std::to_string(table.total[i]) + "\n";
            }
        }
    }
    return out;
}

}  // namespace rlids
