#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlids/attack_sim.hpp"
#include "rlids/detector.hpp"
#include "rlids/entropy.hpp"
#include "rlids/kernels.hpp"
#include "rlids/rl_agent.hpp"

namespace rlids {

inline constexpr int kSchemaVersion = 1;

struct FeatureConfig {
    FeatureKind feature;
    Direction direction = Direction::ALARM_IF_BELOW;
    Metric metric = Metric::ENTROPY;
};

struct DeviceClassConfig {
    std::string name;
    std::vector<std::string> devices;
};

struct StaticBaselineConfig {
    std::size_t calibration_windows = 90;
    // Explicit per-feature thresholds; features listed here skip calibration.
    std::vector<std::pair<FeatureKind, double>> thresholds;
};

struct ReplayConfig {
    std::string records;     // summary CSV or pcap
    std::string device_map;  // optional `address,device_id` CSV
    std::string labels;      // `device_id,window_index,label` CSV
};

enum class ScheduleType : std::uint8_t { MUTATIVE, PERIODIC, EXPLICIT };

struct PeriodicConfig {
    AttackKind kind = AttackKind::UDP_FLOOD;
    double rate = 10.0;
    std::size_t count = 10;
    Micros duration = 600 * kMicrosPerSecond;
    Micros gap = 600 * kMicrosPerSecond;
    Micros lead_in = 0;
    Micros tail = 0;
    std::string target;
};

struct ScenarioConfig {
    std::uint64_t seed = 1;
    std::vector<DeviceProfile> profiles;
    AttackShape shape;
    ScheduleType schedule_type = ScheduleType::MUTATIVE;
    MutativeParams mutative;
    PeriodicConfig periodic;
    Schedule explicit_schedule;
};

struct ExperimentConfig {
    enum class Mode : std::uint8_t { REPLAY, SIMULATE };

    int schema_version = kSchemaVersion;
    Mode mode = Mode::SIMULATE;
    ReplayConfig replay;
    ScenarioConfig scenario;
    Micros window_len = 10 * kMicrosPerSecond;
    std::vector<FeatureConfig> features{{FeatureKind::protocol(), Direction::ALARM_IF_BELOW, Metric::ENTROPY}};
    std::vector<DeviceClassConfig> device_classes;  // replay only; simulated devices carry their class
    CombinationPolicy policy;
    EntropyConfig entropy;
    std::size_t baseline_windows = 6;
    UtilityParams utility;
    AgentConfig agent;
    StaticBaselineConfig static_baseline;
    std::string output_dir = "out";
    std::string load_state;
    std::string save_state;
    bool alarm_log = true;

    // Throws ConfigError naming the offending field.
    void validate() const;
};

// Relative paths inside the document resolve against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::string& base_dir = "");
ExperimentConfig load_config(const std::string& path);
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);

Schedule build_schedule(const ScenarioConfig& sc);

// Window stream shared by both comparison arms. Windows view `records`, so the
// object is move-only.
struct PreparedStream {
    std::vector<PacketRecord> records;
    DeviceMap map;
    GroundTruth truth;
    std::vector<std::string> devices;       // ordinal order used in the metric table
    std::vector<std::string> device_class;  // aligned with devices
    std::vector<Window> windows;
    Micros origin = 0;
    Micros window_len = 0;
    std::optional<Schedule> schedule;

    PreparedStream() = default;
    PreparedStream(PreparedStream&&) = default;
    PreparedStream& operator=(PreparedStream&&) = default;
    PreparedStream(const PreparedStream&) = delete;
    PreparedStream& operator=(const PreparedStream&) = delete;

    std::vector<std::string> classes() const;  // sorted distinct
};

PreparedStream prepare_stream(const ExperimentConfig& cfg);
PreparedStream stream_from_simulation(Simulation sim, const std::vector<DeviceProfile>& profiles, Micros window_len,
                                      std::optional<Schedule> schedule = std::nullopt);

std::vector<MetricSpec> metric_specs(const ExperimentConfig& cfg);
MetricTable compute_stream_metrics(const PreparedStream& s, const ExperimentConfig& cfg, bool parallel = true);

// Per-feature observations of one class over the whole stream.
std::vector<WindowObservations> class_observations(const PreparedStream& s, const MetricTable& table,
                                                   const std::string& device_class, std::size_t feature);

struct StaticThreshold {
    std::string device_class;
    ThresholdEntry entry;
    std::string rule;  // explicit, midpoint, never_alarm, benign_3sigma
};

std::vector<StaticThreshold> calibrate_static(const PreparedStream& s, const MetricTable& table,
                                              const ExperimentConfig& cfg);

// The RL arm's agents, one per (device class, feature), ordered class-major.
class AgentPool {
public:
    AgentPool(const std::vector<std::string>& classes, const ExperimentConfig& cfg);

    std::vector<ThresholdAgent>& agents() { return agents_; }
    const std::vector<ThresholdAgent>& agents() const { return agents_; }
    ThresholdAgent* find(const std::string& device_class, FeatureKind f);

    nlohmann::json to_json() const;
    // Throws SchemaVersionMismatch or FingerprintMismatch.
    void restore(const nlohmann::json& doc);

private:
    AgentConfig cfg_;
    std::vector<ThresholdAgent> agents_;
};

void persist_state(const AgentPool& pool, const std::string& path);
void load_state(AgentPool& pool, const std::string& path);

struct EpisodeRates {
    std::size_t episode = 0;
    std::string arm;
    ConfusionCounts counts;
    Rates rates;
    double reward = 0.0;
};

struct ThresholdRow {
    std::size_t episode = 0;
    std::string agent;
    double threshold = 0.0;
};

struct PolicyRow {
    std::string agent;
    StateId state;
    double threshold = 0.0;
};

struct ArmSummary {
    std::string arm;
    double cumulative_utility = 0.0;
    ConfusionCounts counts;
    Rates rates;
};

struct RunReport {
    std::size_t windows = 0;
    std::size_t episodes = 0;
    std::size_t devices = 0;
    std::size_t undecided = 0;  // device-windows without any measurement
    std::vector<EpisodeRates> rates;
    std::vector<ThresholdRow> thresholds;
    std::vector<PolicyRow> policy;
    std::vector<ArmSummary> arms;
    std::vector<StaticThreshold> static_thresholds;
    ConfusionCounts rl_final_half;
    std::size_t invariant_checks = 0;
    std::size_t invariant_violations = 0;
    std::vector<std::string> alarm_log;

    const ArmSummary* arm(const std::string& name) const;
};

struct RunOptions {
    bool static_arm = true;
    bool learn = true;
    std::optional<double> explore;  // overrides the agents' exploration probability
};

// Runs both arms over the same windows. Windows past the last full episode are
// dropped for both.
RunReport run_compare(const PreparedStream& s, const MetricTable& table, const ExperimentConfig& cfg,
                      AgentPool& pool, const RunOptions& opts = {});

nlohmann::ordered_json report_to_json(const RunReport& r);

// thresholds.csv, rates.csv, utility_summary.csv, policy.csv.
void emit_metrics(const RunReport& r, const std::string& dir);
std::string thresholds_csv(const RunReport& r);
std::string rates_csv(const RunReport& r);
std::string utility_summary_csv(const RunReport& r);
std::string policy_csv(const RunReport& r);

std::string entropy_series_csv(const PreparedStream& s, const MetricTable& table, const ExperimentConfig& cfg);

}  // namespace rlids
