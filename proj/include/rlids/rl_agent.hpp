#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlids/detector.hpp"
#include "rlids/rng.hpp"

namespace rlids {

// How AgentConfig::epsilon is read. The default treats it as the probability
// of acting greedily, so epsilon = 0.9 explores 10% of the time.
enum class EpsilonMeaning : std::uint8_t { GREEDY_PROBABILITY, EXPLORE_PROBABILITY };

struct AgentConfig {
    double learning_rate = 0.1;
    double discount = 0.8;
    double epsilon = 0.9;
    EpsilonMeaning epsilon_meaning = EpsilonMeaning::GREEDY_PROBABILITY;
    double explore_decay = 0.995;  // multiplicative, applied after every episode
    double explore_floor = 0.01;
    std::size_t hit_bins = 10;
    std::size_t fa_bins = 10;
    std::vector<double> action_grid = default_action_grid();
    std::size_t episode_len = 12;
    std::uint64_t seed = 1;

    // 21 evenly spaced thresholds 0.00, 0.05, ..., 1.00.
    static std::vector<double> default_action_grid(std::size_t n = 21);

    double initial_explore() const;
    // Throws ConfigError with the offending field.
    void validate() const;
    // Identifies the table shape; a persisted table only loads against an equal one.
    std::string fingerprint() const;
};

struct StateId {
    std::size_t hit_bin = 0;
    std::size_t fa_bin = 0;

    friend bool operator==(const StateId&, const StateId&) = default;
};

// Equal-width bins; the top edge (1.0) falls into the last bin.
StateId discretize_state(double hit_rate, double false_alarm_rate, const AgentConfig& cfg);
inline StateId discretize_state(const Rates& r, const AgentConfig& cfg) {
    return discretize_state(r.hit_rate, r.false_alarm_rate, cfg);
}

class QTable {
public:
    QTable() = default;
    QTable(std::size_t hit_bins, std::size_t fa_bins, std::size_t actions);
    explicit QTable(const AgentConfig& cfg) : QTable(cfg.hit_bins, cfg.fa_bins, cfg.action_grid.size()) {}

    std::size_t hit_bins() const { return hit_bins_; }
    std::size_t fa_bins() const { return fa_bins_; }
    std::size_t states() const { return hit_bins_ * fa_bins_; }
    std::size_t actions() const { return actions_; }

    double value(StateId s, std::size_t a) const { return values_[offset(s, a)]; }
    double& value(StateId s, std::size_t a) { return values_[offset(s, a)]; }
    std::uint64_t visits(StateId s, std::size_t a) const { return visits_[offset(s, a)]; }

    std::span<const double> row(StateId s) const { return {values_.data() + offset(s, 0), actions_}; }
    double max_value(StateId s) const;
    // Lowest index among maximal entries.
    std::size_t argmax(StateId s) const;

    StateId state_at(std::size_t index) const { return {index / fa_bins_, index % fa_bins_}; }

    std::span<const double> values() const { return values_; }
    std::span<const std::uint64_t> visit_counts() const { return visits_; }

    friend bool operator==(const QTable&, const QTable&) = default;

private:
    friend QTable q_update(QTable, StateId, std::size_t, double, StateId, const AgentConfig&);
    friend QTable qtable_from_json(const nlohmann::json&, const AgentConfig&);

    std::size_t offset(StateId s, std::size_t a) const { return (s.hit_bin * fa_bins_ + s.fa_bin) * actions_ + a; }

    std::size_t hit_bins_ = 0;
    std::size_t fa_bins_ = 0;
    std::size_t actions_ = 0;
    std::vector<double> values_;
    std::vector<std::uint64_t> visits_;
};

using AgentRng = Rng;

// Greedy with probability 1 - explore, otherwise a uniformly random action.
std::size_t select_action(const QTable& q, StateId s, double explore, AgentRng& rng);

// Q(s,a) += lr * (r + discount * max_a' Q(s',a') - Q(s,a)); visit count of (s,a) += 1.
QTable q_update(QTable q, StateId s, std::size_t a, double reward, StateId next, const AgentConfig& cfg);

// Threshold of the greedy action for every state, indexed like QTable::state_at.
std::vector<double> greedy_policy(const QTable& q, const AgentConfig& cfg);

nlohmann::json qtable_to_json(const QTable& q, const AgentConfig& cfg);
// Throws FingerprintMismatch when the document was written under another shape.
QTable qtable_from_json(const nlohmann::json& doc, const AgentConfig& cfg);

struct EpisodeResult {
    StateId state_before;
    StateId state_after;
    std::size_t action = 0;
    double reward = 0.0;
    ConfusionCounts counts;
    double threshold_used = 0.0;
};

// Threshold-tuning agent owning one feature's entry of a device class's
// threshold vector. An episode opens with begin_episode (observe state, pick a
// threshold) and closes with finish_episode (reward, Q-update, move state).
class ThresholdAgent {
public:
    ThresholdAgent(std::string device_class, FeatureKind feature, AgentConfig cfg, std::size_t ordinal = 0);

    const std::string& device_class() const { return device_class_; }
    FeatureKind feature() const { return feature_; }
    const AgentConfig& config() const { return cfg_; }
    const QTable& table() const { return q_; }
    StateId state() const { return state_; }
    double explore() const { return explore_; }
    std::size_t episodes() const { return episodes_; }
    std::string name() const { return device_class_ + "/" + to_string(feature_); }

    // Picks the action for the current state and installs its threshold.
    std::size_t begin_episode(ThresholdVector& thresholds);
    EpisodeResult finish_episode(const ConfusionCounts& counts, const UtilityParams& utility);

    // Freezes exploration (for greedy evaluation runs).
    void set_explore(double p) { explore_ = p; }
    void set_learning(bool on) { learning_ = on; }

    nlohmann::json to_json() const;
    // Restores table, state, exploration and RNG; the config is the caller's.
    void restore(const nlohmann::json& doc);

private:
    std::string device_class_;
    FeatureKind feature_;
    AgentConfig cfg_;
    QTable q_;
    StateId state_;
    double explore_;
    AgentRng rng_;
    std::size_t episodes_ = 0;
    std::optional<std::size_t> pending_action_;
    bool learning_ = true;
};

// One device-window observation of the agent's feature: the metric value
// (nullopt = no measurement) and the ground-truth label.
struct FeatureObservation {
    std::optional<double> value;
    Truth truth = Truth::Benign;
};

// Observations of one window across the devices of a class.
using WindowObservations = std::vector<FeatureObservation>;

// Runs one full episode: installs the chosen threshold in `thresholds`, scores
// the first episode_len windows, updates the table. Throws StreamExhausted when
// fewer windows remain; the agent is left untouched in that case.
EpisodeResult run_episode(ThresholdAgent& agent, ThresholdVector& thresholds,
                          std::span<const WindowObservations> windows, const UtilityParams& utility);

// Counts of applying one fixed threshold to the observations.
ConfusionCounts score_threshold(std::span<const WindowObservations> windows, const ThresholdEntry& entry);

}  // namespace rlids
