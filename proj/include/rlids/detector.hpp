#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rlids/windowing.hpp"

namespace rlids {

enum class Direction : std::uint8_t { ALARM_IF_BELOW, ALARM_IF_ABOVE };

std::string_view to_string(Direction d);
std::optional<Direction> parse_direction(std::string_view text);

struct ThresholdEntry {
    FeatureKind feature;
    double theta = 0.0;  // normalized-entropy units, [0, 1]
    Direction direction = Direction::ALARM_IF_BELOW;
};

struct ThresholdVector {
    std::string device_class;
    std::vector<ThresholdEntry> entries;  // at most one per feature

    const ThresholdEntry* find(FeatureKind f) const;
    // Installs theta for an existing entry. Throws ConfigError if absent or out of [0, 1].
    void set_theta(FeatureKind f, double theta);
    // Throws ConfigError on duplicate features or theta outside [0, 1].
    void validate() const;
};

// Payoffs for the four detection outcomes. Defaults are the experiment values
// P0=14, P1=12, C0=0, C1=3, C2=15.
struct UtilityParams {
    double p0 = 14.0;  // profit for a confirmed alarm
    double p1 = 12.0;  // profit for passing benign traffic
    double c0 = 0.0;   // cost of raising any alarm
    double c1 = 3.0;   // penalty for a false alarm
    double c2 = 15.0;  // penalty for a missed attack

    void validate() const;
};

struct ConfusionCounts {
    std::size_t n11 = 0;  // alarm, attack (TP)
    std::size_t n12 = 0;  // alarm, benign (FP)
    std::size_t n21 = 0;  // pass, attack (FN)
    std::size_t n22 = 0;  // pass, benign (TN)

    std::size_t total() const { return n11 + n12 + n21 + n22; }

    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        n11 += o.n11;
        n12 += o.n12;
        n21 += o.n21;
        n22 += o.n22;
        return *this;
    }
    friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

enum class Truth : std::uint8_t { Benign, Attack };
enum class FeatureOutcome : std::uint8_t { Pass, Alarm, NoMeasurement };

std::string_view to_string(Truth t);
std::string_view to_string(FeatureOutcome o);

struct CombinationPolicy {
    enum class Kind : std::uint8_t { OR, K_OF_N } kind = Kind::OR;
    std::size_t k = 1;

    static CombinationPolicy any() { return {}; }
    static CombinationPolicy k_of_n(std::size_t k) { return {Kind::K_OF_N, k}; }
};

using FeatureOutcomes = std::vector<std::pair<FeatureKind, FeatureOutcome>>;

struct Verdict {
    bool alarm = false;
    FeatureOutcomes per_feature;
};

// Strict comparison: equality always passes.
FeatureOutcome evaluate_feature(double h, const ThresholdEntry& entry);

// Throws Error(NoMeasurement) when every feature is unmeasured.
Verdict combine_verdicts(FeatureOutcomes per_feature, CombinationPolicy policy = {});

ConfusionCounts update_confusion(const Verdict& verdict, Truth truth, ConfusionCounts counts);
ConfusionCounts update_confusion(bool alarm, Truth truth, ConfusionCounts counts);

double period_reward(const ConfusionCounts& counts, const UtilityParams& u);

struct Rates {
    double hit_rate = 1.0;          // N11 / (N11 + N21), 1 when no attack occurred
    double false_alarm_rate = 0.0;  // N12 / (N12 + N22), 0 when no benign traffic occurred
};

Rates period_rates(const ConfusionCounts& counts);

// One line of the newline-delimited JSON alarm log.
struct AlarmLogEntry {
    std::size_t window_index = 0;
    std::string device_id;
    Verdict verdict;
    Truth truth = Truth::Benign;
    ConfusionCounts running_counts;
};

std::string to_alarm_log_line(const AlarmLogEntry& entry);

}  // namespace rlids
