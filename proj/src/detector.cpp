#include "rlids/detector.hpp"

#include <algorithm>
#include <json.hpp>

#include "rlids/error.hpp"

namespace rlids {

std::string_view to_string(Direction d) {
    return d == Direction::ALARM_IF_BELOW ? "ALARM_IF_BELOW" : "ALARM_IF_ABOVE";
}

std::optional<Direction> parse_direction(std::string_view text) {
    if (text == "ALARM_IF_BELOW" || text == "below") return Direction::ALARM_IF_BELOW;
    if (text == "ALARM_IF_ABOVE" || text == "above") return Direction::ALARM_IF_ABOVE;
    return std::nullopt;
}

std::string_view to_string(Truth t) { return t == Truth::Attack ? "attack" : "benign"; }

std::string_view to_string(FeatureOutcome o) {
    switch (o) {
        case FeatureOutcome::Pass: return "pass";
        case FeatureOutcome::Alarm: return "alarm";
        case FeatureOutcome::NoMeasurement: return "no_measurement";
    }
    return "no_measurement";
}

const ThresholdEntry* ThresholdVector::find(FeatureKind f) const {
    auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.feature == f; });
    return it == entries.end() ? nullptr : &*it;
}

void ThresholdVector::set_theta(FeatureKind f, double theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("thresholds." + to_string(f), "theta outside [0, 1]");
    for (auto& e : entries) {
        if (e.feature == f) {
            e.theta = theta;
            return;
        }
    }
    throw ConfigError("thresholds." + to_string(f), "feature has no threshold entry");
}

void ThresholdVector::validate() const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (!(e.theta >= 0.0 && e.theta <= 1.0)) {
            throw ConfigError("thresholds." + to_string(e.feature), "theta outside [0, 1]");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (entries[j].feature == e.feature) {
                throw ConfigError("thresholds." + to_string(e.feature), "duplicate feature entry");
            }
        }
    }
}

void UtilityParams::validate() const {
    const std::pair<const char*, double> fields[] = {{"p0", p0}, {"p1", p1}, {"c0", c0}, {"c1", c1}, {"c2", c2}};
    for (const auto& [name, v] : fields) {
        if (!(v >= 0.0)) throw ConfigError(std::string("utility.") + name, "must be >= 0");
    }
}

FeatureOutcome evaluate_feature(double h, const ThresholdEntry& entry) {
    const bool alarm = entry.direction == Direction::ALARM_IF_BELOW ? h < entry.theta : h > entry.theta;
    return alarm ? FeatureOutcome::Alarm : FeatureOutcome::Pass;
}

Verdict combine_verdicts(FeatureOutcomes per_feature, CombinationPolicy policy) {
    std::size_t measured = 0;
    std::size_t alarms = 0;
    for (const auto& [_, o] : per_feature) {
        if (o == FeatureOutcome::NoMeasurement) continue;
        ++measured;
        if (o == FeatureOutcome::Alarm) ++alarms;
    }
    if (measured == 0) throw Error(ErrorCode::NoMeasurement, "no feature measured in window");
    Verdict v;
    v.alarm = policy.kind == CombinationPolicy::Kind::OR ? alarms > 0 : alarms >= policy.k;
    v.per_feature = std::move(per_feature);
    return v;
}

ConfusionCounts update_confusion(bool alarm, Truth truth, ConfusionCounts counts) {
    const bool attack = truth == Truth::Attack;
    if (alarm && attack) {
        ++counts.n11;
    } else if (alarm) {
        ++counts.n12;
    } else if (attack) {
        ++counts.n21;
    } else {
        ++counts.n22;
    }
    return counts;
}

ConfusionCounts update_confusion(const Verdict& verdict, Truth truth, ConfusionCounts counts) {
    return update_confusion(verdict.alarm, truth, counts);
}

double period_reward(const ConfusionCounts& c, const UtilityParams& u) {
    return (u.p0 - u.c0) * static_cast<double>(c.n11) - (u.c0 + u.c1) * static_cast<double>(c.n12) -
           u.c2 * static_cast<double>(c.n21) + u.p1 * static_cast<double>(c.n22);
}

Rates period_rates(const ConfusionCounts& c) {
    Rates r;
    if (c.n11 + c.n21 > 0) r.hit_rate = static_cast<double>(c.n11) / static_cast<double>(c.n11 + c.n21);
    if (c.n12 + c.n22 > 0) r.false_alarm_rate = static_cast<double>(c.n12) / static_cast<double>(c.n12 + c.n22);
    return r;
}

std::string to_alarm_log_line(const AlarmLogEntry& e) {
    nlohmann::ordered_json flags = nlohmann::ordered_json::object();
    for (const auto& [f, o] : e.verdict.per_feature) flags[to_string(f)] = to_string(o);
    nlohmann::ordered_json j;
    j["window_index"] = e.window_index;
    j["device_id"] = e.device_id;
    j["feature_flags"] = std::move(flags);
    j["verdict"] = e.verdict.alarm ? "alarm" : "pass";
    j["truth"] = to_string(e.truth);
    j["running_counts"] = {{"n11", e.running_counts.n11},
                           {"n12", e.running_counts.n12},
                           {"n21", e.running_counts.n21},
                           {"n22", e.running_counts.n22}};
    return j.dump();
}

}  // namespace rlids
