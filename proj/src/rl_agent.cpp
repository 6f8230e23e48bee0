#include "rlids/rl_agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "rlids/error.hpp"

namespace rlids {

std::vector<double> AgentConfig::default_action_grid(std::size_t n) {
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i) {
        grid[i] = static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return grid;
}

double AgentConfig::initial_explore() const {
    return epsilon_meaning == EpsilonMeaning::GREEDY_PROBABILITY ? 1.0 - epsilon : epsilon;
}

void AgentConfig::validate() const {
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("agent.learning_rate", "must lie in (0, 1]");
    if (!(discount >= 0.0 && discount < 1.0)) throw ConfigError("agent.discount", "must lie in [0, 1)");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("agent.epsilon", "must lie in [0, 1]");
    if (!(explore_decay > 0.0 && explore_decay <= 1.0)) throw ConfigError("agent.explore_decay", "must lie in (0, 1]");
    if (!(explore_floor >= 0.0 && explore_floor <= 1.0)) throw ConfigError("agent.explore_floor", "must lie in [0, 1]");
    if (hit_bins < 1 || fa_bins < 1 || hit_bins * fa_bins < 2) {
        throw ConfigError("agent.hit_bins", "state space needs at least 2 states");
    }
    if (action_grid.size() < 2) throw ConfigError("agent.action_grid", "needs at least 2 thresholds");
    for (std::size_t i = 0; i < action_grid.size(); ++i) {
        if (!(action_grid[i] >= 0.0 && action_grid[i] <= 1.0)) {
            throw ConfigError("agent.action_grid", "thresholds must lie in [0, 1]");
        }
        if (i > 0 && !(action_grid[i] > action_grid[i - 1])) {
            throw ConfigError("agent.action_grid", "must be strictly increasing");
        }
    }
    if (episode_len < 1) throw ConfigError("agent.episode_len", "must be positive");
}

std::string AgentConfig::fingerprint() const {
    std::string fp = "hit_bins=" + std::to_string(hit_bins) + ";fa_bins=" + std::to_string(fa_bins) + ";grid=";
    char buf[32];
    for (std::size_t i = 0; i < action_grid.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%s%a", i ? "," : "", action_grid[i]);
        fp += buf;
    }
    return fp;
}

StateId discretize_state(double hit_rate, double false_alarm_rate, const AgentConfig& cfg) {
    const auto bin = [](double v, std::size_t bins) {
        const double clamped = std::clamp(v, 0.0, 1.0);
        return std::min(static_cast<std::size_t>(std::floor(clamped * static_cast<double>(bins))), bins - 1);
    };
    return {bin(hit_rate, cfg.hit_bins), bin(false_alarm_rate, cfg.fa_bins)};
}

QTable::QTable(std::size_t hit_bins, std::size_t fa_bins, std::size_t actions)
    : hit_bins_(hit_bins),
      fa_bins_(fa_bins),
      actions_(actions),
      values_(hit_bins * fa_bins * actions, 0.0),
      visits_(hit_bins * fa_bins * actions, 0) {}

double QTable::max_value(StateId s) const {
    const auto r = row(s);
    return *std::max_element(r.begin(), r.end());
}

std::size_t QTable::argmax(StateId s) const {
    const auto r = row(s);
    // max_element returns the first maximal element.
    return static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
}

std::size_t select_action(const QTable& q, StateId s, double explore, AgentRng& rng) {
    if (explore > 0.0 && rng.uniform() < explore) return rng.below(q.actions());
    return q.argmax(s);
}

QTable q_update(QTable q, StateId s, std::size_t a, double reward, StateId next, const AgentConfig& cfg) {
    if (!std::isfinite(reward)) throw std::invalid_argument("q_update: reward must be finite");
    const std::size_t i = q.offset(s, a);
    const double target = reward + cfg.discount * q.max_value(next);
    q.values_[i] += cfg.learning_rate * (target - q.values_[i]);
    ++q.visits_[i];
    return q;
}

std::vector<double> greedy_policy(const QTable& q, const AgentConfig& cfg) {
    std::vector<double> policy(q.states());
    for (std::size_t i = 0; i < q.states(); ++i) policy[i] = cfg.action_grid[q.argmax(q.state_at(i))];
    return policy;
}

nlohmann::json qtable_to_json(const QTable& q, const AgentConfig& cfg) {
    nlohmann::json values = nlohmann::json::array();
    nlohmann::json visits = nlohmann::json::array();
    for (std::size_t i = 0; i < q.states(); ++i) {
        const StateId s = q.state_at(i);
        nlohmann::json vrow = nlohmann::json::array();
        nlohmann::json crow = nlohmann::json::array();
        for (std::size_t a = 0; a < q.actions(); ++a) {
            vrow.push_back(q.value(s, a));
            crow.push_back(q.visits(s, a));
        }
        values.push_back(std::move(vrow));
        visits.push_back(std::move(crow));
    }
    return {{"fingerprint", cfg.fingerprint()},
            {"hit_bins", cfg.hit_bins},
            {"fa_bins", cfg.fa_bins},
            {"action_grid", cfg.action_grid},
            {"values", std::move(values)},
            {"visits", std::move(visits)}};
}

QTable qtable_from_json(const nlohmann::json& doc, const AgentConfig& cfg) {
    const std::string fp = doc.at("fingerprint").get<std::string>();
    if (fp != cfg.fingerprint()) {
        throw Error(ErrorCode::FingerprintMismatch,
                    "Q-table was written for '" + fp + "', configured '" + cfg.fingerprint() + "'");
    }
    QTable q(cfg);
    const auto& values = doc.at("values");
    const auto& visits = doc.at("visits");
    if (values.size() != q.states() || visits.size() != q.states()) {
        throw Error(ErrorCode::FingerprintMismatch, "Q-table row count does not match state space");
    }
    for (std::size_t i = 0; i < q.states(); ++i) {
        if (values[i].size() != q.actions() || visits[i].size() != q.actions()) {
            throw Error(ErrorCode::FingerprintMismatch, "Q-table row width does not match action grid");
        }
        for (std::size_t a = 0; a < q.actions(); ++a) {
            const double v = values[i][a].get<double>();
            if (!std::isfinite(v)) throw Error(ErrorCode::InputError, "Q-table holds a non-finite value");
            q.values_[i * q.actions() + a] = v;
            q.visits_[i * q.actions() + a] = visits[i][a].get<std::uint64_t>();
        }
    }
    return q;
}

ThresholdAgent::ThresholdAgent(std::string device_class, FeatureKind feature, AgentConfig cfg, std::size_t ordinal)
    : device_class_(std::move(device_class)),
      feature_(feature),
      cfg_(std::move(cfg)),
      q_(cfg_),
      state_{cfg_.hit_bins - 1, 0},
      explore_(cfg_.initial_explore()),
      rng_(cfg_.seed + ordinal) {
    cfg_.validate();
}

std::size_t ThresholdAgent::begin_episode(ThresholdVector& thresholds) {
    const std::size_t a = select_action(q_, state_, explore_, rng_);
    thresholds.set_theta(feature_, cfg_.action_grid[a]);
    pending_action_ = a;
    return a;
}

EpisodeResult ThresholdAgent::finish_episode(const ConfusionCounts& counts, const UtilityParams& utility) {
    if (!pending_action_) throw std::logic_error("finish_episode without begin_episode");
    EpisodeResult r;
    r.state_before = state_;
    r.action = *pending_action_;
    r.threshold_used = cfg_.action_grid[r.action];
    r.counts = counts;
    r.reward = period_reward(counts, utility);
    r.state_after = discretize_state(period_rates(counts), cfg_);
    if (learning_) {
        q_ = q_update(std::move(q_), r.state_before, r.action, r.reward, r.state_after, cfg_);
        if (explore_ > cfg_.explore_floor) explore_ = std::max(cfg_.explore_floor, explore_ * cfg_.explore_decay);
    }
    state_ = r.state_after;
    pending_action_.reset();
    ++episodes_;
    return r;
}

nlohmann::json ThresholdAgent::to_json() const {
    const auto s = rng_.state();
    return {{"device_class", device_class_},
            {"feature", to_string(feature_)},
            {"episodes", episodes_},
            {"explore", explore_},
            {"state", {state_.hit_bin, state_.fa_bin}},
            {"rng", {s[0], s[1], s[2], s[3]}},
            {"qtable", qtable_to_json(q_, cfg_)}};
}

void ThresholdAgent::restore(const nlohmann::json& doc) {
    q_ = qtable_from_json(doc.at("qtable"), cfg_);
    episodes_ = doc.at("episodes").get<std::size_t>();
    explore_ = doc.at("explore").get<double>();
    const auto& st = doc.at("state");
    state_ = {st.at(0).get<std::size_t>(), st.at(1).get<std::size_t>()};
    if (state_.hit_bin >= cfg_.hit_bins || state_.fa_bin >= cfg_.fa_bins) {
        throw Error(ErrorCode::FingerprintMismatch, "persisted state outside the state space");
    }
    const auto& r = doc.at("rng");
    rng_.set_state({r.at(0).get<std::uint64_t>(), r.at(1).get<std::uint64_t>(), r.at(2).get<std::uint64_t>(),
                    r.at(3).get<std::uint64_t>()});
    pending_action_.reset();
}

ConfusionCounts score_threshold(std::span<const WindowObservations> windows, const ThresholdEntry& entry) {
    ConfusionCounts c;
    for (const auto& w : windows) {
        for (const auto& obs : w) {
            if (!obs.value) continue;
            c = update_confusion(evaluate_feature(*obs.value, entry) == FeatureOutcome::Alarm, obs.truth, c);
        }
    }
    return c;
}

EpisodeResult run_episode(ThresholdAgent& agent, ThresholdVector& thresholds,
                          std::span<const WindowObservations> windows, const UtilityParams& utility) {
    const std::size_t n = agent.config().episode_len;
    if (windows.size() < n) {
        throw Error(ErrorCode::StreamExhausted, "episode needs " + std::to_string(n) + " windows, " +
                                                    std::to_string(windows.size()) + " remain");
    }
    agent.begin_episode(thresholds);
    const ThresholdEntry* entry = thresholds.find(agent.feature());
    const ConfusionCounts counts = score_threshold(windows.first(n), *entry);
    return agent.finish_episode(counts, utility);
}

}  // namespace rlids
