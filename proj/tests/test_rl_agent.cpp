#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "rlids/error.hpp"
#include "rlids/ingest.hpp"
#include "rlids/rl_agent.hpp"

using namespace rlids;

namespace {

const FeatureKind kProto = FeatureKind::protocol();

AgentConfig greedy_cfg() {
    AgentConfig c;
    c.epsilon = 1.0;  // greedy probability 1
    return c;
}

ThresholdVector thresholds() { return {"camera", {{kProto, 0.0, Direction::ALARM_IF_BELOW}}}; }

std::vector<WindowObservations> windows_of(const std::vector<double>& h, const std::vector<Truth>& t) {
    std::vector<WindowObservations> out;
    for (std::size_t i = 0; i < h.size(); ++i) out.push_back({{h[i], t[i]}});
    return out;
}

// Drives an agent with synthetic episode counts.
void drive(ThresholdAgent& agent, Rng& rng, int episodes) {
    auto tv = thresholds();
    for (int e = 0; e < episodes; ++e) {
        agent.begin_episode(tv);
        ConfusionCounts c{rng.below(5), rng.below(5), rng.below(5), rng.below(10)};
        agent.finish_episode(c, UtilityParams{});
    }
}

}  // namespace

TEST_CASE("state bins") {
    const AgentConfig c;
    CHECK(discretize_state(0.0, 0.0, c) == StateId{0, 0});
    CHECK(discretize_state(1.0, 1.0, c) == StateId{9, 9});
    CHECK(discretize_state(0.67, 0.05, c) == StateId{6, 0});
    CHECK(discretize_state(0.1, 0.0999, c) == StateId{1, 0});
}

TEST_CASE("default action grid") {
    const auto g = AgentConfig::default_action_grid();
    REQUIRE(g.size() == 21);
    CHECK(g.front() == 0.0);
    CHECK(g.back() == 1.0);
    CHECK(g[10] == 0.5);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(0.05 * static_cast<double>(i)));
}

TEST_CASE("epsilon readings") {
    AgentConfig c;
    CHECK(c.initial_explore() == doctest::Approx(0.1));
    c.epsilon_meaning = EpsilonMeaning::EXPLORE_PROBABILITY;
    CHECK(c.initial_explore() == 0.9);
}

TEST_CASE("greedy selection") {
    QTable q(1, 2, 3);
    Rng rng(1);
    const StateId s{0, 1};
    CHECK(select_action(q, s, 0.0, rng) == 0);
    const auto tbl = [&] {
        auto doc = qtable_to_json(q, [] {
            AgentConfig c;
            c.hit_bins = 1;
            c.fa_bins = 2;
            c.action_grid = {0.0, 0.5, 1.0};
            return c;
        }());
        doc["values"][1] = {0.0, 5.0, 1.0};
        return doc;
    }();
    AgentConfig c;
    c.hit_bins = 1;
    c.fa_bins = 2;
    c.action_grid = {0.0, 0.5, 1.0};
    const QTable loaded = qtable_from_json(tbl, c);
    CHECK(select_action(loaded, s, 0.0, rng) == 1);
    CHECK(select_action(loaded, StateId{0, 0}, 0.0, rng) == 0);
}

TEST_CASE("uniform exploration") {
    const QTable q(AgentConfig{});
    Rng rng(2024);
    const std::size_t b = q.actions();
    std::vector<std::size_t> hits(b, 0);
    constexpr std::size_t kDraws = 100000;
    for (std::size_t i = 0; i < kDraws; ++i) ++hits[select_action(q, {3, 4}, 1.0, rng)];
    const double expected = static_cast<double>(kDraws) / static_cast<double>(b);
    double chi2 = 0.0;
    for (std::size_t n : hits) {
        CHECK(std::abs(static_cast<double>(n) / kDraws - 1.0 / static_cast<double>(b)) <= 0.02);
        chi2 += (static_cast<double>(n) - expected) * (static_cast<double>(n) - expected) / expected;
    }
    // 20 degrees of freedom, upper 0.1% point.
    CHECK(chi2 < 45.31);
}

TEST_CASE("q update rule") {
    AgentConfig c;
    QTable zero(c);
    CHECK(std::ranges::equal(q_update(zero, {1, 1}, 3, 0.0, {2, 2}, c).values(), zero.values()));

    auto doc = qtable_to_json(zero, c);
    doc["values"][2 * 10 + 3][7] = 2.0;  // max of the next state
    const QTable q = qtable_from_json(doc, c);
    const QTable u = q_update(q, {1, 1}, 5, 5.0, {2, 3}, c);
    CHECK(u.value({1, 1}, 5) == doctest::Approx(0.66).epsilon(1e-15));
    CHECK(u.visits({1, 1}, 5) == 1);

    AgentConfig myopic;
    myopic.discount = 0.0;
    myopic.learning_rate = 1.0;
    const QTable m = q_update(q, {4, 4}, 0, 1.0, {2, 3}, myopic);
    CHECK(m.value({4, 4}, 0) == 1.0);
}

TEST_CASE("q update touches one entry") {
    AgentConfig c;
    Rng rng(8);
    QTable q(c);
    for (int i = 0; i < 2000; ++i) {
        const StateId s{rng.below(10), rng.below(10)};
        const StateId n{rng.below(10), rng.below(10)};
        const std::size_t a = rng.below(21);
        const double r = rng.uniform() * 200.0 - 100.0;
        const QTable next = q_update(q, s, a, r, n, c);
        std::size_t changed = 0;
        for (std::size_t k = 0; k < q.values().size(); ++k) {
            if (q.visit_counts()[k] != next.visit_counts()[k]) ++changed;
            if (q.values()[k] != next.values()[k]) CHECK(k == (s.hit_bin * 10 + s.fa_bin) * 21 + a);
        }
        CHECK(changed == 1);
        q = next;
    }
}

TEST_CASE("q values stay within the discounted reward bound") {
    AgentConfig c;
    Rng rng(9);
    QTable q(c);
    const double rmax = 500.0;
    for (int i = 0; i < 20000; ++i) {
        q = q_update(q, {rng.below(10), rng.below(10)}, rng.below(21), (rng.uniform() * 2 - 1) * rmax,
                     {rng.below(10), rng.below(10)}, c);
    }
    for (double v : q.values()) CHECK(std::abs(v) <= rmax / (1.0 - c.discount) + 1e-9);
}

TEST_CASE("greedy policy") {
    AgentConfig c;
    const QTable zero(c);
    for (double th : greedy_policy(zero, c)) CHECK(th == 0.0);
    auto doc = qtable_to_json(zero, c);
    doc["values"][37][3] = 0.5;
    const auto p = greedy_policy(qtable_from_json(doc, c), c);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == (i == 37 ? c.action_grid[3] : 0.0));
}

TEST_CASE("all-benign episode") {
    AgentConfig c = greedy_cfg();
    ThresholdAgent agent("camera", kProto, c);
    auto tv = thresholds();
    const auto w = windows_of(std::vector(12, 0.8), std::vector(12, Truth::Benign));
    const auto r = run_episode(agent, tv, w, UtilityParams{});
    CHECK(r.threshold_used == 0.0);
    CHECK(r.counts == ConfusionCounts{0, 0, 0, 12});
    CHECK(r.reward == 12.0 * 12);
    CHECK(r.state_after == StateId{9, 0});
}

TEST_CASE("all-hit episode") {
    AgentConfig c = greedy_cfg();
    c.action_grid = {0.3, 0.6};
    ThresholdAgent agent("camera", kProto, c);
    auto tv = thresholds();
    const auto w = windows_of(std::vector(12, 0.0), std::vector(12, Truth::Attack));
    const auto r = run_episode(agent, tv, w, UtilityParams{});
    CHECK(r.counts == ConfusionCounts{12, 0, 0, 0});
    CHECK(r.reward == 14.0 * 12);
    CHECK(tv.find(kProto)->theta == 0.3);
}

TEST_CASE("episode needs enough windows") {
    ThresholdAgent agent("camera", kProto, greedy_cfg());
    auto tv = thresholds();
    const auto w = windows_of(std::vector(5, 0.8), std::vector(5, Truth::Benign));
    try {
        run_episode(agent, tv, w, UtilityParams{});
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::StreamExhausted);
    }
    CHECK(agent.episodes() == 0);
    CHECK(agent.table() == QTable(greedy_cfg()));
}

TEST_CASE("mixed episode matches the hand trace") {
    const auto g = nlohmann::json::parse(read_file(std::string(RLIDS_GOLDEN_DIR) + "/episode_trace.json"));
    AgentConfig c = greedy_cfg();
    c.episode_len = g.at("episode_len").get<std::size_t>();
    ThresholdAgent agent("camera", kProto, c);

    const auto st = g.at("start_state");
    const std::size_t start_row = st[0].get<std::size_t>() * c.fa_bins + st[1].get<std::size_t>();
    auto doc = agent.to_json();
    doc["qtable"]["values"][start_row][g.at("seeded_q").at("action").get<std::size_t>()] =
        g.at("seeded_q").at("value").get<double>();
    agent.restore(doc);
    REQUIRE(agent.state() == StateId{st[0].get<std::size_t>(), st[1].get<std::size_t>()});

    std::vector<double> h = g.at("entropy").get<std::vector<double>>();
    std::vector<Truth> t;
    for (const auto& s : g.at("truth")) t.push_back(s.get<std::string>() == "attack" ? Truth::Attack : Truth::Benign);
    auto tv = thresholds();
    const auto r = run_episode(agent, tv, windows_of(h, t), UtilityParams{});

    const auto& e = g.at("expected");
    CHECK(r.action == e.at("action").get<std::size_t>());
    CHECK(r.threshold_used == e.at("threshold").get<double>());
    CHECK(r.counts == ConfusionCounts{e["counts"]["n11"], e["counts"]["n12"], e["counts"]["n21"], e["counts"]["n22"]});
    CHECK(r.reward == e.at("reward").get<double>());
    CHECK(r.state_after == StateId{e["state_after"][0], e["state_after"][1]});
    CHECK(agent.state() == r.state_after);
    CHECK(agent.table().value({9, 0}, 10) == doctest::Approx(e.at("q_after").get<double>()).epsilon(1e-14));
}

TEST_CASE("exploration decays to the floor") {
    AgentConfig c;
    c.epsilon_meaning = EpsilonMeaning::EXPLORE_PROBABILITY;
    c.explore_decay = 0.5;
    ThresholdAgent agent("camera", kProto, c);
    Rng rng(1);
    drive(agent, rng, 20);
    CHECK(agent.explore() == c.explore_floor);
}

TEST_CASE("agents are deterministic in their seed") {
    AgentConfig c;
    c.epsilon_meaning = EpsilonMeaning::EXPLORE_PROBABILITY;
    ThresholdAgent a("camera", kProto, c), b("camera", kProto, c), other("camera", kProto, c, 1);
    Rng r1(5), r2(5), r3(5);
    drive(a, r1, 300);
    drive(b, r2, 300);
    drive(other, r3, 300);
    CHECK(a.table() == b.table());
    CHECK(a.to_json() == b.to_json());
    CHECK_FALSE(a.table() == other.table());
}

TEST_CASE("persisted agents round-trip exactly") {
    AgentConfig c;
    c.epsilon_meaning = EpsilonMeaning::EXPLORE_PROBABILITY;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        ThresholdAgent a("camera", kProto, c, seed);
        Rng rng(seed);
        drive(a, rng, 400);
        const std::string text = a.to_json().dump();
        ThresholdAgent b("camera", kProto, c, 99);
        b.restore(nlohmann::json::parse(text));
        CHECK(b.table() == a.table());
        CHECK(b.state() == a.state());
        CHECK(b.explore() == a.explore());
        // Identical continuation.
        Rng ra(77), rb(77);
        drive(a, ra, 50);
        drive(b, rb, 50);
        CHECK(b.table() == a.table());
    }
    ThresholdAgent fresh("camera", kProto, c);
    ThresholdAgent copy("camera", kProto, c);
    copy.restore(nlohmann::json::parse(fresh.to_json().dump()));
    CHECK(copy.table() == fresh.table());
}

TEST_CASE("mismatched table shapes are rejected") {
    AgentConfig c;
    ThresholdAgent a("camera", kProto, c);
    AgentConfig other = c;
    other.action_grid = AgentConfig::default_action_grid(11);
    ThresholdAgent b("camera", kProto, other);
    try {
        b.restore(a.to_json());
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::FingerprintMismatch);
    }
    AgentConfig bins = c;
    bins.hit_bins = 5;
    CHECK_THROWS_AS(qtable_from_json(qtable_to_json(QTable(c), c), bins), Error);
}

TEST_CASE("config validation names the field") {
    auto path_of = [](AgentConfig c) -> std::string {
        try {
            c.validate();
        } catch (const ConfigError& e) {
            return e.path();
        }
        return "";
    };
    AgentConfig c;
    CHECK(path_of(c).empty());
    c.learning_rate = 0.0;
    CHECK(path_of(c) == "agent.learning_rate");
    c = {};
    c.discount = 1.0;
    CHECK(path_of(c) == "agent.discount");
    c = {};
    c.action_grid = {0.5, 0.2};
    CHECK(path_of(c) == "agent.action_grid");
    c = {};
    c.episode_len = 0;
    CHECK(path_of(c) == "agent.episode_len");
}

TEST_CASE("fixed threshold scoring skips missing values") {
    std::vector<WindowObservations> w{{{0.2, Truth::Attack}, {std::nullopt, Truth::Attack}}, {{0.9, Truth::Benign}}};
    const auto c = score_threshold(w, {kProto, 0.5, Direction::ALARM_IF_BELOW});
    CHECK(c == ConfusionCounts{1, 0, 0, 1});
}
