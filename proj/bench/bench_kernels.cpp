#include <benchmark/benchmark.h>

#include "rlids/attack_sim.hpp"
#include "rlids/kernels.hpp"

using namespace rlids;

namespace {

struct Stream {
    Simulation sim;
    std::vector<std::string> devices;
    std::vector<Window> windows;
    ResolvedRecords resolved;
    std::vector<MetricSpec> specs{{FeatureKind::protocol(), Metric::ENTROPY},
                                  {{FeatureType::PORT, Side::RECEIVED}, Metric::ENTROPY},
                                  {{FeatureType::SRC_IP, Side::RECEIVED}, Metric::ENTROPY},
                                  {FeatureKind::protocol(), Metric::KL_BASELINE}};

    explicit Stream(std::size_t n_devices) {
        Scenario sc;
        for (std::size_t i = 0; i < n_devices; ++i) {
            const std::string id = "dev" + std::to_string(i);
            devices.push_back(id);
            sc.profiles.push_back(default_profile(id, Ipv4::from_octets(192, 168, 1, static_cast<std::uint8_t>(10 + i))));
        }
        MutativeParams p;
        p.count = 10;
        p.targets = devices;
        Rng rng(1);
        sc.schedule = mutative_schedule(p, rng);
        sim = simulate(sc);
        windows = assign_windows(sim.records, 10 * kMicrosPerSecond, 0);
        resolved = ResolvedRecords::resolve(sim.records, sim.devices, devices);
    }

    MetricInputs inputs() const { return {sim.records, windows, &resolved, devices.size(), specs, {}, 6}; }
};

const Stream& stream() {
    static const Stream s(8);
    return s;
}

std::vector<WindowObservations> observations(std::size_t windows) {
    Rng rng(2);
    std::vector<WindowObservations> out(windows);
    for (auto& w : out) {
        for (int d = 0; d < 4; ++d) w.push_back({rng.uniform(), rng.uniform() < 0.3 ? Truth::Attack : Truth::Benign});
    }
    return out;
}

void BM_MetricsSerial(benchmark::State& st) {
    const auto in = stream().inputs();
    for (auto _ : st) benchmark::DoNotOptimize(compute_metrics_serial(in));
    st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * in.records.size()));
}

void BM_MetricsParallel(benchmark::State& st) {
    const auto in = stream().inputs();
    for (auto _ : st) benchmark::DoNotOptimize(compute_metrics(in));
    st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * in.records.size()));
}

void BM_SweepSerial(benchmark::State& st) {
    const auto obs = observations(static_cast<std::size_t>(st.range(0)));
    const auto grid = AgentConfig::default_action_grid();
    for (auto _ : st) {
        benchmark::DoNotOptimize(sweep_thresholds_serial(obs, FeatureKind::protocol(), Direction::ALARM_IF_BELOW, grid));
    }
}

void BM_SweepParallel(benchmark::State& st) {
    const auto obs = observations(static_cast<std::size_t>(st.range(0)));
    const auto grid = AgentConfig::default_action_grid();
    for (auto _ : st) {
        benchmark::DoNotOptimize(sweep_thresholds(obs, FeatureKind::protocol(), Direction::ALARM_IF_BELOW, grid));
    }
}

}  // namespace

BENCHMARK(BM_MetricsSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MetricsParallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_SweepSerial)->Arg(6000)->Arg(60000)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_SweepParallel)->Arg(6000)->Arg(60000)->Unit(benchmark::kMicrosecond)->UseRealTime();

BENCHMARK_MAIN();
