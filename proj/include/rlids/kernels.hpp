#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rlids/detector.hpp"
#include "rlids/entropy.hpp"
#include "rlids/rl_agent.hpp"
#include "rlids/windowing.hpp"

namespace rlids {

enum class Metric : std::uint8_t {
    ENTROPY,      // normalized Shannon entropy of the window
    KL_BASELINE,  // 1 - exp(-KL(window || pooled trailing baseline))
};

std::string_view to_string(Metric m);
std::optional<Metric> parse_metric(std::string_view text);

struct MetricSpec {
    FeatureKind feature;
    Metric metric = Metric::ENTROPY;
};

// Dense windows x devices x features table. NaN marks "no measurement".
struct MetricTable {
    std::size_t windows = 0;
    std::size_t devices = 0;
    std::size_t features = 0;
    std::vector<double> values;
    std::vector<std::size_t> distinct;  // support size of the window distribution
    std::vector<std::size_t> total;     // packets counted

    MetricTable() = default;
    MetricTable(std::size_t w, std::size_t d, std::size_t f)
        : windows(w), devices(d), features(f), values(w * d * f, std::numeric_limits<double>::quiet_NaN()),
          distinct(w * d * f, 0), total(w * d * f, 0) {}

    std::size_t index(std::size_t w, std::size_t d, std::size_t f) const { return (w * devices + d) * features + f; }
    double at(std::size_t w, std::size_t d, std::size_t f) const { return values[index(w, d, f)]; }
    bool measured(std::size_t w, std::size_t d, std::size_t f) const { return !std::isnan(at(w, d, f)); }

    friend bool operator==(const MetricTable& a, const MetricTable& b);
};

struct MetricInputs {
    std::span<const PacketRecord> records;
    std::span<const Window> windows;  // views into `records`
    const ResolvedRecords* resolved = nullptr;
    std::size_t devices = 0;
    std::span<const MetricSpec> specs;
    EntropyConfig entropy;
    std::size_t baseline_windows = 6;  // trailing windows pooled for KL_BASELINE
};

// Reference implementation, single-threaded.
MetricTable compute_metrics_serial(const MetricInputs& in);
// OpenMP version; produces a table equal to the serial one.
MetricTable compute_metrics(const MetricInputs& in);

// Confusion counts of every grid threshold on a fixed observation stream.
std::vector<ConfusionCounts> sweep_thresholds_serial(std::span<const WindowObservations> windows,
                                                     FeatureKind feature, Direction direction,
                                                     std::span<const double> grid);
std::vector<ConfusionCounts> sweep_thresholds(std::span<const WindowObservations> windows, FeatureKind feature,
                                              Direction direction, std::span<const double> grid);

}  // namespace rlids
