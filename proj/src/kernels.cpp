#include "rlids/kernels.hpp"

#include <cstring>

#include "rlids/error.hpp"

namespace rlids {
namespace {

std::size_t first_index(const MetricInputs& in, const Window& w) {
    return w.records.empty() ? 0 : static_cast<std::size_t>(w.records.data() - in.records.data());
}

std::optional<FeatureDistribution> distribution_at(const MetricInputs& in, std::size_t w, std::size_t d,
                                                   FeatureKind f) {
    const Window& win = in.windows[w];
    return build_distribution(win, first_index(in, win), f, static_cast<std::int32_t>(d), *in.resolved);
}

void compute_cell(const MetricInputs& in, MetricTable& t, std::size_t w, std::size_t d, std::size_t f) {
    const MetricSpec& spec = in.specs[f];
    const auto dist = distribution_at(in, w, d, spec.feature);
    if (!dist) return;
    const std::size_t i = t.index(w, d, f);
    t.distinct[i] = dist->distinct_count();
    t.total[i] = dist->total_count;
    if (spec.metric == Metric::ENTROPY) {
        t.values[i] = normalized_entropy(*dist, in.entropy);
        return;
    }
    std::vector<FeatureDistribution> history;
    const std::size_t lo = w >= in.baseline_windows ? w - in.baseline_windows : 0;
    for (std::size_t k = lo; k < w; ++k) {
        if (auto h = distribution_at(in, k, d, spec.feature)) history.push_back(std::move(*h));
    }
    const auto baseline = FeatureDistribution::pool(history);
    // Without history there is nothing to diverge from.
    const double kl = baseline ? kl_divergence(*dist, *baseline, in.entropy) : 0.0;
    t.values[i] = -std::expm1(-kl * std::log(in.entropy.base));
}

void check_inputs(const MetricInputs& in) {
    if (in.resolved == nullptr) throw std::invalid_argument("compute_metrics: resolved records required");
    if (in.resolved->src_device.size() != in.records.size()) {
        throw std::invalid_argument("compute_metrics: resolved records do not match the stream");
    }
    in.entropy.validate();
}

}  // namespace

std::string_view to_string(Metric m) { return m == Metric::ENTROPY ? "entropy" : "kl_baseline"; }

std::optional<Metric> parse_metric(std::string_view text) {
    if (text == "entropy") return Metric::ENTROPY;
    if (text == "kl_baseline") return Metric::KL_BASELINE;
    return std::nullopt;
}

bool operator==(const MetricTable& a, const MetricTable& b) {
    if (a.windows != b.windows || a.devices != b.devices || a.features != b.features) return false;
    if (a.distinct != b.distinct || a.total != b.total) return false;
    // Bitwise so NaN cells compare equal.
    return a.values.size() == b.values.size() &&
           std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) == 0;
}

MetricTable compute_metrics_serial(const MetricInputs& in) {
    check_inputs(in);
    MetricTable t(in.windows.size(), in.devices, in.specs.size());
    for (std::size_t w = 0; w < t.windows; ++w) {
        for (std::size_t d = 0; d < t.devices; ++d) {
            for (std::size_t f = 0; f < t.features; ++f) compute_cell(in, t, w, d, f);
        }
    }
    return t;
}

MetricTable compute_metrics(const MetricInputs& in) {
    check_inputs(in);
    MetricTable t(in.windows.size(), in.devices, in.specs.size());
    const auto cells = static_cast<std::ptrdiff_t>(t.windows * t.devices * t.features);
    const std::size_t per_window = t.devices * t.features;
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t c = 0; c < cells; ++c) {
        const auto u = static_cast<std::size_t>(c);
        const std::size_t w = u / per_window;
        const std::size_t rest = u % per_window;
        compute_cell(in, t, w, rest / t.features, rest % t.features);
    }
    return t;
}

std::vector<ConfusionCounts> sweep_thresholds_serial(std::span<const WindowObservations> windows,
                                                     FeatureKind feature, Direction direction,
                                                     std::span<const double> grid) {
    std::vector<ConfusionCounts> out(grid.size());
    for (std::size_t a = 0; a < grid.size(); ++a) {
        out[a] = score_threshold(windows, ThresholdEntry{feature, grid[a], direction});
    }
    return out;
}

std::vector<ConfusionCounts> sweep_thresholds(std::span<const WindowObservations> windows, FeatureKind feature,
                                              Direction direction, std::span<const double> grid) {
    std::vector<ConfusionCounts> out(grid.size());
    const auto n = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t a = 0; a < n; ++a) {
        const auto i = static_cast<std::size_t>(a);
        out[i] = score_threshold(windows, ThresholdEntry{feature, grid[i], direction});
    }
    return out;
}

}  // namespace rlids
